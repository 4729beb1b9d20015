//! Markdown summaries of rate reports and validation runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chaoskit_core::experiments::{DtHalving, RateReport};
use serde::{Deserialize, Serialize};

use crate::formats::median_table;

/// Outcome line every command leaves next to its payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Status {
    pub command: String,
    pub passed: bool,
    pub summary: String,
}

pub const STATUS_FILE: &str = "status.json";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

pub fn rate_markdown(title: &str, r: &RateReport, halving: Option<&DtHalving>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "## {title}\n");
    let f = &r.fit;
    let _ = writeln!(
        s,
        "Headline slope {} (95% CI {} to {}), Spearman {}, {} grid points{}.\n",
        opt(f.slope),
        opt(f.ci_low),
        opt(f.ci_high),
        opt(f.spearman),
        f.points,
        if f.degenerate { ", degenerate fit" } else { "" }
    );
    for w in &r.warnings {
        let _ = writeln!(s, "- warning: {w}");
    }
    if !r.warnings.is_empty() {
        s.push('\n');
    }
    if !r.fits.is_empty() {
        let _ = writeln!(s, "| leg | t | slope | CI low | CI high | Spearman |");
        let _ = writeln!(s, "|---|---|---|---|---|---|");
        for lf in &r.fits {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} |",
                lf.leg,
                lf.t,
                opt(lf.fit.slope),
                opt(lf.fit.ci_low),
                opt(lf.fit.ci_high),
                opt(lf.fit.spearman)
            );
        }
        s.push('\n');
    }
    for ((leg, t), rows) in median_table(r) {
        let _ = writeln!(s, "### {leg} at t = {t}\n");
        let _ = writeln!(s, "| N | median | replicas |");
        let _ = writeln!(s, "|---|---|---|");
        for (n, m, k) in rows {
            let _ = writeln!(s, "| {n} | {m:.6e} | {k} |");
        }
        s.push('\n');
    }
    if let Some(h) = halving {
        let _ = writeln!(s, "### Time-step halving ({})\n", h.leg);
        let _ = writeln!(s, "| N | t | median at dt | median at dt/2 | relative change |");
        let _ = writeln!(s, "|---|---|---|---|---|");
        for row in &h.rows {
            let _ = writeln!(
                s,
                "| {} | {} | {:.6e} | {:.6e} | {:.4} |",
                row.n, row.t, row.median_dt, row.median_half, row.rel_change
            );
        }
        let _ = writeln!(s, "\nLargest relative change {:.4}.\n", h.max_rel_change);
    }
    s
}

/// Most recent run directory of `command` under `root`.
pub fn latest_run(root: &Path, command: &str) -> Option<PathBuf> {
    let dir = root.join(command);
    let mut runs: Vec<PathBuf> = fs::read_dir(dir).ok()?.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_dir()).collect();
    runs.sort();
    runs.pop()
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Deserialize)]
struct HalvingHolder {
    dt_halving: Option<DtHalving>,
}

pub const REPORTED: [&str; 9] = [
    "simulate",
    "couple",
    "chaos",
    "validate-kernels",
    "validate-ot",
    "validate-fg",
    "validate-lln",
    "validate-loglip",
    "gronwall-check",
];

/// Summary of the latest run of every command found under `root`.
pub fn collect(root: &Path) -> Result<String> {
    let mut s = String::from("# chaoskit report\n\n");
    let mut statuses = Vec::new();
    let mut sections = String::new();
    for cmd in REPORTED {
        let Some(run) = latest_run(root, cmd) else { continue };
        if let Ok(st) = read_json::<Status>(&run.join(STATUS_FILE)) {
            statuses.push(st);
        }
        for (file, title) in [
            ("rate_report.json", "Chaos experiment"),
            ("fg_report.json", "Empirical measure concentration"),
            ("lln_report.json", "Law of large numbers"),
        ] {
            let p = run.join(file);
            if p.exists() {
                let r: RateReport = read_json(&p)?;
                let h: HalvingHolder = read_json(&p)?;
                sections.push_str(&rate_markdown(title, &r, h.dt_halving.as_ref()));
            }
        }
    }
    if statuses.is_empty() && sections.is_empty() {
        s.push_str("No runs found.\n");
        return Ok(s);
    }
    if !statuses.is_empty() {
        s.push_str("| command | status | summary |\n|---|---|---|\n");
        for st in &statuses {
            let _ = writeln!(s, "| {} | {} | {} |", st.command, if st.passed { "pass" } else { "fail" }, st.summary);
        }
        s.push('\n');
    }
    s.push_str(&sections);
    Ok(s)
}
