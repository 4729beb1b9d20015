//! On-disk layouts of snapshots, monitors, distances and rate reports.

use std::collections::BTreeMap;

use anyhow::{bail, Result};
use chaoskit_core::dynamics::Ensemble;
use chaoskit_core::experiments::{median, DtHalving, RateReport};
use chaoskit_core::transport::DistanceResult;
use serde::Serialize;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"CHKS";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const SNAPSHOT_HEADER: usize = 32;

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner()?)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Rows `replica,t,system,particle,x0..,v0..` accumulated over snapshots.
#[derive(Default)]
pub struct SnapshotTable {
    d: Option<usize>,
    rows: Vec<Vec<String>>,
}

impl SnapshotTable {
    pub fn push(&mut self, replica: u32, system: &str, ens: &Ensemble) -> Result<()> {
        match self.d {
            Some(d) if d != ens.d => bail!("snapshot dimension changed from {d} to {}", ens.d),
            _ => self.d = Some(ens.d),
        }
        for i in 0..ens.len() {
            let mut r = vec![replica.to_string(), ens.t.to_string(), system.to_string(), i.to_string()];
            r.extend(ens.position(i).iter().map(|x| x.to_string()));
            r.extend(ens.velocity(i).iter().map(|x| x.to_string()));
            self.rows.push(r);
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let d = self.d.unwrap_or(0);
        let mut header: Vec<String> = ["replica", "t", "system", "particle"].map(String::from).to_vec();
        header.extend((0..d).map(|a| format!("x{a}")));
        header.extend((0..d).map(|a| format!("v{a}")));
        csv_bytes(&header, self.rows.iter().cloned())
    }
}

/// 32-byte header (`CHKS`, version, `N`, `d`, `t`, padding) followed by one
/// row `x0.., v0..` per particle, all little-endian.
pub fn encode_snapshot(ens: &Ensemble) -> Vec<u8> {
    let mut out = Vec::with_capacity(SNAPSHOT_HEADER + 16 * ens.positions.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(ens.len() as u32).to_le_bytes());
    out.extend_from_slice(&(ens.d as u32).to_le_bytes());
    out.extend_from_slice(&ens.t.to_le_bytes());
    out.extend_from_slice(&[0u8; 8]);
    for i in 0..ens.len() {
        for x in ens.position(i).iter().chain(ens.velocity(i)) {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<Ensemble> {
    if bytes.len() < SNAPSHOT_HEADER || &bytes[..4] != SNAPSHOT_MAGIC {
        bail!("not a snapshot file");
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != SNAPSHOT_VERSION {
        bail!("unsupported snapshot version {version}");
    }
    let (n, d) = (u32_at(8) as usize, u32_at(12) as usize);
    let t = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let body = &bytes[SNAPSHOT_HEADER..];
    if body.len() != n * 2 * d * 8 {
        bail!("snapshot body has {} bytes, expected {}", body.len(), n * 2 * d * 8);
    }
    let vals: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let (mut x, mut v) = (Vec::with_capacity(n * d), Vec::with_capacity(n * d));
    for row in vals.chunks_exact(2 * d) {
        x.extend_from_slice(&row[..d]);
        v.extend_from_slice(&row[d..]);
    }
    Ok(Ensemble::new(d, x, v, t)?)
}

/// `t,quantity,value`.
#[derive(Default)]
pub struct MonitorTable(Vec<(f64, &'static str, f64)>);

impl MonitorTable {
    pub fn push(&mut self, t: f64, quantity: &'static str, value: f64) {
        self.0.push((t, quantity, value));
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let header = ["t", "quantity", "value"].map(String::from);
        csv_bytes(&header, self.0.iter().map(|(t, q, v)| vec![t.to_string(), q.to_string(), v.to_string()]))
    }
}

/// `replica,t,pair,method,p,value,stderr`.
#[derive(Default)]
pub struct DistanceTable(Vec<(u32, f64, String, DistanceResult)>);

impl DistanceTable {
    pub fn push(&mut self, replica: u32, t: f64, pair: &str, d: DistanceResult) {
        self.0.push((replica, t, pair.to_string(), d));
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let header = ["replica", "t", "pair", "method", "p", "value", "stderr"].map(String::from);
        csv_bytes(
            &header,
            self.0.iter().map(|(r, t, pair, d)| {
                vec![
                    r.to_string(),
                    t.to_string(),
                    pair.clone(),
                    d.method.as_str().to_string(),
                    d.p.to_string(),
                    d.value.to_string(),
                    fmt_opt(d.stderr),
                ]
            }),
        )
    }
}

/// A rate report together with the configuration that produced it.
#[derive(Serialize)]
pub struct ReportDocument<'a, C: Serialize> {
    pub config: &'a C,
    #[serde(flatten)]
    pub report: &'a RateReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_halving: Option<&'a DtHalving>,
}

/// Per-replica values: `N,t,leg,replica,value`.
pub fn rate_values_csv(r: &RateReport) -> Result<Vec<u8>> {
    let header = ["N", "t", "leg", "replica", "value"].map(String::from);
    let rows = r.per_n.iter().flat_map(|s| {
        s.replicas
            .iter()
            .zip(&s.values)
            .map(|(rep, v)| vec![s.n.to_string(), s.t.to_string(), s.leg.clone(), rep.to_string(), v.to_string()])
    });
    csv_bytes(&header, rows)
}

/// `N,t,leg,c,freq`.
pub fn exceedance_csv(r: &RateReport) -> Result<Vec<u8>> {
    let header = ["N", "t", "leg", "c", "freq"].map(String::from);
    let rows = r.per_n.iter().flat_map(|s| {
        s.exceedance
            .0
            .iter()
            .map(|(c, f)| vec![s.n.to_string(), s.t.to_string(), s.leg.clone(), c.to_string(), f.to_string()])
    });
    csv_bytes(&header, rows)
}

/// One row per fitted leg and time, headline first.
pub fn fits_csv(r: &RateReport) -> Result<Vec<u8>> {
    let header = ["leg", "t", "center", "slope", "intercept", "ci_low", "ci_high", "spearman", "points", "degenerate"]
        .map(String::from);
    let headline = r
        .metadata
        .get("headline_leg")
        .cloned()
        .or_else(|| r.per_n.first().map(|s| s.leg.clone()))
        .unwrap_or_default();
    let t = r
        .metadata
        .get("headline_t")
        .cloned()
        .or_else(|| r.per_n.first().map(|s| s.t.to_string()))
        .unwrap_or_default();
    let mut rows = vec![vec![
        format!("{headline} (headline)"),
        t,
        "median".into(),
        fmt_opt(r.fit.slope),
        fmt_opt(r.fit.intercept),
        fmt_opt(r.fit.ci_low),
        fmt_opt(r.fit.ci_high),
        fmt_opt(r.fit.spearman),
        r.fit.points.to_string(),
        r.fit.degenerate.to_string(),
    ]];
    for f in &r.fits {
        rows.push(vec![
            f.leg.clone(),
            f.t.to_string(),
            serde_json::to_value(f.center)?.as_str().unwrap_or_default().to_string(),
            fmt_opt(f.fit.slope),
            fmt_opt(f.fit.intercept),
            fmt_opt(f.fit.ci_low),
            fmt_opt(f.fit.ci_high),
            fmt_opt(f.fit.spearman),
            f.fit.points.to_string(),
            f.fit.degenerate.to_string(),
        ]);
    }
    csv_bytes(&header, rows)
}

/// Medians by `(leg, t)` then `N`, for summary tables.
pub fn median_table(r: &RateReport) -> BTreeMap<(String, String), Vec<(usize, f64, usize)>> {
    let mut out: BTreeMap<(String, String), Vec<(usize, f64, usize)>> = BTreeMap::new();
    for s in &r.per_n {
        if let Some(m) = median(&s.values) {
            out.entry((s.leg.clone(), s.t.to_string())).or_default().push((s.n, m, s.values.len()));
        }
    }
    out
}

/// Generic table of serializable rows with the given columns.
pub fn records_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}
