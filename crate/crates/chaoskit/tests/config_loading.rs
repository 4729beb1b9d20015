use chaoskit::config::{load_config, ConfigError, RunConfig};
use serde_json::{json, Value};

fn minimal() -> Value {
    json!({
        "kernel": {"family": "NEWTONIAN_CUTOFF", "d": 2, "delta": 0.3},
        "sim": {"sigma": 0.25, "dt": 0.05, "T": 0.5, "seed": 1},
        "init": {"kind": "GAUSSIAN", "position_scale": 1.0, "velocity_scale": 1.0},
        "experiment": {"N_grid": [64], "replicas": 2, "times": [0.5], "p": 1.0, "q": 4.0, "epsilon": 1.0, "gamma": 0.2}
    })
}

fn power() -> Value {
    let mut v = minimal();
    v["kernel"] = json!({"family": "POWER_CUTOFF", "d": 3, "alpha": 0.5, "delta": 0.25});
    v["experiment"]["gamma"] = Value::Null;
    v["experiment"]["ell"] = json!(3.0);
    v
}

fn load(v: &Value) -> Result<RunConfig, ConfigError> {
    RunConfig::from_json(&serde_json::to_string_pretty(v).unwrap())
}

fn rejected(v: &Value, field: &str, rule: &str) {
    match load(v) {
        Err(ConfigError::Constraint { field: f, reason }) => {
            assert_eq!(f, field, "{reason}");
            assert!(reason.contains(rule), "`{reason}` should mention `{rule}`");
        }
        other => panic!("expected rejection of {field}, got {other:?}"),
    }
}

#[test]
fn minimal_config_loads_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, serde_json::to_string(&minimal()).unwrap()).unwrap();
    let cfg = load_config(&path).unwrap();
    assert_eq!(cfg.kernel.d, 2);
    assert_eq!(cfg.experiment.unwrap().n_grid, vec![64]);
    assert_eq!(cfg.threads, 0);
    assert!(cfg.output.csv && cfg.output.json && !cfg.output.binary);
}

#[test]
fn power_baseline_loads() {
    load(&power()).unwrap();
}

#[test]
fn delta_at_least_inverse_dimension_is_refused() {
    let mut v = minimal();
    v["kernel"]["delta"] = json!(0.6);
    rejected(&v, "kernel.delta", "< 1/d");
    // Without an experiment section the kernel gate still applies.
    v.as_object_mut().unwrap().remove("experiment");
    rejected(&v, "kernel.delta", "< 1/d");
}

#[test]
fn alpha_above_the_integrability_limit_is_refused() {
    let mut v = power();
    v["kernel"]["alpha"] = json!(2.5);
    v["experiment"]["ell"] = Value::Null;
    rejected(&v, "kernel.alpha", "< d/ell' - 1");
}

#[test]
fn newtonian_rate_has_no_default() {
    let mut v = minimal();
    v["experiment"].as_object_mut().unwrap().remove("gamma");
    rejected(&v, "experiment.gamma", "required");
}

#[test]
fn every_rate_hypothesis_is_enforced_at_load() {
    let cases: Vec<(Value, &str, &str)> = vec![
        ({ let mut v = minimal(); v["kernel"]["d"] = json!(1); v }, "kernel.d", "> 1"),
        ({ let mut v = minimal(); v["kernel"]["family"] = json!("NEWTONIAN_EXACT"); v }, "kernel.family", "cut-off"),
        ({ let mut v = minimal(); v["experiment"]["q"] = json!(1.5); v }, "experiment.q", ">= 2"),
        ({ let mut v = minimal(); v["experiment"]["p"] = json!(0.5); v }, "experiment.p", ">= 1"),
        ({ let mut v = minimal(); v["experiment"]["p"] = json!(9.0); v }, "experiment.p", "< 2q"),
        ({ let mut v = minimal(); v["experiment"]["gamma"] = json!(-0.1); v }, "experiment.gamma", ">= 0"),
        ({ let mut v = minimal(); v["experiment"]["gamma"] = json!(0.26); v }, "experiment.gamma", "< 1/(2 max(d, p))"),
        (
            { let mut v = minimal(); v["kernel"]["delta"] = json!(0.2); v["experiment"]["gamma"] = json!(0.22); v },
            "experiment.gamma",
            "< delta",
        ),
        ({ let mut v = minimal(); v["experiment"]["epsilon"] = json!(0.0); v }, "experiment.epsilon", "> 0"),
        ({ let mut v = minimal(); v["experiment"]["epsilon"] = json!(2.8); v }, "experiment.epsilon", "< q - p/(1 - p gamma)"),
        ({ let mut v = minimal(); v["experiment"]["ell"] = json!(2.0); v }, "experiment.ell", "power-law"),
        ({ let mut v = power(); v["experiment"]["ell"] = json!(0.5); v }, "experiment.ell", ">= 1"),
        ({ let mut v = power(); v["kernel"]["alpha"] = json!(1.2); v }, "kernel.alpha", "< d/ell' - 1"),
        ({ let mut v = power(); v["experiment"]["ell"] = Value::Null; v }, "kernel.delta", "1/(1+alpha)"),
        ({ let mut v = power(); v["experiment"]["p"] = json!(4.5); v }, "experiment.p", "p delta must be < 1"),
        ({ let mut v = power(); v["experiment"]["epsilon"] = json!(2.7); v }, "experiment.epsilon", "< q - p/(1 - p delta)"),
        ({ let mut v = power(); v["experiment"]["gamma"] = json!(0.3); v }, "experiment.gamma", "[0, delta]"),
    ];
    for (v, field, rule) in &cases {
        rejected(v, field, rule);
    }
}

#[test]
fn unknown_keys_are_refused_with_their_path() {
    let mut v = minimal();
    v["kernel"]["bogus"] = json!(1);
    match load(&v) {
        Err(ConfigError::Parse { field, message, .. }) => {
            assert!(field.starts_with("kernel"), "{field}");
            assert!(message.contains("bogus"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    let mut v = minimal();
    v["validation"] = json!({"fg": {"seed": 3}});
    assert!(matches!(load(&v), Err(ConfigError::Parse { .. })));
}

#[test]
fn syntax_errors_carry_line_and_column() {
    let text = "{\n  \"kernel\": {\"family\": \"NEWTONIAN_CUTOFF\",\n  \"d\": 2,,\n}";
    match RunConfig::from_json(text) {
        Err(ConfigError::Parse { line, column, .. }) => {
            assert_eq!(line, 3);
            assert!(column > 0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(
        load_config(std::path::Path::new("/nonexistent/run.json")),
        Err(ConfigError::Io { .. })
    ));
}

#[test]
fn validation_sections_take_partial_overrides() {
    let mut v = minimal();
    v["validation"] = json!({"kernels": {"pairs": 10}, "gronwall": {"form": "proof"}});
    let cfg = load(&v).unwrap();
    assert_eq!(cfg.validation.kernels.pairs, 10);
    assert_eq!(cfg.validation.kernels.big_n, vec![16, 256, 4096]);
    assert_eq!(cfg.validation.gronwall.trials, 100);
    let mut v = minimal();
    v["validation"] = json!({"ot": {"max_n": 9}});
    rejected(&v, "validation.ot.max_n", "[1, 8]");
}

#[test]
fn schema_documents_every_section() {
    let s = RunConfig::schema();
    let props = s["properties"].as_object().unwrap();
    for key in ["kernel", "sim", "init", "experiment", "output", "threads", "chaos", "validation"] {
        assert!(props.contains_key(key), "{key}");
    }
}

#[test]
fn round_trips_through_json() {
    let cfg = load(&power()).unwrap();
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
}
