use fstg_cli::config::ExperimentConfig;
use serde_json::Value;

fn load(name: &str) -> Value {
    let path = format!("{}/schema/{name}", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Walks the value and the schema together: every object key must be
/// declared, every declared key must exist, and declared defaults must match.
fn agree(value: &Value, schema: &Value, path: &str) {
    let schema = match schema.get("oneOf") {
        Some(Value::Array(alts)) if value.is_null() => {
            return assert!(alts.iter().any(|a| a["type"] == "null"), "{path}")
        }
        Some(Value::Array(alts)) => &alts[0],
        _ => schema,
    };
    if let Some(d) = schema.get("default") {
        assert_eq!(d, value, "default of {path}");
    }
    if let Value::Object(map) = value {
        let props = schema["properties"]
            .as_object()
            .unwrap_or_else(|| panic!("{path} has no properties"));
        assert_eq!(schema["additionalProperties"], Value::Bool(false), "{path}");
        for (k, v) in map {
            let sub = props.get(k).unwrap_or_else(|| panic!("{path}.{k} undeclared"));
            agree(v, sub, &format!("{path}.{k}"));
        }
        for k in props.keys() {
            assert!(map.contains_key(k), "{path}.{k} declared but not a config field");
        }
    }
}

#[test]
fn config_schema_matches_the_config_type() {
    let mut defaults = serde_json::to_value(ExperimentConfig::default()).unwrap();
    agree(&defaults, &load("config.schema.json"), "");
    // optional sections have their own shape
    defaults["seresnet"]["augment"] = serde_json::to_value(fstg_core::augment::AugmentConfig::default()).unwrap();
    agree(&defaults, &load("config.schema.json"), "");
}

#[test]
fn report_schema_matches_the_report_type() {
    use fstg_core::metrics::{evaluate_run, BootstrapConfig, PredictionSet, Task};
    let p = PredictionSet::new(Task::Mfi, vec![0, 1, 0, 1, 1], vec![0.1, 0.8, 0.4, 0.3, 0.9]).unwrap();
    let cfg = BootstrapConfig {
        n_iter: 20,
        ..BootstrapConfig::default()
    };
    let report = serde_json::to_value(evaluate_run(&p, &cfg).unwrap()).unwrap();
    let schema = load("report.schema.json");
    let required: Vec<&str> = schema["required"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    let keys: Vec<&str> = report.as_object().unwrap().keys().map(String::as_str).collect();
    let (mut a, mut b) = (required.clone(), keys.clone());
    a.sort_unstable();
    b.sort_unstable();
    assert_eq!(a, b);
    assert_eq!(report["task"], "mfi");
}

#[test]
fn shipped_configs_parse() {
    let dir = format!("{}/configs", env!("CARGO_MANIFEST_DIR"));
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        ExperimentConfig::parse(&text).unwrap();
        n += 1;
    }
    assert!(n > 0);
}

#[test]
fn nested_typos_are_rejected() {
    for text in [
        r#"{"phantom": {"n_patient": 10}}"#,
        r#"{"harmonize": {"train": {"epoch": 3}}}"#,
        r#"{"seresnet": {"train": {"lr": 0.1}}}"#,
        r#"{"mlp": {"hiden": 4}}"#,
    ] {
        assert!(ExperimentConfig::parse(text).is_err(), "{text}");
    }
}

#[test]
fn config_floats_survive_json_roundtrip() {
    let x = 5.1111111111111115e59_f64;
    let back: f64 = serde_json::from_str(&serde_json::to_string(&x).unwrap()).unwrap();
    assert_eq!(back.to_bits(), x.to_bits());
}
