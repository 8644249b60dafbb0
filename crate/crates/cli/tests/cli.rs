use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const TOPOLOGY: &str = r#"{"layers": [
  {"name": "ml", "qubits": [0, 1], "measured": [1]},
  {"name": "ul", "qubits": [0, 1]}
]}"#;

const NOISE: &str = r#"{"layers": {
  "ml": {"model": {"qubits": [0, 1], "generators": ["IX", "XI", "ZX"], "lambdas": [0.01, 0.005, 0.004]}},
  "ul": {"model": {"qubits": [0, 1], "generators": ["XI", "IZ", "ZZ"], "lambdas": [0.01, 0.006, 0.003]}}
}}"#;

fn setup() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("topo.json"), TOPOLOGY).unwrap();
    fs::write(dir.path().join("noise.json"), NOISE).unwrap();
    dir
}

fn mpec(dir: &Path, args: &[&str], config: &str) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_mpec"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn error_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

#[test]
fn learn_noiseless_gives_unit_gamma() {
    let dir = setup();
    let out = mpec(
        dir.path(),
        &["learn"],
        r#"{"family": "feedforward", "alpha": 1.0, "topology": "topo.json", "layers": ["ml"],
            "learning": {"executor": "exact", "instances": 1, "bootstrap": 0}, "seed": 4, "out": "o"}"#,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json_file(&dir.path().join("o/learn_ml.json"));
    assert!((report["gamma"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(report["seed"], 4);
    assert_eq!(report["bases"].as_array().unwrap().len(), 7);
    let csv = fs::read_to_string(dir.path().join("o/decay_ml.csv")).unwrap();
    assert!(csv.starts_with("# seed: 4\ndepth,basis,mean,stderr\n"));
}

#[test]
fn learn_planted_pair_model() {
    let dir = setup();
    let out = mpec(
        dir.path(),
        &["learn"],
        r#"{"family": "feedforward", "alpha": 1.0, "topology": "topo.json", "noise": "noise.json",
            "layers": ["ml"], "learning": {"executor": "exact", "instances": 1, "bootstrap": 0}, "out": "o"}"#,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let l = &json_file(&dir.path().join("o/learn_ml.json"))["lambdas"];
    for (g, v) in [("IX", 0.01), ("XI", 0.005), ("ZX", 0.004), ("XX", 0.0), ("YI", 0.0)] {
        assert!((l[g].as_f64().unwrap() - v).abs() < 1e-10, "{g}: {}", l[g]);
    }
}

#[test]
fn missing_topology_is_a_config_error() {
    let dir = setup();
    let out = mpec(dir.path(), &["learn"], r#"{"family": "feedforward", "alpha": 1.0, "out": "o"}"#);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["error"], "config");
    assert!(!dir.path().join("o").exists());

    let out = mpec(
        dir.path(),
        &["learn"],
        r#"{"family": "feedforward", "alpha": 1.0, "topology": "nowhere.json"}"#,
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn schema_violations_fail_before_computation() {
    let dir = setup();
    let out = mpec(dir.path(), &["ptm"], r#"{"family": "tile", "colour": 3, "out": "o"}"#);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["error"], "schema");
    let out = mpec(dir.path(), &["mitigate"], r#"{"family": "feedforward", "alpha": 1.5}"#);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn validation_budget_cap_exits_3() {
    let dir = setup();
    let out = mpec(
        dir.path(),
        &["validate"],
        r#"{"family": "feedforward", "alpha": 1.0, "noise": "noise.json", "models": "planted",
            "layers": ["ml"], "max_instances": 1000, "out": "o"}"#,
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_of(&out)["error"], "budget");
}

#[test]
fn validation_with_perfect_model_is_flat() {
    let dir = setup();
    let out = mpec(
        dir.path(),
        &["validate"],
        r#"{"family": "feedforward", "alpha": 1.0, "noise": "noise.json", "models": "planted",
            "layers": ["ml"], "learning": {"executor": "exact", "instances": 400, "depths": [0, 1, 2, 4]},
            "out": "o"}"#,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json_file(&dir.path().join("o/validate_ml.json"));
    for (m, u) in s["mitigated"].as_array().unwrap().iter().zip(s["unmitigated"].as_array().unwrap()) {
        let (f, se) = (m["f"].as_f64().unwrap(), m["stderr"].as_f64().unwrap());
        assert!((f - 1.0).abs() <= 3.0 * se + 1e-9, "{m}");
        assert!(u["f"].as_f64().unwrap() < 1.0);
    }
    assert!(dir.path().join("o/validate_ml_mitigated.csv").exists());
}

#[test]
fn mitigate_reports_three_arms() {
    let dir = setup();
    let out = mpec(
        dir.path(),
        &["mitigate"],
        r#"{"experiment": "feedforward", "alpha": 1.0, "noise": "noise.json", "models": "planted",
            "mitigation": {"instances": 32, "shots": 32, "exact": true, "post_select": "0", "bootstrap": 100},
            "out": "o"}"#,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json_file(&dir.path().join("o/mitigate.json"));
    for r in doc["results"].as_array().unwrap() {
        let e = &r["exact"];
        let (full, uo, raw) = (e["full"].as_f64().unwrap(), e["unitary_only"].as_f64().unwrap(), e["raw"].as_f64().unwrap());
        assert!((full - e["ideal"].as_f64().unwrap()).abs() < 1e-10);
        assert!(full >= uo - 1e-12 && uo >= raw - 1e-12, "{r}");
        for arm in ["full", "unitary_only", "raw"] {
            assert!(r["arms"][arm]["value"].is_number());
        }
        assert!(r["post_selected"]["arms"]["full"]["diagnostic"].as_bool().unwrap());
    }
}

#[test]
fn tile_stabilizers_are_ideal_without_noise() {
    let dir = setup();
    let out = mpec(
        dir.path(),
        &["mitigate"],
        r#"{"experiment": "tile", "mitigation": {"arms": ["raw"], "instances": 8, "shots": 64}, "out": "o"}"#,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json_file(&dir.path().join("o/mitigate.json"));
    for r in doc["results"].as_array().unwrap() {
        assert_eq!(r["arms"]["raw"]["value"].as_f64().unwrap(), 1.0, "{r}");
    }
}

#[test]
fn empty_post_selection_is_numerical_failure() {
    let dir = setup();
    let out = mpec(
        dir.path(),
        &["mitigate"],
        r#"{"experiment": "feedforward", "alpha": 1.0,
            "mitigation": {"arms": ["raw"], "instances": 4, "shots": 16, "post_select": "1"}, "out": "o"}"#,
    );
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_of(&out)["error"], "numerical");
}

fn ptm_rows(path: &Path) -> Vec<(String, Vec<f64>)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| {
            let mut it = l.split(',');
            let label = it.next().unwrap().to_string();
            (label, it.map(|v| v.parse().unwrap()).collect())
        })
        .collect()
}

#[test]
fn ptm_of_identity_feedforward_layer() {
    let dir = setup();
    let circuit = r#"{"n_qubits": 2, "n_clbits": 1, "layers": [
        {"kind": "measurement", "qubits": [1], "clbits": [0], "label": "m",
         "feedforward": [{"clbit": 0, "value": 1, "op": "i", "target": 0}]},
        {"kind": "dephase", "qubits": [1]}
    ]}"#;
    fs::write(dir.path().join("c.json"), circuit).unwrap();
    let out = mpec(
        dir.path(),
        &["ptm"],
        r#"{"experiment": "ptm", "circuit": "c.json", "ptm": {"twirl_layer": "m"}, "out": "o"}"#,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = ptm_rows(&dir.path().join("o/ptm.csv"));
    let mut nonzero = Vec::new();
    for (i, (label, vals)) in rows.iter().enumerate() {
        for (j, v) in vals.iter().enumerate() {
            if i != j {
                assert!(v.abs() < 1e-10);
            } else if v.abs() > 1e-10 && label != "II" {
                nonzero.push(label.clone());
            }
        }
    }
    assert_eq!(nonzero, ["IZ", "XI", "XZ", "YI", "YZ", "ZI", "ZZ"]);

    // an X feedforward without twirling couples data and ancilla
    let ff = r#"{"n_qubits": 2, "n_clbits": 1, "layers": [
        {"kind": "measurement", "qubits": [1], "clbits": [0], "label": "m",
         "feedforward": [{"clbit": 0, "value": 1, "op": "x", "target": 0}]}
    ]}"#;
    fs::write(dir.path().join("c.json"), ff).unwrap();
    let out = mpec(dir.path(), &["ptm"], r#"{"circuit": "c.json", "out": "p"}"#);
    assert!(out.status.success());
    let rows = ptm_rows(&dir.path().join("p/ptm.csv"));
    let off: f64 = rows
        .iter()
        .enumerate()
        .flat_map(|(i, (_, v))| v.iter().enumerate().filter(move |(j, _)| *j != i).map(|(_, x)| x.abs()))
        .fold(0.0, f64::max);
    assert!(off > 0.1);
}

#[test]
fn ptm_dimension_cap() {
    let dir = setup();
    let out = mpec(dir.path(), &["ptm"], r#"{"family": "tile", "out": "o"}"#);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn decompose_removes_conditional_cnot() {
    let dir = setup();
    let out = mpec(dir.path(), &["decompose"], r#"{"family": "cc_cnot", "out": "o"}"#);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("o/decomposed.json")).unwrap();
    let c: Value = serde_json::from_str(&text).unwrap();
    let cx_rules = c["layers"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|l| l["feedforward"].as_array().cloned().unwrap_or_default())
        .filter(|r| r["op"] == "cx")
        .count();
    assert_eq!(cx_rules, 0);
    let out = mpec(dir.path(), &["decompose"], r#"{"family": "tile", "out": "o"}"#);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = setup();
    let cfg = r#"{"family": "feedforward", "alpha": 0.5, "topology": "topo.json", "noise": "noise.json",
                  "learning": {"instances": 24, "shots": 32, "bootstrap": 20, "depths": [0, 1, 2]},
                  "seed": 11}"#;
    let mut docs = Vec::new();
    for w in ["1", "3"] {
        let out_dir = format!("w{w}");
        let out = mpec(dir.path(), &["learn", "--workers", w, "--out", &out_dir], cfg);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        docs.push(
            ["learn_ul.json", "decay_ul.csv", "learn_ml.json", "decay_ml.csv"]
                .map(|f| fs::read(dir.path().join(&out_dir).join(f)).unwrap()),
        );
    }
    assert_eq!(docs[0], docs[1]);

    let out = mpec(dir.path(), &["learn", "--seed", "12", "--out", "s"], cfg);
    assert!(out.status.success());
    assert_eq!(json_file(&dir.path().join("s/learn_ml.json"))["seed"], 12);
    assert_ne!(fs::read(dir.path().join("s/decay_ml.csv")).unwrap(), docs[0][3]);
}
