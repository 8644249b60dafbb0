use std::fs;
use std::path::PathBuf;

use mpec::circuit::passes::decompose_cc_cnot;
use mpec::circuit::{FeedforwardOp, Layer};
use mpec::learning::{decay_csv, learn_layer};
use mpec::pec::{
    estimate_observable, exhaustive_expectation, generate_mitigation_instances, post_select, required_models,
    results_json, validate_mitigation, Arm, MitigationPlan, ValidationConfig,
};
use mpec::rng::derive;
use mpec::sim::{ptm_of_circuit, twirled_ptm, NoiseBinding};
use mpec::Error;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentKind};
use crate::CliError;

struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Writer {
            dir: dir.clone(),
            written: Vec::new(),
        })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(v).expect("values serialize");
        s.push('\n');
        self.text(name, &s)
    }

    fn csv(&mut self, name: &str, seed: u64, body: &str) -> Result<(), CliError> {
        self.text(name, &format!("# seed: {seed}\n{body}"))
    }
}

pub fn learn(exp: &Experiment) -> Result<Vec<PathBuf>, CliError> {
    exp.expect_kind(&[ExperimentKind::Learn])?;
    let topology = exp
        .topology
        .as_ref()
        .ok_or_else(|| CliError::config("learning needs a topology file".into()))?;
    let targets = exp.target_layers()?;
    for (label, _) in &targets {
        topology.layer(label)?;
    }
    let mut w = Writer::new(&exp.out)?;
    for (label, i) in targets {
        let mut cfg = exp.config.learning.clone();
        cfg.seed = derive(exp.seed, &format!("learn:{label}"));
        let learned = learn_layer(
            &exp.circuit.layers()[i],
            exp.circuit.n_qubits(),
            &exp.binding,
            Some(topology.layer(&label)?),
            &cfg,
        )?;
        let mut report = learned.report_json();
        report["seed"] = json!(exp.seed);
        w.json(&format!("learn_{label}.json"), &report)?;
        w.csv(&format!("decay_{label}.csv"), exp.seed, &learned.decay_csv())?;
    }
    Ok(w.written)
}

pub fn validate(exp: &Experiment) -> Result<Vec<PathBuf>, CliError> {
    exp.expect_kind(&[ExperimentKind::Validate])?;
    let targets = exp.target_layers()?;
    let labels: Vec<String> = targets.iter().map(|(l, _)| l.clone()).collect();
    let models = exp.models(&labels)?;
    let mut w = Writer::new(&exp.out)?;
    for (label, i) in targets {
        let mut cfg = ValidationConfig {
            learning: exp.config.learning.clone(),
            ..Default::default()
        };
        cfg.learning.seed = derive(exp.seed, &format!("validate:{label}"));
        if let Some(cap) = exp.config.max_instances {
            cfg.max_instances = cap;
        }
        let r = validate_mitigation(
            &exp.circuit.layers()[i],
            exp.circuit.n_qubits(),
            &exp.binding,
            &models[&label],
            &cfg,
        )?;
        w.csv(&format!("validate_{label}_mitigated.csv"), exp.seed, &decay_csv(&r.mitigated))?;
        w.csv(&format!("validate_{label}_unmitigated.csv"), exp.seed, &decay_csv(&r.unmitigated))?;
        let mut summary = r.summary_json(exp.seed);
        summary["layer"] = json!(label);
        w.json(&format!("validate_{label}.json"), &summary)?;
    }
    Ok(w.written)
}

pub fn mitigate(exp: &Experiment) -> Result<Vec<PathBuf>, CliError> {
    exp.expect_kind(&[ExperimentKind::Mitigate, ExperimentKind::Tile, ExperimentKind::Feedforward])?;
    let settings = &exp.config.mitigation;
    if settings.arms.is_empty() {
        return Err(CliError::config("no arms selected".into()));
    }
    let observables = exp.selected_observables()?;
    let mut labels: Vec<String> = Vec::new();
    for &arm in &settings.arms {
        for l in required_models(&exp.circuit, arm) {
            if !labels.contains(&l) {
                labels.push(l);
            }
        }
    }
    let models = exp.models(&labels)?;
    let plan_for = |arm: Arm, seed: u64| MitigationPlan {
        circuit: exp.circuit.clone(),
        models: models.clone(),
        arm,
        instances: settings.instances,
        shots: settings.shots,
        seed,
        executor: settings.executor,
    };
    for &arm in &settings.arms {
        plan_for(arm, 0).validate()?;
    }

    let mut results = Vec::new();
    for (name, o) in &observables {
        let seed = derive(exp.seed, &format!("mitigate:{name}"));
        let mut estimates = Vec::new();
        let mut selected = serde_json::Map::new();
        let mut exact = serde_json::Map::new();
        for &arm in &settings.arms {
            let plan = plan_for(arm, seed);
            let batch = generate_mitigation_instances(&plan, &exp.binding, o)?;
            estimates.push((arm, estimate_observable(&batch, &exp.recovery, settings.bootstrap)?));
            if let Some(pattern) = &settings.post_select {
                let kept = post_select(&batch, pattern)?;
                let e = estimate_observable(&kept, &exp.recovery, settings.bootstrap)?;
                selected.insert(arm.name().into(), serde_json::to_value(e).expect("estimate serializes"));
            }
            if settings.exact {
                let v = exhaustive_expectation(&plan, &exp.binding, o, &exp.recovery)?;
                exact.insert(arm.name().into(), json!(v));
            }
        }
        let mut doc = results_json(&estimates, exp.seed);
        doc["name"] = json!(name);
        doc["observable"] = json!(o.label());
        if settings.post_select.is_some() {
            doc["post_selected"] = json!({"pattern": settings.post_select, "arms": selected});
        }
        if settings.exact {
            let ideal = exhaustive_expectation(&plan_for(Arm::Raw, seed), &NoiseBinding::noiseless(), o, &exp.recovery)?;
            exact.insert("ideal".into(), json!(ideal));
            doc["exact"] = Value::Object(exact);
        }
        results.push(doc);
    }
    let mut w = Writer::new(&exp.out)?;
    w.json("mitigate.json", &json!({"seed": exp.seed, "results": results}))?;
    Ok(w.written)
}

pub fn ptm(exp: &Experiment) -> Result<Vec<PathBuf>, CliError> {
    exp.expect_kind(&[ExperimentKind::Ptm])?;
    let m = match &exp.config.ptm.twirl_layer {
        Some(label) => {
            let i = exp
                .circuit
                .find_label(label)
                .ok_or_else(|| Error::Config(format!("circuit has no layer labeled {label:?}")))?;
            twirled_ptm(&exp.circuit, &exp.binding, i)?
        }
        None => ptm_of_circuit(&exp.circuit, &exp.binding)?,
    };
    let mut w = Writer::new(&exp.out)?;
    w.csv("ptm.csv", exp.seed, &m.to_csv())?;
    Ok(w.written)
}

pub fn decompose(exp: &Experiment) -> Result<Vec<PathBuf>, CliError> {
    exp.expect_kind(&[ExperimentKind::Decompose])?;
    let targets: Vec<usize> = exp
        .circuit
        .layers()
        .iter()
        .enumerate()
        .filter(|(_, l)| {
            matches!(l, Layer::Measurement { .. })
                && l.feedforward()
                    .iter()
                    .any(|r| matches!(r.op, FeedforwardOp::ControlledX { .. }))
        })
        .map(|(i, _)| i)
        .collect();
    if targets.is_empty() {
        return Err(Error::Config("the circuit has no classically-controlled CNOT".into()).into());
    }
    let mut c = exp.circuit.clone();
    // later layers first so earlier indices stay valid
    for &i in targets.iter().rev() {
        c = decompose_cc_cnot(&c, i)?;
    }
    let mut w = Writer::new(&exp.out)?;
    w.text("decomposed.json", &format!("{}\n", c.to_json()))?;
    Ok(w.written)
}
