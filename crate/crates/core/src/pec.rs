//! Probabilistic error cancellation: signed inverse-noise insertions,
//! twirled instances, `γ`-rescaled estimators and mitigation validation.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::circuit::passes::{apply_twirl, random_pauli, TwirlRecord};
use crate::circuit::{DynamicCircuit, FeedforwardRule, Layer};
use crate::error::{Error, Result};
use crate::exec::{run_counts, Executor};
use crate::learning::{
    decay_of, fit_basis, sample_values, select_fidelity_set, BasisChoice, BenchmarkLayer, DecayData,
    FidelityEstimate, LearningConfig, SamplingPlan,
};
use crate::noise::NoiseModel;
use crate::pauli::PauliString;
use crate::rng::{derive, stream_rng};
use crate::sim::counts::rotated_expectation;
use crate::sim::{run_dense, run_dense_with, DenseOptions, NoiseBinding};

pub use crate::sim::software_recovery_sign;

/// Which PEC layers receive inverse-noise insertions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Every PEC layer.
    Full,
    /// Unitary PEC layers only.
    UnitaryOnly,
    /// No insertions; twirling only.
    Raw,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Full, Arm::UnitaryOnly, Arm::Raw];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Full => "full",
            Arm::UnitaryOnly => "unitary_only",
            Arm::Raw => "raw",
        }
    }

    fn mitigates(self, layer: &Layer) -> bool {
        match self {
            Arm::Full => true,
            Arm::UnitaryOnly => matches!(layer, Layer::Unitary { .. }),
            Arm::Raw => false,
        }
    }
}

/// Labels whose models an arm needs, in circuit order without repeats.
pub fn required_models(circuit: &DynamicCircuit, arm: Arm) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for l in circuit.layers() {
        if let Some(label) = l.label() {
            if matches!(l, Layer::Unitary { .. } | Layer::Measurement { .. })
                && arm.mitigates(l)
                && !out.iter().any(|o| o == label)
            {
                out.push(label.to_string());
            }
        }
    }
    out
}

/// A target circuit with per-label learned models.
///
/// PEC layers are the labeled unitary and measurement layers. All of them
/// are twirled when twirlable; the arm decides which receive insertions.
#[derive(Clone, Debug)]
pub struct MitigationPlan {
    pub circuit: DynamicCircuit,
    pub models: BTreeMap<String, NoiseModel>,
    pub arm: Arm,
    pub instances: usize,
    pub shots: u64,
    pub seed: u64,
    pub executor: Executor,
}

impl MitigationPlan {
    pub fn pec_layers(&self) -> Vec<usize> {
        self.circuit
            .layers()
            .iter()
            .enumerate()
            .filter(|(_, l)| l.label().is_some() && matches!(l, Layer::Unitary { .. } | Layer::Measurement { .. }))
            .map(|(i, _)| i)
            .collect()
    }

    /// Layer indices and models receiving insertions under the plan's arm.
    pub fn mitigated_layers(&self) -> Result<Vec<(usize, &NoiseModel)>> {
        let mut out = Vec::new();
        for i in self.pec_layers() {
            let layer = &self.circuit.layers()[i];
            if !self.arm.mitigates(layer) {
                continue;
            }
            let label = layer.label().expect("PEC layers are labeled");
            let model = self
                .models
                .get(label)
                .ok_or_else(|| Error::Config(format!("no learned model for layer {label:?}")))?;
            if model.qubits().iter().any(|&q| q >= self.circuit.n_qubits()) {
                return Err(Error::SupportMismatch(format!("model of {label:?} exceeds the register")));
            }
            out.push((i, model));
        }
        Ok(out)
    }

    /// Product of `γ` over every mitigated layer application.
    pub fn gamma_total(&self) -> Result<f64> {
        Ok(self.mitigated_layers()?.iter().map(|(_, m)| m.gamma()).product())
    }

    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 || self.shots == 0 {
            return Err(Error::Config("instances and shots must be at least 1".into()));
        }
        self.mitigated_layers().map(|_| ())
    }
}

/// One sampled circuit instance with its raw outcomes.
#[derive(Clone, Debug)]
pub struct MitigationSample {
    pub instance: usize,
    /// Inverse-channel Paulis inserted before each mitigated layer.
    pub inserted: Vec<(usize, PauliString)>,
    /// Product of the inverse-sample signs.
    pub sign: i8,
    pub twirl: TwirlRecord,
    /// Weighted `(recorded bits, terminal bits)` outcomes before twirl
    /// correction; weights are shot counts or exact probabilities.
    pub outcomes: Vec<((u64, u64), f64)>,
}

/// Samples of one plan for one observable.
#[derive(Clone, Debug)]
pub struct MitigationBatch {
    pub samples: Vec<MitigationSample>,
    pub observable: PauliString,
    /// Z-type observable measured after the basis rotation.
    pub measured: PauliString,
    pub gamma_total: f64,
    pub n_clbits: usize,
    pub seed: u64,
    /// Fraction of the weight kept by post-selection.
    pub accept_rate: f64,
    /// Set once post-selected: the estimator is then a diagnostic.
    pub post_selected: bool,
}

/// Twirls every PEC layer, draws inverse samples for mitigated layers, and
/// runs each instance. The observable's basis rotation is appended first.
pub fn generate_mitigation_instances(
    plan: &MitigationPlan,
    nb: &NoiseBinding,
    observable: &PauliString,
) -> Result<MitigationBatch> {
    plan.validate()?;
    let (rotated, measured) = plan.circuit.measure_in_basis(observable)?;
    let n = rotated.n_qubits();
    let twirled: Vec<(usize, Vec<usize>)> = plan
        .pec_layers()
        .into_iter()
        .filter(|&i| rotated.layers()[i].is_twirlable())
        .map(|i| (i, rotated.layers()[i].twirl_support()))
        .collect();
    let mitigated = plan.mitigated_layers()?;
    let gamma_total = mitigated.iter().map(|(_, m)| m.gamma()).product();
    let (twirl_seed, mit_seed, shot_seed) = (
        derive(plan.seed, "twirl"),
        derive(plan.seed, "mitigation"),
        derive(plan.seed, "shots"),
    );
    let samples = (0..plan.instances)
        .into_par_iter()
        .map(|inst| {
            let mut trng = stream_rng(twirl_seed, inst as u64, 0);
            let mut mrng = stream_rng(mit_seed, inst as u64, 0);
            let twirls: Vec<(usize, PauliString)> = twirled
                .iter()
                .map(|(i, support)| (*i, random_pauli(n, support, &mut trng)))
                .collect();
            let mut sign = 1i8;
            let mut inserted = Vec::with_capacity(mitigated.len());
            for (i, model) in &mitigated {
                let (p, s) = model.sample_inverse(&mut mrng);
                sign *= s;
                inserted.push((*i, p.embed(n, model.qubits())?));
            }
            let (circuit, twirl) = apply_twirl(&rotated, &twirls, &inserted)?;
            let outcomes = match plan.executor {
                Executor::Exact => run_dense(&circuit, nb)?.distribution().into_iter().collect(),
                ex => run_counts(ex, &circuit, nb, plan.shots, shot_seed, inst as u64)?
                    .iter()
                    .map(|(k, v)| (k, v as f64))
                    .collect(),
            };
            Ok(MitigationSample {
                instance: inst,
                inserted,
                sign,
                twirl,
                outcomes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MitigationBatch {
        samples,
        observable: observable.clone(),
        measured,
        gamma_total,
        n_clbits: rotated.n_clbits(),
        seed: plan.seed,
        accept_rate: 1.0,
        post_selected: false,
    })
}

/// Summary of one estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub observable: String,
    pub value: f64,
    pub stderr: f64,
    pub gamma_total: f64,
    /// Total shots divided by `γ_total²`.
    pub effective_samples: f64,
    pub accept_rate: f64,
    pub diagnostic: bool,
}

pub const DEFAULT_BOOTSTRAP: usize = 1000;

/// `γ_total · mean_i(s_i · ⟨O⟩_i)` with twirl-flip correction and software
/// recovery, and an instance-level bootstrap standard error.
pub fn estimate_observable(
    batch: &MitigationBatch,
    recovery: &[FeedforwardRule],
    bootstrap: usize,
) -> Result<Estimate> {
    let mut values = Vec::with_capacity(batch.samples.len());
    let mut weight = 0.0;
    for s in &batch.samples {
        let flips = s.twirl.flip_mask();
        let w: f64 = s.outcomes.iter().map(|(_, w)| w).sum();
        if w == 0.0 {
            continue;
        }
        weight += w;
        let e = rotated_expectation(
            s.outcomes.iter().map(|&((c, t), w)| ((c ^ flips, t), w)),
            &batch.measured,
            &batch.observable,
            recovery,
        )?;
        values.push(s.sign as f64 * e);
    }
    if values.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let stderr = if bootstrap > 1 && n > 1 {
        let mut rng = stream_rng(derive(batch.seed, "bootstrap"), 0, 0);
        let means: Vec<f64> = (0..bootstrap)
            .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
            .collect();
        let m = means.iter().sum::<f64>() / bootstrap as f64;
        (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (bootstrap - 1) as f64).sqrt()
    } else {
        0.0
    };
    let g = batch.gamma_total;
    Ok(Estimate {
        observable: batch.observable.label(),
        value: g * mean,
        stderr: g * stderr,
        gamma_total: g,
        effective_samples: weight / (g * g),
        accept_rate: batch.accept_rate,
        diagnostic: batch.post_selected,
    })
}

/// Keeps outcomes whose twirl-corrected mid-circuit record matches
/// `pattern` (character `b` is clbit `b`; `x` matches either value).
pub fn post_select(batch: &MitigationBatch, pattern: &str) -> Result<MitigationBatch> {
    let chars: Vec<char> = pattern.chars().collect();
    if chars.len() != batch.n_clbits {
        return Err(Error::Config(format!(
            "pattern {pattern:?} has {} bits, circuit records {}",
            chars.len(),
            batch.n_clbits
        )));
    }
    let (mut care, mut want) = (0u64, 0u64);
    for (b, ch) in chars.iter().enumerate() {
        match ch {
            '0' => care |= 1 << b,
            '1' => {
                care |= 1 << b;
                want |= 1 << b;
            }
            'x' | 'X' => {}
            _ => return Err(Error::Config(format!("pattern {pattern:?} must use 0, 1 or x"))),
        }
    }
    let (mut kept, mut total) = (0.0, 0.0);
    let samples = batch
        .samples
        .iter()
        .map(|s| {
            let flips = s.twirl.flip_mask();
            let outcomes: Vec<((u64, u64), f64)> = s
                .outcomes
                .iter()
                .filter(|&&((c, _), w)| {
                    total += w;
                    let ok = (c ^ flips) & care == want;
                    if ok {
                        kept += w;
                    }
                    ok
                })
                .copied()
                .collect();
            MitigationSample {
                outcomes,
                ..s.clone()
            }
        })
        .collect();
    Ok(MitigationBatch {
        samples,
        accept_rate: if total > 0.0 { batch.accept_rate * kept / total } else { 0.0 },
        post_selected: true,
        ..batch.clone()
    })
}

/// Exact arm value: the dense backend applies every mitigated layer's full
/// inverse channel (all signed branches with their quasi-probabilities).
pub fn exhaustive_expectation(
    plan: &MitigationPlan,
    nb: &NoiseBinding,
    observable: &PauliString,
    recovery: &[FeedforwardRule],
) -> Result<f64> {
    let (rotated, measured) = plan.circuit.measure_in_basis(observable)?;
    let mut opts = DenseOptions::default();
    for (i, m) in plan.mitigated_layers()? {
        let label = plan.circuit.layers()[i].label().expect("PEC layers are labeled");
        opts.inverse.insert(label.to_string(), m.clone());
    }
    let dist = run_dense_with(&rotated, nb, &opts)?.distribution();
    rotated_expectation(dist, &measured, observable, recovery)
}

/// Settings of a mitigation-validation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    #[serde(flatten)]
    pub learning: LearningConfig,
    /// Upper bound on the total number of mitigated instances.
    #[serde(default = "default_cap")]
    pub max_instances: u64,
}

fn default_cap() -> u64 {
    1 << 22
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            learning: LearningConfig::default(),
            max_instances: default_cap(),
        }
    }
}

/// Paired decays of a validation run.
#[derive(Clone, Debug)]
pub struct ValidationResult {
    pub gamma: f64,
    /// Mitigated instances per depth.
    pub instances: Vec<usize>,
    pub mitigated: Vec<DecayData>,
    pub unmitigated: Vec<DecayData>,
    pub mitigated_fit: Vec<FidelityEstimate>,
    pub unmitigated_fit: Vec<FidelityEstimate>,
}

impl ValidationResult {
    pub fn summary_json(&self, seed: u64) -> Value {
        let fits = |v: &[FidelityEstimate]| -> Value {
            v.iter()
                .map(|e| json!({"basis": e.basis.label(), "A": e.a, "f": e.f, "stderr": e.f_stderr}))
                .collect()
        };
        json!({
            "gamma": self.gamma,
            "instances": self.instances,
            "mitigated": fits(&self.mitigated_fit),
            "unmitigated": fits(&self.unmitigated_fit),
            "seed": seed,
        })
    }
}

/// Instances per depth for mitigated curves: `base · ⌈γ^{2a}⌉` where `a` is
/// the number of layer applications at that depth.
pub fn validation_instances(base: usize, gamma: f64, depths: &[usize], stride: usize) -> Vec<usize> {
    depths
        .iter()
        .map(|&k| {
            let scale = gamma.powf(2.0 * (k * stride) as f64).ceil();
            (base as f64 * scale).min(u64::MAX as f64 / 2.0) as usize
        })
        .collect()
}

/// Runs benchmarking circuits with and without an inverse-channel
/// insertion before every layer application and fits both decay families.
pub fn validate_mitigation(
    layer: &Layer,
    n_qubits: usize,
    nb: &NoiseBinding,
    model: &NoiseModel,
    cfg: &ValidationConfig,
) -> Result<ValidationResult> {
    let lc = &cfg.learning;
    lc.validate()?;
    let bench = BenchmarkLayer::new(layer, n_qubits)?;
    let auto = select_fidelity_set(layer)?;
    let bases: Vec<PauliString> = match &lc.bases {
        BasisChoice::Auto => auto.bases().to_vec(),
        BasisChoice::Explicit(list) => {
            if let Some(b) = list.iter().find(|b| !auto.bases().contains(b)) {
                return Err(Error::Config(format!("basis {b} is not supported on this layer")));
            }
            list.clone()
        }
    };
    let gamma = model.gamma();
    let scaled = validation_instances(lc.instances, gamma, &lc.depths, bench.stride());
    let required = scaled.iter().map(|&v| v as u64).sum::<u64>().saturating_mul(bases.len() as u64);
    if required > cfg.max_instances {
        return Err(Error::Budget {
            required,
            cap: cfg.max_instances,
        });
    }
    let run = |tag: &str, instances: Vec<usize>, mitigation: Option<&NoiseModel>| -> Result<Vec<DecayData>> {
        let plan = SamplingPlan {
            depths: &lc.depths,
            instances,
            shots: lc.shots,
            seed: derive(lc.seed, tag),
            executor: lc.executor,
            mitigation,
        };
        let values = sample_values(&bench, &bases, nb, &plan)?;
        Ok(bases
            .iter()
            .zip(&values)
            .map(|(b, cells)| decay_of(b, &lc.depths, cells))
            .collect())
    };
    let mitigated = run("mitigated", scaled.clone(), Some(model))?;
    let unmitigated = run("unmitigated", vec![lc.instances; lc.depths.len()], None)?;
    let fit = |d: &[DecayData]| -> Result<Vec<FidelityEstimate>> {
        d.iter().map(|x| fit_basis(x, bench.stride())).collect()
    };
    Ok(ValidationResult {
        gamma,
        instances: scaled,
        mitigated_fit: fit(&mitigated)?,
        unmitigated_fit: fit(&unmitigated)?,
        mitigated,
        unmitigated,
    })
}

/// Results document for a set of arms of one observable.
pub fn results_json(estimates: &[(Arm, Estimate)], seed: u64) -> Value {
    let mut arms = serde_json::Map::new();
    for (arm, e) in estimates {
        arms.insert(arm.name().into(), serde_json::to_value(e).expect("estimate serializes"));
    }
    let full = estimates.iter().find(|(a, _)| *a == Arm::Full).map(|(_, e)| e);
    json!({
        "observable": estimates.first().map(|(_, e)| e.observable.clone()),
        "arms": arms,
        "gamma_total": full.map_or(1.0, |e| e.gamma_total),
        "accept_rate": full.map_or(1.0, |e| e.accept_rate),
        "seed": seed,
    })
}
