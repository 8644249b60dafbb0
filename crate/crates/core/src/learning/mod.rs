//! Noise learning for one PEC layer: benchmarking circuits that repeat the
//! twirled layer `k` times in a Pauli eigenbasis, exponential fits per basis,
//! and a non-negative inversion of the fidelity system for the rates.

pub mod fit;
pub mod nnls;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::circuit::passes::{apply_twirl, random_pauli, TwirlRecord};
use crate::circuit::{DynamicCircuit, FeedforwardOp, Layer};
use crate::error::{Error, Result};
use crate::exec::{instance_expectation, Executor};
use crate::gate::{Gate, GateKind};
use crate::noise::{build_m, FidelityBasisSet, GeneratorSet, NoiseModel, TopologyLayer};
use crate::pauli::{Pauli, PauliString, Phase};
use crate::rng::{derive, stream_rng};
use crate::sim::NoiseBinding;

pub use fit::{fit_decay, DecayData, FidelityEstimate};
pub use nnls::nnls_solve;

/// Default depth schedule.
pub const DEFAULT_DEPTHS: [usize; 6] = [0, 1, 2, 4, 8, 16];

/// Measured layers with supports up to this size keep full-weight generators
/// unless the topology says otherwise; larger supports default to weight 2.
pub const FULL_WEIGHT_SUPPORT: usize = 3;

/// Which fidelity bases to benchmark.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBases", into = "RawBases")]
pub enum BasisChoice {
    #[default]
    Auto,
    /// Bases local to the layer's twirl support.
    Explicit(Vec<PauliString>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawBases {
    Name(String),
    List(Vec<PauliString>),
}

impl TryFrom<RawBases> for BasisChoice {
    type Error = String;

    fn try_from(raw: RawBases) -> std::result::Result<Self, String> {
        match raw {
            RawBases::Name(s) if s == "auto" => Ok(BasisChoice::Auto),
            RawBases::Name(s) => Err(format!("bases must be \"auto\" or a list, got {s:?}")),
            RawBases::List(l) => Ok(BasisChoice::Explicit(l)),
        }
    }
}

impl From<BasisChoice> for RawBases {
    fn from(b: BasisChoice) -> Self {
        match b {
            BasisChoice::Auto => RawBases::Name("auto".into()),
            BasisChoice::Explicit(l) => RawBases::List(l),
        }
    }
}

fn default_depths() -> Vec<usize> {
    DEFAULT_DEPTHS.to_vec()
}

fn default_instances() -> usize {
    256
}

fn default_shots() -> u64 {
    128
}

fn default_bootstrap() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningConfig {
    #[serde(default = "default_depths")]
    pub depths: Vec<usize>,
    #[serde(default)]
    pub bases: BasisChoice,
    /// Twirl instances per `(depth, basis)` cell.
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
    /// Bootstrap resamples for the rate uncertainties; 0 disables them.
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default)]
    pub executor: Executor,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            depths: default_depths(),
            bases: BasisChoice::Auto,
            instances: default_instances(),
            shots: default_shots(),
            seed: 0,
            bootstrap: default_bootstrap(),
            executor: Executor::Trajectory,
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        let mut d = self.depths.clone();
        d.sort_unstable();
        d.dedup();
        if d.len() < 2 {
            return Err(Error::Config("depths need at least two distinct values".into()));
        }
        if self.shots == 0 || self.instances == 0 {
            return Err(Error::Config("shots and instances must be at least 1".into()));
        }
        Ok(())
    }
}

fn measured_qubits(layer: &Layer) -> Vec<usize> {
    match layer {
        Layer::Measurement { qubits, .. } => qubits.clone(),
        _ => vec![],
    }
}

fn positions(support: &[usize], qubits: &[usize]) -> Vec<usize> {
    qubits
        .iter()
        .filter_map(|q| support.iter().position(|s| s == q))
        .collect()
}

fn pec_support(layer: &Layer) -> Result<Vec<usize>> {
    match layer {
        Layer::Unitary { .. } | Layer::Measurement { .. } => Ok(layer.twirl_support()),
        other => Err(Error::Config(format!("{} layers are not PEC layers", other.kind_name()))),
    }
}

/// Every non-identity Pauli on the layer support whose measured-qubit
/// components lie in `allowed`.
fn restricted_paulis(width: usize, measured: &[usize], allowed: [Pauli; 2]) -> Vec<PauliString> {
    PauliString::all(width)
        .skip(1)
        .filter(|p| measured.iter().all(|&m| allowed.contains(&p.get(m))))
        .collect()
}

/// Bases with non-zero fidelity: measured components in `{I, Z}` for
/// measurement layers, everything for unitary layers.
pub fn select_fidelity_set(layer: &Layer) -> Result<FidelityBasisSet> {
    let support = pec_support(layer)?;
    let measured = positions(&support, &measured_qubits(layer));
    let bases = restricted_paulis(support.len(), &measured, [Pauli::I, Pauli::Z]);
    FidelityBasisSet::new(support, bases)
}

/// Generators the layer's bases can identify.
///
/// Measurement layers allow measured components in `{I, X}`. Unitary layers
/// default to every weight-1 term plus every term on the qubit pair of each
/// two-qubit gate. Explicit topology generators replace the defaults and
/// `max_weight` truncates either.
pub fn select_generator_set(layer: &Layer, topology: Option<&TopologyLayer>) -> Result<GeneratorSet> {
    let support = pec_support(layer)?;
    let measured_global = measured_qubits(layer);
    let measured = positions(&support, &measured_global);
    let width = support.len();
    let mut max_weight = None;
    let mut explicit = None;
    if let Some(t) = topology {
        let mut tq = t.qubits.clone();
        tq.sort_unstable();
        if tq != support {
            return Err(Error::SupportMismatch(format!(
                "topology {:?} lists qubits {:?}, layer acts on {:?}",
                t.name, t.qubits, support
            )));
        }
        let mut tm = t.measured.clone();
        tm.sort_unstable();
        let mut lm = measured_global.clone();
        lm.sort_unstable();
        if !t.measured.is_empty() && tm != lm {
            return Err(Error::Config(format!(
                "topology {:?} marks {:?} as measured, layer measures {:?}",
                t.name, t.measured, measured_global
            )));
        }
        max_weight = t.max_weight;
        explicit = t.generators.clone();
    }
    let candidates = match explicit {
        Some(gens) => {
            for g in &gens {
                if g.num_qubits() != width {
                    return Err(Error::DimensionMismatch {
                        left: width,
                        right: g.num_qubits(),
                    });
                }
                if measured.iter().any(|&m| matches!(g.get(m), Pauli::Y | Pauli::Z)) {
                    return Err(Error::Config(format!(
                        "generator {g} has a phase error on a measured qubit"
                    )));
                }
            }
            gens
        }
        None => match layer {
            Layer::Measurement { .. } => {
                if width > FULL_WEIGHT_SUPPORT && max_weight.is_none() {
                    max_weight = Some(2);
                }
                restricted_paulis(width, &measured, [Pauli::I, Pauli::X])
            }
            Layer::Unitary { gates, .. } => unitary_generators(width, &support, gates),
            _ => unreachable!("checked by pec_support"),
        },
    };
    let gens = candidates
        .into_iter()
        .filter(|g| max_weight.is_none_or(|w| g.weight() <= w))
        .collect();
    let k = GeneratorSet::new(support, gens)?;
    check_identifiable(&select_fidelity_set(layer)?, &k)?;
    Ok(k)
}

fn unitary_generators(width: usize, support: &[usize], gates: &[Gate]) -> Vec<PauliString> {
    let mut out = Vec::new();
    for q in 0..width {
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            out.push(PauliString::single(width, q, p));
        }
    }
    for g in gates.iter().filter(|g| g.qubits.len() == 2) {
        let pos = positions(support, &g.qubits);
        for a in [Pauli::X, Pauli::Y, Pauli::Z] {
            for b in [Pauli::X, Pauli::Y, Pauli::Z] {
                let mut p = PauliString::identity(width);
                p.set(pos[0], a);
                p.set(pos[1], b);
                if !out.contains(&p) {
                    out.push(p);
                }
            }
        }
    }
    out
}

fn m_matrix(m: &[Vec<u8>], cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m.len(), cols, |i, j| m[i][j] as f64)
}

/// Fails with the first generator whose column of `M` is a combination of
/// earlier ones.
pub fn check_identifiable(f: &FidelityBasisSet, k: &GeneratorSet) -> Result<()> {
    let m = build_m(f, k)?;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for (j, g) in k.generators().iter().enumerate() {
        let mut v: Vec<f64> = m.iter().map(|row| row[j] as f64).collect();
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-9 {
            return Err(Error::SingularSystem(format!(
                "generator {g} is not determined by the fidelity bases {}",
                f.bases().iter().map(|b| b.label()).collect::<Vec<_>>().join(",")
            )));
        }
        basis.push(v.into_iter().map(|x| x / norm).collect());
    }
    Ok(())
}

/// Non-negative rates from per-basis fidelities: `M λ ≈ −ln(f)/2`.
/// Returns the rates and the residual norm.
pub fn invert_fidelities(
    f: &FidelityBasisSet,
    k: &GeneratorSet,
    fidelities: &[f64],
) -> Result<(Vec<f64>, f64)> {
    if fidelities.len() != f.len() {
        return Err(Error::DimensionMismatch {
            left: f.len(),
            right: fidelities.len(),
        });
    }
    if let Some(v) = fidelities.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::NonFinite(format!("fidelity {v} has no logarithm")));
    }
    let m = m_matrix(&build_m(f, k)?, k.len());
    let b = DVector::from_iterator(f.len(), fidelities.iter().map(|v| -v.ln() / 2.0));
    let x = nnls_solve(&m, &b)?;
    let residual = (&m * &x - &b).norm();
    Ok((x.iter().copied().collect(), residual))
}

/// A PEC layer prepared for benchmarking: feedforward replaced by delays,
/// classical bits renumbered from zero.
#[derive(Clone, Debug)]
pub struct BenchmarkLayer {
    n_qubits: usize,
    n_clbits: usize,
    layer: Layer,
    support: Vec<usize>,
    measured: Vec<usize>,
    /// Layer applications per unit of depth: 2 for self-inverse unitaries.
    stride: usize,
}

/// One benchmarking circuit and how to read it.
#[derive(Clone, Debug)]
pub struct LearningCircuit {
    /// Basis local to the layer support.
    pub basis: PauliString,
    pub depth: usize,
    pub instance: usize,
    pub circuit: DynamicCircuit,
    /// Z-type observable on the full register.
    pub observable: PauliString,
    pub twirl: TwirlRecord,
    /// Product of inverse-sample signs, `+1` without mitigation.
    pub sign: i8,
    /// Number of mitigation insertions.
    pub insertions: usize,
}

impl BenchmarkLayer {
    pub fn new(layer: &Layer, n_qubits: usize) -> Result<Self> {
        let support = pec_support(layer)?;
        if !layer.is_twirlable() {
            return Err(Error::NotTwirlable {
                layer: 0,
                reason: "decompose conditional two-qubit gates first".into(),
            });
        }
        if support.iter().any(|&q| q >= n_qubits) {
            return Err(Error::IndexOutOfRange(format!("layer support {support:?} on {n_qubits} qubits")));
        }
        let (layer, n_clbits, stride) = match layer {
            Layer::Unitary { .. } => {
                let u = layer.clifford(n_qubits)?;
                if u.then(&u)? != crate::clifford::CliffordOp::identity(n_qubits) {
                    return Err(Error::Unsupported(
                        "learning a unitary layer requires it to be self-inverse".into(),
                    ));
                }
                (layer.clone(), 0, 2)
            }
            Layer::Measurement {
                qubits,
                clbits,
                feedforward,
                label,
                support,
            } => {
                let local = |b: usize| clbits.iter().position(|&c| c == b).unwrap_or(0);
                let rules = feedforward
                    .iter()
                    .map(|r| {
                        let mut r = r.clone();
                        r.clbit = local(r.clbit);
                        r.op = FeedforwardOp::Delay;
                        r
                    })
                    .collect();
                let m = Layer::Measurement {
                    qubits: qubits.clone(),
                    clbits: (0..qubits.len()).collect(),
                    feedforward: rules,
                    label: label.clone(),
                    support: support.clone(),
                };
                (m, qubits.len().max(1), 1)
            }
            _ => unreachable!("checked by pec_support"),
        };
        let measured = measured_qubits(&layer);
        Ok(BenchmarkLayer {
            n_qubits,
            n_clbits,
            layer,
            support,
            measured,
            stride,
        })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn is_unitary(&self) -> bool {
        self.stride == 2
    }

    /// Builds the circuit for `basis` at `depth`. Twirls come from
    /// `twirl_rng`; when `mitigation` is given, one inverse-channel sample
    /// is inserted before every layer application.
    pub fn circuit<R: Rng + ?Sized>(
        &self,
        basis: &PauliString,
        depth: usize,
        instance: usize,
        twirl_rng: &mut R,
        mitigation: Option<(&NoiseModel, &mut R)>,
    ) -> Result<LearningCircuit> {
        if basis.num_qubits() != self.support.len() {
            return Err(Error::DimensionMismatch {
                left: self.support.len(),
                right: basis.num_qubits(),
            });
        }
        let measured = positions(&self.support, &self.measured);
        if measured.iter().any(|&m| matches!(basis.get(m), Pauli::X | Pauli::Y)) {
            return Err(Error::Config(format!("basis {basis} has zero fidelity on this layer")));
        }
        let n = self.n_qubits;
        let global = basis.embed(n, &self.support)?;
        let on = |ps: &[Pauli]| -> Vec<usize> {
            (0..n).filter(|&q| ps.contains(&global.get(q))).collect()
        };
        let xy = on(&[Pauli::X, Pauli::Y]);
        let y = on(&[Pauli::Y]);
        let gates = |kind: GateKind, qs: &[usize]| Layer::unitary(qs.iter().map(|&q| Gate::one(kind, q)).collect());

        let mut layers = vec![gates(GateKind::H, &xy), gates(GateKind::S, &y)];
        let mut copies = Vec::new();
        for _ in 0..depth * self.stride {
            copies.push(layers.len());
            layers.push(self.layer.clone());
            if !self.measured.is_empty() {
                layers.push(Layer::Dephase {
                    qubits: self.measured.clone(),
                });
            }
        }
        layers.push(gates(GateKind::Sdg, &y));
        layers.push(gates(GateKind::H, &xy));
        let base = DynamicCircuit::new(n, self.n_clbits, layers)?;

        let twirls: Vec<(usize, PauliString)> = copies
            .iter()
            .map(|&i| (i, random_pauli(n, &self.support, twirl_rng)))
            .collect();
        let mut sign = 1i8;
        let mut insertions = Vec::new();
        if let Some((model, rng)) = mitigation {
            for &i in &copies {
                let (p, s) = model.sample_inverse(rng);
                sign *= s;
                insertions.push((i, p.embed(n, model.qubits())?));
            }
        }
        let (circuit, twirl) = apply_twirl(&base, &twirls, &insertions)?;
        let z = global.x_mask() | global.z_mask();
        Ok(LearningCircuit {
            basis: basis.clone(),
            depth,
            instance,
            circuit,
            observable: PauliString::from_masks(n, 0, z, Phase::ONE),
            twirl,
            sign,
            insertions: insertions.len(),
        })
    }
}

fn resolve_bases(layer: &Layer, choice: &BasisChoice) -> Result<FidelityBasisSet> {
    let auto = select_fidelity_set(layer)?;
    match choice {
        BasisChoice::Auto => Ok(auto),
        BasisChoice::Explicit(list) => {
            for b in list {
                if !auto.bases().contains(b) {
                    return Err(Error::Config(format!("basis {b} is not supported on this layer")));
                }
            }
            FidelityBasisSet::new(auto.qubits().to_vec(), list.clone())
        }
    }
}

/// All benchmarking circuits of `cfg`, ordered by basis, depth, instance.
pub fn generate_learning_circuits(
    layer: &Layer,
    n_qubits: usize,
    cfg: &LearningConfig,
) -> Result<Vec<LearningCircuit>> {
    cfg.validate()?;
    let bench = BenchmarkLayer::new(layer, n_qubits)?;
    let bases = resolve_bases(layer, &cfg.bases)?;
    let mut out = Vec::new();
    for (bi, b) in bases.bases().iter().enumerate() {
        for (di, &k) in cfg.depths.iter().enumerate() {
            let cell = cell_id(bi, di, cfg.depths.len());
            for inst in 0..cfg.instances {
                let mut rng = stream_rng(derive(cfg.seed, "twirl"), cell, inst as u64);
                out.push(bench.circuit(b, k, inst, &mut rng, None)?);
            }
        }
    }
    Ok(out)
}

fn cell_id(basis: usize, depth: usize, n_depths: usize) -> u64 {
    (basis * n_depths + depth) as u64
}

/// Settings shared by learning and mitigation-validation sampling.
pub(crate) struct SamplingPlan<'a> {
    pub depths: &'a [usize],
    /// Instances per depth index.
    pub instances: Vec<usize>,
    pub shots: u64,
    pub seed: u64,
    pub executor: Executor,
    pub mitigation: Option<&'a NoiseModel>,
}

/// Per-instance estimates `[basis][depth][instance]`. With mitigation each
/// value carries its sign and the `γ` factor of its insertions.
pub(crate) fn sample_values(
    bench: &BenchmarkLayer,
    bases: &[PauliString],
    nb: &NoiseBinding,
    plan: &SamplingPlan,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let nd = plan.depths.len();
    let jobs: Vec<(usize, usize, usize)> = (0..bases.len())
        .flat_map(|b| (0..nd).flat_map(move |d| (0..plan.instances[d]).map(move |i| (b, d, i))))
        .collect();
    let gamma = plan.mitigation.map_or(1.0, |m| m.gamma());
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|&(b, d, i)| {
            let cell = cell_id(b, d, nd);
            let mut twirl_rng = stream_rng(derive(plan.seed, "twirl"), cell, i as u64);
            let mut mit_rng = stream_rng(derive(plan.seed, "mitigation"), cell, i as u64);
            let lc = bench.circuit(
                &bases[b],
                plan.depths[d],
                i,
                &mut twirl_rng,
                plan.mitigation.map(|m| (m, &mut mit_rng)),
            )?;
            let v = instance_expectation(
                plan.executor,
                &lc.circuit,
                nb,
                &lc.observable,
                &[],
                lc.twirl.flip_mask(),
                plan.shots,
                derive(plan.seed, "shots"),
                (cell << 32) | i as u64,
            )?;
            Ok(lc.sign as f64 * gamma.powi(lc.insertions as i32) * v)
        })
        .collect::<Result<_>>()?;
    let mut it = values.into_iter();
    Ok((0..bases.len())
        .map(|_| {
            (0..nd)
                .map(|d| it.by_ref().take(plan.instances[d]).collect())
                .collect()
        })
        .collect())
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub(crate) fn decay_of(basis: &PauliString, depths: &[usize], cells: &[Vec<f64>]) -> DecayData {
    let (means, stderrs) = cells.iter().map(|c| mean_stderr(c)).unzip();
    DecayData {
        basis: basis.clone(),
        depths: depths.to_vec(),
        means,
        stderrs,
    }
}

/// Fit for one basis. For unitary layers the decay per unit depth is
/// `f_q · f_{UqU†}`; both are reported as its square root.
pub(crate) fn fit_basis(d: &DecayData, stride: usize) -> Result<FidelityEstimate> {
    let mut e = fit_decay(d)?;
    if stride == 2 {
        let f = e.f.sqrt();
        e.f_stderr /= 2.0 * f;
        e.f = f;
    }
    Ok(e)
}

/// Result of learning one layer.
#[derive(Clone, Debug)]
pub struct LearnedModel {
    pub label: Option<String>,
    pub model: NoiseModel,
    pub fidelity_set: FidelityBasisSet,
    pub m: Vec<Vec<u8>>,
    pub decays: Vec<DecayData>,
    pub estimates: Vec<FidelityEstimate>,
    pub residual: f64,
    pub lambda_stderr: Vec<f64>,
    pub seed: u64,
}

impl LearnedModel {
    pub fn gamma(&self) -> f64 {
        self.model.gamma()
    }

    pub fn report_json(&self) -> Value {
        let mut lambdas = Map::new();
        let mut stderrs = Map::new();
        for ((g, l), s) in self
            .model
            .generators()
            .iter()
            .zip(self.model.lambdas())
            .zip(&self.lambda_stderr)
        {
            lambdas.insert(g.label(), json!(l));
            stderrs.insert(g.label(), json!(s));
        }
        json!({
            "layer": self.label,
            "qubits": self.model.qubits(),
            "bases": self.estimates.iter().map(|e| e.basis.label()).collect::<Vec<_>>(),
            "A": self.estimates.iter().map(|e| e.a).collect::<Vec<_>>(),
            "f": self.estimates.iter().map(|e| e.f).collect::<Vec<_>>(),
            "stderr": self.estimates.iter().map(|e| e.f_stderr).collect::<Vec<_>>(),
            "lambdas": lambdas,
            "lambda_stderr": stderrs,
            "gamma": self.gamma(),
            "residual": self.residual,
            "seed": self.seed,
        })
    }

    /// `depth,basis,mean,stderr` rows.
    pub fn decay_csv(&self) -> String {
        decay_csv(&self.decays)
    }
}

pub fn decay_csv(decays: &[DecayData]) -> String {
    let mut s = String::from("depth,basis,mean,stderr\n");
    for d in decays {
        for ((k, m), e) in d.depths.iter().zip(&d.means).zip(&d.stderrs) {
            s.push_str(&format!("{k},{},{m},{e}\n", d.basis.label()));
        }
    }
    s
}

/// Reads the layer label and noise model back from a learning report.
pub fn model_from_report(doc: &Value) -> Result<(Option<String>, NoiseModel)> {
    let schema = |m: &str| Error::Schema(format!("learning report: {m}"));
    let label = doc.get("layer").and_then(|v| v.as_str()).map(String::from);
    let qubits: Vec<usize> = serde_json::from_value(doc.get("qubits").cloned().ok_or_else(|| schema("missing qubits"))?)
        .map_err(|e| schema(&e.to_string()))?;
    let lambdas = doc
        .get("lambdas")
        .and_then(|v| v.as_object())
        .ok_or_else(|| schema("missing lambdas"))?;
    let mut terms = Vec::new();
    for (k, v) in lambdas {
        terms.push((k.as_str(), v.as_f64().ok_or_else(|| schema("rate is not a number"))?));
    }
    Ok((label, NoiseModel::from_labels(&qubits, &terms)?))
}

fn rates_from(
    decays: &[DecayData],
    stride: usize,
    f: &FidelityBasisSet,
    k: &GeneratorSet,
) -> Result<(Vec<FidelityEstimate>, Vec<f64>, f64)> {
    let est: Vec<FidelityEstimate> = decays.iter().map(|d| fit_basis(d, stride)).collect::<Result<_>>()?;
    let fs: Vec<f64> = est.iter().map(|e| e.f).collect();
    let (lambdas, residual) = invert_fidelities(f, k, &fs)?;
    Ok((est, lambdas, residual))
}

/// Learns the noise of `layer` by running benchmarking circuits against the
/// binding. Rate uncertainties come from resampling twirl instances within
/// each `(basis, depth)` cell.
pub fn learn_layer(
    layer: &Layer,
    n_qubits: usize,
    nb: &NoiseBinding,
    topology: Option<&TopologyLayer>,
    cfg: &LearningConfig,
) -> Result<LearnedModel> {
    cfg.validate()?;
    let bench = BenchmarkLayer::new(layer, n_qubits)?;
    let f = resolve_bases(layer, &cfg.bases)?;
    let k = select_generator_set(layer, topology)?;
    check_identifiable(&f, &k)?;
    let plan = SamplingPlan {
        depths: &cfg.depths,
        instances: vec![cfg.instances; cfg.depths.len()],
        shots: cfg.shots,
        seed: cfg.seed,
        executor: cfg.executor,
        mitigation: None,
    };
    let values = sample_values(&bench, f.bases(), nb, &plan)?;
    let decays: Vec<DecayData> = f
        .bases()
        .iter()
        .zip(&values)
        .map(|(b, cells)| decay_of(b, &cfg.depths, cells))
        .collect();
    let (estimates, lambdas, residual) = rates_from(&decays, bench.stride(), &f, &k)?;

    let lambda_stderr = if cfg.bootstrap == 0 {
        vec![0.0; k.len()]
    } else {
        let boot_seed = derive(cfg.seed, "bootstrap");
        let draws: Vec<Option<Vec<f64>>> = (0..cfg.bootstrap)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream_rng(boot_seed, r as u64, 0);
                let resampled: Vec<DecayData> = f
                    .bases()
                    .iter()
                    .zip(&values)
                    .map(|(b, cells)| {
                        let cells: Vec<Vec<f64>> = cells
                            .iter()
                            .map(|c| (0..c.len()).map(|_| c[rng.gen_range(0..c.len())]).collect())
                            .collect();
                        decay_of(b, &cfg.depths, &cells)
                    })
                    .collect();
                rates_from(&resampled, bench.stride(), &f, &k).ok().map(|(_, l, _)| l)
            })
            .collect();
        let ok: Vec<Vec<f64>> = draws.into_iter().flatten().collect();
        if ok.len() < 2 {
            return Err(Error::NonFinite("fewer than two bootstrap resamples could be fitted".into()));
        }
        (0..k.len())
            .map(|j| {
                let col: Vec<f64> = ok.iter().map(|l| l[j]).collect();
                let n = col.len() as f64;
                let m = col.iter().sum::<f64>() / n;
                (col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            })
            .collect()
    };

    let m = build_m(&f, &k)?;
    Ok(LearnedModel {
        label: layer.label().map(String::from),
        model: NoiseModel::new(k, lambdas)?,
        fidelity_set: f,
        m,
        decays,
        estimates,
        residual,
        lambda_stderr,
        seed: cfg.seed,
    })
}
