//! Sparse Pauli-Lindblad noise models.
//!
//! A model lives on an ordered qubit list; generator labels are local to that
//! list (character `k` acts on `qubits[k]`). The channel is the ordered
//! product of `ρ → w ρ + (1 − w) P ρ P` over generators with
//! `w = (1 + e^{−2λ}) / 2`.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dense::{self, CMatrix};
use crate::error::{Error, Result};
use crate::pauli::PauliString;

/// Rates below this are treated as exact zeros by `gamma` and the samplers.
pub const LAMBDA_FLOOR: f64 = 1e-12;

/// `(1 + e^{−2λ}) / 2`, the no-error probability of one generator.
pub fn weight(lambda: f64) -> Result<f64> {
    if !lambda.is_finite() {
        return Err(Error::NonFinite(format!("rate {lambda}")));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidModel(format!("negative rate {lambda}")));
    }
    Ok(0.5 * (1.0 + (-2.0 * lambda).exp()))
}

fn check_local_set(kind: &str, width: usize, paulis: &[PauliString]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for p in paulis {
        if p.num_qubits() != width {
            return Err(Error::SupportMismatch(format!(
                "{kind} {p} has {} qubits, support has {width}",
                p.num_qubits()
            )));
        }
        if p.is_identity() {
            return Err(Error::InvalidModel(format!("{kind} set contains the identity")));
        }
        if !seen.insert(p.unsigned()) {
            return Err(Error::InvalidModel(format!("duplicate {kind} {p}")));
        }
    }
    Ok(())
}

/// Ordered generator list on a qubit support.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSet {
    qubits: Vec<usize>,
    generators: Vec<PauliString>,
}

impl GeneratorSet {
    pub fn new(qubits: Vec<usize>, generators: Vec<PauliString>) -> Result<Self> {
        let distinct: BTreeSet<_> = qubits.iter().collect();
        if distinct.len() != qubits.len() {
            return Err(Error::InvalidModel("repeated qubit in support".into()));
        }
        let generators: Vec<_> = generators.iter().map(PauliString::unsigned).collect();
        check_local_set("generator", qubits.len(), &generators)?;
        Ok(GeneratorSet { qubits, generators })
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }
}

/// Ordered list of fidelity bases on a qubit support.
#[derive(Clone, Debug, PartialEq)]
pub struct FidelityBasisSet {
    qubits: Vec<usize>,
    bases: Vec<PauliString>,
}

impl FidelityBasisSet {
    pub fn new(qubits: Vec<usize>, bases: Vec<PauliString>) -> Result<Self> {
        let bases: Vec<_> = bases.iter().map(PauliString::unsigned).collect();
        check_local_set("basis", qubits.len(), &bases)?;
        Ok(FidelityBasisSet { qubits, bases })
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn bases(&self) -> &[PauliString] {
        &self.bases
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }
}

/// `M[q][l] = ⟨F_q, K_l⟩_sp`.
pub fn build_m(f: &FidelityBasisSet, k: &GeneratorSet) -> Result<Vec<Vec<u8>>> {
    if f.qubits() != k.qubits() {
        return Err(Error::SupportMismatch(format!(
            "bases on {:?}, generators on {:?}",
            f.qubits(),
            k.qubits()
        )));
    }
    Ok(f.bases()
        .iter()
        .map(|q| {
            k.generators()
                .iter()
                .map(|l| q.symplectic_unchecked(l))
                .collect()
        })
        .collect())
}

/// Generator set with one non-negative rate per generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct NoiseModel {
    generators: GeneratorSet,
    lambdas: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    qubits: Vec<usize>,
    generators: Vec<PauliString>,
    lambdas: Vec<f64>,
}

impl TryFrom<RawModel> for NoiseModel {
    type Error = Error;
    fn try_from(r: RawModel) -> Result<Self> {
        NoiseModel::new(GeneratorSet::new(r.qubits, r.generators)?, r.lambdas)
    }
}

impl From<NoiseModel> for RawModel {
    fn from(m: NoiseModel) -> Self {
        RawModel {
            qubits: m.generators.qubits,
            generators: m.generators.generators,
            lambdas: m.lambdas,
        }
    }
}

impl NoiseModel {
    pub fn new(generators: GeneratorSet, lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.len() != generators.len() {
            return Err(Error::InvalidModel(format!(
                "{} generators but {} rates",
                generators.len(),
                lambdas.len()
            )));
        }
        for &l in &lambdas {
            weight(l)?;
        }
        Ok(NoiseModel { generators, lambdas })
    }

    /// Builds a model from labels, e.g. `from_labels(&[0, 1], &[("IX", 0.01)])`.
    pub fn from_labels(qubits: &[usize], terms: &[(&str, f64)]) -> Result<Self> {
        let gens = terms
            .iter()
            .map(|(s, _)| s.parse())
            .collect::<Result<Vec<PauliString>>>()?;
        let lambdas = terms.iter().map(|t| t.1).collect();
        NoiseModel::new(GeneratorSet::new(qubits.to_vec(), gens)?, lambdas)
    }

    /// All rates zero.
    pub fn noiseless(generators: GeneratorSet) -> Self {
        let lambdas = vec![0.0; generators.len()];
        NoiseModel { generators, lambdas }
    }

    pub fn generator_set(&self) -> &GeneratorSet {
        &self.generators
    }

    pub fn generators(&self) -> &[PauliString] {
        self.generators.generators()
    }

    pub fn qubits(&self) -> &[usize] {
        self.generators.qubits()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    fn effective(&self, l: f64) -> f64 {
        if l < LAMBDA_FLOOR {
            0.0
        } else {
            l
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        self.lambdas
            .iter()
            .map(|&l| weight(self.effective(l)).expect("validated"))
            .collect()
    }

    /// Sampling overhead `exp(2 Σ λ)`.
    pub fn gamma(&self) -> f64 {
        (2.0 * self.lambdas.iter().map(|&l| self.effective(l)).sum::<f64>()).exp()
    }

    /// Same generators with every rate multiplied by `factor ≥ 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        NoiseModel::new(
            self.generators.clone(),
            self.lambdas.iter().map(|l| l * factor).collect(),
        )
    }

    /// Channel composition on a shared support; repeated generators add rates.
    pub fn compose(&self, other: &NoiseModel) -> Result<NoiseModel> {
        if self.qubits() != other.qubits() {
            return Err(Error::SupportMismatch(format!(
                "{:?} vs {:?}",
                self.qubits(),
                other.qubits()
            )));
        }
        let mut gens = self.generators().to_vec();
        let mut lambdas = self.lambdas.clone();
        for (g, &l) in other.generators().iter().zip(&other.lambdas) {
            match gens.iter().position(|h| h == g) {
                Some(i) => lambdas[i] += l,
                None => {
                    gens.push(g.clone());
                    lambdas.push(l);
                }
            }
        }
        NoiseModel::new(GeneratorSet::new(self.qubits().to_vec(), gens)?, lambdas)
    }

    /// `exp(−2 Σ_{l anticommuting with q} λ_l)`; `q` is local to the support.
    pub fn predict_fidelity(&self, q: &PauliString) -> Result<f64> {
        if q.num_qubits() != self.qubits().len() {
            return Err(Error::SupportMismatch(format!(
                "basis {q} on {} qubits, model on {}",
                q.num_qubits(),
                self.qubits().len()
            )));
        }
        let s: f64 = self
            .generators()
            .iter()
            .zip(&self.lambdas)
            .filter(|(g, _)| q.symplectic_unchecked(g) == 1)
            .map(|(_, l)| l)
            .sum();
        Ok((-2.0 * s).exp())
    }

    /// One Pauli drawn from the channel.
    pub fn sample_forward<R: Rng + ?Sized>(&self, rng: &mut R) -> PauliString {
        let mut p = PauliString::identity(self.qubits().len());
        for (g, w) in self.generators().iter().zip(self.weights()) {
            if w < 1.0 && rng.gen::<f64>() >= w {
                p = p.multiply_unchecked(g);
            }
        }
        p.unsigned()
    }

    /// One term of the inverse channel: the inserted Pauli and its sign.
    /// `γ · E[sign · P·P]` equals the inverse channel.
    pub fn sample_inverse<R: Rng + ?Sized>(&self, rng: &mut R) -> (PauliString, i8) {
        let mut p = PauliString::identity(self.qubits().len());
        let mut sign = 1i8;
        for (g, w) in self.generators().iter().zip(self.weights()) {
            if w < 1.0 && rng.gen::<f64>() >= w {
                p = p.multiply_unchecked(g);
                sign = -sign;
            }
        }
        (p.unsigned(), sign)
    }

    /// Exact quasi-probability decomposition of the inverse channel:
    /// `Λ^{-1}(ρ) = Σ c_P P ρ P` with coefficients including `γ`.
    pub fn inverse_terms(&self) -> Vec<(PauliString, f64)> {
        self.expand(|w| (w, -(1.0 - w)), self.gamma())
    }

    /// Exact Pauli error distribution of the channel.
    pub fn forward_terms(&self) -> Vec<(PauliString, f64)> {
        self.expand(|w| (w, 1.0 - w), 1.0)
    }

    fn expand(&self, split: impl Fn(f64) -> (f64, f64), scale: f64) -> Vec<(PauliString, f64)> {
        let mut terms: BTreeMap<PauliString, f64> = BTreeMap::new();
        terms.insert(PauliString::identity(self.qubits().len()), scale);
        for (g, w) in self.generators().iter().zip(self.weights()) {
            if w == 1.0 {
                continue;
            }
            let (keep, hit) = split(w);
            let mut next = BTreeMap::new();
            for (p, c) in terms {
                *next.entry(p.clone()).or_insert(0.0) += c * keep;
                *next.entry(p.multiply_unchecked(g).unsigned()).or_insert(0.0) += c * hit;
            }
            terms = next;
        }
        terms.into_iter().collect()
    }

    /// Applies the channel to a density matrix on the model's support.
    pub fn apply_channel_dense(&self, rho: &CMatrix) -> Result<CMatrix> {
        let k = self.qubits().len();
        dense::check_cap(k, dense::DENSE_QUBIT_CAP)?;
        if rho.nrows() != 1 << k || rho.ncols() != 1 << k {
            return Err(Error::DimensionMismatch {
                left: k,
                right: rho.nrows().trailing_zeros() as usize,
            });
        }
        let mut out = rho.clone();
        for (g, w) in self.generators().iter().zip(self.weights()) {
            out = dense::pauli_mix(&out, g, w);
        }
        Ok(out)
    }

    /// Generators re-indexed onto an `n`-qubit register with their rates.
    pub fn embedded(&self, n: usize) -> Result<Vec<(PauliString, f64)>> {
        self.generators()
            .iter()
            .zip(&self.lambdas)
            .map(|(g, &l)| Ok((g.embed(n, self.qubits())?, l)))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(doc: &str) -> Result<Self> {
        serde_json::from_str(doc).map_err(|e| Error::Schema(e.to_string()))
    }
}

/// One entry of a topology file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyLayer {
    pub name: String,
    pub qubits: Vec<usize>,
    #[serde(default)]
    pub measured: Vec<usize>,
    /// Explicit generator labels; when absent the full allowed set is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<PauliString>>,
    /// Drops generators heavier than this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_weight: Option<usize>,
}

/// User-supplied noise-support configuration, one entry per PEC layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub layers: Vec<TopologyLayer>,
}

impl Topology {
    pub fn from_json(doc: &str) -> Result<Self> {
        let t: Topology = serde_json::from_str(doc).map_err(|e| Error::Schema(e.to_string()))?;
        for l in &t.layers {
            if let Some(&q) = l.measured.iter().find(|q| !l.qubits.contains(q)) {
                return Err(Error::Config(format!(
                    "layer {:?}: measured qubit {q} outside its support",
                    l.name
                )));
            }
        }
        Ok(t)
    }

    pub fn layer(&self, name: &str) -> Result<&TopologyLayer> {
        self.layers
            .iter()
            .find(|l| l.name == name)
            .ok_or_else(|| Error::Config(format!("topology has no layer {name:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{basis_state, max_abs_diff};
    use num_complex::Complex64;
    use rand::SeedableRng;

    #[test]
    fn weight_examples() {
        assert_eq!(weight(0.0).unwrap(), 1.0);
        let w = weight(0.37).unwrap();
        assert!((2.0 * w - 1.0 - (-0.74f64).exp()).abs() < 1e-15);
        // (1 + e^{-0.1}) / 2 from a 30-digit evaluation
        assert!((weight(0.05).unwrap() - 0.952_418_709_017_979_7).abs() < 1e-15);
        assert!(weight(-0.1).is_err());
    }

    #[test]
    fn gamma_examples() {
        let g = GeneratorSet::new(vec![0], vec!["X".parse().unwrap()]).unwrap();
        assert_eq!(NoiseModel::noiseless(g.clone()).gamma(), 1.0);
        let m = NoiseModel::new(g, vec![0.1]).unwrap();
        assert!((m.gamma() - 0.2f64.exp()).abs() < 1e-14);
        let a = NoiseModel::from_labels(&[0, 1], &[("XI", 0.02), ("ZZ", 0.01)]).unwrap();
        let b = NoiseModel::from_labels(&[0, 1], &[("IY", 0.03), ("ZZ", 0.005)]).unwrap();
        let ab = a.compose(&b).unwrap();
        assert!((ab.gamma() - a.gamma() * b.gamma()).abs() < 1e-13);
    }

    #[test]
    fn build_m_examples() {
        let f = FidelityBasisSet::new(vec![7], vec!["Z".parse().unwrap()]).unwrap();
        let k = GeneratorSet::new(vec![7], vec!["X".parse().unwrap()]).unwrap();
        assert_eq!(build_m(&f, &k).unwrap(), vec![vec![1]]);

        let xyz: Vec<PauliString> = ["X", "Y", "Z"].iter().map(|s| s.parse().unwrap()).collect();
        let f = FidelityBasisSet::new(vec![0], xyz.clone()).unwrap();
        let k = GeneratorSet::new(vec![0], xyz).unwrap();
        assert_eq!(
            build_m(&f, &k).unwrap(),
            vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]
        );
        let other = GeneratorSet::new(vec![1], vec!["X".parse().unwrap()]).unwrap();
        assert!(matches!(build_m(&f, &other), Err(Error::SupportMismatch(_))));
    }

    #[test]
    fn set_validation() {
        assert!(GeneratorSet::new(vec![0], vec!["I".parse().unwrap()]).is_err());
        assert!(GeneratorSet::new(vec![0], vec!["X".parse().unwrap(), "-X".parse().unwrap()]).is_err());
        assert!(GeneratorSet::new(vec![0], vec!["XX".parse().unwrap()]).is_err());
        assert!(NoiseModel::from_labels(&[0], &[("X", -0.1)]).is_err());
    }

    #[test]
    fn singleton_fidelity() {
        let m = NoiseModel::from_labels(&[3], &[("X", 0.04)]).unwrap();
        assert!((m.predict_fidelity(&"Z".parse().unwrap()).unwrap() - (-0.08f64).exp()).abs() < 1e-15);
        assert_eq!(m.predict_fidelity(&"X".parse().unwrap()).unwrap(), 1.0);
        assert!(m.predict_fidelity(&"ZZ".parse().unwrap()).is_err());
    }

    #[test]
    fn exhaustive_inverse_cancels() {
        let m = NoiseModel::from_labels(&[0, 1], &[("IX", 0.05), ("ZZ", 0.1)]).unwrap();
        let terms = m.inverse_terms();
        let mut rho = basis_state(&[0, 1]);
        crate::dense::apply_1q(&mut rho, 2, 0, &crate::gate::GateKind::H.matrix1().unwrap());
        let noisy = m.apply_channel_dense(&rho).unwrap();
        let mut back = CMatrix::zeros(4, 4);
        for (p, c) in &terms {
            back += crate::dense::conjugate_pauli(&noisy, p) * Complex64::from(*c);
        }
        assert!(max_abs_diff(&back, &rho) < 1e-12);
        let total: f64 = terms.iter().map(|t| t.1.abs()).sum();
        assert!((total - m.gamma()).abs() < 1e-12);
    }

    #[test]
    fn zero_model_samples_identity() {
        let m = NoiseModel::from_labels(&[0, 1], &[("IX", 0.0), ("XX", 1e-14)]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert!(m.sample_forward(&mut rng).is_identity());
            let (p, s) = m.sample_inverse(&mut rng);
            assert!(p.is_identity() && s == 1);
        }
        assert_eq!(m.gamma(), 1.0);
    }

    #[test]
    fn json_round_trip() {
        let m = NoiseModel::from_labels(&[0, 7], &[("IX", 0.01), ("XI", 0.02)]).unwrap();
        let back = NoiseModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let t = Topology::from_json(
            r#"{"layers":[{"name":"ml_q0_q7","qubits":[0,7],"measured":[7],"generators":["IX","XI"]}]}"#,
        )
        .unwrap();
        assert_eq!(t.layer("ml_q0_q7").unwrap().measured, vec![7]);
        assert!(t.layer("nope").is_err());
    }
}
