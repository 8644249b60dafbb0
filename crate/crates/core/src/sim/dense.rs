//! Exact branch-resolved density-matrix backend.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::counts::weighted_expectation;
use super::{NoiseBinding, FF_LATENCY_TAG};
use crate::circuit::{DynamicCircuit, FeedforwardOp, FeedforwardRule, Layer};
use crate::dense::{self as kern, CMatrix, DENSE_QUBIT_CAP};
use crate::error::Result;
use crate::gate::{Gate, GateKind};
use crate::noise::NoiseModel;
use crate::pauli::PauliString;

/// Extra controls for [`run_dense_with`].
#[derive(Clone, Debug, Default)]
pub struct DenseOptions {
    /// Inverse channels of these models act right before the bound noise of
    /// the layer with the matching label (exact quasi-probability PEC).
    pub inverse: BTreeMap<String, NoiseModel>,
    /// Initial operator instead of the default product state.
    pub input: Option<CMatrix>,
}

/// Classical branches of a dense run, keyed by `(control bits, recorded bits)`.
/// Branch matrices are unnormalized; their traces are branch probabilities.
#[derive(Clone, Debug)]
pub struct DenseOutput {
    n: usize,
    branches: BTreeMap<(u64, u64), CMatrix>,
    readout: Vec<super::Readout>,
}

impl DenseOutput {
    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Branch matrices keyed by `(control bits, recorded bits)`.
    pub fn branches(&self) -> &BTreeMap<(u64, u64), CMatrix> {
        &self.branches
    }

    /// Output state with all classical information discarded.
    pub fn state(&self) -> CMatrix {
        let dim = 1 << self.n;
        self.branches
            .values()
            .fold(CMatrix::zeros(dim, dim), |acc, r| acc + r)
    }

    /// Conditional states keyed by recorded bits.
    pub fn by_record(&self) -> BTreeMap<u64, CMatrix> {
        let mut out: BTreeMap<u64, CMatrix> = BTreeMap::new();
        for (&(_, rec), rho) in &self.branches {
            match out.get_mut(&rec) {
                Some(acc) => *acc += rho,
                None => {
                    out.insert(rec, rho.clone());
                }
            }
        }
        out
    }

    /// Probability of each recorded-bit pattern.
    pub fn record_probabilities(&self) -> BTreeMap<u64, f64> {
        self.by_record()
            .into_iter()
            .map(|(k, r)| (k, kern::trace(&r)))
            .collect()
    }

    /// Joint distribution of recorded bits and the terminal Z readout,
    /// including terminal assignment errors.
    pub fn distribution(&self) -> BTreeMap<(u64, u64), f64> {
        let n = self.n;
        let dim = 1usize << n;
        let mut out = BTreeMap::new();
        for (rec, rho) in self.by_record() {
            // probabilities indexed by qubit mask (bit q = qubit q)
            let mut probs = vec![0.0; dim];
            for idx in 0..dim {
                let mask = (0..n).fold(0usize, |m, q| m | (((idx >> (n - 1 - q)) & 1) << q));
                probs[mask] = rho[(idx, idx)].re;
            }
            for (q, ro) in self.readout.iter().enumerate() {
                if ro.p0_given_1 == 0.0 && ro.p1_given_0 == 0.0 {
                    continue;
                }
                let bit = 1 << q;
                for m in (0..dim).filter(|m| m & bit == 0) {
                    let (p0, p1) = (probs[m], probs[m | bit]);
                    probs[m] = p0 * (1.0 - ro.p1_given_0) + p1 * ro.p0_given_1;
                    probs[m | bit] = p0 * ro.p1_given_0 + p1 * (1.0 - ro.p0_given_1);
                }
            }
            for (t, p) in probs.into_iter().enumerate() {
                if p.abs() > 1e-300 {
                    *out.entry((rec, t as u64)).or_insert(0.0) += p;
                }
            }
        }
        out
    }

    /// Exact expectation of a diagonal observable from [`Self::distribution`].
    pub fn expectation(&self, o: &PauliString, recovery: &[FeedforwardRule]) -> Result<f64> {
        weighted_expectation(self.distribution(), o, recovery)
    }

    /// `Σ_branches sign(rec) · tr(O ρ_branch)` for any Pauli `O`, ignoring
    /// terminal readout error.
    pub fn state_expectation(&self, o: &PauliString, recovery: &[FeedforwardRule]) -> Result<f64> {
        let mut acc = 0.0;
        for (rec, rho) in self.by_record() {
            let s = super::software_recovery_sign(recovery, rec, o)? as f64;
            acc += s * kern::expectation(&rho, o);
        }
        Ok(acc)
    }
}

/// Exact run with default options.
pub fn run_dense(c: &DynamicCircuit, nb: &NoiseBinding) -> Result<DenseOutput> {
    run_dense_with(c, nb, &DenseOptions::default())
}

fn embed_pairs(m: &NoiseModel, n: usize) -> Result<Vec<(PauliString, f64)>> {
    let ws = m.weights();
    Ok(m.embedded(n)?
        .into_iter()
        .zip(ws)
        .map(|((p, _), w)| (p, w))
        .collect())
}

fn apply_model(rho: &CMatrix, terms: &[(PauliString, f64)]) -> CMatrix {
    terms
        .iter()
        .fold(rho.clone(), |acc, (p, w)| kern::pauli_mix(&acc, p, *w))
}

fn apply_linear(rho: &CMatrix, terms: &[(PauliString, f64)]) -> CMatrix {
    let dim = rho.nrows();
    terms.iter().fold(CMatrix::zeros(dim, dim), |acc, (p, c)| {
        acc + kern::conjugate_pauli(rho, p) * Complex64::from(*c)
    })
}

fn apply_rule(rho: &mut CMatrix, n: usize, rule: &FeedforwardRule) -> Result<()> {
    match &rule.op {
        FeedforwardOp::Delay => {}
        FeedforwardOp::Clifford(op) => kern::apply_1q(rho, n, rule.target, &op.matrix()),
        FeedforwardOp::ControlledX { control } => {
            kern::apply_gate(rho, n, &Gate::new(GateKind::Cx, &[*control, rule.target]))?
        }
    }
    Ok(())
}

fn for_each_branch(
    branches: &mut BTreeMap<(u64, u64), CMatrix>,
    mut f: impl FnMut(&mut CMatrix, u64) -> Result<()>,
) -> Result<()> {
    for (&(ctrl, _), rho) in branches.iter_mut() {
        f(rho, ctrl)?;
    }
    Ok(())
}

/// Exact run. Dephase layers average both Z branches.
pub fn run_dense_with(c: &DynamicCircuit, nb: &NoiseBinding, opts: &DenseOptions) -> Result<DenseOutput> {
    let n = c.n_qubits();
    kern::check_cap(n, DENSE_QUBIT_CAP)?;
    nb.check_circuit(c)?;
    let dim = 1usize << n;

    let init = match &opts.input {
        Some(rho) => {
            if rho.nrows() != dim || rho.ncols() != dim {
                return Err(crate::Error::DimensionMismatch {
                    left: n,
                    right: rho.nrows().trailing_zeros() as usize,
                });
            }
            rho.clone()
        }
        None => {
            let mut rho = kern::basis_state(&vec![0; n]);
            if nb.init_flip > 0.0 {
                for q in 0..n {
                    let x = PauliString::single(n, q, crate::pauli::Pauli::X);
                    rho = kern::pauli_mix(&rho, &x, 1.0 - nb.init_flip);
                }
            }
            rho
        }
    };
    let mut branches: BTreeMap<(u64, u64), CMatrix> = BTreeMap::new();
    branches.insert((0, 0), init);

    let latency = nb.delays.get(FF_LATENCY_TAG).map(|m| embed_pairs(m, n)).transpose()?;
    let r = nb.discriminator;

    for layer in c.layers() {
        if let Some(label) = layer.label() {
            if let Some(inv) = opts.inverse.get(label) {
                let terms: Vec<_> = inv
                    .inverse_terms()
                    .into_iter()
                    .map(|(p, coef)| Ok((p.embed(n, inv.qubits())?, coef)))
                    .collect::<Result<_>>()?;
                for_each_branch(&mut branches, |rho, _| {
                    *rho = apply_linear(rho, &terms);
                    Ok(())
                })?;
            }
            if let Some(noise) = nb.layer(label) {
                if let Some(m) = &noise.model {
                    let terms = embed_pairs(m, n)?;
                    for_each_branch(&mut branches, |rho, _| {
                        *rho = apply_model(rho, &terms);
                        Ok(())
                    })?;
                }
                for p in &noise.coherent {
                    let u = p.matrix();
                    for_each_branch(&mut branches, |rho, _| {
                        kern::apply_1q(rho, n, p.qubit, &u);
                        Ok(())
                    })?;
                }
            }
        }
        match layer {
            Layer::Unitary { gates, .. } => {
                for_each_branch(&mut branches, |rho, _| {
                    for g in gates {
                        kern::apply_gate(rho, n, g)?;
                    }
                    Ok(())
                })?;
            }
            Layer::Measurement {
                qubits,
                clbits,
                feedforward,
                ..
            } => {
                for (&q, &b) in qubits.iter().zip(clbits) {
                    let ro = nb.readout_of(q);
                    let mut next: BTreeMap<(u64, u64), CMatrix> = BTreeMap::new();
                    for ((ctrl, rec), rho) in branches {
                        for m in 0..2u8 {
                            let proj = kern::project(&rho, n, q, m);
                            if proj.iter().all(|z| z.norm() < 1e-15) {
                                continue;
                            }
                            for (flip, pr) in [(0u8, 1.0 - r), (1, r)] {
                                if pr == 0.0 {
                                    continue;
                                }
                                let cbit = m ^ flip;
                                let pa = ro.flip_prob(cbit);
                                for (aflip, pw) in [(0u8, 1.0 - pa), (1, pa)] {
                                    if pw == 0.0 {
                                        continue;
                                    }
                                    let rbit = cbit ^ aflip;
                                    let key = (
                                        (ctrl & !(1 << b)) | ((cbit as u64) << b),
                                        (rec & !(1 << b)) | ((rbit as u64) << b),
                                    );
                                    let term = &proj * Complex64::from(pr * pw);
                                    match next.get_mut(&key) {
                                        Some(acc) => *acc += term,
                                        None => {
                                            next.insert(key, term);
                                        }
                                    }
                                }
                            }
                        }
                    }
                    branches = next;
                }
                if !feedforward.is_empty() {
                    if let Some(terms) = &latency {
                        for_each_branch(&mut branches, |rho, _| {
                            *rho = apply_model(rho, terms);
                            Ok(())
                        })?;
                    }
                }
                for_each_branch(&mut branches, |rho, ctrl| {
                    for rule in feedforward {
                        if ((ctrl >> rule.clbit) & 1) as u8 == rule.value {
                            apply_rule(rho, n, rule)?;
                        }
                    }
                    Ok(())
                })?;
            }
            Layer::Delay { tag } => {
                if let Some(m) = nb.delays.get(tag) {
                    let terms = embed_pairs(m, n)?;
                    for_each_branch(&mut branches, |rho, _| {
                        *rho = apply_model(rho, &terms);
                        Ok(())
                    })?;
                }
            }
            Layer::Dephase { qubits } => {
                for_each_branch(&mut branches, |rho, _| {
                    for &q in qubits {
                        *rho = kern::dephase(rho, n, q);
                    }
                    Ok(())
                })?;
            }
        }
    }

    Ok(DenseOutput {
        n,
        branches,
        readout: (0..n).map(|q| nb.readout_of(q)).collect(),
    })
}
