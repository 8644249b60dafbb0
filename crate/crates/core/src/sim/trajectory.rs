//! Stabilizer Monte-Carlo backend for Clifford circuits with Pauli noise.

use rand::Rng;
use rayon::prelude::*;

use super::tableau::{single_images, SingleImages, Tableau};
use super::{Counts, NoiseBinding, Readout, FF_LATENCY_TAG};
use crate::circuit::{DynamicCircuit, FeedforwardOp, Layer};
use crate::clifford::SingleQubitClifford;
use crate::error::{Error, Result};
use crate::gate::GateKind;
use crate::noise::NoiseModel;
use crate::pauli::PauliString;
use crate::rng::stream_rng;

/// One sampled shot.
#[derive(Clone, Debug, PartialEq)]
pub struct ShotRecord {
    /// Recorded mid-circuit bits (bit `b` is clbit `b`).
    pub clbits: u64,
    /// Terminal Z readout (bit `q` is qubit `q`).
    pub terminal: u64,
    /// Non-identity noise Paulis sampled per layer index.
    pub inserted: Vec<(usize, PauliString)>,
}

#[derive(Clone, Debug)]
pub struct TrajectoryResult {
    pub counts: Counts,
    pub records: Vec<ShotRecord>,
}

#[derive(Clone, Debug)]
struct NoiseTerms(Vec<(u64, u64, f64)>);

impl NoiseTerms {
    fn new(m: &NoiseModel, n: usize) -> Result<Self> {
        let ws = m.weights();
        Ok(NoiseTerms(
            m.embedded(n)?
                .into_iter()
                .zip(ws)
                .filter(|(_, w)| *w < 1.0)
                .map(|((p, _), w)| (p.x_mask(), p.z_mask(), w))
                .collect(),
        ))
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> (u64, u64) {
        let (mut x, mut z) = (0, 0);
        for &(gx, gz, w) in &self.0 {
            if rng.gen::<f64>() >= w {
                x ^= gx;
                z ^= gz;
            }
        }
        (x, z)
    }
}

#[derive(Clone, Debug)]
enum Action {
    Nothing,
    Pauli(u64, u64),
    Single(usize, SingleImages),
    Cx(usize, usize),
}

#[derive(Clone, Debug)]
enum Op {
    Noise(usize, NoiseTerms),
    Act(Action),
    Cz(usize, usize),
    Swap(usize, usize),
    Measure { q: usize, b: usize, readout: Readout },
    Latency(NoiseTerms),
    Conditional { clbit: usize, value: u8, action: Action },
    Dephase(usize),
}

fn single_action(q: usize, c: &SingleQubitClifford) -> Action {
    match c.as_pauli() {
        Some(p) => {
            let pauli = PauliString::single(q + 1, q, p);
            Action::Pauli(pauli.x_mask(), pauli.z_mask())
        }
        None => Action::Single(q, single_images(c)),
    }
}

fn compile(c: &DynamicCircuit, nb: &NoiseBinding) -> Result<Vec<Op>> {
    nb.check_circuit(c)?;
    let n = c.n_qubits();
    let latency = nb
        .delays
        .get(FF_LATENCY_TAG)
        .map(|m| NoiseTerms::new(m, n))
        .transpose()?;
    let mut prog = Vec::new();
    for (i, layer) in c.layers().iter().enumerate() {
        if let Some(noise) = layer.label().and_then(|l| nb.layer(l)) {
            if !noise.coherent.is_empty() {
                return Err(Error::Unsupported(
                    "coherent perturbations need the dense backend".into(),
                ));
            }
            if let Some(m) = &noise.model {
                prog.push(Op::Noise(i, NoiseTerms::new(m, n)?));
            }
        }
        match layer {
            Layer::Unitary { gates, .. } => {
                for g in gates {
                    let op = match (g.kind, g.qubits.as_slice()) {
                        (GateKind::Cx, &[a, b]) => Op::Act(Action::Cx(a, b)),
                        (GateKind::Cz, &[a, b]) => Op::Cz(a, b),
                        (GateKind::Swap, &[a, b]) => Op::Swap(a, b),
                        (k, &[q]) if k.is_clifford() => {
                            Op::Act(single_action(q, &SingleQubitClifford::from_gate(k)?))
                        }
                        (k, _) => return Err(Error::NonClifford(k.name())),
                    };
                    prog.push(op);
                }
            }
            Layer::Measurement {
                qubits,
                clbits,
                feedforward,
                ..
            } => {
                for (&q, &b) in qubits.iter().zip(clbits) {
                    prog.push(Op::Measure {
                        q,
                        b,
                        readout: nb.readout_of(q),
                    });
                }
                if !feedforward.is_empty() {
                    if let Some(l) = &latency {
                        prog.push(Op::Latency(l.clone()));
                    }
                }
                for r in feedforward {
                    let action = match &r.op {
                        FeedforwardOp::Delay => Action::Nothing,
                        FeedforwardOp::Clifford(op) => single_action(r.target, op),
                        FeedforwardOp::ControlledX { control } => Action::Cx(*control, r.target),
                    };
                    prog.push(Op::Conditional {
                        clbit: r.clbit,
                        value: r.value,
                        action,
                    });
                }
            }
            Layer::Delay { tag } => {
                if let Some(m) = nb.delays.get(tag) {
                    prog.push(Op::Noise(i, NoiseTerms::new(m, n)?));
                }
            }
            Layer::Dephase { qubits } => prog.extend(qubits.iter().map(|&q| Op::Dephase(q))),
        }
    }
    Ok(prog)
}

fn act(t: &mut Tableau, a: &Action) {
    match a {
        Action::Nothing => {}
        Action::Pauli(x, z) => t.apply_pauli_masks(*x, *z),
        Action::Single(q, img) => t.apply_single(*q, img),
        Action::Cx(c, tg) => t.cx(*c, *tg),
    }
}

struct Shot {
    clbits: u64,
    terminal: u64,
    inserted: Vec<(usize, PauliString)>,
}

fn run_shot<R: Rng>(
    prog: &[Op],
    t: &mut Tableau,
    nb: &NoiseBinding,
    readout: &[Readout],
    rng: &mut R,
    trace: bool,
) -> Shot {
    let n = t.num_qubits();
    if nb.init_flip > 0.0 {
        for q in 0..n {
            if rng.gen::<f64>() < nb.init_flip {
                t.apply_pauli_masks(1 << q, 0);
            }
        }
    }
    let (mut ctrl, mut rec) = (0u64, 0u64);
    let mut inserted = Vec::new();
    let r = nb.discriminator;
    for op in prog {
        match op {
            Op::Noise(layer, terms) => {
                let (x, z) = terms.sample(rng);
                t.apply_pauli_masks(x, z);
                if trace && (x | z) != 0 {
                    inserted.push((*layer, PauliString::from_masks(n, x, z, crate::pauli::Phase::ONE)));
                }
            }
            Op::Latency(terms) => {
                let (x, z) = terms.sample(rng);
                t.apply_pauli_masks(x, z);
            }
            Op::Act(a) => act(t, a),
            Op::Cz(a, b) => t.cz(*a, *b),
            Op::Swap(a, b) => t.swap(*a, *b),
            Op::Measure { q, b, readout } => {
                let m = t.measure(*q, rng);
                let c = m ^ (r > 0.0 && rng.gen::<f64>() < r) as u8;
                let pa = readout.flip_prob(c);
                let recorded = c ^ (pa > 0.0 && rng.gen::<f64>() < pa) as u8;
                ctrl = (ctrl & !(1 << b)) | ((c as u64) << b);
                rec = (rec & !(1 << b)) | ((recorded as u64) << b);
            }
            Op::Conditional { clbit, value, action } => {
                if ((ctrl >> clbit) & 1) as u8 == *value {
                    act(t, action);
                }
            }
            Op::Dephase(q) => {
                if rng.gen::<bool>() {
                    t.apply_pauli_masks(0, 1 << q);
                }
            }
        }
    }
    let mut terminal = 0u64;
    for (q, ro) in readout.iter().enumerate().take(n) {
        let m = t.measure(q, rng);
        let pa = ro.flip_prob(m);
        let v = m ^ (pa > 0.0 && rng.gen::<f64>() < pa) as u8;
        terminal |= (v as u64) << q;
    }
    Shot {
        clbits: rec,
        terminal,
        inserted,
    }
}

const CHUNK: u64 = 4096;

/// Samples `shots` shots of instance 0 of `seed`, keeping per-shot records.
pub fn run_trajectories(
    c: &DynamicCircuit,
    nb: &NoiseBinding,
    shots: u64,
    seed: u64,
) -> Result<TrajectoryResult> {
    run_trajectories_instance(c, nb, shots, seed, 0, true)
}

/// Samples shots whose randomness derives from `(seed, instance, shot)`.
/// The result does not depend on the number of worker threads.
pub fn run_trajectories_instance(
    c: &DynamicCircuit,
    nb: &NoiseBinding,
    shots: u64,
    seed: u64,
    instance: u64,
    keep_records: bool,
) -> Result<TrajectoryResult> {
    let prog = compile(c, nb)?;
    let n = c.n_qubits();
    let readout: Vec<Readout> = (0..n).map(|q| nb.readout_of(q)).collect();
    let template = Tableau::new(n);
    let chunks: Vec<u64> = (0..shots.div_ceil(CHUNK)).collect();
    let run_chunk = |k: &u64| {
        let mut counts = Counts::new(c.n_clbits(), n);
        let mut records = Vec::new();
        let mut t = template.clone();
        for shot in k * CHUNK..((k + 1) * CHUNK).min(shots) {
            t.clone_from(&template);
            let mut rng = stream_rng(seed, instance, shot);
            let s = run_shot(&prog, &mut t, nb, &readout, &mut rng, keep_records);
            counts.add(s.clbits, s.terminal, 1);
            if keep_records {
                records.push(ShotRecord {
                    clbits: s.clbits,
                    terminal: s.terminal,
                    inserted: s.inserted,
                });
            }
        }
        (counts, records)
    };
    let parts: Vec<(Counts, Vec<ShotRecord>)> = if chunks.len() > 1 {
        chunks.par_iter().map(run_chunk).collect()
    } else {
        chunks.iter().map(run_chunk).collect()
    };
    let mut counts = Counts::new(c.n_clbits(), n);
    let mut records = Vec::new();
    for (cnt, rec) in parts {
        counts.merge(&cnt);
        records.extend(rec);
    }
    Ok(TrajectoryResult { counts, records })
}
