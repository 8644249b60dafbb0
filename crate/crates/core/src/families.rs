//! Ready-made circuits: the single-feedforward target, the two-check
//! surface-code tile, a classically-controlled CNOT fragment and random
//! dynamic Clifford circuits for backend cross-checks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::circuit::{DynamicCircuit, FeedforwardOp, FeedforwardRule, Layer};
use crate::clifford::SingleQubitClifford;
use crate::error::{Error, Result};
use crate::gate::{Gate, GateKind};
use crate::noise::NoiseModel;
use crate::pauli::{Pauli, PauliString};
use crate::sim::NoiseBinding;

/// A circuit together with the observables of interest and the Pauli
/// recovery applied in post-processing (empty when recovery runs in-circuit).
#[derive(Clone, Debug)]
pub struct Family {
    pub circuit: DynamicCircuit,
    pub observables: Vec<(String, PauliString)>,
    pub recovery: Vec<FeedforwardRule>,
}

impl Family {
    pub fn observable(&self, name: &str) -> Option<&PauliString> {
        self.observables.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }
}

/// Data qubit 0 is prepared in `√α|0⟩ + √(1−α)|1⟩`, copied onto ancilla 1
/// by a CNOT (layer `ul`), and the ancilla is measured with a conditional X
/// on the data (layer `ml`). The data always ends in `|0⟩`.
///
/// Observables: `z_data` (`ZI`, depends on the feedforward) and `z_anc`
/// (`IZ`, unaffected by it).
pub fn feedforward_target(alpha: f64) -> Result<Family> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha = {alpha} outside [0, 1]")));
    }
    let prep = if alpha == 1.0 {
        vec![]
    } else if alpha == 0.5 {
        vec![Gate::one(GateKind::H, 0)]
    } else if alpha == 0.0 {
        vec![Gate::one(GateKind::X, 0)]
    } else {
        vec![Gate::one(GateKind::Ry(2.0 * alpha.sqrt().acos()), 0)]
    };
    let circuit = DynamicCircuit::new(
        2,
        1,
        vec![
            Layer::unitary(prep),
            Layer::labeled_unitary("ul", vec![Gate::cx(0, 1)]),
            Layer::measurement(&[1], &[0], vec![FeedforwardRule::pauli(0, 1, Pauli::X, 0)])
                .with_label("ml")
                .with_support(&[0]),
        ],
    )?;
    Ok(Family {
        circuit,
        observables: vec![
            ("z_data".into(), "ZI".parse()?),
            ("z_anc".into(), "IZ".parse()?),
        ],
        recovery: vec![],
    })
}

/// Tile qubit roles: data `d0..d4` are qubits 0–4, ancillas `a0 = 5`, `a1 = 6`.
pub const TILE_DATA: [usize; 5] = [0, 1, 2, 3, 4];
pub const TILE_ANCILLA: [usize; 2] = [5, 6];

/// Surface-code tile: data in `|+⟩`, ancilla `a0` checks `Z012`, `a1` checks
/// `Z234`. Recovery flips `d0` on `m0 = 1` and `d4` on `m1 = 1`, either in
/// software (`hardware = false`) or as in-circuit feedforward.
///
/// PEC layers: unitary `ul1..ul4`, measurement `ml1` (support `d1, a0`) and
/// `ml2` (support `d3, d4, a1`). Observables are the stabilizers `Z012`,
/// `Z234` and `X123`.
pub fn surface_tile(hardware: bool) -> Result<Family> {
    let [d0, d1, d2, d3, d4] = TILE_DATA;
    let [a0, a1] = TILE_ANCILLA;
    let rec0 = FeedforwardRule::pauli(0, 1, Pauli::X, d0);
    let rec1 = FeedforwardRule::pauli(1, 1, Pauli::X, d4);
    let (ff0, ff1, recovery) = if hardware {
        (vec![rec0], vec![rec1], vec![])
    } else {
        (vec![], vec![], vec![rec0, rec1])
    };
    let layers = vec![
        Layer::unitary(TILE_DATA.iter().map(|&q| Gate::one(GateKind::H, q)).collect()),
        Layer::labeled_unitary("ul1", vec![Gate::cx(d0, a0), Gate::cx(d3, a1)]),
        Layer::labeled_unitary("ul2", vec![Gate::cx(d1, a0), Gate::cx(d4, a1)]),
        Layer::labeled_unitary("ul3", vec![Gate::cx(d2, a0)]),
        Layer::labeled_unitary("ul4", vec![Gate::cx(d2, a1)]),
        Layer::measurement(&[a0], &[0], ff0)
            .with_label("ml1")
            .with_support(&[d1]),
        Layer::measurement(&[a1], &[1], ff1)
            .with_label("ml2")
            .with_support(&[d3, d4]),
    ];
    let circuit = DynamicCircuit::new(7, 2, layers)?;
    Ok(Family {
        circuit,
        observables: vec![
            ("Z012".into(), "ZZZIIII".parse()?),
            ("Z234".into(), "IIZZZII".parse()?),
            ("X123".into(), "IXXXIII".parse()?),
        ],
        recovery,
    })
}

/// Three-qubit circuit measuring `a = 0` and applying CNOT `1 → 2` when the
/// outcome is 1.
pub fn cc_cnot_fragment() -> Result<DynamicCircuit> {
    DynamicCircuit::new(
        3,
        1,
        vec![Layer::measurement(
            &[0],
            &[0],
            vec![FeedforwardRule {
                clbit: 0,
                value: 1,
                op: FeedforwardOp::ControlledX { control: 1 },
                target: 2,
            }],
        )],
    )
}

const RANDOM_1Q: [GateKind; 7] = [
    GateKind::H,
    GateKind::S,
    GateKind::Sdg,
    GateKind::X,
    GateKind::Y,
    GateKind::Z,
    GateKind::I,
];

/// Random dynamic Clifford circuit on `n ≥ 2` qubits with `depth` layers of
/// gates, mid-circuit measurements with Pauli and Clifford feedforward,
/// dephasing and labeled layers, plus a random Pauli binding for the labels.
pub fn random_dynamic_circuit<R: Rng + ?Sized>(
    n: usize,
    depth: usize,
    rng: &mut R,
) -> Result<(DynamicCircuit, NoiseBinding)> {
    if n < 2 {
        return Err(Error::Config("random circuits need at least two qubits".into()));
    }
    let n_clbits = depth.max(1);
    let mut layers = Vec::new();
    let mut binding = NoiseBinding::noiseless();
    let mut next_clbit = 0;
    let cliffords = ["h", "s", "x", "tdg.x.t", "t.x.tdg.x", "sdg.h"];
    for d in 0..depth {
        let mut qs: Vec<usize> = (0..n).collect();
        qs.shuffle(rng);
        let mut gates = vec![Gate::cx(qs[0], qs[1])];
        for &q in &qs[2..] {
            gates.push(Gate::one(*RANDOM_1Q.choose(rng).unwrap(), q));
        }
        let label = format!("u{d}");
        layers.push(Layer::labeled_unitary(&label, gates));
        binding = binding.with_layer_model(&label, random_model(&[qs[0], qs[1]], rng)?);
        if rng.gen_bool(0.6) && next_clbit < n_clbits {
            let m = rng.gen_range(0..n);
            let t = (m + rng.gen_range(1..n)) % n;
            let op = SingleQubitClifford::parse(cliffords.choose(rng).unwrap())?;
            let b = next_clbit;
            next_clbit += 1;
            let label = format!("m{d}");
            layers.push(
                Layer::measurement(
                    &[m],
                    &[b],
                    vec![FeedforwardRule {
                        clbit: b,
                        value: rng.gen_range(0..2),
                        op: FeedforwardOp::Clifford(op),
                        target: t,
                    }],
                )
                .with_label(&label),
            );
            binding = binding.with_layer_model(&label, random_model(&[m, t], rng)?);
            if rng.gen_bool(0.5) {
                layers.push(Layer::Dephase { qubits: vec![m] });
            }
        }
    }
    binding.discriminator = rng.gen_range(0.0..0.05);
    Ok((DynamicCircuit::new(n, n_clbits, layers)?, binding))
}

fn random_model<R: Rng + ?Sized>(qubits: &[usize], rng: &mut R) -> Result<NoiseModel> {
    let k = qubits.len();
    let all: Vec<PauliString> = PauliString::all(k).skip(1).collect();
    let gens: Vec<PauliString> = all.choose_multiple(rng, 3.min(all.len())).cloned().collect();
    let terms: Vec<(String, f64)> = gens
        .iter()
        .map(|g| (g.label(), rng.gen_range(0.0..0.08)))
        .collect();
    let borrowed: Vec<(&str, f64)> = terms.iter().map(|(s, l)| (s.as_str(), *l)).collect();
    NoiseModel::from_labels(qubits, &borrowed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::passes::decompose_cc_cnot;
    use crate::sim::{ptm::ptm_of_circuit, run_dense};

    #[test]
    fn feedforward_ideal_values() {
        for alpha in [1.0, 0.5, 0.3] {
            let f = feedforward_target(alpha).unwrap();
            let out = run_dense(&f.circuit, &NoiseBinding::noiseless()).unwrap();
            let z = f.observable("z_data").unwrap();
            assert!((out.expectation(z, &[]).unwrap() - 1.0).abs() < 1e-12, "{alpha}");
            let p = out.record_probabilities();
            let p1 = p.get(&1).copied().unwrap_or(0.0);
            assert!((p1 - (1.0 - alpha)).abs() < 1e-12);
        }
    }

    #[test]
    fn tile_stabilizers_are_one() {
        for hardware in [false, true] {
            let f = surface_tile(hardware).unwrap();
            let out = run_dense(&f.circuit, &NoiseBinding::noiseless()).unwrap();
            for (name, o) in &f.observables {
                let v = out.state_expectation(o, &f.recovery).unwrap();
                assert!((v - 1.0).abs() < 1e-10, "{name} {hardware}: {v}");
            }
            let p = out.record_probabilities();
            for m in 0..4 {
                assert!((p[&m] - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cc_cnot_decomposition_is_channel_equal() {
        let reference = cc_cnot_fragment().unwrap();
        let decomposed = decompose_cc_cnot(&reference, 0).unwrap();
        let nb = NoiseBinding::noiseless();
        let a = ptm_of_circuit(&reference, &nb).unwrap();
        let b = ptm_of_circuit(&decomposed, &nb).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-10, "{}", a.max_abs_diff(&b));
    }
}
