use std::collections::BTreeMap;

use mpec::circuit::passes::{
    apply_twirl, decompose_cc_cnot, insert_dephasing, replace_feedforward_with_delay, sample_twirl_with_rng,
};
use mpec::circuit::{parse_circuit, DynamicCircuit, FeedforwardOp, FeedforwardRule, Layer};
use mpec::dense::{max_abs_diff, CMatrix};
use mpec::families::random_dynamic_circuit;
use mpec::gate::{Gate, GateKind};
use mpec::pauli::PauliString;
use mpec::sim::{run_dense_with, DenseOptions, NoiseBinding};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_circuit(seed: u64, n: usize, depth: usize) -> (DynamicCircuit, NoiseBinding) {
    random_dynamic_circuit(n, depth, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Branch operators keyed by recorded bits, for an input operator.
fn branches(c: &DynamicCircuit, nb: &NoiseBinding, input: &PauliString, flips: u64) -> BTreeMap<u64, CMatrix> {
    let opts = DenseOptions {
        input: Some(input.to_matrix()),
        ..Default::default()
    };
    run_dense_with(c, nb, &opts)
        .unwrap()
        .by_record()
        .into_iter()
        .map(|(rec, rho)| (rec ^ flips, rho))
        .collect()
}

fn same_branches(a: &BTreeMap<u64, CMatrix>, b: &BTreeMap<u64, CMatrix>) -> f64 {
    let mut worst: f64 = 0.0;
    for key in a.keys().chain(b.keys()) {
        let d = match (a.get(key), b.get(key)) {
            (Some(x), Some(y)) => max_abs_diff(x, y),
            (Some(x), None) | (None, Some(x)) => x.iter().map(|v| v.norm()).fold(0.0, f64::max),
            (None, None) => 0.0,
        };
        worst = worst.max(d);
    }
    worst
}

fn twirlable_layers(c: &DynamicCircuit) -> Vec<usize> {
    c.layers()
        .iter()
        .enumerate()
        .filter(|(_, l)| l.label().is_some() && l.is_twirlable())
        .map(|(i, _)| i)
        .collect()
}

fn assert_preserved(before: &DynamicCircuit, after: &DynamicCircuit) -> Result<(), TestCaseError> {
    prop_assert_eq!(before.n_qubits(), after.n_qubits());
    prop_assert_eq!(before.n_clbits(), after.n_clbits());
    let reparsed = parse_circuit(&after.to_json()).unwrap();
    prop_assert_eq!(&reparsed, after);
    Ok(())
}

/// Random gates on three or four qubits followed by a measurement with a
/// classically-controlled CNOT.
fn cc_cnot_circuit(seed: u64) -> DynamicCircuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=4);
    let mut qs: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(&mut qs[..], &mut rng);
    let (m, control, target) = (qs[0], qs[1], qs[2]);
    let prep = (0..n)
        .map(|q| Gate::one([GateKind::H, GateKind::S, GateKind::X, GateKind::I][rng.gen_range(0..4)], q))
        .collect();
    DynamicCircuit::new(
        n,
        1,
        vec![
            Layer::unitary(prep),
            Layer::unitary(vec![Gate::cx(qs[0], qs[n - 1])]),
            Layer::measurement(
                &[m],
                &[0],
                vec![FeedforwardRule {
                    clbit: 0,
                    value: rng.gen_range(0..2),
                    op: FeedforwardOp::ControlledX { control },
                    target,
                }],
            ),
        ],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn twirled_instance_equals_untwirled_channel(seed in any::<u64>(), n in 2usize..=3, depth in 1usize..=4) {
        let (c, _) = random_circuit(seed, n, depth);
        let nb = NoiseBinding::noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let (tw, record) = sample_twirl_with_rng(&c, &twirlable_layers(&c), &mut rng).unwrap();
        for input in PauliString::all(n).step_by(3) {
            let want = branches(&c, &nb, &input, 0);
            let got = branches(&tw, &nb, &input, record.flip_mask());
            prop_assert!(same_branches(&want, &got) < 1e-10, "input {input}");
        }
    }

    #[test]
    fn flip_flags_follow_ancilla_twirl(seed in any::<u64>(), depth in 1usize..=5) {
        let (c, _) = random_circuit(seed, 3, depth);
        let layers = twirlable_layers(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, record) = sample_twirl_with_rng(&c, &layers, &mut rng).unwrap();
        for (i, p) in &record.twirls {
            if let Layer::Measurement { qubits, clbits, .. } = &c.layers()[*i] {
                for (q, b) in qubits.iter().zip(clbits) {
                    prop_assert_eq!(record.flips[*b], p.x_bit(*q));
                }
            }
        }
    }

    #[test]
    fn passes_preserve_registers(seed in any::<u64>(), n in 2usize..=5, depth in 0usize..=6) {
        let (c, _) = random_circuit(seed, n, depth);
        assert_preserved(&c, &c)?;
        assert_preserved(&c, &insert_dephasing(&c))?;
        assert_preserved(&c, &replace_feedforward_with_delay(&c))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tw, _) = sample_twirl_with_rng(&c, &twirlable_layers(&c), &mut rng).unwrap();
        assert_preserved(&c, &tw)?;
        let (none, record) = apply_twirl(&c, &[], &[]).unwrap();
        prop_assert_eq!(&none, &c);
        prop_assert_eq!(record.flip_mask(), 0);
    }

    #[test]
    fn cc_cnot_decomposition_is_exact(seed in any::<u64>()) {
        let c = cc_cnot_circuit(seed);
        let d = decompose_cc_cnot(&c, 2).unwrap();
        assert_preserved(&c, &d)?;
        for layer in d.layers() {
            for r in layer.feedforward() {
                prop_assert!(!matches!(r.op, FeedforwardOp::ControlledX { .. }), "conditional cx left");
            }
        }
        let nb = NoiseBinding::noiseless();
        for input in PauliString::all(c.n_qubits()).step_by(7) {
            prop_assert!(same_branches(&branches(&c, &nb, &input, 0), &branches(&d, &nb, &input, 0)) < 1e-10);
        }
    }
}
