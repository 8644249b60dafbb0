use std::collections::BTreeMap;

use mpec::circuit::DynamicCircuit;
use mpec::exec::Executor;
use mpec::families::random_dynamic_circuit;
use mpec::noise::NoiseModel;
use mpec::pauli::{Pauli, PauliString};
use mpec::pec::{exhaustive_expectation, required_models, Arm, MitigationPlan};
use mpec::sim::NoiseBinding;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn plan(c: &DynamicCircuit, nb: &NoiseBinding, arm: Arm) -> MitigationPlan {
    let models: BTreeMap<String, NoiseModel> = required_models(c, Arm::Full)
        .into_iter()
        .map(|l| {
            let m = nb.layer(&l).and_then(|n| n.model.clone()).unwrap();
            (l, m)
        })
        .collect();
    MitigationPlan {
        circuit: c.clone(),
        models,
        arm,
        instances: 1,
        shots: 1,
        seed: 0,
        executor: Executor::Exact,
    }
}

fn circuit(seed: u64, n: usize, depth: usize) -> (DynamicCircuit, NoiseBinding) {
    let (c, mut nb) = random_dynamic_circuit(n, depth, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    // classical control errors are outside the mitigated model
    nb.discriminator = 0.0;
    (c, nb)
}

fn observable(n: usize, picks: &[usize]) -> PauliString {
    let ps: Vec<Pauli> = picks[..n].iter().map(|&i| Pauli::ALL[i]).collect();
    let o = PauliString::from_paulis(&ps);
    if o.is_identity() {
        PauliString::single(n, 0, Pauli::Z)
    } else {
        o
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn exhaustive_pec_recovers_ideal_values(
        seed in any::<u64>(),
        n in 2usize..=3,
        depth in 1usize..=3,
        picks in prop::collection::vec(0usize..4, 3),
    ) {
        let (c, nb) = circuit(seed, n, depth);
        let o = observable(n, &picks);
        let full = exhaustive_expectation(&plan(&c, &nb, Arm::Full), &nb, &o, &[]).unwrap();
        let ideal = exhaustive_expectation(&plan(&c, &nb, Arm::Raw), &NoiseBinding::noiseless(), &o, &[]).unwrap();
        prop_assert!((full - ideal).abs() < 1e-8, "{o}: {full} vs {ideal}");
    }

    #[test]
    fn gamma_total_is_exponential_of_mitigated_rates(seed in any::<u64>(), depth in 1usize..=5) {
        let (c, nb) = circuit(seed, 3, depth);
        for arm in Arm::ALL {
            let p = plan(&c, &nb, arm);
            let rates: f64 = p
                .mitigated_layers()
                .unwrap()
                .iter()
                .flat_map(|(_, m)| m.lambdas().to_vec())
                .sum();
            let per_layer: f64 = p.mitigated_layers().unwrap().iter().map(|(_, m)| m.gamma()).product();
            let g = p.gamma_total().unwrap();
            prop_assert!((g - (2.0 * rates).exp()).abs() < 1e-12 * g);
            prop_assert!((g - per_layer).abs() < 1e-12 * g);
            if arm == Arm::Raw {
                prop_assert_eq!(g, 1.0);
            }
        }
    }
}
