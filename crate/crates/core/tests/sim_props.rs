use mpec::circuit::{DynamicCircuit, Layer};
use mpec::families::random_dynamic_circuit;
use mpec::noise::NoiseModel;
use mpec::pauli::{Pauli, PauliString};
use mpec::sim::{run_dense, run_trajectories_instance, twirled_ptm, CoherentPerturbation, NoiseBinding};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(0x6d70_6563),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn random_circuit(seed: u64, n: usize, depth: usize) -> (DynamicCircuit, NoiseBinding) {
    random_dynamic_circuit(n, depth, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn dense_output_is_a_state(seed in any::<u64>(), n in 2usize..=4, depth in 1usize..=5) {
        let (c, nb) = random_circuit(seed, n, depth);
        let out = run_dense(&c, &nb).unwrap();
        let rho = out.state();
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-10);
        prop_assert!(rho.trace().im.abs() < 1e-10);
        let eig = rho.symmetric_eigenvalues();
        prop_assert!(eig.iter().all(|&e| e >= -1e-10), "{eig}");
        let total: f64 = out.distribution().values().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        prop_assert!(out.distribution().values().all(|&p| p >= -1e-12));
    }

    #[test]
    fn trajectories_are_deterministic(seed in any::<u64>(), depth in 1usize..=6) {
        let (c, nb) = random_circuit(seed, 4, depth);
        let run = || run_trajectories_instance(&c, &nb, 5000, seed, 3, false).unwrap().counts.to_json_value();
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
        let multi = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(run);
        prop_assert_eq!(&single, &multi);
        prop_assert_eq!(&single, &run());
    }

    #[test]
    fn trajectory_frequencies_match_dense(seed in any::<u64>(), n in 2usize..=3, depth in 1usize..=4) {
        let (c, nb) = random_circuit(seed, n, depth);
        let shots = 4000u64;
        let exact = run_dense(&c, &nb).unwrap().distribution();
        let counts = run_trajectories_instance(&c, &nb, shots, seed, 0, false).unwrap().counts;
        for ((cb, t), _) in counts.iter() {
            prop_assert!(exact.contains_key(&(cb, t)), "impossible outcome {cb:b}/{t:b}");
        }
        for (&(cb, t), &p) in &exact {
            let freq = counts.get(cb, t) as f64 / shots as f64;
            let se = (p * (1.0 - p) / shots as f64).sqrt();
            prop_assert!((freq - p).abs() <= 4.0 * se + 1.0 / shots as f64, "{cb:b}/{t:b}: {freq} vs {p}");
        }
    }
}

fn measurement_pair() -> DynamicCircuit {
    DynamicCircuit::new(
        2,
        1,
        vec![Layer::measurement(&[1], &[0], vec![]).with_label("m").with_support(&[0])],
    )
    .unwrap()
}

fn planted(seed: u64, r: f64) -> NoiseBinding {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<PauliString> = PauliString::all(2).skip(1).collect();
    let terms: Vec<(String, f64)> = all.iter().map(|g| (g.label(), rng.gen_range(0.0..0.05))).collect();
    let borrowed: Vec<(&str, f64)> = terms.iter().map(|(s, l)| (s.as_str(), *l)).collect();
    let mut nb = NoiseBinding::noiseless()
        .with_layer_model("m", NoiseModel::from_labels(&[0, 1], &borrowed).unwrap())
        .with_coherent(
            "m",
            CoherentPerturbation {
                qubit: rng.gen_range(0..2),
                axis: [Pauli::X, Pauli::Y, Pauli::Z][rng.gen_range(0..3)],
                angle: rng.gen_range(-0.3..0.3),
            },
        );
    nb.discriminator = r;
    nb
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn twirl_average_diagonalizes_measurement_channel(seed in any::<u64>()) {
        let c = measurement_pair();
        let r = twirled_ptm(&c, &planted(seed, 0.0), 0).unwrap();
        prop_assert!(r.max_off_diagonal() < 1e-10);
        // ancilla X and Y components are destroyed by the measurement
        for (p, _) in r.nonzero_diagonal(1e-10) {
            prop_assert!(matches!(p.get(1), Pauli::I | Pauli::Z), "{p}");
        }
    }

    #[test]
    fn discriminator_error_is_invisible_to_twirled_ptm(seed in any::<u64>(), r in 0.0..0.3f64) {
        let c = measurement_pair();
        let clean = twirled_ptm(&c, &planted(seed, 0.0), 0).unwrap();
        let flipped = twirled_ptm(&c, &planted(seed, r), 0).unwrap();
        prop_assert!(clean.max_abs_diff(&flipped) < 1e-12);
    }
}
