use mpec::dense::{conjugate_pauli, CMatrix};
use mpec::noise::{build_m, FidelityBasisSet, GeneratorSet, NoiseModel};
use mpec::pauli::PauliString;
use mpec::sim::ptm_of;
use proptest::prelude::*;

/// Random model on `k` local qubits with up to `max_terms` distinct generators.
fn model(max_qubits: usize, max_terms: usize) -> impl Strategy<Value = NoiseModel> {
    (1..=max_qubits)
        .prop_flat_map(move |k| {
            let pool = (1usize << (2 * k)) - 1;
            (
                Just(k),
                prop::collection::btree_set(1..=pool, 1..=max_terms.min(pool)),
                prop::collection::vec(prop_oneof![Just(0.0), 1e-4..0.3f64], max_terms),
            )
        })
        .prop_map(|(k, idx, rates)| {
            let all: Vec<PauliString> = PauliString::all(k).collect();
            let gens: Vec<PauliString> = idx.iter().map(|&i| all[i].clone()).collect();
            let lambdas = rates[..gens.len()].to_vec();
            NoiseModel::new(GeneratorSet::new((0..k).collect(), gens).unwrap(), lambdas).unwrap()
        })
}

fn identity_distance(m: &nalgebra::DMatrix<f64>) -> f64 {
    (m - nalgebra::DMatrix::<f64>::identity(m.nrows(), m.ncols())).abs().max()
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x6e6f_6973),
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn predicted_fidelity_is_ptm_diagonal(m in model(3, 8)) {
        let k = m.qubits().len();
        let r = ptm_of(k, |op| m.apply_channel_dense(op)).unwrap();
        for q in PauliString::all(k) {
            let predicted = m.predict_fidelity(&q).unwrap();
            prop_assert!((r.entry(&q, &q).unwrap() - predicted).abs() < 1e-10, "{q}");
        }
        prop_assert!(r.max_off_diagonal() < 1e-12);
    }

    #[test]
    fn gamma_is_at_least_one(m in model(3, 10)) {
        let g = m.gamma();
        let total: f64 = m.lambdas().iter().sum();
        prop_assert!(g >= 1.0);
        prop_assert_eq!(g == 1.0, total == 0.0);
        prop_assert!((g - (2.0 * total).exp()).abs() < 1e-12 * g);
        for w in m.weights() {
            prop_assert!(w > 0.5 && w <= 1.0);
        }
    }

    #[test]
    fn inverse_branches_cancel_the_channel(m in model(3, 10)) {
        let k = m.qubits().len();
        let terms = m.inverse_terms();
        let quasi = |rho: &CMatrix| -> CMatrix {
            terms
                .iter()
                .fold(CMatrix::zeros(rho.nrows(), rho.ncols()), |acc, (p, c)| {
                    acc + conjugate_pauli(rho, p) * num_complex::Complex64::new(*c, 0.0)
                })
        };
        let inv_then_noise = ptm_of(k, |op| m.apply_channel_dense(&quasi(op))).unwrap();
        let noise_then_inv = ptm_of(k, |op| Ok(quasi(&m.apply_channel_dense(op)?))).unwrap();
        prop_assert!(identity_distance(inv_then_noise.data()) < 1e-10);
        prop_assert!(identity_distance(noise_then_inv.data()) < 1e-10);
        // merged branches can partially cancel, so γ only bounds the 1-norm
        let l1: f64 = terms.iter().map(|(_, c)| c.abs()).sum();
        prop_assert!(l1 <= m.gamma() * (1.0 + 1e-12));
        let total: f64 = terms.iter().map(|(_, c)| c).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn m_is_symmetric_for_equal_sets(
        (k, idx) in (1usize..=3).prop_flat_map(|k| (Just(k), prop::collection::btree_set(1..(1usize << (2 * k)), 1..=12)))
    ) {
        let all: Vec<PauliString> = PauliString::all(k).collect();
        let set: Vec<PauliString> = idx.iter().map(|&i| all[i].clone()).collect();
        let qubits: Vec<usize> = (0..k).collect();
        let m = build_m(
            &FidelityBasisSet::new(qubits.clone(), set.clone()).unwrap(),
            &GeneratorSet::new(qubits, set).unwrap(),
        )
        .unwrap();
        for (i, row) in m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                prop_assert_eq!(v, m[j][i]);
            }
        }
    }

    #[test]
    fn sampled_inverse_matches_exact_terms(m in model(2, 6), seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 4000;
        let mut freq = std::collections::BTreeMap::new();
        for _ in 0..n {
            let (p, s) = m.sample_inverse(&mut rng);
            *freq.entry(p).or_insert(0.0) += s as f64 * m.gamma() / n as f64;
        }
        for (p, c) in m.inverse_terms() {
            let got = freq.get(&p).copied().unwrap_or(0.0);
            // each sample contributes ±γ/n
            let tol = 6.0 * m.gamma() / (n as f64).sqrt();
            prop_assert!((got - c).abs() < tol, "{p}: {got} vs {c}");
        }
    }
}
