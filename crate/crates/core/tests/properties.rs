use std::f64::consts::FRAC_PI_2;

use heralded_spin::analysis::decorrelate;
use heralded_spin::dataset_io::to_csv_bytes;
use heralded_spin::dicke::{rotated_dicke_distribution, CollectiveSpinSpec};
use heralded_spin::efficiency::EfficiencyChain;
use heralded_spin::herald::{
    click_posterior, posterior_bruteforce, thermal_pmf, thinned_thermal_click_pmf, HeraldParams,
};
use heralded_spin::sim::{simulate_run, AtomNumberModel, DriftModel, NoiseCoefficients, SimConfig};
use proptest::prelude::*;

fn sim_config(seed: u64, shots: usize, common: f64, walk: f64, step: f64) -> SimConfig {
    SimConfig {
        shots,
        atoms: AtomNumberModel {
            mean: 1e5,
            spread: 0.1,
            reuse_pattern: vec![1.2, 1.0, 0.8],
        },
        noise: NoiseCoefficients {
            c_const: 2e4,
            c_lin: 1.0,
            c_quad: 1e-6,
        },
        drift: DriftModel {
            log_variance_step: step,
            common_mode: common,
            common_mode_walk: walk,
        },
        p_click: 0.05,
        p_state: 0.5,
        eta_chain: EfficiencyChain {
            eta_noise: 0.5,
            eta_mm: 0.8,
            eta_phase: 0.95,
            eta_ac_stark: 0.97,
            eta_scatter: 0.8,
        },
        seed,
    }
}

fn herald_params() -> impl Strategy<Value = HeraldParams> {
    (1e-4f64..0.5, 0.0f64..1.0, 0.01f64..=1.0, 0.0f64..0.1)
        .prop_map(|(p0, ratio, pd, pf)| HeraldParams::new(p0, ratio * p0, pd, pf).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn thermal_pmf_normalised(p0 in 0.0f64..0.9) {
        let total: f64 = (0..2000).map(|n| thermal_pmf(p0, n).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn thinned_pmf_normalised(p2 in 0.0f64..0.9, pd in 0.0f64..=1.0) {
        let total: f64 = (0..4000).map(|n| thinned_thermal_click_pmf(p2, pd, n)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn posterior_normalised(params in herald_params()) {
        let post = click_posterior(&params, 8).unwrap();
        let total: f64 = post.probabilities.iter().sum::<f64>() + post.truncation_mass;
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(post.probabilities.iter().all(|p| *p >= 0.0));
    }

    #[test]
    fn posterior_matches_enumeration(params in herald_params()) {
        let closed = click_posterior(&params, 8).unwrap();
        let brute = posterior_bruteforce(&params, 8, 500).unwrap();
        for (a, b) in closed.probabilities.iter().zip(&brute.probabilities) {
            prop_assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        prop_assert!((closed.p_one_click - brute.p_one_click).abs() < 1e-12);
    }

    #[test]
    fn rotated_distribution_is_symmetric(n_atoms in 1u64..300, frac in 0.0f64..=1.0) {
        let excitation = ((n_atoms as f64) * frac).round() as u64;
        let spec = CollectiveSpinSpec::new(n_atoms, excitation).unwrap();
        let dist = rotated_dicke_distribution(spec, FRAC_PI_2).unwrap();
        prop_assert!((dist.total() - 1.0).abs() < 1e-10);
        for (m, p) in dist.support.iter().zip(&dist.probabilities) {
            prop_assert!((p - dist.probability_of(-m)).abs() < 1e-10, "P({m}) = {p}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn least_squares_weights_are_optimal(
        seed in any::<u64>(),
        common in 0.0f64..2000.0,
        walk in 0.0f64..300.0,
        direction in proptest::collection::vec(-1.0f64..1.0, 12),
    ) {
        let dataset = simulate_run(&sim_config(seed, 3000, common, walk, 0.0)).unwrap();
        let out = decorrelate(&dataset).unwrap();
        prop_assert!(out.variance_after <= out.variance_before * (1.0 + 1e-12));

        // any other weight vector does at least as badly
        let perturbed: Vec<f64> = out.weights.weights.iter().zip(&direction).map(|(w, d)| w + 0.01 * d).collect();
        let phi: Vec<f64> = dataset
            .records
            .iter()
            .map(|r| r.phi_raw - r.references.iter().zip(&perturbed).map(|(x, w)| x * w).sum::<f64>())
            .collect();
        let n = phi.len() as f64;
        let mean = phi.iter().sum::<f64>() / n;
        let var = phi.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        prop_assert!(var >= out.variance_after * (1.0 - 1e-12));
    }

    #[test]
    fn simulation_is_bit_exact(seed in any::<u64>(), shots in 0usize..400) {
        let config = sim_config(seed, shots, 500.0, 50.0, 0.01);
        let first = to_csv_bytes(&simulate_run(&config).unwrap());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool.install(|| to_csv_bytes(&simulate_run(&config).unwrap()));
        prop_assert_eq!(&first, &single);
        prop_assert_eq!(first, to_csv_bytes(&simulate_run(&config).unwrap()));
    }
}

#[test]
fn prefix_of_a_run_is_a_shorter_run() {
    let long = simulate_run(&sim_config(5, 500, 100.0, 10.0, 0.01)).unwrap();
    let short = simulate_run(&sim_config(5, 200, 100.0, 10.0, 0.01)).unwrap();
    assert_eq!(&long.records[..200], &short.records[..]);
}
