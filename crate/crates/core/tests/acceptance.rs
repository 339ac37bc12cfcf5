//! Acceptance gate: every criterion prints one PASS/FAIL line and the
//! binary exits non-zero if any fails.

use std::f64::consts::FRAC_PI_2;
use std::time::{Duration, Instant};

use heralded_spin::analysis::{
    analytic_report, bin_by_atoms, bootstrap_variance, decorrelate, estimator_mse, local_normalize,
    noise_scaling_fit,
};
use heralded_spin::config::Config;
use heralded_spin::dicke::{closed_form_variance, jz_variance, rotated_dicke_distribution, CollectiveSpinSpec};
use heralded_spin::efficiency::{eta_phase, total_efficiency, EfficiencyChain};
use heralded_spin::herald::{
    click_posterior, multi_excitation_inflation, posterior_bruteforce, purity, two_excitation_ratio, HeraldParams,
    PurityBudget, DEFAULT_K_MAX, DEFAULT_N_MAX,
};
use heralded_spin::pipeline::{analyze, QUOTED_CHAIN};
use heralded_spin::sim::{simulate_run, AtomNumberModel, DriftModel, NoiseCoefficients, SimConfig, REFERENCES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn reference_params() -> HeraldParams {
    let config = Config::bundled();
    config.herald.params().unwrap()
}

fn click_posterior_criterion() -> Outcome {
    let start = Instant::now();
    let post = click_posterior(&reference_params(), DEFAULT_N_MAX).unwrap();
    let targets = [(0, 0.606), (1, 0.385), (2, 0.009)];
    let within = targets.iter().all(|&(n, want)| (post.get(n) - want).abs() <= 0.02);

    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p0 = rng.random_range(1e-4..0.3);
        let params = HeraldParams::new(
            p0,
            rng.random_range(0.0..1.0) * p0,
            rng.random_range(0.01..=1.0),
            rng.random_range(0.0..0.05),
        )
        .unwrap();
        let closed = click_posterior(&params, DEFAULT_N_MAX).unwrap();
        let brute = posterior_bruteforce(&params, DEFAULT_N_MAX, DEFAULT_K_MAX).unwrap();
        for (a, b) in closed.probabilities.iter().zip(&brute.probabilities) {
            worst = worst.max((a - b).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        within && worst <= 1e-10 && elapsed < Duration::from_secs(1),
        format!(
            "p(0,1,2|1click) = {:.4}, {:.4}, {:.4}; sweep max |closed - enumeration| = {worst:.1e}; {:.0} ms",
            post.get(0),
            post.get(1),
            post.get(2),
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

fn purity_criterion() -> Outcome {
    let p = purity(&PurityBudget::from_fractions(6.7e-3, 0.13, 0.38, 0.11)).unwrap();
    outcome((p - 0.38).abs() <= 1e-12, format!("p_state = {p}"))
}

fn efficiency_chain_criterion() -> Outcome {
    let eta = total_efficiency(&QUOTED_CHAIN);
    outcome(
        (eta - 0.266).abs() < 5e-4 && (eta - 0.27).abs() <= 0.01,
        format!("eta_Q = {eta:.4} ({:.0} %)", eta * 100.0),
    )
}

fn phase_efficiency_criterion() -> Outcome {
    let eta = eta_phase(42f64.to_radians());
    let from_lines = Config::bundled().efficiency.report().unwrap();
    outcome(
        (eta - 0.956).abs() <= 1e-3 && (from_lines.eta_phase - 0.956).abs() <= 1e-3,
        format!(
            "sinc^2(21 deg) = {eta:.5}; line table gives chi = {:.3} deg, eta_phase = {:.5}",
            from_lines.chi_exct_deg, from_lines.eta_phase
        ),
    )
}

fn dicke_criterion() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut hp_ok = true;
    for n_atoms in [2u64, 10, 100, 1000] {
        for excitation in [0u64, 1] {
            let spec = CollectiveSpinSpec::new(n_atoms, excitation).unwrap();
            let var = jz_variance(&rotated_dicke_distribution(spec, FRAC_PI_2).unwrap());
            let want = if excitation == 0 { n_atoms as f64 } else { 3.0 * n_atoms as f64 - 2.0 };
            assert_eq!(want, closed_form_variance(n_atoms, excitation));
            worst = worst.max((var - want).abs());
            let gap = (var / n_atoms as f64 - (2 * excitation + 1) as f64).abs();
            hp_ok &= gap <= 2.0 * excitation as f64 / n_atoms as f64 + 1e-12;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && hp_ok && elapsed < Duration::from_secs(10),
        format!(
            "max |var - closed form| = {worst:.1e}; HP bound {}; {:.0} ms",
            if hp_ok { "holds" } else { "violated" },
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

fn end_to_end_criterion() -> Outcome {
    let config = Config::bundled();
    let efficiency = config.efficiency.report().unwrap();
    let sim = config.sim_config(efficiency.chain()).unwrap();
    let dataset = simulate_run(&sim).unwrap();
    let report = analyze(&dataset, &config.analysis).unwrap();
    let noclick = report.var_noclick;
    let click = report.var_click;
    let ok = sim.shots >= 100_000
        && (noclick.w - 1.0).abs() <= 0.02
        && (click.w - 1.20).abs() <= 2.0 * click.uncertainty;
    outcome(
        ok,
        format!(
            "{} shots: var(Z no click) = {:.4} +/- {:.4}, var(Z click) = {:.3} +/- {:.3} (L = {}); sum w^2 = {:.3}",
            sim.shots, noclick.w, noclick.uncertainty, click.w, click.uncertainty, click.sample_count, report.sum_sq
        ),
    )
}

fn estimator_calibration_criterion() -> Outcome {
    // 1000 series normalised with M = 200; every 12th Z forms a sparse set
    let window = 200;
    let sets = 1000;
    let estimates: Vec<(f64, usize)> = (0..sets)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            rng.set_stream(k as u64);
            let phi: Vec<f64> = (0..8000).map(|_| rng.sample(StandardNormal)).collect();
            let series = local_normalize(&phi, window).unwrap();
            let picked: Vec<f64> = series.z_values.iter().step_by(12).copied().collect();
            (analytic_report(&picked).unwrap().w, picked.len())
        })
        .collect();
    let len = estimates[0].1;
    let ws: Vec<f64> = estimates.iter().map(|e| e.0).collect();
    let mean = ws.iter().sum::<f64>() / ws.len() as f64;
    let spread = (ws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (ws.len() as f64 - 1.0)).sqrt();
    let predicted = estimator_mse(len).unwrap() * mean;
    let spread_ok = (spread / predicted - 1.0).abs() <= 0.10;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let iid: Vec<f64> = (0..1000).map(|_| rng.sample(StandardNormal)).collect();
    let boot = bootstrap_variance(&iid, 2000, 9).unwrap();
    let analytic = analytic_report(&iid).unwrap();
    let boot_ratio = boot.uncertainty / analytic.uncertainty;
    outcome(
        spread_ok && (boot_ratio - 1.0).abs() <= 0.15,
        format!(
            "L = {len}: empirical spread {spread:.4} vs sqrt(2/(L-1)) W = {predicted:.4}; bootstrap/analytic dW = {boot_ratio:.3}"
        ),
    )
}

fn scaling_fit_criterion() -> Outcome {
    let truth = NoiseCoefficients {
        c_const: 1e4,
        c_lin: 1.0,
        c_quad: 1e-7,
    };
    let levels: Vec<f64> = (2..=9).map(|k| 10f64.powi(k)).collect();
    let mean = 1e5;
    let sim = SimConfig {
        shots: 100_000,
        atoms: AtomNumberModel {
            mean,
            spread: 0.0,
            reuse_pattern: levels.iter().map(|n| n / mean).collect(),
        },
        noise: truth,
        drift: DriftModel::default(),
        p_click: 0.0,
        p_state: 0.0,
        eta_chain: EfficiencyChain::ideal(),
        seed: 88,
    };
    let dataset = simulate_run(&sim).unwrap();
    let bins = bin_by_atoms(&dataset.phi_raw(), &dataset.n_atoms(), levels.len()).unwrap();
    let fit = noise_scaling_fit(&bins).unwrap();
    let c = fit.coefficients;
    let rel = [
        c.c_const / truth.c_const - 1.0,
        c.c_lin / truth.c_lin - 1.0,
        c.c_quad / truth.c_quad - 1.0,
    ];
    outcome(
        bins.len() >= 4 && rel.iter().all(|r| r.abs() <= 0.05),
        format!(
            "{} bins: c_const {:.4e}, c_lin {:.4}, c_quad {:.4e} (relative errors {:+.3}, {:+.3}, {:+.3})",
            bins.len(),
            c.c_const,
            c.c_lin,
            c.c_quad,
            rel[0],
            rel[1],
            rel[2]
        ),
    )
}

fn decorrelation_criterion() -> Outcome {
    let base = SimConfig {
        shots: 100_000,
        atoms: AtomNumberModel {
            mean: 1.0,
            spread: 0.0,
            reuse_pattern: vec![1.0],
        },
        noise: NoiseCoefficients {
            c_const: 1.0,
            c_lin: 0.0,
            c_quad: 0.0,
        },
        drift: DriftModel {
            log_variance_step: 0.0,
            common_mode: 2.0,
            common_mode_walk: 0.0,
        },
        p_click: 0.0,
        p_state: 0.0,
        eta_chain: EfficiencyChain::ideal(),
        seed: 99,
    };
    // V_s = V_n = 1, V_c = 4
    let (vs, vn, vc) = (1.0, 1.0, 4.0);
    let optimum = vs + vn * vc / (vn + REFERENCES as f64 * vc);
    let common = decorrelate(&simulate_run(&base).unwrap()).unwrap();
    let reduction_ok = (common.variance_after / optimum - 1.0).abs() <= 0.02;

    let independent = SimConfig {
        drift: DriftModel::default(),
        seed: 100,
        ..base
    };
    let null = decorrelate(&simulate_run(&independent).unwrap()).unwrap();
    let worst_z = null
        .weights
        .weights
        .iter()
        .zip(&null.weights.standard_errors)
        .map(|(w, se)| (w / se).abs())
        .fold(0.0, f64::max);
    outcome(
        reduction_ok && worst_z < 3.0,
        format!(
            "variance {:.4} -> {:.4}, optimum {optimum:.4}; independent references max |w/SE| = {worst_z:.2}",
            common.variance_before, common.variance_after
        ),
    )
}

fn multi_excitation_criterion() -> Outcome {
    let post = click_posterior(&reference_params(), DEFAULT_N_MAX).unwrap();
    let inflation = multi_excitation_inflation(&post, 1.0);
    let ratio = two_excitation_ratio(&post);
    outcome(
        (inflation - 0.02).abs() <= 0.005 && ratio <= 0.17,
        format!("inflation {inflation:.4}; p(2) / coherent p(2) = {ratio:.4}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("click posterior", click_posterior_criterion),
        ("state purity", purity_criterion),
        ("efficiency chain", efficiency_chain_criterion),
        ("phase efficiency", phase_efficiency_criterion),
        ("exact Dicke variances", dicke_criterion),
        ("end-to-end variances", end_to_end_criterion),
        ("estimator calibration", estimator_calibration_criterion),
        ("noise-scaling fit", scaling_fit_criterion),
        ("decorrelation", decorrelation_criterion),
        ("multi-excitation correction", multi_excitation_criterion),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let result = run();
        if !result.passed {
            failures += 1;
        }
        println!(
            "[{}] {:>2} {name}: {}",
            if result.passed { "PASS" } else { "FAIL" },
            k + 1,
            result.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
