//! Side-by-side checks of closed forms against brute force.

use std::f64::consts::FRAC_PI_2;

use anyhow::{ensure, Result};
use heralded_spin::dicke::{closed_form_variance, jz_variance, rotated_dicke_distribution_with_cap, CollectiveSpinSpec};
use heralded_spin::herald::{
    click_posterior, posterior_bruteforce, thinned_thermal_click_pmf, thinned_thermal_click_pmf_enumerated,
    HeraldParams,
};

pub fn posterior(params: &HeraldParams, n_max: usize, k_max: usize) -> Result<f64> {
    let closed = click_posterior(params, n_max)?;
    let brute = posterior_bruteforce(params, n_max, k_max)?;
    println!("{:>3}  {:>18}  {:>18}  {:>10}", "n", "closed", "enumerated", "|diff|");
    let mut worst: f64 = 0.0;
    for (n, (a, b)) in closed.probabilities.iter().zip(&brute.probabilities).enumerate() {
        let d = (a - b).abs();
        worst = worst.max(d);
        println!("{n:>3}  {a:>18.12}  {b:>18.12}  {d:>10.2e}");
    }
    println!("p(1click): {:.12} vs {:.12}", closed.p_one_click, brute.p_one_click);
    println!("max deviation: {worst:.3e}");
    Ok(worst)
}

pub fn dicke(sizes: &[u64], excitation: u64, cap: u64) -> Result<f64> {
    println!("{:>6}  {:>3}  {:>20}  {:>20}  {:>10}", "N", "n", "exact", "closed form", "|diff|");
    let mut worst: f64 = 0.0;
    for &n_atoms in sizes {
        ensure!(excitation <= n_atoms, "excitation {excitation} exceeds {n_atoms} atoms");
        let spec = CollectiveSpinSpec::new(n_atoms, excitation)?;
        let exact = jz_variance(&rotated_dicke_distribution_with_cap(spec, FRAC_PI_2, cap)?);
        let closed = closed_form_variance(n_atoms, excitation);
        let d = (exact - closed).abs();
        worst = worst.max(d);
        println!("{n_atoms:>6}  {excitation:>3}  {exact:>20.10}  {closed:>20.10}  {d:>10.2e}");
    }
    println!("max deviation: {worst:.3e}");
    Ok(worst)
}

pub fn thinned(p2: f64, pd: f64, max_clicks: usize, k_max: usize) -> Result<f64> {
    ensure!((0.0..1.0).contains(&p2), "p2 must lie in [0, 1)");
    ensure!((0.0..=1.0).contains(&pd), "pd must lie in [0, 1]");
    println!("{:>3}  {:>18}  {:>18}  {:>10}", "k", "closed", "enumerated", "|diff|");
    let mut worst: f64 = 0.0;
    for k in 0..=max_clicks {
        let a = thinned_thermal_click_pmf(p2, pd, k);
        let b = thinned_thermal_click_pmf_enumerated(p2, pd, k, k_max);
        let d = (a - b).abs();
        worst = worst.max(d);
        println!("{k:>3}  {a:>18.12}  {b:>18.12}  {d:>10.2e}");
    }
    println!("max deviation: {worst:.3e}");
    Ok(worst)
}
