//! Photon-counting statistics of the heralding channel.
//!
//! Desired Stokes photons and photons from the unfilterable `m_F = ±2`
//! channel are thermally distributed; dark counts and excitation-pulse
//! leakage are Poissonian. Every photon in the detection mode clicks the
//! (effectively number-resolving) detector independently with probability
//! `pd`. A herald is exactly one click.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_N_MAX: usize = 8;
pub const DEFAULT_K_MAX: usize = 500;
pub const DEFAULT_P2_RATIO: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeraldParams {
    /// Probability to scatter at least one desired Stokes photon into the
    /// detection mode.
    pub p0: f64,
    /// Same for the unfilterable `|F=3, m_F=±2⟩` decay channel.
    pub p2: f64,
    /// Click probability per photon in the detection mode.
    pub pd: f64,
    /// Mean number of false-positive counts (dark counts and leakage).
    pub pf: f64,
}

impl HeraldParams {
    pub fn new(p0: f64, p2: f64, pd: f64, pf: f64) -> Result<Self> {
        let params = Self { p0, p2, pd, pf };
        params.validate()?;
        Ok(params)
    }

    /// Parameters with `p2 = ratio · p0` and `pf = pf_dark + pf_exct`.
    pub fn from_ratio(p0: f64, p2_ratio: f64, pd: f64, pf_dark: f64, pf_exct: f64) -> Result<Self> {
        if !(p2_ratio >= 0.0) {
            return Err(Error::invalid("herald.p2_ratio", "must be non-negative"));
        }
        if !(pf_dark >= 0.0) {
            return Err(Error::invalid("herald.pf_dark", "must be non-negative"));
        }
        if !(pf_exct >= 0.0) {
            return Err(Error::invalid("herald.pf_exct", "must be non-negative"));
        }
        Self::new(p0, p2_ratio * p0, pd, pf_dark + pf_exct)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p0) {
            return Err(Error::invalid("herald.p0", format!("{} is outside [0, 1)", self.p0)));
        }
        if !(0.0..1.0).contains(&self.p2) {
            return Err(Error::invalid("herald.p2", format!("{} is outside [0, 1)", self.p2)));
        }
        if !(self.pd > 0.0 && self.pd <= 1.0) {
            return Err(Error::invalid("herald.pd", format!("{} is outside (0, 1]", self.pd)));
        }
        if !(0.0..1.0).contains(&self.pf) {
            return Err(Error::invalid("herald.pf", format!("{} is outside [0, 1)", self.pf)));
        }
        Ok(())
    }

    /// `p̃d = 1 - pd`.
    pub fn miss(&self) -> f64 {
        1.0 - self.pd
    }

    /// Probability of no false-positive click, `p_F(0)`.
    pub fn no_false_click(&self) -> f64 {
        poisson_pmf(self.pf, 0) * thinned_thermal_click_pmf(self.p2, self.pd, 0)
    }

    /// Probability of exactly one false-positive click, `p_F(1)`.
    pub fn one_false_click(&self) -> f64 {
        poisson_pmf(self.pf, 1) * thinned_thermal_click_pmf(self.p2, self.pd, 0)
            + poisson_pmf(self.pf, 0) * thinned_thermal_click_pmf(self.p2, self.pd, 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickPosterior {
    /// `p(n | 1click)` for `n = 0..=n_max`.
    pub probabilities: Vec<f64>,
    /// Posterior mass above `n_max`.
    pub truncation_mass: f64,
    /// Normalising probability `p(1click)`.
    pub p_one_click: f64,
}

impl ClickPosterior {
    pub fn n_max(&self) -> usize {
        self.probabilities.len() - 1
    }

    pub fn get(&self, n: usize) -> f64 {
        self.probabilities.get(n).copied().unwrap_or(0.0)
    }

    pub fn as_map(&self) -> BTreeMap<usize, f64> {
        self.probabilities.iter().copied().enumerate().collect()
    }

    /// `Σ n p(n | 1click)` over the tabulated entries.
    pub fn mean(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// `p(n > 1 | 1click)`, including the truncated tail.
    pub fn multi_excitation_probability(&self) -> f64 {
        self.probabilities.iter().skip(2).sum::<f64>() + self.truncation_mass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurityBudget {
    pub p_click: f64,
    pub p_dark: f64,
    pub p_exct: f64,
    pub p_decay: f64,
}

impl PurityBudget {
    /// Budget with every error term given as a fraction of `p_click`.
    pub fn from_fractions(p_click: f64, dark: f64, exct: f64, decay: f64) -> Self {
        Self {
            p_click,
            p_dark: dark * p_click,
            p_exct: exct * p_click,
            p_decay: decay * p_click,
        }
    }
}

/// Thermal (geometric) photon-number distribution `(1 - p0) p0^n`.
pub fn thermal_pmf(p0: f64, n: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&p0) {
        return Err(Error::invalid("p0", format!("{p0} is outside [0, 1)")));
    }
    Ok((1.0 - p0) * p0.powi(n as i32))
}

pub fn poisson_pmf(mean: f64, n: usize) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    (n as f64 * mean.ln() - mean - ln_fact).exp()
}

/// Clicks from a thermal source after independent per-photon thinning:
/// `(1 - p2) (p2 pd)^n / (1 - p2 (1 - pd))^(n + 1)`.
pub fn thinned_thermal_click_pmf(p2: f64, pd: f64, n: usize) -> f64 {
    let denom = 1.0 - p2 * (1.0 - pd);
    // as a single ratio so numerator and denominator cannot underflow apart
    (1.0 - p2) / denom * (p2 * pd / denom).powi(n as i32)
}

/// The same distribution by explicit enumeration over photon numbers up to
/// `k_max`, each thinned binomially.
pub fn thinned_thermal_click_pmf_enumerated(p2: f64, pd: f64, clicks: usize, k_max: usize) -> f64 {
    let ln_choose = |k: usize, c: usize| -> f64 {
        (1..=c).map(|i| ((k - c + i) as f64 / i as f64).ln()).sum()
    };
    (clicks..=k_max)
        .map(|photons| {
            let prior = (1.0 - p2) * p2.powi(photons as i32);
            if prior == 0.0 {
                return if photons == 0 && clicks == 0 { 1.0 - p2 } else { 0.0 };
            }
            let miss = (1.0 - pd).powi((photons - clicks) as i32);
            prior * ln_choose(photons, clicks).exp() * pd.powi(clicks as i32) * miss
        })
        .sum()
}

/// Probability of exactly one click given `n` desired Stokes photons.
pub fn p_one_click_given_n(params: &HeraldParams, n: usize) -> f64 {
    let miss = params.miss();
    let from_photon = if n == 0 {
        0.0
    } else {
        n as f64 * params.pd * miss.powi(n as i32 - 1) * params.no_false_click()
    };
    from_photon + miss.powi(n as i32) * params.one_false_click()
}

/// Closed-form posterior `p(n | 1click)` for `n = 0..=n_max`.
///
/// With `x = p̃d p0`, `A = pf + pd p2 / (1 - p̃d p2)` and
/// `D = A + pd p0 / (1 - x)`, the posterior is
/// `x^n (1 - x) (n pd / p̃d + A) / D`. The tail beyond `n_max` is summed
/// analytically from the same geometric series.
pub fn click_posterior(params: &HeraldParams, n_max: usize) -> Result<ClickPosterior> {
    params.validate()?;
    if n_max < 2 {
        return Err(Error::invalid("herald.n_max", "must be at least 2"));
    }
    let HeraldParams { p0, p2, pd, pf } = *params;
    let miss = 1.0 - pd;
    let x = miss * p0;
    let a = pf + pd * p2 / (1.0 - miss * p2);
    let denom = a + pd * p0 / (1.0 - x);
    if denom <= 0.0 {
        return Err(Error::ZeroClickProbability);
    }

    // n pd / p̃d · x^n = n pd p0 (p̃d p0)^(n-1); written without dividing by p̃d
    let term = |n: usize| -> f64 {
        let photon = if n == 0 {
            0.0
        } else {
            n as f64 * pd * p0 * x.powi(n as i32 - 1)
        };
        (1.0 - x) * (photon + a * x.powi(n as i32)) / denom
    };
    let probabilities: Vec<f64> = (0..=n_max).map(term).collect();

    // Σ_{n>K} x^n = x^(K+1)/(1-x),  Σ_{n>K} n x^(n-1) = x^K ((K+1) - K x)/(1-x)²
    let k = n_max as i32;
    let geometric_tail = x.powi(k + 1) / (1.0 - x);
    let derivative_tail = x.powi(k) * ((k + 1) as f64 - k as f64 * x) / (1.0 - x).powi(2);
    let truncation_mass = (1.0 - x) * (pd * p0 * derivative_tail + a * geometric_tail) / denom;

    let p_one_click = (1.0 - p0) * params.no_false_click() / (1.0 - x) * denom;
    Ok(ClickPosterior {
        probabilities,
        truncation_mass,
        p_one_click,
    })
}

/// Independent route to `p(n | 1click)`.
///
/// Click-count distributions of each source are built by enumerating photon
/// numbers up to `k_max` with explicit binomial thinning, then every
/// (desired, unwanted, false) click split summing to exactly one is
/// enumerated. The normaliser is summed over `n = 0..=k_max`; the reported
/// truncation mass is the posterior weight above `n_max` plus an analytic
/// bound on the photon-number tails that were never enumerated.
pub fn posterior_bruteforce(params: &HeraldParams, n_max: usize, k_max: usize) -> Result<ClickPosterior> {
    params.validate()?;
    if k_max < n_max {
        return Err(Error::invalid("herald.k_max", "must be at least n_max"));
    }
    let HeraldParams { p0, p2, pd, pf } = *params;

    // P(c clicks) from the unwanted thermal channel, c = 0, 1
    let mut unwanted = [0.0f64; 2];
    let binom_row = BinomialRow::new(pd);
    for photons in 0..=k_max {
        let weight = (1.0 - p2) * p2.powi(photons as i32);
        if weight == 0.0 && photons > 0 {
            break;
        }
        for (c, slot) in unwanted.iter_mut().enumerate() {
            *slot += weight * binom_row.pmf(photons, c);
        }
    }
    let false_counts = [poisson_pmf(pf, 0), poisson_pmf(pf, 1)];

    let joint: Vec<f64> = (0..=k_max)
        .map(|n| {
            let prior = (1.0 - p0) * p0.powi(n as i32);
            if prior == 0.0 {
                return 0.0;
            }
            let mut one_click = 0.0;
            for desired in 0..=1usize {
                for unwanted_clicks in 0..=1usize {
                    for false_clicks in 0..=1usize {
                        if desired + unwanted_clicks + false_clicks != 1 {
                            continue;
                        }
                        one_click += binom_row.pmf(n, desired)
                            * unwanted[unwanted_clicks]
                            * false_counts[false_clicks];
                    }
                }
            }
            prior * one_click
        })
        .collect();

    let p_one_click: f64 = joint.iter().sum();
    if p_one_click <= 0.0 {
        return Err(Error::ZeroClickProbability);
    }
    let probabilities: Vec<f64> = joint[..=n_max].iter().map(|j| j / p_one_click).collect();
    let enumerated_tail: f64 = joint[n_max + 1..].iter().sum::<f64>() / p_one_click;
    let unenumerated = (p0.powi(k_max as i32 + 1) + p2.powi(k_max as i32 + 1)) / p_one_click;
    Ok(ClickPosterior {
        probabilities,
        truncation_mass: enumerated_tail + unenumerated,
        p_one_click,
    })
}

/// Binomial `C(k, c) pd^c (1-pd)^(k-c)` for `c ∈ {0, 1}` without factorials.
struct BinomialRow {
    pd: f64,
}

impl BinomialRow {
    fn new(pd: f64) -> Self {
        Self { pd }
    }

    fn pmf(&self, trials: usize, successes: usize) -> f64 {
        let miss = 1.0 - self.pd;
        match successes {
            0 => miss.powi(trials as i32),
            1 if trials >= 1 => trials as f64 * self.pd * miss.powi(trials as i32 - 1),
            _ => 0.0,
        }
    }
}

/// State purity `1 - (p_dark + p_decay + p_exct) / p_click`.
pub fn purity(budget: &PurityBudget) -> Result<f64> {
    if !(budget.p_click > 0.0) {
        return Err(Error::invalid("herald.p_click", "must be positive"));
    }
    let errors = budget.p_dark + budget.p_decay + budget.p_exct;
    if [budget.p_dark, budget.p_exct, budget.p_decay]
        .iter()
        .any(|p| !(*p >= 0.0))
    {
        return Err(Error::invalid("herald.budget", "error terms must be non-negative"));
    }
    if errors > budget.p_click * (1.0 + 1e-12) {
        return Err(Error::invalid(
            "herald.budget",
            format!("error terms {errors} exceed p_click {}", budget.p_click),
        ));
    }
    Ok(1.0 - errors / budget.p_click)
}

/// Fractional increase of `1 + 2 η Σ n p_n` from keeping the `n ≥ 2` tail,
/// relative to the posterior restricted to `{0, 1}` and renormalised.
pub fn multi_excitation_inflation(post: &ClickPosterior, eta: f64) -> f64 {
    let full = 1.0 + 2.0 * eta * (post.mean() + tail_mean_bound(post));
    let p0 = post.get(0);
    let p1 = post.get(1);
    let truncated_mean = if p0 + p1 > 0.0 { p1 / (p0 + p1) } else { 0.0 };
    let truncated = 1.0 + 2.0 * eta * truncated_mean;
    full / truncated - 1.0
}

// The truncated tail sits above n_max; count it at n_max + 1.
fn tail_mean_bound(post: &ClickPosterior) -> f64 {
    post.truncation_mass * (post.n_max() + 1) as f64
}

/// Two-excitation weight relative to a coherent (Poissonian) state with the
/// same mean excitation number.
pub fn two_excitation_ratio(post: &ClickPosterior) -> f64 {
    let mean = post.mean();
    let coherent = poisson_pmf(mean, 2);
    if coherent == 0.0 {
        return 0.0;
    }
    post.get(2) / coherent
}
