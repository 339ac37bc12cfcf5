//! Sample variance of a selection of `Zᵢ` and its uncertainty.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::normalize::NormalizedSeries;
use crate::error::{Error, Result};

pub const MIN_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Click,
    NoClick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub w: f64,
    pub uncertainty: f64,
    pub sample_count: usize,
    pub method: Method,
}

/// Relative mean-square error `√(2/(count−1))` of a sample variance.
pub fn estimator_mse(count: usize) -> Result<f64> {
    if count < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: count });
    }
    Ok((2.0 / (count as f64 - 1.0)).sqrt())
}

/// Inflation `1 + ½/(M+1)` of `var(Zᵢ)` from the finite window.
pub fn zi_variance_correction(window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::invalid("analysis.window", "must be positive"));
    }
    Ok(1.0 + 0.25 * 2.0 / (window as f64 + 1.0))
}

pub fn sample_variance(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok(values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

/// `W_L` with the analytic uncertainty `√(2/(L−1)) W_L`.
pub fn analytic_report(values: &[f64]) -> Result<VarianceReport> {
    let w = sample_variance(values)?;
    Ok(VarianceReport {
        w,
        uncertainty: estimator_mse(values.len())? * w,
        sample_count: values.len(),
        method: Method::Analytic,
    })
}

/// `Z` values whose record falls in `selection`; `clicks` is indexed like
/// the series that was normalised.
pub fn select(series: &NormalizedSeries, clicks: &[bool], selection: Selection) -> Vec<f64> {
    let want = selection == Selection::Click;
    series
        .indices
        .iter()
        .zip(&series.z_values)
        .filter(|(i, _)| clicks[**i] == want)
        .map(|(_, z)| *z)
        .collect()
}

pub fn variance_report(series: &NormalizedSeries, clicks: &[bool], selection: Selection) -> Result<VarianceReport> {
    analytic_report(&select(series, clicks, selection))
}

/// The analytic `δW` ignores the correlations the window introduces
/// between nearby `Zᵢ`. It is trusted when the selection is large against
/// the window (`L ≥ 2M`) or its members are on average at least `M` apart.
pub fn analytic_uncertainty_valid(selected: usize, series_len: usize, window: usize) -> bool {
    if selected == 0 {
        return false;
    }
    let spacing = series_len as f64 / selected as f64;
    selected >= 2 * window || spacing >= window as f64
}

/// `W` from the data, `δW` from the standard deviation of `W` over
/// resamples with replacement. Resample `k` draws from ChaCha stream `k`.
pub fn bootstrap_variance(values: &[f64], resamples: usize, seed: u64) -> Result<VarianceReport> {
    if resamples < MIN_RESAMPLES {
        return Err(Error::invalid(
            "analysis.bootstrap_resamples",
            format!("{resamples} is below the minimum of {MIN_RESAMPLES}"),
        ));
    }
    let w = sample_variance(values)?;
    let len = values.len();
    let estimates: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..len {
                let x = values[rng.random_range(0..len)];
                sum += x;
                sum_sq += x * x;
            }
            let n = len as f64;
            ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0)
        })
        .collect();
    Ok(VarianceReport {
        w,
        uncertainty: sample_variance(&estimates)?.sqrt(),
        sample_count: len,
        method: Method::Bootstrap,
    })
}
