//! Decomposition of the phase noise into constant, linear (projection) and
//! quadratic (classical) parts in the atom number.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::NoiseCoefficients;

pub const MIN_BINS: usize = 4;
/// Largest acceptable condition number of the column-scaled design.
const MAX_CONDITION: f64 = 1e10;

/// Variance of the phase in one group of shots with similar atom number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBin {
    pub mean_n: f64,
    pub mean_n_sq: f64,
    pub variance: f64,
    pub count: usize,
}

impl NoiseBin {
    pub fn from_samples(values: &[f64], n_atoms: &[f64]) -> Result<Self> {
        let count = values.len();
        if count < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: count });
        }
        let len = count as f64;
        let mean = values.iter().sum::<f64>() / len;
        Ok(Self {
            mean_n: n_atoms.iter().sum::<f64>() / len,
            mean_n_sq: n_atoms.iter().map(|n| n * n).sum::<f64>() / len,
            variance: values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (len - 1.0),
            count,
        })
    }

    /// `√(2/(count−1))` times the variance.
    pub fn uncertainty(&self) -> f64 {
        (2.0 / (self.count as f64 - 1.0)).sqrt() * self.variance
    }
}

/// Group shots by atom number. Shots sharing an exact atom number form one
/// bin when there are at most `bins` distinct values; otherwise the shots
/// are sorted and cut into `bins` groups of equal size.
pub fn bin_by_atoms(values: &[f64], n_atoms: &[f64], bins: usize) -> Result<Vec<NoiseBin>> {
    assert_eq!(values.len(), n_atoms.len());
    if bins == 0 {
        return Err(Error::invalid("analysis.scaling_bins", "must be positive"));
    }
    let mut distinct: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, n) in n_atoms.iter().enumerate() {
        distinct.entry(n.to_bits()).or_default().push(i);
        if distinct.len() > bins {
            break;
        }
    }
    let groups: Vec<Vec<usize>> = if distinct.len() <= bins {
        let mut groups: Vec<(f64, Vec<usize>)> = distinct
            .into_values()
            .map(|g| (n_atoms[g[0]], g))
            .collect();
        groups.sort_by(|a, b| a.0.total_cmp(&b.0));
        groups.into_iter().map(|(_, g)| g).collect()
    } else {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| n_atoms[a].total_cmp(&n_atoms[b]));
        (0..bins)
            .map(|b| order[b * order.len() / bins..(b + 1) * order.len() / bins].to_vec())
            .collect()
    };
    groups
        .into_iter()
        .filter(|g| g.len() >= 2)
        .map(|g| {
            let v: Vec<f64> = g.iter().map(|&i| values[i]).collect();
            let n: Vec<f64> = g.iter().map(|&i| n_atoms[i]).collect();
            NoiseBin::from_samples(&v, &n)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub coefficients: NoiseCoefficients,
    pub standard_errors: NoiseCoefficients,
    /// Covariance of `(c_const, c_lin, c_quad)`; rows of clamped
    /// coefficients are zero.
    pub covariance: [[f64; 3]; 3],
    /// Weighted coefficient of determination.
    pub r_squared: f64,
    pub chi_squared: f64,
    /// Set when a negative coefficient was clamped to zero and the rest
    /// refitted.
    pub projected: bool,
    pub bins: usize,
}

impl ScalingFit {
    /// Share of the fitted variance at `n_atoms` carried by the linear term.
    pub fn linear_fraction(&self, n_atoms: f64) -> f64 {
        self.coefficients.c_lin * n_atoms / self.coefficients.variance(n_atoms)
    }

    /// Standard error of [`linear_fraction`](Self::linear_fraction) by
    /// linear error propagation through the covariance.
    pub fn linear_fraction_se(&self, n_atoms: f64) -> f64 {
        let NoiseCoefficients { c_const, c_lin, c_quad } = self.coefficients;
        let v = self.coefficients.variance(n_atoms);
        let n = n_atoms;
        let grad = [
            -c_lin * n / (v * v),
            n * (c_const + c_quad * n * n) / (v * v),
            -c_lin * n * n * n / (v * v),
        ];
        let mut var = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                var += grad[a] * self.covariance[a][b] * grad[b];
            }
        }
        var.max(0.0).sqrt()
    }
}

struct Solution {
    coefficients: [f64; 3],
    standard_errors: [f64; 3],
    covariance: [[f64; 3]; 3],
}

/// Weighted least squares of `var = c_const + c_lin N + c_quad N²` over the
/// bins, weighting each by the inverse square of its variance uncertainty.
pub fn noise_scaling_fit(bins: &[NoiseBin]) -> Result<ScalingFit> {
    if bins.len() < MIN_BINS {
        return Err(Error::TooFewSamples {
            needed: MIN_BINS,
            got: bins.len(),
        });
    }
    let full = solve(bins, &[true; 3])?;
    let mut active = [true; 3];
    let mut current = Solution {
        coefficients: full.coefficients,
        standard_errors: full.standard_errors,
        covariance: full.covariance,
    };
    let mut projected = false;
    loop {
        let worst = (0..3)
            .filter(|&k| active[k] && current.coefficients[k] < 0.0)
            .min_by(|&a, &b| {
                (current.coefficients[a] / current.standard_errors[a])
                    .total_cmp(&(current.coefficients[b] / current.standard_errors[b]))
            });
        let Some(k) = worst else { break };
        active[k] = false;
        projected = true;
        if !active.iter().any(|a| *a) {
            current.coefficients = [0.0; 3];
            current.covariance = [[0.0; 3]; 3];
            break;
        }
        current = solve(bins, &active)?;
    }
    let standard_errors: [f64; 3] =
        std::array::from_fn(|k| if active[k] { current.standard_errors[k] } else { full.standard_errors[k] });

    let c = current.coefficients;
    let predict = |b: &NoiseBin| c[0] + c[1] * b.mean_n + c[2] * b.mean_n_sq;
    let weights: Vec<f64> = bins.iter().map(|b| b.uncertainty().powi(-2)).collect();
    let total_weight: f64 = weights.iter().sum();
    let mean_y = bins.iter().zip(&weights).map(|(b, w)| w * b.variance).sum::<f64>() / total_weight;
    let chi_squared: f64 = bins
        .iter()
        .zip(&weights)
        .map(|(b, w)| w * (b.variance - predict(b)).powi(2))
        .sum();
    let spread: f64 = bins
        .iter()
        .zip(&weights)
        .map(|(b, w)| w * (b.variance - mean_y).powi(2))
        .sum();

    Ok(ScalingFit {
        coefficients: NoiseCoefficients {
            c_const: c[0],
            c_lin: c[1],
            c_quad: c[2],
        },
        standard_errors: NoiseCoefficients {
            c_const: standard_errors[0],
            c_lin: standard_errors[1],
            c_quad: standard_errors[2],
        },
        r_squared: if spread > 0.0 { 1.0 - chi_squared / spread } else { 1.0 },
        covariance: current.covariance,
        chi_squared,
        projected,
        bins: bins.len(),
    })
}

fn solve(bins: &[NoiseBin], active: &[bool; 3]) -> Result<Solution> {
    let columns: Vec<usize> = (0..3).filter(|&k| active[k]).collect();
    let feature = |b: &NoiseBin, k: usize| match k {
        0 => 1.0,
        1 => b.mean_n,
        _ => b.mean_n_sq,
    };
    let scale: Vec<f64> = columns
        .iter()
        .map(|&k| bins.iter().map(|b| feature(b, k).abs()).fold(0.0, f64::max))
        .collect();
    if scale.iter().any(|s| *s == 0.0) {
        return Err(Error::IllConditioned { condition: f64::INFINITY });
    }
    let rows = bins.len();
    let mut design = DMatrix::<f64>::zeros(rows, columns.len());
    let mut target = DVector::<f64>::zeros(rows);
    for (r, b) in bins.iter().enumerate() {
        let sqrt_w = 1.0 / b.uncertainty();
        if !sqrt_w.is_finite() {
            return Err(Error::invalid(
                "analysis.scaling_bins",
                format!("bin at N = {} has zero variance", b.mean_n),
            ));
        }
        for (c, &k) in columns.iter().enumerate() {
            design[(r, c)] = sqrt_w * feature(b, k) / scale[c];
        }
        target[r] = sqrt_w * b.variance;
    }

    let svd = design.svd(true, true);
    let largest = svd.singular_values.max();
    let smallest = svd.singular_values.min();
    let condition = largest / smallest;
    if !(condition < MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let scaled = svd
        .solve(&target, 0.0)
        .map_err(|_| Error::IllConditioned { condition })?;
    // covariance of the scaled coefficients: V Σ⁻² Vᵀ
    let v_t = svd.v_t.as_ref().expect("requested");
    let mut coefficients = [0.0; 3];
    let mut covariance = [[0.0; 3]; 3];
    for (c, &k) in columns.iter().enumerate() {
        coefficients[k] = scaled[c] / scale[c];
        for (d, &l) in columns.iter().enumerate() {
            let cov: f64 = (0..svd.singular_values.len())
                .map(|s| v_t[(s, c)] * v_t[(s, d)] / svd.singular_values[s].powi(2))
                .sum();
            covariance[k][l] = cov / (scale[c] * scale[d]);
        }
    }
    let standard_errors = std::array::from_fn(|k| covariance[k][k].max(0.0).sqrt());
    Ok(Solution {
        coefficients,
        standard_errors,
        covariance,
    })
}
