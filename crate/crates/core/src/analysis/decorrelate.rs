//! Removal of technical noise shared between a probe shot and its 12
//! reference shots.
//!
//! The weights minimise the sample variance of `φ̃ᵢ − Σⱼ wⱼ φᵢʲ`, i.e. they
//! solve the centred normal equations `C w = c` with `C` the reference
//! covariance and `c` the reference/probe covariance. A singular `C` gets
//! the minimum-norm solution through the eigen-decomposition pseudo-inverse.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Dataset, REFERENCES};

/// Eigenvalues below this fraction of the largest are treated as zero.
const PINV_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    /// Slot order `j = -6, ..., -1, 1, ..., 6`.
    pub weights: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub sum_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decorrelation {
    #[serde(skip)]
    pub phi: Vec<f64>,
    #[serde(flatten)]
    pub weights: WeightVector,
    pub variance_before: f64,
    pub variance_after: f64,
    pub rank: usize,
}

impl Decorrelation {
    pub fn variance_reduction(&self) -> f64 {
        self.variance_after / self.variance_before
    }
}

pub fn decorrelate(dataset: &Dataset) -> Result<Decorrelation> {
    let probe = dataset.phi_raw();
    let refs: Vec<[f64; REFERENCES]> = dataset.records.iter().map(|r| r.references).collect();
    decorrelate_series(&probe, &refs)
}

pub fn decorrelate_series(probe: &[f64], refs: &[[f64; REFERENCES]]) -> Result<Decorrelation> {
    let len = probe.len();
    assert_eq!(len, refs.len());
    if len < REFERENCES + 2 {
        return Err(Error::TooFewSamples {
            needed: REFERENCES + 2,
            got: len,
        });
    }
    let n = len as f64;
    let probe_mean = probe.iter().sum::<f64>() / n;
    let mut ref_mean = [0.0; REFERENCES];
    for row in refs {
        for (m, x) in ref_mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    ref_mean.iter_mut().for_each(|m| *m /= n);

    let mut gram = DMatrix::<f64>::zeros(REFERENCES, REFERENCES);
    let mut cross = DVector::<f64>::zeros(REFERENCES);
    let mut probe_ss = 0.0;
    let mut centred = [0.0; REFERENCES];
    for (row, &y) in refs.iter().zip(probe) {
        for j in 0..REFERENCES {
            centred[j] = row[j] - ref_mean[j];
        }
        let yc = y - probe_mean;
        probe_ss += yc * yc;
        for a in 0..REFERENCES {
            cross[a] += centred[a] * yc;
            for b in 0..=a {
                gram[(a, b)] += centred[a] * centred[b];
            }
        }
    }
    for a in 0..REFERENCES {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
    }

    let eigen = SymmetricEigen::new(gram);
    let largest = eigen.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let mut inverse = DMatrix::<f64>::zeros(REFERENCES, REFERENCES);
    let mut rank = 0;
    for (k, &lambda) in eigen.eigenvalues.iter().enumerate() {
        if largest > 0.0 && lambda > PINV_CUTOFF * largest {
            rank += 1;
            let v = eigen.eigenvectors.column(k);
            inverse += (v * v.transpose()) / lambda;
        }
    }
    if rank < REFERENCES {
        log::warn!(
            "reference covariance has rank {rank} < {REFERENCES}; using the minimum-norm solution"
        );
    }
    let w = &inverse * &cross;

    let phi: Vec<f64> = refs
        .iter()
        .zip(probe)
        .map(|(row, &y)| y - row.iter().zip(w.iter()).map(|(x, wj)| x * wj).sum::<f64>())
        .collect();

    // residual sum of squares of the centred fit
    let residual_ss = (probe_ss - w.dot(&cross)).max(0.0);
    let dof = (len - 1 - rank).max(1) as f64;
    let sigma2 = residual_ss / dof;
    let standard_errors = (0..REFERENCES)
        .map(|j| (sigma2 * inverse[(j, j)]).max(0.0).sqrt())
        .collect();

    let weights: Vec<f64> = w.iter().copied().collect();
    let sum_sq = weights.iter().map(|x| x * x).sum();
    Ok(Decorrelation {
        variance_before: probe_ss / (n - 1.0),
        variance_after: sample_variance(&phi),
        phi,
        weights: WeightVector {
            weights,
            standard_errors,
            sum_sq,
        },
        rank,
    })
}

pub(crate) fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use super::*;

    fn common_mode_series(len: usize, seed: u64) -> (Vec<f64>, Vec<[f64; REFERENCES]>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut probe = Vec::with_capacity(len);
        let mut refs = Vec::with_capacity(len);
        for _ in 0..len {
            let c: f64 = 3.0 * rng.sample::<f64, _>(StandardNormal);
            probe.push(rng.sample::<f64, _>(StandardNormal) + c);
            let mut row = [0.0; REFERENCES];
            row.iter_mut().for_each(|r| *r = rng.sample::<f64, _>(StandardNormal) + c);
            refs.push(row);
        }
        (probe, refs)
    }

    #[test]
    fn removes_common_mode() {
        // V_s = V_n = 1, V_c = 9: w_j = V_c/(V_n + 12 V_c) each,
        // optimum V_s + V_n V_c/(V_n + 12 V_c)
        let (probe, refs) = common_mode_series(50_000, 3);
        let out = decorrelate_series(&probe, &refs).unwrap();
        let optimum = 1.0 + 9.0 / (1.0 + 108.0);
        assert_relative_eq!(out.variance_after, optimum, max_relative = 0.03);
        for w in &out.weights.weights {
            assert!((w - 9.0 / 109.0).abs() < 4.0 * out.weights.standard_errors[0]);
        }
        assert_relative_eq!(out.weights.sum_sq, 12.0 * (9.0f64 / 109.0).powi(2), max_relative = 0.05);
    }

    #[test]
    fn identical_references_get_minimum_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut probe = Vec::new();
        let mut refs = Vec::new();
        for _ in 0..2000 {
            let c: f64 = rng.sample(StandardNormal);
            let s: f64 = rng.sample(StandardNormal);
            probe.push(c + 0.1 * s);
            refs.push([c; REFERENCES]);
        }
        let out = decorrelate_series(&probe, &refs).unwrap();
        assert_eq!(out.rank, 1);
        for w in &out.weights.weights {
            assert_relative_eq!(*w, out.weights.weights[0], max_relative = 1e-9);
        }
        let total: f64 = out.weights.weights.iter().sum();
        assert!((total - 1.0).abs() < 0.02);
    }

    #[test]
    fn rejects_short_series() {
        let refs = vec![[0.0; REFERENCES]; 5];
        assert!(matches!(
            decorrelate_series(&[0.0; 5], &refs),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn sum_sq_matches_weights() {
        let (probe, refs) = common_mode_series(500, 9);
        let out = decorrelate_series(&probe, &refs).unwrap();
        let direct: f64 = out.weights.weights.iter().map(|w| w * w).sum();
        assert!((direct - out.weights.sum_sq).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn never_increases_variance(seed in any::<u64>(), len in 20usize..300, scale in 0.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut probe = Vec::new();
            let mut refs = Vec::new();
            for _ in 0..len {
                let c: f64 = scale * rng.sample::<f64, _>(StandardNormal);
                probe.push(rng.sample::<f64, _>(StandardNormal) + c);
                let mut row = [0.0; REFERENCES];
                row.iter_mut().for_each(|r| *r = rng.random::<f64>() * c + rng.sample::<f64, _>(StandardNormal));
                refs.push(row);
            }
            let out = decorrelate_series(&probe, &refs).unwrap();
            prop_assert!(out.variance_after <= out.variance_before * (1.0 + 1e-10));
        }

        #[test]
        fn second_pass_is_idle(seed in any::<u64>()) {
            let (probe, refs) = common_mode_series(4000, seed);
            let first = decorrelate_series(&probe, &refs).unwrap();
            let second = decorrelate_series(&first.phi, &refs).unwrap();
            for (w, se) in second.weights.weights.iter().zip(&second.weights.standard_errors) {
                prop_assert!(w.abs() < 1e-8 * (1.0 + se));
            }
        }
    }
}
