//! Local noise normalisation `Zᵢ = φᵢ / √Yᵢ`.
//!
//! `Yᵢ` is the sample variance of the `M + 1` values `φ_{i-M/2} ..= φ_{i+M/2}`,
//! the shot itself included. Shots closer than `M/2` to either end of the
//! series have no full window and are dropped.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSeries {
    pub window: usize,
    /// Position in the input series of every retained value.
    pub indices: Vec<usize>,
    pub z_values: Vec<f64>,
    pub y_values: Vec<f64>,
    /// Positions whose window had zero variance.
    pub invalid: Vec<usize>,
}

impl NormalizedSeries {
    pub fn len(&self) -> usize {
        self.z_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_values.is_empty()
    }
}

pub fn check_window(window: usize, len: usize) -> Result<()> {
    if window < 2 || window % 2 != 0 {
        return Err(Error::invalid(
            "analysis.window",
            format!("{window} must be even and at least 2"),
        ));
    }
    if len <= window {
        return Err(Error::WindowTooLarge { window, len });
    }
    Ok(())
}

pub fn local_normalize(phi: &[f64], window: usize) -> Result<NormalizedSeries> {
    check_window(window, phi.len())?;
    let half = window / 2;
    let centres = half..phi.len() - half;

    let y: Vec<f64> = centres
        .clone()
        .into_par_iter()
        .map(|i| window_variance(&phi[i - half..=i + half]))
        .collect();

    let mut out = NormalizedSeries {
        window,
        indices: Vec::with_capacity(y.len()),
        z_values: Vec::with_capacity(y.len()),
        y_values: Vec::with_capacity(y.len()),
        invalid: Vec::new(),
    };
    for (i, y) in centres.zip(y) {
        if y > 0.0 && y.is_finite() {
            out.indices.push(i);
            out.z_values.push(phi[i] / y.sqrt());
            out.y_values.push(y);
        } else {
            out.invalid.push(i);
        }
    }
    Ok(out)
}

fn window_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}
