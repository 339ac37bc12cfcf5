//! Statistical analysis of phase records: reference decorrelation, local
//! noise normalisation, variance estimation and noise-scaling fits.

pub mod decorrelate;
pub mod normalize;
pub mod scaling;
pub mod variance;

pub use decorrelate::{decorrelate, decorrelate_series, Decorrelation, WeightVector};
pub use normalize::{local_normalize, NormalizedSeries};
pub use scaling::{bin_by_atoms, noise_scaling_fit, NoiseBin, ScalingFit};
pub use variance::{
    analytic_report, bootstrap_variance, estimator_mse, select, variance_report, zi_variance_correction,
    Method, Selection, VarianceReport,
};
