//! Detection-efficiency budget of the collective-spin readout.
//!
//! `η_Q = η_noise · η_mm · η_phase · η_ac-Stark · η_scatter`. The noise and
//! mode-matching factors are inputs; the phase, ac-Stark and scattering
//! factors are computed from a transition table, a beam/cloud geometry and a
//! repump calibration respectively.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// One optical transition seen by a dispersive beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionLine {
    #[serde(default)]
    pub label: String,
    /// Detuning of the light from the transition; same unit as `linewidth`.
    pub detuning: f64,
    /// Strength relative to the closed transition that defines `α₀`.
    pub strength: f64,
    pub linewidth: f64,
}

impl TransitionLine {
    pub fn validate(&self) -> Result<()> {
        if !(self.strength >= 0.0) {
            return Err(Error::invalid("efficiency.lines.strength", "must be non-negative"));
        }
        if !(self.linewidth > 0.0) {
            return Err(Error::invalid("efficiency.lines.linewidth", "must be positive"));
        }
        if !self.detuning.is_finite() {
            return Err(Error::invalid("efficiency.lines.detuning", "must be finite"));
        }
        Ok(())
    }
}

/// Transverse Gaussian column density `exp(-x²/2σx² - z²/2σz²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianDensity {
    pub sigma_x: f64,
    pub sigma_z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    /// `1/e²` intensity radius of the excitation beam (m).
    pub waist: f64,
    /// Excitation pulse duration `τ` (s).
    pub pulse_duration: f64,
    /// ac-Stark shift of `|↑⟩` at the beam centre (rad/s).
    pub stark_shift_peak: f64,
    pub density: GaussianDensity,
}

impl BeamGeometry {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("efficiency.geometry.waist", self.waist, true),
            ("efficiency.geometry.pulse_duration", self.pulse_duration, true),
            ("efficiency.geometry.stark_shift_peak", self.stark_shift_peak, false),
            ("efficiency.geometry.density.sigma_x", self.density.sigma_x, true),
            ("efficiency.geometry.density.sigma_z", self.density.sigma_z, true),
        ];
        for (key, value, strict) in checks {
            let ok = if strict { value > 0.0 } else { value >= 0.0 };
            if !ok || value.is_nan() {
                return Err(Error::invalid(key, format!("{value} must be positive")));
            }
        }
        Ok(())
    }

    fn intensity(&self, x: f64, z: f64) -> f64 {
        if self.waist.is_infinite() {
            return 1.0;
        }
        (-2.0 * (x * x + z * z) / (self.waist * self.waist)).exp()
    }

    fn density_at(&self, x: f64, z: f64) -> f64 {
        let GaussianDensity { sigma_x, sigma_z } = self.density;
        (-0.5 * (x * x / (sigma_x * sigma_x) + z * z / (sigma_z * sigma_z))).exp()
    }

    /// Half-width of the region carrying the weight `ϱ I²` along one axis.
    fn extent(&self, sigma: f64) -> f64 {
        let inv = 1.0 / (sigma * sigma) + 8.0 / (self.waist * self.waist);
        9.0 / inv.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyChain {
    pub eta_noise: f64,
    pub eta_mm: f64,
    pub eta_phase: f64,
    pub eta_ac_stark: f64,
    pub eta_scatter: f64,
}

impl EfficiencyChain {
    pub fn ideal() -> Self {
        Self {
            eta_noise: 1.0,
            eta_mm: 1.0,
            eta_phase: 1.0,
            eta_ac_stark: 1.0,
            eta_scatter: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, value) in [
            ("efficiency.eta_noise", self.eta_noise),
            ("efficiency.eta_mm", self.eta_mm),
            ("efficiency.eta_phase", self.eta_phase),
            ("efficiency.eta_ac_stark", self.eta_ac_stark),
            ("efficiency.eta_scatter", self.eta_scatter),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::invalid(key, format!("{value} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn eta_inhom(&self) -> f64 {
        self.eta_phase * self.eta_ac_stark
    }

    /// Every factor except the noise dilution, which a simulation produces
    /// on its own from the noise budget.
    pub fn signal_efficiency(&self) -> f64 {
        self.eta_mm * self.eta_inhom() * self.eta_scatter
    }
}

pub fn total_efficiency(chain: &EfficiencyChain) -> f64 {
    chain.eta_noise * chain.eta_mm * chain.eta_phase * chain.eta_ac_stark * chain.eta_scatter
}

/// Dispersive phase shift `(α₀/4) Σ ℘ᵢ Γ Δᵢ / (Δᵢ² + (Γ/2)²)` in radians.
///
/// The factor `Γ` makes the expression dimensionless; it is the textbook
/// form with detunings measured in units of the natural linewidth.
pub fn optical_phase_shift(alpha0: f64, lines: &[TransitionLine]) -> f64 {
    alpha0 / 4.0
        * lines
            .iter()
            .map(|l| {
                let half = l.linewidth / 2.0;
                l.strength * l.linewidth * l.detuning / (l.detuning * l.detuning + half * half)
            })
            .sum::<f64>()
}

/// Factor by which all line strengths must be scaled so that `alpha0`
/// produces `target` radians of phase shift.
pub fn strength_scale_for_phase(alpha0: f64, lines: &[TransitionLine], target: f64) -> Result<f64> {
    let chi = optical_phase_shift(alpha0, lines);
    if chi == 0.0 {
        return Err(Error::invalid("efficiency.lines", "produce no phase shift"));
    }
    Ok(target / chi)
}

/// Visibility after a linear phase ramp of total extent `chi`:
/// `sinc²(χ/2)`.
pub fn eta_phase(chi_exct: f64) -> f64 {
    let half = chi_exct / 2.0;
    if half == 0.0 {
        return 1.0;
    }
    (half.sin() / half).powi(2)
}

/// Time steps per pulse for the ac-Stark time average.
pub const STARK_TIME_STEPS: usize = 200;
const STARK_TOLERANCE: f64 = 1e-7;
const STARK_MAX_PANELS: usize = 256;

/// Time-averaged squared overlap of the spin wave with itself under the
/// position-dependent light shift,
///
/// `(1/τ) ∫₀^τ |∬ ϱ I² e^{-i ω_LS t}|² dt / |∬ ϱ I²|²`.
///
/// The transverse integral uses composite Gauss-Legendre panels, doubled
/// until successive results agree; the time average is Simpson's rule on
/// `τ/200` steps.
pub fn eta_ac_stark(geom: &BeamGeometry) -> Result<f64> {
    geom.validate()?;
    if geom.stark_shift_peak == 0.0 {
        return Ok(1.0);
    }
    let rule = GaussLegendre::new(8);
    let mut panels = 4;
    let mut previous = stark_overlap(geom, &rule, panels);
    loop {
        panels *= 2;
        let current = stark_overlap(geom, &rule, panels);
        let change = (current - previous).abs();
        if change < STARK_TOLERANCE {
            return Ok(current);
        }
        if panels >= STARK_MAX_PANELS {
            return Err(Error::NonConvergence {
                panels,
                last_change: change,
            });
        }
        previous = current;
    }
}

fn stark_overlap(geom: &BeamGeometry, rule: &GaussLegendre, panels: usize) -> f64 {
    let xs = rule.composite(-geom.extent(geom.density.sigma_x), geom.extent(geom.density.sigma_x), panels);
    let zs = rule.composite(-geom.extent(geom.density.sigma_z), geom.extent(geom.density.sigma_z), panels);

    // (weight, light shift) for every node; rows are independent tiles
    let nodes: Vec<(f64, f64)> = xs
        .par_iter()
        .map(|&(x, wx)| {
            zs.iter()
                .map(|&(z, wz)| {
                    let intensity = geom.intensity(x, z);
                    let weight = wx * wz * geom.density_at(x, z) * intensity * intensity;
                    (weight, geom.stark_shift_peak * intensity)
                })
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect();
    let norm: f64 = nodes.iter().map(|(w, _)| w).sum();
    if norm == 0.0 {
        return 1.0;
    }

    let steps = STARK_TIME_STEPS;
    let dt = geom.pulse_duration / steps as f64;
    let overlap: Vec<f64> = (0..=steps)
        .into_par_iter()
        .map(|k| {
            let t = k as f64 * dt;
            let (re, im) = nodes.iter().fold((0.0, 0.0), |(re, im), &(w, omega)| {
                let (s, c) = (omega * t).sin_cos();
                (re + w * c, im - w * s)
            });
            (re * re + im * im) / (norm * norm)
        })
        .collect();
    simpson(&overlap, dt) / geom.pulse_duration
}

fn simpson(values: &[f64], step: f64) -> f64 {
    let n = values.len() - 1;
    debug_assert!(n % 2 == 0);
    let mut acc = values[0] + values[n];
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * step / 3.0
}

/// Peak light shift giving `eta_ac_stark == target` for an otherwise fixed
/// geometry, by bisection on the monotone branch below the first revival.
pub fn calibrate_stark_shift(geom: &BeamGeometry, target: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&target) {
        return Err(Error::invalid("target", "must lie in [0, 1)"));
    }
    let eval = |shift: f64| {
        eta_ac_stark(&BeamGeometry {
            stark_shift_peak: shift,
            ..*geom
        })
    };
    let mut lo = 0.0;
    let mut hi = 1.0 / geom.pulse_duration;
    while eval(hi)? > target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 / geom.pulse_duration {
            return Err(Error::invalid("target", "not reachable by increasing the light shift"));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A ground state reached by spontaneous decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayChannel {
    pub f: u8,
    pub m_f: i8,
    pub fraction: f64,
}

/// Branching of the scattered atoms over ground states.
///
/// Without repumping only atoms in the upper hyperfine manifold are counted.
/// The microwave π pulse swaps the two clock states, so after it an atom
/// is counted iff it decayed to the upper manifold with `m_F ≠ 0`, or to
/// the lower clock state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchingTable {
    pub upper_f: u8,
    pub lower_f: u8,
    pub channels: Vec<DecayChannel>,
}

impl BranchingTable {
    pub fn validate(&self) -> Result<()> {
        if self.channels.iter().any(|c| !(c.fraction >= 0.0)) {
            return Err(Error::invalid("efficiency.branching.channels", "fractions must be non-negative"));
        }
        let total: f64 = self.channels.iter().map(|c| c.fraction).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(
                "efficiency.branching.channels",
                format!("fractions sum to {total}, expected 1"),
            ));
        }
        Ok(())
    }

    pub fn counted_without_repump(&self, channel: &DecayChannel) -> bool {
        (channel.f == self.upper_f && channel.m_f != 0) || (channel.f == self.lower_f && channel.m_f == 0)
    }

    /// Fraction of scattered atoms that are counted without repump.
    pub fn detected_fraction(&self) -> f64 {
        self.channels
            .iter()
            .filter(|c| self.counted_without_repump(c))
            .map(|c| c.fraction)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterCalibration {
    pub scatter_fraction: f64,
    pub eta_scatter: f64,
}

/// Invert the repump calibration: `n_without / n_with = s · b_detected`,
/// where `s` is the fraction of atoms that scattered a photon.
pub fn eta_scatter_from_calibration(
    n_with_repump: f64,
    n_without_repump: f64,
    branching: &BranchingTable,
) -> Result<ScatterCalibration> {
    branching.validate()?;
    if !(n_with_repump > 0.0) {
        return Err(Error::invalid("efficiency.scatter.n_with_repump", "must be positive"));
    }
    if !(n_without_repump >= 0.0) {
        return Err(Error::invalid("efficiency.scatter.n_without_repump", "must be non-negative"));
    }
    let ratio = n_without_repump / n_with_repump;
    if ratio > 1.0 {
        return Err(Error::invalid(
            "efficiency.scatter",
            format!("more atoms without repump than with ({ratio:.4})"),
        ));
    }
    if ratio == 0.0 {
        return Ok(ScatterCalibration {
            scatter_fraction: 0.0,
            eta_scatter: 1.0,
        });
    }
    let detected = branching.detected_fraction();
    if detected == 0.0 {
        return Err(Error::invalid(
            "efficiency.branching",
            "no decay channel is visible without repump",
        ));
    }
    let scatter_fraction = ratio / detected;
    if scatter_fraction > 1.0 {
        return Err(Error::invalid(
            "efficiency.scatter",
            format!("counts imply a scattered fraction of {scatter_fraction:.4} > 1"),
        ));
    }
    Ok(ScatterCalibration {
        scatter_fraction,
        eta_scatter: 1.0 - scatter_fraction,
    })
}

/// Computed efficiency factors, serialised into run reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub chi_exct_deg: f64,
    pub eta_phase: f64,
    pub eta_ac_stark: f64,
    pub eta_inhom: f64,
    pub eta_scatter: f64,
    pub eta_noise: f64,
    pub eta_mm: f64,
    pub eta_q: f64,
}
