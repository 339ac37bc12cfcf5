//! Run configuration: one JSON document with `spin`, `herald`,
//! `efficiency`, `sim` and `analysis` sections.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::efficiency::{
    eta_ac_stark, eta_phase, eta_scatter_from_calibration, optical_phase_shift, BeamGeometry, BranchingTable,
    EfficiencyChain, EfficiencyReport, TransitionLine,
};
use crate::error::{Error, Result};
use crate::herald::{purity, HeraldParams, PurityBudget, DEFAULT_N_MAX};
use crate::sim::{AtomNumberModel, DriftModel, NoiseCoefficients, SimConfig};

pub const DEFAULT_CONFIG_JSON: &str = include_str!("../data/default_config.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub spin: SpinSection,
    pub herald: HeraldSection,
    pub efficiency: EfficiencySection,
    pub sim: SimSection,
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSection {
    /// Ensemble sizes checked against the closed-form variances.
    pub sizes: Vec<u64>,
    pub exact_cap: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FalseClickFractions {
    pub dark: f64,
    pub exct: f64,
    pub decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeraldSection {
    pub p0: f64,
    pub p2_ratio: f64,
    pub pd: f64,
    pub pf_dark: f64,
    pub pf_exct: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Observed click probability per excitation pulse.
    pub p_click: f64,
    /// False-click contributions as fractions of `p_click`.
    pub fractions: FalseClickFractions,
}

fn default_n_max() -> usize {
    DEFAULT_N_MAX
}

impl HeraldSection {
    pub fn params(&self) -> Result<HeraldParams> {
        HeraldParams::from_ratio(self.p0, self.p2_ratio, self.pd, self.pf_dark, self.pf_exct)
    }

    pub fn budget(&self) -> PurityBudget {
        let f = self.fractions;
        PurityBudget::from_fractions(self.p_click, f.dark, f.exct, f.decay)
    }

    pub fn p_state(&self) -> Result<f64> {
        purity(&self.budget())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterCounts {
    pub n_with_repump: f64,
    pub n_without_repump: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencySection {
    pub eta_noise: f64,
    pub eta_mm: f64,
    /// Resonant optical depth of the closed transition.
    pub alpha0: f64,
    /// Common factor applied to all line strengths; absorbs the
    /// geometry-dependent coupling not modelled by the line table.
    #[serde(default = "one")]
    pub strength_scale: f64,
    pub lines: Vec<TransitionLine>,
    pub geometry: BeamGeometry,
    pub branching: BranchingTable,
    pub scatter: ScatterCounts,
}

fn one() -> f64 {
    1.0
}

impl EfficiencySection {
    pub fn phase_shift(&self) -> f64 {
        self.strength_scale * optical_phase_shift(self.alpha0, &self.lines)
    }

    pub fn report(&self) -> Result<EfficiencyReport> {
        for (key, value) in [("efficiency.eta_noise", self.eta_noise), ("efficiency.eta_mm", self.eta_mm)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::invalid(key, format!("{value} is outside [0, 1]")));
            }
        }
        if !(self.alpha0 >= 0.0) {
            return Err(Error::invalid("efficiency.alpha0", "must be non-negative"));
        }
        if !(self.strength_scale >= 0.0) {
            return Err(Error::invalid("efficiency.strength_scale", "must be non-negative"));
        }
        for line in &self.lines {
            line.validate()?;
        }
        let chi = self.phase_shift();
        let phase = eta_phase(chi);
        let stark = eta_ac_stark(&self.geometry)?;
        let scatter =
            eta_scatter_from_calibration(self.scatter.n_with_repump, self.scatter.n_without_repump, &self.branching)?;
        let chain = EfficiencyChain {
            eta_noise: self.eta_noise,
            eta_mm: self.eta_mm,
            eta_phase: phase,
            eta_ac_stark: stark,
            eta_scatter: scatter.eta_scatter,
        };
        Ok(EfficiencyReport {
            chi_exct_deg: chi.to_degrees(),
            eta_phase: phase,
            eta_ac_stark: stark,
            eta_inhom: chain.eta_inhom(),
            eta_scatter: scatter.eta_scatter,
            eta_noise: self.eta_noise,
            eta_mm: self.eta_mm,
            eta_q: crate::efficiency::total_efficiency(&chain),
        })
    }
}

impl EfficiencyReport {
    pub fn chain(&self) -> EfficiencyChain {
        EfficiencyChain {
            eta_noise: self.eta_noise,
            eta_mm: self.eta_mm,
            eta_phase: self.eta_phase,
            eta_ac_stark: self.eta_ac_stark,
            eta_scatter: self.eta_scatter,
        }
    }
}

/// Simulator settings. Click and purity probabilities default to the
/// herald section when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub shots: usize,
    pub seed: u64,
    pub atoms: AtomNumberModel,
    pub noise: NoiseCoefficients,
    #[serde(default)]
    pub drift: DriftModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_click: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_state: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub window: usize,
    /// Only shots with more atoms enter the click/no-click comparison.
    #[serde(default)]
    pub min_atoms: f64,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
    pub scaling_bins: usize,
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 || self.window % 2 != 0 {
            return Err(Error::invalid(
                "analysis.window",
                format!("{} must be even and at least 2", self.window),
            ));
        }
        if self.bootstrap_resamples < crate::analysis::variance::MIN_RESAMPLES {
            return Err(Error::invalid(
                "analysis.bootstrap_resamples",
                format!(
                    "{} is below the minimum of {}",
                    self.bootstrap_resamples,
                    crate::analysis::variance::MIN_RESAMPLES
                ),
            ));
        }
        if self.scaling_bins < crate::analysis::scaling::MIN_BINS {
            return Err(Error::invalid(
                "analysis.scaling_bins",
                format!("{} is below {}", self.scaling_bins, crate::analysis::scaling::MIN_BINS),
            ));
        }
        if !(self.min_atoms >= 0.0) {
            return Err(Error::invalid("analysis.min_atoms", "must be non-negative"));
        }
        Ok(())
    }
}

impl Config {
    pub fn bundled() -> Self {
        Self::from_json(DEFAULT_CONFIG_JSON).expect("bundled configuration is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut reader = serde_json::Deserializer::from_str(text);
        let config: Config = serde_path_to_error::deserialize(&mut reader).map_err(|e| {
            let key = e.path().to_string();
            let inner = e.into_inner();
            if inner.is_syntax() || inner.is_eof() {
                Error::Json(inner)
            } else {
                Error::invalid(key, inner.to_string())
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Cheap structural checks; efficiency integrals are evaluated lazily.
    pub fn validate(&self) -> Result<()> {
        if self.spin.sizes.is_empty() {
            return Err(Error::invalid("spin.sizes", "must not be empty"));
        }
        if let Some(&n) = self.spin.sizes.iter().find(|&&n| n == 0) {
            return Err(Error::invalid("spin.sizes", format!("{n} atoms")));
        }
        self.herald.params()?;
        self.herald.p_state()?;
        if !(0.0..=1.0).contains(&self.herald.p_click) {
            return Err(Error::invalid("herald.p_click", "must lie in [0, 1]"));
        }
        self.efficiency.geometry.validate()?;
        self.efficiency.branching.validate()?;
        self.analysis.validate()?;
        for (key, p) in [("sim.p_click", self.sim.p_click), ("sim.p_state", self.sim.p_state)] {
            if let Some(p) = p {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invalid(key, format!("{p} is outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> String {
        crate::fingerprint::fingerprint(self)
    }

    pub fn p_click(&self) -> f64 {
        self.sim.p_click.unwrap_or(self.herald.p_click)
    }

    pub fn p_state(&self) -> Result<f64> {
        match self.sim.p_state {
            Some(p) => Ok(p),
            None => self.herald.p_state(),
        }
    }

    pub fn sim_config(&self, chain: EfficiencyChain) -> Result<SimConfig> {
        let sim = SimConfig {
            shots: self.sim.shots,
            atoms: self.sim.atoms.clone(),
            noise: self.sim.noise,
            drift: self.sim.drift,
            p_click: self.p_click(),
            p_state: self.p_state()?,
            eta_chain: chain,
            seed: self.sim.seed,
        };
        sim.validate()?;
        Ok(sim)
    }
}
