//! Monte Carlo generator of synthetic experiment records.
//!
//! Every record owns a ChaCha stream selected by its index, so records can
//! be generated in any order (or in parallel) and the dataset is a pure
//! function of `(config, seed)`. The only sequential step is accumulating
//! the slow log-variance random walk, done after the parallel draw.
//!
//! Per shot, in arbitrary phase units:
//!
//! ```text
//! φ̃   = s · ( √(c_lin N) · x_proj + √(c_const + c_quad N²) · g + c )
//! φʲ  = s · ( √(c_const + c_lin N + c_quad N²) · gʲ + c + rʲ )
//! ```
//!
//! where `s² = exp(L)` follows the log-variance walk, `c` is the block
//! common-mode offset and `rʲ` a random walk that grows with the distance
//! of reference `j` from the probe shot. `x_proj` is a unit-variance
//! Gaussian for the coherent spin state. For an excited shot it is the
//! single-excitation quadrature mixed with vacuum,
//! `√η · x₁ + √(1-η) · g`, where `x₁` has density `x² e^{-x²/2}/√(2π)`
//! and `η` is the efficiency chain without its noise factor. Its variance
//! `1 + 2η` is the excitation signature; the mean stays zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::efficiency::EfficiencyChain;
use crate::error::{Error, Result};
use crate::fingerprint::fingerprint;

pub const REFERENCES: usize = 12;
/// References measured before (and after) the probe shot.
pub const REFERENCES_PER_SIDE: usize = REFERENCES / 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomNumberModel {
    pub mean: f64,
    /// Relative Gaussian spread around the pattern value.
    #[serde(default)]
    pub spread: f64,
    /// Multipliers cycled shot by shot, one per reuse of the same cloud.
    pub reuse_pattern: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseCoefficients {
    pub c_const: f64,
    pub c_lin: f64,
    pub c_quad: f64,
}

impl NoiseCoefficients {
    pub fn variance(&self, n_atoms: f64) -> f64 {
        self.c_const + self.c_lin * n_atoms + self.c_quad * n_atoms * n_atoms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftModel {
    /// Standard deviation of the per-shot step of the log-variance walk.
    #[serde(default)]
    pub log_variance_step: f64,
    /// Standard deviation of the offset shared by a shot and its references.
    #[serde(default)]
    pub common_mode: f64,
    /// Standard deviation per reference slot of the within-block walk.
    #[serde(default)]
    pub common_mode_walk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub shots: usize,
    pub atoms: AtomNumberModel,
    pub noise: NoiseCoefficients,
    #[serde(default)]
    pub drift: DriftModel,
    pub p_click: f64,
    pub p_state: f64,
    pub eta_chain: EfficiencyChain,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, p) in [("sim.p_click", self.p_click), ("sim.p_state", self.p_state)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(key, format!("{p} is outside [0, 1]")));
            }
        }
        for (key, c) in [
            ("sim.noise.c_const", self.noise.c_const),
            ("sim.noise.c_lin", self.noise.c_lin),
            ("sim.noise.c_quad", self.noise.c_quad),
            ("sim.drift.log_variance_step", self.drift.log_variance_step),
            ("sim.drift.common_mode", self.drift.common_mode),
            ("sim.drift.common_mode_walk", self.drift.common_mode_walk),
            ("sim.atoms.spread", self.atoms.spread),
        ] {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::invalid(key, format!("{c} must be finite and non-negative")));
            }
        }
        if !(self.atoms.mean > 0.0) || !self.atoms.mean.is_finite() {
            return Err(Error::invalid("sim.atoms.mean", "must be positive"));
        }
        if self.atoms.reuse_pattern.is_empty() {
            return Err(Error::invalid("sim.atoms.reuse_pattern", "must not be empty"));
        }
        if self.atoms.reuse_pattern.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::invalid("sim.atoms.reuse_pattern", "multipliers must be positive"));
        }
        self.eta_chain.validate()
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(self)
    }

    /// Atom number of the `index`-th shot before the Gaussian spread.
    pub fn nominal_atoms(&self, index: usize) -> f64 {
        let pattern = &self.atoms.reuse_pattern;
        self.atoms.mean * pattern[index % pattern.len()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub index: u64,
    pub phi_raw: f64,
    /// References in slot order `j = -6, ..., -1, 1, ..., 6`.
    pub references: [f64; REFERENCES],
    pub click: bool,
    pub excitation_present: bool,
    pub n_atoms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<MeasurementRecord>,
    pub config_fingerprint: String,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn phi_raw(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.phi_raw).collect()
    }

    pub fn clicks(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.click).collect()
    }

    pub fn n_atoms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.n_atoms as f64).collect()
    }
}

/// Analytic per-shot variance of `φ̃` without drift or common-mode noise.
pub fn ideal_shot_variance(config: &SimConfig, n_atoms: f64, excited: bool) -> f64 {
    let base = config.noise.variance(n_atoms);
    if excited {
        base + 2.0 * config.eta_chain.signal_efficiency() * config.noise.c_lin * n_atoms
    } else {
        base
    }
}

/// Per-record RNG: the master seed selects the key, the index the stream.
pub fn record_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

struct Draw {
    record: MeasurementRecord,
    walk_step: f64,
}

pub fn simulate_run(config: &SimConfig) -> Result<Dataset> {
    config.validate()?;
    let eta = config.eta_chain.signal_efficiency();

    let mut draws: Vec<Draw> = (0..config.shots)
        .into_par_iter()
        .map(|i| draw_record(config, eta, i))
        .collect();

    let mut level = 0.0;
    for draw in draws.iter_mut() {
        level += config.drift.log_variance_step * draw.walk_step;
        if level != 0.0 {
            let scale = (0.5 * level).exp();
            draw.record.phi_raw *= scale;
            draw.record.references.iter_mut().for_each(|r| *r *= scale);
        }
    }

    Ok(Dataset {
        records: draws.into_iter().map(|d| d.record).collect(),
        config_fingerprint: config.fingerprint(),
        seed: config.seed,
    })
}

fn draw_record(config: &SimConfig, eta: f64, index: usize) -> Draw {
    let mut rng = record_rng(config.seed, index as u64);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };

    let spread_draw = normal();
    let n_atoms = (config.nominal_atoms(index) * (1.0 + config.atoms.spread * spread_draw))
        .round()
        .max(1.0);

    let projection_vacuum = normal();
    let fock = [normal(), normal(), normal()];
    let technical = normal();
    let common = normal();
    let walk_step = normal();
    let mut ref_noise = [0.0; REFERENCES];
    ref_noise.iter_mut().for_each(|g| *g = normal());
    let mut ref_walk = [0.0; REFERENCES];
    ref_walk.iter_mut().for_each(|g| *g = normal());

    let u_click: f64 = rng.random();
    let u_state: f64 = rng.random();
    let u_sign: f64 = rng.random();

    let click = u_click < config.p_click;
    let excitation_present = click && u_state < config.p_state;

    let state_quadrature = if excitation_present {
        let radius = fock.iter().map(|g| g * g).sum::<f64>().sqrt();
        if u_sign < 0.5 {
            -radius
        } else {
            radius
        }
    } else {
        fock[0]
    };
    let projection = if excitation_present {
        eta.sqrt() * state_quadrature + (1.0 - eta).sqrt() * projection_vacuum
    } else {
        state_quadrature
    };

    let noise = &config.noise;
    let common_offset = config.drift.common_mode * common;
    let phi_raw = (noise.c_lin * n_atoms).sqrt() * projection
        + (noise.c_const + noise.c_quad * n_atoms * n_atoms).sqrt() * technical
        + common_offset;

    let ref_sd = noise.variance(n_atoms).sqrt();
    let mut references = [0.0; REFERENCES];
    // walk outward from the probe shot on each side
    for side in 0..2 {
        let mut walk = 0.0;
        for distance in 0..REFERENCES_PER_SIDE {
            let slot = if side == 0 {
                REFERENCES_PER_SIDE - 1 - distance
            } else {
                REFERENCES_PER_SIDE + distance
            };
            walk += config.drift.common_mode_walk * ref_walk[slot];
            references[slot] = ref_sd * ref_noise[slot] + common_offset + walk;
        }
    }

    Draw {
        record: MeasurementRecord {
            index: index as u64,
            phi_raw,
            references,
            click,
            excitation_present,
            n_atoms: n_atoms as u64,
        },
        walk_step,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn quiet_config(shots: usize) -> SimConfig {
        SimConfig {
            shots,
            atoms: AtomNumberModel {
                mean: 2.0e5,
                spread: 0.0,
                reuse_pattern: vec![1.0],
            },
            noise: NoiseCoefficients {
                c_const: 5.0e4,
                c_lin: 1.0,
                c_quad: 1.0e-6,
            },
            drift: DriftModel::default(),
            p_click: 0.1,
            p_state: 0.5,
            eta_chain: EfficiencyChain::ideal(),
            seed: 7,
        }
    }

    fn sample_variance(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn silent_generator_gives_zeros() {
        let mut config = quiet_config(500);
        config.noise = NoiseCoefficients {
            c_const: 0.0,
            c_lin: 0.0,
            c_quad: 0.0,
        };
        config.p_click = 0.0;
        let data = simulate_run(&config).unwrap();
        assert!(data.records.iter().all(|r| r.phi_raw == 0.0 && !r.click));
        assert!(data.records.iter().all(|r| r.references.iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn no_clicks_without_herald_probability() {
        let mut config = quiet_config(5000);
        config.p_click = 0.0;
        let data = simulate_run(&config).unwrap();
        assert!(data.records.iter().all(|r| !r.click && !r.excitation_present));
    }

    #[test]
    fn ideal_variance_definition() {
        let config = quiet_config(1);
        let n = 2.0e5;
        assert_eq!(ideal_shot_variance(&config, n, false), 5.0e4 + n + 1e-6 * n * n);
        assert_eq!(
            ideal_shot_variance(&config, n, true) - ideal_shot_variance(&config, n, false),
            2.0 * n
        );
        let mut flat = config.clone();
        flat.noise.c_lin = 0.0;
        assert_eq!(
            ideal_shot_variance(&flat, n, true),
            ideal_shot_variance(&flat, n, false)
        );
    }

    #[test]
    fn sample_variance_matches_ideal() {
        let mut config = quiet_config(100_000);
        config.p_click = 0.5;
        config.p_state = 1.0;
        let data = simulate_run(&config).unwrap();
        for excited in [false, true] {
            let xs: Vec<f64> = data
                .records
                .iter()
                .filter(|r| r.excitation_present == excited)
                .map(|r| r.phi_raw)
                .collect();
            let want = ideal_shot_variance(&config, 2.0e5, excited);
            let got = sample_variance(&xs);
            // excited shots are non-Gaussian: x₁ alone has kurtosis 5/3, ~2 with the technical noise
            let kurtosis = if excited { 2.0 } else { 3.0 };
            let se = want * ((kurtosis - 1.0) / xs.len() as f64).sqrt();
            assert!((got - want).abs() < 3.0 * se, "{got} vs {want} ± {se}");
        }
    }

    #[test]
    fn click_and_purity_rates() {
        let config = quiet_config(100_000);
        let data = simulate_run(&config).unwrap();
        let clicks = data.records.iter().filter(|r| r.click).count() as f64;
        let n = data.len() as f64;
        let se = (0.1 * 0.9 / n).sqrt();
        assert!((clicks / n - 0.1).abs() < 3.0 * se);
        let excited = data.records.iter().filter(|r| r.excitation_present).count() as f64;
        let se = (0.25 / clicks).sqrt();
        assert!((excited / clicks - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn deterministic_and_order_independent() {
        let config = quiet_config(2000);
        let a = simulate_run(&config).unwrap();
        let b = simulate_run(&config).unwrap();
        assert_eq!(a, b);
        // a single record drawn on its own matches its place in the run
        let eta = config.eta_chain.signal_efficiency();
        let lone = draw_record(&config, eta, 1234).record;
        assert_eq!(lone, a.records[1234]);
        let mut other = config.clone();
        other.seed = 8;
        assert_ne!(simulate_run(&other).unwrap().records, a.records);
    }

    #[test]
    fn reuse_pattern_cycles() {
        let mut config = quiet_config(8);
        config.atoms.reuse_pattern = vec![1.0, 0.9, 0.8, 0.7];
        let data = simulate_run(&config).unwrap();
        let ns: Vec<u64> = data.records.iter().map(|r| r.n_atoms).collect();
        assert_eq!(ns, vec![200_000, 180_000, 160_000, 140_000, 200_000, 180_000, 160_000, 140_000]);
    }

    #[test]
    fn validation_names_key() {
        let mut config = quiet_config(1);
        config.p_click = 1.5;
        let err = simulate_run(&config).unwrap_err().to_string();
        assert!(err.contains("sim.p_click"), "{err}");
        let mut config = quiet_config(1);
        config.noise.c_lin = -1.0;
        assert!(simulate_run(&config).unwrap_err().to_string().contains("sim.noise.c_lin"));
    }
}
