//! Run configuration: a TOML file with one table per concern.
//!
//! | table          | used by                                   | defaults                         |
//! |----------------|-------------------------------------------|----------------------------------|
//! | `model`        | solve-*, reconstruct                      | none (required by those)         |
//! | `[params]`     | everything                                | preset (nondim: ε = 0.1, ν = 0)  |
//! | `[grid]`       | solve-*, reconstruct                      | none                             |
//! | `[initial]`    | solve-*, reconstruct                      | gaussian-beam, A = 0.1, w = 1    |
//! | `[march]`      | solve-*, reconstruct                      | none                             |
//! | `[hydro]`      | solve-hydro                               | muscl, cfl 0.5, viscous          |
//! | `[reconstruct]`| reconstruct                               | none                             |
//! | `[experiment]` | validate-t1, validate-t2                  | see `ExperimentConfig`           |
//! | `[residual]`   | residual                                  | see `ResidualConfig`             |
//! | `[transplant]` | validate-npe                              | see `TransplantConfig`           |
//! | `[convergence]`| convergence                               | none                             |

use std::path::Path;

use paraxial_core::hydro::HydroScheme;
use paraxial_core::validate::{ResidualConfig, Study, TransplantConfig};
use paraxial_core::{ExperimentConfig, ModelParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Validation { field: field.into(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Kuznetsov,
    Kzk,
    Npe,
    Hydro,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    #[default]
    Nondim,
    Water,
}

impl Preset {
    pub fn params(self) -> ModelParams {
        match self {
            Preset::Nondim => ModelParams::nondim(0.1),
            Preset::Water => ModelParams::water(0.0, 1e-5),
        }
    }
}

/// One periodic axis; sizes must be powers of two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub name: String,
    pub n: usize,
    pub length: f64,
}

/// Axes in storage order. Profile models (kzk, npe) put τ or z last;
/// physical models (kuznetsov, hydro) put x₁ last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub axes: Vec<AxisSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `A sin(2π s/L) exp(−|y − y_c|²/w²)` with `s` the last axis.
    GaussianBeam,
    /// `A sin(2π s/L)`.
    PlaneWave,
    /// Read from an AC1 snapshot.
    Snapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSpec {
    pub profile: Profile,
    pub amplitude: f64,
    pub width: f64,
    pub path: Option<String>,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self { profile: Profile::GaussianBeam, amplitude: 0.1, width: 1.0, path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarchBlock {
    /// Final value of the evolution variable (z, τ or t).
    pub end: f64,
    /// Step size (largest step for the hydro solver, which adapts to the CFL bound).
    pub step: f64,
    /// Keep every n-th step; for hydro, the number of equally spaced outputs.
    #[serde(default = "one")]
    pub store_every: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HydroBlock {
    pub scheme: HydroScheme,
    pub cfl: f64,
    pub viscous: bool,
}

impl Default for HydroBlock {
    fn default() -> Self {
        Self { scheme: HydroScheme::Muscl, cfl: 0.5, viscous: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructBlock {
    /// Points along x₁.
    pub n1: usize,
    /// x₁ spacing in units of c·dτ.
    #[serde(default = "one")]
    pub stride: usize,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceBlock {
    pub study: Study,
    pub resolutions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub model: Option<Model>,
    #[serde(default)]
    pub params: ModelParams,
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub initial: InitialSpec,
    pub march: Option<MarchBlock>,
    #[serde(default)]
    pub hydro: HydroBlock,
    pub reconstruct: Option<ReconstructBlock>,
    pub experiment: Option<ExperimentConfig>,
    pub residual: Option<ResidualConfig>,
    pub transplant: Option<TransplantConfig>,
    pub convergence: Option<ConvergenceBlock>,
}

impl SimulationConfig {
    /// SHA-256 of the canonical JSON form of the fully defaulted config.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut e = self.experiment.clone().ok_or_else(|| invalid("experiment", "missing [experiment] table"))?;
        e.params = self.params;
        Ok(e)
    }

    pub fn residual(&self) -> Result<ResidualConfig, ConfigError> {
        let mut r = self.residual.clone().ok_or_else(|| invalid("residual", "missing [residual] table"))?;
        r.params = self.params;
        Ok(r)
    }

    pub fn transplant(&self) -> Result<TransplantConfig, ConfigError> {
        let mut r = self.transplant.clone().ok_or_else(|| invalid("transplant", "missing [transplant] table"))?;
        r.params = self.params;
        Ok(r)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let check_eps = |field: &str, list: &[f64]| -> Result<(), ConfigError> {
            if list.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(invalid(field, "eps list not decreasing"));
            }
            if list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                return Err(invalid(field, "eps values must lie in (0, 1)"));
            }
            Ok(())
        };
        if let Some(e) = &self.experiment {
            check_eps("experiment.eps_list", &e.eps_list)?;
        }
        if let Some(r) = &self.residual {
            check_eps("residual.eps_list", &r.eps_list)?;
        }
        if let Some(t) = &self.transplant {
            check_eps("transplant.eps_list", &t.eps_list)?;
        }
        self.params.validate().map_err(|e| invalid("params", e.to_string()))?;
        if let Some(g) = &self.grid {
            if g.axes.is_empty() {
                return Err(invalid("grid.axes", "at least one axis is required"));
            }
            if matches!(self.model, Some(Model::Kzk) | Some(Model::Npe)) {
                let last = g.axes.last().unwrap();
                if (last.length - self.params.period).abs() > 1e-12 * self.params.period {
                    return Err(invalid("grid.axes", format!("last axis `{}` must span params.period = {}", last.name, self.params.period)));
                }
            }
        }
        if self.initial.profile == Profile::Snapshot && self.initial.path.is_none() {
            return Err(invalid("initial.path", "snapshot profile needs a path"));
        }
        if let Some(m) = &self.march {
            if !(m.step > 0.0) || !(m.end > 0.0) || m.store_every == 0 {
                return Err(invalid("march", "end and step must be positive and store_every ≥ 1"));
            }
        }
        Ok(())
    }
}

/// Parses and validates a config file; `[params]` keys that are absent are taken from `preset`.
pub fn load_config(path: impl AsRef<Path>, preset: Preset) -> Result<SimulationConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    parse_config(&text, preset)
}

pub fn parse_config(text: &str, preset: Preset) -> Result<SimulationConfig, ConfigError> {
    // Deserialise the text as written so errors point at the user's lines.
    let mut cfg: SimulationConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    let given = match table.get("params") {
        Some(toml::Value::Table(t)) => t.keys().cloned().collect(),
        _ => Vec::new(),
    };
    let base = preset.params();
    let p = &mut cfg.params;
    for (key, slot, value) in [
        ("rho0", &mut p.rho0, base.rho0),
        ("c", &mut p.c, base.c),
        ("gamma", &mut p.gamma, base.gamma),
        ("nu", &mut p.nu, base.nu),
        ("eps", &mut p.eps, base.eps),
        ("period", &mut p.period, base.period),
    ] {
        if !given.iter().any(|k| k == key) {
            *slot = value;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config("model = \"kzk\"\n", Preset::Nondim).unwrap();
        assert_eq!(cfg.params, ModelParams::nondim(0.1));
        assert_eq!(cfg.initial, InitialSpec::default());
        assert_eq!(cfg.hydro, HydroBlock::default());
    }

    #[test]
    fn preset_fills_missing_params_only() {
        let cfg = parse_config("[params]\nnu = 0.001\n", Preset::Water).unwrap();
        assert_eq!(cfg.params.c, 1500.0);
        assert_eq!(cfg.params.nu, 0.001);
    }

    #[test]
    fn digest_ignores_formatting() {
        let a = parse_config("[params]\neps = 0.05\n", Preset::Nondim).unwrap();
        let b = parse_config("# comment\n[params]\neps   =   5e-2\n", Preset::Nondim).unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = parse_config("[params]\neps = 0.06\n", Preset::Nondim).unwrap();
        assert_ne!(a.digest(), c.digest());
    }
}
