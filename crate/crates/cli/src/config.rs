//! Run configuration: one JSON document, every field optional, with command
//! line flags layered on top. The resolved document is written back into each
//! run's manifest, so `--config manifest.json` replays a run.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use plateau_core::asymptotic::{gamma_star, Quadrature};
use plateau_core::energy::{EnergyParams, DEFAULT_LENGTH_CONSTRAINT};
use plateau_core::optimizer::MinimizeOptions;
use plateau_core::sweep::{MeshSpec, SweepSchedule};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    pub energy: EnergyConfig,
    pub minimize: MinimizeOptions,
    pub sweep: SweepConfig,
    pub stability: StabilityConfig,
    pub asymptotic: AsymptoticConfig,
    pub fit: FitConfig,
    /// Base seed: the relax perturbation, and point i of a sweep uses `seed + i`.
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mesh: MeshConfig::default(),
            energy: EnergyConfig::default(),
            minimize: MinimizeOptions::default(),
            sweep: SweepConfig::default(),
            stability: StabilityConfig::default(),
            asymptotic: AsymptoticConfig::default(),
            fit: FitConfig::default(),
            seed: 0,
            jobs: 1,
            out: PathBuf::from("plateau-run"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub rings: usize,
    pub elongation: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            rings: 16,
            elongation: 1.0,
        }
    }
}

/// Dimensionless energy parameters (α = 1, L = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub k_l3_over_alpha: f64,
    /// `uniform`, `global` or `per-edge`.
    pub length_constraint: String,
    /// Initial penalty stiffness; the built-in default when absent.
    pub length_penalty_k: Option<f64>,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            k_l3_over_alpha: 100.0,
            length_constraint: DEFAULT_LENGTH_CONSTRAINT.into(),
            length_penalty_k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
    /// Explicit kL³/α values; overrides start/end/steps.
    pub values: Option<Vec<f64>>,
    pub warm_start: bool,
    pub descending: bool,
    /// Write one OBJ per point.
    pub meshes: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            start: 300.0,
            end: 1200.0,
            steps: 91,
            values: None,
            warm_start: true,
            descending: false,
            meshes: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub max_mode: u32,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self { max_mode: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticConfig {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub steps: usize,
    /// Rings of the hex disk the family meshes are sampled on.
    pub mesh_rings: usize,
    pub quadrature: Quadrature,
}

impl Default for AsymptoticConfig {
    fn default() -> Self {
        Self {
            gamma_min: gamma_star(),
            gamma_max: 2.0 * gamma_star(),
            steps: 11,
            mesh_rings: 12,
            quadrature: Quadrature::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub diagram: Option<PathBuf>,
    /// Starting estimate of γ_c; the twist onset of the diagram when absent.
    pub gamma_c: Option<f64>,
}

impl RunConfig {
    /// Reads a config file, or the `config` member of a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
        serde_json::from_value(value).with_context(|| format!("invalid config in {}", path.display()))
    }

    pub fn energy_params(&self, k_l3_over_alpha: f64) -> EnergyParams {
        let mut p = EnergyParams::dimensionless(k_l3_over_alpha);
        p.length_constraint = self.energy.length_constraint.clone();
        if let Some(k) = self.energy.length_penalty_k {
            p.length_penalty_k = k;
        }
        p
    }

    pub fn minimize_options(&self) -> MinimizeOptions {
        MinimizeOptions {
            rng_seed: self.seed,
            ..self.minimize.clone()
        }
    }

    pub fn schedule(&self) -> SweepSchedule {
        let s = &self.sweep;
        let values = s
            .values
            .clone()
            .unwrap_or_else(|| SweepSchedule::linspace(s.start, s.end, s.steps));
        let mut schedule = SweepSchedule::new(
            values,
            MeshSpec {
                rings: self.mesh.rings,
                elongation: self.mesh.elongation,
            },
            self.seed,
            self.minimize.clone(),
        );
        schedule.warm_start = s.warm_start;
        schedule.descending = s.descending;
        schedule.length_constraint = self.energy.length_constraint.clone();
        schedule
    }
}
