//! Run configuration, read from TOML with every field defaulted.

use std::path::{Path, PathBuf};

use repeller_core::maps::{MapKind, PiecewiseSpec};
use repeller_core::orbits::{lyapunov_estimates, typical_orbit, BURN_IN};
use repeller_core::pipeline::PipelineParams;
use repeller_core::repeller::VerifyParams;
use repeller_core::tempering::check_epsilon;
use repeller_core::{MapSystem, Potential};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Orbit length used for the load-time estimate of `chi`.
pub const CHI_PROBE_LEN: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSection {
    /// Builtin name such as `doubling`, `gauss:50` or `quadratic:1.9`; ignored when `custom` is set.
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub custom: Option<PiecewiseSpec>,
}

impl Default for MapSection {
    fn default() -> Self {
        Self { name: "doubling".into(), custom: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitSection {
    pub x0: f64,
    pub length: usize,
    pub seed: u64,
    pub burn_in: usize,
}

impl Default for OrbitSection {
    fn default() -> Self {
        Self { x0: 0.123456789, length: 200_000, seed: 1, burn_in: BURN_IN }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    /// Overrides the orbit estimate of `chi` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    pub eps: f64,
    pub delta: f64,
    pub depth: usize,
    pub windows: usize,
    pub n: usize,
    pub drift_threshold: f64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let p = PipelineParams::default();
        Self {
            chi: None,
            eps: p.eps,
            delta: p.delta,
            depth: p.depth,
            windows: p.windows,
            n: p.n,
            drift_threshold: p.drift_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropySection {
    pub pool: usize,
    pub n_grid: Vec<usize>,
    pub eps_grid: Vec<f64>,
}

impl Default for EntropySection {
    fn default() -> Self {
        let p = PipelineParams::default();
        Self { pool: p.entropy_pool, n_grid: p.n_grid, eps_grid: p.eps_grid }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSection {
    pub catalog: Vec<String>,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self { catalog: vec!["coordinate".into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapSection {
    pub word_cap: usize,
    pub pressure_k: usize,
    pub max_word_len: usize,
    pub oscillation_grid: usize,
    pub tail_n_max: usize,
    pub recurrence_windows: usize,
    pub running_mean_stride: usize,
}

impl Default for CapSection {
    fn default() -> Self {
        let v = VerifyParams::default();
        Self {
            word_cap: v.word_cap,
            pressure_k: v.pressure_k,
            max_word_len: v.max_word_len,
            oscillation_grid: v.oscillation_grid,
            tail_n_max: 20,
            recurrence_windows: 10,
            running_mean_stride: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub map: MapSection,
    pub orbit: OrbitSection,
    pub pipeline: PipelineSection,
    pub entropy: EntropySection,
    pub potentials: PotentialSection,
    pub caps: CapSection,
    pub output: OutputSection,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn map_system(&self) -> Result<MapSystem, CliError> {
        let map = match &self.map.custom {
            Some(spec) => MapSystem::new(MapKind::Piecewise(spec.clone())),
            None => MapSystem::from_name(&self.map.name),
        };
        map.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn potentials(&self) -> Result<Vec<Potential>, CliError> {
        self.potentials
            .catalog
            .iter()
            .map(|s| Potential::parse(s).map_err(|e| CliError::Config(e.to_string())))
            .collect()
    }

    /// Structural checks that need no orbit.
    pub fn check_shape(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.entropy.n_grid.is_empty() || self.entropy.eps_grid.is_empty() {
            return bad("entropy grids must be non-empty");
        }
        if self.entropy.n_grid.contains(&0) || self.entropy.eps_grid.iter().any(|&e| !(e > 0.0)) {
            return bad("entropy grids need n >= 1 and eps > 0");
        }
        if self.potentials.catalog.is_empty() {
            return bad("potential catalog must be non-empty");
        }
        if !(self.pipeline.delta > 0.0 && self.pipeline.delta < 0.5) {
            return bad("delta must lie in (0, 1/2)");
        }
        if self.pipeline.n == 0 || self.pipeline.windows == 0 || self.orbit.length == 0 {
            return bad("n, windows and orbit length must be positive");
        }
        if self.caps.pressure_k == 0 || self.caps.max_word_len == 0 || self.caps.word_cap == 0 {
            return bad("word caps must be positive");
        }
        self.map_system()?;
        self.potentials()?;
        Ok(())
    }

    /// `chi` from the config or from a short orbit, then `0 < eps < chi / 3`.
    pub fn validate(&self) -> Result<f64, CliError> {
        self.check_shape()?;
        let chi = match self.pipeline.chi {
            Some(chi) => chi,
            None => {
                let map = self.map_system()?;
                let len = CHI_PROBE_LEN.min(self.orbit.length);
                let orbit = typical_orbit(&map, self.orbit.x0, len, self.orbit.seed, self.orbit.burn_in)?;
                lyapunov_estimates(&map, &orbit)?.chi_lower
            }
        };
        check_epsilon(chi, self.pipeline.eps).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(chi)
    }

    pub fn pipeline_params(&self) -> Result<PipelineParams, CliError> {
        Ok(PipelineParams {
            x0: self.orbit.x0,
            seed: self.orbit.seed,
            orbit_len: self.orbit.length,
            burn_in: self.orbit.burn_in,
            eps: self.pipeline.eps,
            delta: self.pipeline.delta,
            depth: self.pipeline.depth,
            windows: self.pipeline.windows,
            n: self.pipeline.n,
            potentials: self.potentials()?,
            entropy_pool: self.entropy.pool,
            n_grid: self.entropy.n_grid.clone(),
            eps_grid: self.entropy.eps_grid.clone(),
            drift_threshold: self.pipeline.drift_threshold,
            verify: self.verify_params(),
        })
    }

    pub fn verify_params(&self) -> VerifyParams {
        VerifyParams {
            pressure_k: self.caps.pressure_k,
            max_word_len: self.caps.max_word_len,
            word_cap: self.caps.word_cap,
            seed: self.orbit.seed,
            oscillation_grid: self.caps.oscillation_grid,
        }
    }
}
