//! Versioned experiment configuration and its content hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::potentials::{ModelError, ModelParams};

pub const SCHEMA_VERSION: u32 = 1;

/// Relative distance from `sqrt(n)` within which `theta` is read as the degenerate tilt.
pub const DEGENERATE_SNAP: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config schema version {found} is not supported (expected {expected})")]
    Schema { found: u32, expected: u32 },
    #[error("simulation commands need an even lattice size, got n = {0}")]
    OddLattice(usize),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Acceptance tolerances, one entry per checked quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceTable {
    pub oracle_tv: f64,
    pub oracle_runtime_secs: f64,
    pub degenerate_tv: f64,
    pub degenerate_entropy: f64,
    pub detailed_balance: f64,
    pub w_derivatives: f64,
    pub w_quartic_min: f64,
    pub miclo_slope_low: f64,
    pub miclo_slope_high: f64,
    pub miclo_spread: f64,
    pub miclo_runtime_secs: f64,
    pub gap_spread: f64,
    pub gap_miclo_factor: f64,
    pub limit_z: f64,
    pub limit_moment: f64,
    pub bd_variance: f64,
    pub main_ks: f64,
    pub main_min_ess: f64,
    pub main_runtime_secs: f64,
    pub field_variance_rel: f64,
    pub field_cross_half_widths: f64,
    pub field_runtime_secs: f64,
    pub projection_ratio_low: f64,
    pub projection_ratio_high: f64,
    pub sde_ks: f64,
    pub lsi_spread: f64,
    pub stirling_low: f64,
    pub stirling_high: f64,
    pub stirling_spread: f64,
}

impl Default for ToleranceTable {
    fn default() -> Self {
        Self {
            oracle_tv: 0.01,
            oracle_runtime_secs: 300.0,
            degenerate_tv: 1e-10,
            degenerate_entropy: 1e-10,
            detailed_balance: 1e-9,
            w_derivatives: 1e-8,
            w_quartic_min: 0.0,
            miclo_slope_low: 0.4,
            miclo_slope_high: 0.6,
            miclo_spread: 3.0,
            miclo_runtime_secs: 120.0,
            gap_spread: 2.0,
            gap_miclo_factor: 40.0,
            limit_z: 1e-6,
            limit_moment: 1e-6,
            bd_variance: 0.02,
            main_ks: 0.08,
            main_min_ess: 2e4,
            main_runtime_secs: 900.0,
            field_variance_rel: 0.10,
            field_cross_half_widths: 3.0,
            field_runtime_secs: 1200.0,
            projection_ratio_low: 0.5,
            projection_ratio_high: 0.9,
            sde_ks: 0.01,
            lsi_spread: 2.0,
            stirling_low: 0.35,
            stirling_high: 0.45,
            stirling_spread: 1.2,
        }
    }
}

/// Parameters of a single subcommand run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub n: usize,
    pub theta: f64,
    pub replicas: usize,
    /// Generator time; `None` means `10 sqrt(n)`.
    pub burn_in: Option<f64>,
    pub samples: usize,
    /// Generator time; `None` means `sqrt(n) / 2`.
    pub sample_interval: Option<f64>,
    /// Recorded test functions, e.g. `cos1`, `sin2`.
    pub modes: Vec<String>,
    pub max_events: f64,
    pub sde_time: f64,
    pub sde_dt: f64,
    pub sde_paths: usize,
    pub resamples: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            n: 64,
            theta: 0.0,
            replicas: 4,
            burn_in: None,
            samples: 1000,
            sample_interval: None,
            modes: vec!["cos1".into(), "sin1".into(), "cos2".into(), "sin2".into()],
            max_events: 1e13,
            sde_time: 5.0,
            sde_dt: 1e-3,
            sde_paths: 100_000,
            resamples: 400,
        }
    }
}

/// One stationary-simulation setting inside the suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeRun {
    pub n: usize,
    pub replicas: usize,
    pub burn_in: f64,
    pub samples: usize,
    pub sample_interval: f64,
}

/// Per-criterion settings of the full acceptance suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSettings {
    pub oracle: LatticeRun,
    pub degenerate_n: usize,
    pub detailed_balance_n: Vec<usize>,
    pub theta_grid: Vec<f64>,
    pub w_n: Vec<usize>,
    pub w_grid_points: usize,
    pub miclo_log2_n: (u32, u32),
    pub gap_log2_n: (u32, u32),
    pub bd_variance_n: usize,
    /// Criterion 9 runs; the first and last also feed criterion 11.
    pub main_runs: Vec<LatticeRun>,
    pub field_run: LatticeRun,
    pub field_wavenumbers: Vec<u32>,
    pub sde_time: f64,
    pub sde_dt: f64,
    pub sde_paths: usize,
    pub lsi_n: Vec<usize>,
    pub lsi_densities: usize,
    pub stirling_n: usize,
    pub resamples: usize,
    pub max_events: f64,
}

impl Default for SuiteSettings {
    fn default() -> Self {
        Self {
            oracle: LatticeRun {
                n: 10,
                replicas: 8,
                burn_in: 100.0,
                samples: 125_000,
                sample_interval: 16.0,
            },
            degenerate_n: 8,
            detailed_balance_n: vec![16, 1024, 65536],
            theta_grid: vec![-1.0, 0.0, 1.0],
            w_n: vec![16, 256, 4096],
            w_grid_points: 10_000,
            miclo_log2_n: (8, 18),
            gap_log2_n: (8, 14),
            bd_variance_n: 1 << 16,
            main_runs: vec![
                LatticeRun {
                    n: 64,
                    replicas: 1,
                    burn_in: 400.0,
                    samples: 9_000,
                    sample_interval: 20.0,
                },
                LatticeRun {
                    n: 128,
                    replicas: 1,
                    burn_in: 600.0,
                    samples: 2_250,
                    sample_interval: 20.0,
                },
                LatticeRun {
                    n: 256,
                    replicas: 1,
                    burn_in: 800.0,
                    samples: 600,
                    sample_interval: 20.0,
                },
            ],
            field_run: LatticeRun {
                n: 512,
                replicas: 1,
                burn_in: 20.0,
                samples: 10_000,
                sample_interval: 0.25,
            },
            field_wavenumbers: vec![1, 2],
            sde_time: 5.0,
            sde_dt: 1e-3,
            sde_paths: 100_000,
            lsi_n: vec![8, 10],
            lsi_densities: 100,
            stirling_n: 4096,
            resamples: 400,
            max_events: 1e13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub a: f64,
    /// Worker threads; `None` uses available parallelism. Results do not depend on it.
    pub workers: Option<usize>,
    pub out_dir: PathBuf,
    pub run: RunSettings,
    pub suite: SuiteSettings,
    pub tolerances: ToleranceTable,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 20_240_601,
            a: 0.1,
            workers: None,
            out_dir: PathBuf::from("out"),
            run: RunSettings::default(),
            suite: SuiteSettings::default(),
            tolerances: ToleranceTable::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Schema {
                found: self.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(ModelError::NonPositiveStrength(self.a).into());
        }
        let s = &self.suite;
        for run in s.main_runs.iter().chain([&s.oracle, &s.field_run]) {
            if run.n % 2 == 1 {
                return Err(ConfigError::OddLattice(run.n));
            }
            if run.replicas == 0 || run.samples == 0 {
                return Err(ConfigError::Invalid(format!("empty lattice run at n = {}", run.n)));
            }
        }
        if s.main_runs.len() < 2 {
            return Err(ConfigError::Invalid("main_runs needs at least two lattice sizes".into()));
        }
        if s.miclo_log2_n.0 > s.miclo_log2_n.1 || s.gap_log2_n.0 > s.gap_log2_n.1 {
            return Err(ConfigError::Invalid("empty n range".into()));
        }
        if self.run.replicas == 0 || self.run.samples == 0 {
            return Err(ConfigError::Invalid("run needs replicas and samples".into()));
        }
        Ok(())
    }

    /// Model parameters for the single-run settings; `theta` within
    /// `DEGENERATE_SNAP` (relative) of `sqrt(n)` selects `gamma = 0` exactly.
    pub fn run_params(&self) -> Result<ModelParams, ConfigError> {
        model_params(self.run.n, self.run.theta, self.a)
    }

    /// Lowercase hex SHA-256 of the compact JSON serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn model_params(n: usize, theta: f64, a: f64) -> Result<ModelParams, ConfigError> {
    let root = (n as f64).sqrt();
    if (theta - root).abs() <= DEGENERATE_SNAP * root {
        Ok(ModelParams::untilted(n, a)?)
    } else {
        Ok(ModelParams::new(n, theta, a)?)
    }
}

pub fn require_even(n: usize) -> Result<(), ConfigError> {
    if n % 2 == 1 {
        Err(ConfigError::OddLattice(n))
    } else {
        Ok(())
    }
}
