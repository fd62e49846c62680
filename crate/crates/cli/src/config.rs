use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hydrarm_core::excitation::{BoundaryMode, DEFAULT_HARMONICS, DEFAULT_KAPPA_SAMPLES, DEFAULT_OMEGA_F};
use hydrarm_core::friction::Estimator;
use hydrarm_core::hydraulic::{CylinderExperiment, CylinderParams};
use hydrarm_core::model::{load_model, ModelConfig, RobotModel};
use hydrarm_core::pipeline::{DEFAULT_RATE_HZ, DEFAULT_TORQUE_NOISE};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_BUDGET: usize = 1000;
pub const MIN_BUDGET: usize = 100;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CylinderConfig {
    pub experiment: CylinderExperiment,
    /// One entry per joint; the shipped testbed values when absent.
    pub params: Option<Vec<CylinderParams>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub omega_f: f64,
    pub n_h: usize,
    pub budget: usize,
    pub boundary: BoundaryMode,
    pub kappa_samples: usize,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            omega_f: DEFAULT_OMEGA_F,
            n_h: DEFAULT_HARMONICS,
            budget: DEFAULT_BUDGET,
            boundary: BoundaryMode::default(),
            kappa_samples: DEFAULT_KAPPA_SAMPLES,
        }
    }
}

/// Everything a command may read from `--config`. Missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Model document, relative to the config file.
    pub model: Option<PathBuf>,
    /// Sampling rate of the arm dataset, Hz.
    pub rate_hz: f64,
    /// Torque noise standard deviation, N·m.
    pub torque_noise: f64,
    pub friction_estimator: Estimator,
    pub cylinder: CylinderConfig,
    pub trajectory: TrajectoryConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: None,
            rate_hz: DEFAULT_RATE_HZ,
            torque_noise: DEFAULT_TORQUE_NOISE,
            friction_estimator: Estimator::Batch,
            cylinder: CylinderConfig::default(),
            trajectory: TrajectoryConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(m) = &cfg.model {
            if m.is_relative() {
                cfg.model = Some(path.parent().unwrap_or(Path::new(".")).join(m));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            bail!("rate_hz must be positive, got {}", self.rate_hz);
        }
        if !(self.torque_noise >= 0.0 && self.torque_noise.is_finite()) {
            bail!("torque_noise must be nonnegative, got {}", self.torque_noise);
        }
        if let Some(m) = &self.model {
            if !m.exists() {
                bail!("model file {} does not exist", m.display());
            }
        }
        if let Some(p) = &self.cylinder.params {
            if p.len() != 6 {
                bail!("cylinder.params needs 6 entries, found {}", p.len());
            }
            for (j, c) in p.iter().enumerate() {
                c.validate().with_context(|| format!("cylinder {}", j + 1))?;
            }
        }
        Ok(())
    }

    pub fn robot_model(&self) -> Result<RobotModel> {
        match &self.model {
            None => Ok(RobotModel::default_arm()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading model {}", p.display()))?;
                Ok(load_model(&text).with_context(|| format!("loading model {}", p.display()))?)
            }
        }
    }

    pub fn cylinder_params(&self, joint: usize) -> CylinderParams {
        match &self.cylinder.params {
            Some(p) => p[joint],
            None => CylinderParams::for_joint(joint),
        }
    }

    /// SHA-256 over the effective settings of one command. The model enters
    /// by content, so moving files around does not change it.
    pub fn fingerprint(&self, command: &str, seed: u64, extra: &serde_json::Value) -> Result<String> {
        #[derive(Serialize)]
        struct Effective<'a> {
            command: &'a str,
            seed: u64,
            config: RunConfig,
            model: ModelConfig,
            options: &'a serde_json::Value,
        }
        let mut config = self.clone();
        config.model = None;
        let doc = Effective {
            command,
            seed,
            config,
            model: ModelConfig::from_model(&self.robot_model()?),
            options: extra,
        };
        let bytes = serde_json::to_vec(&doc)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}
