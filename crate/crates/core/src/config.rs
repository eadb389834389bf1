//! Experiment configuration.
//!
//! Configs are TOML on disk. The semantic fields (arms, player count,
//! horizon, collision model, policy block) are hashed into a digest that is
//! stamped on every trace, so artifacts can be traced back to exactly the
//! experiment that produced them; presentation fields (seeds, output
//! directory, report cadence) stay out of the digest.

use crate::arm::{ArmError, ArmModel, PassiveMode};
use crate::env::CollisionModel;
use crate::policy::{
    CoordinationMode, FKind, ParamMode, PolicyError, DEFAULT_D_EXPONENT, DEFAULT_L_EXPONENT,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config at `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("invalid config at `arms[{index}]`: {source}")]
    Arm { index: usize, source: ArmError },
    #[error("invalid config at `policy.params`: {source}")]
    Policy { source: PolicyError },
}

/// One arm as written in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub states: Vec<f64>,
    pub kernel: Vec<Vec<f64>>,
    pub passive_mode: PassiveMode,
    /// Fixed starting state index; absent means a stationary draw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<usize>,
}

impl ArmSpec {
    pub fn build(&self) -> Result<ArmModel, ArmError> {
        let arm = ArmModel::new(self.states.clone(), self.kernel.clone(), self.passive_mode)?;
        match self.initial_state {
            Some(i) => arm.with_initial_state(i),
            None => Ok(arm),
        }
    }
}

/// Policy parameter block: fixed (L, D) or an adaptive schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSpec {
    Fixed {
        #[serde(rename = "L")]
        l: f64,
        #[serde(rename = "D")]
        d: f64,
    },
    Adaptive {
        f: FKind,
        #[serde(default = "default_d_exponent")]
        a: f64,
        #[serde(default = "default_l_exponent")]
        b: f64,
    },
}

fn default_d_exponent() -> f64 {
    DEFAULT_D_EXPONENT
}

fn default_l_exponent() -> f64 {
    DEFAULT_L_EXPONENT
}

impl ParamSpec {
    pub fn mode(&self) -> ParamMode {
        match *self {
            ParamSpec::Fixed { l, d } => ParamMode::Fixed { l, d },
            ParamSpec::Adaptive { f, a, b } => ParamMode::Adaptive {
                f,
                d_exponent: a,
                l_exponent: b,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub mode: CoordinationMode,
    pub params: ParamSpec,
}

/// Explicit seed list, or a count expanded to base..base+count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Count {
        count: u32,
        #[serde(default)]
        base: u64,
    },
}

impl SeedSpec {
    pub fn expand(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Count { count, base } => (0..*count as u64).map(|i| base + i).collect(),
        }
    }
}

/// Which slots land in the regret-series report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReportCadence {
    /// Every epoch boundary plus powers of two (log-spaced, default).
    #[default]
    EpochAndPowersOfTwo,
    EverySlot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub arms: Vec<ArmSpec>,
    /// M, the number of players.
    pub players: usize,
    pub horizon: u64,
    pub collision_model: CollisionModel,
    pub policy: PolicySpec,
    pub seeds: SeedSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub report_cadence: ReportCadence,
}

/// The digest covers exactly the fields that change what a run computes.
#[derive(Serialize)]
struct SemanticView<'a> {
    arms: &'a [ArmSpec],
    players: usize,
    horizon: u64,
    collision_model: CollisionModel,
    policy: &'a PolicySpec,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.arms.len();
        if n == 0 {
            return Err(invalid("arms", "at least one arm is required"));
        }
        if n > u16::MAX as usize {
            return Err(invalid("arms", "too many arms (max 65535)"));
        }
        if self.players < 1 {
            return Err(invalid("players", "at least one player is required"));
        }
        if self.players > n {
            return Err(invalid(
                "players",
                &format!("{} players but only {} arms (M <= N required)", self.players, n),
            ));
        }
        if self.players > u8::MAX as usize {
            return Err(invalid("players", "too many players (max 255)"));
        }
        if self.horizon < n as u64 {
            return Err(invalid(
                "horizon",
                &format!(
                    "horizon {} shorter than the first exploration epoch ({n} slots)",
                    self.horizon
                ),
            ));
        }
        if self.seeds.expand().is_empty() {
            return Err(invalid("seeds", "seed set is empty"));
        }
        for (index, spec) in self.arms.iter().enumerate() {
            spec.build().map_err(|source| ConfigError::Arm { index, source })?;
        }
        self.policy
            .params
            .mode()
            .validate()
            .map_err(|source| ConfigError::Policy { source })?;
        if let ParamSpec::Adaptive { f, .. } = self.policy.params {
            // probe the schedule function at log-spaced slots
            let probes = (1..63)
                .map(|i| 1u64 << i)
                .take_while(|&p| p <= self.horizon)
                .chain([self.horizon]);
            crate::policy::validate_increasing(|t| f.eval(t), probes)
                .map_err(|source| ConfigError::Policy { source })?;
        }
        Ok(())
    }

    pub fn build_arms(&self) -> Result<Vec<ArmModel>, ConfigError> {
        self.arms
            .iter()
            .enumerate()
            .map(|(index, spec)| spec.build().map_err(|source| ConfigError::Arm { index, source }))
            .collect()
    }

    pub fn seed_list(&self) -> Vec<u64> {
        self.seeds.expand()
    }

    /// SHA-256 over the canonical JSON encoding of the semantic fields.
    pub fn digest(&self) -> String {
        let view = SemanticView {
            arms: &self.arms,
            players: self.players,
            horizon: self.horizon,
            collision_model: self.collision_model,
            policy: &self.policy,
        };
        let canonical = serde_json::to_vec(&view).expect("config serializes");
        let hash = Sha256::digest(&canonical);
        let mut out = String::with_capacity(64);
        for byte in hash {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

fn invalid(path: &str, message: &str) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_string(),
        message: message.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
