//! Seed sweeps.
//!
//! A run is strictly single-threaded; the sweep fans independent seeds out
//! across threads when the `parallel` feature is on (the default) and falls
//! back to a plain sequential loop otherwise. Results come back in seed
//! order either way, so the two paths are interchangeable.

use crate::analysis::{
    d_threshold, l_threshold, lemma1_constant, AnalysisError, SystemParams,
};
use crate::arm::ArmModel;
use crate::config::{ConfigError, ExperimentConfig, ParamSpec};
use crate::env::{run, EnvError, SimulationTrace};
use crate::policy::{EpochRecord, Feedback, PlayerState};
use rand::SeedableRng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// Everything a single seeded run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub trace: SimulationTrace,
    /// Per-player schedule audit logs (index player - 1).
    pub epoch_logs: Vec<Vec<EpochRecord>>,
}

pub fn build_players(cfg: &ExperimentConfig) -> Result<Vec<PlayerState>, RunnerError> {
    let mode = cfg.policy.params.mode();
    (1..=cfg.players)
        .map(|k| {
            PlayerState::new(k, cfg.players, cfg.arms.len(), cfg.policy.mode, mode).map_err(
                |source| {
                    RunnerError::Env(EnvError::Policy {
                        player: k,
                        source,
                    })
                },
            )
        })
        .collect()
}

pub fn run_single(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutcome, RunnerError> {
    let mut arms = cfg.build_arms()?;
    let mut players = build_players(cfg)?;
    let digest = cfg.digest();
    let trace = run(
        &mut arms,
        &mut players,
        cfg.horizon,
        cfg.collision_model,
        seed,
        &digest,
    )?;
    Ok(RunOutcome {
        seed,
        trace,
        epoch_logs: players.iter().map(|p| p.epoch_log().to_vec()).collect(),
    })
}

/// Run every seed and reduce each outcome to `R` as soon as it finishes, so
/// full traces never pile up in memory. Parallel across seeds with the
/// `parallel` feature; output order always matches `seeds`.
#[cfg(feature = "parallel")]
pub fn sweep_map<R, F>(cfg: &ExperimentConfig, seeds: &[u64], f: F) -> Result<Vec<R>, RunnerError>
where
    R: Send,
    F: Fn(RunOutcome) -> Result<R, RunnerError> + Sync,
{
    use rayon::prelude::*;
    seeds
        .par_iter()
        .map(|&seed| run_single(cfg, seed).and_then(&f))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn sweep_map<R, F>(cfg: &ExperimentConfig, seeds: &[u64], f: F) -> Result<Vec<R>, RunnerError>
where
    R: Send,
    F: Fn(RunOutcome) -> Result<R, RunnerError> + Sync,
{
    sweep_map_sequential(cfg, seeds, f)
}

/// The sequential reference path; the benchmark suite compares this against
/// [`sweep_map`].
pub fn sweep_map_sequential<R, F>(
    cfg: &ExperimentConfig,
    seeds: &[u64],
    f: F,
) -> Result<Vec<R>, RunnerError>
where
    F: Fn(RunOutcome) -> Result<R, RunnerError> + Sync,
{
    seeds
        .iter()
        .map(|&seed| run_single(cfg, seed).and_then(&f))
        .collect()
}

/// Run the configured seed set and keep the full outcomes.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<RunOutcome>, RunnerError> {
    sweep_map(cfg, &cfg.seed_list(), Ok)
}

/// The epoch schedule is a pure function of (D schedule, N, M, t): drive a
/// solo player on synthetic observations to read it off without simulating
/// any arms. Every player of every seeded run produces this same log.
pub fn schedule_log(
    cfg: &ExperimentConfig,
    horizon: u64,
) -> Result<Vec<EpochRecord>, RunnerError> {
    let wrap = |source| RunnerError::Env(EnvError::Policy { player: 1, source });
    let mut player = PlayerState::new(
        1,
        cfg.players,
        cfg.arms.len(),
        cfg.policy.mode,
        cfg.policy.params.mode(),
    )
    .map_err(wrap)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut fb: Option<Feedback> = None;
    for t in 1..=horizon {
        let arm = player.step(t, fb.as_ref(), &mut rng).map_err(wrap)?;
        fb = Some(Feedback {
            arm,
            state: 1.0,
            collision: false,
        });
    }
    Ok(player.epoch_log().to_vec())
}

// ---------------------------------------------------------------------------
// Parameter derivation
// ---------------------------------------------------------------------------

/// Theorem-style thresholds next to whatever the config asks for.
#[derive(Debug, Clone, Serialize)]
pub struct ParamReport {
    pub l_threshold: f64,
    pub d_threshold: f64,
    /// Configured fixed values, absent in adaptive mode.
    pub configured_l: Option<f64>,
    pub configured_d: Option<f64>,
    pub l_valid: Option<bool>,
    pub d_valid: Option<bool>,
    /// True when fixed and both valid: bound comparisons are guarantees,
    /// not just reference lines.
    pub binding: bool,
    pub lemma1_constant: f64,
    pub system: SystemParams,
}

/// Compute the thresholds for the configured system and flag the configured
/// parameters against them. Runs proceed even with invalid (practical-mode)
/// parameters; only the bound guarantees lapse.
pub fn derive_params(cfg: &ExperimentConfig) -> Result<ParamReport, RunnerError> {
    let arms = cfg.build_arms()?;
    derive_params_for(&arms, cfg.players, &cfg.policy.params)
}

pub fn derive_params_for(
    arms: &[ArmModel],
    players: usize,
    params: &ParamSpec,
) -> Result<ParamReport, RunnerError> {
    let system = SystemParams::from_arms(arms, players)?;
    let l_thr = l_threshold(&system)?;
    let d_thr = d_threshold(l_thr, &system)?;
    let (configured_l, configured_d) = match *params {
        ParamSpec::Fixed { l, d } => (Some(l), Some(d)),
        ParamSpec::Adaptive { .. } => (None, None),
    };
    let l_valid = configured_l.map(|l| l >= l_thr);
    // the D condition is relative to the configured L, not the threshold L
    let d_valid = match (configured_l, configured_d) {
        (Some(l), Some(d)) => Some(d >= d_threshold(l, &system)?),
        _ => None,
    };
    let binding = l_valid == Some(true) && d_valid == Some(true);
    Ok(ParamReport {
        l_threshold: l_thr,
        d_threshold: d_thr,
        configured_l,
        configured_d,
        l_valid,
        d_valid,
        binding,
        lemma1_constant: lemma1_constant(arms),
        system,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
