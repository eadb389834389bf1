//! Artifact output: trace CSV, regret-series CSV, and the JSON summaries.
//!
//! Files carry no timestamps, so re-running the same (config, seeds) pair
//! reproduces them byte for byte.

use crate::analysis::{
    epoch_end_slots, exploitation_count_bound, measured_regret, regret_bound_shared,
    regret_bound_zero, regret_kind, report_times, RegretKind, RegretSeries,
};
use crate::config::{ExperimentConfig, ParamSpec, ReportCadence};
use crate::env::{CollisionModel, SimulationTrace};
use crate::policy::{EpochKind, EpochRecord};
use crate::runner::{derive_params, sweep_map, ParamReport, RunOutcome, RunnerError};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Per-slot, per-player rows: `t,player,arm,state,collision,player_reward`.
pub fn write_trace_csv(trace: &SimulationTrace, path: &Path) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "t,player,arm,state,collision,player_reward")?;
    for t in 1..=trace.len() {
        for player in 1..=trace.num_players() {
            let arm = trace.choice(t, player);
            writeln!(
                out,
                "{t},{player},{arm},{},{},{}",
                trace.arm_state(t, arm),
                u8::from(trace.occupancy(t, arm) >= 2),
                trace.player_reward(t, player),
            )?;
        }
    }
    out.flush()
}

/// Regret series rows: `t,regret,regret_over_ln_t,epoch_end,bound`.
/// The ln-normalised column is empty at t = 1 and the bound column is empty
/// wherever the bound is undefined or not computed.
pub fn write_regret_csv(series: &RegretSeries, path: &Path) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "t,regret,regret_over_ln_t,epoch_end,bound")?;
    for i in 0..series.times.len() {
        let t = series.times[i];
        let over_ln = if t >= 2 {
            format!("{}", series.regret[i] / (t as f64).ln())
        } else {
            String::new()
        };
        let bound = series.bound[i].map_or(String::new(), |b| format!("{b}"));
        writeln!(
            out,
            "{t},{},{over_ln},{},{bound}",
            series.regret[i],
            u8::from(series.epoch_end[i]),
        )?;
    }
    out.flush()
}

// ---------------------------------------------------------------------------
// Experiment summary
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub total_reward: f64,
    pub final_regret: f64,
    pub per_player_reward: Vec<f64>,
    /// Arm-slots with two or more players, split by the epoch type the slot
    /// belongs to.
    pub exploration_collisions: u64,
    pub exploitation_collisions: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesPoint {
    pub t: u64,
    pub epoch_end: bool,
    pub regret_mean: f64,
    /// Half-width of the normal-approximation 95% interval on the mean.
    pub regret_ci95: f64,
    pub regret_over_ln_t: Option<f64>,
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub config_digest: String,
    pub collision_model: CollisionModel,
    pub regret_label: RegretKind,
    pub horizon: u64,
    pub n_seeds: usize,
    /// Bound lines are guarantees only when the parameter report is binding.
    pub bounds_binding: bool,
    /// Absent when threshold derivation is undefined for the system
    /// (M = N or tied stationary means); the sweep still runs.
    pub params: Option<ParamReport>,
    pub epoch_log: Vec<EpochRecord>,
    pub per_seed: Vec<SeedSummary>,
    pub series: Vec<SeriesPoint>,
}

/// Point report for `bounds`-style queries: both model bounds at one slot,
/// with measured statistics when runs are available.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub t: u64,
    pub bound_shared: f64,
    pub bound_zero: f64,
    pub measured_regret_mean: Option<f64>,
    pub measured_regret_ci95: Option<f64>,
    pub n_seeds: usize,
    pub binding: bool,
    /// Bounds are stated at epoch ends; anywhere else they are informational.
    pub epoch_end: Option<bool>,
}

pub fn bound_report(cfg: &ExperimentConfig, t: u64) -> Result<BoundReport, RunnerError> {
    let report = derive_params(cfg)?;
    let (l, d) = effective_params(&cfg.policy.params, t);
    let shared = regret_bound_shared(t, &report.system, l, d, report.lemma1_constant)?;
    let zero = regret_bound_zero(t, &report.system, l, d, report.lemma1_constant)?;
    let epoch_end = epoch_end_slots(&crate::runner::schedule_log(cfg, t)?, t)
        .binary_search(&t)
        .is_ok();
    Ok(BoundReport {
        t,
        bound_shared: shared,
        bound_zero: zero,
        measured_regret_mean: None,
        measured_regret_ci95: None,
        n_seeds: 0,
        binding: report.binding,
        epoch_end: Some(epoch_end),
    })
}

fn effective_params(params: &ParamSpec, t: u64) -> (f64, f64) {
    params.mode().at(t)
}

/// Everything `run_experiment` wrote.
#[derive(Debug, Clone)]
pub struct ExperimentArtifacts {
    pub summary_path: PathBuf,
    pub trace_paths: Vec<PathBuf>,
    pub regret_paths: Vec<PathBuf>,
}

struct SeedReduction {
    summary: SeedSummary,
    regret_at_times: Vec<f64>,
    trace_path: PathBuf,
    regret_path: PathBuf,
}

/// Run the configured seed sweep and write, per seed, the trace CSV and the
/// regret-series CSV, plus one aggregate JSON summary. Output is
/// deterministic for a fixed (config, seed set).
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<ExperimentArtifacts, RunnerError> {
    std::fs::create_dir_all(out_dir).map_err(|source| RunnerError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let params = derive_params_or_practical(cfg)?;
    let arms = cfg.build_arms()?;
    let label = regret_kind(&arms);
    let seeds = cfg.seed_list();

    // the epoch schedule is seed-independent, so read it off once for the
    // common report cadence
    let epoch_log = crate::runner::schedule_log(cfg, cfg.horizon)?;
    let times = match cfg.report_cadence {
        ReportCadence::EpochAndPowersOfTwo => report_times(cfg.horizon, &epoch_log),
        ReportCadence::EverySlot => (1..=cfg.horizon).collect(),
    };

    let reductions = sweep_map(cfg, &seeds, |outcome| {
        reduce_seed(cfg, &params, &times, &epoch_log, label, out_dir, outcome)
    })?;

    let mut series = Vec::with_capacity(times.len());
    let ends = epoch_end_slots(&epoch_log, cfg.horizon);
    let n = reductions.len();
    for (i, &t) in times.iter().enumerate() {
        let values: Vec<f64> = reductions.iter().map(|r| r.regret_at_times[i]).collect();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let ci95 = 1.96 * (var / n as f64).sqrt();
        let bound = bound_at(cfg, &params, t);
        series.push(SeriesPoint {
            t,
            epoch_end: ends.binary_search(&t).is_ok(),
            regret_mean: mean,
            regret_ci95: ci95,
            regret_over_ln_t: (t >= 2).then(|| mean / (t as f64).ln()),
            bound,
        });
    }

    let summary = ExperimentSummary {
        config_digest: cfg.digest(),
        collision_model: cfg.collision_model,
        regret_label: label,
        horizon: cfg.horizon,
        n_seeds: n,
        bounds_binding: params.as_ref().is_some_and(|p| p.binding),
        params,
        epoch_log,
        per_seed: reductions.iter().map(|r| r.summary.clone()).collect(),
        series,
    };
    let summary_path = out_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&summary_path, json).map_err(|source| RunnerError::Io {
        path: summary_path.clone(),
        source,
    })?;

    Ok(ExperimentArtifacts {
        summary_path,
        trace_paths: reductions.iter().map(|r| r.trace_path.clone()).collect(),
        regret_paths: reductions.iter().map(|r| r.regret_path.clone()).collect(),
    })
}

/// Threshold derivation fails on degenerate systems (M = N or tied means);
/// experiments still run there, just without bound lines.
fn derive_params_or_practical(cfg: &ExperimentConfig) -> Result<Option<ParamReport>, RunnerError> {
    match derive_params(cfg) {
        Ok(p) => Ok(Some(p)),
        Err(RunnerError::Analysis(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn bound_at(cfg: &ExperimentConfig, params: &Option<ParamReport>, t: u64) -> Option<f64> {
    let p = params.as_ref()?;
    // the closed-form bounds are stated for fixed (L, D)
    let ParamSpec::Fixed { l, d } = cfg.policy.params else {
        return None;
    };
    if t <= p.system.num_arms as u64 {
        return None;
    }
    match cfg.collision_model {
        CollisionModel::Share => regret_bound_shared(t, &p.system, l, d, p.lemma1_constant).ok(),
        CollisionModel::Zero => regret_bound_zero(t, &p.system, l, d, p.lemma1_constant).ok(),
    }
}

#[allow(clippy::too_many_arguments)]
fn reduce_seed(
    cfg: &ExperimentConfig,
    params: &Option<ParamReport>,
    times: &[u64],
    epoch_log: &[EpochRecord],
    label: RegretKind,
    out_dir: &Path,
    outcome: RunOutcome,
) -> Result<SeedReduction, RunnerError> {
    let seed = outcome.seed;
    let trace = &outcome.trace;

    let trace_path = out_dir.join(format!("trace_seed{seed}.csv"));
    write_trace_csv(trace, &trace_path).map_err(|source| RunnerError::Io {
        path: trace_path.clone(),
        source,
    })?;

    let system = params.as_ref().map(|p| p.system.clone());
    let system = match system {
        Some(s) => s,
        None => crate::analysis::SystemParams::from_arms(&cfg.build_arms()?, cfg.players)?,
    };
    let mut series = measured_regret(trace, &system, times, label);
    series.mark_epoch_ends(epoch_log);
    if let Some(p) = params {
        if let ParamSpec::Fixed { l, d } = cfg.policy.params {
            series
                .attach_bounds(&system, l, d, p.lemma1_constant, cfg.collision_model)
                .ok();
        }
    }
    let regret_path = out_dir.join(format!("regret_seed{seed}.csv"));
    write_regret_csv(&series, &regret_path).map_err(|source| RunnerError::Io {
        path: regret_path.clone(),
        source,
    })?;

    let mut per_player = vec![0.0; trace.num_players()];
    for t in 1..=trace.len() {
        for k in 1..=trace.num_players() {
            per_player[k - 1] += trace.player_reward(t, k);
        }
    }
    let (explore_coll, exploit_coll) = collision_counts(trace, epoch_log);
    let final_regret = *series.regret.last().unwrap_or(&0.0);
    Ok(SeedReduction {
        summary: SeedSummary {
            seed,
            total_reward: trace.total_reward(),
            final_regret,
            per_player_reward: per_player,
            exploration_collisions: explore_coll,
            exploitation_collisions: exploit_coll,
        },
        regret_at_times: series.regret,
        trace_path,
        regret_path,
    })
}

/// Arm-slots carrying a collision, split by the epoch type of the slot.
pub fn collision_counts(trace: &SimulationTrace, epoch_log: &[EpochRecord]) -> (u64, u64) {
    let mut explore = 0u64;
    let mut exploit = 0u64;
    for rec in epoch_log {
        let end = (rec.start + rec.len - 1).min(trace.len());
        if rec.start > trace.len() {
            break;
        }
        for t in rec.start..=end {
            let collided = (1..=trace.num_arms())
                .filter(|&j| trace.occupancy(t, j) >= 2)
                .count() as u64;
            match rec.kind {
                EpochKind::Exploration => explore += collided,
                EpochKind::Exploitation => exploit += collided,
            }
        }
    }
    (explore, exploit)
}

/// Sanity check used by budget validation: exploitation epochs started by t
/// never exceed the closed-form cap.
pub fn exploitation_starts_within_bound(
    log: &[EpochRecord],
    horizon: u64,
    n: usize,
) -> Result<bool, RunnerError> {
    let mut started = 0u32;
    for rec in log.iter().filter(|r| r.kind == EpochKind::Exploitation) {
        if rec.start > horizon {
            break;
        }
        started += 1;
        let cap = exploitation_count_bound(rec.start, n)?;
        if started > cap {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
