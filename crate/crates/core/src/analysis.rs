//! Regret measurement and the closed-form guarantees.
//!
//! Measured regret compares a trace's cumulative system reward against
//! constantly engaging the M arms with the highest stationary means (the
//! transient O(1) term is omitted; it is reported separately through
//! [`lemma1_constant`]). The threshold and bound formulas are exact algebra
//! over [`SystemParams`]; bounds are stated at exploitation-epoch end slots
//! but evaluate at any t > N, in which case reports flag them as
//! informational.

use crate::arm::{ArmModel, PassiveMode};
use crate::env::SimulationTrace;
use crate::policy::{EpochKind, EpochRecord};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Leading factor of the L threshold. The adaptive-schedule analysis uses a
/// larger factor for the time at which L(t) becomes sufficient; both are
/// exposed, the standard one is the default.
pub const L_THRESHOLD_FACTOR: f64 = 4.0;
pub const L_THRESHOLD_FACTOR_ADAPTIVE: f64 = 7.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("no arms")]
    NoArms,
    #[error("{players} players exceed {arms} arms")]
    TooManyPlayers { players: usize, arms: usize },
    #[error("spectral gap is zero; a non-ergodic arm slipped through validation")]
    ZeroSpectralGap,
    #[error(
        "mean-reward gap undefined: ranking position {position} needs a next-best arm \
         (M = N leaves no arm below the top set)"
    )]
    GapUndefined { position: usize },
    #[error(
        "arms {i} and {j} have equal stationary means ({mu}); \
         distinct means are assumed for the D threshold"
    )]
    NonDistinctMeans { i: usize, j: usize, mu: f64 },
    #[error("bounds are defined for t > N; got t = {t}, N = {n}")]
    TimeBeforeFirstEpochEnd { t: u64, n: usize },
}

/// System-wide extremes of the arm set plus the sorted mean-reward
/// permutation, as used by every threshold and bound formula. Built for a
/// fixed player count M (the gap minimum runs over the top M positions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub num_arms: usize,
    pub num_players: usize,
    /// Smallest stationary probability across all arms and states.
    pub pi_min: f64,
    pub eps_min: f64,
    pub eps_max: f64,
    /// Smallest / largest reward value across all state spaces.
    pub s_min: f64,
    pub s_max: f64,
    /// Largest state-space cardinality.
    pub smax_cardinality: usize,
    /// Stationary means in non-increasing order.
    pub mu_sorted: Vec<f64>,
    /// Arm ids (1-based) realising `mu_sorted`; ties keep the lower id first.
    pub sigma: Vec<usize>,
    /// State-space cardinalities in `sigma` order.
    pub cards_sorted: Vec<usize>,
    /// min over j <= M of mu_sigma(j) - mu_sigma(j+1); `None` when M = N.
    pub gap_min: Option<f64>,
}

impl SystemParams {
    pub fn from_arms(arms: &[ArmModel], num_players: usize) -> Result<Self, AnalysisError> {
        let n = arms.len();
        if n == 0 {
            return Err(AnalysisError::NoArms);
        }
        if num_players > n {
            return Err(AnalysisError::TooManyPlayers {
                players: num_players,
                arms: n,
            });
        }
        let mut pi_min = f64::INFINITY;
        let mut eps_min = f64::INFINITY;
        let mut eps_max = 0.0f64;
        let mut s_min = f64::INFINITY;
        let mut s_max = 0.0f64;
        let mut cardinality = 0usize;
        for arm in arms {
            let summary = arm.summary();
            for &p in &summary.pi {
                pi_min = pi_min.min(p);
            }
            eps_min = eps_min.min(summary.epsilon);
            eps_max = eps_max.max(summary.epsilon);
            for &s in arm.states() {
                s_min = s_min.min(s);
                s_max = s_max.max(s);
            }
            cardinality = cardinality.max(arm.num_states());
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            arms[b]
                .summary()
                .mu
                .partial_cmp(&arms[a].summary().mu)
                .expect("finite means")
                .then(a.cmp(&b))
        });
        let mu_sorted: Vec<f64> = order.iter().map(|&i| arms[i].summary().mu).collect();
        let sigma: Vec<usize> = order.iter().map(|&i| i + 1).collect();
        let cards_sorted: Vec<usize> = order.iter().map(|&i| arms[i].num_states()).collect();
        let gap_min = if num_players < n {
            Some(
                (0..num_players)
                    .map(|j| mu_sorted[j] - mu_sorted[j + 1])
                    .fold(f64::INFINITY, f64::min),
            )
        } else {
            None
        };
        Ok(Self {
            num_arms: n,
            num_players,
            pi_min,
            eps_min,
            eps_max,
            s_min,
            s_max,
            smax_cardinality: cardinality,
            mu_sorted,
            sigma,
            cards_sorted,
            gap_min,
        })
    }

    /// Sum of the top-M stationary means (the per-slot benchmark).
    pub fn top_mean_sum(&self) -> f64 {
        self.mu_sorted[..self.num_players].iter().sum()
    }

    pub fn mean_sum(&self) -> f64 {
        self.mu_sorted.iter().sum()
    }
}

/// Minimal L satisfying the sufficiency condition:
/// (1/eps_min)(factor * 20 s_max^2 |S|_max^2 / (3 - 2 sqrt 2) + 10 s_max^2)
/// with the standard leading factor.
pub fn l_threshold(params: &SystemParams) -> Result<f64, AnalysisError> {
    l_threshold_with_factor(params, L_THRESHOLD_FACTOR)
}

pub fn l_threshold_with_factor(
    params: &SystemParams,
    factor: f64,
) -> Result<f64, AnalysisError> {
    if params.eps_min <= 0.0 {
        return Err(AnalysisError::ZeroSpectralGap);
    }
    let s2 = params.s_max * params.s_max;
    let card2 = (params.smax_cardinality * params.smax_cardinality) as f64;
    Ok((factor * 20.0 * s2 * card2 / (3.0 - 2.0 * 2.0f64.sqrt()) + 10.0 * s2) / params.eps_min)
}

/// Minimal D for a given L: 4 L / gap_min^2.
pub fn d_threshold(l: f64, params: &SystemParams) -> Result<f64, AnalysisError> {
    let gap = params.gap_min.ok_or(AnalysisError::GapUndefined {
        position: params.num_players,
    })?;
    if gap <= 0.0 {
        // locate the offending adjacent pair for the error message
        for j in 0..params.num_players {
            if params.mu_sorted[j] - params.mu_sorted[j + 1] <= 0.0 {
                return Err(AnalysisError::NonDistinctMeans {
                    i: params.sigma[j],
                    j: params.sigma[j + 1],
                    mu: params.mu_sorted[j],
                });
            }
        }
        unreachable!("gap <= 0 implies an adjacent non-positive difference");
    }
    Ok(4.0 * l / (gap * gap))
}

/// Transient-effect constant: sum over arms of (min_s pi_s)^-1 * sum_s s.
pub fn lemma1_constant(arms: &[ArmModel]) -> f64 {
    arms.iter().map(lemma1_constant_for_arm).sum()
}

pub fn lemma1_constant_for_arm(arm: &ArmModel) -> f64 {
    let min_pi = arm
        .summary()
        .pi
        .iter()
        .fold(f64::INFINITY, |m, &p| m.min(p));
    let state_sum: f64 = arm.states().iter().sum();
    state_sum / min_pi
}

/// Upper bound on per-arm exploration time by slot t:
/// (1/3)[4(3 D ln t + 1) - 1].
pub fn exploration_time_bound(t: u64, d: f64) -> f64 {
    (4.0 * (3.0 * d * (t as f64).ln() + 1.0) - 1.0) / 3.0
}

/// Upper bound on the number of exploitation epochs by slot t > N:
/// ceil(log4((3/2)(t - N) + 1)).
pub fn exploitation_count_bound(t: u64, n: usize) -> Result<u32, AnalysisError> {
    if t <= n as u64 {
        return Err(AnalysisError::TimeBeforeFirstEpochEnd { t, n });
    }
    let x = 1.5 * (t - n as u64) as f64 + 1.0;
    Ok((x.ln() / 4f64.ln()).ceil() as u32)
}

/// Bound on the probability that a worse arm out-indexes a better one at the
/// start of the n-th exploitation epoch (slot t_n):
/// (|S_i| + |S_j|)/pi_min * (1 + eps_max sqrt(L) / (10 s_min)) / t_n,
/// clamped to 1 for reporting.
pub fn inversion_prob_bound(
    card_i: usize,
    card_j: usize,
    t_n: u64,
    params: &SystemParams,
    l: f64,
) -> f64 {
    let raw = (card_i + card_j) as f64 / params.pi_min * index_noise_factor(params, l)
        / t_n as f64;
    raw.min(1.0)
}

/// 1 + eps_max sqrt(L) / (10 s_min); common factor of the exploitation terms.
fn index_noise_factor(params: &SystemParams, l: f64) -> f64 {
    1.0 + params.eps_max * l.sqrt() / (10.0 * params.s_min)
}

/// Exploration regret term shared by both bounds: the per-arm exploration
/// budget times the per-slot loss of playing all N arms equally instead of
/// the top M.
fn exploration_regret_term(t: u64, d: f64, params: &SystemParams) -> f64 {
    let m = params.num_players as f64;
    let n = params.num_arms as f64;
    exploration_time_bound(t, d) * (params.top_mean_sum() - m / n * params.mean_sum())
}

/// 3 ceil(log4(3/2 (t-N) + 1)) (1 + eps_max sqrt(L)/(10 s_min)).
fn exploitation_mistake_factor(
    t: u64,
    params: &SystemParams,
    l: f64,
) -> Result<f64, AnalysisError> {
    Ok(3.0 * exploitation_count_bound(t, params.num_arms)? as f64 * index_noise_factor(params, l))
}

/// Regret upper bound under the reward-sharing collision model, term by term:
/// exploration loss, the three exploitation-mistake sums, and the transient
/// constant. The third sum's displaced arm is read at ranking position M.
pub fn regret_bound_shared(
    t: u64,
    params: &SystemParams,
    l: f64,
    d: f64,
    lemma1: f64,
) -> Result<f64, AnalysisError> {
    let m = params.num_players;
    let n = params.num_arms;
    let factor = exploitation_mistake_factor(t, params, l)?;
    let mu = &params.mu_sorted;
    let cards = &params.cards_sorted;

    // failures of players 1..M-1 to land their own ranked arm
    let mut top_confusions = 0.0;
    for i in 0..m.saturating_sub(1) {
        for j in 0..n {
            if j != i {
                top_confusions += mu[i] * (cards[i] + cards[j]) as f64 / params.pi_min;
            }
        }
    }
    // the M-th player settling for an arm below the top set
    let mut displaced = 0.0;
    for j in m..n {
        displaced += (mu[m - 1] - mu[j]) * (cards[m - 1] + cards[j]) as f64 / params.pi_min;
    }
    // the M-th player colliding into a higher-ranked arm
    let mut upward = 0.0;
    for j in 0..m.saturating_sub(1) {
        upward += mu[m - 1] * (cards[m - 1] + cards[j]) as f64 / params.pi_min;
    }

    Ok(exploration_regret_term(t, d, params)
        + factor * (top_confusions + displaced + upward)
        + lemma1)
}

/// Regret upper bound when collisions void the reward: every exploitation
/// mistake is charged the full top-M mean sum. The cardinality pair inside
/// the collision sum repeats |S_sigma(i)| (as stated).
pub fn regret_bound_zero(
    t: u64,
    params: &SystemParams,
    l: f64,
    d: f64,
    lemma1: f64,
) -> Result<f64, AnalysisError> {
    let m = params.num_players;
    let n = params.num_arms;
    let factor = exploitation_mistake_factor(t, params, l)?;
    let cards = &params.cards_sorted;
    let mut collision_sum = 0.0;
    for (i, &card) in cards.iter().enumerate().take(m) {
        for j in 0..n {
            if j != i {
                collision_sum += (card + card) as f64 / params.pi_min;
            }
        }
    }
    Ok(factor * params.top_mean_sum() * collision_sum
        + exploration_regret_term(t, d, params)
        + lemma1)
}

// ---------------------------------------------------------------------------
// Regret series
// ---------------------------------------------------------------------------

/// Whether the benchmark in the regret definition is the true optimum
/// (frozen / exogenous passive dynamics) or the best static arm set
/// (endogenous passive dynamics).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretKind {
    Regret,
    WeakRegret,
}

/// The series is labeled `Regret` only when every arm freezes while passive.
pub fn regret_kind(arms: &[ArmModel]) -> RegretKind {
    if arms
        .iter()
        .all(|a| a.passive_mode() == PassiveMode::Frozen)
    {
        RegretKind::Regret
    } else {
        RegretKind::WeakRegret
    }
}

/// Measured regret sampled at chosen slots, with bound values attached at the
/// slots where they are defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSeries {
    pub kind: RegretKind,
    pub times: Vec<u64>,
    pub regret: Vec<f64>,
    pub epoch_end: Vec<bool>,
    pub bound: Vec<Option<f64>>,
}

/// r(t) = t * sum of top-M means - R(t), with R(t) the trace's cumulative
/// system reward; the transient O(1) term is omitted. Sampled at `times`
/// (ascending, within the trace).
pub fn measured_regret(
    trace: &SimulationTrace,
    params: &SystemParams,
    times: &[u64],
    kind: RegretKind,
) -> RegretSeries {
    let top = params.top_mean_sum();
    let rewards = trace.system_rewards();
    let mut regret = Vec::with_capacity(times.len());
    let mut next = 0usize;
    // an empty prefix has zero regret
    while next < times.len() && times[next] == 0 {
        regret.push(0.0);
        next += 1;
    }
    let mut cum = 0.0;
    for (i, r) in rewards.iter().enumerate() {
        cum += r;
        let t = (i + 1) as u64;
        while next < times.len() && times[next] == t {
            regret.push(top * t as f64 - cum);
            next += 1;
        }
    }
    debug_assert_eq!(regret.len(), times.len(), "times must lie within the trace");
    RegretSeries {
        kind,
        times: times.to_vec(),
        regret,
        epoch_end: vec![false; times.len()],
        bound: vec![None; times.len()],
    }
}

impl RegretSeries {
    /// Mark which sampled slots close an epoch, given a schedule log.
    pub fn mark_epoch_ends(&mut self, log: &[EpochRecord]) {
        let ends = epoch_end_slots(log, *self.times.last().unwrap_or(&0));
        for (i, &t) in self.times.iter().enumerate() {
            self.epoch_end[i] = ends.binary_search(&t).is_ok();
        }
    }

    /// Attach the closed-form bound for the given collision model at every
    /// sampled slot with t > N (earlier slots keep `None`).
    pub fn attach_bounds(
        &mut self,
        params: &SystemParams,
        l: f64,
        d: f64,
        lemma1: f64,
        model: crate::env::CollisionModel,
    ) -> Result<(), AnalysisError> {
        for (i, &t) in self.times.iter().enumerate() {
            if t > params.num_arms as u64 {
                let b = match model {
                    crate::env::CollisionModel::Share => {
                        regret_bound_shared(t, params, l, d, lemma1)?
                    }
                    crate::env::CollisionModel::Zero => {
                        regret_bound_zero(t, params, l, d, lemma1)?
                    }
                };
                self.bound[i] = Some(b);
            }
        }
        Ok(())
    }
}

/// Slots on which an epoch completes, from the audit log (epochs cut off by
/// the horizon are skipped).
pub fn epoch_end_slots(log: &[EpochRecord], horizon: u64) -> Vec<u64> {
    log.iter()
        .map(|r| r.start + r.len - 1)
        .filter(|&end| end <= horizon)
        .collect()
}

/// Count exploitation epochs started by slot t.
pub fn exploitation_epochs_started(log: &[EpochRecord], t: u64) -> u32 {
    log.iter()
        .filter(|r| r.kind == EpochKind::Exploitation && r.start <= t)
        .count() as u32
}

/// Default report cadence: powers of two, epoch boundaries, and the horizon.
pub fn report_times(horizon: u64, log: &[EpochRecord]) -> Vec<u64> {
    let mut times: Vec<u64> = Vec::new();
    let mut p = 1u64;
    while p <= horizon {
        times.push(p);
        p = p.saturating_mul(2);
    }
    times.extend(epoch_end_slots(log, horizon));
    times.push(horizon);
    times.sort_unstable();
    times.dedup();
    times
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
#[allow(clippy::excessive_precision)] // frozen fixture values keep all digits
mod tests {
    use super::*;
    use crate::arm::PassiveMode;
    use crate::env::{run, CollisionModel};
    use crate::policy::{CoordinationMode, ParamMode, PlayerState};

    /// N=3, M=2 reference system used across the test suite.
    pub(crate) fn reference_arms() -> Vec<ArmModel> {
        vec![
            ArmModel::new(
                vec![1.0, 2.0],
                vec![vec![0.9, 0.1], vec![0.2, 0.8]],
                PassiveMode::Frozen,
            )
            .unwrap(),
            ArmModel::new(
                vec![1.0, 2.0],
                vec![vec![0.5, 0.5], vec![0.5, 0.5]],
                PassiveMode::Frozen,
            )
            .unwrap(),
            ArmModel::new(
                vec![0.5, 1.5],
                vec![vec![0.7, 0.3], vec![0.4, 0.6]],
                PassiveMode::Frozen,
            )
            .unwrap(),
        ]
    }

    fn reference_params() -> SystemParams {
        SystemParams::from_arms(&reference_arms(), 2).unwrap()
    }

    #[test]
    fn system_params_of_reference_system() {
        let p = reference_params();
        assert!((p.pi_min - 1.0 / 3.0).abs() < 1e-12);
        assert!((p.eps_min - 0.3).abs() < 1e-10);
        assert!((p.eps_max - 1.0).abs() < 1e-10);
        assert_eq!(p.s_min, 0.5);
        assert_eq!(p.s_max, 2.0);
        assert_eq!(p.smax_cardinality, 2);
        assert_eq!(p.sigma, vec![2, 1, 3]);
        assert!((p.mu_sorted[0] - 1.5).abs() < 1e-12);
        assert!((p.mu_sorted[1] - 4.0 / 3.0).abs() < 1e-12);
        assert!((p.mu_sorted[2] - 13.0 / 14.0).abs() < 1e-12);
        assert!((p.gap_min.unwrap() - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn l_threshold_unit_case() {
        // eps=1, s_max=1, |S|=1: 80/(3 - 2 sqrt 2) + 10
        let arms = vec![ArmModel::new(
            vec![1.0],
            vec![vec![1.0]],
            PassiveMode::Frozen,
        )
        .unwrap()];
        let p = SystemParams::from_arms(&arms, 1).unwrap();
        // single arm: eps = 1 by convention (lambda2 = 0)
        let l = l_threshold(&p).unwrap();
        assert!((l - 476.27416997969573).abs() < 1e-9 * l);
    }

    #[test]
    fn l_threshold_reference_system() {
        let l = l_threshold(&reference_params()).unwrap();
        assert!((l - 25001.289065583773).abs() < 1e-9 * l, "l = {l}");
        // homogeneity: doubling s_max scales the threshold by 4
        let mut p = reference_params();
        p.s_max *= 2.0;
        let l4 = l_threshold(&p).unwrap();
        assert!((l4 - 4.0 * l).abs() < 1e-9 * l4);
    }

    #[test]
    fn l_threshold_factor_variants() {
        let p = reference_params();
        let standard = l_threshold_with_factor(&p, L_THRESHOLD_FACTOR).unwrap();
        let adaptive = l_threshold_with_factor(&p, L_THRESHOLD_FACTOR_ADAPTIVE).unwrap();
        assert!(adaptive > standard);
    }

    #[test]
    fn d_threshold_examples() {
        let mut p = reference_params();
        p.gap_min = Some(1.0);
        assert_eq!(d_threshold(1.0, &p).unwrap(), 4.0);
        p.gap_min = Some(0.5);
        assert_eq!(d_threshold(100.0, &p).unwrap(), 1600.0);
        // halving the gap quadruples D
        p.gap_min = Some(0.25);
        assert_eq!(d_threshold(100.0, &p).unwrap(), 6400.0);
    }

    #[test]
    fn d_threshold_reference_system() {
        let p = reference_params();
        let l = l_threshold(&p).unwrap();
        let d = d_threshold(l, &p).unwrap();
        assert!((d - 3600185.6254440635).abs() < 1e-9 * d, "d = {d}");
    }

    #[test]
    fn d_threshold_rejects_m_equals_n() {
        let p = SystemParams::from_arms(&reference_arms(), 3).unwrap();
        assert!(matches!(
            d_threshold(1.0, &p),
            Err(AnalysisError::GapUndefined { .. })
        ));
    }

    #[test]
    fn d_threshold_rejects_duplicate_means() {
        let arms = vec![
            ArmModel::new(
                vec![1.0, 2.0],
                vec![vec![0.5, 0.5], vec![0.5, 0.5]],
                PassiveMode::Frozen,
            )
            .unwrap(),
            ArmModel::new(
                vec![1.0, 2.0],
                vec![vec![0.5, 0.5], vec![0.5, 0.5]],
                PassiveMode::Frozen,
            )
            .unwrap(),
            ArmModel::new(
                vec![0.5, 1.5],
                vec![vec![0.7, 0.3], vec![0.4, 0.6]],
                PassiveMode::Frozen,
            )
            .unwrap(),
        ];
        let p = SystemParams::from_arms(&arms, 2).unwrap();
        assert!(matches!(
            d_threshold(1.0, &p),
            Err(AnalysisError::NonDistinctMeans { i: 1, j: 2, .. })
        ));
    }

    #[test]
    fn lemma1_constant_examples() {
        let arms = reference_arms();
        // per arm: 3*(1+2)=9, 2*(1+2)=6, (7/3)*(0.5+1.5)=14/3
        assert!((lemma1_constant_for_arm(&arms[0]) - 9.0).abs() < 1e-10);
        assert!((lemma1_constant_for_arm(&arms[1]) - 6.0).abs() < 1e-10);
        assert!((lemma1_constant_for_arm(&arms[2]) - 14.0 / 3.0).abs() < 1e-10);
        let total = lemma1_constant(&arms);
        assert!((total - 59.0 / 3.0).abs() < 1e-9 * total);

        let single = ArmModel::new(vec![0.3], vec![vec![1.0]], PassiveMode::Frozen).unwrap();
        assert!((lemma1_constant_for_arm(&single) - 0.3).abs() < 1e-12);
        // additivity over identical arms
        let twice = lemma1_constant(&[arms[0].clone(), arms[0].clone()]);
        assert!((twice - 18.0).abs() < 1e-10);
    }

    #[test]
    fn exploration_time_bound_examples() {
        assert!((exploration_time_bound(1, 5.0) - 1.0).abs() < 1e-12);
        assert!((exploration_time_bound(12345, 0.0) - 1.0).abs() < 1e-12);
        // D=1, t=3: (1/3)(4(3 ln 3 + 1) - 1) = 4 ln 3 + 1
        let expected = 4.0 * 3f64.ln() + 1.0;
        assert!((exploration_time_bound(3, 1.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn exploitation_count_bound_examples() {
        assert_eq!(exploitation_count_bound(5, 3).unwrap(), 1); // log4(4) = 1
        assert_eq!(exploitation_count_bound(13, 3).unwrap(), 2); // log4(16) = 2
        assert_eq!(exploitation_count_bound(10_000, 3).unwrap(), 7);
        assert!(exploitation_count_bound(3, 3).is_err());
        // monotone non-decreasing in t
        let mut prev = 0;
        for t in 4..2000 {
            let b = exploitation_count_bound(t, 3).unwrap();
            assert!(b >= prev);
            prev = b;
        }
    }

    #[test]
    fn inversion_prob_bound_examples() {
        // |S_i|=|S_j|=2, pi_min=0.5, eps_max=1, L=100, s_min=1, t_n=1000
        let mut p = reference_params();
        p.pi_min = 0.5;
        p.eps_max = 1.0;
        p.s_min = 1.0;
        let b = inversion_prob_bound(2, 2, 1000, &p, 100.0);
        assert!((b - 0.016).abs() < 1e-12);
        // decreasing in t_n, increasing in L
        assert!(inversion_prob_bound(2, 2, 10_000, &p, 100.0) < b);
        assert!(inversion_prob_bound(2, 2, 1000, &p, 400.0) > b);
        // clamped for reporting
        assert_eq!(inversion_prob_bound(2, 2, 1, &p, 100.0), 1.0);
    }

    #[test]
    fn inversion_prob_bound_reference_values() {
        let p = reference_params();
        let l = l_threshold(&p).unwrap();
        let b = inversion_prob_bound(2, 2, 1000, &p, l);
        assert!((b - 0.3914831024140108).abs() < 1e-9 * b, "b = {b}");
    }

    #[test]
    fn regret_bounds_match_independent_evaluation() {
        let arms = reference_arms();
        let p = reference_params();
        let l = l_threshold(&p).unwrap();
        let d = d_threshold(l, &p).unwrap();
        let c = lemma1_constant(&arms);
        let shared = regret_bound_shared(10_000, &p, l, d, c).unwrap();
        let zero = regret_bound_zero(10_000, &p, l, d, c).unwrap();
        assert!(
            (shared - 43198221.307358988).abs() < 1e-9 * shared,
            "shared = {shared}"
        );
        assert!((zero - 43252441.717043325).abs() < 1e-9 * zero, "zero = {zero}");
        // non-decreasing in t
        let shared_later = regret_bound_shared(100_000, &p, l, d, c).unwrap();
        assert!(shared_later >= shared);
        assert!((shared_later - 53999162.799350366).abs() < 1e-9 * shared_later);
    }

    #[test]
    fn exploration_term_vanishes_when_all_arms_are_best() {
        // M = N: the exploration rotation carries no ranking loss
        let p = SystemParams::from_arms(&reference_arms(), 3).unwrap();
        let term = exploration_regret_term(1000, 5.0, &p);
        assert!(term.abs() < 1e-9, "term = {term}");
    }

    #[test]
    fn single_player_bound_has_only_displacement_confusions() {
        // M = 1: the top-confusion and upward-collision sums are empty, so
        // the shared bound reduces to exploration + displaced + constant
        let p = SystemParams::from_arms(&reference_arms(), 1).unwrap();
        let (t, l, d, lem) = (1000u64, 5.0, 2.0, 59.0 / 3.0);
        let bound = regret_bound_shared(t, &p, l, d, lem).unwrap();
        let factor = 3.0
            * exploitation_count_bound(t, 3).unwrap() as f64
            * (1.0 + p.eps_max * l.sqrt() / (10.0 * p.s_min));
        let displaced: f64 = (1..3)
            .map(|j| (p.mu_sorted[0] - p.mu_sorted[j]) * 4.0 / p.pi_min)
            .sum();
        let explore = exploration_time_bound(t, d)
            * (p.mu_sorted[0] - p.mean_sum() / 3.0);
        assert!((bound - (explore + factor * displaced + lem)).abs() < 1e-9 * bound);
    }

    #[test]
    fn single_arm_regret_vanishes_by_ergodicity() {
        // N = M = 1: r(t) = t mu - sum of observed states, mean rate -> 0
        let mut arms = vec![reference_arms().remove(0)];
        let p = SystemParams::from_arms(&arms, 1).unwrap();
        let mut players = vec![PlayerState::new(
            1,
            1,
            1,
            CoordinationMode::PreAgreement,
            ParamMode::Fixed { l: 1.0, d: 1.0 },
        )
        .unwrap()];
        let horizon = 20_000u64;
        let trace = run(&mut arms, &mut players, horizon, CollisionModel::Share, 9, "").unwrap();
        let series = measured_regret(&trace, &p, &[horizon], RegretKind::Regret);
        let rate = series.regret[0] / horizon as f64;
        assert!(rate.abs() < 0.05, "regret rate {rate}");
    }

    #[test]
    fn empty_prefix_has_zero_regret() {
        let mut arms = reference_arms();
        let p = reference_params();
        let mut players = vec![PlayerState::new(
            1,
            1,
            3,
            CoordinationMode::PreAgreement,
            ParamMode::Fixed { l: 1.0, d: 1.0 },
        )
        .unwrap()];
        let trace = run(&mut arms, &mut players, 10, CollisionModel::Share, 0, "").unwrap();
        let series = measured_regret(&trace, &p, &[0, 5, 10], RegretKind::Regret);
        assert_eq!(series.regret[0], 0.0);
    }

    #[test]
    fn bounds_reject_t_at_or_before_n() {
        let p = reference_params();
        assert!(regret_bound_shared(3, &p, 1.0, 1.0, 0.0).is_err());
        assert!(regret_bound_zero(2, &p, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn measured_regret_of_oracle_players() {
        // players pinned to the two best arms: regret per slot -> 0
        let mut arms = reference_arms();
        let p = reference_params();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(17);
        for a in arms.iter_mut() {
            a.reset_state(&mut rng);
        }
        let horizon = 20_000u64;
        let mut cum = 0.0;
        for t in 1..=horizon {
            let (rec, _) = crate::env::resolve_slot(
                t,
                &[2, 1],
                &mut arms,
                CollisionModel::Share,
                &mut rng,
            )
            .unwrap();
            cum += rec.system_reward;
        }
        let regret = horizon as f64 * p.top_mean_sum() - cum;
        assert!(
            (regret / horizon as f64).abs() < 0.05,
            "regret rate {}",
            regret / horizon as f64
        );
    }

    #[test]
    fn measured_regret_series_and_flags() {
        let mut arms = reference_arms();
        let p = reference_params();
        let mut players: Vec<PlayerState> = (1..=2)
            .map(|k| {
                PlayerState::new(
                    k,
                    2,
                    3,
                    CoordinationMode::PreAgreement,
                    ParamMode::Fixed { l: 2.0, d: 10.0 },
                )
                .unwrap()
            })
            .collect();
        let trace = run(&mut arms, &mut players, 5000, CollisionModel::Share, 3, "").unwrap();
        let log = players[0].epoch_log().to_vec();
        let times = report_times(5000, &log);
        let mut series = measured_regret(&trace, &p, &times, regret_kind(&reference_arms()));
        series.mark_epoch_ends(&log);
        series
            .attach_bounds(&p, 2.0, 10.0, lemma1_constant(&reference_arms()), CollisionModel::Share)
            .unwrap();
        assert_eq!(series.kind, RegretKind::Regret);
        assert_eq!(series.times.len(), series.regret.len());
        assert!(series.epoch_end.iter().any(|&e| e));
        // bounds attach exactly where t > N
        for (i, &t) in series.times.iter().enumerate() {
            assert_eq!(series.bound[i].is_some(), t > 3);
        }
        // regret at t=1 is the one-slot shortfall, bounded by the benchmark
        assert!(series.regret[0] <= p.top_mean_sum());
    }

    #[test]
    fn weak_regret_label_for_endogenous_modes() {
        let mut arms = reference_arms();
        assert_eq!(regret_kind(&arms), RegretKind::Regret);
        arms[1] = ArmModel::new(
            vec![1.0, 2.0],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            PassiveMode::SameKernel,
        )
        .unwrap();
        assert_eq!(regret_kind(&arms), RegretKind::WeakRegret);
    }

    #[test]
    fn report_times_are_log_spaced_with_epoch_ends() {
        let log = vec![
            EpochRecord {
                kind: EpochKind::Exploration,
                start: 1,
                len: 3,
            },
            EpochRecord {
                kind: EpochKind::Exploitation,
                start: 4,
                len: 4,
            },
        ];
        let times = report_times(100, &log);
        for p in [1u64, 2, 4, 8, 16, 32, 64] {
            assert!(times.contains(&p));
        }
        assert!(times.contains(&3) && times.contains(&7) && times.contains(&100));
        assert!(times.windows(2).all(|w| w[0] < w[1]));
    }
}
