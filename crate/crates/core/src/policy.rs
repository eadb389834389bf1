//! The decentralized epoch-scheduled UCB player.
//!
//! Time is carved into two kinds of epochs. In the n-th exploration epoch a
//! player plays every arm 4^(n-1) times (N subepochs of that length); in the
//! n-th exploitation epoch it recomputes UCB indexes once, freezes the M
//! top-ranked arms and rotates through them over M subepochs of length
//! 2*4^(n-1). At every epoch boundary the player checks whether per-arm
//! exploration time X1(t) = (4^nO - 1)/3 already exceeds D ln t; if so it
//! exploits, otherwise it explores more. Because that decision depends only
//! on (D, N, M, t), players holding the same schedule parameters stay in
//! lockstep without ever communicating — with pre-agreed offsets their
//! exploitation rotations never overlap.
//!
//! Without pre-agreement a player instead sticks to one of its top-M arms
//! and redraws it uniformly whenever the previous exploitation slot
//! collided.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default exponent pair for adaptive schedules: D(t) = f(t)^(2/3),
/// L(t) = f(t)^(1/3). Any pair with 0 < b < a < 1 keeps D/L and f/D
/// diverging while L still grows without bound.
pub const DEFAULT_D_EXPONENT: f64 = 2.0 / 3.0;
pub const DEFAULT_L_EXPONENT: f64 = 1.0 / 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("{what} must be >= 1 (got {got})")]
    NonPositiveArgument { what: &'static str, got: u64 },
    #[error("player {player} out of range 1..={players}")]
    PlayerOutOfRange { player: usize, players: usize },
    #[error("subepoch {subepoch} out of range 1..={max}")]
    SubepochOutOfRange { subepoch: usize, max: usize },
    #[error("index queried for arm with zero plays")]
    UnplayedArm,
    #[error("negative exploration coefficient L = {0}")]
    NegativeL(f64),
    #[error("negative exploration-sufficiency coefficient D = {0}")]
    NegativeD(f64),
    #[error("adaptive exponents (a={a}, b={b}) must satisfy 0 < b < a < 1")]
    BadAdaptiveExponents { a: f64, b: f64 },
    #[error("schedule function is not increasing: f({t1}) = {f1} but f({t2}) = {f2}")]
    NonIncreasingSchedule { t1: u64, f1: f64, t2: u64, f2: f64 },
    #[error("player stepped at t={got}, expected t={expected}")]
    OutOfOrderStep { expected: u64, got: u64 },
    #[error("feedback missing for slot {0}")]
    MissingFeedback(u64),
    #[error("feedback at t={t} references arm {got}, but arm {expected} was played")]
    FeedbackArmMismatch { t: u64, expected: usize, got: usize },
    #[error("unexpected feedback at t=1 (nothing was played yet)")]
    UnexpectedFeedback,
    #[error("need {players} players but only {arms} arms")]
    TooFewArms { players: usize, arms: usize },
}

/// 1-based cyclic shift: k (+) l = ((k-1) mod l) + 1, in 1..=l.
pub fn oslash(k: u64, l: u64) -> Result<u64, PolicyError> {
    if k < 1 {
        return Err(PolicyError::NonPositiveArgument { what: "k", got: k });
    }
    if l < 1 {
        return Err(PolicyError::NonPositiveArgument { what: "l", got: l });
    }
    Ok((k - 1) % l + 1)
}

/// UCB index d = sample_mean + sqrt(L ln t / plays).
pub fn ucb_index(sample_mean: f64, plays: u64, t: u64, l: f64) -> Result<f64, PolicyError> {
    if plays == 0 {
        return Err(PolicyError::UnplayedArm);
    }
    if l < 0.0 {
        return Err(PolicyError::NegativeL(l));
    }
    Ok(sample_mean + (l * (t as f64).ln() / plays as f64).sqrt())
}

/// Per-arm exploration time accumulated over n_explore completed exploration
/// epochs: X1 = (4^n - 1)/3.
pub fn exploration_time(n_explore: u32) -> f64 {
    (4f64.powi(n_explore as i32) - 1.0) / 3.0
}

/// Epoch-boundary switch: exploitation is allowed once X1(t) > D ln t.
pub fn exploration_sufficient(n_explore: u32, t: u64, d: f64) -> bool {
    exploration_time(n_explore) > d * (t as f64).ln()
}

/// Arm for player k in subepoch m of an exploitation epoch:
/// ranked[(m - k + M + 1) (+) M]. For fixed m this is a bijection in k, so
/// players with identical rankings and distinct ids never meet.
pub fn exploitation_assignment(
    player: usize,
    subepoch: usize,
    ranked: &[usize],
) -> Result<usize, PolicyError> {
    let m = ranked.len();
    if player < 1 || player > m {
        return Err(PolicyError::PlayerOutOfRange {
            player,
            players: m,
        });
    }
    if subepoch < 1 || subepoch > m {
        return Err(PolicyError::SubepochOutOfRange { subepoch, max: m });
    }
    let pos = oslash((subepoch + m + 1 - player) as u64, m as u64)?;
    Ok(ranked[pos as usize - 1])
}

/// Arm for player k in subepoch m of an exploration epoch: raw arm id
/// (m - k + N + 1) (+) N. Exploration covers all N arms, so ids are used
/// directly rather than through a ranking.
pub fn exploration_assignment(
    player: usize,
    subepoch: usize,
    num_arms: usize,
) -> Result<usize, PolicyError> {
    if player < 1 || player > num_arms {
        return Err(PolicyError::PlayerOutOfRange {
            player,
            players: num_arms,
        });
    }
    if subepoch < 1 || subepoch > num_arms {
        return Err(PolicyError::SubepochOutOfRange {
            subepoch,
            max: num_arms,
        });
    }
    let id = oslash((subepoch + num_arms + 1 - player) as u64, num_arms as u64)?;
    Ok(id as usize)
}

/// The M arms with the highest indexes, in non-increasing index order; ties
/// break toward the lower arm id so runs stay reproducible.
pub fn select_top_m(indexes: &[f64], m: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..indexes.len()).collect();
    order.sort_by(|&a, &b| {
        indexes[b]
            .partial_cmp(&indexes[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(m);
    order.iter().map(|i| i + 1).collect()
}

// ---------------------------------------------------------------------------
// Parameter schedules
// ---------------------------------------------------------------------------

/// Built-in increasing unbounded sequences for adaptive schedules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FKind {
    Ln,
    Sqrt,
}

impl FKind {
    pub fn eval(self, t: u64) -> f64 {
        match self {
            FKind::Ln => (t as f64).ln(),
            FKind::Sqrt => (t as f64).sqrt(),
        }
    }
}

/// Fixed (L, D) or a time-varying schedule D(t) = f(t)^a, L(t) = f(t)^b.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamMode {
    Fixed {
        l: f64,
        d: f64,
    },
    Adaptive {
        f: FKind,
        d_exponent: f64,
        l_exponent: f64,
    },
}

impl ParamMode {
    pub fn adaptive_default(f: FKind) -> Self {
        ParamMode::Adaptive {
            f,
            d_exponent: DEFAULT_D_EXPONENT,
            l_exponent: DEFAULT_L_EXPONENT,
        }
    }

    /// Fixed mode wants L, D >= 0; adaptive exponents must satisfy
    /// b > 0, a - b > 0, 1 - a > 0 (those three inequalities are exactly the
    /// limit conditions L -> inf, D/L -> inf, f/D -> inf for increasing
    /// unbounded f).
    pub fn validate(&self) -> Result<(), PolicyError> {
        match *self {
            ParamMode::Fixed { l, d } => {
                if l < 0.0 {
                    Err(PolicyError::NegativeL(l))
                } else if d < 0.0 {
                    Err(PolicyError::NegativeD(d))
                } else {
                    Ok(())
                }
            }
            ParamMode::Adaptive {
                d_exponent: a,
                l_exponent: b,
                ..
            } => {
                if b > 0.0 && a - b > 0.0 && 1.0 - a > 0.0 {
                    Ok(())
                } else {
                    Err(PolicyError::BadAdaptiveExponents { a, b })
                }
            }
        }
    }

    /// (L, D) effective at slot t; adaptive values are evaluated lazily at
    /// each epoch-boundary check.
    pub fn at(&self, t: u64) -> (f64, f64) {
        match *self {
            ParamMode::Fixed { l, d } => (l, d),
            ParamMode::Adaptive {
                f,
                d_exponent,
                l_exponent,
            } => {
                let v = f.eval(t).max(0.0);
                (v.powf(l_exponent), v.powf(d_exponent))
            }
        }
    }
}

/// Probe a schedule function at increasing slots and reject any decrease.
pub fn validate_increasing(
    f: impl Fn(u64) -> f64,
    probes: impl IntoIterator<Item = u64>,
) -> Result<(), PolicyError> {
    let mut last: Option<(u64, f64)> = None;
    for t in probes {
        let v = f(t);
        if let Some((t1, f1)) = last {
            if t > t1 && v < f1 {
                return Err(PolicyError::NonIncreasingSchedule {
                    t1,
                    f1,
                    t2: t,
                    f2: v,
                });
            }
        }
        last = Some((t, v));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Player state machine
// ---------------------------------------------------------------------------

/// Exploration or exploitation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochKind {
    Exploration,
    Exploitation,
}

/// One entry of the schedule audit log, recorded when the epoch starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub kind: EpochKind,
    pub start: u64,
    pub len: u64,
}

/// Whether players rely on pre-agreed id offsets to keep their exploitation
/// rotations disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinationMode {
    PreAgreement,
    NoPreAgreement,
}

/// What a player learns about the slot it just played.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    /// Arm that was played (1-based id).
    pub arm: usize,
    /// State value observed on that arm.
    pub state: f64,
    /// True when at least one other player activated the same arm.
    pub collision: bool,
}

#[derive(Debug, Clone)]
struct ActiveEpoch {
    kind: EpochKind,
    /// 1-based subepoch, up to N (exploration) or M (exploitation).
    subepoch: usize,
    pos: u64,
    subepoch_len: u64,
}

/// One player's private learning state. Single-owner: only its simulation
/// loop mutates it, one `step` per slot.
#[derive(Debug, Clone)]
pub struct PlayerState {
    id: usize,
    num_players: usize,
    num_arms: usize,
    mode: CoordinationMode,
    params: ParamMode,
    sample_count: Vec<u64>,
    sample_sum: Vec<f64>,
    n_explore: u32,
    n_exploit: u32,
    epoch: Option<ActiveEpoch>,
    ranked_arms: Vec<usize>,
    exploit_target: Option<usize>,
    redraw_pending: bool,
    last_was_exploitation: bool,
    local_t: u64,
    last_choice: Option<usize>,
    epoch_log: Vec<EpochRecord>,
}

impl PlayerState {
    pub fn new(
        id: usize,
        num_players: usize,
        num_arms: usize,
        mode: CoordinationMode,
        params: ParamMode,
    ) -> Result<Self, PolicyError> {
        if num_players > num_arms {
            return Err(PolicyError::TooFewArms {
                players: num_players,
                arms: num_arms,
            });
        }
        if id < 1 || id > num_players {
            return Err(PolicyError::PlayerOutOfRange {
                player: id,
                players: num_players,
            });
        }
        params.validate()?;
        Ok(Self {
            id,
            num_players,
            num_arms,
            mode,
            params,
            sample_count: vec![0; num_arms],
            sample_sum: vec![0.0; num_arms],
            n_explore: 0,
            n_exploit: 0,
            epoch: None,
            ranked_arms: Vec::new(),
            exploit_target: None,
            redraw_pending: false,
            last_was_exploitation: false,
            local_t: 0,
            last_choice: None,
            epoch_log: Vec::new(),
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn mode(&self) -> CoordinationMode {
        self.mode
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    /// T_i(t): this player's own play count of `arm` (1-based).
    pub fn plays(&self, arm: usize) -> u64 {
        self.sample_count[arm - 1]
    }

    pub fn sample_mean(&self, arm: usize) -> Option<f64> {
        let c = self.sample_count[arm - 1];
        (c > 0).then(|| self.sample_sum[arm - 1] / c as f64)
    }

    pub fn n_explore(&self) -> u32 {
        self.n_explore
    }

    pub fn n_exploit(&self) -> u32 {
        self.n_exploit
    }

    pub fn epoch_log(&self) -> &[EpochRecord] {
        &self.epoch_log
    }

    /// Ranking frozen at the start of the current exploitation epoch.
    pub fn ranked_arms(&self) -> &[usize] {
        &self.ranked_arms
    }

    /// Slots this player has been active (its local clock).
    pub fn local_t(&self) -> u64 {
        self.local_t
    }

    /// Kind of the epoch the *next* slot belongs to, if already decided.
    pub fn current_epoch_kind(&self) -> Option<EpochKind> {
        self.epoch.as_ref().map(|e| e.kind)
    }

    /// Advance one slot: absorb feedback from the previous slot, cross an
    /// epoch boundary if one is due, and return the arm to play at `t`.
    ///
    /// `t` is the player's local slot clock and must advance by exactly one
    /// per call; a player that leaves the system simply stops being stepped
    /// and resumes later with its clock intact.
    pub fn step(
        &mut self,
        t: u64,
        feedback: Option<&Feedback>,
        rng: &mut impl Rng,
    ) -> Result<usize, PolicyError> {
        if t != self.local_t + 1 {
            return Err(PolicyError::OutOfOrderStep {
                expected: self.local_t + 1,
                got: t,
            });
        }
        match feedback {
            None if t > 1 => return Err(PolicyError::MissingFeedback(t)),
            Some(_) if t == 1 => return Err(PolicyError::UnexpectedFeedback),
            Some(fb) => self.absorb(t, fb)?,
            None => {}
        }
        self.local_t = t;

        if self.epoch.is_none() {
            self.begin_epoch(t)?;
        }

        let epoch = self.epoch.as_ref().expect("epoch begun above");
        let kind = epoch.kind;
        let subepoch = epoch.subepoch;
        let arm = match kind {
            EpochKind::Exploration => {
                // Without pre-agreement players have no distinct offsets to
                // use; everyone runs the rotation of a lone player.
                let offset = match self.mode {
                    CoordinationMode::PreAgreement => self.id,
                    CoordinationMode::NoPreAgreement => 1,
                };
                exploration_assignment(offset, subepoch, self.num_arms)?
            }
            EpochKind::Exploitation => match self.mode {
                CoordinationMode::PreAgreement => {
                    exploitation_assignment(self.id, subepoch, &self.ranked_arms)?
                }
                CoordinationMode::NoPreAgreement => {
                    let stale = self
                        .exploit_target
                        .is_none_or(|a| !self.ranked_arms.contains(&a));
                    if stale || self.redraw_pending {
                        let pick = self.ranked_arms[rng.random_range(0..self.ranked_arms.len())];
                        self.exploit_target = Some(pick);
                        self.redraw_pending = false;
                    }
                    self.exploit_target.expect("target drawn above")
                }
            },
        };

        self.last_was_exploitation = kind == EpochKind::Exploitation;
        self.advance_position();
        self.last_choice = Some(arm);
        Ok(arm)
    }

    /// Deliver the final slot's observation once the run is over, so sample
    /// statistics account for every slot played.
    pub fn finish(&mut self, feedback: &Feedback) -> Result<(), PolicyError> {
        self.absorb(self.local_t + 1, feedback)?;
        self.last_choice = None;
        Ok(())
    }

    fn absorb(&mut self, t: u64, fb: &Feedback) -> Result<(), PolicyError> {
        let expected = self.last_choice.ok_or(PolicyError::MissingFeedback(t))?;
        if fb.arm != expected {
            return Err(PolicyError::FeedbackArmMismatch {
                t,
                expected,
                got: fb.arm,
            });
        }
        // Collisions still update the statistics: the player senses the arm
        // state even when the reward is withheld.
        self.sample_count[fb.arm - 1] += 1;
        self.sample_sum[fb.arm - 1] += fb.state;
        if self.mode == CoordinationMode::NoPreAgreement
            && self.last_was_exploitation
            && fb.collision
        {
            self.redraw_pending = true;
        }
        Ok(())
    }

    fn begin_epoch(&mut self, t: u64) -> Result<(), PolicyError> {
        let (l, d) = self.params.at(t);
        let kind = if t == 1 {
            EpochKind::Exploration
        } else if exploration_sufficient(self.n_explore, t, d) {
            EpochKind::Exploitation
        } else {
            EpochKind::Exploration
        };
        let (subepoch_len, subepochs) = match kind {
            EpochKind::Exploration => (4u64.pow(self.n_explore), self.num_arms as u64),
            EpochKind::Exploitation => {
                let indexes = (1..=self.num_arms)
                    .map(|a| {
                        ucb_index(
                            self.sample_mean(a).ok_or(PolicyError::UnplayedArm)?,
                            self.plays(a),
                            t,
                            l,
                        )
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                self.ranked_arms = select_top_m(&indexes, self.num_players);
                if self.mode == CoordinationMode::NoPreAgreement {
                    // keep a still-ranked target; otherwise redraw lazily
                    if self
                        .exploit_target
                        .is_none_or(|a| !self.ranked_arms.contains(&a))
                    {
                        self.exploit_target = None;
                    }
                }
                (2 * 4u64.pow(self.n_exploit), self.num_players as u64)
            }
        };
        self.epoch_log.push(EpochRecord {
            kind,
            start: t,
            len: subepoch_len * subepochs,
        });
        self.epoch = Some(ActiveEpoch {
            kind,
            subepoch: 1,
            pos: 0,
            subepoch_len,
        });
        Ok(())
    }

    fn advance_position(&mut self) {
        let epoch = self.epoch.as_mut().expect("active epoch");
        epoch.pos += 1;
        if epoch.pos == epoch.subepoch_len {
            epoch.pos = 0;
            epoch.subepoch += 1;
            let total = match epoch.kind {
                EpochKind::Exploration => self.num_arms,
                EpochKind::Exploitation => self.num_players,
            };
            if epoch.subepoch > total {
                match epoch.kind {
                    EpochKind::Exploration => self.n_explore += 1,
                    EpochKind::Exploitation => self.n_exploit += 1,
                }
                self.epoch = None;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
