//! The slotted multi-player simulation.
//!
//! Every slot, all players commit an arm choice before anything resolves.
//! Each arm chosen by at least one player is activated exactly once: its
//! current state is the observation, rewards are credited under the
//! configured collision model, and the arm takes one active transition.
//! Unchosen arms take one passive step. A single RNG stream drives the run
//! with a fixed draw order — players by id while choosing, then arms by id
//! while evolving — so a (config, seed) pair reproduces bit-identically.

use crate::arm::ArmModel;
use crate::policy::{Feedback, PlayerState, PolicyError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("player {player} chose arm {arm}, valid ids are 1..={arms}")]
    ChoiceOutOfRange {
        player: usize,
        arm: usize,
        arms: usize,
    },
    #[error("{players} players need at least as many arms, got {arms}")]
    TooManyPlayers { players: usize, arms: usize },
    #[error("horizon {horizon} is shorter than the first exploration epoch ({arms} slots)")]
    HorizonTooShort { horizon: u64, arms: usize },
    #[error("players must carry ids 1..=M in order; slot {index} has id {id}")]
    MisnumberedPlayer { index: usize, id: usize },
    #[error("player {player}: {source}")]
    Policy {
        player: usize,
        source: PolicyError,
    },
}

/// What happens when several players activate the same arm: they split the
/// state value equally, or nobody gets anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionModel {
    Share,
    Zero,
}

/// Everything that happened in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub t: u64,
    /// Arm id chosen by each player (indexed by player - 1).
    pub choices: Vec<usize>,
    /// State value each arm held during this slot (pre-transition; for
    /// activated arms this is the observation).
    pub arm_states: Vec<f64>,
    /// Number of players on each arm.
    pub collisions: Vec<u32>,
    /// Total reward credited this slot.
    pub system_reward: f64,
    /// Reward credited to each player.
    pub player_rewards: Vec<f64>,
}

/// Column-compressed record of a whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    num_players: usize,
    num_arms: usize,
    choices: Vec<u16>,
    arm_states: Vec<f64>,
    occupancy: Vec<u8>,
    system_reward: Vec<f64>,
    player_rewards: Vec<f64>,
    pub seed: u64,
    pub config_digest: String,
}

impl SimulationTrace {
    fn with_capacity(num_players: usize, num_arms: usize, horizon: u64, seed: u64) -> Self {
        let h = horizon as usize;
        Self {
            num_players,
            num_arms,
            choices: Vec::with_capacity(h * num_players),
            arm_states: Vec::with_capacity(h * num_arms),
            occupancy: Vec::with_capacity(h * num_arms),
            system_reward: Vec::with_capacity(h),
            player_rewards: Vec::with_capacity(h * num_players),
            seed,
            config_digest: String::new(),
        }
    }

    fn push(&mut self, rec: &SlotRecord) {
        debug_assert_eq!(rec.t as usize, self.system_reward.len() + 1);
        self.choices.extend(rec.choices.iter().map(|&c| c as u16));
        self.arm_states.extend_from_slice(&rec.arm_states);
        self.occupancy
            .extend(rec.collisions.iter().map(|&c| c.min(u8::MAX as u32) as u8));
        self.system_reward.push(rec.system_reward);
        self.player_rewards.extend_from_slice(&rec.player_rewards);
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    /// Number of recorded slots.
    pub fn len(&self) -> u64 {
        self.system_reward.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.system_reward.is_empty()
    }

    /// Reassemble the record of slot `t` (1-based).
    pub fn slot(&self, t: u64) -> SlotRecord {
        let i = (t - 1) as usize;
        let (m, n) = (self.num_players, self.num_arms);
        SlotRecord {
            t,
            choices: self.choices[i * m..(i + 1) * m]
                .iter()
                .map(|&c| c as usize)
                .collect(),
            arm_states: self.arm_states[i * n..(i + 1) * n].to_vec(),
            collisions: self.occupancy[i * n..(i + 1) * n]
                .iter()
                .map(|&c| c as u32)
                .collect(),
            system_reward: self.system_reward[i],
            player_rewards: self.player_rewards[i * m..(i + 1) * m].to_vec(),
        }
    }

    pub fn system_rewards(&self) -> &[f64] {
        &self.system_reward
    }

    pub fn total_reward(&self) -> f64 {
        self.system_reward.iter().sum()
    }

    /// Arm chosen by `player` (1-based) at slot `t`.
    pub fn choice(&self, t: u64, player: usize) -> usize {
        self.choices[(t - 1) as usize * self.num_players + player - 1] as usize
    }

    /// Players on `arm` (1-based) at slot `t`.
    pub fn occupancy(&self, t: u64, arm: usize) -> u32 {
        self.occupancy[(t - 1) as usize * self.num_arms + arm - 1] as u32
    }

    pub fn player_reward(&self, t: u64, player: usize) -> f64 {
        self.player_rewards[(t - 1) as usize * self.num_players + player - 1]
    }

    pub fn arm_state(&self, t: u64, arm: usize) -> f64 {
        self.arm_states[(t - 1) as usize * self.num_arms + arm - 1]
    }

    /// T_j(t): slots up to `t` on which arm `j` was activated.
    pub fn activation_count(&self, t: u64, arm: usize) -> u64 {
        (1..=t).filter(|&s| self.occupancy(s, arm) > 0).count() as u64
    }
}

/// Resolve one slot: activate every chosen arm once, credit rewards under
/// the collision model, evolve all arms (active or passive step), and build
/// the per-player feedback.
pub fn resolve_slot(
    t: u64,
    choices: &[usize],
    arms: &mut [ArmModel],
    model: CollisionModel,
    rng: &mut impl rand::Rng,
) -> Result<(SlotRecord, Vec<Feedback>), EnvError> {
    let n = arms.len();
    let mut occupancy = vec![0u32; n];
    for (p, &arm) in choices.iter().enumerate() {
        if arm < 1 || arm > n {
            return Err(EnvError::ChoiceOutOfRange {
                player: p + 1,
                arm,
                arms: n,
            });
        }
        occupancy[arm - 1] += 1;
    }

    let arm_states: Vec<f64> = arms.iter().map(ArmModel::state_value).collect();

    let mut system_reward = 0.0;
    for j in 0..n {
        let occ = occupancy[j];
        match model {
            CollisionModel::Share if occ >= 1 => system_reward += arm_states[j],
            CollisionModel::Zero if occ == 1 => system_reward += arm_states[j],
            _ => {}
        }
    }

    let player_rewards: Vec<f64> = choices
        .iter()
        .map(|&arm| {
            let occ = occupancy[arm - 1];
            let state = arm_states[arm - 1];
            match model {
                CollisionModel::Share => state / occ as f64,
                CollisionModel::Zero => {
                    if occ == 1 {
                        state
                    } else {
                        0.0
                    }
                }
            }
        })
        .collect();

    let feedback: Vec<Feedback> = choices
        .iter()
        .map(|&arm| Feedback {
            arm,
            state: arm_states[arm - 1],
            collision: occupancy[arm - 1] >= 2,
        })
        .collect();

    // arms by id, activated arms take an active step
    for (j, arm) in arms.iter_mut().enumerate() {
        arm.evolve(occupancy[j] >= 1, rng);
    }

    debug_assert!(occupancy.iter().filter(|&&c| c > 0).count() <= choices.len());
    debug_assert!(system_reward >= 0.0);
    let record = SlotRecord {
        t,
        choices: choices.to_vec(),
        arm_states,
        collisions: occupancy,
        system_reward,
        player_rewards,
    };
    Ok((record, feedback))
}

/// Run the full simulation: `horizon` slots of the given players over the
/// given arms. Deterministic in (arms, players, horizon, model, seed).
///
/// The players are mutated in place so the caller can inspect their epoch
/// logs and learning state afterwards.
pub fn run(
    arms: &mut [ArmModel],
    players: &mut [PlayerState],
    horizon: u64,
    model: CollisionModel,
    seed: u64,
    config_digest: &str,
) -> Result<SimulationTrace, EnvError> {
    let n = arms.len();
    let m = players.len();
    if m > n {
        return Err(EnvError::TooManyPlayers { players: m, arms: n });
    }
    if horizon < n as u64 {
        return Err(EnvError::HorizonTooShort { horizon, arms: n });
    }
    for (i, p) in players.iter().enumerate() {
        if p.id() != i + 1 {
            return Err(EnvError::MisnumberedPlayer {
                index: i,
                id: p.id(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for arm in arms.iter_mut() {
        arm.reset_state(&mut rng);
    }

    let mut trace = SimulationTrace::with_capacity(m, n, horizon, seed);
    trace.config_digest = config_digest.to_string();
    let mut feedback: Vec<Option<Feedback>> = vec![None; m];
    let mut choices = vec![0usize; m];
    for t in 1..=horizon {
        for (k, player) in players.iter_mut().enumerate() {
            choices[k] = player
                .step(t, feedback[k].as_ref(), &mut rng)
                .map_err(|source| EnvError::Policy {
                    player: k + 1,
                    source,
                })?;
        }
        let (record, fb) = resolve_slot(t, &choices, arms, model, &mut rng)?;
        trace.push(&record);
        for (k, f) in fb.into_iter().enumerate() {
            feedback[k] = Some(f);
        }
    }
    // deliver the last slot's observations so counts cover the whole run
    for (k, player) in players.iter_mut().enumerate() {
        if let Some(fb) = &feedback[k] {
            player
                .finish(fb)
                .map_err(|source| EnvError::Policy {
                    player: k + 1,
                    source,
                })?;
        }
    }
    Ok(trace)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
