//! Simulation library for decentralized restless multi-armed bandits.
//!
//! `M` non-communicating players repeatedly choose among `N` arms. Each arm is
//! a finite, irreducible, aperiodic, reversible Markov chain whose state value
//! *is* the reward; it transitions under its own kernel when played and under
//! a configurable passive rule when idle. Players run an epoch-scheduled UCB
//! index policy: exploration epochs cover every arm equally with quadrupling
//! lengths, exploitation epochs rotate each player through the arms it
//! currently believes are the `M` best. Collisions (two players on one arm)
//! are resolved by either splitting the reward or voiding it.
//!
//! The crate is organised along the pipeline:
//!
//! - [`arm`] — arm chains, stationary/spectral quantities, state evolution
//! - [`policy`] — the player: epoch schedule, UCB index, subepoch assignment
//! - [`env`] — the slotted multi-player simulation loop and its trace
//! - [`analysis`] — measured regret, parameter thresholds, closed-form regret
//!   upper bounds
//! - [`config`] / [`runner`] / [`report`] — experiment configs, seed sweeps
//!   (data-parallel with the `parallel` feature, sequential otherwise) and
//!   CSV/JSON artifact output

pub mod analysis;
pub mod arm;
pub mod config;
pub mod env;
pub mod policy;
pub mod report;
pub mod runner;

pub use analysis::{RegretKind, RegretSeries, SystemParams};
pub use arm::{ArmModel, PassiveMode, StationarySummary};
pub use config::ExperimentConfig;
pub use env::{CollisionModel, SimulationTrace, SlotRecord};
pub use policy::{CoordinationMode, EpochKind, EpochRecord, Feedback, ParamMode, PlayerState};
