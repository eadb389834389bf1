//! Restless Markovian arms.
//!
//! An arm is a finite Markov chain whose states are the reward values
//! themselves. When the arm is played it transitions under its `active`
//! kernel; when idle it follows one of four passive rules ([`PassiveMode`]).
//! Construction validates everything the analysis relies on: row
//! stochasticity, positivity of rewards, irreducibility, aperiodicity and
//! reversibility, and precomputes the stationary distribution, the stationary
//! mean and the spectral gap.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Row sums must match 1 this tightly.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Detailed-balance residual tolerance: |pi_a P(a,b) - pi_b P(b,a)|.
pub const REVERSIBILITY_TOL: f64 = 1e-10;
/// Residual tolerance for the stationarity check pi P = pi.
pub const STATIONARY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArmError {
    #[error("arm has no states")]
    EmptyStates,
    #[error("kernel is {rows}x{cols} but the arm has {states} states")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        states: usize,
    },
    #[error("kernel row {row} sums to {sum} (must be 1 within {STOCHASTIC_TOL})")]
    NonStochasticRow { row: usize, sum: f64 },
    #[error("kernel entry ({row},{col}) is negative: {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("state (reward) {index} is not positive: {value}")]
    NonPositiveReward { index: usize, value: f64 },
    #[error("chain is reducible; states unreachable in the communication check: {unreachable:?}")]
    Reducible { unreachable: Vec<usize> },
    #[error("chain is periodic with period {period}")]
    Periodic { period: u64 },
    #[error(
        "chain is not reversible: pi_{a} P({a},{b}) = {forward} but pi_{b} P({b},{a}) = {backward}"
    )]
    NotReversible {
        a: usize,
        b: usize,
        forward: f64,
        backward: f64,
    },
    #[error("stationary solve failed: {0}")]
    StationarySolve(String),
    #[error("initial state index {index} out of range for {states} states")]
    BadInitialState { index: usize, states: usize },
}

/// What an arm does on a slot where it is not played.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassiveMode {
    /// State stays put (the exogenous restless model: the system is rested,
    /// restlessness is only apparent through other players' activations).
    Frozen,
    /// Passive slots transition under the same kernel as active ones.
    SameKernel,
    /// Passive slots redraw the state from the stationary distribution.
    IndependentResample,
    /// Passive slots advance the state index cyclically; a deterministic
    /// stress mode for the "arbitrary passive dynamics" assumption.
    DeterministicCycle,
}

/// How an arm's state is initialised at the start of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    /// Draw from the stationary distribution (default; keeps transients out
    /// of measured regret).
    Stationary,
    /// Start from a fixed state index.
    Fixed(usize),
}

/// Stationary and spectral quantities of an arm's active kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarySummary {
    /// Stationary distribution over states.
    pub pi: Vec<f64>,
    /// Stationary mean reward, sum of state * pi.
    pub mu: f64,
    /// Second-largest eigenvalue modulus of the kernel (0 for one state).
    pub lambda2: f64,
    /// Spectral gap, 1 - lambda2.
    pub epsilon: f64,
}

/// One restless arm: reward states, active kernel, passive rule, current state.
///
/// Everything but `current_state` is immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    states: Vec<f64>,
    /// Row-major row-stochastic matrix, `kernel[row * n + col]`.
    kernel: Vec<f64>,
    passive_mode: PassiveMode,
    initial_state: InitialState,
    current_state: usize,
    summary: StationarySummary,
}

impl ArmModel {
    pub fn new(
        states: Vec<f64>,
        kernel: Vec<Vec<f64>>,
        passive_mode: PassiveMode,
    ) -> Result<Self, ArmError> {
        let n = states.len();
        if n == 0 {
            return Err(ArmError::EmptyStates);
        }
        for (i, &s) in states.iter().enumerate() {
            if s.is_nan() || s <= 0.0 {
                return Err(ArmError::NonPositiveReward { index: i, value: s });
            }
        }
        let flat = flatten_kernel(&kernel, n)?;
        validate_stochastic(&flat, n)?;
        check_irreducible(&flat, n)?;
        check_aperiodic(&flat, n)?;
        let pi = solve_stationary(&flat, n)?;
        check_reversible(&flat, &pi, n)?;
        let lambda2 = second_eigenvalue_modulus(&flat, &pi, n);
        let mu = states.iter().zip(&pi).map(|(s, p)| s * p).sum();
        let summary = StationarySummary {
            pi,
            mu,
            lambda2,
            epsilon: 1.0 - lambda2,
        };
        Ok(Self {
            states,
            kernel: flat,
            passive_mode,
            initial_state: InitialState::Stationary,
            current_state: 0,
            summary,
        })
    }

    /// Replace the default stationary initialisation with a fixed state.
    pub fn with_initial_state(mut self, index: usize) -> Result<Self, ArmError> {
        if index >= self.states.len() {
            return Err(ArmError::BadInitialState {
                index,
                states: self.states.len(),
            });
        }
        self.initial_state = InitialState::Fixed(index);
        self.current_state = index;
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn passive_mode(&self) -> PassiveMode {
        self.passive_mode
    }

    pub fn summary(&self) -> &StationarySummary {
        &self.summary
    }

    pub fn kernel_row(&self, row: usize) -> &[f64] {
        let n = self.states.len();
        &self.kernel[row * n..(row + 1) * n]
    }

    pub fn current_state_index(&self) -> usize {
        self.current_state
    }

    /// Reward value the arm holds right now.
    pub fn state_value(&self) -> f64 {
        self.states[self.current_state]
    }

    /// Apply the configured initialisation; draws from pi in the stationary
    /// case, so callers control where this sits in the run's RNG stream.
    pub fn reset_state(&mut self, rng: &mut impl Rng) {
        self.current_state = match self.initial_state {
            InitialState::Stationary => sample_categorical(&self.summary.pi, rng),
            InitialState::Fixed(i) => i,
        };
    }

    /// Advance one slot. Played arms step under the active kernel; idle arms
    /// follow the passive mode. Returns the new state index.
    pub fn evolve(&mut self, played: bool, rng: &mut impl Rng) -> usize {
        let next = if played {
            sample_categorical(self.kernel_row(self.current_state), rng)
        } else {
            match self.passive_mode {
                PassiveMode::Frozen => self.current_state,
                PassiveMode::SameKernel => {
                    sample_categorical(self.kernel_row(self.current_state), rng)
                }
                PassiveMode::IndependentResample => sample_categorical(&self.summary.pi, rng),
                PassiveMode::DeterministicCycle => (self.current_state + 1) % self.states.len(),
            }
        };
        self.current_state = next;
        next
    }
}

/// Stationary distribution of a row-stochastic kernel: the unique pi with
/// pi P = pi, sum(pi) = 1. Rejects non-stochastic, reducible or periodic
/// kernels.
pub fn stationary_distribution(kernel: &[Vec<f64>]) -> Result<Vec<f64>, ArmError> {
    let n = kernel.len();
    if n == 0 {
        return Err(ArmError::EmptyStates);
    }
    let flat = flatten_kernel(kernel, n)?;
    validate_stochastic(&flat, n)?;
    check_irreducible(&flat, n)?;
    check_aperiodic(&flat, n)?;
    solve_stationary(&flat, n)
}

/// Spectral gap epsilon = 1 - lambda2, with lambda2 the second-largest
/// eigenvalue modulus. Requires a reversible kernel: the spectrum is computed
/// from the similarity transform diag(sqrt(pi)) P diag(1/sqrt(pi)), which is
/// symmetric (hence real) exactly when detailed balance holds.
pub fn spectral_gap(kernel: &[Vec<f64>]) -> Result<f64, ArmError> {
    let n = kernel.len();
    if n == 0 {
        return Err(ArmError::EmptyStates);
    }
    let flat = flatten_kernel(kernel, n)?;
    validate_stochastic(&flat, n)?;
    check_irreducible(&flat, n)?;
    check_aperiodic(&flat, n)?;
    let pi = solve_stationary(&flat, n)?;
    check_reversible(&flat, &pi, n)?;
    Ok(1.0 - second_eigenvalue_modulus(&flat, &pi, n))
}

/// Stationary mean reward of a valid arm.
pub fn stationary_mean(arm: &ArmModel) -> f64 {
    arm.summary.mu
}

fn flatten_kernel(kernel: &[Vec<f64>], n: usize) -> Result<Vec<f64>, ArmError> {
    if kernel.len() != n {
        return Err(ArmError::DimensionMismatch {
            rows: kernel.len(),
            cols: kernel.first().map_or(0, Vec::len),
            states: n,
        });
    }
    let mut flat = Vec::with_capacity(n * n);
    for row in kernel {
        if row.len() != n {
            return Err(ArmError::DimensionMismatch {
                rows: kernel.len(),
                cols: row.len(),
                states: n,
            });
        }
        flat.extend_from_slice(row);
    }
    Ok(flat)
}

fn validate_stochastic(flat: &[f64], n: usize) -> Result<(), ArmError> {
    for row in 0..n {
        let mut sum = 0.0;
        for col in 0..n {
            let v = flat[row * n + col];
            if v < 0.0 || !v.is_finite() {
                return Err(ArmError::NegativeEntry {
                    row,
                    col,
                    value: v,
                });
            }
            sum += v;
        }
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(ArmError::NonStochasticRow { row, sum });
        }
    }
    Ok(())
}

/// Strong connectivity of the support graph: every state reachable from
/// state 0 and state 0 reachable from every state.
fn check_irreducible(flat: &[f64], n: usize) -> Result<(), ArmError> {
    let forward = reachable(flat, n, false);
    let backward = reachable(flat, n, true);
    let unreachable: Vec<usize> = (0..n).filter(|&s| !forward[s] || !backward[s]).collect();
    if unreachable.is_empty() {
        Ok(())
    } else {
        Err(ArmError::Reducible { unreachable })
    }
}

fn reachable(flat: &[f64], n: usize, transpose: bool) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            let p = if transpose {
                flat[v * n + u]
            } else {
                flat[u * n + v]
            };
            if p > 0.0 && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// Period = gcd over edges (u,v) of d(u) + 1 - d(v), with d the BFS levels
/// from state 0. Assumes irreducibility (checked first).
fn check_aperiodic(flat: &[f64], n: usize) -> Result<(), ArmError> {
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if flat[u * n + v] > 0.0 && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g: i64 = 0;
    for u in 0..n {
        for v in 0..n {
            if flat[u * n + v] > 0.0 {
                let diff = level[u] as i64 + 1 - level[v] as i64;
                g = gcd(g, diff.abs());
            }
        }
    }
    if g == 1 {
        Ok(())
    } else {
        Err(ArmError::Periodic { period: g as u64 })
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Solve pi P = pi, sum(pi) = 1 as a dense linear system: (P^T - I) with the
/// last row replaced by ones.
fn solve_stationary(flat: &[f64], n: usize) -> Result<Vec<f64>, ArmError> {
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = flat[j * n + i]; // transpose
        }
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| ArmError::StationarySolve("singular balance system".into()))?;
    let mut pi: Vec<f64> = pi.iter().copied().collect();
    for p in &mut pi {
        if *p < 0.0 && *p > -1e-9 {
            *p = 0.0;
        }
    }
    let sum: f64 = pi.iter().sum();
    for p in &mut pi {
        *p /= sum;
    }
    // residual check: pi P = pi
    for j in 0..n {
        let mut acc = 0.0;
        for i in 0..n {
            acc += pi[i] * flat[i * n + j];
        }
        if (acc - pi[j]).abs() > STATIONARY_TOL {
            return Err(ArmError::StationarySolve(format!(
                "pi P != pi at state {j}: residual {}",
                acc - pi[j]
            )));
        }
    }
    Ok(pi)
}

fn check_reversible(flat: &[f64], pi: &[f64], n: usize) -> Result<(), ArmError> {
    for a in 0..n {
        for b in (a + 1)..n {
            let forward = pi[a] * flat[a * n + b];
            let backward = pi[b] * flat[b * n + a];
            if (forward - backward).abs() > REVERSIBILITY_TOL {
                return Err(ArmError::NotReversible {
                    a,
                    b,
                    forward,
                    backward,
                });
            }
        }
    }
    Ok(())
}

/// Second-largest eigenvalue modulus via the symmetrization
/// S = diag(sqrt(pi)) P diag(1/sqrt(pi)); for reversible P this is symmetric,
/// so the spectrum is provably real.
fn second_eigenvalue_modulus(flat: &[f64], pi: &[f64], n: usize) -> f64 {
    if n == 1 {
        return 0.0;
    }
    let mut s = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = (pi[i] / pi[j]).sqrt() * flat[i * n + j];
        }
    }
    // scrub residual asymmetry before the symmetric eigensolver
    let s = (&s + s.transpose()) * 0.5;
    let mut eigs: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    // drop the Perron eigenvalue (the single value at 1)
    let (imax, _) = eigs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("real spectrum"))
        .expect("non-empty spectrum");
    eigs.swap_remove(imax);
    eigs.iter().fold(0.0f64, |m, &e| m.max(e.abs())).min(1.0)
}

/// Draw an index from a probability row; cumulative inverse transform with a
/// single uniform draw, so the RNG stream advances by exactly one value.
pub(crate) fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random_range(0.0..1.0);
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
