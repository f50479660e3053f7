//! Exact B/A functions for known dynamics, a brute-force trajectory-sum
//! oracle, the optimal posterior policy, and undiscounted Q value iteration
//! for the large-`beta` comparison.

use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId, TabularMdp};
use crate::numerics::{log_add_exp, logsumexp};
use crate::policy::ActionDistribution;

/// Default log-domain convergence tolerance for [`solve_exact_b`].
pub const DEFAULT_TOL: f64 = 1e-10;

/// Default sweep budget: `1000 * |S| * |A|`.
///
/// At small `beta` the recursion is close to a random walk on the state graph
/// and Gauss-Seidel sweeps contract slowly: a 10x10 maze at `beta = 0.1`
/// needs roughly `100 * |S| * |A|` sweeps to reach `1e-10`.
pub fn default_max_sweeps(mdp: &TabularMdp) -> usize {
    1000 * mdp.num_states() * mdp.num_actions()
}

/// `ln B(s, a)` for every state-action pair.
///
/// Terminal rows hold `ln(1/|A|)` so that `A(terminal) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BTable {
    num_actions: usize,
    beta: f64,
    log_b: Vec<f64>,
    terminal: Vec<bool>,
}

impl BTable {
    /// Fills every non-terminal entry with `init_log_b` and pins terminal rows.
    pub fn new(mdp: &TabularMdp, beta: f64, init_log_b: f64) -> Self {
        let na = mdp.num_actions();
        let pinned = Self::terminal_log_value(na);
        let terminal: Vec<bool> = mdp.states().map(|s| mdp.is_terminal(s)).collect();
        let log_b =
            terminal.iter().flat_map(|&t| std::iter::repeat_n(if t { pinned } else { init_log_b }, na)).collect();
        Self { num_actions: na, beta, log_b, terminal }
    }

    #[inline]
    pub fn terminal_log_value(num_actions: usize) -> f64 {
        -(num_actions as f64).ln()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn num_states(&self) -> usize {
        self.terminal.len()
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal[s.0]
    }

    #[inline]
    pub fn log_b(&self, s: StateId, a: ActionId) -> f64 {
        self.log_b[s.0 * self.num_actions + a.0]
    }

    #[inline]
    pub fn row(&self, s: StateId) -> &[f64] {
        let i = s.0 * self.num_actions;
        &self.log_b[i..i + self.num_actions]
    }

    /// `ln A(s) = logsumexp_a ln B(s, a)`.
    #[inline]
    pub fn log_a(&self, s: StateId) -> f64 {
        logsumexp(self.row(s))
    }

    pub(crate) fn set(&mut self, s: StateId, a: ActionId, v: f64) {
        debug_assert!(!self.terminal[s.0]);
        self.log_b[s.0 * self.num_actions + a.0] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.log_b
    }

    /// `beta * r + ln pi0 + ln sum_s' p(s'|s,a) A(s')` evaluated on this table.
    pub fn backup(&self, mdp: &TabularMdp, s: StateId, a: ActionId) -> f64 {
        let mut acc = f64::NEG_INFINITY;
        mdp.for_each_successor(s, a, |sp, p| {
            acc = log_add_exp(acc, p.ln() + self.log_a(sp));
        });
        self.beta * mdp.reward(s, a) + mdp.log_pi0(s, a) + acc
    }

    /// Largest `|ln B(s,a) - backup(s,a)|` over non-terminal pairs.
    pub fn bellman_residual(&self, mdp: &TabularMdp) -> f64 {
        let mut worst = 0.0f64;
        for s in mdp.states().filter(|&s| !self.is_terminal(s)) {
            for a in mdp.actions() {
                worst = worst.max((self.log_b(s, a) - self.backup(mdp, s, a)).abs());
            }
        }
        worst
    }
}

/// Solves the B recursion for known dynamics by repeated in-place log-domain
/// sweeps until the largest per-sweep change drops below `tol`.
pub fn solve_exact_b(mdp: &TabularMdp, beta: f64, tol: f64, max_sweeps: usize) -> Result<BTable> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidConfig(format!("beta must be positive, got {beta}")));
    }
    let mut b = BTable::new(mdp, beta, BTable::terminal_log_value(mdp.num_actions()));
    let active: Vec<StateId> = mdp.states().filter(|&s| !mdp.is_terminal(s)).collect();
    if active.is_empty() {
        return Ok(b);
    }
    let mut residual = f64::INFINITY;
    for _ in 0..max_sweeps {
        residual = 0.0;
        for &s in &active {
            for a in mdp.actions() {
                let v = b.backup(mdp, s, a);
                if !v.is_finite() {
                    return Err(Error::NotConverged { iterations: max_sweeps, residual: f64::INFINITY });
                }
                residual = residual.max((v - b.log_b(s, a)).abs());
                b.set(s, a, v);
            }
        }
        if residual < tol {
            return Ok(b);
        }
    }
    Err(Error::NotConverged { iterations: max_sweeps, residual })
}

/// Result of an explicit trajectory enumeration, in log domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySum {
    /// Log of the summed weight of trajectories that reached a terminal.
    pub log_value: f64,
    /// Log of the summed weight of prefixes cut at the horizon; `-inf` when
    /// every trajectory terminated.
    pub log_truncated: f64,
}

/// Enumerates every trajectory that starts with `(s0, a0)` and has at most
/// `horizon` actions, summing `exp(beta * sum r) * prod pi0 * prod p` over
/// those that end in a terminal state.
pub fn trajectory_sum(mdp: &TabularMdp, beta: f64, s0: StateId, a0: ActionId, horizon: usize) -> TrajectorySum {
    let mut acc = TrajectorySum { log_value: f64::NEG_INFINITY, log_truncated: f64::NEG_INFINITY };
    if mdp.is_terminal(s0) {
        acc.log_value = BTable::terminal_log_value(mdp.num_actions());
        return acc;
    }
    if horizon == 0 {
        acc.log_truncated = 0.0;
        return acc;
    }
    expand(mdp, beta, s0, a0, 1, horizon, 0.0, &mut acc);
    acc
}

#[allow(clippy::too_many_arguments)]
fn expand(
    mdp: &TabularMdp,
    beta: f64,
    s: StateId,
    a: ActionId,
    depth: usize,
    horizon: usize,
    log_prefix: f64,
    acc: &mut TrajectorySum,
) {
    let lw = log_prefix + beta * mdp.reward(s, a) + mdp.log_pi0(s, a);
    mdp.for_each_successor(s, a, |sp, p| {
        let lw = lw + p.ln();
        if mdp.is_terminal(sp) {
            acc.log_value = log_add_exp(acc.log_value, lw);
        } else if depth == horizon {
            acc.log_truncated = log_add_exp(acc.log_truncated, lw);
        } else {
            for ap in mdp.actions() {
                expand(mdp, beta, sp, ap, depth + 1, horizon, lw, acc);
            }
        }
    });
}

/// `ln B(s0, a0)` by explicit enumeration. Fails if any trajectory is still
/// running at `horizon`, since the sum would then be incomplete.
pub fn brute_force_b(mdp: &TabularMdp, beta: f64, s0: StateId, a0: ActionId, horizon: usize) -> Result<f64> {
    let sum = trajectory_sum(mdp, beta, s0, a0, horizon);
    if sum.log_truncated > f64::NEG_INFINITY {
        return Err(Error::UnterminatedTrajectory { state: s0, horizon });
    }
    Ok(sum.log_value)
}

/// The optimal posterior policy at `s`: `B(s, a) / A(s)`.
pub fn optimal_policy_from_b(b: &BTable, s: StateId) -> ActionDistribution {
    ActionDistribution::from_log_weights(b.row(s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_actions: usize,
    q: Vec<f64>,
    terminal: Vec<bool>,
}

impl QTable {
    #[inline]
    pub fn q(&self, s: StateId, a: ActionId) -> f64 {
        self.q[s.0 * self.num_actions + a.0]
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        let i = s.0 * self.num_actions;
        &self.q[i..i + self.num_actions]
    }

    pub fn value(&self, s: StateId) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal[s.0]
    }

    /// Lowest-index action with maximal Q.
    pub fn greedy_action(&self, s: StateId) -> ActionId {
        let row = self.row(s);
        let mut best = 0;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        ActionId(best)
    }
}

/// Undiscounted value iteration with `Q(terminal, .) = 0`, run to sup-norm
/// change below `tol`.
pub fn value_iteration_q(mdp: &TabularMdp, tol: f64) -> Result<QTable> {
    let na = mdp.num_actions();
    let terminal: Vec<bool> = mdp.states().map(|s| mdp.is_terminal(s)).collect();
    let mut table = QTable { num_actions: na, q: vec![0.0; mdp.num_states() * na], terminal };
    let max_sweeps = 10 * mdp.num_states() * na + 100;
    let mut delta = f64::INFINITY;
    for _ in 0..max_sweeps {
        delta = 0.0;
        for s in mdp.states().filter(|&s| !mdp.is_terminal(s)) {
            for a in mdp.actions() {
                let mut future = 0.0;
                mdp.for_each_successor(s, a, |sp, p| {
                    if !mdp.is_terminal(sp) {
                        future += p * table.value(sp);
                    }
                });
                let v = mdp.reward(s, a) + future;
                let i = s.0 * na + a.0;
                delta = delta.max((v - table.q[i]).abs());
                table.q[i] = v;
            }
        }
        if delta < tol {
            return Ok(table);
        }
    }
    Err(Error::NotConverged { iterations: max_sweeps, residual: delta })
}

/// `max |ln B(s,a) / beta - Q*(s,a)|` over non-terminal pairs.
pub fn value_limit_deviation(b: &BTable, q: &QTable) -> f64 {
    let na = b.num_actions();
    (0..b.num_states())
        .map(StateId)
        .filter(|&s| !b.is_terminal(s))
        .flat_map(|s| (0..na).map(move |a| (s, ActionId(a))))
        .map(|(s, a)| (b.log_b(s, a) / b.beta() - q.q(s, a)).abs())
        .fold(0.0, f64::max)
}
