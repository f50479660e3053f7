//! Tabular episodic MDPs and trajectory records.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub usize);

impl StateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl ActionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Transition storage, indexed by `s * num_actions + a`.
#[derive(Debug, Clone, PartialEq)]
pub enum Transitions {
    /// One successor per state-action pair.
    Deterministic(Vec<StateId>),
    /// Sparse successor distribution per state-action pair.
    Stochastic(Vec<Vec<(StateId, f64)>>),
}

/// A finite episodic MDP with deterministic rewards `r(s, a)` and a baseline
/// policy `pi0` stored as log-probabilities.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    transitions: Transitions,
    reward: Vec<f64>,
    terminal: Vec<bool>,
    start: StateId,
    log_pi0: Vec<f64>,
}

impl TabularMdp {
    /// Builds an MDP with a deterministic successor table and uniform `pi0`.
    pub fn deterministic(
        num_states: usize,
        num_actions: usize,
        next_state: Vec<StateId>,
        reward: Vec<f64>,
        terminals: &[StateId],
        start: StateId,
    ) -> Result<Self> {
        Self::build(num_states, num_actions, Transitions::Deterministic(next_state), reward, terminals, start)
    }

    /// Builds an MDP from sparse successor distributions and uniform `pi0`.
    pub fn stochastic(
        num_states: usize,
        num_actions: usize,
        rows: Vec<Vec<(StateId, f64)>>,
        reward: Vec<f64>,
        terminals: &[StateId],
        start: StateId,
    ) -> Result<Self> {
        Self::build(num_states, num_actions, Transitions::Stochastic(rows), reward, terminals, start)
    }

    fn build(
        num_states: usize,
        num_actions: usize,
        transitions: Transitions,
        reward: Vec<f64>,
        terminals: &[StateId],
        start: StateId,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidMdp("need at least one state and one action".into()));
        }
        let n = num_states * num_actions;
        match &transitions {
            Transitions::Deterministic(next) => {
                if next.len() != n {
                    return Err(Error::InvalidMdp(format!("successor table has {} entries, expected {n}", next.len())));
                }
                if let Some(bad) = next.iter().find(|s| s.0 >= num_states) {
                    return Err(Error::InvalidMdp(format!("successor {bad} out of range")));
                }
            }
            Transitions::Stochastic(rows) => {
                if rows.len() != n {
                    return Err(Error::InvalidMdp(format!("transition table has {} rows, expected {n}", rows.len())));
                }
                for (i, row) in rows.iter().enumerate() {
                    let mut sum = 0.0;
                    for &(s, p) in row {
                        if s.0 >= num_states {
                            return Err(Error::InvalidMdp(format!("successor {s} out of range")));
                        }
                        if !(p.is_finite() && p >= 0.0) {
                            return Err(Error::InvalidMdp(format!("row {i} has invalid probability {p}")));
                        }
                        sum += p;
                    }
                    if (sum - 1.0).abs() > ROW_SUM_TOL {
                        return Err(Error::InvalidMdp(format!("row {i} sums to {sum}")));
                    }
                }
            }
        }
        if reward.len() != n {
            return Err(Error::InvalidMdp(format!("reward table has {} entries, expected {n}", reward.len())));
        }
        if let Some(r) = reward.iter().find(|r| !r.is_finite()) {
            return Err(Error::InvalidMdp(format!("non-finite reward {r}")));
        }
        let mut terminal = vec![false; num_states];
        for &t in terminals {
            if t.0 >= num_states {
                return Err(Error::InvalidMdp(format!("terminal {t} out of range")));
            }
            terminal[t.0] = true;
        }
        if start.0 >= num_states {
            return Err(Error::InvalidMdp(format!("start {start} out of range")));
        }
        let uniform = -(num_actions as f64).ln();
        Ok(Self { num_states, num_actions, transitions, reward, terminal, start, log_pi0: vec![uniform; n] })
    }

    /// Replaces the uniform baseline policy. Rows must be normalised
    /// log-distributions with every entry finite.
    pub fn with_baseline(mut self, log_pi0: Vec<f64>) -> Result<Self> {
        if log_pi0.len() != self.num_states * self.num_actions {
            return Err(Error::InvalidMdp("baseline table has wrong size".into()));
        }
        for (s, row) in log_pi0.chunks(self.num_actions).enumerate() {
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidMdp(format!("baseline row {s} has a zero or non-finite entry")));
            }
            let sum: f64 = row.iter().map(|x| x.exp()).sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidMdp(format!("baseline row {s} sums to {sum}")));
            }
        }
        self.log_pi0 = log_pi0;
        Ok(self)
    }

    #[inline]
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn transitions(&self) -> &Transitions {
        &self.transitions
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.transitions, Transitions::Deterministic(_))
    }

    #[inline]
    fn idx(&self, s: StateId, a: ActionId) -> usize {
        debug_assert!(s.0 < self.num_states && a.0 < self.num_actions);
        s.0 * self.num_actions + a.0
    }

    #[inline]
    pub fn reward(&self, s: StateId, a: ActionId) -> f64 {
        self.reward[self.idx(s, a)]
    }

    #[inline]
    pub fn log_pi0(&self, s: StateId, a: ActionId) -> f64 {
        self.log_pi0[self.idx(s, a)]
    }

    #[inline]
    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal[s.0]
    }

    pub fn terminals(&self) -> impl Iterator<Item = StateId> + '_ {
        self.terminal.iter().enumerate().filter(|(_, &t)| t).map(|(i, _)| StateId(i))
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.num_states).map(StateId)
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionId> {
        (0..self.num_actions).map(ActionId)
    }

    /// Successor for deterministic MDPs, `None` for stochastic ones.
    pub fn next_state(&self, s: StateId, a: ActionId) -> Option<StateId> {
        match &self.transitions {
            Transitions::Deterministic(next) => Some(next[self.idx(s, a)]),
            Transitions::Stochastic(_) => None,
        }
    }

    /// Calls `f(s', p)` for every successor with non-zero probability.
    pub fn for_each_successor(&self, s: StateId, a: ActionId, mut f: impl FnMut(StateId, f64)) {
        match &self.transitions {
            Transitions::Deterministic(next) => f(next[self.idx(s, a)], 1.0),
            Transitions::Stochastic(rows) => {
                for &(sp, p) in &rows[self.idx(s, a)] {
                    if p > 0.0 {
                        f(sp, p);
                    }
                }
            }
        }
    }

    /// Samples a successor and returns it along with `r(s, a)`.
    pub fn step<R: Rng + ?Sized>(&self, s: StateId, a: ActionId, rng: &mut R) -> Result<(StateId, f64)> {
        if self.is_terminal(s) {
            return Err(Error::StepFromTerminal(s));
        }
        let i = self.idx(s, a);
        let next = match &self.transitions {
            Transitions::Deterministic(next) => next[i],
            Transitions::Stochastic(rows) => {
                let row = &rows[i];
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut chosen = None;
                for &(sp, p) in row {
                    if p <= 0.0 {
                        continue;
                    }
                    acc += p;
                    chosen = Some(sp);
                    if u < acc {
                        break;
                    }
                }
                chosen.expect("validated rows have positive mass")
            }
        };
        Ok((next, self.reward[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: StateId,
    pub action: ActionId,
    pub reward: f64,
    pub next_state: StateId,
}

/// One trajectory, either ending in a terminal state or cut at the step cap.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeRecord {
    pub steps: Vec<Step>,
    pub terminated: bool,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// True when every step starts where the previous one ended.
    pub fn is_chained(&self) -> bool {
        self.steps.windows(2).all(|w| w[0].next_state == w[1].state)
    }

    /// Re-executes the recorded actions on a deterministic MDP and checks that
    /// states and rewards come out identical.
    pub fn replays_on(&self, mdp: &TabularMdp) -> bool {
        self.steps.iter().all(|st| {
            mdp.next_state(st.state, st.action) == Some(st.next_state) && mdp.reward(st.state, st.action) == st.reward
        })
    }
}
