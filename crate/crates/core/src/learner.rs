//! Stochastic-approximation learning of the B table from experience.
//!
//! Each observed transition `(s, a, r, s')` yields the one-sample estimate
//! `B~ = exp(beta r) pi0(a|s) sum_a' B(s', a')` and the table entry moves
//! toward it, `B <- (1 - rho) B + rho B~`, with `rho` decaying in the
//! per-pair visit count. The mixing is done in log domain. A workable `beta`
//! is on the order of `1 / |r|` for a typical reward `r`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, EpisodeRecord, StateId, Step, TabularMdp};
use crate::numerics::{log_add_exp, logsumexp};
use crate::policy::{bayes_policy_from_b, sample_action, ActionDistribution};
use crate::posterior::BTable;
use crate::prior::PriorMemory;

/// `rho(n) = rho0 * tau / (tau + n)`; an infinite `tau` gives the constant
/// rate `rho0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub rho0: f64,
    pub tau: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { rho0: 1.0, tau: 100.0 }
    }
}

pub fn learning_rate(schedule: &Schedule, n: u64) -> f64 {
    if schedule.tau.is_infinite() {
        return schedule.rho0;
    }
    schedule.rho0 * schedule.tau / (schedule.tau + n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    pub beta: f64,
    pub schedule: Schedule,
    pub max_steps_per_episode: usize,
    /// Initial `ln B` for non-terminal pairs; `None` means `ln(1/|A|)`.
    pub init_log_b: Option<f64>,
    /// Re-apply the update to pairs the prior has blocked each time their
    /// state is visited, using the remembered outcome (same state, bump
    /// reward). Masked actions are never sampled, so without this their
    /// entries freeze at the value from the single bump that blocked them
    /// and keep inflating `A(s)` long after the rest of the row has decayed.
    pub refresh_blocked: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            beta: 1000.0,
            schedule: Schedule::default(),
            max_steps_per_episode: 10_000,
            init_log_b: None,
            refresh_blocked: true,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {}", self.beta)));
        }
        let rho0 = self.schedule.rho0;
        if !(rho0 > 0.0 && rho0 <= 1.0) {
            return Err(Error::InvalidConfig(format!("rho0 must lie in (0, 1], got {rho0}")));
        }
        if self.schedule.tau.is_nan() || self.schedule.tau <= 0.0 {
            return Err(Error::InvalidConfig(format!("tau must be positive, got {}", self.schedule.tau)));
        }
        if self.max_steps_per_episode == 0 {
            return Err(Error::InvalidConfig("max_steps_per_episode must be at least 1".into()));
        }
        if let Some(v) = self.init_log_b {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("init_log_b must be finite, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LearnerState {
    b: BTable,
    visit_counts: Vec<u64>,
    config: LearnerConfig,
}

impl LearnerState {
    pub fn new(mdp: &TabularMdp, config: LearnerConfig) -> Result<Self> {
        config.validate()?;
        let init = config.init_log_b.unwrap_or_else(|| BTable::terminal_log_value(mdp.num_actions()));
        Ok(Self {
            b: BTable::new(mdp, config.beta, init),
            visit_counts: vec![0; mdp.num_states() * mdp.num_actions()],
            config,
        })
    }

    pub fn b(&self) -> &BTable {
        &self.b
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn visits(&self, s: StateId, a: ActionId) -> u64 {
        self.visit_counts[s.0 * self.b.num_actions() + a.0]
    }

    /// Replays the update for every pair blocked at `s`; a blocked pair is
    /// known to leave the state unchanged.
    pub fn refresh_blocked(&mut self, mdp: &TabularMdp, memory: &PriorMemory, s: StateId) -> Result<()> {
        for a in mdp.actions() {
            if let Some(r) = memory.blocked_reward(s, a) {
                self.td_update(mdp, s, a, r, s)?;
            }
        }
        Ok(())
    }

    /// One stochastic-approximation step on `(s, a)` given the observed
    /// reward and successor. Terminal rows are never touched.
    pub fn td_update(&mut self, mdp: &TabularMdp, s: StateId, a: ActionId, r: f64, s_next: StateId) -> Result<()> {
        if mdp.is_terminal(s) {
            return Err(Error::StepFromTerminal(s));
        }
        let i = s.0 * mdp.num_actions() + a.0;
        let rho = learning_rate(&self.config.schedule, self.visit_counts[i]);
        let log_target = self.config.beta * r + mdp.log_pi0(s, a) + logsumexp(self.b.row(s_next));
        let old = self.b.log_b(s, a);
        let new = if rho >= 1.0 {
            log_target
        } else if rho <= 0.0 {
            old
        } else {
            log_add_exp((-rho).ln_1p() + old, rho.ln() + log_target)
        };
        self.b.set(s, a, new);
        self.visit_counts[i] += 1;
        Ok(())
    }
}

/// Source of the behaviour distribution used to pick actions during
/// learning.
pub trait BehaviourPolicy {
    fn distribution(
        &self,
        b: &BTable,
        prior: Option<&PriorMemory>,
        s: StateId,
        prev_action: Option<ActionId>,
    ) -> ActionDistribution;
}

/// `q(a | s, M) ∝ B(s, a) f(a; M)`, or `∝ B(s, a)` when no memory is given.
#[derive(Debug, Clone, Copy, Default)]
pub struct BayesBehaviour;

impl BehaviourPolicy for BayesBehaviour {
    fn distribution(
        &self,
        b: &BTable,
        prior: Option<&PriorMemory>,
        s: StateId,
        prev_action: Option<ActionId>,
    ) -> ActionDistribution {
        bayes_policy_from_b(b, prior, s, prev_action)
    }
}

/// Runs one episode from the MDP's start state, updating the table online
/// after every step. Stops at a terminal state or after
/// `max_steps_per_episode` steps (`terminated = false`).
pub fn run_episode<P, R>(
    mdp: &TabularMdp,
    learner: &mut LearnerState,
    policy: &P,
    mut prior: Option<&mut PriorMemory>,
    rng: &mut R,
) -> Result<EpisodeRecord>
where
    P: BehaviourPolicy + ?Sized,
    R: Rng + ?Sized,
{
    let mut record = EpisodeRecord::default();
    let mut s = mdp.start();
    let mut prev = None;
    if let Some(mem) = prior.as_deref_mut() {
        mem.begin_episode();
    }
    while !mdp.is_terminal(s) && record.steps.len() < learner.config.max_steps_per_episode {
        if learner.config.refresh_blocked {
            if let Some(mem) = prior.as_deref() {
                learner.refresh_blocked(mdp, mem, s)?;
            }
        }
        let dist = policy.distribution(&learner.b, prior.as_deref(), s, prev);
        let a = sample_action(&dist, rng);
        let (next, r) = mdp.step(s, a, rng)?;
        if let Some(mem) = prior.as_deref_mut() {
            mem.observe_transition(s, a, r, next);
        }
        learner.td_update(mdp, s, a, r, next)?;
        record.steps.push(Step { state: s, action: a, reward: r, next_state: next });
        prev = Some(a);
        s = next;
    }
    record.terminated = mdp.is_terminal(s);
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maze::{generate_maze, Direction, Maze};
    use crate::posterior::{solve_exact_b, DEFAULT_TOL};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state() -> TabularMdp {
        TabularMdp::deterministic(
            2,
            2,
            vec![StateId(1), StateId(0), StateId(1), StateId(1)],
            vec![1.0, -0.001, 0.0, 0.0],
            &[StateId(1)],
            StateId(0),
        )
        .unwrap()
    }

    #[test]
    fn rate_formula() {
        let s = Schedule { rho0: 0.7, tau: 100.0 };
        assert_eq!(learning_rate(&s, 0), 0.7);
        assert_eq!(learning_rate(&Schedule { rho0: 1.0, tau: 1.0 }, 1), 0.5);
        assert_eq!(learning_rate(&Schedule { rho0: 0.3, tau: f64::INFINITY }, 1_000_000), 0.3);
    }

    #[test]
    fn rates_satisfy_robbins_monro_shape() {
        // sum rho_n ~ tau ln N diverges; sum rho_n^2 stays below tau^2 * pi^2/6.
        let s = Schedule { rho0: 1.0, tau: 100.0 };
        let partial = |n: u64| (0..n).map(|k| learning_rate(&s, k)).sum::<f64>();
        let (s1, s2) = (partial(100_000), partial(1_000_000));
        assert!(s2 - s1 > 100.0 * (10f64).ln() * 0.99);
        let sq: f64 = (0..1_000_000u64).map(|k| learning_rate(&s, k).powi(2)).sum();
        assert!(sq < 100.0 * 100.0 * std::f64::consts::PI.powi(2) / 6.0);
    }

    #[test]
    fn init_fills_and_pins() {
        let mm = Maze::parse("S.\n.G").unwrap().to_mdp(-0.001, 1.0).unwrap();
        let l = LearnerState::new(&mm.mdp, LearnerConfig::default()).unwrap();
        assert!(l.b().entries().iter().all(|&x| x == 0.25f64.ln()));
        let goal = mm.state(mm.cells[3]).unwrap();
        assert!(l.b().log_a(goal).abs() < 1e-15);

        let zero = LearnerConfig { init_log_b: Some(0.0), ..Default::default() };
        let l = LearnerState::new(&mm.mdp, zero).unwrap();
        assert_eq!(l.b().log_b(StateId(0), ActionId(1)), 0.0);
        assert_eq!(l.b().log_b(goal, ActionId(1)), 0.25f64.ln());
    }

    #[test]
    fn config_validation() {
        let bad = [
            LearnerConfig { beta: 0.0, ..Default::default() },
            LearnerConfig { schedule: Schedule { rho0: 1.5, tau: 1.0 }, ..Default::default() },
            LearnerConfig { schedule: Schedule { rho0: 0.0, tau: 1.0 }, ..Default::default() },
            LearnerConfig { max_steps_per_episode: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn full_replacement_at_rate_one() {
        let mdp = two_state();
        let cfg = LearnerConfig { beta: 2.0, ..Default::default() };
        let mut l = LearnerState::new(&mdp, cfg).unwrap();
        l.td_update(&mdp, StateId(0), ActionId(1), -0.001, StateId(0)).unwrap();
        // beta r + ln pi0 + logsumexp(row) with row = [ln .5, ln .5]
        let expected = 2.0 * -0.001 + 0.5f64.ln() + 0.0;
        assert!((l.b().log_b(StateId(0), ActionId(1)) - expected).abs() < 1e-15);
        assert_eq!(l.visits(StateId(0), ActionId(1)), 1);
    }

    #[test]
    fn tiny_rate_leaves_value_nearly_unchanged() {
        let mdp = two_state();
        let cfg =
            LearnerConfig { beta: 1.0, schedule: Schedule { rho0: 1e-300, tau: f64::INFINITY }, ..Default::default() };
        let mut l = LearnerState::new(&mdp, cfg).unwrap();
        let before = l.b().log_b(StateId(0), ActionId(0));
        l.td_update(&mdp, StateId(0), ActionId(0), 1.0, StateId(1)).unwrap();
        assert!((l.b().log_b(StateId(0), ActionId(0)) - before).abs() < 1e-290);
    }

    #[test]
    fn terminal_update_rejected() {
        let mdp = two_state();
        let mut l = LearnerState::new(&mdp, LearnerConfig::default()).unwrap();
        assert!(l.td_update(&mdp, StateId(1), ActionId(0), 0.0, StateId(1)).is_err());
    }

    #[test]
    fn converges_on_two_state() {
        let mdp = two_state();
        let exact = solve_exact_b(&mdp, 1.0, DEFAULT_TOL, 1000).unwrap();
        let cfg = LearnerConfig { beta: 1.0, ..Default::default() };
        let mut l = LearnerState::new(&mdp, cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100_000 {
            let a = ActionId(rng.gen_range(0..2));
            let (sn, r) = mdp.step(StateId(0), a, &mut rng).unwrap();
            l.td_update(&mdp, StateId(0), a, r, sn).unwrap();
        }
        for a in [ActionId(0), ActionId(1)] {
            let err = (l.b().log_b(StateId(0), a) - exact.log_b(StateId(0), a)).abs();
            assert!(err < 1e-3, "a={a} err={err}");
        }
    }

    #[test]
    fn rate_one_backward_sweeps_reproduce_exact_solution() {
        let maze = generate_maze(5, 4, 9).unwrap();
        let mm = maze.to_mdp(-0.001, 1.0).unwrap();
        let mdp = &mm.mdp;
        let beta = 10.0;
        let exact = solve_exact_b(mdp, beta, 1e-13, 100_000).unwrap();
        let cfg = LearnerConfig { beta, schedule: Schedule { rho0: 1.0, tau: f64::INFINITY }, ..Default::default() };
        let mut l = LearnerState::new(mdp, cfg).unwrap();
        // order states by distance to the goal so each sweep unfolds the recursion backwards
        let dist = maze.distances_from(maze.goal());
        let mut order: Vec<StateId> = mdp.states().filter(|&s| !mdp.is_terminal(s)).collect();
        order.sort_by_key(|&s| {
            let c = mm.cell(s);
            dist[c.row * maze.width() + c.col]
        });
        for _ in 0..20_000 {
            for &s in &order {
                for a in mdp.actions() {
                    let sn = mdp.next_state(s, a).unwrap();
                    l.td_update(mdp, s, a, mdp.reward(s, a), sn).unwrap();
                }
            }
        }
        for s in mdp.states() {
            for a in mdp.actions() {
                assert!((l.b().log_b(s, a) - exact.log_b(s, a)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn episode_of_length_one_next_to_goal() {
        let mm = Maze::parse("SG").unwrap().to_mdp(-0.001, 1.0).unwrap();
        let mut l = LearnerState::new(&mm.mdp, LearnerConfig::default()).unwrap();
        let right = Direction::Right.action();
        // make "right" overwhelmingly likely
        l.b.set(mm.mdp.start(), right, 1000.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rec = run_episode(&mm.mdp, &mut l, &BayesBehaviour, None, &mut rng).unwrap();
        assert_eq!(rec.len(), 1);
        assert!(rec.terminated);
    }

    #[test]
    fn step_cap_stops_episode() {
        let maze = generate_maze(10, 10, 0).unwrap();
        assert!(maze.distances_from(maze.start())[99].unwrap() > 10);
        let mm = maze.to_mdp(-0.001, 1.0).unwrap();
        let cfg = LearnerConfig { max_steps_per_episode: 10, ..Default::default() };
        let mut l = LearnerState::new(&mm.mdp, cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rec = run_episode(&mm.mdp, &mut l, &BayesBehaviour, None, &mut rng).unwrap();
        assert_eq!(rec.len(), 10);
        assert!(!rec.terminated);
        assert!(rec.is_chained());
        assert!(rec.replays_on(&mm.mdp));
    }

    #[test]
    fn episodes_reproducible_under_seed() {
        let mm = generate_maze(6, 6, 2).unwrap().to_mdp(-0.001, 1.0).unwrap();
        let lengths = || {
            let mut l = LearnerState::new(&mm.mdp, LearnerConfig::default()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            (0..20)
                .map(|_| run_episode(&mm.mdp, &mut l, &BayesBehaviour, None, &mut rng).unwrap().len())
                .collect::<Vec<_>>()
        };
        assert_eq!(lengths(), lengths());
    }

    #[test]
    fn blocked_pairs_are_refreshed_on_revisit() {
        // S is a corridor end: up, down and left bump walls.
        let mm = Maze::parse("S.G").unwrap().to_mdp(-0.001, 1.0).unwrap();
        let mdp = &mm.mdp;
        let s = mdp.start();
        let up = Direction::Up.action();
        let mut mem = PriorMemory::new(4, crate::prior::PriorRules::FIRST_ORDER);
        let mut l = LearnerState::new(mdp, LearnerConfig::default()).unwrap();
        mem.observe_transition(s, up, mdp.reward(s, up), s);
        l.td_update(mdp, s, up, mdp.reward(s, up), s).unwrap();
        let after_bump = l.b().log_b(s, up);
        l.refresh_blocked(mdp, &mem, s).unwrap();
        assert_eq!(l.visits(s, up), 2);
        assert!(l.b().log_b(s, up) < after_bump);
        for a in [Direction::Down.action(), Direction::Right.action(), Direction::Left.action()] {
            assert_eq!(l.visits(s, a), 0);
        }

        let frozen = LearnerConfig { refresh_blocked: false, ..Default::default() };
        let mut l = LearnerState::new(mdp, frozen).unwrap();
        l.td_update(mdp, s, up, mdp.reward(s, up), s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        run_episode(mdp, &mut l, &BayesBehaviour, Some(&mut mem), &mut rng).unwrap();
        assert_eq!(l.visits(s, up), 1);
    }

    #[test]
    fn terminal_rows_stay_pinned_through_learning() {
        let mm = generate_maze(5, 5, 4).unwrap().to_mdp(-0.001, 1.0).unwrap();
        let mut l = LearnerState::new(&mm.mdp, LearnerConfig::default()).unwrap();
        let mut mem = PriorMemory::new(4, crate::prior::PriorRules::BOTH);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            run_episode(&mm.mdp, &mut l, &BayesBehaviour, Some(&mut mem), &mut rng).unwrap();
        }
        for t in mm.mdp.terminals() {
            assert_eq!(l.b().log_a(t).exp(), 1.0);
            assert!(l.b().row(t).iter().all(|&x| x == 0.25f64.ln()));
        }
        assert!(l.b().entries().iter().all(|x| x.is_finite()));
    }
}
