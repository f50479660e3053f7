//! Tabular probabilistic reinforcement learning with rule-based Bayesian
//! behaviour policies.
//!
//! The engine works with the state-action weight `B(s, a)`, the unnormalised
//! posterior over the current action given that all future rewards are
//! "observed" through exponentiated reward factors `exp(beta * r)`. `B`
//! satisfies a linear Bellman-type recursion
//!
//! ```text
//! B(s, a) = exp(beta * r(s, a)) * pi0(a | s) * sum_s' p(s' | s, a) * A(s')
//! A(s)    = sum_a B(s, a),       A(s) = 1 for terminal s
//! ```
//!
//! which is solved exactly ([`posterior`]) or learned from experience by
//! stochastic approximation ([`learner`]). Behaviour policies combine `B`
//! with a prior built from deterministic rules ([`prior`], [`policy`]) and
//! [`experiment`] reproduces the maze transfer-learning study.
//!
//! Every quantity involving `B` is stored as a natural logarithm.

pub mod error;
pub mod experiment;
pub mod learner;
pub mod maze;
pub mod mdp;
pub mod numerics;
pub mod policy;
pub mod posterior;
pub mod prior;

pub use error::{Error, Result};
pub use mdp::{ActionId, EpisodeRecord, StateId, Step, TabularMdp};
