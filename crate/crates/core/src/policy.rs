//! Behaviour policies: the B-proportional posterior, optionally masked by the
//! rule prior, and the Boltzmann policy over Q values.

use rand::Rng;

use crate::mdp::{ActionId, StateId};
use crate::numerics::normalize_log_weights;
use crate::posterior::BTable;
use crate::prior::PriorMemory;

/// A probability vector over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    probs: Vec<f64>,
}

impl ActionDistribution {
    /// `exp(x - max) / sum`; entries of `-inf` get probability exactly zero.
    pub fn from_log_weights(log_w: &[f64]) -> Self {
        Self { probs: normalize_log_weights(log_w) }
    }

    pub fn uniform(n: usize) -> Self {
        Self { probs: vec![1.0 / n as f64; n] }
    }

    pub fn point_mass(n: usize, a: ActionId) -> Self {
        let mut probs = vec![0.0; n];
        probs[a.0] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Lowest-index most probable action.
    pub fn argmax(&self) -> ActionId {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        ActionId(best)
    }
}

/// `q(a | s, M) ∝ B(s, a) * f(a; M)`.
///
/// Without a memory this is the plain on-policy `p(a | s) ∝ B(s, a)`. If the
/// prior rules out every action the prior is ignored for this step and the
/// uniform distribution is returned.
pub fn bayes_policy_from_b(
    b: &BTable,
    mem: Option<&PriorMemory>,
    s: StateId,
    prev_action: Option<ActionId>,
) -> ActionDistribution {
    let row = b.row(s);
    let Some(mem) = mem else {
        return ActionDistribution::from_log_weights(row);
    };
    let mut masked = row.to_vec();
    let mut any = false;
    for (a, w) in masked.iter_mut().enumerate() {
        if mem.prior_f(s, ActionId(a), prev_action) == 0 {
            *w = f64::NEG_INFINITY;
        } else {
            any = true;
        }
    }
    if any {
        ActionDistribution::from_log_weights(&masked)
    } else {
        ActionDistribution::uniform(row.len())
    }
}

/// Boltzmann policy `exp(beta * Q) / sum exp(beta * Q)`.
pub fn softmax_q_policy(q_row: &[f64], beta: f64) -> ActionDistribution {
    let scaled: Vec<f64> = q_row.iter().map(|&q| beta * q).collect();
    ActionDistribution::from_log_weights(&scaled)
}

/// Inverse-CDF sampling. Zero-probability actions are never returned.
pub fn sample_action<R: Rng + ?Sized>(dist: &ActionDistribution, rng: &mut R) -> ActionId {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = None;
    for (i, &p) in dist.probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(i);
        if u < acc {
            return ActionId(i);
        }
    }
    // Rounding can leave acc slightly below u; take the last supported action.
    ActionId(last.expect("distribution has no support"))
}
