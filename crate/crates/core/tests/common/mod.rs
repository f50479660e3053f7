//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use btrl::{StateId, TabularMdp};
use rand::Rng;

/// A random episodic MDP whose states are topologically ordered: every
/// transition moves to a strictly later state and the last state is
/// terminal, so every trajectory ends within `num_states - 1` steps.
/// Successor distributions, rewards in `[-1, 1]` and the baseline policy are
/// all random.
pub fn random_dag_mdp<R: Rng>(rng: &mut R, num_states: usize, num_actions: usize) -> TabularMdp {
    assert!(num_states >= 2 && num_actions >= 1);
    let terminal = StateId(num_states - 1);
    let mut rows = Vec::with_capacity(num_states * num_actions);
    let mut reward = Vec::with_capacity(num_states * num_actions);
    for s in 0..num_states {
        for _ in 0..num_actions {
            if s + 1 == num_states {
                rows.push(vec![(terminal, 1.0)]);
                reward.push(0.0);
                continue;
            }
            let fanout = rng.gen_range(1..=num_states - 1 - s);
            let mut targets: Vec<usize> = (s + 1..num_states).collect();
            for i in 0..fanout {
                let j = rng.gen_range(i..targets.len());
                targets.swap(i, j);
            }
            targets.truncate(fanout);
            let weights: Vec<f64> = targets.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            rows.push(targets.iter().zip(&weights).map(|(&t, w)| (StateId(t), w / total)).collect());
            reward.push(rng.gen_range(-1.0..=1.0));
        }
    }
    let mut log_pi0 = Vec::with_capacity(num_states * num_actions);
    for _ in 0..num_states {
        let w: Vec<f64> = (0..num_actions).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        log_pi0.extend(w.iter().map(|x| (x / total).ln()));
    }
    TabularMdp::stochastic(num_states, num_actions, rows, reward, &[terminal], StateId(0))
        .and_then(|m| m.with_baseline(log_pi0))
        .expect("generated MDP is valid")
}
