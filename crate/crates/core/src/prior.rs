//! Rule-based prior `f(a; M)` and the memory `M` it reads from.
//!
//! Two rules are realised from experience:
//!
//! * first order: an action that left the state unchanged without positive
//!   reward is never tried again at that state;
//! * second order: an action that immediately undid the previous one (the
//!   pair `s -> s' -> s` with `s' != s`, no positive reward on the way) is
//!   never taken right after that previous action. Undoing pairs are assumed
//!   to hold at every state and are kept in the binary matrix `g`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId, Step};

/// Which rules the memory realises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PriorRules {
    pub first_order: bool,
    pub second_order: bool,
}

impl PriorRules {
    pub const NONE: Self = Self { first_order: false, second_order: false };
    pub const FIRST_ORDER: Self = Self { first_order: true, second_order: false };
    pub const BOTH: Self = Self { first_order: true, second_order: true };
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorMemory {
    num_actions: usize,
    rules: PriorRules,
    /// Blocked pairs with the (non-positive) reward observed when bumping.
    blocked: BTreeMap<(StateId, ActionId), f64>,
    /// `g[prev * num_actions + a]`; `false` marks an undoing pair.
    undo_allowed: Vec<bool>,
    last_step: Option<Step>,
}

impl PriorMemory {
    pub fn new(num_actions: usize, rules: PriorRules) -> Self {
        Self {
            num_actions,
            rules,
            blocked: BTreeMap::new(),
            undo_allowed: vec![true; num_actions * num_actions],
            last_step: None,
        }
    }

    pub fn rules(&self) -> PriorRules {
        self.rules
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn is_blocked(&self, s: StateId, a: ActionId) -> bool {
        self.blocked.contains_key(&(s, a))
    }

    /// Reward seen when `a` left `s` unchanged, if the pair is blocked.
    pub fn blocked_reward(&self, s: StateId, a: ActionId) -> Option<f64> {
        self.blocked.get(&(s, a)).copied()
    }

    /// Blocked pairs in `(state, action)` order.
    pub fn blocked(&self) -> impl Iterator<Item = (StateId, ActionId)> + '_ {
        self.blocked.keys().copied()
    }

    pub fn num_blocked(&self) -> usize {
        self.blocked.len()
    }

    /// `g(a; prev)`: false when `a` undoes `prev`.
    pub fn undo_allowed(&self, prev: ActionId, a: ActionId) -> bool {
        self.undo_allowed[prev.0 * self.num_actions + a.0]
    }

    /// `g` in row-major order, indexed `prev * |A| + a`.
    pub fn undo_matrix(&self) -> &[bool] {
        &self.undo_allowed
    }

    /// Zeroed entries of `g` as `(prev, a)` pairs.
    pub fn undoing_pairs(&self) -> Vec<(ActionId, ActionId)> {
        self.undo_allowed
            .iter()
            .enumerate()
            .filter(|(_, &ok)| !ok)
            .map(|(i, _)| (ActionId(i / self.num_actions), ActionId(i % self.num_actions)))
            .collect()
    }

    /// Forget the detection window, e.g. when a new episode starts.
    pub fn begin_episode(&mut self) {
        self.last_step = None;
    }

    /// Feeds one environment step. Must be called once per step, in order.
    pub fn observe_transition(&mut self, s: StateId, a: ActionId, r: f64, s_next: StateId) {
        if self.rules.first_order && s_next == s && r <= 0.0 {
            self.blocked.insert((s, a), r);
        }
        if self.rules.second_order {
            if let Some(prev) = self.last_step {
                if prev.next_state == s && prev.state != s && s_next == prev.state && prev.reward <= 0.0 && r <= 0.0 {
                    self.undo_allowed[prev.action.0 * self.num_actions + a.0] = false;
                }
            }
        }
        self.last_step = Some(Step { state: s, action: a, reward: r, next_state: s_next });
    }

    /// `f(a; M)` as 0 or 1.
    pub fn prior_f(&self, s: StateId, a: ActionId, prev_action: Option<ActionId>) -> u8 {
        if self.blocked.contains_key(&(s, a)) {
            return 0;
        }
        match prev_action {
            Some(p) if !self.undo_allowed(p, a) => 0,
            _ => 1,
        }
    }

    /// Memory for the next task: `g` carries over, state-indexed knowledge
    /// and the detection window are dropped.
    pub fn transfer(&self) -> Self {
        Self {
            num_actions: self.num_actions,
            rules: self.rules,
            blocked: BTreeMap::new(),
            undo_allowed: self.undo_allowed.clone(),
            last_step: None,
        }
    }

    /// `g` as `|A|` lines of space-separated `0`/`1`.
    pub fn undo_matrix_text(&self) -> String {
        let mut out = String::new();
        for row in self.undo_allowed.chunks(self.num_actions) {
            let line: Vec<&str> = row.iter().map(|&ok| if ok { "1" } else { "0" }).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Replaces `g` with a matrix in the [`undo_matrix_text`](Self::undo_matrix_text) format.
    pub fn load_undo_matrix(&mut self, text: &str) -> Result<()> {
        let n = self.num_actions;
        let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if rows.len() != n {
            return Err(Error::UndoMatrixParse(format!("{} rows, expected {n}", rows.len())));
        }
        let mut g = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            let before = g.len();
            for tok in row.split_whitespace() {
                g.push(match tok {
                    "1" => true,
                    "0" => false,
                    other => return Err(Error::UndoMatrixParse(format!("row {i}: bad entry {other:?}"))),
                });
            }
            if g.len() - before != n {
                return Err(Error::UndoMatrixParse(format!("row {i} has {} entries, expected {n}", g.len() - before)));
            }
        }
        self.undo_allowed = g;
        Ok(())
    }
}
