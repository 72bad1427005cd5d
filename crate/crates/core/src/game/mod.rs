//! Finite alternating two-player zero-sum Markov games and exact solvers.
//!
//! The ego picks an action `a`, the other observes `a` and answers with `b`,
//! the state moves with probability `P(s'|s,a,b)` and the turn pays the
//! deterministic scalar `r(s,a,b)` (ego's gain, other's loss). Solvers here
//! are exact up to an explicit iteration tolerance and double as the
//! brute-force oracles used by the bound audits.

mod solve;

pub use solve::{
    bellman_backup, evaluate_policy, evaluate_policy_features, greedy_minmax_policy, solve_qvi,
    QviSolution,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("Q-value iteration did not converge: residual {residual:e} after {iters} iterations")]
    NotConverged { iters: usize, residual: f64 },
    #[error("malformed game JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// One entry of a successor distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub next_state: usize,
    pub prob: f64,
}

/// Full definition of an alternating zero-sum Markov game.
///
/// `transition[s][a][b]` lists the successor distribution of the joint move
/// `(a, b)` taken at `s`; `reward[s][a][b]` is the deterministic turn reward.
/// Terminal states absorb with zero reward.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameSpec {
    pub num_states: usize,
    pub num_ego_actions: usize,
    pub num_other_actions: usize,
    pub discount: f64,
    pub terminal: Vec<usize>,
    pub transition: Vec<Vec<Vec<Vec<TransitionEntry>>>>,
    pub reward: Vec<Vec<Vec<f64>>>,
}

/// Row sums may drift from 1 by at most this much.
pub const PROB_TOL: f64 = 1e-12;

impl GameSpec {
    /// Checks shapes, probability rows, discount range, reward finiteness and
    /// the zero-reward convention at terminal states.
    pub fn validate(&self) -> Result<(), GameError> {
        if self.num_states == 0 || self.num_ego_actions == 0 || self.num_other_actions == 0 {
            return Err(GameError::InvalidGame("empty state or action space".into()));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(GameError::InvalidGame(format!(
                "discount must lie in [0, 1), got {}",
                self.discount
            )));
        }
        if self.transition.len() != self.num_states || self.reward.len() != self.num_states {
            return Err(GameError::ShapeMismatch(
                "transition/reward outer length != num_states".into(),
            ));
        }
        for s in 0..self.num_states {
            if self.transition[s].len() != self.num_ego_actions
                || self.reward[s].len() != self.num_ego_actions
            {
                return Err(GameError::ShapeMismatch(format!(
                    "state {s}: ego-action dimension mismatch"
                )));
            }
            for a in 0..self.num_ego_actions {
                if self.transition[s][a].len() != self.num_other_actions
                    || self.reward[s][a].len() != self.num_other_actions
                {
                    return Err(GameError::ShapeMismatch(format!(
                        "state {s}, action {a}: other-action dimension mismatch"
                    )));
                }
                for b in 0..self.num_other_actions {
                    let r = self.reward[s][a][b];
                    if !r.is_finite() {
                        return Err(GameError::InvalidGame(format!(
                            "reward at ({s},{a},{b}) is not finite"
                        )));
                    }
                    let row = &self.transition[s][a][b];
                    if row.is_empty() {
                        return Err(GameError::InvalidGame(format!(
                            "empty successor distribution at ({s},{a},{b})"
                        )));
                    }
                    let mut sum = 0.0;
                    for e in row {
                        if e.next_state >= self.num_states {
                            return Err(GameError::InvalidGame(format!(
                                "next_state {} out of range at ({s},{a},{b})",
                                e.next_state
                            )));
                        }
                        if !(e.prob >= 0.0) {
                            return Err(GameError::InvalidGame(format!(
                                "negative probability at ({s},{a},{b})"
                            )));
                        }
                        sum += e.prob;
                    }
                    if (sum - 1.0).abs() > PROB_TOL {
                        return Err(GameError::InvalidGame(format!(
                            "probabilities at ({s},{a},{b}) sum to {sum}, expected 1"
                        )));
                    }
                }
            }
        }
        for &t in &self.terminal {
            if t >= self.num_states {
                return Err(GameError::InvalidGame(format!(
                    "terminal state {t} out of range"
                )));
            }
            for a in 0..self.num_ego_actions {
                for b in 0..self.num_other_actions {
                    if self.reward[t][a][b] != 0.0 {
                        return Err(GameError::InvalidGame(format!(
                            "terminal state {t} must have zero reward"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn terminal_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_states];
        for &t in &self.terminal {
            mask[t] = true;
        }
        mask
    }

    pub fn max_abs_reward(&self) -> f64 {
        self.reward
            .iter()
            .flatten()
            .flatten()
            .fold(0.0f64, |m, r| m.max(r.abs()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("GameSpec serializes")
    }

    /// Parses and validates a game document.
    pub fn from_json(text: &str) -> Result<Self, GameError> {
        let game: GameSpec = serde_json::from_str(text)?;
        game.validate()?;
        Ok(game)
    }
}

/// Dense table of action values `Q(s, a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub num_states: usize,
    pub num_ego_actions: usize,
    pub num_other_actions: usize,
    pub discount: f64,
    pub values: Vec<f64>,
}

impl QTable {
    pub fn zeros(game: &GameSpec) -> Self {
        QTable {
            num_states: game.num_states,
            num_ego_actions: game.num_ego_actions,
            num_other_actions: game.num_other_actions,
            discount: game.discount,
            values: vec![0.0; game.num_states * game.num_ego_actions * game.num_other_actions],
        }
    }

    pub fn matches(&self, game: &GameSpec) -> bool {
        self.num_states == game.num_states
            && self.num_ego_actions == game.num_ego_actions
            && self.num_other_actions == game.num_other_actions
    }

    #[inline]
    pub fn idx(&self, s: usize, a: usize, b: usize) -> usize {
        (s * self.num_ego_actions + a) * self.num_other_actions + b
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize, b: usize) -> f64 {
        self.values[self.idx(s, a, b)]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, b: usize, v: f64) {
        let i = self.idx(s, a, b);
        self.values[i] = v;
    }

    /// Lowest-index argmin over `b` for a fixed `(s, a)` row.
    pub fn argmin_other(&self, s: usize, a: usize) -> usize {
        let mut best = 0;
        let mut best_v = self.get(s, a, 0);
        for b in 1..self.num_other_actions {
            let v = self.get(s, a, b);
            if v < best_v {
                best = b;
                best_v = v;
            }
        }
        best
    }

    /// The max-min pair at `s`, ties broken toward the lowest index.
    pub fn minmax_pair(&self, s: usize) -> (usize, usize) {
        let mut best_a = 0;
        let mut best_b = self.argmin_other(s, 0);
        let mut best_v = self.get(s, 0, best_b);
        for a in 1..self.num_ego_actions {
            let b = self.argmin_other(s, a);
            let v = self.get(s, a, b);
            if v > best_v {
                best_a = a;
                best_b = b;
                best_v = v;
            }
        }
        (best_a, best_b)
    }

    /// `max_a min_b Q(s, a, b)`, read off the selected entry so callers that
    /// index by the greedy pair see the identical float.
    pub fn state_value(&self, s: usize) -> f64 {
        let (a, b) = self.minmax_pair(s);
        self.get(s, a, b)
    }

    pub fn sup_norm_diff(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }
}

/// Deterministic joint policy: `ego: S -> A`, `other: S x A -> B`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointPolicy {
    pub ego: Vec<usize>,
    pub other: Vec<usize>,
    pub num_ego_actions: usize,
}

impl JointPolicy {
    pub fn uniform_zero(game: &GameSpec) -> Self {
        JointPolicy {
            ego: vec![0; game.num_states],
            other: vec![0; game.num_states * game.num_ego_actions],
            num_ego_actions: game.num_ego_actions,
        }
    }

    #[inline]
    pub fn ego_action(&self, s: usize) -> usize {
        self.ego[s]
    }

    #[inline]
    pub fn other_action(&self, s: usize, a: usize) -> usize {
        self.other[s * self.num_ego_actions + a]
    }

    /// The on-policy pair played from `s`.
    #[inline]
    pub fn joint(&self, s: usize) -> (usize, usize) {
        let a = self.ego_action(s);
        (a, self.other_action(s, a))
    }

    pub fn total_for(&self, game: &GameSpec) -> bool {
        self.ego.len() == game.num_states
            && self.other.len() == game.num_states * game.num_ego_actions
            && self.num_ego_actions == game.num_ego_actions
            && self.ego.iter().all(|&a| a < game.num_ego_actions)
            && self.other.iter().all(|&b| b < game.num_other_actions)
    }
}

/// Dense per-`(s, a, b)` vector table. Holds the feature map `phi` of a game
/// and, with the same shape, successor-feature fixed points `psi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub num_states: usize,
    pub num_ego_actions: usize,
    pub num_other_actions: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl FeatureTable {
    pub fn zeros(game: &GameSpec, dim: usize) -> Self {
        FeatureTable {
            num_states: game.num_states,
            num_ego_actions: game.num_ego_actions,
            num_other_actions: game.num_other_actions,
            dim,
            values: vec![
                0.0;
                game.num_states * game.num_ego_actions * game.num_other_actions * dim
            ],
        }
    }

    #[inline]
    pub fn offset(&self, s: usize, a: usize, b: usize) -> usize {
        ((s * self.num_ego_actions + a) * self.num_other_actions + b) * self.dim
    }

    #[inline]
    pub fn vec(&self, s: usize, a: usize, b: usize) -> &[f64] {
        let o = self.offset(s, a, b);
        &self.values[o..o + self.dim]
    }

    #[inline]
    pub fn vec_mut(&mut self, s: usize, a: usize, b: usize) -> &mut [f64] {
        let o = self.offset(s, a, b);
        &mut self.values[o..o + self.dim]
    }

    /// Contracts the vector table against `w`, producing a `QTable`-shaped
    /// view with the given discount tag.
    pub fn dot(&self, w: &[f64], discount: f64) -> QTable {
        assert_eq!(w.len(), self.dim, "weight length must match feature dim");
        let cells = self.num_states * self.num_ego_actions * self.num_other_actions;
        let mut values = Vec::with_capacity(cells);
        for c in 0..cells {
            let o = c * self.dim;
            let mut acc = 0.0;
            for k in 0..self.dim {
                acc += self.values[o + k] * w[k];
            }
            values.push(acc);
        }
        QTable {
            num_states: self.num_states,
            num_ego_actions: self.num_ego_actions,
            num_other_actions: self.num_other_actions,
            discount,
            values,
        }
    }

    pub fn sup_norm_diff(&self, other: &FeatureTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_game() -> GameSpec {
        // Two states, the second terminal; every move goes to state 1.
        GameSpec {
            num_states: 2,
            num_ego_actions: 2,
            num_other_actions: 2,
            discount: 0.9,
            terminal: vec![1],
            transition: vec![
                vec![
                    vec![
                        vec![TransitionEntry { next_state: 1, prob: 1.0 }],
                        vec![TransitionEntry { next_state: 1, prob: 1.0 }],
                    ],
                    vec![
                        vec![TransitionEntry { next_state: 1, prob: 1.0 }],
                        vec![TransitionEntry { next_state: 1, prob: 1.0 }],
                    ],
                ],
                vec![
                    vec![
                        vec![TransitionEntry { next_state: 1, prob: 1.0 }],
                        vec![TransitionEntry { next_state: 1, prob: 1.0 }],
                    ],
                    vec![
                        vec![TransitionEntry { next_state: 1, prob: 1.0 }],
                        vec![TransitionEntry { next_state: 1, prob: 1.0 }],
                    ],
                ],
            ],
            reward: vec![
                vec![vec![1.0, 0.0], vec![0.5, 2.0]],
                vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            ],
        }
    }

    #[test]
    fn validate_accepts_well_formed_game() {
        tiny_game().validate().unwrap();
    }

    #[test]
    fn validate_rejects_bad_probability_row() {
        let mut g = tiny_game();
        g.transition[0][0][0][0].prob = 0.5;
        assert!(matches!(g.validate(), Err(GameError::InvalidGame(_))));
    }

    #[test]
    fn validate_rejects_discount_one() {
        let mut g = tiny_game();
        g.discount = 1.0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn validate_rejects_nonzero_terminal_reward() {
        let mut g = tiny_game();
        g.reward[1][0][0] = 0.25;
        assert!(g.validate().is_err());
    }

    #[test]
    fn json_round_trip_preserves_game() {
        let g = tiny_game();
        let parsed = GameSpec::from_json(&g.to_json()).unwrap();
        assert_eq!(parsed.reward, g.reward);
        assert_eq!(parsed.terminal, g.terminal);
        assert_eq!(parsed.num_states, g.num_states);
    }

    #[test]
    fn minmax_pair_breaks_ties_low() {
        let g = tiny_game();
        let q = QTable::zeros(&g);
        assert_eq!(q.minmax_pair(0), (0, 0));
    }

    #[test]
    fn minmax_pair_hand_example() {
        // Q(s,.,.) = [[1,0],[0,2]]: row minima are 0 and 0, tie -> a=0;
        // responses are b=1 against a=0 and b=0 against a=1.
        let g = tiny_game();
        let mut q = QTable::zeros(&g);
        q.set(0, 0, 0, 1.0);
        q.set(0, 0, 1, 0.0);
        q.set(0, 1, 0, 0.0);
        q.set(0, 1, 1, 2.0);
        assert_eq!(q.minmax_pair(0), (0, 1));
        assert_eq!(q.argmin_other(0, 0), 1);
        assert_eq!(q.argmin_other(0, 1), 0);
    }
}
