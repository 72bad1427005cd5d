//! Online learners: turn-based min-max Q-learning, successor-feature min-max
//! Q-learning with GGPI action selection, its exploration-reset ablation and
//! a PRQL baseline adapted to the two-player game.

mod env;
mod episode;
mod prql;

pub use env::{EnvStep, GameEnv, GridGame, StepOutcome, TurnEnv};
pub use episode::{greedy_rollout, run_episode, EpisodeRun, Learner, LearnerKind, RunOutcome, TurnLog};
pub use prql::{prql_select, softmax_choice, PrqlState};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::QTable;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("GGPI requires a non-empty table library")]
    EmptyLibrary,
    #[error("GGPI for the other role requires the observed ego action")]
    MissingObservedAction,
    #[error("feature dimension mismatch: table has {table}, weights have {weights}")]
    DimMismatch { table: usize, weights: usize },
    #[error("invalid learner config: {0}")]
    InvalidConfig(String),
}

/// Which side of the game a table or an action choice belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Ego,
    Other,
}

impl Role {
    pub fn index(self) -> usize {
        match self {
            Role::Ego => 0,
            Role::Other => 1,
        }
    }
}

/// How GGPI aggregates the per-task value estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    #[default]
    MinOverTasks,
    MaxOverTasks,
}

/// PRQL reuse parameters. These are standard PRQL defaults, not values from
/// the experiments this crate reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrqlParams {
    /// Initial softmax greediness over reuse gains.
    #[serde(default)]
    pub tau0: f64,
    /// Per-episode greediness increment.
    #[serde(default = "default_dtau")]
    pub dtau: f64,
    /// Per-turn decay of the reuse probability.
    #[serde(default = "default_upsilon")]
    pub upsilon: f64,
    /// Reuse probability at the start of each episode.
    #[serde(default = "default_psi_reuse0")]
    pub psi_reuse0: f64,
}

fn default_dtau() -> f64 {
    0.05
}

fn default_upsilon() -> f64 {
    0.95
}

fn default_psi_reuse0() -> f64 {
    1.0
}

impl Default for PrqlParams {
    fn default() -> Self {
        PrqlParams {
            tau0: 0.0,
            dtau: default_dtau(),
            upsilon: default_upsilon(),
            psi_reuse0: default_psi_reuse0(),
        }
    }
}

/// Learning-rate, discount and exploration knobs shared by all learners.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub alpha: f64,
    pub gamma: f64,
    #[serde(default = "default_epsilon0")]
    pub epsilon0: f64,
    /// Multiplicative per-episode exploration decay. The plain SF learner
    /// holds epsilon constant regardless of this value.
    #[serde(default = "default_epsilon_decay")]
    pub epsilon_decay: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub gpi_aggregator: Aggregator,
    #[serde(default)]
    pub prql: PrqlParams,
}

fn default_epsilon0() -> f64 {
    0.1
}

fn default_epsilon_decay() -> f64 {
    0.999
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            alpha: 0.5,
            gamma: 0.9,
            epsilon0: default_epsilon0(),
            epsilon_decay: default_epsilon_decay(),
            seed: 0,
            gpi_aggregator: Aggregator::default(),
            prql: PrqlParams::default(),
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(LearnError::InvalidConfig(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(LearnError::InvalidConfig(format!(
                "gamma must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon0) {
            return Err(LearnError::InvalidConfig("epsilon0 out of [0, 1]".into()));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return Err(LearnError::InvalidConfig(
                "epsilon_decay out of (0, 1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.prql.psi_reuse0)
            || !(self.prql.upsilon > 0.0 && self.prql.upsilon <= 1.0)
        {
            return Err(LearnError::InvalidConfig("PRQL rates out of range".into()));
        }
        Ok(())
    }
}

/// Per-task successor-feature table, one side per agent role, indexed by the
/// joint `(s, a, b)` of a completed turn. Entries start at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SFTable {
    pub task_id: String,
    pub num_states: usize,
    pub num_ego_actions: usize,
    pub num_other_actions: usize,
    pub dim: usize,
    pub psi: Vec<f64>,
}

impl SFTable {
    pub fn zeros(
        task_id: impl Into<String>,
        num_states: usize,
        num_ego_actions: usize,
        num_other_actions: usize,
        dim: usize,
    ) -> Self {
        SFTable {
            task_id: task_id.into(),
            num_states,
            num_ego_actions,
            num_other_actions,
            dim,
            psi: vec![0.0; 2 * num_states * num_ego_actions * num_other_actions * dim],
        }
    }

    #[inline]
    pub fn offset(&self, role: Role, s: usize, a: usize, b: usize) -> usize {
        (((role.index() * self.num_states + s) * self.num_ego_actions + a)
            * self.num_other_actions
            + b)
            * self.dim
    }

    #[inline]
    pub fn vec(&self, role: Role, s: usize, a: usize, b: usize) -> &[f64] {
        let o = self.offset(role, s, a, b);
        &self.psi[o..o + self.dim]
    }

    #[inline]
    pub fn vec_mut(&mut self, role: Role, s: usize, a: usize, b: usize) -> &mut [f64] {
        let o = self.offset(role, s, a, b);
        &mut self.psi[o..o + self.dim]
    }

    /// `psi(role, s, a, b) . w`.
    #[inline]
    pub fn q_value(&self, role: Role, s: usize, a: usize, b: usize, w: &[f64]) -> f64 {
        let o = self.offset(role, s, a, b);
        let mut acc = 0.0;
        for k in 0..self.dim {
            acc += self.psi[o + k] * w[k];
        }
        acc
    }

    /// Materializes one role's `psi . w` view as a dense Q table.
    pub fn side_table(&self, role: Role, w: &[f64], discount: f64) -> QTable {
        assert_eq!(w.len(), self.dim, "weight length must match feature dim");
        let mut q = QTable {
            num_states: self.num_states,
            num_ego_actions: self.num_ego_actions,
            num_other_actions: self.num_other_actions,
            discount,
            values: vec![0.0; self.num_states * self.num_ego_actions * self.num_other_actions],
        };
        for s in 0..self.num_states {
            for a in 0..self.num_ego_actions {
                for b in 0..self.num_other_actions {
                    q.set(s, a, b, self.q_value(role, s, a, b, w));
                }
            }
        }
        q
    }

    /// Greedy max-min pair of one role's `psi . w` view at `s`, ties toward
    /// the lowest index.
    pub fn greedy_pair(&self, role: Role, s: usize, w: &[f64]) -> (usize, usize) {
        let mut best_a = 0;
        let mut best_b = 0;
        let mut best_v = f64::NEG_INFINITY;
        for a in 0..self.num_ego_actions {
            let mut row_b = 0;
            let mut row_v = self.q_value(role, s, a, 0, w);
            for b in 1..self.num_other_actions {
                let v = self.q_value(role, s, a, b, w);
                if v < row_v {
                    row_b = b;
                    row_v = v;
                }
            }
            if row_v > best_v {
                best_a = a;
                best_b = row_b;
                best_v = row_v;
            }
        }
        (best_a, best_b)
    }

    pub fn all_finite(&self) -> bool {
        self.psi.iter().all(|v| v.is_finite())
    }
}

/// One completed turn as consumed by the scalar Q update.
#[derive(Debug, Clone, Copy)]
pub struct QTransition {
    pub state: usize,
    pub ego_action: usize,
    pub other_action: usize,
    pub reward: f64,
    pub next_state: usize,
    pub next_terminal: bool,
}

/// Min-max Q-learning update:
/// `Q(s,a,b) += alpha * (r + gamma * max_a' min_b' Q(s',a',b') - Q(s,a,b))`,
/// with target `r` when `s'` is terminal.
pub fn minmax_q_step(q: &mut QTable, t: &QTransition, cfg: &LearnerConfig) {
    let target = if t.next_terminal {
        t.reward
    } else {
        let (a, b) = q.minmax_pair(t.next_state);
        t.reward + cfg.gamma * q.get(t.next_state, a, b)
    };
    let i = q.idx(t.state, t.ego_action, t.other_action);
    let cur = q.values[i];
    q.values[i] = cur + cfg.alpha * (target - cur);
}

/// One completed turn as consumed by the successor-feature update.
#[derive(Debug, Clone, Copy)]
pub struct SfTransition<'a> {
    pub state: usize,
    pub ego_action: usize,
    pub other_action: usize,
    pub features: &'a [f64],
    pub next_state: usize,
    pub next_terminal: bool,
}

/// Successor-feature TD update, componentwise:
/// `psi(s,a,b) += alpha * (phi + gamma * psi(s',a',b') - psi(s,a,b))`,
/// with target `phi` when `s'` is terminal. The discount enters the target
/// exactly as in the scalar Bellman forms.
pub fn sf_td_step(
    table: &mut SFTable,
    role: Role,
    t: &SfTransition,
    next_choice: (usize, usize),
    cfg: &LearnerConfig,
) {
    debug_assert_eq!(t.features.len(), table.dim);
    let cur_o = table.offset(role, t.state, t.ego_action, t.other_action);
    let next_o = table.offset(role, t.next_state, next_choice.0, next_choice.1);
    for k in 0..table.dim {
        let target = if t.next_terminal {
            t.features[k]
        } else {
            t.features[k] + cfg.gamma * table.psi[next_o + k]
        };
        let cur = table.psi[cur_o + k];
        table.psi[cur_o + k] = cur + cfg.alpha * (target - cur);
    }
}

/// GGPI action selection over a library of successor-feature tables.
///
/// Every library table is contracted against the one weight vector `w` of
/// the task being played, the per-task estimates are aggregated (min by
/// default), and the joint choice is read off the aggregate: the ego takes
/// `argmax_a min_b` together with the anticipated minimizing response, the
/// other answers an observed ego action with `argmin_b`. Ties break toward
/// the lowest index.
pub fn ggpi_action(
    tables: &[SFTable],
    w: &[f64],
    s: usize,
    role: Role,
    observed_a: Option<usize>,
    agg: Aggregator,
) -> Result<(usize, usize), LearnError> {
    let first = tables.first().ok_or(LearnError::EmptyLibrary)?;
    for t in tables {
        if t.dim != w.len() {
            return Err(LearnError::DimMismatch {
                table: t.dim,
                weights: w.len(),
            });
        }
    }
    let na = first.num_ego_actions;
    let nb = first.num_other_actions;
    let value = |a: usize, b: usize| -> f64 {
        let mut acc = match agg {
            Aggregator::MinOverTasks => f64::INFINITY,
            Aggregator::MaxOverTasks => f64::NEG_INFINITY,
        };
        for t in tables {
            let v = t.q_value(role, s, a, b, w);
            acc = match agg {
                Aggregator::MinOverTasks => acc.min(v),
                Aggregator::MaxOverTasks => acc.max(v),
            };
        }
        acc
    };
    match role {
        Role::Ego => {
            let mut best_a = 0;
            let mut best_b = 0;
            let mut best_v = f64::NEG_INFINITY;
            for a in 0..na {
                let mut row_b = 0;
                let mut row_v = value(a, 0);
                for b in 1..nb {
                    let v = value(a, b);
                    if v < row_v {
                        row_b = b;
                        row_v = v;
                    }
                }
                if row_v > best_v {
                    best_a = a;
                    best_b = row_b;
                    best_v = row_v;
                }
            }
            Ok((best_a, best_b))
        }
        Role::Other => {
            let a = observed_a.ok_or(LearnError::MissingObservedAction)?;
            let mut best_b = 0;
            let mut best_v = value(a, 0);
            for b in 1..nb {
                let v = value(a, b);
                if v < best_v {
                    best_b = b;
                    best_v = v;
                }
            }
            Ok((a, best_b))
        }
    }
}

/// `max_a min_b` of the GGPI aggregate at `s` for the ego side; the value a
/// snapshot evaluation reports for a state.
pub fn ggpi_state_value(tables: &[SFTable], w: &[f64], s: usize, agg: Aggregator) -> f64 {
    let (a, b) = ggpi_action(tables, w, s, Role::Ego, None, agg).expect("non-empty library");
    let mut acc = match agg {
        Aggregator::MinOverTasks => f64::INFINITY,
        Aggregator::MaxOverTasks => f64::NEG_INFINITY,
    };
    for t in tables {
        let v = t.q_value(Role::Ego, s, a, b, w);
        acc = match agg {
            Aggregator::MinOverTasks => acc.min(v),
            Aggregator::MaxOverTasks => acc.max(v),
        };
    }
    acc
}

#[cfg(test)]
mod tests;
