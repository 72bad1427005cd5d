//! Pursuer-evader alternating Markov game on a small grid.
//!
//! The evader (ego) moves first, the pursuer (other) moves after observing
//! the evader's action. Catches are checked after each half-move, the goal
//! only after the full turn. The game compiles to a [`GameSpec`] over the
//! product state space for exact solving and also runs as a stepped
//! simulator for the learners.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{FeatureTable, GameSpec, TransitionEntry};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid configuration: {0}")]
    InvalidConfig(String),
    #[error("stepping a finished episode")]
    EpisodeFinished,
    #[error("feature dimension is {expected} but weights have length {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Grid cell as `(x, y)`, `x` growing rightward and `y` growing upward.
pub type Cell = (i32, i32);

/// Environment geometry, feature normalization and termination rules.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub width: i32,
    pub height: i32,
    #[serde(default)]
    pub walls: Vec<Cell>,
    pub goals: Vec<Cell>,
    /// Index into `goals` of the goal that terminates episodes. Other goal
    /// cells stay plain cells whose distance/token features still vary.
    #[serde(default)]
    pub active_goal: usize,
    /// Divisor of the agent-distance feature.
    #[serde(default = "default_agent_norm")]
    pub agent_norm: f64,
    /// Divisor of the goal-distance features.
    #[serde(default = "default_goal_norm")]
    pub goal_norm: f64,
    /// Magnitude of the goal-occupancy indicator features. The default keeps
    /// them binary; the task weights carry the 0.7 token value.
    #[serde(default = "default_token")]
    pub token: f64,
    #[serde(default = "default_step_limit")]
    pub step_limit: u32,
}

fn default_agent_norm() -> f64 {
    12f64.sqrt()
}

fn default_goal_norm() -> f64 {
    9f64.sqrt()
}

fn default_token() -> f64 {
    1.0
}

fn default_step_limit() -> u32 {
    30
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            width: 5,
            height: 5,
            walls: Vec::new(),
            goals: vec![(2, 4), (2, 2), (2, 0)],
            active_goal: 0,
            agent_norm: default_agent_norm(),
            goal_norm: default_goal_norm(),
            token: default_token(),
            step_limit: default_step_limit(),
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), GridError> {
        if self.width < 1 || self.height < 1 {
            return Err(GridError::InvalidConfig("grid must be at least 1x1".into()));
        }
        if self.goals.is_empty() {
            return Err(GridError::InvalidConfig("at least one goal required".into()));
        }
        for (i, g) in self.goals.iter().enumerate() {
            if !self.in_grid(*g) {
                return Err(GridError::InvalidConfig(format!(
                    "goal {i} at {g:?} lies outside the grid"
                )));
            }
            if self.is_wall(*g) {
                return Err(GridError::InvalidConfig(format!(
                    "goal {i} at {g:?} sits on a wall"
                )));
            }
            if self.goals[..i].contains(g) {
                return Err(GridError::InvalidConfig(format!("duplicate goal {g:?}")));
            }
        }
        if self.active_goal >= self.goals.len() {
            return Err(GridError::InvalidConfig(format!(
                "active_goal {} out of range",
                self.active_goal
            )));
        }
        if !(self.agent_norm > 0.0) || !(self.goal_norm > 0.0) {
            return Err(GridError::InvalidConfig("norms must be positive".into()));
        }
        if self.step_limit < 1 {
            return Err(GridError::InvalidConfig("step_limit must be >= 1".into()));
        }
        Ok(())
    }

    pub fn in_grid(&self, c: Cell) -> bool {
        c.0 >= 0 && c.0 < self.width && c.1 >= 0 && c.1 < self.height
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        self.walls.contains(&c)
    }

    /// Feature dimension: agent distance plus a distance/token pair per goal.
    pub fn feature_dim(&self) -> usize {
        1 + 2 * self.goals.len()
    }

    pub fn with_active_goal(mut self, goal: usize) -> Self {
        self.active_goal = goal;
        self
    }

    /// Where a move from `c` ends up: collisions with walls or the boundary
    /// keep the mover in place.
    pub fn resolve_move(&self, c: Cell, action: Action) -> Cell {
        let (dx, dy) = action.delta();
        let to = (c.0 + dx, c.1 + dy);
        if self.in_grid(to) && !self.is_wall(to) {
            to
        } else {
            c
        }
    }
}

/// Position of both agents plus the turn counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridState {
    pub evader: Cell,
    pub pursuer: Cell,
    pub steps_elapsed: u32,
}

impl GridState {
    pub fn new(evader: Cell, pursuer: Cell) -> Self {
        GridState {
            evader,
            pursuer,
            steps_elapsed: 0,
        }
    }
}

/// The four grid moves, in the fixed index order used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        match self {
            Action::Up => 0,
            Action::Down => 1,
            Action::Left => 2,
            Action::Right => 3,
        }
    }

    pub fn from_index(i: usize) -> Action {
        Action::ALL[i]
    }

    pub fn delta(self) -> (i32, i32) {
        match self {
            Action::Up => (0, 1),
            Action::Down => (0, -1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
        }
    }
}

/// Result of a full turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ongoing,
    EvaderWin,
    PursuerWin,
    Tie,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Ongoing => "ongoing",
            Outcome::EvaderWin => "evader_win",
            Outcome::PursuerWin => "pursuer_win",
            Outcome::Tie => "tie",
        }
    }
}

/// Feature vector ordered `[d(e,p), d(e,g1), t(g1), d(e,g2), t(g2), ...]`.
/// Distances are clamped to `[0, 1]` after normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn dot(&self, w: &TaskWeights) -> f64 {
        assert_eq!(
            self.values.len(),
            w.weights.len(),
            "feature/weight dimension mismatch"
        );
        self.values
            .iter()
            .zip(&w.weights)
            .map(|(p, w)| p * w)
            .sum()
    }
}

/// A task: a named weight vector defining the reward `phi . w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskWeights {
    pub task_id: String,
    pub weights: Vec<f64>,
}

impl TaskWeights {
    pub fn new(task_id: impl Into<String>, weights: Vec<f64>) -> Self {
        TaskWeights {
            task_id: task_id.into(),
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// The goal this task rewards, read off the largest token weight.
    /// `None` when every token weight is zero.
    pub fn implied_goal(&self) -> Option<usize> {
        let goals = (self.weights.len().saturating_sub(1)) / 2;
        let mut best: Option<(usize, f64)> = None;
        for k in 0..goals {
            let w = self.weights[2 * k + 2].abs();
            if w > 0.0 && best.map_or(true, |(_, bw)| w > bw) {
                best = Some((k, w));
            }
        }
        best.map(|(k, _)| k)
    }
}

/// Manhattan distance between two cells.
pub fn manhattan(p: Cell, q: Cell) -> u32 {
    ((p.0 - q.0).abs() + (p.1 - q.1).abs()) as u32
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Feature map of a turn. Every component is evaluated at the post-turn
/// state; `_prev` exists because features are formally a function of the
/// transition.
pub fn features(cfg: &GridConfig, _prev: &GridState, next: &GridState) -> FeatureVector {
    let mut values = Vec::with_capacity(cfg.feature_dim());
    values.push(clamp01(
        manhattan(next.evader, next.pursuer) as f64 / cfg.agent_norm,
    ));
    for g in &cfg.goals {
        values.push(clamp01(manhattan(next.evader, *g) as f64 / cfg.goal_norm));
        values.push(if next.evader == *g { cfg.token } else { 0.0 });
    }
    FeatureVector { values }
}

/// How the two half-moves of one turn resolve, before step accounting.
struct TurnResolution {
    evader: Cell,
    pursuer: Cell,
    win: Option<Outcome>,
}

/// Shared mechanics of a turn: evader moves, catch check; pursuer moves,
/// catch check; goal check. Position coincidence after either half-move is
/// a catch; swapping cells in one turn is not.
fn resolve_turn(cfg: &GridConfig, evader: Cell, pursuer: Cell, a: Action, b: Action) -> TurnResolution {
    let evader = cfg.resolve_move(evader, a);
    if evader == pursuer {
        return TurnResolution {
            evader,
            pursuer,
            win: Some(Outcome::PursuerWin),
        };
    }
    let pursuer = cfg.resolve_move(pursuer, b);
    if evader == pursuer {
        return TurnResolution {
            evader,
            pursuer,
            win: Some(Outcome::PursuerWin),
        };
    }
    if evader == cfg.goals[cfg.active_goal] {
        return TurnResolution {
            evader,
            pursuer,
            win: Some(Outcome::EvaderWin),
        };
    }
    TurnResolution {
        evader,
        pursuer,
        win: None,
    }
}

/// Executes one full turn. Errors if the episode already hit the step limit.
/// The returned feature vector is evaluated at the post-turn state and the
/// outcome is `Tie` when the step limit is reached without a win.
pub fn step_turn(
    cfg: &GridConfig,
    s: &GridState,
    a: Action,
    b: Action,
) -> Result<(GridState, FeatureVector, Outcome), GridError> {
    if s.steps_elapsed >= cfg.step_limit {
        return Err(GridError::EpisodeFinished);
    }
    let res = resolve_turn(cfg, s.evader, s.pursuer, a, b);
    let next = GridState {
        evader: res.evader,
        pursuer: res.pursuer,
        steps_elapsed: s.steps_elapsed + 1,
    };
    let phi = features(cfg, s, &next);
    let outcome = match res.win {
        Some(w) => w,
        None if next.steps_elapsed >= cfg.step_limit => Outcome::Tie,
        None => Outcome::Ongoing,
    };
    Ok((next, phi, outcome))
}

/// Maps `(evader, pursuer)` position pairs onto dense state ids, with one
/// extra absorbing terminal id at the end.
#[derive(Debug, Clone)]
pub struct GridIndexer {
    cells: Vec<Cell>,
    ranks: HashMap<Cell, usize>,
}

impl GridIndexer {
    pub fn new(cfg: &GridConfig) -> Self {
        let mut cells = Vec::new();
        for y in 0..cfg.height {
            for x in 0..cfg.width {
                if !cfg.is_wall((x, y)) {
                    cells.push((x, y));
                }
            }
        }
        let ranks = cells.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        GridIndexer { cells, ranks }
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Product states plus the absorbing terminal.
    pub fn num_states(&self) -> usize {
        self.cells.len() * self.cells.len() + 1
    }

    pub fn terminal_id(&self) -> usize {
        self.cells.len() * self.cells.len()
    }

    pub fn state_id(&self, evader: Cell, pursuer: Cell) -> usize {
        self.ranks[&evader] * self.cells.len() + self.ranks[&pursuer]
    }

    /// Inverse of [`GridIndexer::state_id`]; `None` for the terminal id.
    pub fn decode(&self, id: usize) -> Option<(Cell, Cell)> {
        if id >= self.terminal_id() {
            return None;
        }
        let e = self.cells[id / self.cells.len()];
        let p = self.cells[id % self.cells.len()];
        Some((e, p))
    }
}

/// Flattens the grid game into a [`GameSpec`] with reward `phi . w`, plus the
/// aligned feature table. Wins and catches route to the absorbing terminal.
pub fn compile_with_features(
    cfg: &GridConfig,
    w: &TaskWeights,
) -> Result<(GameSpec, FeatureTable), GridError> {
    cfg.validate()?;
    if w.dim() != cfg.feature_dim() {
        return Err(GridError::DimensionMismatch {
            expected: cfg.feature_dim(),
            got: w.dim(),
        });
    }
    let idx = GridIndexer::new(cfg);
    let n = idx.num_states();
    let terminal = idx.terminal_id();
    let na = Action::COUNT;
    let d = cfg.feature_dim();

    let mut transition = Vec::with_capacity(n);
    let mut reward = Vec::with_capacity(n);
    let mut game = GameSpec {
        num_states: n,
        num_ego_actions: na,
        num_other_actions: na,
        discount: 0.9,
        terminal: vec![terminal],
        transition: Vec::new(),
        reward: Vec::new(),
    };
    let mut phi_table = FeatureTable::zeros(&game, d);

    for s in 0..n {
        let mut t_row = Vec::with_capacity(na);
        let mut r_row = Vec::with_capacity(na);
        for a in 0..na {
            let mut t_cell = Vec::with_capacity(na);
            let mut r_cell = Vec::with_capacity(na);
            for b in 0..na {
                if s == terminal {
                    t_cell.push(vec![TransitionEntry {
                        next_state: terminal,
                        prob: 1.0,
                    }]);
                    r_cell.push(0.0);
                    continue;
                }
                let (e, p) = idx.decode(s).expect("non-terminal id decodes");
                let res = resolve_turn(cfg, e, p, Action::from_index(a), Action::from_index(b));
                let post = GridState {
                    evader: res.evader,
                    pursuer: res.pursuer,
                    steps_elapsed: 0,
                };
                let phi = features(cfg, &GridState::new(e, p), &post);
                let next = if res.win.is_some() {
                    terminal
                } else {
                    idx.state_id(res.evader, res.pursuer)
                };
                phi_table
                    .vec_mut(s, a, b)
                    .copy_from_slice(&phi.values);
                r_cell.push(
                    phi.values
                        .iter()
                        .zip(&w.weights)
                        .map(|(p, w)| p * w)
                        .sum(),
                );
                t_cell.push(vec![TransitionEntry {
                    next_state: next,
                    prob: 1.0,
                }]);
            }
            t_row.push(t_cell);
            r_row.push(r_cell);
        }
        transition.push(t_row);
        reward.push(r_row);
    }

    game.transition = transition;
    game.reward = reward;
    debug_assert!(game.validate().is_ok());
    Ok((game, phi_table))
}

/// [`compile_with_features`] without the feature table.
pub fn compile(cfg: &GridConfig, w: &TaskWeights) -> Result<GameSpec, GridError> {
    compile_with_features(cfg, w).map(|(g, _)| g)
}

/// The three task weight vectors of the standard three-goal environment.
pub fn task_weight_presets() -> Vec<TaskWeights> {
    vec![
        TaskWeights::new("task1", vec![0.7, -1.3, 0.7, 0.0, 0.0, 0.0, 0.0]),
        TaskWeights::new("task2", vec![0.7, 0.0, 0.0, -1.3, 0.7, 0.0, 0.0]),
        TaskWeights::new("task3", vec![0.7, 0.0, 0.0, 0.0, 0.0, -1.3, 0.7]),
    ]
}

/// Extended preset group for the four-goal quantitative experiment: goals at
/// `(2,5)`, `(2,4)`, `(2,1)` and `(2,0)` on a 5-column by 6-row field,
/// nine-dimensional weights.
pub fn quantitative_task_weight_presets() -> Vec<TaskWeights> {
    let mut tasks = Vec::new();
    for k in 0..4usize {
        let mut w = vec![0.0; 9];
        w[0] = 0.7;
        w[2 * k + 1] = -1.3;
        w[2 * k + 2] = 0.7;
        tasks.push(TaskWeights::new(format!("qtask{}", k + 1), w));
    }
    tasks
}

/// Grid configuration matching [`quantitative_task_weight_presets`].
pub fn quantitative_grid_config() -> GridConfig {
    GridConfig {
        width: 5,
        height: 6,
        goals: vec![(2, 5), (2, 4), (2, 1), (2, 0)],
        ..GridConfig::default()
    }
}

/// One line of the per-turn trajectory export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TurnRecord {
    pub episode: u64,
    pub step: u32,
    pub evader: Cell,
    pub pursuer: Cell,
    pub a: Action,
    pub b: Action,
    pub reward: f64,
    pub outcome: Outcome,
}

/// Serializes turn records as JSON-lines, one record per turn.
pub fn trajectory_jsonl(records: &[TurnRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("turn record serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests;
