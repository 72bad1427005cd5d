//! The environment surface learners train against: the gridworld simulator
//! and a generic wrapper over any [`GameSpec`] with a feature table.

use rand::Rng as _;

use crate::game::{FeatureTable, GameSpec};
use crate::gridworld::{
    self, Action, GridConfig, GridError, GridIndexer, GridState, Outcome, TaskWeights,
};
use crate::rng::Rng;

/// How a turn ended from the environment's point of view. Step-limit ties
/// are enforced by the episode loop, not the environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Ongoing,
    EvaderWin,
    PursuerWin,
    /// Generic absorbing end for non-grid environments.
    Terminal,
}

/// Result of one full turn.
#[derive(Debug, Clone)]
pub struct EnvStep {
    pub next_state: usize,
    pub features: Vec<f64>,
    pub reward: f64,
    pub outcome: StepOutcome,
}

/// A finite alternating game the learners can step through.
pub trait TurnEnv {
    fn num_states(&self) -> usize;
    fn num_ego_actions(&self) -> usize;
    fn num_other_actions(&self) -> usize;
    fn feature_dim(&self) -> usize;
    /// Turns per episode before the loop declares a tie.
    fn step_limit(&self) -> u32;
    fn step(&self, state: usize, a: usize, b: usize, rng: &mut Rng) -> EnvStep;
}

/// The pursuer-evader grid bound to one task's weights.
#[derive(Debug, Clone)]
pub struct GridGame {
    cfg: GridConfig,
    weights: TaskWeights,
    indexer: GridIndexer,
}

impl GridGame {
    pub fn new(cfg: GridConfig, weights: TaskWeights) -> Result<Self, GridError> {
        cfg.validate()?;
        if weights.dim() != cfg.feature_dim() {
            return Err(GridError::DimensionMismatch {
                expected: cfg.feature_dim(),
                got: weights.dim(),
            });
        }
        let indexer = GridIndexer::new(&cfg);
        Ok(GridGame {
            cfg,
            weights,
            indexer,
        })
    }

    pub fn cfg(&self) -> &GridConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &TaskWeights {
        &self.weights
    }

    pub fn indexer(&self) -> &GridIndexer {
        &self.indexer
    }

    pub fn state_id(&self, evader: gridworld::Cell, pursuer: gridworld::Cell) -> usize {
        self.indexer.state_id(evader, pursuer)
    }

    /// Rebinds the same grid to a new task.
    pub fn with_task(&self, weights: TaskWeights, active_goal: usize) -> Result<Self, GridError> {
        let cfg = self.cfg.clone().with_active_goal(active_goal);
        GridGame::new(cfg, weights)
    }
}

impl TurnEnv for GridGame {
    fn num_states(&self) -> usize {
        self.indexer.num_states()
    }

    fn num_ego_actions(&self) -> usize {
        Action::COUNT
    }

    fn num_other_actions(&self) -> usize {
        Action::COUNT
    }

    fn feature_dim(&self) -> usize {
        self.cfg.feature_dim()
    }

    fn step_limit(&self) -> u32 {
        self.cfg.step_limit
    }

    fn step(&self, state: usize, a: usize, b: usize, _rng: &mut Rng) -> EnvStep {
        let (e, p) = self
            .indexer
            .decode(state)
            .expect("stepping the absorbing terminal state");
        let s = GridState::new(e, p);
        // The grid step limit is enforced by the episode loop; the per-state
        // counter never trips here.
        let (next, phi, outcome) =
            gridworld::step_turn(&self.cfg, &s, Action::from_index(a), Action::from_index(b))
                .expect("fresh turn counter cannot exceed the step limit");
        let reward = phi.dot(&self.weights);
        let (next_state, outcome) = match outcome {
            Outcome::EvaderWin => (self.indexer.terminal_id(), StepOutcome::EvaderWin),
            Outcome::PursuerWin => (self.indexer.terminal_id(), StepOutcome::PursuerWin),
            Outcome::Ongoing | Outcome::Tie => (
                self.indexer.state_id(next.evader, next.pursuer),
                StepOutcome::Ongoing,
            ),
        };
        EnvStep {
            next_state,
            features: phi.values,
            reward,
            outcome,
        }
    }
}

/// Any [`GameSpec`] plus a feature table as a steppable environment;
/// stochastic transitions are sampled from the caller's RNG.
#[derive(Debug, Clone)]
pub struct GameEnv<'a> {
    game: &'a GameSpec,
    features: &'a FeatureTable,
    terminal: Vec<bool>,
    step_limit: u32,
}

impl<'a> GameEnv<'a> {
    pub fn new(game: &'a GameSpec, features: &'a FeatureTable, step_limit: u32) -> Self {
        GameEnv {
            game,
            features,
            terminal: game.terminal_mask(),
            step_limit,
        }
    }
}

impl TurnEnv for GameEnv<'_> {
    fn num_states(&self) -> usize {
        self.game.num_states
    }

    fn num_ego_actions(&self) -> usize {
        self.game.num_ego_actions
    }

    fn num_other_actions(&self) -> usize {
        self.game.num_other_actions
    }

    fn feature_dim(&self) -> usize {
        self.features.dim
    }

    fn step_limit(&self) -> u32 {
        self.step_limit
    }

    fn step(&self, state: usize, a: usize, b: usize, rng: &mut Rng) -> EnvStep {
        let row = &self.game.transition[state][a][b];
        let next_state = if row.len() == 1 {
            row[0].next_state
        } else {
            let draw: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = row[row.len() - 1].next_state;
            for e in row {
                acc += e.prob;
                if draw < acc {
                    chosen = e.next_state;
                    break;
                }
            }
            chosen
        };
        EnvStep {
            next_state,
            features: self.features.vec(state, a, b).to_vec(),
            reward: self.game.reward[state][a][b],
            outcome: if self.terminal[next_state] {
                StepOutcome::Terminal
            } else {
                StepOutcome::Ongoing
            },
        }
    }
}
