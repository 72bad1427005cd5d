//! The training episode loop and the learner state it drives.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::env::{StepOutcome, TurnEnv};
use super::prql::{prql_select, softmax_choice, PrqlState};
use super::{
    ggpi_action, ggpi_state_value, minmax_q_step, sf_td_step, Aggregator, LearnerConfig,
    QTransition, Role, SFTable, SfTransition,
};
use crate::game::{greedy_minmax_policy, QTable};
use crate::gridworld::TaskWeights;
use crate::rng::Rng;

/// The four learner variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    /// Turn-based min-max Q-learning; resets on every task switch.
    Minmax,
    /// Successor-feature min-max Q-learning with GGPI; constant exploration.
    SfMinmax,
    /// SF learner whose exploration decays and resets at task boundaries.
    SfReset,
    /// Min-max Q-learning with probabilistic reuse of past greedy policies.
    Prql,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Minmax => "minmax",
            LearnerKind::SfMinmax => "sfminmax",
            LearnerKind::SfReset => "sf_reset",
            LearnerKind::Prql => "prql",
        }
    }

    pub fn is_sf(self) -> bool {
        matches!(self, LearnerKind::SfMinmax | LearnerKind::SfReset)
    }
}

/// How an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    EvaderWin,
    PursuerWin,
    /// Step limit reached without a win.
    Tie,
    /// Generic terminal state of a non-grid environment.
    Terminated,
}

/// Per-turn log entry of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnLog {
    pub state: usize,
    pub ego_action: usize,
    pub other_action: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// What one episode produced.
#[derive(Debug, Clone)]
pub struct EpisodeRun {
    pub outcome: RunOutcome,
    /// Discounted ego return over the episode.
    pub ego_return: f64,
    /// Turns elapsed.
    pub path_length: u32,
    /// Per-turn log; empty unless requested.
    pub turns: Vec<TurnLog>,
}

/// A learner playing both roles of the game against itself.
///
/// Min-max and PRQL learners keep one Q table per role for the current task;
/// SF learners keep one frozen table pair per finished task plus the table
/// of the task in training. Under the shared per-turn update both role
/// tables see the same data; the pair is kept because the two roles consult
/// different sides when acting.
#[derive(Debug, Clone)]
pub struct Learner {
    pub kind: LearnerKind,
    pub cfg: LearnerConfig,
    pub epsilon: f64,
    pub q_ego: QTable,
    pub q_other: QTable,
    /// One SF table per task, the last one in training; unused for scalar learners.
    pub sf_tasks: Vec<SFTable>,
    /// Weight vectors matching `sf_tasks`; the last is the active task.
    pub task_weights: Vec<TaskWeights>,
    pub prql: PrqlState,
    pub episodes_trained: u64,
    num_states: usize,
    num_ego_actions: usize,
    num_other_actions: usize,
    feature_dim: usize,
}

impl Learner {
    pub fn new(
        kind: LearnerKind,
        cfg: LearnerConfig,
        env: &impl TurnEnv,
        first_task: TaskWeights,
    ) -> Self {
        cfg.validate().expect("learner config in range");
        let num_states = env.num_states();
        let num_ego_actions = env.num_ego_actions();
        let num_other_actions = env.num_other_actions();
        let feature_dim = env.feature_dim();
        assert_eq!(
            first_task.dim(),
            feature_dim,
            "task weights must match the environment's feature dimension"
        );
        let empty_q = QTable {
            num_states,
            num_ego_actions,
            num_other_actions,
            discount: cfg.gamma,
            values: vec![0.0; num_states * num_ego_actions * num_other_actions],
        };
        let mut learner = Learner {
            kind,
            epsilon: cfg.epsilon0,
            cfg,
            q_ego: empty_q.clone(),
            q_other: empty_q,
            sf_tasks: Vec::new(),
            task_weights: Vec::new(),
            prql: PrqlState::default(),
            episodes_trained: 0,
            num_states,
            num_ego_actions,
            num_other_actions,
            feature_dim,
        };
        if kind.is_sf() {
            learner.sf_tasks.push(SFTable::zeros(
                first_task.task_id.clone(),
                num_states,
                num_ego_actions,
                num_other_actions,
                feature_dim,
            ));
        }
        learner.prql.tau = learner.cfg.prql.tau0;
        learner.task_weights.push(first_task);
        learner
    }

    pub fn current_task(&self) -> &TaskWeights {
        self.task_weights.last().expect("at least one task")
    }

    /// Moves to a new task. Scalar learners reset their tables and
    /// exploration; SF learners append a fresh zero table (the old ones
    /// freeze) and only the reset variant restores exploration; PRQL stores
    /// the greedy policy of the finished task before resetting.
    pub fn start_task(&mut self, task: TaskWeights) {
        assert_eq!(task.dim(), self.feature_dim);
        match self.kind {
            LearnerKind::Minmax => {
                self.q_ego.values.iter_mut().for_each(|v| *v = 0.0);
                self.q_other.values.iter_mut().for_each(|v| *v = 0.0);
                self.epsilon = self.cfg.epsilon0;
            }
            LearnerKind::Prql => {
                self.prql.push_policy(greedy_minmax_policy(&self.q_ego));
                self.q_ego.values.iter_mut().for_each(|v| *v = 0.0);
                self.q_other.values.iter_mut().for_each(|v| *v = 0.0);
                self.epsilon = self.cfg.epsilon0;
                self.prql.tau = self.cfg.prql.tau0;
            }
            LearnerKind::SfMinmax => {
                self.sf_tasks.push(SFTable::zeros(
                    task.task_id.clone(),
                    self.num_states,
                    self.num_ego_actions,
                    self.num_other_actions,
                    self.feature_dim,
                ));
            }
            LearnerKind::SfReset => {
                self.sf_tasks.push(SFTable::zeros(
                    task.task_id.clone(),
                    self.num_states,
                    self.num_ego_actions,
                    self.num_other_actions,
                    self.feature_dim,
                ));
                self.epsilon = self.cfg.epsilon0;
            }
        }
        self.task_weights.push(task);
    }

    /// The greedy joint move at `s`: the ego picks by its rule, the other
    /// answers the ego's action. Test-time play for every learner kind.
    pub fn greedy_joint(&self, s: usize) -> (usize, usize) {
        match self.kind {
            LearnerKind::Minmax | LearnerKind::Prql => {
                let a = self.q_ego.minmax_pair(s).0;
                let b = self.q_other.argmin_other(s, a);
                (a, b)
            }
            LearnerKind::SfMinmax | LearnerKind::SfReset => {
                let w = &self.current_task().weights;
                let (a, _) = ggpi_action(
                    &self.sf_tasks,
                    w,
                    s,
                    Role::Ego,
                    None,
                    self.cfg.gpi_aggregator,
                )
                .expect("SF learner always holds at least one table");
                let (_, b) = ggpi_action(
                    &self.sf_tasks,
                    w,
                    s,
                    Role::Other,
                    Some(a),
                    self.cfg.gpi_aggregator,
                )
                .expect("SF learner always holds at least one table");
                (a, b)
            }
        }
    }

    /// `max_a min_b` of the learner's current ego-side value estimate at `s`.
    pub fn state_value(&self, s: usize) -> f64 {
        match self.kind {
            LearnerKind::Minmax | LearnerKind::Prql => self.q_ego.state_value(s),
            LearnerKind::SfMinmax | LearnerKind::SfReset => ggpi_state_value(
                &self.sf_tasks,
                &self.current_task().weights,
                s,
                self.cfg.gpi_aggregator,
            ),
        }
    }

    /// Tables frozen for finished tasks, i.e. everything but the one in
    /// training. This is what one-shot evaluation on a new task consults.
    pub fn frozen_tasks(&self) -> &[SFTable] {
        if self.sf_tasks.is_empty() {
            &[]
        } else {
            &self.sf_tasks[..self.sf_tasks.len() - 1]
        }
    }

    fn explore_or(&self, greedy: usize, n: usize, rng: &mut Rng) -> usize {
        if self.epsilon > 0.0 && rng.gen_bool(self.epsilon.min(1.0)) {
            rng.gen_range(0..n)
        } else {
            greedy
        }
    }
}

/// Runs one training episode from `start_state`, updating the learner's
/// current-task tables after every turn and decaying exploration at the end.
pub fn run_episode(
    env: &impl TurnEnv,
    learner: &mut Learner,
    start_state: usize,
    rng: &mut Rng,
    record_turns: bool,
) -> EpisodeRun {
    let agg = learner.cfg.gpi_aggregator;
    let mut s = start_state;
    let mut ego_return = 0.0;
    let mut discount_pow = 1.0;
    let mut turns = Vec::new();
    let mut outcome = RunOutcome::Tie;
    let mut turn = 0u32;

    // PRQL picks the policy it may reuse once per episode.
    let reuse_choice = if learner.kind == LearnerKind::Prql
        && !learner.prql.past.is_empty()
        && learner.cfg.prql.psi_reuse0 > 0.0
    {
        Some(softmax_choice(&learner.prql.gains, learner.prql.tau, rng))
    } else {
        None
    };
    let mut psi_reuse = learner.cfg.prql.psi_reuse0;

    while turn < env.step_limit() {
        turn += 1;
        let (a, b) = match learner.kind {
            LearnerKind::Minmax => {
                let (a, b, _) = prql_select(
                    &[],
                    None,
                    0.0,
                    &learner.q_ego,
                    &learner.q_other,
                    s,
                    learner.epsilon,
                    rng,
                );
                (a, b)
            }
            LearnerKind::Prql => {
                let (a, b, _) = prql_select(
                    &learner.prql.past,
                    reuse_choice,
                    psi_reuse,
                    &learner.q_ego,
                    &learner.q_other,
                    s,
                    learner.epsilon,
                    rng,
                );
                psi_reuse *= learner.cfg.prql.upsilon;
                (a, b)
            }
            LearnerKind::SfMinmax | LearnerKind::SfReset => {
                let w = &learner.current_task().weights;
                let (greedy_a, _) = ggpi_action(&learner.sf_tasks, w, s, Role::Ego, None, agg)
                    .expect("SF learner holds at least one table");
                let a = learner.explore_or(greedy_a, env.num_ego_actions(), rng);
                let (_, greedy_b) = ggpi_action(&learner.sf_tasks, w, s, Role::Other, Some(a), agg)
                    .expect("SF learner holds at least one table");
                let b = learner.explore_or(greedy_b, env.num_other_actions(), rng);
                (a, b)
            }
        };

        let step = env.step(s, a, b, rng);
        let next_terminal = step.outcome != StepOutcome::Ongoing;

        match learner.kind {
            LearnerKind::Minmax | LearnerKind::Prql => {
                let t = QTransition {
                    state: s,
                    ego_action: a,
                    other_action: b,
                    reward: step.reward,
                    next_state: step.next_state,
                    next_terminal,
                };
                minmax_q_step(&mut learner.q_ego, &t, &learner.cfg);
                minmax_q_step(&mut learner.q_other, &t, &learner.cfg);
            }
            LearnerKind::SfMinmax | LearnerKind::SfReset => {
                let w = learner.current_task().weights.clone();
                let cfg = learner.cfg.clone();
                let table = learner.sf_tasks.last_mut().expect("current task table");
                let t = SfTransition {
                    state: s,
                    ego_action: a,
                    other_action: b,
                    features: &step.features,
                    next_state: step.next_state,
                    next_terminal,
                };
                // Each role bootstraps from its own side's greedy joint
                // choice of the current-task table at s'.
                for role in [Role::Ego, Role::Other] {
                    let next_choice = table.greedy_pair(role, step.next_state, &w);
                    sf_td_step(table, role, &t, next_choice, &cfg);
                }
            }
        }

        if record_turns {
            turns.push(TurnLog {
                state: s,
                ego_action: a,
                other_action: b,
                reward: step.reward,
                next_state: step.next_state,
            });
        }
        ego_return += discount_pow * step.reward;
        discount_pow *= learner.cfg.gamma;
        s = step.next_state;

        match step.outcome {
            StepOutcome::Ongoing => {}
            StepOutcome::EvaderWin => {
                outcome = RunOutcome::EvaderWin;
                break;
            }
            StepOutcome::PursuerWin => {
                outcome = RunOutcome::PursuerWin;
                break;
            }
            StepOutcome::Terminal => {
                outcome = RunOutcome::Terminated;
                break;
            }
        }
    }

    if let Some(k) = reuse_choice {
        learner.prql.record_return(k, ego_return);
        learner.prql.tau += learner.cfg.prql.dtau;
    }
    if learner.kind != LearnerKind::SfMinmax {
        learner.epsilon *= learner.cfg.epsilon_decay;
    }
    learner.episodes_trained += 1;

    EpisodeRun {
        outcome,
        ego_return,
        path_length: turn,
        turns,
    }
}

/// Plays one greedy episode without exploration or table updates. The
/// learner is taken by shared reference, so snapshot evaluation cannot
/// mutate tables by construction.
pub fn greedy_rollout(
    env: &impl TurnEnv,
    learner: &Learner,
    start_state: usize,
    rng: &mut Rng,
    record_turns: bool,
) -> EpisodeRun {
    let mut s = start_state;
    let mut ego_return = 0.0;
    let mut discount_pow = 1.0;
    let mut turns = Vec::new();
    let mut outcome = RunOutcome::Tie;
    let mut turn = 0u32;
    while turn < env.step_limit() {
        turn += 1;
        let (a, b) = learner.greedy_joint(s);
        let step = env.step(s, a, b, rng);
        if record_turns {
            turns.push(TurnLog {
                state: s,
                ego_action: a,
                other_action: b,
                reward: step.reward,
                next_state: step.next_state,
            });
        }
        ego_return += discount_pow * step.reward;
        discount_pow *= learner.cfg.gamma;
        s = step.next_state;
        match step.outcome {
            StepOutcome::Ongoing => {}
            StepOutcome::EvaderWin => {
                outcome = RunOutcome::EvaderWin;
                break;
            }
            StepOutcome::PursuerWin => {
                outcome = RunOutcome::PursuerWin;
                break;
            }
            StepOutcome::Terminal => {
                outcome = RunOutcome::Terminated;
                break;
            }
        }
    }
    EpisodeRun {
        outcome,
        ego_return,
        path_length: turn,
        turns,
    }
}
