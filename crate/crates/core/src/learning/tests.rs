use super::*;
use crate::gridworld::{task_weight_presets, GridConfig, TaskWeights};
use crate::learning::episode::{greedy_rollout, run_episode, Learner, LearnerKind};
use crate::learning::env::{GridGame, TurnEnv};
use crate::rng::SeedTree;

fn small_q(num_states: usize) -> QTable {
    QTable {
        num_states,
        num_ego_actions: 2,
        num_other_actions: 2,
        discount: 0.9,
        values: vec![0.0; num_states * 4],
    }
}

#[test]
fn one_step_bootstrap_with_full_learning_rate() {
    // alpha = 1, gamma = 0, r = 5 writes the reward straight into the entry.
    let mut q = small_q(3);
    let cfg = LearnerConfig {
        alpha: 1.0,
        gamma: 0.0,
        ..LearnerConfig::default()
    };
    minmax_q_step(
        &mut q,
        &QTransition {
            state: 1,
            ego_action: 0,
            other_action: 1,
            reward: 5.0,
            next_state: 2,
            next_terminal: false,
        },
        &cfg,
    );
    assert_eq!(q.get(1, 0, 1), 5.0);
}

#[test]
fn zero_rewards_keep_zero_table() {
    let mut q = small_q(2);
    let cfg = LearnerConfig::default();
    for s in 0..2 {
        for a in 0..2 {
            for b in 0..2 {
                minmax_q_step(
                    &mut q,
                    &QTransition {
                        state: s,
                        ego_action: a,
                        other_action: b,
                        reward: 0.0,
                        next_state: (s + 1) % 2,
                        next_terminal: false,
                    },
                    &cfg,
                );
            }
        }
    }
    assert!(q.values.iter().all(|&v| v == 0.0));
}

#[test]
fn sf_step_with_alpha_one_gamma_zero_writes_features() {
    let mut t = SFTable::zeros("t", 3, 2, 2, 4);
    let cfg = LearnerConfig {
        alpha: 1.0,
        gamma: 0.0,
        ..LearnerConfig::default()
    };
    let phi = [0.5, -1.0, 0.0, 2.0];
    sf_td_step(
        &mut t,
        Role::Ego,
        &SfTransition {
            state: 2,
            ego_action: 1,
            other_action: 0,
            features: &phi,
            next_state: 0,
            next_terminal: false,
        },
        (0, 0),
        &cfg,
    );
    assert_eq!(t.vec(Role::Ego, 2, 1, 0), &phi);
    // The other role's side is untouched.
    assert!(t.vec(Role::Other, 2, 1, 0).iter().all(|&v| v == 0.0));
}

#[test]
fn zero_features_keep_zero_table() {
    let mut t = SFTable::zeros("t", 2, 2, 2, 3);
    let cfg = LearnerConfig::default();
    let phi = [0.0; 3];
    for s in 0..2 {
        sf_td_step(
            &mut t,
            Role::Other,
            &SfTransition {
                state: s,
                ego_action: 0,
                other_action: 1,
                features: &phi,
                next_state: 1 - s,
                next_terminal: false,
            },
            (1, 1),
            &cfg,
        );
    }
    assert!(t.psi.iter().all(|&v| v == 0.0));
}

#[test]
fn ggpi_rejects_empty_library() {
    assert!(matches!(
        ggpi_action(&[], &[1.0], 0, Role::Ego, None, Aggregator::MinOverTasks),
        Err(LearnError::EmptyLibrary)
    ));
}

#[test]
fn ggpi_zero_weights_tie_break_to_zero() {
    let t = SFTable::zeros("t", 2, 3, 3, 2);
    let (a, b) = ggpi_action(
        std::slice::from_ref(&t),
        &[0.0, 0.0],
        1,
        Role::Ego,
        None,
        Aggregator::MinOverTasks,
    )
    .unwrap();
    assert_eq!((a, b), (0, 0));
}

#[test]
fn ggpi_other_role_needs_observed_action() {
    let t = SFTable::zeros("t", 2, 2, 2, 1);
    assert!(matches!(
        ggpi_action(
            std::slice::from_ref(&t),
            &[1.0],
            0,
            Role::Other,
            None,
            Aggregator::MinOverTasks
        ),
        Err(LearnError::MissingObservedAction)
    ));
}

#[test]
fn ggpi_dimension_mismatch_is_an_error() {
    let t = SFTable::zeros("t", 2, 2, 2, 3);
    assert!(matches!(
        ggpi_action(
            std::slice::from_ref(&t),
            &[1.0, 2.0],
            0,
            Role::Ego,
            None,
            Aggregator::MinOverTasks
        ),
        Err(LearnError::DimMismatch { table: 3, weights: 2 })
    ));
}

#[test]
fn ggpi_indices_invariant_under_positive_scaling() {
    // Scaling every library estimate by a common positive constant must not
    // change the returned indices. Scaling the weight vector scales every
    // Q-view uniformly.
    let mut t1 = SFTable::zeros("a", 3, 3, 3, 2);
    let mut t2 = SFTable::zeros("b", 3, 3, 3, 2);
    let mut x = 0.37f64;
    for v in t1.psi.iter_mut().chain(t2.psi.iter_mut()) {
        x = (x * 997.0 + 0.123).fract() - 0.5;
        *v = x;
    }
    let tables = vec![t1, t2];
    let w = [1.0, -0.5];
    let scaled: Vec<f64> = w.iter().map(|v| v * 7.25).collect();
    for s in 0..3 {
        for agg in [Aggregator::MinOverTasks, Aggregator::MaxOverTasks] {
            let base = ggpi_action(&tables, &w, s, Role::Ego, None, agg).unwrap();
            let big = ggpi_action(&tables, &scaled, s, Role::Ego, None, agg).unwrap();
            assert_eq!(base, big);
            for a in 0..3 {
                let base = ggpi_action(&tables, &w, s, Role::Other, Some(a), agg).unwrap();
                let big = ggpi_action(&tables, &scaled, s, Role::Other, Some(a), agg).unwrap();
                assert_eq!(base, big);
            }
        }
    }
}

#[test]
fn one_shot_task_switch_does_not_touch_tables() {
    // Re-dotting with a new w changes the Q-view immediately while the
    // stored psi values stay bit-identical.
    let mut t = SFTable::zeros("t", 2, 2, 2, 7);
    for (i, v) in t.psi.iter_mut().enumerate() {
        *v = (i as f64 * 0.618).sin();
    }
    let before = t.psi.clone();
    let presets = task_weight_presets();
    let q1 = t.side_table(Role::Ego, &presets[0].weights, 0.9);
    let q2 = t.side_table(Role::Ego, &presets[1].weights, 0.9);
    assert_ne!(q1.values, q2.values);
    assert_eq!(t.psi, before);
}

#[test]
fn softmax_at_zero_tau_is_uniform() {
    let tree = SeedTree::new(11);
    let mut rng = tree.stream("softmax");
    let gains = [0.0, 0.0, 0.0, 0.0];
    let mut counts = [0usize; 4];
    for _ in 0..4000 {
        counts[softmax_choice(&gains, 0.0, &mut rng)] += 1;
    }
    for c in counts {
        assert!(c > 800, "uniform draw skewed: {counts:?}");
    }
}

fn grid_env(task: usize) -> GridGame {
    let cfg = GridConfig::default().with_active_goal(task);
    GridGame::new(cfg, task_weight_presets()[task].clone()).unwrap()
}

#[test]
fn full_exploration_episode_is_reproducible() {
    let env = grid_env(0);
    let cfg = LearnerConfig {
        epsilon0: 1.0,
        ..LearnerConfig::default()
    };
    let start = env.state_id((1, 0), (3, 0));
    let tree = SeedTree::new(99);
    let mut l1 = Learner::new(LearnerKind::Minmax, cfg.clone(), &env, env.weights().clone());
    let mut r1 = tree.stream("ep");
    let run1 = run_episode(&env, &mut l1, start, &mut r1, true);
    let mut l2 = Learner::new(LearnerKind::Minmax, cfg, &env, env.weights().clone());
    let mut r2 = tree.stream("ep");
    let run2 = run_episode(&env, &mut l2, start, &mut r2, true);
    assert_eq!(run1.turns, run2.turns);
    assert_eq!(run1.ego_return, run2.ego_return);
    assert_eq!(l1.q_ego.values, l2.q_ego.values);
}

#[test]
fn step_limit_one_gives_tie_of_length_one() {
    let cfg = GridConfig {
        step_limit: 1,
        ..GridConfig::default()
    };
    let env = GridGame::new(cfg, task_weight_presets()[0].clone()).unwrap();
    let mut learner = Learner::new(
        LearnerKind::Minmax,
        LearnerConfig::default(),
        &env,
        env.weights().clone(),
    );
    let start = env.state_id((0, 0), (4, 4));
    let mut rng = SeedTree::new(1).stream("ep");
    let run = run_episode(&env, &mut learner, start, &mut rng, false);
    assert_eq!(run.outcome, RunOutcome::Tie);
    assert_eq!(run.path_length, 1);
}

#[test]
fn prql_without_reuse_matches_minmax_trace() {
    // psi_reuse0 = 0 must leave the PRQL learner on the exact same seeded
    // trajectory and tables as the plain min-max learner.
    let env = grid_env(1);
    let start = env.state_id((1, 0), (3, 0));
    let base_cfg = LearnerConfig {
        epsilon0: 0.3,
        ..LearnerConfig::default()
    };
    let prql_cfg = LearnerConfig {
        prql: PrqlParams {
            psi_reuse0: 0.0,
            ..PrqlParams::default()
        },
        ..base_cfg.clone()
    };
    let tree = SeedTree::new(5);
    let mut minmax = Learner::new(LearnerKind::Minmax, base_cfg, &env, env.weights().clone());
    let mut prql = Learner::new(LearnerKind::Prql, prql_cfg, &env, env.weights().clone());
    // Give PRQL a past policy so reuse would trigger if it were allowed.
    prql.prql.push_policy(crate::game::greedy_minmax_policy(&prql.q_ego));
    for ep in 0..50u64 {
        let mut r1 = tree.stream_idx("ep", ep);
        let mut r2 = tree.stream_idx("ep", ep);
        let run1 = run_episode(&env, &mut minmax, start, &mut r1, true);
        let run2 = run_episode(&env, &mut prql, start, &mut r2, true);
        assert_eq!(run1.turns, run2.turns, "diverged at episode {ep}");
    }
    assert_eq!(minmax.q_ego.values, prql.q_ego.values);
}

#[test]
fn fresh_sf_and_minmax_learners_tie_break_identically() {
    // Zero tables: both rules fall back to the lowest-index joint choice at
    // every state. Full seeded-trace equality with d = 1 reward features is
    // exercised in the TD-consistency integration tests.
    let env = grid_env(0);
    let cfg = LearnerConfig::default();
    let minmax = Learner::new(LearnerKind::Minmax, cfg.clone(), &env, env.weights().clone());
    let sf = Learner::new(LearnerKind::SfMinmax, cfg, &env, env.weights().clone());
    for s in [0usize, 37, 200, 624] {
        assert_eq!(minmax.greedy_joint(s), (0, 0));
        assert_eq!(minmax.greedy_joint(s), sf.greedy_joint(s));
    }
}

#[test]
fn tables_stay_finite_over_long_runs() {
    let env = grid_env(0);
    let start = env.state_id((1, 0), (3, 0));
    let mut learner = Learner::new(
        LearnerKind::SfMinmax,
        LearnerConfig::default(),
        &env,
        env.weights().clone(),
    );
    let tree = SeedTree::new(3);
    let mut total_steps = 0u64;
    let mut ep = 0u64;
    while total_steps < 200_000 {
        let mut rng = tree.stream_idx("ep", ep);
        let run = run_episode(&env, &mut learner, start, &mut rng, false);
        total_steps += run.path_length as u64;
        ep += 1;
    }
    assert!(learner.sf_tasks.iter().all(|t| t.all_finite()));
}

#[test]
fn greedy_rollout_does_not_learn() {
    let env = grid_env(0);
    let start = env.state_id((1, 0), (3, 0));
    let mut learner = Learner::new(
        LearnerKind::SfMinmax,
        LearnerConfig::default(),
        &env,
        env.weights().clone(),
    );
    let tree = SeedTree::new(21);
    let mut rng = tree.stream("warmup");
    for _ in 0..20 {
        run_episode(&env, &mut learner, start, &mut rng, false);
    }
    let before = learner.sf_tasks[0].psi.clone();
    let mut rng2 = tree.stream("test");
    let run = greedy_rollout(&env, &learner, start, &mut rng2, true);
    assert!(run.path_length >= 1);
    assert_eq!(learner.sf_tasks[0].psi, before);
}

#[test]
fn config_validation_rejects_out_of_range() {
    let mut cfg = LearnerConfig::default();
    cfg.alpha = 0.0;
    assert!(cfg.validate().is_err());
    let mut cfg = LearnerConfig::default();
    cfg.gamma = 1.0;
    assert!(cfg.validate().is_err());
    let mut cfg = LearnerConfig::default();
    cfg.epsilon_decay = 0.0;
    assert!(cfg.validate().is_err());
    assert!(LearnerConfig::default().validate().is_ok());
}
