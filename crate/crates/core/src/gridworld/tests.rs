use super::*;

#[test]
fn manhattan_examples() {
    assert_eq!(manhattan((0, 0), (0, 0)), 0);
    assert_eq!(manhattan((0, 0), (4, 4)), 8);
    assert_eq!(manhattan((2, 0), (2, 4)), 4);
}

#[test]
fn default_config_is_valid() {
    GridConfig::default().validate().unwrap();
    quantitative_grid_config().validate().unwrap();
}

#[test]
fn feature_vector_at_goal() {
    // Evader on g1, pursuer 4 cells away.
    let cfg = GridConfig::default();
    let g1 = cfg.goals[0];
    let pursuer = (2, 0);
    assert_eq!(manhattan(g1, pursuer), 4);
    let next = GridState::new(g1, pursuer);
    let phi = features(&cfg, &next, &next);
    let d12 = manhattan(g1, cfg.goals[1]) as f64 / cfg.goal_norm;
    let d13 = manhattan(g1, cfg.goals[2]) as f64 / cfg.goal_norm;
    let expect = vec![
        4.0 / cfg.agent_norm,
        0.0,
        1.0,
        d12.min(1.0),
        0.0,
        d13.min(1.0),
        0.0,
    ];
    assert_eq!(phi.values, expect);
}

#[test]
fn feature_vector_colocated_off_goal() {
    let cfg = GridConfig::default();
    let next = GridState::new((1, 1), (1, 1));
    let phi = features(&cfg, &next, &next);
    assert_eq!(phi.values[0], 0.0);
    assert_eq!(phi.values[2], 0.0);
    assert_eq!(phi.values[4], 0.0);
    assert_eq!(phi.values[6], 0.0);
}

#[test]
fn feature_dot_hand_computation() {
    // One step below g1 with the agents 3 apart:
    // reward = 0.7 * (3/sqrt(12)) - 1.3 * (1/sqrt(9)).
    let cfg = GridConfig::default();
    let state = GridState::new((2, 3), (2, 0));
    assert_eq!(manhattan(state.evader, state.pursuer), 3);
    assert_eq!(manhattan(state.evader, cfg.goals[0]), 1);
    let phi = features(&cfg, &state, &state);
    let w = &task_weight_presets()[0];
    let expect = 0.7 * (3.0 / 12f64.sqrt()) - 1.3 * (1.0 / 3.0);
    assert!((phi.dot(w) - expect).abs() < 1e-15);
}

#[test]
fn distance_features_clamp_to_unit_interval() {
    // Max Manhattan distance on the default grid is 8, which exceeds both
    // divisors; the clamp keeps every distance feature within [0, 1].
    let cfg = GridConfig::default();
    for ex in 0..5 {
        for ey in 0..5 {
            for px in 0..5 {
                for py in 0..5 {
                    let s = GridState::new((ex, ey), (px, py));
                    let phi = features(&cfg, &s, &s);
                    assert!(phi.values[0] >= 0.0 && phi.values[0] <= 1.0);
                    for k in 0..cfg.goals.len() {
                        let dist = phi.values[2 * k + 1];
                        let token = phi.values[2 * k + 2];
                        assert!((0.0..=1.0).contains(&dist));
                        assert!(token == 0.0 || token == cfg.token);
                    }
                }
            }
        }
    }
}

#[test]
fn boundary_move_clamps() {
    let cfg = GridConfig::default();
    let s = GridState::new((0, 0), (4, 4));
    let (next, _, outcome) = step_turn(&cfg, &s, Action::Left, Action::Up).unwrap();
    assert_eq!(next.evader, (0, 0));
    assert_eq!(next.pursuer, (4, 4));
    assert_eq!(outcome, Outcome::Ongoing);
    assert_eq!(next.steps_elapsed, 1);
}

#[test]
fn adjacent_pursuer_catches() {
    let cfg = GridConfig::default();
    // Evader walks into the wall and stays; pursuer steps onto it.
    let s = GridState::new((0, 0), (1, 0));
    let (next, _, outcome) = step_turn(&cfg, &s, Action::Left, Action::Left).unwrap();
    assert_eq!(outcome, Outcome::PursuerWin);
    assert_eq!(next.evader, next.pursuer);
}

#[test]
fn evader_reaches_active_goal() {
    let cfg = GridConfig::default().with_active_goal(2); // goal (2, 0)
    let s = GridState::new((1, 0), (4, 4));
    let (next, phi, outcome) = step_turn(&cfg, &s, Action::Right, Action::Down).unwrap();
    assert_eq!(outcome, Outcome::EvaderWin);
    assert_eq!(next.evader, (2, 0));
    assert_eq!(phi.values[6], cfg.token);
}

#[test]
fn catch_beats_goal_within_one_turn() {
    // Evader steps onto the goal but the pursuer lands on it too: the catch
    // check after the pursuer's half-move fires before the goal check.
    let cfg = GridConfig::default().with_active_goal(2);
    let s = GridState::new((1, 0), (3, 0));
    let (_, _, outcome) = step_turn(&cfg, &s, Action::Right, Action::Left).unwrap();
    assert_eq!(outcome, Outcome::PursuerWin);
}

#[test]
fn swap_is_not_a_catch() {
    let cfg = GridConfig::default();
    let s = GridState::new((1, 1), (2, 1));
    let (next, _, outcome) = step_turn(&cfg, &s, Action::Right, Action::Left).unwrap();
    // Evader moves onto the pursuer's old cell first: that is a catch by the
    // half-move rule, not a swap.
    assert_eq!(outcome, Outcome::PursuerWin);
    assert_eq!(next.evader, (2, 1));
}

#[test]
fn step_limit_produces_tie() {
    let cfg = GridConfig {
        step_limit: 1,
        ..GridConfig::default()
    };
    let s = GridState::new((0, 4), (4, 0));
    let (next, _, outcome) = step_turn(&cfg, &s, Action::Down, Action::Up).unwrap();
    assert_eq!(outcome, Outcome::Tie);
    assert_eq!(next.steps_elapsed, 1);
    assert!(matches!(
        step_turn(&cfg, &next, Action::Up, Action::Up),
        Err(GridError::EpisodeFinished)
    ));
}

#[test]
fn step_turn_is_deterministic() {
    let cfg = GridConfig::default();
    let s = GridState::new((1, 0), (3, 0));
    let x = step_turn(&cfg, &s, Action::Up, Action::Up).unwrap();
    let y = step_turn(&cfg, &s, Action::Up, Action::Up).unwrap();
    assert_eq!(x.0, y.0);
    assert_eq!(x.1, y.1);
    assert_eq!(x.2, y.2);
}

#[test]
fn default_compile_has_626_states() {
    let cfg = GridConfig::default();
    let (game, _) = compile_with_features(&cfg, &task_weight_presets()[0]).unwrap();
    assert_eq!(game.num_states, 25 * 25 + 1);
    assert_eq!(game.terminal, vec![625]);
    game.validate().unwrap();
}

#[test]
fn zero_weights_compile_to_zero_reward() {
    let cfg = GridConfig::default();
    let w = TaskWeights::new("zero", vec![0.0; 7]);
    let game = compile(&cfg, &w).unwrap();
    assert!(game.reward.iter().flatten().flatten().all(|&r| r == 0.0));
    let sol = crate::game::solve_qvi(&game, 1e-10, 10).unwrap();
    assert!(sol.q.values.iter().all(|&v| v == 0.0));
}

#[test]
fn compile_rejects_wrong_weight_length() {
    let cfg = GridConfig::default();
    let w = TaskWeights::new("short", vec![0.7, -1.3]);
    assert!(matches!(
        compile(&cfg, &w),
        Err(GridError::DimensionMismatch { expected: 7, got: 2 })
    ));
}

#[test]
fn presets_match_expected_vectors() {
    let presets = task_weight_presets();
    assert_eq!(presets[0].weights, vec![0.7, -1.3, 0.7, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(presets[1].weights, vec![0.7, 0.0, 0.0, -1.3, 0.7, 0.0, 0.0]);
    assert_eq!(presets[2].weights, vec![0.7, 0.0, 0.0, 0.0, 0.0, -1.3, 0.7]);
    assert_eq!(presets[0].implied_goal(), Some(0));
    assert_eq!(presets[1].implied_goal(), Some(1));
    assert_eq!(presets[2].implied_goal(), Some(2));
}

#[test]
fn quantitative_presets_have_nine_dims() {
    let presets = quantitative_task_weight_presets();
    assert_eq!(presets.len(), 4);
    for (k, t) in presets.iter().enumerate() {
        assert_eq!(t.dim(), 9);
        assert_eq!(t.implied_goal(), Some(k));
    }
    assert_eq!(quantitative_grid_config().feature_dim(), 9);
}

#[test]
fn compile_and_step_agree_on_trajectories() {
    let cfg = GridConfig::default().with_active_goal(1);
    let w = task_weight_presets()[1].clone();
    let (game, _) = compile_with_features(&cfg, &w).unwrap();
    let idx = GridIndexer::new(&cfg);

    // A fixed pseudo-random action script.
    let script: Vec<(Action, Action)> = (0..60)
        .map(|i| {
            (
                Action::from_index((i * 7 + 3) % 4),
                Action::from_index((i * 5 + 1) % 4),
            )
        })
        .collect();

    let mut sim = GridState::new((1, 0), (3, 0));
    let mut sid = idx.state_id(sim.evader, sim.pursuer);
    for (a, b) in script {
        if sim.steps_elapsed >= cfg.step_limit {
            break;
        }
        let (next, phi, outcome) = step_turn(&cfg, &sim, a, b).unwrap();
        let row = &game.transition[sid][a.index()][b.index()];
        assert_eq!(row.len(), 1);
        let reward = game.reward[sid][a.index()][b.index()];
        assert!((reward - phi.dot(&w)).abs() < 1e-15);
        match outcome {
            Outcome::EvaderWin | Outcome::PursuerWin => {
                assert_eq!(row[0].next_state, idx.terminal_id());
                break;
            }
            Outcome::Ongoing | Outcome::Tie => {
                assert_eq!(row[0].next_state, idx.state_id(next.evader, next.pursuer));
            }
        }
        sid = row[0].next_state;
        sim = next;
    }
}

#[test]
fn trajectory_jsonl_one_record_per_turn() {
    let recs = vec![
        TurnRecord {
            episode: 0,
            step: 1,
            evader: (1, 0),
            pursuer: (3, 0),
            a: Action::Up,
            b: Action::Left,
            reward: 0.25,
            outcome: Outcome::Ongoing,
        },
        TurnRecord {
            episode: 0,
            step: 2,
            evader: (1, 1),
            pursuer: (2, 0),
            a: Action::Up,
            b: Action::Left,
            reward: -0.125,
            outcome: Outcome::PursuerWin,
        },
    ];
    let text = trajectory_jsonl(&recs);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let parsed: TurnRecord = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(parsed.step, 1);
    assert!(lines[1].contains("\"outcome\":\"pursuer_win\""));
    assert!(lines[0].contains("\"a\":\"up\""));
}
