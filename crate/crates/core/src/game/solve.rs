//! Exact solvers: the max-min Bellman operator, Q-value iteration and
//! fixed-policy evaluation for scalars and feature vectors.

use super::{FeatureTable, GameError, GameSpec, JointPolicy, QTable};

/// Iteration tolerance used for exact policy evaluation.
pub const EVAL_TOL: f64 = 1e-12;

/// Hard cap on evaluation sweeps; generous for any discount used here.
const EVAL_MAX_SWEEPS: usize = 2_000_000;

/// One application of the max-min Bellman operator `F`:
/// `(FQ)(s,a,b) = r(s,a,b) + gamma * sum_s' P(s'|s,a,b) max_a' min_b' Q(s',a',b')`.
/// Terminal states back up to their (zero) reward only.
pub fn bellman_backup(q: &QTable, game: &GameSpec) -> Result<QTable, GameError> {
    if !q.matches(game) {
        return Err(GameError::ShapeMismatch(
            "Q table shape does not match the game".into(),
        ));
    }
    let terminal = game.terminal_mask();
    // State values of the current table, computed once per state.
    let state_values: Vec<f64> = (0..game.num_states).map(|s| q.state_value(s)).collect();
    let mut out = q.clone();
    for s in 0..game.num_states {
        for a in 0..game.num_ego_actions {
            for b in 0..game.num_other_actions {
                let r = game.reward[s][a][b];
                let v = if terminal[s] {
                    r
                } else {
                    let mut acc = 0.0;
                    for e in &game.transition[s][a][b] {
                        acc += e.prob * state_values[e.next_state];
                    }
                    r + game.discount * acc
                };
                out.set(s, a, b, v);
            }
        }
    }
    Ok(out)
}

/// Result of Q-value iteration.
#[derive(Debug, Clone)]
pub struct QviSolution {
    pub q: QTable,
    pub iters: usize,
    pub residual: f64,
    /// Sup-norm change per iteration, in order.
    pub residual_history: Vec<f64>,
}

/// Iterates [`bellman_backup`] from zero until the sup-norm change drops to
/// `tol`. Exceeding `max_iters` is an explicit error carrying the residual.
pub fn solve_qvi(game: &GameSpec, tol: f64, max_iters: usize) -> Result<QviSolution, GameError> {
    assert!(tol > 0.0, "tolerance must be positive");
    game.validate()?;
    let mut q = QTable::zeros(game);
    let mut history = Vec::new();
    for iter in 1..=max_iters {
        let next = bellman_backup(&q, game)?;
        let residual = next.sup_norm_diff(&q);
        history.push(residual);
        q = next;
        if residual <= tol {
            return Ok(QviSolution {
                q,
                iters: iter,
                residual,
                residual_history: history,
            });
        }
    }
    Err(GameError::NotConverged {
        iters: max_iters,
        residual: history.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// Greedy max-min joint policy of a table: `ego(s) = argmax_a min_b Q(s,a,b)`,
/// `other(s,a) = argmin_b Q(s,a,b)`; ties break toward the lowest index.
pub fn greedy_minmax_policy(q: &QTable) -> JointPolicy {
    let mut ego = Vec::with_capacity(q.num_states);
    let mut other = Vec::with_capacity(q.num_states * q.num_ego_actions);
    for s in 0..q.num_states {
        let (a, _) = q.minmax_pair(s);
        ego.push(a);
        for a in 0..q.num_ego_actions {
            other.push(q.argmin_other(s, a));
        }
    }
    JointPolicy {
        ego,
        other,
        num_ego_actions: q.num_ego_actions,
    }
}

/// Exact fixed point of
/// `Q(s,a,b) = r(s,a,b) + gamma * sum_s' P(s'|s,a,b) Q(s', pi(s'), mu(s', pi(s')))`,
/// computed by iteration to sup-norm tolerance [`EVAL_TOL`].
pub fn evaluate_policy(game: &GameSpec, policy: &JointPolicy) -> Result<QTable, GameError> {
    if !policy.total_for(game) {
        return Err(GameError::ShapeMismatch(
            "policy is not total over the game's spaces".into(),
        ));
    }
    let terminal = game.terminal_mask();
    let mut q = QTable::zeros(game);
    for _ in 0..EVAL_MAX_SWEEPS {
        let on_policy: Vec<f64> = (0..game.num_states)
            .map(|s| {
                let (a, b) = policy.joint(s);
                q.get(s, a, b)
            })
            .collect();
        let mut residual = 0.0f64;
        let mut next = q.clone();
        for s in 0..game.num_states {
            for a in 0..game.num_ego_actions {
                for b in 0..game.num_other_actions {
                    let r = game.reward[s][a][b];
                    let v = if terminal[s] {
                        r
                    } else {
                        let mut acc = 0.0;
                        for e in &game.transition[s][a][b] {
                            acc += e.prob * on_policy[e.next_state];
                        }
                        r + game.discount * acc
                    };
                    residual = residual.max((v - q.get(s, a, b)).abs());
                    next.set(s, a, b, v);
                }
            }
        }
        q = next;
        if residual <= EVAL_TOL {
            break;
        }
    }
    Ok(q)
}

/// Exact successor features of a joint policy: the componentwise fixed point
/// of `psi = phi + gamma * P_Pi psi`, with `psi = phi` at terminal states.
pub fn evaluate_policy_features(
    game: &GameSpec,
    features: &FeatureTable,
    policy: &JointPolicy,
) -> Result<FeatureTable, GameError> {
    if !policy.total_for(game) {
        return Err(GameError::ShapeMismatch(
            "policy is not total over the game's spaces".into(),
        ));
    }
    if features.num_states != game.num_states
        || features.num_ego_actions != game.num_ego_actions
        || features.num_other_actions != game.num_other_actions
    {
        return Err(GameError::ShapeMismatch(
            "feature table shape does not match the game".into(),
        ));
    }
    let d = features.dim;
    let terminal = game.terminal_mask();
    let mut psi = FeatureTable::zeros(game, d);
    for _ in 0..EVAL_MAX_SWEEPS {
        // psi at the on-policy joint choice of each state.
        let mut on_policy = vec![0.0; game.num_states * d];
        for s in 0..game.num_states {
            let (a, b) = policy.joint(s);
            on_policy[s * d..(s + 1) * d].copy_from_slice(psi.vec(s, a, b));
        }
        let mut residual = 0.0f64;
        let mut next = psi.clone();
        for s in 0..game.num_states {
            for a in 0..game.num_ego_actions {
                for b in 0..game.num_other_actions {
                    let phi = features.vec(s, a, b);
                    let out = next.vec_mut(s, a, b);
                    if terminal[s] {
                        out.copy_from_slice(phi);
                    } else {
                        for k in 0..d {
                            let mut acc = 0.0;
                            for e in &game.transition[s][a][b] {
                                acc += e.prob * on_policy[e.next_state * d + k];
                            }
                            out[k] = phi[k] + game.discount * acc;
                        }
                    }
                    for k in 0..d {
                        residual = residual.max((out[k] - psi.vec(s, a, b)[k]).abs());
                    }
                }
            }
        }
        psi = next;
        if residual <= EVAL_TOL {
            break;
        }
    }
    Ok(psi)
}
