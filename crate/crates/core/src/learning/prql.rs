//! PRQL reuse machinery: softmax policy selection over reuse gains and the
//! per-turn reuse-vs-learn choice.

use rand::Rng as _;

use crate::game::{JointPolicy, QTable};
use crate::rng::Rng;

/// Past policies with their running reuse gains.
#[derive(Debug, Clone, Default)]
pub struct PrqlState {
    pub past: Vec<JointPolicy>,
    pub gains: Vec<f64>,
    pub uses: Vec<u64>,
    pub tau: f64,
}

impl PrqlState {
    pub fn push_policy(&mut self, policy: JointPolicy) {
        self.past.push(policy);
        self.gains.push(0.0);
        self.uses.push(0);
    }

    /// Folds an episode return into the gain of the policy reused there.
    pub fn record_return(&mut self, k: usize, episode_return: f64) {
        let n = self.uses[k] as f64;
        self.gains[k] = (self.gains[k] * n + episode_return) / (n + 1.0);
        self.uses[k] += 1;
    }
}

/// Samples an index with probability proportional to `exp(tau * gain)`.
/// At `tau = 0` every library entry is equally likely.
pub fn softmax_choice(gains: &[f64], tau: f64, rng: &mut Rng) -> usize {
    assert!(!gains.is_empty(), "softmax over an empty library");
    let m = gains
        .iter()
        .map(|g| tau * g)
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = gains.iter().map(|g| (tau * g - m).exp()).collect();
    let total: f64 = weights.iter().sum();
    let draw: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if draw < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// One turn of PRQL action selection: with probability `psi` the joint move
/// comes from the episode's chosen past policy, otherwise both halves are
/// epsilon-greedy on the current tables. With `psi = 0` or an empty library
/// no reuse randomness is consumed, so the trace matches the plain min-max
/// learner exactly.
#[allow(clippy::too_many_arguments)]
pub fn prql_select(
    library: &[JointPolicy],
    chosen: Option<usize>,
    psi: f64,
    q_ego: &QTable,
    q_other: &QTable,
    s: usize,
    epsilon: f64,
    rng: &mut Rng,
) -> (usize, usize, bool) {
    if let Some(k) = chosen {
        if psi > 0.0 && rng.gen_bool(psi.min(1.0)) {
            let pol = &library[k];
            let a = pol.ego_action(s);
            let b = pol.other_action(s, a);
            return (a, b, true);
        }
    }
    let a = if epsilon > 0.0 && rng.gen_bool(epsilon) {
        rng.gen_range(0..q_ego.num_ego_actions)
    } else {
        q_ego.minmax_pair(s).0
    };
    let b = if epsilon > 0.0 && rng.gen_bool(epsilon) {
        rng.gen_range(0..q_other.num_other_actions)
    } else {
        q_other.argmin_other(s, a)
    };
    (a, b, false)
}
