//! Empirical auditors of the transfer bounds: seeded random games, exact
//! solutions from the game solvers, and pointwise bound checks with measured
//! slack. Violations are data, not errors; a clean audit reports zero.

use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::game::{
    evaluate_policy, greedy_minmax_policy, solve_qvi, GameSpec, JointPolicy, QTable,
    TransitionEntry,
};
use crate::rng::Rng;

/// Absolute tolerance below which a bound counts as violated. The exact
/// solvers run three orders tighter.
pub const VIOLATION_TOL: f64 = 1e-9;

/// `(|S|, |A|, |B|)` of the generated games.
pub type Sizes = (usize, usize, usize);

/// How library policies are drawn for the improvement audits.
///
/// `Uniform` draws both policy components uniformly over all deterministic
/// maps. `BestResponse` draws the ego component uniformly and pairs it with
/// the exact minimizing adversary, so each library value function is
/// consistent with adversarial play. The improvement bound presumes the
/// latter; uniform adversaries inflate library values above what any policy
/// can attain (see the audit tests for a two-line counterexample).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PolicyDraw {
    Uniform,
    #[default]
    BestResponse,
}

/// Outcome of one audit battery.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub audit: String,
    pub games_tested: usize,
    pub entries_checked: u64,
    pub violations: u64,
    /// Smallest margin by which the bound held (negative on violation).
    pub min_slack: f64,
    pub worst_case: Option<WorstCase>,
    /// Whether the sharper `(1+gamma)/(1-gamma)` penalty also held
    /// (improvement audit only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sharper_constant_held: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sharper_min_slack: Option<f64>,
}

impl BoundReport {
    fn new(audit: &str) -> Self {
        BoundReport {
            audit: audit.to_string(),
            games_tested: 0,
            entries_checked: 0,
            violations: 0,
            min_slack: f64::INFINITY,
            worst_case: None,
            sharper_constant_held: None,
            sharper_min_slack: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// Merges reports from disjoint seed ranges: counts add, slacks take
    /// the minimum, the worst case follows the minimum slack.
    pub fn merge(mut self, other: BoundReport) -> BoundReport {
        assert_eq!(self.audit, other.audit, "cannot merge different audits");
        self.games_tested += other.games_tested;
        self.entries_checked += other.entries_checked;
        self.violations += other.violations;
        if other.min_slack < self.min_slack {
            self.min_slack = other.min_slack;
            self.worst_case = other.worst_case;
        }
        self.sharper_constant_held = match (self.sharper_constant_held, other.sharper_constant_held)
        {
            (Some(a), Some(b)) => Some(a && b),
            (a, b) => a.or(b),
        };
        self.sharper_min_slack = match (self.sharper_min_slack, other.sharper_min_slack) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self
    }
}

/// The entry at which a bound came closest to failing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorstCase {
    pub seed: u64,
    pub state: usize,
    pub ego_action: usize,
    pub other_action: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub game: GameSpec,
}

fn audit_rng(seed: u64, salt: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e3779b97f4a7c15))
}

/// Seeded random game: rewards uniform in `[-1, 1]`, successor rows drawn as
/// normalized uniforms, no terminal states. Identical seeds give identical
/// games.
pub fn random_game(seed: u64, sizes: Sizes, gamma: f64) -> GameSpec {
    let (ns, na, nb) = sizes;
    assert!(ns >= 1 && na >= 1 && nb >= 1, "sizes must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transition = Vec::with_capacity(ns);
    let mut reward = Vec::with_capacity(ns);
    for _ in 0..ns {
        let mut t_a = Vec::with_capacity(na);
        let mut r_a = Vec::with_capacity(na);
        for _ in 0..na {
            let mut t_b = Vec::with_capacity(nb);
            let mut r_b = Vec::with_capacity(nb);
            for _ in 0..nb {
                r_b.push(rng.gen_range(-1.0..=1.0));
                let raw: Vec<f64> = (0..ns).map(|_| rng.gen::<f64>().max(1e-9)).collect();
                let total: f64 = raw.iter().sum();
                // Assign the residual mass to the last entry so the row sums
                // to 1 exactly up to one rounding.
                let mut row: Vec<TransitionEntry> = Vec::with_capacity(ns);
                let mut acc = 0.0;
                for (s2, v) in raw.iter().enumerate() {
                    let p = if s2 + 1 == ns {
                        (1.0 - acc).max(0.0)
                    } else {
                        v / total
                    };
                    acc += p;
                    row.push(TransitionEntry {
                        next_state: s2,
                        prob: p,
                    });
                }
                t_b.push(row);
            }
            t_a.push(t_b);
            r_a.push(r_b);
        }
        transition.push(t_a);
        reward.push(r_a);
    }
    let game = GameSpec {
        num_states: ns,
        num_ego_actions: na,
        num_other_actions: nb,
        discount: gamma,
        terminal: Vec::new(),
        transition,
        reward,
    };
    debug_assert!(game.validate().is_ok());
    game
}

/// Uniform draw over deterministic joint policies.
pub fn random_joint_policy(game: &GameSpec, rng: &mut Rng) -> JointPolicy {
    let ego = (0..game.num_states)
        .map(|_| rng.gen_range(0..game.num_ego_actions))
        .collect();
    let other = (0..game.num_states * game.num_ego_actions)
        .map(|_| rng.gen_range(0..game.num_other_actions))
        .collect();
    JointPolicy {
        ego,
        other,
        num_ego_actions: game.num_ego_actions,
    }
}

/// Pairs a fixed ego policy with its exact best-responding adversary:
/// `mu(s, a) = argmin_b [r(s,a,b) + gamma * sum_s' P(s'|s,a,b) W(s')]` where
/// `W` is the adversary's value against `pi`, solved by value iteration.
pub fn best_response_policy(game: &GameSpec, ego: Vec<usize>) -> JointPolicy {
    let terminal = game.terminal_mask();
    let mut w = vec![0.0f64; game.num_states];
    for _ in 0..2_000_000 {
        let mut residual = 0.0f64;
        let mut next = w.clone();
        for s in 0..game.num_states {
            if terminal[s] {
                next[s] = 0.0;
                continue;
            }
            let a = ego[s];
            let mut best = f64::INFINITY;
            for b in 0..game.num_other_actions {
                let mut acc = 0.0;
                for e in &game.transition[s][a][b] {
                    acc += e.prob * w[e.next_state];
                }
                best = best.min(game.reward[s][a][b] + game.discount * acc);
            }
            residual = residual.max((best - w[s]).abs());
            next[s] = best;
        }
        w = next;
        if residual <= 1e-13 {
            break;
        }
    }
    let mut other = Vec::with_capacity(game.num_states * game.num_ego_actions);
    for s in 0..game.num_states {
        for a in 0..game.num_ego_actions {
            let mut best_b = 0;
            let mut best_v = f64::INFINITY;
            for b in 0..game.num_other_actions {
                let mut acc = 0.0;
                for e in &game.transition[s][a][b] {
                    acc += e.prob * w[e.next_state];
                }
                let v = game.reward[s][a][b] + game.discount * acc;
                if v < best_v {
                    best_b = b;
                    best_v = v;
                }
            }
            other.push(best_b);
        }
    }
    JointPolicy {
        ego,
        other,
        num_ego_actions: game.num_ego_actions,
    }
}

fn draw_policy(game: &GameSpec, draw: PolicyDraw, rng: &mut Rng) -> JointPolicy {
    match draw {
        PolicyDraw::Uniform => random_joint_policy(game, rng),
        PolicyDraw::BestResponse => {
            let ego = (0..game.num_states)
                .map(|_| rng.gen_range(0..game.num_ego_actions))
                .collect();
            best_response_policy(game, ego)
        }
    }
}

fn perturb(q: &QTable, epsilon: f64, rng: &mut Rng) -> QTable {
    if epsilon == 0.0 {
        return q.clone();
    }
    let mut out = q.clone();
    for v in &mut out.values {
        *v += rng.gen_range(-epsilon..=epsilon);
    }
    out
}

/// The GGPI joint policy of a set of value estimates: the ego maximizes the
/// min-aggregate, the other minimizes it given the observed ego action.
pub fn ggpi_policy_from_tables(tables: &[QTable]) -> JointPolicy {
    let first = &tables[0];
    let value = |s: usize, a: usize, b: usize| -> f64 {
        tables
            .iter()
            .map(|t| t.get(s, a, b))
            .fold(f64::INFINITY, f64::min)
    };
    let mut ego = Vec::with_capacity(first.num_states);
    let mut other = Vec::with_capacity(first.num_states * first.num_ego_actions);
    for s in 0..first.num_states {
        let mut best_a = 0;
        let mut best_v = f64::NEG_INFINITY;
        for a in 0..first.num_ego_actions {
            let mut row_v = f64::INFINITY;
            for b in 0..first.num_other_actions {
                row_v = row_v.min(value(s, a, b));
            }
            if row_v > best_v {
                best_a = a;
                best_v = row_v;
            }
        }
        ego.push(best_a);
        for a in 0..first.num_ego_actions {
            let mut best_b = 0;
            let mut best_vb = f64::INFINITY;
            for b in 0..first.num_other_actions {
                let v = value(s, a, b);
                if v < best_vb {
                    best_b = b;
                    best_vb = v;
                }
            }
            other.push(best_b);
        }
    }
    JointPolicy {
        ego,
        other,
        num_ego_actions: first.num_ego_actions,
    }
}

struct Check<'a> {
    report: &'a mut BoundReport,
    seed: u64,
    game: &'a GameSpec,
}

impl Check<'_> {
    fn record(&mut self, s: usize, a: usize, b: usize, lhs: f64, rhs: f64) {
        let slack = lhs - rhs;
        self.report.entries_checked += 1;
        if slack < -VIOLATION_TOL {
            self.report.violations += 1;
        }
        if slack < self.report.min_slack {
            self.report.min_slack = slack;
            self.report.worst_case = Some(WorstCase {
                seed: self.seed,
                state: s,
                ego_action: a,
                other_action: b,
                lhs,
                rhs,
                game: self.game.clone(),
            });
        }
    }
}

/// Audits the improvement bound
/// `Q^Pi(s,a,b) >= min_i Q^{Pi_i}(s,a,b) - 2 eps / (1 - gamma)`.
///
/// Per game: draws `n_policies` library policies, evaluates them exactly,
/// perturbs each entrywise by uniform noise within `epsilon_inject`, builds
/// the GGPI policy from the perturbed set and evaluates it exactly. Also
/// tracks whether the sharper `(1+gamma)` penalty constant held.
pub fn audit_theorem1(
    seeds: &[u64],
    sizes: Sizes,
    gamma: f64,
    n_policies: usize,
    epsilon_inject: f64,
    draw: PolicyDraw,
) -> BoundReport {
    assert!(epsilon_inject >= 0.0);
    assert!(n_policies >= 1);
    let mut report = BoundReport::new("theorem1");
    report.sharper_constant_held = Some(true);
    report.sharper_min_slack = Some(f64::INFINITY);
    for &seed in seeds {
        let game = random_game(seed, sizes, gamma);
        let mut rng = audit_rng(seed, 1);
        let exact: Vec<QTable> = (0..n_policies)
            .map(|_| {
                let pol = draw_policy(&game, draw, &mut rng);
                evaluate_policy(&game, &pol).expect("policy evaluation on a valid game")
            })
            .collect();
        let perturbed: Vec<QTable> = exact
            .iter()
            .map(|q| perturb(q, epsilon_inject, &mut rng))
            .collect();
        let policy = ggpi_policy_from_tables(&perturbed);
        let achieved = evaluate_policy(&game, &policy).expect("GGPI policy evaluates");
        let penalty = 2.0 * epsilon_inject / (1.0 - gamma);
        let sharper_penalty = epsilon_inject * (1.0 + gamma) / (1.0 - gamma);
        let mut check = Check {
            report: &mut report,
            seed,
            game: &game,
        };
        for s in 0..game.num_states {
            for a in 0..game.num_ego_actions {
                for b in 0..game.num_other_actions {
                    let min_exact = exact
                        .iter()
                        .map(|q| q.get(s, a, b))
                        .fold(f64::INFINITY, f64::min);
                    let lhs = achieved.get(s, a, b);
                    check.record(s, a, b, lhs, min_exact - penalty);
                    let sharper_slack = lhs - (min_exact - sharper_penalty);
                    if sharper_slack < -VIOLATION_TOL {
                        report.sharper_constant_held = Some(false);
                    }
                    report.sharper_min_slack =
                        Some(report.sharper_min_slack.unwrap().min(sharper_slack));
                }
            }
        }
        report.games_tested += 1;
    }
    report
}

/// Audits the reward-similarity bound
/// `|Q_i^Pi - Q_j^Pi| <= max_(s,a,b) |r_i - r_j| / (1 - gamma)`
/// for a shared random policy and a random reward pair on shared dynamics.
pub fn audit_lemma1(seeds: &[u64], sizes: Sizes, gamma: f64) -> BoundReport {
    let mut report = BoundReport::new("lemma1");
    for &seed in seeds {
        let game_i = random_game(seed, sizes, gamma);
        let mut rng = audit_rng(seed, 2);
        let mut game_j = game_i.clone();
        for plane in game_j.reward.iter_mut() {
            for row in plane.iter_mut() {
                for r in row.iter_mut() {
                    *r = rng.gen_range(-1.0..=1.0);
                }
            }
        }
        let policy = random_joint_policy(&game_i, &mut rng);
        let q_i = evaluate_policy(&game_i, &policy).expect("valid game");
        let q_j = evaluate_policy(&game_j, &policy).expect("valid game");
        let mut delta = 0.0f64;
        for s in 0..game_i.num_states {
            for a in 0..game_i.num_ego_actions {
                for b in 0..game_i.num_other_actions {
                    delta = delta
                        .max((game_i.reward[s][a][b] - game_j.reward[s][a][b]).abs());
                }
            }
        }
        let bound = delta / (1.0 - gamma);
        let mut check = Check {
            report: &mut report,
            seed,
            game: &game_i,
        };
        for s in 0..game_i.num_states {
            for a in 0..game_i.num_ego_actions {
                for b in 0..game_i.num_other_actions {
                    let lhs = bound;
                    let rhs = (q_i.get(s, a, b) - q_j.get(s, a, b)).abs();
                    // Slack = bound - |difference|; violation when negative.
                    check.record(s, a, b, lhs, rhs);
                }
            }
        }
        report.games_tested += 1;
    }
    report
}

/// Audits the composite transfer bound
/// `Q*_i - Q^Pi_i <= (2/(1-gamma)) min_j max|r_i - r_j| + (2/(1-gamma)) eps`:
/// libraries hold optimal policies of their own random tasks, cross-evaluated
/// on the target task, perturbed, and fed to GGPI.
pub fn audit_proposition1(
    seeds: &[u64],
    sizes: Sizes,
    gamma: f64,
    n_library: usize,
    epsilon_inject: f64,
) -> BoundReport {
    assert!(n_library >= 1);
    let mut report = BoundReport::new("proposition1");
    for &seed in seeds {
        let target = random_game(seed, sizes, gamma);
        let mut rng = audit_rng(seed, 3);
        let q_star = solve_qvi(&target, 1e-12, 1_000_000)
            .expect("Q-VI converges on valid games")
            .q;

        let mut deltas = Vec::with_capacity(n_library);
        let mut cross: Vec<QTable> = Vec::with_capacity(n_library);
        for _ in 0..n_library {
            let mut task = target.clone();
            for plane in task.reward.iter_mut() {
                for row in plane.iter_mut() {
                    for r in row.iter_mut() {
                        *r = rng.gen_range(-1.0..=1.0);
                    }
                }
            }
            let mut delta = 0.0f64;
            for s in 0..target.num_states {
                for a in 0..target.num_ego_actions {
                    for b in 0..target.num_other_actions {
                        delta = delta
                            .max((target.reward[s][a][b] - task.reward[s][a][b]).abs());
                    }
                }
            }
            deltas.push(delta);
            let solved = solve_qvi(&task, 1e-12, 1_000_000).expect("Q-VI converges");
            let pol = greedy_minmax_policy(&solved.q);
            cross.push(evaluate_policy(&target, &pol).expect("cross-evaluation"));
        }
        let perturbed: Vec<QTable> = cross
            .iter()
            .map(|q| perturb(q, epsilon_inject, &mut rng))
            .collect();
        let policy = ggpi_policy_from_tables(&perturbed);
        let achieved = evaluate_policy(&target, &policy).expect("GGPI policy evaluates");

        let best_delta = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
        let bound = 2.0 / (1.0 - gamma) * best_delta + 2.0 / (1.0 - gamma) * epsilon_inject;
        let mut check = Check {
            report: &mut report,
            seed,
            game: &target,
        };
        for s in 0..target.num_states {
            for a in 0..target.num_ego_actions {
                for b in 0..target.num_other_actions {
                    // Slack = bound - (Q*_i - Q^Pi_i); violation when negative.
                    let gap = q_star.get(s, a, b) - achieved.get(s, a, b);
                    check.record(s, a, b, bound, gap);
                }
            }
        }
        report.games_tested += 1;
    }
    report
}

#[cfg(test)]
mod tests;
