//! The task library: weight vectors and frozen successor-feature tables of
//! solved tasks, one-shot GGPI evaluation on new tasks, least-squares weight
//! recovery and reward-distance diagnostics.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{FeatureTable, JointPolicy, QTable};
use crate::gridworld::TaskWeights;
use crate::learning::{Aggregator, Role, SFTable};

/// On-disk manifest format version.
pub const LIBRARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("feature dimension mismatch: library has {library}, got {got}")]
    DimensionMismatch { library: usize, got: usize },
    #[error("library holds no tasks")]
    EmptyLibrary,
    #[error("task index {0} out of range")]
    TaskIndex(usize),
    #[error("no observations to fit")]
    NoObservations,
    #[error("rank-deficient normal equations; add observations or a positive ridge")]
    RankDeficient,
    #[error("unsupported library schema version {0}")]
    SchemaVersion(u32),
    #[error("malformed library: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Training provenance of a stored task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskMeta {
    pub episodes_trained: u64,
    pub final_epsilon: f64,
}

/// One solved task: its weights, its frozen SF table pair and metadata.
#[derive(Debug, Clone)]
pub struct LibraryTask {
    pub weights: TaskWeights,
    pub table: SFTable,
    pub meta: TaskMeta,
}

/// Ordered registry of solved tasks sharing one feature space.
#[derive(Debug, Clone)]
pub struct TaskLibrary {
    pub feature_dim: usize,
    pub discount: f64,
    pub tasks: Vec<LibraryTask>,
}

impl TaskLibrary {
    pub fn new(feature_dim: usize, discount: f64) -> Self {
        TaskLibrary {
            feature_dim,
            discount,
            tasks: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn find(&self, task_id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.weights.task_id == task_id)
    }

    /// Registers a task, replacing any existing entry with the same id so
    /// that re-running a training cell is idempotent.
    pub fn upsert(&mut self, task: LibraryTask) -> Result<(), TransferError> {
        if task.weights.dim() != self.feature_dim || task.table.dim != self.feature_dim {
            return Err(TransferError::DimensionMismatch {
                library: self.feature_dim,
                got: task.weights.dim(),
            });
        }
        match self.find(&task.weights.task_id) {
            Some(i) => self.tasks[i] = task,
            None => self.tasks.push(task),
        }
        Ok(())
    }
}

/// Everything one-shot evaluation materializes for a new task.
#[derive(Debug, Clone)]
pub struct TaskEvaluation {
    /// `psi_i . w_new` per library task, ego side.
    pub ego_views: Vec<QTable>,
    /// `psi_i . w_new` per library task, other side.
    pub other_views: Vec<QTable>,
    /// Aggregate (min by default) of the ego views.
    pub agg_ego: QTable,
    /// Aggregate of the other views.
    pub agg_other: QTable,
    /// GGPI joint policy: ego maximizes over `agg_ego`, other minimizes over
    /// `agg_other` given the observed ego action.
    pub policy: JointPolicy,
}

fn aggregate(views: &[QTable], agg: Aggregator) -> QTable {
    let mut out = views[0].clone();
    for view in &views[1..] {
        for (o, v) in out.values.iter_mut().zip(&view.values) {
            *o = match agg {
                Aggregator::MinOverTasks => o.min(*v),
                Aggregator::MaxOverTasks => o.max(*v),
            };
        }
    }
    out
}

/// Re-dots every stored table with `w_new` and builds the GGPI policy over
/// the views. The library itself is read-only here.
pub fn evaluate_on_task(
    lib: &TaskLibrary,
    w_new: &TaskWeights,
    agg: Aggregator,
) -> Result<TaskEvaluation, TransferError> {
    if lib.is_empty() {
        return Err(TransferError::EmptyLibrary);
    }
    if w_new.dim() != lib.feature_dim {
        return Err(TransferError::DimensionMismatch {
            library: lib.feature_dim,
            got: w_new.dim(),
        });
    }
    let ego_views: Vec<QTable> = lib
        .tasks
        .iter()
        .map(|t| t.table.side_table(Role::Ego, &w_new.weights, lib.discount))
        .collect();
    let other_views: Vec<QTable> = lib
        .tasks
        .iter()
        .map(|t| t.table.side_table(Role::Other, &w_new.weights, lib.discount))
        .collect();
    let agg_ego = aggregate(&ego_views, agg);
    let agg_other = aggregate(&other_views, agg);
    let mut ego = Vec::with_capacity(agg_ego.num_states);
    let mut other = Vec::with_capacity(agg_ego.num_states * agg_ego.num_ego_actions);
    for s in 0..agg_ego.num_states {
        ego.push(agg_ego.minmax_pair(s).0);
        for a in 0..agg_ego.num_ego_actions {
            other.push(agg_other.argmin_other(s, a));
        }
    }
    let policy = JointPolicy {
        ego,
        other,
        num_ego_actions: agg_ego.num_ego_actions,
    };
    Ok(TaskEvaluation {
        ego_views,
        other_views,
        agg_ego,
        agg_other,
        policy,
    })
}

/// Ridge-regularized least-squares fit of task weights from `(phi, r)`
/// observations via the normal equations.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub weights: TaskWeights,
    pub residual_rms: f64,
}

pub fn fit_task_weights(
    observations: &[(Vec<f64>, f64)],
    ridge: f64,
    task_id: impl Into<String>,
) -> Result<FitResult, TransferError> {
    let first = observations.first().ok_or(TransferError::NoObservations)?;
    let d = first.0.len();
    if d == 0 || observations.iter().any(|(phi, _)| phi.len() != d) {
        return Err(TransferError::Format(
            "observations must share one nonzero feature length".into(),
        ));
    }
    assert!(ridge >= 0.0, "ridge must be non-negative");

    // Normal equations: (X^T X + ridge I) w = X^T r.
    let mut ata = vec![0.0f64; d * d];
    let mut atr = vec![0.0f64; d];
    for (phi, r) in observations {
        for i in 0..d {
            atr[i] += phi[i] * r;
            for j in 0..d {
                ata[i * d + j] += phi[i] * phi[j];
            }
        }
    }
    for i in 0..d {
        ata[i * d + i] += ridge;
    }

    let w = solve_symmetric(&mut ata, &mut atr, d)?;
    let mut sq = 0.0;
    for (phi, r) in observations {
        let pred: f64 = phi.iter().zip(&w).map(|(p, w)| p * w).sum();
        sq += (pred - r) * (pred - r);
    }
    let residual_rms = (sq / observations.len() as f64).sqrt();
    Ok(FitResult {
        weights: TaskWeights::new(task_id, w),
        residual_rms,
    })
}

/// Gaussian elimination with partial pivoting; tiny pivots signal rank
/// deficiency.
fn solve_symmetric(a: &mut [f64], b: &mut [f64], d: usize) -> Result<Vec<f64>, TransferError> {
    let scale = a
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..d {
        let mut pivot = col;
        for row in col + 1..d {
            if a[row * d + col].abs() > a[pivot * d + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * d + col].abs() <= scale * 1e-12 {
            return Err(TransferError::RankDeficient);
        }
        if pivot != col {
            for k in 0..d {
                a.swap(col * d + k, pivot * d + k);
            }
            b.swap(col, pivot);
        }
        let p = a[col * d + col];
        for row in col + 1..d {
            let f = a[row * d + col] / p;
            if f == 0.0 {
                continue;
            }
            for k in col..d {
                a[row * d + k] -= f * a[col * d + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; d];
    for col in (0..d).rev() {
        let mut acc = b[col];
        for k in col + 1..d {
            acc -= a[col * d + k] * x[k];
        }
        x[col] = acc / a[col * d + col];
    }
    Ok(x)
}

/// Reward distance between two stored tasks over a feature table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskDistance {
    /// `max_(s,a,b) |phi(s,a,b)^T (w_i - w_j)|`, by exhaustive scan.
    pub exact: f64,
    /// Holder bound `max_(s,a,b) ||phi||_inf * ||w_i - w_j||_1`; always at
    /// least `exact`.
    pub factored_bound: f64,
}

pub fn task_distance(
    lib: &TaskLibrary,
    i: usize,
    j: usize,
    features: &FeatureTable,
) -> Result<TaskDistance, TransferError> {
    let ti = lib.tasks.get(i).ok_or(TransferError::TaskIndex(i))?;
    let tj = lib.tasks.get(j).ok_or(TransferError::TaskIndex(j))?;
    if features.dim != lib.feature_dim {
        return Err(TransferError::DimensionMismatch {
            library: lib.feature_dim,
            got: features.dim,
        });
    }
    let dw: Vec<f64> = ti
        .weights
        .weights
        .iter()
        .zip(&tj.weights.weights)
        .map(|(a, b)| a - b)
        .collect();
    let cells = features.num_states * features.num_ego_actions * features.num_other_actions;
    let mut exact = 0.0f64;
    let mut max_phi_inf = 0.0f64;
    for c in 0..cells {
        let o = c * features.dim;
        let mut dot = 0.0;
        for k in 0..features.dim {
            let p = features.values[o + k];
            dot += p * dw[k];
            max_phi_inf = max_phi_inf.max(p.abs());
        }
        exact = exact.max(dot.abs());
    }
    let l1: f64 = dw.iter().map(|v| v.abs()).sum();
    Ok(TaskDistance {
        exact,
        factored_bound: max_phi_inf * l1,
    })
}

// ---------------------------------------------------------------------------
// Persistence: a directory with a manifest plus one table file per task.

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    feature_dim: usize,
    discount: f64,
    tasks: Vec<ManifestTask>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestTask {
    task_id: String,
    weights: Vec<f64>,
    episodes_trained: u64,
    final_epsilon: f64,
    table_file: String,
}

/// Writes `library.json` plus one JSON table file per task into `dir`.
pub fn save_library(lib: &TaskLibrary, dir: &Path) -> Result<(), TransferError> {
    fs::create_dir_all(dir)?;
    let mut tasks = Vec::new();
    for (i, t) in lib.tasks.iter().enumerate() {
        let table_file = format!("task_{i}.json");
        fs::write(
            dir.join(&table_file),
            serde_json::to_string(&t.table)?,
        )?;
        tasks.push(ManifestTask {
            task_id: t.weights.task_id.clone(),
            weights: t.weights.weights.clone(),
            episodes_trained: t.meta.episodes_trained,
            final_epsilon: t.meta.final_epsilon,
            table_file,
        });
    }
    let manifest = Manifest {
        schema_version: LIBRARY_SCHEMA_VERSION,
        feature_dim: lib.feature_dim,
        discount: lib.discount,
        tasks,
    };
    fs::write(
        dir.join("library.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

/// Loads a library directory written by [`save_library`].
pub fn load_library(dir: &Path) -> Result<TaskLibrary, TransferError> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("library.json"))?)?;
    if manifest.schema_version != LIBRARY_SCHEMA_VERSION {
        return Err(TransferError::SchemaVersion(manifest.schema_version));
    }
    let mut lib = TaskLibrary::new(manifest.feature_dim, manifest.discount);
    for mt in manifest.tasks {
        let table: SFTable = serde_json::from_str(&fs::read_to_string(dir.join(&mt.table_file))?)?;
        if lib.find(&mt.task_id).is_some() {
            return Err(TransferError::Format(format!(
                "duplicate task id {} in manifest",
                mt.task_id
            )));
        }
        if table.task_id != mt.task_id {
            return Err(TransferError::Format(format!(
                "table file {} belongs to task {}, manifest says {}",
                mt.table_file, table.task_id, mt.task_id
            )));
        }
        lib.upsert(LibraryTask {
            weights: TaskWeights::new(mt.task_id, mt.weights),
            table,
            meta: TaskMeta {
                episodes_trained: mt.episodes_trained,
                final_epsilon: mt.final_epsilon,
            },
        })?;
    }
    Ok(lib)
}
