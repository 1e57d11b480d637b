//! Grid-search harness: hash-stable dev splits, exhaustive trial enumeration
//! in lexicographic axis order, CSV sweep logs and heatmap export.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TuneError {
    #[error("fraction {0} must lie in (0, 1)")]
    BadFraction(f64),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("grid axis {0} is empty")]
    EmptyAxis(String),
    #[error("grid has no axes")]
    EmptyGrid,
    #[error("all {0} trials failed")]
    AllTrialsFailed(usize),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// One grid axis value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisValue {
    Int(i64),
    Float(f64),
}

impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisValue::Int(v) => write!(f, "{v}"),
            AxisValue::Float(v) => write!(f, "{v}"),
        }
    }
}

impl AxisValue {
    pub fn as_f64(&self) -> f64 {
        match self {
            AxisValue::Int(v) => *v as f64,
            AxisValue::Float(v) => *v,
        }
    }
}

/// Named axes with value lists; total trials is the product of lengths.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub axes: Vec<(String, Vec<AxisValue>)>,
}

impl GridSpec {
    pub fn new(axes: Vec<(String, Vec<AxisValue>)>) -> Result<Self, TuneError> {
        if axes.is_empty() {
            return Err(TuneError::EmptyGrid);
        }
        for (name, values) in &axes {
            if values.is_empty() {
                return Err(TuneError::EmptyAxis(name.clone()));
            }
        }
        Ok(Self { axes })
    }

    /// The reference tuning grid: epochs x batch size x learning rate.
    pub fn reference_grid() -> Self {
        Self::new(vec![
            (
                "epochs".into(),
                vec![AxisValue::Int(10), AxisValue::Int(20), AxisValue::Int(30)],
            ),
            (
                "batch_size".into(),
                vec![AxisValue::Int(16), AxisValue::Int(32)],
            ),
            (
                "learning_rate".into(),
                vec![
                    AxisValue::Float(1e-5),
                    AxisValue::Float(1e-4),
                    AxisValue::Float(1e-3),
                ],
            ),
        ])
        .expect("static grid is valid")
    }

    pub fn trial_count(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    /// All cells in lexicographic axis order (first axis slowest).
    pub fn cells(&self) -> Vec<Vec<(String, AxisValue)>> {
        let mut cells = vec![Vec::new()];
        for (name, values) in &self.axes {
            let mut next = Vec::with_capacity(cells.len() * values.len());
            for cell in &cells {
                for value in values {
                    let mut extended = cell.clone();
                    extended.push((name.clone(), *value));
                    next.push(extended);
                }
            }
            cells = next;
        }
        cells
    }
}

/// Objective identity; carries the optimization direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    AnalogyScoreMax,
    PerplexityMin,
}

impl ObjectiveKind {
    pub fn maximize(&self) -> bool {
        matches!(self, ObjectiveKind::AnalogyScoreMax)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectiveKind::AnalogyScoreMax => "analogy_score_max",
            ObjectiveKind::PerplexityMin => "perplexity_min",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrialStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial_index: usize,
    pub params: Vec<(String, AxisValue)>,
    pub objective: Option<f64>,
    pub objective_kind: ObjectiveKind,
    pub status: TrialStatus,
    pub wall_time_seconds: f64,
}

/// Evaluate every cell exactly once. A failing trial is recorded and the
/// search continues; when everything fails the search errors. Ties keep the
/// earlier trial.
pub fn grid_search<T, Train, Eval>(
    grid: &GridSpec,
    mut train_fn: Train,
    mut eval_fn: Eval,
    kind: ObjectiveKind,
) -> Result<(TrialResult, Vec<TrialResult>), TuneError>
where
    Train: FnMut(&[(String, AxisValue)]) -> Result<T, String>,
    Eval: FnMut(&T) -> Result<f64, String>,
{
    let mut results = Vec::with_capacity(grid.trial_count());
    let mut best: Option<TrialResult> = None;
    for (trial_index, cell) in grid.cells().into_iter().enumerate() {
        let start = Instant::now();
        let outcome = train_fn(&cell).and_then(|t| eval_fn(&t));
        let wall = start.elapsed().as_secs_f64();
        let result = match outcome {
            Ok(objective) if objective.is_finite() => TrialResult {
                trial_index,
                params: cell,
                objective: Some(objective),
                objective_kind: kind,
                status: TrialStatus::Ok,
                wall_time_seconds: wall,
            },
            Ok(objective) => TrialResult {
                trial_index,
                params: cell,
                objective: None,
                objective_kind: kind,
                status: TrialStatus::Failed(format!("non-finite objective {objective}")),
                wall_time_seconds: wall,
            },
            Err(message) => TrialResult {
                trial_index,
                params: cell,
                objective: None,
                objective_kind: kind,
                status: TrialStatus::Failed(message),
                wall_time_seconds: wall,
            },
        };
        if let Some(objective) = result.objective {
            let better = match &best {
                None => true,
                Some(b) => {
                    let current = b.objective.expect("best trial has objective");
                    if kind.maximize() {
                        objective > current
                    } else {
                        objective < current
                    }
                }
            };
            if better {
                best = Some(result.clone());
            }
        }
        results.push(result);
    }
    match best {
        Some(b) => Ok((b, results)),
        None => Err(TuneError::AllTrialsFailed(results.len())),
    }
}

/// Split items into (dev, rest) by a deterministic per-id hash, so the split
/// is stable under reordering of the input.
pub fn make_dev_split<T, F: Fn(&T) -> &str>(
    items: Vec<T>,
    id_fn: F,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>), TuneError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(TuneError::BadFraction(fraction));
    }
    if items.is_empty() {
        return Err(TuneError::EmptyCorpus);
    }
    let mut dev = Vec::new();
    let mut rest = Vec::new();
    for item in items {
        if id_unit_interval(id_fn(&item), seed) < fraction {
            dev.push(item);
        } else {
            rest.push(item);
        }
    }
    Ok((dev, rest))
}

/// Map (seed, id) to [0, 1): FNV-1a over the id bytes mixed with the seed,
/// finalized for avalanche so near-identical ids decorrelate.
fn id_unit_interval(id: &str, seed: u64) -> f64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in id.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^= h >> 31;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Sweep log CSV: trial_index, one column per axis, objective, status,
/// wall_time_seconds.
pub fn write_sweep_log(
    grid: &GridSpec,
    results: &[TrialResult],
    path: &Path,
) -> Result<(), TuneError> {
    let io_err = |source| TuneError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    let mut header = String::from("trial_index");
    for (name, _) in &grid.axes {
        header.push(',');
        header.push_str(name);
    }
    header.push_str(",objective,status,wall_time_seconds\n");
    w.write_all(header.as_bytes()).map_err(io_err)?;
    for r in results {
        let mut line = r.trial_index.to_string();
        for (_, value) in &r.params {
            line.push(',');
            line.push_str(&value.to_string());
        }
        match r.objective {
            Some(o) => line.push_str(&format!(",{o:.6}")),
            None => line.push(','),
        }
        match &r.status {
            TrialStatus::Ok => line.push_str(",ok"),
            TrialStatus::Failed(m) => {
                line.push_str(",failed:");
                line.push_str(&m.replace([',', '\n'], ";"));
            }
        }
        line.push_str(&format!(",{:.3}\n", r.wall_time_seconds));
        w.write_all(line.as_bytes()).map_err(io_err)?;
    }
    Ok(())
}

/// Heatmap-ready CSV over the axes (same rows as the sweep log, objective
/// only, successes only).
pub fn write_heatmap_csv(
    grid: &GridSpec,
    results: &[TrialResult],
    path: &Path,
) -> Result<(), TuneError> {
    let io_err = |source| TuneError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    let mut header = String::new();
    for (name, _) in &grid.axes {
        if !header.is_empty() {
            header.push(',');
        }
        header.push_str(name);
    }
    header.push_str(",objective\n");
    w.write_all(header.as_bytes()).map_err(io_err)?;
    for r in results {
        if let Some(objective) = r.objective {
            let mut line = String::new();
            for (_, value) in &r.params {
                if !line.is_empty() {
                    line.push(',');
                }
                line.push_str(&value.to_string());
            }
            line.push_str(&format!(",{objective:.6}\n"));
            w.write_all(line.as_bytes()).map_err(io_err)?;
        }
    }
    Ok(())
}
