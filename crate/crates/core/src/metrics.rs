//! Multi-label evaluation: exact-match ratio, Jaccard similarity,
//! precision-weighted Jaccard similarity, the per-task score matrix, and
//! label-association confusion matrices.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::hierarchy::ClassId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("empty evaluation batch")]
    EmptyBatch,
}

/// Ground truth and prediction label sets for one evaluated sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRecord {
    pub sample_id: u64,
    pub truth: BTreeSet<ClassId>,
    pub predicted: BTreeSet<ClassId>,
}

impl PredictionRecord {
    pub fn new(
        sample_id: u64,
        truth: impl IntoIterator<Item = ClassId>,
        predicted: impl IntoIterator<Item = ClassId>,
    ) -> Self {
        Self {
            sample_id,
            truth: truth.into_iter().collect(),
            predicted: predicted.into_iter().collect(),
        }
    }

    fn intersection_len(&self) -> usize {
        self.truth.intersection(&self.predicted).count()
    }

    /// Per-sample Jaccard similarity; an empty prediction scores 0.
    pub fn jaccard(&self) -> f64 {
        let inter = self.intersection_len();
        let union = self.truth.len() + self.predicted.len() - inter;
        if union == 0 {
            return 0.0;
        }
        inter as f64 / union as f64
    }

    /// Per-sample precision-weighted Jaccard; an empty prediction scores 0.
    pub fn pw_jaccard(&self) -> f64 {
        if self.predicted.is_empty() {
            return 0.0;
        }
        self.jaccard() * self.intersection_len() as f64 / self.predicted.len() as f64
    }

    pub fn exact(&self) -> bool {
        self.truth == self.predicted
    }
}

fn mean(records: &[PredictionRecord], f: impl Fn(&PredictionRecord) -> f64) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyBatch);
    }
    Ok(records.iter().map(f).sum::<f64>() / records.len() as f64)
}

/// Mean precision-weighted Jaccard similarity over a batch.
pub fn pw_js(records: &[PredictionRecord]) -> Result<f64, MetricsError> {
    mean(records, PredictionRecord::pw_jaccard)
}

/// Mean Jaccard similarity (intersection over union) over a batch.
pub fn jaccard(records: &[PredictionRecord]) -> Result<f64, MetricsError> {
    mean(records, PredictionRecord::jaccard)
}

/// Fraction of samples whose prediction set matches the truth exactly.
pub fn exact_match(records: &[PredictionRecord]) -> Result<f64, MetricsError> {
    mean(records, |r| if r.exact() { 1.0 } else { 0.0 })
}

/// Lower-triangular matrix of pw-JS scores: entry `(j, k)` is the score on
/// task `k`'s evaluation samples after training through task `j`. Entries
/// with `j < k` are undefined and serialize as empty cells.
#[derive(Debug, Clone, Default)]
pub struct EvalMatrix {
    entries: Vec<Vec<Option<f64>>>,
}

impl EvalMatrix {
    pub fn new(task_count: usize) -> Self {
        Self {
            entries: vec![vec![None; task_count]; task_count],
        }
    }

    pub fn update(&mut self, after_task: usize, task: usize, records: &[PredictionRecord]) -> Result<(), MetricsError> {
        assert!(after_task >= task, "R matrix is lower triangular");
        self.entries[after_task][task] = Some(pw_js(records)?);
        Ok(())
    }

    pub fn get(&self, after_task: usize, task: usize) -> Option<f64> {
        self.entries[after_task][task]
    }

    pub fn row(&self, after_task: usize) -> &[Option<f64>] {
        &self.entries[after_task]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("after_task");
        for k in 0..self.entries.len() {
            _ = write!(out, ",task_{k}");
        }
        out.push('\n');
        for (j, row) in self.entries.iter().enumerate() {
            _ = write!(out, "{j}");
            for cell in row {
                match cell {
                    Some(v) => _ = write!(out, ",{v}"),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Association counts `M[y][p]` = number of samples whose truth contains
/// `y` and whose prediction contains `p`. Rows normalize by the number of
/// samples whose truth contains `y`.
#[derive(Debug, Clone)]
pub struct ConfusionMatrix {
    pub labels: Vec<ClassId>,
    counts: Vec<Vec<usize>>,
    denom: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn count(&self, truth_idx: usize, pred_idx: usize) -> usize {
        self.counts[truth_idx][pred_idx]
    }

    /// Row-normalized entry; 0 when the truth label never occurs.
    pub fn normalized(&self, truth_idx: usize, pred_idx: usize) -> f64 {
        if self.denom[truth_idx] == 0 {
            return 0.0;
        }
        self.counts[truth_idx][pred_idx] as f64 / self.denom[truth_idx] as f64
    }

    pub fn to_csv(&self, name_of: impl Fn(ClassId) -> String) -> String {
        let mut out = String::from("true_label");
        for &p in &self.labels {
            _ = write!(out, ",{}", name_of(p));
        }
        out.push('\n');
        for (yi, &y) in self.labels.iter().enumerate() {
            _ = write!(out, "{}", name_of(y));
            for pi in 0..self.labels.len() {
                _ = write!(out, ",{}", self.normalized(yi, pi));
            }
            out.push('\n');
        }
        out
    }
}

/// Build the confusion matrix over `label_order` (typically classes in
/// order of introduction).
pub fn confusion(records: &[PredictionRecord], label_order: &[ClassId]) -> ConfusionMatrix {
    let index: std::collections::HashMap<ClassId, usize> = label_order
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i))
        .collect();
    let n = label_order.len();
    let mut counts = vec![vec![0usize; n]; n];
    let mut denom = vec![0usize; n];
    for r in records {
        for y in &r.truth {
            let Some(&yi) = index.get(y) else { continue };
            denom[yi] += 1;
            for p in &r.predicted {
                if let Some(&pi) = index.get(p) {
                    counts[yi][pi] += 1;
                }
            }
        }
    }
    ConfusionMatrix {
        labels: label_order.to_vec(),
        counts,
        denom,
    }
}
