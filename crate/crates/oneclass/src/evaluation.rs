//! Ranking metrics over labeled score sets: AUC, area under the
//! precision-recall curve for either class as positive, and mean/std
//! aggregation across repeated runs.
//!
//! Conventions, since different toolkits disagree:
//! - AUC uses the mid-rank Mann-Whitney statistic (ties get half credit),
//!   which equals the trapezoidal area under the ROC curve.
//! - AUPR is step-wise average precision over distinct descending
//!   thresholds, AP = sum over k of (R_k - R_{k-1}) * P_k, with no
//!   interpolation between points.
//! - With the minority class as positive, ranking is by negated score
//!   (low scores mean minority-like).
//! - Aggregation reports population standard deviation (divide by the
//!   run count, not run count minus one).
//!
//! Metrics are stored in [0, 1]; [`EvalReport::render`] prints percent.

use crate::error::{Error, Result};
use std::fmt::Write as _;

/// Scores with binary class labels; the unit both metrics consume.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScores {
    scores: Vec<f64>,
    is_majority: Vec<bool>,
}

impl LabeledScores {
    /// Pairs each score with its class flag. Requires equal lengths,
    /// finite scores, and at least one sample of each class.
    pub fn new(scores: Vec<f64>, is_majority: Vec<bool>) -> Result<Self> {
        if scores.len() != is_majority.len() {
            return Err(Error::InvalidLabeledScores(format!(
                "{} scores but {} labels",
                scores.len(),
                is_majority.len()
            )));
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidLabeledScores(format!(
                "scores must be finite, got {bad}"
            )));
        }
        let majority = is_majority.iter().filter(|m| **m).count();
        if majority == 0 || majority == is_majority.len() {
            return Err(Error::SingleClassScores);
        }
        Ok(LabeledScores {
            scores,
            is_majority,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn majority_count(&self) -> usize {
        self.is_majority.iter().filter(|m| **m).count()
    }

    pub fn minority_count(&self) -> usize {
        self.len() - self.majority_count()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.is_majority
    }
}

/// Which class counts as positive in a precision-recall sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositiveClass {
    Majority,
    Minority,
}

/// Mann-Whitney AUC with majority as positive: the probability that a
/// random majority sample outscores a random minority sample, ties worth
/// half. Equals the trapezoidal area under the ROC curve.
pub fn auc(ls: &LabeledScores) -> f64 {
    let n = ls.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ls.scores[a].partial_cmp(&ls.scores[b]).unwrap());

    // mid-ranks: tied scores all get the mean of the ranks they span
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && ls.scores[order[j + 1]] == ls.scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = mid;
        }
        i = j + 1;
    }

    let n_pos = ls.majority_count() as f64;
    let n_neg = ls.minority_count() as f64;
    let rank_sum: f64 = (0..n)
        .filter(|&i| ls.is_majority[i])
        .map(|i| ranks[i])
        .sum();
    (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg)
}

/// Ranking keys for a sweep: the positive class's "more positive" end
/// must come first when sorted descending.
fn sweep_keys(ls: &LabeledScores, positive: PositiveClass) -> (Vec<f64>, Vec<bool>) {
    match positive {
        PositiveClass::Majority => (ls.scores.clone(), ls.is_majority.clone()),
        PositiveClass::Minority => (
            ls.scores.iter().map(|s| -s).collect(),
            ls.is_majority.iter().map(|m| !m).collect(),
        ),
    }
}

/// Walks distinct thresholds in descending key order, yielding cumulative
/// (true positives, false positives) after each threshold group.
fn threshold_sweep(keys: &[f64], is_positive: &[bool]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[b].partial_cmp(&keys[a]).unwrap());

    let mut out = Vec::new();
    let mut tp = 0;
    let mut fp = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        // one step per distinct threshold: ties enter together
        while j + 1 < order.len() && keys[order[j + 1]] == keys[order[i]] {
            j += 1;
        }
        for &idx in &order[i..=j] {
            if is_positive[idx] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        out.push((tp, fp));
        i = j + 1;
    }
    out
}

/// Step-wise average precision with the chosen positive class.
pub fn aupr(ls: &LabeledScores, positive: PositiveClass) -> f64 {
    let (keys, is_positive) = sweep_keys(ls, positive);
    let n_pos = is_positive.iter().filter(|p| **p).count() as f64;

    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (tp, fp) in threshold_sweep(&keys, &is_positive) {
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / n_pos;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    ap
}

/// ROC points (false positive rate, true positive rate) from (0,0) to
/// (1,1), majority as positive, one point per distinct threshold.
pub fn roc_curve(ls: &LabeledScores) -> Vec<(f64, f64)> {
    let n_pos = ls.majority_count() as f64;
    let n_neg = ls.minority_count() as f64;
    let mut pts = vec![(0.0, 0.0)];
    for (tp, fp) in threshold_sweep(&ls.scores, &ls.is_majority) {
        pts.push((fp as f64 / n_neg, tp as f64 / n_pos));
    }
    pts
}

/// PR points (recall, precision) in descending-threshold order, one per
/// distinct threshold.
pub fn pr_curve(ls: &LabeledScores, positive: PositiveClass) -> Vec<(f64, f64)> {
    let (keys, is_positive) = sweep_keys(ls, positive);
    let n_pos = is_positive.iter().filter(|p| **p).count() as f64;
    threshold_sweep(&keys, &is_positive)
        .into_iter()
        .map(|(tp, fp)| (tp as f64 / n_pos, tp as f64 / (tp + fp) as f64))
        .collect()
}

/// The three metrics for one train/score run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    pub auc: f64,
    pub aupr_majority: f64,
    pub aupr_minority: f64,
}

/// All three metrics from one labeled score set.
pub fn run_metrics(ls: &LabeledScores) -> RunMetrics {
    RunMetrics {
        auc: auc(ls),
        aupr_majority: aupr(ls, PositiveClass::Majority),
        aupr_minority: aupr(ls, PositiveClass::Minority),
    }
}

/// Per-run values of one metric plus their mean and population std.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub per_run: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl MetricSummary {
    fn from_values(per_run: Vec<f64>) -> Self {
        // identical runs summarize exactly, without mean-rounding residue
        if per_run.iter().all(|v| *v == per_run[0]) {
            return MetricSummary {
                mean: per_run[0],
                std: 0.0,
                per_run,
            };
        }
        let n = per_run.len() as f64;
        let mean = per_run.iter().sum::<f64>() / n;
        let var = per_run.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MetricSummary {
            per_run,
            mean,
            std: var.sqrt(),
        }
    }
}

/// Aggregate of repeated runs: per-metric mean ± population std with the
/// per-run values retained.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub runs: usize,
    pub auc: MetricSummary,
    pub aupr_majority: MetricSummary,
    pub aupr_minority: MetricSummary,
}

/// Folds per-run metrics into an [`EvalReport`]. Needs at least one run.
pub fn aggregate_runs(runs: &[RunMetrics]) -> Result<EvalReport> {
    if runs.is_empty() {
        return Err(Error::InvalidLabeledScores(
            "aggregation needs at least one run".into(),
        ));
    }
    Ok(EvalReport {
        runs: runs.len(),
        auc: MetricSummary::from_values(runs.iter().map(|r| r.auc).collect()),
        aupr_majority: MetricSummary::from_values(runs.iter().map(|r| r.aupr_majority).collect()),
        aupr_minority: MetricSummary::from_values(runs.iter().map(|r| r.aupr_minority).collect()),
    })
}

impl EvalReport {
    /// Plain-text table, values in percent, mean ± population std.
    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "runs: {} (values in percent, mean +/- population std)",
            self.runs
        )
        .unwrap();
        for (name, m) in [
            ("AUC", &self.auc),
            ("AUPR-maj", &self.aupr_majority),
            ("AUPR-min", &self.aupr_minority),
        ] {
            let per_run = m
                .per_run
                .iter()
                .map(|v| format!("{:.2}", v * 100.0))
                .collect::<Vec<_>>()
                .join(", ");
            writeln!(
                out,
                "{name:9} {:6.2} +/- {:.2}   [{per_run}]",
                m.mean * 100.0,
                m.std * 100.0
            )
            .unwrap();
        }
        out
    }
}
