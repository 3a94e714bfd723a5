//! Score computation: expand a test image through the transform set, ask
//! the model for one probability vector per transformed variant, and sum
//! the diagonal of the resulting n x n matrix.
//!
//! Row i of the matrix is the class distribution for the image under
//! transform i, so entry (i, i) is "the model recognized transform i when
//! transform i was applied". A model that learned the majority class's
//! appearance recovers the transform reliably for majority samples, so
//! higher diagonal sums mean more majority-like. Test-time transforms go
//! through the same code path as training; any clip/fill asymmetry would
//! corrupt the matrix.

use crate::classifier::ProbabilityModel;
use crate::dataio::SampleBatch;
use crate::error::{Error, Result};
use crate::transforms::{expand, TransformSet};
use ndarray::Array2;

/// Row-stochastic n x n matrix of transform-class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    values: Array2<f64>,
}

impl ProbabilityMatrix {
    /// Validates shape and row-stochasticity (entries >= 0, rows summing
    /// to 1 within 1e-6).
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows != cols || rows == 0 {
            return Err(Error::InvalidProbabilityMatrix(format!(
                "expected a square non-empty matrix, got {rows}x{cols}"
            )));
        }
        for (i, row) in values.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidProbabilityMatrix(format!(
                    "row {i} contains a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidProbabilityMatrix(format!(
                    "row {i} sums to {sum}, not 1"
                )));
            }
        }
        Ok(ProbabilityMatrix { values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.values[[i, i]]).collect()
    }
}

/// The diagonal sum of Eq-style matrix scoring: s in [0, n], higher means
/// more majority-like.
pub fn score(p: &ProbabilityMatrix) -> f64 {
    p.diagonal().iter().sum()
}

/// One scored test sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub sample_id: String,
    pub score: f64,
    /// Diagonal entries, one per transform (indexed by position, so entry
    /// i belongs to class label i + 1).
    pub diagonal: Vec<f64>,
    pub transform_set: String,
    pub model_id: String,
}

/// A batch scoring pass: per-sample failures are collected by id and the
/// rest of the batch continues.
#[derive(Debug)]
pub struct BatchScoreOutcome {
    /// Reports for the samples that scored, in input order.
    pub reports: Vec<ScoreReport>,
    /// (sample id, error) for the samples that did not.
    pub failures: Vec<(String, Error)>,
}

/// Expands `image` through `set` and stacks the model's probability rows
/// into the n x n matrix.
pub fn probability_matrix(
    model: &dyn ProbabilityModel,
    image: &crate::image::Image,
    set: &TransformSet,
) -> Result<ProbabilityMatrix> {
    let n = set.len();
    if model.n_classes() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("a {n}-class model for transform set `{}`", set.name()),
            actual: format!("{}-class model", model.n_classes()),
        });
    }
    let expanded = expand(image, set)?;
    let images: Vec<_> = expanded.into_iter().map(|(im, _)| im).collect();
    let probs = model.predict_proba(&images)?;
    let mut values = Array2::<f64>::zeros((n, n));
    for (i, row) in probs.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidProbabilityMatrix(format!(
                "model emitted {} probabilities for a {n}-transform set",
                row.len()
            )));
        }
        for (j, v) in row.iter().enumerate() {
            values[[i, j]] = *v;
        }
    }
    ProbabilityMatrix::new(values)
}

/// Scores every image in the batch. Sample-level errors (failed
/// transforms and the like) go to `failures`; batch-level contract
/// violations (model/set size mismatch) fail the whole call.
pub fn score_batch(
    model: &dyn ProbabilityModel,
    images: &SampleBatch,
    set: &TransformSet,
    model_id: &str,
) -> Result<BatchScoreOutcome> {
    if model.n_classes() != set.len() {
        return Err(Error::DimensionMismatch {
            expected: format!(
                "a {}-class model for transform set `{}`",
                set.len(),
                set.name()
            ),
            actual: format!("{}-class model", model.n_classes()),
        });
    }
    let mut reports = Vec::with_capacity(images.len());
    let mut failures = Vec::new();
    for (image, id) in images.images().iter().zip(images.ids()) {
        match probability_matrix(model, image, set) {
            Ok(p) => reports.push(ScoreReport {
                sample_id: id.clone(),
                score: score(&p),
                diagonal: p.diagonal(),
                transform_set: set.name().to_string(),
                model_id: model_id.to_string(),
            }),
            Err(e) => failures.push((id.clone(), e)),
        }
    }
    Ok(BatchScoreOutcome { reports, failures })
}
