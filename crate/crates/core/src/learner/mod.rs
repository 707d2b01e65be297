//! Binary classifiers that report a vote-based confidence.
//!
//! Any learner can drive the pipelines in [`crate::methods`] by implementing
//! [`Learner`]; the crate ships a random forest ([`RandomForest`]).

mod forest;

pub use forest::{Forest, LearnerConfig, RandomForest, Tree};

use thiserror::Error;

use crate::dataset::{ClassRatio, Label, LabeledDataset};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid learner config: {0}")]
    InvalidConfig(String),
}

/// A training example as seen by a learner: features plus the label it is
/// told to learn, which may be a pseudo label.
#[derive(Clone, Copy, Debug)]
pub struct TrainRow<'a> {
    pub features: &'a [f64],
    pub label: Label,
}

impl<'a> TrainRow<'a> {
    pub fn new(features: &'a [f64], label: Label) -> Self {
        Self { features, label }
    }
}

pub fn rows_of(d: &LabeledDataset) -> Vec<TrainRow<'_>> {
    d.samples()
        .iter()
        .map(|s| TrainRow::new(&s.features, s.label))
        .collect()
}

/// One classifier output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Fraction of voters choosing malicious.
    pub p_malicious: f64,
    /// Vote margin `2 * |p_malicious - 0.5|`.
    pub confidence: f64,
}

impl Prediction {
    /// Builds a prediction from a vote count. The margin is computed from
    /// integers as `|2m - n| / n`, so e.g. 199 of 200 votes gives exactly
    /// the double nearest 0.99. A tied vote is benign with confidence 0.
    pub fn from_votes(malicious: u32, voters: u32) -> Self {
        assert!(voters > 0 && malicious <= voters);
        let (m, n) = (malicious as i64, voters as i64);
        let label = if 2 * m > n {
            Label::Malicious
        } else {
            Label::Benign
        };
        Self {
            label,
            p_malicious: m as f64 / n as f64,
            confidence: (2 * m - n).unsigned_abs() as f64 / n as f64,
        }
    }
}

pub trait Classifier: Send + Sync {
    fn dim(&self) -> usize;

    /// Predicts one sample. The caller guarantees `x.len() == self.dim()`.
    fn predict_one(&self, x: &[f64]) -> Prediction;

    fn predict(&self, samples: &[&[f64]]) -> Result<Vec<Prediction>, LearnerError> {
        for x in samples {
            if x.len() != self.dim() {
                return Err(LearnerError::DimensionMismatch {
                    expected: self.dim(),
                    found: x.len(),
                });
            }
        }
        Ok(samples.iter().map(|x| self.predict_one(x)).collect())
    }
}

/// A training procedure. Implementations must be deterministic for a given
/// seed; [`Learner::reseeded`] produces the same procedure with a new seed.
pub trait Learner: Send + Sync {
    type Model: Classifier;

    fn fit(&self, rows: &[TrainRow<'_>]) -> Result<Self::Model, LearnerError>;

    fn reseeded(&self, seed: u64) -> Self
    where
        Self: Sized;

    fn seed(&self) -> u64;
}

/// Shared checks for learner inputs; returns the dimensionality.
pub(crate) fn check_rows(rows: &[TrainRow<'_>]) -> Result<usize, LearnerError> {
    let first = rows.first().ok_or(LearnerError::EmptyTrainingSet)?;
    let dim = first.features.len();
    if let Some(bad) = rows.iter().find(|r| r.features.len() != dim) {
        return Err(LearnerError::DimensionMismatch {
            expected: dim,
            found: bad.features.len(),
        });
    }
    Ok(dim)
}

pub(crate) fn ratio_of(rows: &[TrainRow<'_>]) -> ClassRatio {
    crate::dataset::ClassCounts::tally(rows.iter().map(|r| r.label))
        .ratio()
        .expect("nonempty rows")
}
