//! Gaussian-blob datasets for desk-scale benchmarking.
//!
//! Benign samples are drawn around the origin and malicious samples around
//! `(separation, 0, ..., 0)`, both with identity covariance. The Bayes error
//! of the optimal classifier is `Phi(-separation / 2)`.

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetError, Label, LabeledDataset, Sample};
use crate::rng::Stream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_benign: usize,
    pub n_malicious: usize,
    pub dim: usize,
    pub separation: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.n_benign == 0 || self.n_malicious == 0 {
            return Err(DatasetError::InvalidSpec(
                "both class sizes must be >= 1".into(),
            ));
        }
        if self.dim == 0 {
            return Err(DatasetError::InvalidSpec("dim must be >= 1".into()));
        }
        if !(self.separation.is_finite() && self.separation >= 0.0) {
            return Err(DatasetError::InvalidSpec(
                "separation must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Error rate of the Bayes-optimal classifier for equal class priors.
    pub fn bayes_error(&self) -> f64 {
        crate::stats::normal_cdf(-self.separation / 2.0)
    }
}

/// Generates the dataset. Benign rows come first, then malicious; the whole
/// feature matrix is filled row by row from one stream of normal variates.
pub fn generate(spec: &SynthSpec) -> Result<LabeledDataset, DatasetError> {
    spec.validate()?;
    let mut rng = Stream::new(spec.seed);
    let n = spec.n_benign + spec.n_malicious;
    let samples = (0..n)
        .map(|id| {
            let label = if id < spec.n_benign {
                Label::Benign
            } else {
                Label::Malicious
            };
            let mut features: Vec<f64> = (0..spec.dim).map(|_| rng.standard_normal()).collect();
            if label.is_malicious() {
                features[0] += spec.separation;
            }
            Sample {
                id,
                features,
                label,
            }
        })
        .collect();
    let name = format!(
        "synth-b{}-m{}-d{}-s{}-seed{}",
        spec.n_benign, spec.n_malicious, spec.dim, spec.separation, spec.seed
    );
    LabeledDataset::new(name, spec.dim, samples)
}
