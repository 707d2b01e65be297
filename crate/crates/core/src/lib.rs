//! Budget-aware benchmarking of semisupervised binary detectors.
//!
//! The crate answers one question for a given dataset: under a fixed
//! labelling budget, does unlabelled data improve a detector enough to be
//! worth it? It does so by running supervised baselines and semisupervised
//! pipelines (pseudo-labelling, active learning, and their combination)
//! many times on shared random partitions, then comparing the resulting
//! populations of F1 scores with a Wilcoxon rank-sum test and a
//! return-on-investment rule.
//!
//! Modules, bottom-up:
//!
//! - [`rng`]: seeded, order-independent random streams
//! - [`dataset`]: CSV ingestion, future/training split, budgeted labelling
//! - [`synth`]: Gaussian-blob datasets
//! - [`learner`]: classifier trait and the reference random forest
//! - [`methods`]: the eleven pipelines
//! - [`engine`]: campaign sweep, timing, provenance
//! - [`stats`]: metrics, ROI, rank-sum test, method comparison
//! - [`report`]: results/statistics CSVs, transparency JSON, plot data
//! - [`config`]: campaign config files
//! - [`cli`]: the `run`, `plotdata` and `gen` commands

pub mod cli;
pub mod config;
pub mod dataset;
pub mod engine;
pub mod learner;
pub mod methods;
pub mod report;
pub mod rng;
pub mod stats;
pub mod synth;

pub use dataset::{
    class_ratio, compose_labelled, load_csv, split_future, write_csv, BudgetLedger, ClassRatio,
    CostScenario, Label, LabeledDataset, PartitionSpec, UnlabeledPool,
};
pub use engine::{run_campaign, CampaignConfig, CampaignResults, RunRecord};
pub use learner::{Classifier, Learner, LearnerConfig, Prediction, RandomForest};
pub use methods::{Band, MethodKind, MethodSpec};
pub use stats::{compare_methods, metrics, wilcoxon_ranksum, StatTestResult, Tails};
pub use synth::{generate, SynthSpec};
