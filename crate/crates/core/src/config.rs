//! Campaign config files (TOML).
//!
//! ```toml
//! master_seed = 42
//! n = 10
//! k = 5
//! budgets = [100, 200, 400, 800]
//! # optional; defaults to all eleven methods
//! methods = ["sl_lower", "sl_upper", "ssl_vanilla", "pseudo", "active_low"]
//! pseudo_threshold = 0.99   # optional
//! active_repeats = 5        # optional
//! test_fraction = 0.2       # optional
//! alpha = 0.05              # optional
//! min_gap = 0.05            # optional
//!
//! [dataset.csv]
//! path = "flows.csv"        # relative to the config file
//! label_column = "label"    # optional
//!
//! # or instead:
//! # [dataset.synthetic]
//! # n_benign = 500
//! # n_malicious = 500
//! # dim = 10
//! # separation = 2.0
//! # seed = 1
//!
//! # optional; defaults to balanced (1,1), unbalanced (1,2), very_unbalanced (1,5)
//! [[scenarios]]
//! name = "balanced"
//! cost_benign = 1
//! cost_malicious = 1
//! budgets = [50, 100]       # optional per-scenario override
//!
//! # optional; default floor is budget / (2 * cost_benign), rounded down
//! [[min_benign]]
//! budget = 100
//! scenario = "balanced"
//! count = 40
//!
//! [learner]                 # optional
//! n_trees = 100
//! max_depth = 12
//! min_leaf = 1
//! bootstrap = true
//!
//! [cost_model]              # optional
//! unlabelled_cost = 0
//! epsilon_rate = 0
//! ```

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::engine::{CampaignConfig, DatasetSource, MinBenign, ScenarioConfig};
use crate::learner::LearnerConfig;
use crate::methods::{MethodKind, MethodSpec, DEFAULT_ACTIVE_REPEATS, HIGH_CONFIDENCE};
use crate::stats::{CostModel, DEFAULT_ALPHA};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Syntax(String),
    #[error("config: methods: unknown method `{0}`")]
    UnknownMethod(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    dataset: DatasetSource,
    master_seed: u64,
    n: usize,
    k: usize,
    #[serde(default)]
    budgets: Vec<f64>,
    methods: Option<Vec<String>>,
    pseudo_threshold: Option<f64>,
    active_repeats: Option<usize>,
    test_fraction: Option<f64>,
    alpha: Option<f64>,
    min_gap: Option<f64>,
    scenarios: Option<Vec<ScenarioConfig>>,
    #[serde(default)]
    min_benign: Vec<MinBenign>,
    #[serde(default)]
    learner: LearnerConfig,
    #[serde(default)]
    cost_model: CostModel,
}

/// Parses config text. Relative CSV paths are kept as written.
pub fn parse_config(text: &str) -> Result<CampaignConfig, ConfigError> {
    let f: FileConfig = toml::from_str(text).map_err(|e| {
        ConfigError::Syntax(
            e.to_string()
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" "),
        )
    })?;
    let threshold = f.pseudo_threshold.unwrap_or(HIGH_CONFIDENCE);
    let repeats = f.active_repeats.unwrap_or(DEFAULT_ACTIVE_REPEATS);
    let kinds = match f.methods {
        Some(names) => names
            .iter()
            .map(|n| {
                n.parse::<MethodKind>()
                    .map_err(|_| ConfigError::UnknownMethod(n.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => MethodKind::ALL.to_vec(),
    };
    let methods = kinds
        .into_iter()
        .map(|kind| MethodSpec {
            kind,
            pseudo_threshold: threshold,
            active_repeats: repeats,
        })
        .collect();
    let mut cfg = CampaignConfig::new(f.dataset, f.budgets, f.n, f.k, f.master_seed);
    cfg.methods = methods;
    if let Some(s) = f.scenarios {
        cfg.scenarios = s;
    }
    cfg.min_benign = f.min_benign;
    cfg.learner = f.learner;
    cfg.cost_model = f.cost_model;
    cfg.test_fraction = f.test_fraction.unwrap_or(cfg.test_fraction);
    cfg.alpha = f.alpha.unwrap_or(DEFAULT_ALPHA);
    cfg.min_gap = f.min_gap.unwrap_or(cfg.min_gap);
    Ok(cfg)
}

/// Reads a config file; a relative CSV path is resolved against the
/// directory holding the config.
pub fn load_config(path: &Path) -> Result<CampaignConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut cfg = parse_config(&text)?;
    if let DatasetSource::Csv { path: p, .. } = &mut cfg.dataset {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    Ok(cfg)
}
