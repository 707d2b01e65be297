//! The `run`, `plotdata` and `gen` commands, as library functions.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{load_config, ConfigError};
use crate::dataset::{write_csv, DatasetError};
use crate::engine::{run_campaign, CampaignConfig, CampaignResults, EngineError};
use crate::methods::{MethodKind, MethodSpec};
use crate::report::{
    mean_f1_by_method, plot_data, read_results_csv, summary_table, write_plot_csv,
    write_results_csv, write_stats_csv, ReportError, StatsRow, TransparencyReport,
};
use crate::stats::{compare_methods, CompareOptions, StatsError, Tails};
use crate::synth::{generate, SynthSpec};

pub const RESULTS_FILE: &str = "results.csv";
pub const STATS_FILE: &str = "stats.csv";
pub const TRANSPARENCY_FILE: &str = "transparency.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("stats: {0}")]
    Stats(#[from] StatsError),
    #[error("out-dir {path}: {source}")]
    OutDir {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// `error: <kind>: <message>` on a single line.
    pub fn one_line(&self) -> String {
        let kind = match self {
            CliError::Config(_) | CliError::Engine(EngineError::Config(_)) => "config",
            CliError::Engine(EngineError::Dataset(_)) | CliError::Dataset(_) => "dataset",
            CliError::Engine(EngineError::Pool(_)) => "workers",
            CliError::Report(_) | CliError::OutDir { .. } => "output",
            CliError::Stats(_) => "stats",
        };
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error: {kind}: {msg}")
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub results: PathBuf,
    pub stats: PathBuf,
    pub transparency: PathBuf,
    pub summary: String,
    pub warnings: Vec<String>,
}

/// Name of the best method by mean F1 among those matching `pick`; ties go
/// to the earlier method.
fn best_method(
    cfg: &CampaignConfig,
    res: &CampaignResults,
    pick: impl Fn(MethodKind) -> bool,
) -> Option<MethodSpec> {
    let means = mean_f1_by_method(&res.records);
    let mut best: Option<(&MethodSpec, f64)> = None;
    for m in cfg.methods.iter().filter(|m| pick(m.kind)) {
        let name = m.name();
        if let Some((_, mean, _)) = means.iter().find(|(n, _, _)| *n == name) {
            if best.is_none_or(|(_, b)| *mean > b) {
                best = Some((m, *mean));
            }
        }
    }
    best.map(|(m, _)| m.clone())
}

/// Labelled-only baseline against the best pure pseudo-labelling method and
/// the best active-learning method, two- and one-tailed.
pub fn baseline_comparisons(
    cfg: &CampaignConfig,
    res: &CampaignResults,
) -> Result<Vec<StatsRow>, StatsError> {
    let Some(lower) = cfg.methods.iter().find(|m| m.kind == MethodKind::SlLower) else {
        return Ok(Vec::new());
    };
    let mut rows = Vec::new();
    let challengers = [
        best_method(cfg, res, MethodKind::is_pure_pseudo),
        best_method(cfg, res, MethodKind::is_active),
    ];
    for challenger in challengers.into_iter().flatten() {
        for tails in [Tails::Two, Tails::One] {
            let opts = CompareOptions {
                tails,
                alpha: cfg.alpha,
                min_gap: cfg.min_gap,
                cost_model: cfg.cost_model,
            };
            let c = compare_methods(&res.records, lower, &challenger, &opts)?;
            rows.push(StatsRow::new(&res.dataset_name, &c));
        }
    }
    Ok(rows)
}

pub fn cmd_run(config: &Path, out_dir: &Path, workers: usize) -> Result<RunOutput, CliError> {
    let cfg = load_config(config)?;
    run_config(&cfg, out_dir, workers)
}

/// Runs an in-memory config and writes the three artifacts into `out_dir`.
pub fn run_config(
    cfg: &CampaignConfig,
    out_dir: &Path,
    workers: usize,
) -> Result<RunOutput, CliError> {
    let res = run_campaign(cfg, workers)?;
    std::fs::create_dir_all(out_dir).map_err(|source| CliError::OutDir {
        path: out_dir.display().to_string(),
        source,
    })?;
    let results = out_dir.join(RESULTS_FILE);
    let stats = out_dir.join(STATS_FILE);
    let transparency = out_dir.join(TRANSPARENCY_FILE);
    write_results_csv(&res.records, &results)?;
    let rows = baseline_comparisons(cfg, &res)?;
    write_stats_csv(&rows, &stats)?;
    TransparencyReport::new(cfg, &res).write(&transparency)?;
    Ok(RunOutput {
        results,
        stats,
        transparency,
        summary: summary_table(&rows),
        warnings: res.warnings,
    })
}

/// Writes the plot-data CSV and returns the number of rows.
pub fn cmd_plotdata(results: &Path, out: &Path) -> Result<usize, CliError> {
    let records = read_results_csv(results)?;
    let rows = plot_data(&records);
    write_plot_csv(&rows, out)?;
    Ok(rows.len())
}

/// Generates a synthetic dataset and writes it with a `label` column.
pub fn cmd_gen(spec: &SynthSpec, out: &Path) -> Result<usize, CliError> {
    let d = generate(spec)?;
    write_csv(&d, out, "label")?;
    Ok(d.len())
}
