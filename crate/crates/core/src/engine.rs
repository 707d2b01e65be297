//! Campaign orchestration.
//!
//! A campaign sweeps every (scenario, budget) *cell*. Inside a cell the
//! future set is redrawn `k` times and, for each draw, the labelled set is
//! redrawn `n` times; every method then runs on the same partition. Each
//! method therefore contributes `n * k` records per cell.
//!
//! All randomness is derived from the master seed and the coordinates of
//! the run, and records are sorted before being returned, so the results
//! are identical for any worker count.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    compose_labelled, split_future, ClassCounts, CostScenario, DatasetError, LabeledDataset,
    PartitionSpec,
};
use crate::learner::{Learner, LearnerConfig, RandomForest};
use crate::methods::{run_method, MethodInputs, MethodKind, MethodOutcome, MethodSpec};
use crate::rng::{derive_seed, Stream};
use crate::stats::CostModel;
use crate::synth::{generate, SynthSpec};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("worker pool: {0}")]
    Pool(String),
}

fn config_err(msg: impl Into<String>) -> EngineError {
    EngineError::Config(msg.into())
}

/// Runs `action` and returns its result with the elapsed wall time in
/// milliseconds, from a monotonic clock.
pub fn measure_epsilon<T>(action: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = action();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        #[serde(default = "default_label_column")]
        label_column: String,
    },
    Synthetic(SynthSpec),
}

fn default_label_column() -> String {
    "label".into()
}

impl DatasetSource {
    pub fn load(&self) -> Result<LabeledDataset, DatasetError> {
        let d = match self {
            DatasetSource::Csv { path, label_column } => {
                crate::dataset::load_csv(path, label_column)?
            }
            DatasetSource::Synthetic(spec) => generate(spec)?,
        };
        d.require_both_classes()?;
        Ok(d)
    }
}

/// A cost scenario, optionally with its own budget list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub cost_benign: f64,
    pub cost_malicious: f64,
    /// Overrides the campaign-wide budgets for this scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budgets: Option<Vec<f64>>,
}

impl ScenarioConfig {
    pub fn from_scenario(s: &CostScenario) -> Self {
        Self {
            name: s.name.clone(),
            cost_benign: s.cost_benign,
            cost_malicious: s.cost_malicious,
            budgets: None,
        }
    }

    pub fn scenario(&self) -> CostScenario {
        CostScenario {
            name: self.name.clone(),
            cost_benign: self.cost_benign,
            cost_malicious: self.cost_malicious,
        }
    }
}

/// Explicit benign floor for one (budget, scenario) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinBenign {
    pub budget: f64,
    pub scenario: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignConfig {
    pub dataset: DatasetSource,
    pub methods: Vec<MethodSpec>,
    /// Labelled-set redraws per future-set draw.
    pub n: usize,
    /// Future-set redraws.
    pub k: usize,
    pub budgets: Vec<f64>,
    pub scenarios: Vec<ScenarioConfig>,
    /// Overrides of the default benign floor `floor(budget / (2 * cost_benign))`.
    pub min_benign: Vec<MinBenign>,
    pub test_fraction: f64,
    pub learner: LearnerConfig,
    pub master_seed: u64,
    pub cost_model: CostModel,
    pub alpha: f64,
    pub min_gap: f64,
}

impl CampaignConfig {
    /// Config with all eleven methods, the three standard scenarios and the
    /// default learner.
    pub fn new(dataset: DatasetSource, budgets: Vec<f64>, n: usize, k: usize, seed: u64) -> Self {
        Self {
            dataset,
            methods: MethodSpec::all(),
            n,
            k,
            budgets,
            scenarios: CostScenario::standard()
                .iter()
                .map(ScenarioConfig::from_scenario)
                .collect(),
            min_benign: Vec::new(),
            test_fraction: 0.2,
            learner: LearnerConfig::default(),
            master_seed: seed,
            cost_model: CostModel::default(),
            alpha: crate::stats::DEFAULT_ALPHA,
            min_gap: 0.05,
        }
    }

    /// Benign floor for a cell: an explicit override, else half the budget
    /// spent on benign labels.
    pub fn min_benign_for(&self, budget: f64, scenario: &ScenarioConfig) -> usize {
        self.min_benign
            .iter()
            .find(|m| m.budget == budget && m.scenario == scenario.name)
            .map(|m| m.count)
            .unwrap_or_else(|| (budget / (2.0 * scenario.cost_benign)).floor() as usize)
    }

    /// Every (scenario, budget) cell, in scenario-major order.
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut cells = Vec::new();
        for (si, sc) in self.scenarios.iter().enumerate() {
            let budgets = sc.budgets.as_ref().unwrap_or(&self.budgets);
            for (bi, &budget) in budgets.iter().enumerate() {
                let min_benign = self.min_benign_for(budget, sc);
                cells.push(CellSpec {
                    scenario: sc.scenario(),
                    scenario_index: si,
                    budget,
                    budget_index: bi,
                    min_benign,
                    seed: derive_seed(self.master_seed, &[si as u64, bi as u64]),
                });
            }
        }
        cells
    }

    /// Checks the config. Returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, EngineError> {
        if self.n == 0 || self.k == 0 {
            return Err(config_err("n and k must both be >= 1"));
        }
        let required = [
            (MethodKind::SlLower, "R1: labelled-only lower baseline"),
            (MethodKind::SslVanilla, "R2: vanilla SsL ablation baseline"),
            (MethodKind::SlUpper, "R3: full-pool upper baseline"),
        ];
        for (kind, why) in required {
            if !self.methods.iter().any(|m| m.kind == kind) {
                return Err(config_err(format!(
                    "methods must include `{kind}` (requirement {why})"
                )));
            }
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].iter().any(|o| o.kind == m.kind) {
                return Err(config_err(format!("method `{}` listed twice", m.kind)));
            }
            if !(0.0..=1.0).contains(&m.pseudo_threshold) {
                return Err(config_err("pseudo_threshold must lie in [0, 1]"));
            }
            if m.kind.is_active() && m.active_repeats == 0 {
                return Err(config_err("active_repeats must be >= 1"));
            }
        }
        if self.scenarios.is_empty() {
            return Err(config_err(
                "scenarios: at least one cost scenario is required",
            ));
        }
        for (i, sc) in self.scenarios.iter().enumerate() {
            if self.scenarios[..i].iter().any(|o| o.name == sc.name) {
                return Err(config_err(format!("scenario `{}` listed twice", sc.name)));
            }
            sc.scenario()
                .validate()
                .map_err(|e| config_err(format!("scenarios: {e}")))?;
            let budgets = sc.budgets.as_ref().unwrap_or(&self.budgets);
            if budgets.is_empty() {
                return Err(config_err(format!(
                    "budgets: scenario `{}` has no labelling budgets",
                    sc.name
                )));
            }
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(config_err("test_fraction must lie in (0, 1)"));
        }
        self.learner
            .validate()
            .map_err(|e| config_err(format!("learner: {e}")))?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(config_err("alpha must lie in (0, 1)"));
        }
        for cell in self.cells() {
            let spec = cell.partition_spec(self.test_fraction);
            spec.validate().map_err(|e| {
                config_err(format!(
                    "budgets: cell ({}, {}): {e}",
                    cell.scenario.name, cell.budget
                ))
            })?;
        }
        Ok(Vec::new())
    }

    /// Warnings that need the dataset: labelled sets that would not be
    /// smaller than the future set.
    pub fn dataset_warnings(&self, d: &LabeledDataset) -> Vec<String> {
        let c = d.counts();
        let future = (self.test_fraction * c.benign as f64).floor()
            + (self.test_fraction * c.malicious as f64).floor();
        let mut out = Vec::new();
        for cell in self.cells() {
            let after_benign = cell.budget - cell.min_benign as f64 * cell.scenario.cost_benign;
            let labelled = cell.min_benign as f64
                + (after_benign / cell.scenario.cost_malicious)
                    .floor()
                    .max(0.0);
            if labelled >= future {
                out.push(format!(
                    "cell ({}, {}): labelled set ({labelled}) is not smaller than the future set ({future})",
                    cell.scenario.name, cell.budget
                ));
            }
        }
        out
    }
}

/// One (scenario, budget) pair of a campaign.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSpec {
    pub scenario: CostScenario,
    pub scenario_index: usize,
    pub budget: f64,
    pub budget_index: usize,
    pub min_benign: usize,
    pub seed: u64,
}

impl CellSpec {
    pub fn partition_spec(&self, test_fraction: f64) -> PartitionSpec {
        PartitionSpec {
            test_fraction,
            budget: self.budget,
            min_benign: self.min_benign,
            cost_scenario: self.scenario.clone(),
            seed: self.seed,
        }
    }

    fn split_seed(&self, k: usize) -> u64 {
        derive_seed(self.seed, &[0, k as u64])
    }

    fn compose_seed(&self, k: usize, n: usize) -> u64 {
        derive_seed(self.seed, &[1, k as u64, n as u64])
    }

    /// Shared by every method in the run, so the first-stage models of the
    /// pseudo-labelling pipelines coincide with the lower baseline.
    fn learner_seed(&self, k: usize, n: usize) -> u64 {
        derive_seed(self.seed, &[2, k as u64, n as u64])
    }

    fn method_seed(&self, k: usize, n: usize, method: MethodKind) -> u64 {
        derive_seed(self.seed, &[3, k as u64, n as u64, method.id()])
    }
}

/// One row of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub budget: f64,
    pub scenario: String,
    pub k_index: usize,
    pub n_index: usize,
    /// Active-learning draws averaged into this record; 0 otherwise.
    pub repeats: usize,
    pub status: String,
    pub error: String,
    pub labelled: usize,
    pub labelled_benign: usize,
    pub labelled_malicious: usize,
    pub unlabelled: usize,
    pub trainpool: usize,
    pub trainpool_benign: usize,
    pub trainpool_malicious: usize,
    pub future: usize,
    pub future_benign: usize,
    pub future_malicious: usize,
    pub ratio_labelled: String,
    pub ratio_trainpool: String,
    pub ratio_future: String,
    pub train_size: usize,
    pub train_verified: usize,
    pub train_oracle: usize,
    pub train_pseudo: usize,
    pub pseudo_accuracy: Option<f64>,
    pub verified_spend: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub flags: String,
    pub seed_split: u64,
    pub seed_compose: u64,
    pub seed_learner: u64,
    pub seed_method: u64,
    pub epsilon_ms: f64,
}

impl RunRecord {
    pub const STATUS_OK: &'static str = "ok";
    pub const STATUS_FAILED: &'static str = "failed";

    pub fn is_ok(&self) -> bool {
        self.status == Self::STATUS_OK
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.split('|').any(|f| f == flag)
    }

    fn sort_key(&self) -> (u64, u64, String, usize, usize) {
        let id = self
            .method
            .parse::<MethodKind>()
            .map(MethodKind::id)
            .unwrap_or(u64::MAX);
        // Budgets are positive, so their bit patterns sort numerically.
        (
            id,
            self.budget.to_bits(),
            self.scenario.clone(),
            self.k_index,
            self.n_index,
        )
    }
}

/// One active-learning draw, kept alongside the averaged record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub method: String,
    pub budget: f64,
    pub scenario: String,
    pub k_index: usize,
    pub n_index: usize,
    pub repeat_index: usize,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub oracle_labels: usize,
    pub band_candidates: usize,
    pub band_exhausted: bool,
    pub epsilon_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignResults {
    pub dataset_name: String,
    pub dataset_counts: ClassCounts,
    pub records: Vec<RunRecord>,
    pub repeats: Vec<RepeatRecord>,
    pub warnings: Vec<String>,
}

impl CampaignResults {
    pub fn of_method<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a RunRecord> + 'a {
        self.records.iter().filter(move |r| r.method == method)
    }
}

/// Partition facts shared by all records of one run.
struct RunContext<'a> {
    cell: &'a CellSpec,
    k: usize,
    n: usize,
    future: ClassCounts,
    trainpool: ClassCounts,
}

impl RunContext<'_> {
    fn blank(&self, method: &MethodSpec) -> RunRecord {
        let fc = self.future;
        let tc = self.trainpool;
        RunRecord {
            method: method.name(),
            budget: self.cell.budget,
            scenario: self.cell.scenario.name.clone(),
            k_index: self.k,
            n_index: self.n,
            repeats: 0,
            status: RunRecord::STATUS_OK.into(),
            error: String::new(),
            labelled: 0,
            labelled_benign: 0,
            labelled_malicious: 0,
            unlabelled: 0,
            trainpool: tc.total(),
            trainpool_benign: tc.benign,
            trainpool_malicious: tc.malicious,
            future: fc.total(),
            future_benign: fc.benign,
            future_malicious: fc.malicious,
            ratio_labelled: String::new(),
            ratio_trainpool: tc.ratio().map(|r| r.to_string()).unwrap_or_default(),
            ratio_future: fc.ratio().map(|r| r.to_string()).unwrap_or_default(),
            train_size: 0,
            train_verified: 0,
            train_oracle: 0,
            train_pseudo: 0,
            pseudo_accuracy: None,
            verified_spend: 0.0,
            f1: 0.0,
            precision: 0.0,
            recall: 0.0,
            tp: 0,
            fp: 0,
            tn: 0,
            fn_: 0,
            flags: String::new(),
            seed_split: self.cell.split_seed(self.k),
            seed_compose: self.cell.compose_seed(self.k, self.n),
            seed_learner: self.cell.learner_seed(self.k, self.n),
            seed_method: self.cell.method_seed(self.k, self.n, method.kind),
            epsilon_ms: 0.0,
        }
    }

    fn failed(&self, method: &MethodSpec, error: String) -> RunRecord {
        RunRecord {
            status: RunRecord::STATUS_FAILED.into(),
            error,
            ..self.blank(method)
        }
    }
}

fn fill_record(
    mut r: RunRecord,
    labelled: &LabeledDataset,
    unlabelled: usize,
    o: &MethodOutcome,
) -> RunRecord {
    let lc = labelled.counts();
    r.labelled = lc.total();
    r.labelled_benign = lc.benign;
    r.labelled_malicious = lc.malicious;
    r.unlabelled = unlabelled;
    r.ratio_labelled = lc.ratio().map(|x| x.to_string()).unwrap_or_default();
    r.repeats = o.repeats.len();
    r.train_size = o.training.total();
    r.train_verified = o.training.verified;
    r.train_oracle = o.training.oracle;
    r.train_pseudo = o.training.pseudo;
    r.pseudo_accuracy = o.pseudo_accuracy;
    r.verified_spend = o.verified_spend();
    r.f1 = o.metrics.f1;
    r.precision = o.metrics.precision;
    r.recall = o.metrics.recall;
    r.tp = o.confusion.tp;
    r.fp = o.confusion.fp;
    r.tn = o.confusion.tn;
    r.fn_ = o.confusion.fn_;
    r.flags = o
        .flags
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("|");
    r.epsilon_ms = o.epsilon_ms;
    r
}

fn repeat_records(r: &RunRecord, o: &MethodOutcome) -> Vec<RepeatRecord> {
    o.repeats
        .iter()
        .map(|rep| RepeatRecord {
            method: r.method.clone(),
            budget: r.budget,
            scenario: r.scenario.clone(),
            k_index: r.k_index,
            n_index: r.n_index,
            repeat_index: rep.index,
            f1: rep.metrics.f1,
            precision: rep.metrics.precision,
            recall: rep.metrics.recall,
            oracle_labels: rep.oracle_ids.len(),
            band_candidates: rep.band_candidates,
            band_exhausted: rep.band_exhausted,
            epsilon_ms: rep.epsilon_ms,
        })
        .collect()
}

/// Runs every method once on run `(k, n)` of `cell`.
fn run_one<L: Learner>(
    ctx: &RunContext<'_>,
    future: &LabeledDataset,
    trainpool: &LabeledDataset,
    methods: &[MethodSpec],
    learner: &L,
    test_fraction: f64,
) -> (Vec<RunRecord>, Vec<RepeatRecord>) {
    let spec = ctx.cell.partition_spec(test_fraction);
    let mut rng = Stream::new(ctx.cell.compose_seed(ctx.k, ctx.n));
    let (labelled, unlabelled, ledger) = match compose_labelled(trainpool, &spec, &mut rng) {
        Ok(parts) => parts,
        Err(e) => {
            let recs = methods
                .iter()
                .map(|m| ctx.failed(m, e.to_string()))
                .collect();
            return (recs, Vec::new());
        }
    };
    let learner = learner.reseeded(ctx.cell.learner_seed(ctx.k, ctx.n));
    let inputs = MethodInputs {
        labelled: &labelled,
        unlabelled: &unlabelled,
        trainpool,
        future,
        ledger: &ledger,
        scenario: &ctx.cell.scenario,
    };
    let mut records = Vec::with_capacity(methods.len());
    let mut repeats = Vec::new();
    for m in methods {
        let seed = ctx.cell.method_seed(ctx.k, ctx.n, m.kind);
        match run_method(m, &learner, &inputs, seed) {
            Ok(o) => {
                let r = fill_record(ctx.blank(m), &labelled, unlabelled.len(), &o);
                repeats.extend(repeat_records(&r, &o));
                records.push(r);
            }
            Err(e) => {
                let mut r = ctx.failed(m, e.to_string());
                r.labelled = labelled.len();
                r.unlabelled = unlabelled.len();
                r.verified_spend = ledger.spent;
                records.push(r);
            }
        }
    }
    (records, repeats)
}

/// Runs all `n * k` runs of one cell on the current rayon pool.
pub fn run_cell<L: Learner>(
    dataset: &LabeledDataset,
    cell: &CellSpec,
    methods: &[MethodSpec],
    learner: &L,
    n: usize,
    k: usize,
    test_fraction: f64,
) -> (Vec<RunRecord>, Vec<RepeatRecord>) {
    let spec = cell.partition_spec(test_fraction);
    let splits: Vec<_> = (0..k)
        .into_par_iter()
        .map(|ki| split_future(dataset, &spec, &mut Stream::new(cell.split_seed(ki))))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..k)
        .flat_map(|ki| (0..n).map(move |ni| (ki, ni)))
        .collect();
    let parts: Vec<_> = jobs
        .par_iter()
        .map(|&(ki, ni)| match &splits[ki] {
            Ok((future, trainpool)) => {
                let ctx = RunContext {
                    cell,
                    k: ki,
                    n: ni,
                    future: future.counts(),
                    trainpool: trainpool.counts(),
                };
                run_one(&ctx, future, trainpool, methods, learner, test_fraction)
            }
            Err(e) => {
                // The split itself failed; every method fails with it.
                let recs = methods
                    .iter()
                    .map(|m| {
                        let ctx = RunContext {
                            cell,
                            k: ki,
                            n: ni,
                            future: ClassCounts::default(),
                            trainpool: ClassCounts::default(),
                        };
                        ctx.failed(m, e.to_string())
                    })
                    .collect();
                (recs, Vec::new())
            }
        })
        .collect();
    let mut records = Vec::new();
    let mut repeats = Vec::new();
    for (r, p) in parts {
        records.extend(r);
        repeats.extend(p);
    }
    (records, repeats)
}

/// Number of worker threads: `$SEMISUP_WORKERS` if set, else 1.
pub fn default_workers() -> usize {
    std::env::var("SEMISUP_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&w| w > 0)
        .unwrap_or(1)
}

/// Loads the dataset and runs the campaign with the reference forest.
pub fn run_campaign(cfg: &CampaignConfig, workers: usize) -> Result<CampaignResults, EngineError> {
    cfg.validate()?;
    let dataset = cfg.dataset.load()?;
    let learner = RandomForest::new(cfg.learner.clone());
    run_campaign_on(cfg, &dataset, &learner, workers)
}

/// Runs the campaign on an already loaded dataset with any learner.
pub fn run_campaign_on<L: Learner>(
    cfg: &CampaignConfig,
    dataset: &LabeledDataset,
    learner: &L,
    workers: usize,
) -> Result<CampaignResults, EngineError> {
    let mut warnings = cfg.validate()?;
    dataset.require_both_classes()?;
    warnings.extend(cfg.dataset_warnings(dataset));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| EngineError::Pool(e.to_string()))?;
    let cells = cfg.cells();
    let parts: Vec<_> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                run_cell(
                    dataset,
                    cell,
                    &cfg.methods,
                    learner,
                    cfg.n,
                    cfg.k,
                    cfg.test_fraction,
                )
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut repeats = Vec::new();
    for (r, p) in parts {
        records.extend(r);
        repeats.extend(p);
    }
    records.sort_by_cached_key(RunRecord::sort_key);
    repeats.sort_by(|a, b| {
        let key = |x: &RepeatRecord| {
            (
                x.method
                    .parse::<MethodKind>()
                    .map(MethodKind::id)
                    .unwrap_or(u64::MAX),
                x.budget.to_bits(),
                x.scenario.clone(),
                x.k_index,
                x.n_index,
                x.repeat_index,
            )
        };
        key(a).cmp(&key(b))
    });
    Ok(CampaignResults {
        dataset_name: dataset.name().to_string(),
        dataset_counts: dataset.counts(),
        records,
        repeats,
        warnings,
    })
}
