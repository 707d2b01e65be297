//! Labelled source data and the partitioning that precedes every run.
//!
//! A source dataset is split into a held-out *future* set and a *training
//! pool*. The training pool is then divided into a small labelled set,
//! bought under a labelling budget, and an unlabelled pool whose ground
//! truth stays hidden from learners.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Stream;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset file not found: {0}")]
    MissingFile(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset contains a single class ({0}); both classes are required")]
    SingleClassDataset(Label),
    #[error("sample {id} has {found} features, expected {expected}")]
    DimensionMismatch {
        id: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate sample id {0}")]
    DuplicateId(usize),
    #[error("too few {class} samples: have {available}, need at least {required}")]
    TooFewSamples {
        class: Label,
        available: usize,
        required: usize,
    },
    #[error("budget {budget} cannot cover the required labels (needs {required})")]
    InsufficientBudget { budget: f64, required: f64 },
    #[error("training pool exhausted: {required} {class} samples needed, {available} available")]
    PoolExhausted {
        class: Label,
        available: usize,
        required: usize,
    },
    #[error("invalid partition spec: {0}")]
    InvalidSpec(String),
}

/// Binary ground truth. Positive means malicious.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Benign = 0,
    Malicious = 1,
}

impl Label {
    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Label::Benign),
            1 => Some(Label::Malicious),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        self as u8
    }

    pub fn is_malicious(self) -> bool {
        self == Label::Malicious
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Benign => "benign",
            Label::Malicious => "malicious",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: usize,
    pub features: Vec<f64>,
    pub label: Label,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub benign: usize,
    pub malicious: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.benign + self.malicious
    }

    pub fn of(&self, label: Label) -> usize {
        match label {
            Label::Benign => self.benign,
            Label::Malicious => self.malicious,
        }
    }

    fn bump(&mut self, label: Label) {
        match label {
            Label::Benign => self.benign += 1,
            Label::Malicious => self.malicious += 1,
        }
    }

    pub fn tally<I: IntoIterator<Item = Label>>(labels: I) -> Self {
        let mut c = ClassCounts::default();
        for l in labels {
            c.bump(l);
        }
        c
    }

    pub fn ratio(&self) -> Option<ClassRatio> {
        ClassRatio::from_counts(*self)
    }
}

/// Ordered collection of labelled samples sharing one dimensionality.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    name: String,
    dim: usize,
    samples: Vec<Sample>,
}

impl LabeledDataset {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        samples: Vec<Sample>,
    ) -> Result<Self, DatasetError> {
        if samples.is_empty() {
            return Err(DatasetError::EmptyDataset);
        }
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if s.features.len() != dim {
                return Err(DatasetError::DimensionMismatch {
                    id: s.id,
                    expected: dim,
                    found: s.features.len(),
                });
            }
            if !seen.insert(s.id) {
                return Err(DatasetError::DuplicateId(s.id));
            }
        }
        Ok(Self {
            name: name.into(),
            dim,
            samples,
        })
    }

    /// Builds a dataset from feature rows and labels, assigning ids `0..n`.
    pub fn from_rows(
        name: impl Into<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<Label>,
    ) -> Result<Self, DatasetError> {
        let dim = rows.first().map_or(0, Vec::len);
        let samples = rows
            .into_iter()
            .zip(labels)
            .enumerate()
            .map(|(id, (features, label))| Sample {
                id,
                features,
                label,
            })
            .collect();
        Self::new(name, dim, samples)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.samples.iter().map(|s| s.id)
    }

    pub fn counts(&self) -> ClassCounts {
        ClassCounts::tally(self.samples.iter().map(|s| s.label))
    }

    /// Fails unless both classes are present, as required of a source dataset.
    pub fn require_both_classes(&self) -> Result<(), DatasetError> {
        let c = self.counts();
        if c.malicious == 0 {
            Err(DatasetError::SingleClassDataset(Label::Benign))
        } else if c.benign == 0 {
            Err(DatasetError::SingleClassDataset(Label::Malicious))
        } else {
            Ok(())
        }
    }

    /// New dataset holding the samples at `positions`, in the given order.
    fn pick(&self, name: &str, positions: &[usize]) -> Result<Self, DatasetError> {
        let samples = positions.iter().map(|&p| self.samples[p].clone()).collect();
        Self::new(name, self.dim, samples)
    }

    /// Positions of all samples of `label`, in dataset order.
    fn positions_of(&self, label: Label) -> Vec<usize> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == label)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Samples whose ground truth is hidden from learners.
///
/// Learners only see [`UnlabeledPool::features`]. The truth is reachable
/// through an [`Oracle`], which the active-learning simulation and the
/// evaluator use.
#[derive(Clone, Debug, PartialEq)]
pub struct UnlabeledPool {
    dim: usize,
    samples: Vec<Sample>,
}

impl UnlabeledPool {
    pub fn new(dim: usize, samples: Vec<Sample>) -> Self {
        Self { dim, samples }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn id(&self, index: usize) -> usize {
        self.samples[index].id
    }

    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.samples.iter().map(|s| s.id)
    }

    pub fn features(&self, index: usize) -> &[f64] {
        &self.samples[index].features
    }

    /// Feature-only view of the whole pool.
    pub fn feature_view(&self) -> Vec<&[f64]> {
        self.samples.iter().map(|s| s.features.as_slice()).collect()
    }

    pub fn oracle(&self) -> Oracle<'_> {
        Oracle { pool: self }
    }
}

/// Reveals the ground truth of unlabelled samples.
#[derive(Clone, Copy, Debug)]
pub struct Oracle<'a> {
    pool: &'a UnlabeledPool,
}

impl Oracle<'_> {
    pub fn label(&self, index: usize) -> Label {
        self.pool.samples[index].label
    }

    pub fn counts(&self) -> ClassCounts {
        ClassCounts::tally(self.pool.samples.iter().map(|s| s.label))
    }
}

/// Integer class-balance percentages `(benign, malicious)`.
///
/// Benign is rounded half-up and malicious is `100 - benign`, so the pair
/// always sums to 100.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRatio {
    pub benign_pct: u8,
    pub malicious_pct: u8,
}

impl ClassRatio {
    pub fn from_counts(c: ClassCounts) -> Option<Self> {
        let n = c.total();
        if n == 0 {
            return None;
        }
        let benign_pct = ((200 * c.benign + n) / (2 * n)) as u8;
        Some(Self {
            benign_pct,
            malicious_pct: 100 - benign_pct,
        })
    }
}

impl fmt::Display for ClassRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.benign_pct, self.malicious_pct)
    }
}

pub fn class_ratio(d: &LabeledDataset) -> ClassRatio {
    // LabeledDataset is never empty.
    d.counts().ratio().expect("nonempty dataset")
}

/// Per-class labelling costs, in budget units per label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostScenario {
    pub name: String,
    pub cost_benign: f64,
    pub cost_malicious: f64,
}

impl CostScenario {
    pub fn new(
        name: impl Into<String>,
        cost_benign: f64,
        cost_malicious: f64,
    ) -> Result<Self, DatasetError> {
        let s = Self {
            name: name.into(),
            cost_benign,
            cost_malicious,
        };
        s.validate()?;
        Ok(s)
    }

    /// Malicious and benign labels cost the same.
    pub fn balanced() -> Self {
        Self {
            name: "balanced".into(),
            cost_benign: 1.0,
            cost_malicious: 1.0,
        }
    }

    /// A malicious label costs twice a benign one.
    pub fn unbalanced() -> Self {
        Self {
            name: "unbalanced".into(),
            cost_benign: 1.0,
            cost_malicious: 2.0,
        }
    }

    /// A malicious label costs five times a benign one.
    pub fn very_unbalanced() -> Self {
        Self {
            name: "very_unbalanced".into(),
            cost_benign: 1.0,
            cost_malicious: 5.0,
        }
    }

    pub fn standard() -> [Self; 3] {
        [
            Self::balanced(),
            Self::unbalanced(),
            Self::very_unbalanced(),
        ]
    }

    pub fn cost(&self, label: Label) -> f64 {
        match label {
            Label::Benign => self.cost_benign,
            Label::Malicious => self.cost_malicious,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let ok = |c: f64| c.is_finite() && c > 0.0;
        if !ok(self.cost_benign) || !ok(self.cost_malicious) {
            return Err(DatasetError::InvalidSpec(format!(
                "scenario `{}`: costs must be finite and > 0",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionSpec {
    pub test_fraction: f64,
    pub budget: f64,
    pub min_benign: usize,
    pub cost_scenario: CostScenario,
    pub seed: u64,
}

impl PartitionSpec {
    pub fn new(budget: f64, min_benign: usize, cost_scenario: CostScenario, seed: u64) -> Self {
        Self {
            test_fraction: 0.2,
            budget,
            min_benign,
            cost_scenario,
            seed,
        }
    }

    /// Smallest budget that admits `min_benign` benign labels and one
    /// malicious label.
    pub fn required_budget(&self) -> f64 {
        self.min_benign as f64 * self.cost_scenario.cost_benign + self.cost_scenario.cost_malicious
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(DatasetError::InvalidSpec(format!(
                "test_fraction {} outside (0, 1)",
                self.test_fraction
            )));
        }
        self.cost_scenario.validate()?;
        let required = self.required_budget();
        if !(self.budget.is_finite() && self.budget >= required) {
            return Err(DatasetError::InsufficientBudget {
                budget: self.budget,
                required,
            });
        }
        Ok(())
    }
}

/// Tracks verified-label spending against the labelling budget of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub budget: f64,
    pub spent: f64,
    pub verified: ClassCounts,
    /// Oracle suggestions bought at a standardized price.
    pub suggestions: usize,
    pub standardized_cost: Option<f64>,
}

impl BudgetLedger {
    pub fn new(budget: f64) -> Self {
        Self {
            budget,
            spent: 0.0,
            verified: ClassCounts::default(),
            suggestions: 0,
            standardized_cost: None,
        }
    }

    pub fn residual(&self) -> f64 {
        self.budget - self.spent
    }

    /// Buys `count` labels of one class.
    pub fn debit(&mut self, label: Label, count: usize, scenario: &CostScenario) {
        self.spent += count as f64 * scenario.cost(label);
        for _ in 0..count {
            self.verified.bump(label);
        }
    }

    /// Returns `count` previously bought labels of one class.
    pub fn refund(&mut self, label: Label, count: usize, scenario: &CostScenario) {
        self.spent -= count as f64 * scenario.cost(label);
        match label {
            Label::Benign => self.verified.benign -= count,
            Label::Malicious => self.verified.malicious -= count,
        }
    }

    /// Spends the whole residual budget on `count` oracle suggestions, each
    /// priced at `residual / count`. Afterwards `spent == budget` exactly.
    pub fn exhaust_standardized(&mut self, count: usize) {
        if count == 0 {
            return;
        }
        self.standardized_cost = Some(self.residual() / count as f64);
        self.suggestions += count;
        self.spent = self.budget;
    }
}

/// Stratified split of `d` into the future set and the training pool.
///
/// From each class, `floor(test_fraction * n_c)` samples go to the future
/// set; both outputs keep the source order.
pub fn split_future(
    d: &LabeledDataset,
    spec: &PartitionSpec,
    rng: &mut Stream,
) -> Result<(LabeledDataset, LabeledDataset), DatasetError> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(DatasetError::InvalidSpec(format!(
            "test_fraction {} outside (0, 1)",
            spec.test_fraction
        )));
    }
    let mut in_future = vec![false; d.len()];
    for label in [Label::Benign, Label::Malicious] {
        let mut pos = d.positions_of(label);
        let take = (spec.test_fraction * pos.len() as f64).floor() as usize;
        if pos.len() < 5 || take == 0 {
            return Err(DatasetError::TooFewSamples {
                class: label,
                available: pos.len(),
                required: 5,
            });
        }
        rng.partial_shuffle(&mut pos, take);
        for &p in &pos[..take] {
            in_future[p] = true;
        }
    }
    let (fut, pool): (Vec<usize>, Vec<usize>) = (0..d.len()).partition(|&p| in_future[p]);
    Ok((
        d.pick(&format!("{}/future", d.name()), &fut)?,
        d.pick(&format!("{}/trainpool", d.name()), &pool)?,
    ))
}

/// Number of malicious labels the residual budget affords.
fn affordable(residual: f64, cost: f64) -> usize {
    if residual < cost {
        return 0;
    }
    let mut m = (residual / cost).floor() as usize;
    while (m + 1) as f64 * cost <= residual {
        m += 1;
    }
    while m > 0 && m as f64 * cost > residual {
        m -= 1;
    }
    m
}

/// Buys the labelled set from the training pool.
///
/// `min_benign` benign samples are drawn first, then malicious samples until
/// the residual budget no longer covers one more malicious label. Everything
/// not bought becomes the unlabelled pool.
pub fn compose_labelled(
    trainpool: &LabeledDataset,
    spec: &PartitionSpec,
    rng: &mut Stream,
) -> Result<(LabeledDataset, UnlabeledPool, BudgetLedger), DatasetError> {
    spec.validate()?;
    let scenario = &spec.cost_scenario;
    let mut ledger = BudgetLedger::new(spec.budget);

    let mut benign = trainpool.positions_of(Label::Benign);
    if benign.len() < spec.min_benign {
        return Err(DatasetError::PoolExhausted {
            class: Label::Benign,
            available: benign.len(),
            required: spec.min_benign,
        });
    }
    rng.partial_shuffle(&mut benign, spec.min_benign);
    ledger.debit(Label::Benign, spec.min_benign, scenario);

    let n_mal = affordable(ledger.residual(), scenario.cost_malicious);
    let mut malicious = trainpool.positions_of(Label::Malicious);
    if malicious.len() < n_mal {
        return Err(DatasetError::PoolExhausted {
            class: Label::Malicious,
            available: malicious.len(),
            required: n_mal,
        });
    }
    rng.partial_shuffle(&mut malicious, n_mal);
    ledger.debit(Label::Malicious, n_mal, scenario);

    let mut bought = vec![false; trainpool.len()];
    for &p in benign[..spec.min_benign].iter().chain(&malicious[..n_mal]) {
        bought[p] = true;
    }
    let (lab, unl): (Vec<usize>, Vec<usize>) = (0..trainpool.len()).partition(|&p| bought[p]);
    let labelled = trainpool.pick(&format!("{}/labelled", trainpool.name()), &lab)?;
    let unlabelled = UnlabeledPool::new(
        trainpool.dim(),
        unl.iter().map(|&p| trainpool.samples[p].clone()).collect(),
    );
    Ok((labelled, unlabelled, ledger))
}

/// Reads a dataset from CSV: a header row, numeric feature columns, and one
/// 0/1 label column. Ids follow row order.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
) -> Result<LabeledDataset, DatasetError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DatasetError::MissingFile(path.display().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let header = reader.headers()?.clone();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| DatasetError::MissingLabelColumn(label_column.to_string()))?;
    let dim = header.len() - 1;

    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // Line 1 is the header.
        let row = i + 2;
        let record = record?;
        let mut features = Vec::with_capacity(dim);
        let mut label = None;
        for (c, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            let parse_err = |message: String| DatasetError::Parse {
                row,
                column: header.get(c).unwrap_or("?").to_string(),
                message,
            };
            if c == label_idx {
                label = match cell {
                    "0" => Some(Label::Benign),
                    "1" => Some(Label::Malicious),
                    other => return Err(parse_err(format!("label `{other}` is not 0 or 1"))),
                };
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| parse_err(format!("`{cell}` is not a number")))?;
                if !v.is_finite() {
                    return Err(parse_err(format!("`{cell}` is not finite")));
                }
                features.push(v);
            }
        }
        let label = label.ok_or_else(|| DatasetError::Parse {
            row,
            column: label_column.to_string(),
            message: "missing label".into(),
        })?;
        samples.push(Sample {
            id: i,
            features,
            label,
        });
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    LabeledDataset::new(name, dim, samples)
}

/// Writes `d` in the CSV layout read by [`load_csv`]. Features are named
/// `f0..f{dim-1}` and printed in shortest round-trip form.
pub fn write_csv(
    d: &LabeledDataset,
    path: impl AsRef<Path>,
    label_column: &str,
) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..d.dim()).map(|i| format!("f{i}")).collect();
    header.push(label_column.to_string());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(d.dim() + 1);
    for s in d.samples() {
        row.clear();
        row.extend(s.features.iter().map(|v| v.to_string()));
        row.push(s.label.bit().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
