//! The benchmarked pipelines: two supervised baselines, three
//! pseudo-labelling variants, three active-learning variants, and three
//! pseudo-active cascades.
//!
//! All pipelines respect the labelling budget of their run. Pseudo labels
//! are never counted as verified labels. Active variants spend half of the
//! budget on an initial labelled set and the other half on oracle
//! suggestions priced at a standardized cost, so every method ends up with
//! the same number of verified labels.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    BudgetLedger, CostScenario, DatasetError, Label, LabeledDataset, Sample, UnlabeledPool,
};
use crate::engine::measure_epsilon;
use crate::learner::{Classifier, Learner, LearnerError, Prediction, TrainRow};
use crate::rng::Stream;
use crate::stats::{metrics, ConfusionCounts, Metrics};

#[derive(Debug, Error)]
pub enum MethodError {
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("cannot halve the labelled set: {class} has {available} samples, need >= 2")]
    TooFewToHalve { class: Label, available: usize },
    #[error("unlabelled pool is empty")]
    EmptyUnlabelled,
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
}

/// Pseudo labels and high-confidence active candidates need `c >= 0.99`.
pub const HIGH_CONFIDENCE: f64 = 0.99;
/// Low-confidence active candidates have `c <= 0.01`.
pub const LOW_CONFIDENCE: f64 = 0.01;
pub const DEFAULT_ACTIVE_REPEATS: usize = 5;

/// Confidence band from which active learning draws suggestions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    /// `c <= 0.01`
    Low,
    /// `0.01 < c < 0.99`
    Other,
    /// `c >= 0.99`
    High,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::Low, Band::Other, Band::High];

    /// The band a confidence falls in. The three bands partition `[0, 1]`.
    pub fn of(confidence: f64) -> Band {
        if confidence <= LOW_CONFIDENCE {
            Band::Low
        } else if confidence >= HIGH_CONFIDENCE {
            Band::High
        } else {
            Band::Other
        }
    }

    pub fn contains(self, confidence: f64) -> bool {
        Band::of(confidence) == self
    }

    fn suffix(self) -> &'static str {
        match self {
            Band::Low => "low",
            Band::Other => "other",
            Band::High => "high",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodKind {
    /// Supervised on the labelled set only.
    SlLower,
    /// Supervised on the whole training pool with true labels.
    SlUpper,
    /// Pseudo-labels the whole unlabelled pool, no confidence filter.
    SslVanilla,
    /// Admits confident pseudo labels once.
    Pseudo,
    /// Admits confident pseudo labels twice.
    PseudoIterated,
    Active(Band),
    PseudoActive(Band),
}

impl MethodKind {
    pub const ALL: [MethodKind; 11] = [
        MethodKind::SlLower,
        MethodKind::SlUpper,
        MethodKind::SslVanilla,
        MethodKind::Pseudo,
        MethodKind::PseudoIterated,
        MethodKind::Active(Band::Low),
        MethodKind::Active(Band::Other),
        MethodKind::Active(Band::High),
        MethodKind::PseudoActive(Band::Low),
        MethodKind::PseudoActive(Band::Other),
        MethodKind::PseudoActive(Band::High),
    ];

    /// Stable numeric id, used for seed derivation.
    pub fn id(self) -> u64 {
        Self::ALL.iter().position(|&k| k == self).unwrap() as u64
    }

    pub fn is_active(self) -> bool {
        matches!(self, MethodKind::Active(_) | MethodKind::PseudoActive(_))
    }

    pub fn band(self) -> Option<Band> {
        match self {
            MethodKind::Active(b) | MethodKind::PseudoActive(b) => Some(b),
            _ => None,
        }
    }

    pub fn is_pure_pseudo(self) -> bool {
        matches!(
            self,
            MethodKind::SslVanilla | MethodKind::Pseudo | MethodKind::PseudoIterated
        )
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodKind::SlLower => f.write_str("sl_lower"),
            MethodKind::SlUpper => f.write_str("sl_upper"),
            MethodKind::SslVanilla => f.write_str("ssl_vanilla"),
            MethodKind::Pseudo => f.write_str("pseudo"),
            MethodKind::PseudoIterated => f.write_str("pseudo_iterated"),
            MethodKind::Active(b) => write!(f, "active_{}", b.suffix()),
            MethodKind::PseudoActive(b) => write!(f, "pseudo_active_{}", b.suffix()),
        }
    }
}

impl FromStr for MethodKind {
    type Err = MethodError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MethodKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| MethodError::UnknownMethod(s.to_string()))
    }
}

/// A method together with its thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub kind: MethodKind,
    pub pseudo_threshold: f64,
    pub active_repeats: usize,
}

impl MethodSpec {
    pub fn new(kind: MethodKind) -> Self {
        Self {
            kind,
            pseudo_threshold: HIGH_CONFIDENCE,
            active_repeats: DEFAULT_ACTIVE_REPEATS,
        }
    }

    pub fn all() -> Vec<MethodSpec> {
        MethodKind::ALL.into_iter().map(MethodSpec::new).collect()
    }

    pub fn name(&self) -> String {
        self.kind.to_string()
    }
}

/// Where a training label came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// Bought with the initial labelling budget.
    Verified,
    /// Assigned by a model.
    Pseudo,
    /// Revealed by the oracle on request.
    Oracle,
}

impl Origin {
    pub fn is_correct(self) -> bool {
        self != Origin::Pseudo
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingTag {
    pub id: usize,
    pub label: Label,
    pub origin: Origin,
    /// Vote share behind a pseudo label.
    pub p_malicious: Option<f64>,
}

/// Training set mixing verified labels with pseudo labels.
#[derive(Clone, Debug, Default)]
pub struct MixedLabelledSet<'a> {
    rows: Vec<TrainRow<'a>>,
    tags: Vec<TrainingTag>,
    ids: HashSet<usize>,
}

impl<'a> MixedLabelledSet<'a> {
    pub fn from_verified(d: &'a LabeledDataset) -> Self {
        let mut set = Self::default();
        for s in d.samples() {
            set.push_correct(s, Origin::Verified);
        }
        set
    }

    fn push(&mut self, id: usize, features: &'a [f64], tag: TrainingTag) {
        let fresh = self.ids.insert(id);
        assert!(fresh, "sample {id} entered the training set twice");
        self.rows.push(TrainRow::new(features, tag.label));
        self.tags.push(tag);
    }

    pub fn push_correct(&mut self, s: &'a Sample, origin: Origin) {
        debug_assert!(origin.is_correct());
        self.push(
            s.id,
            &s.features,
            TrainingTag {
                id: s.id,
                label: s.label,
                origin,
                p_malicious: None,
            },
        );
    }

    pub fn push_oracle(&mut self, pool: &'a UnlabeledPool, index: usize) {
        let label = pool.oracle().label(index);
        self.push(
            pool.id(index),
            pool.features(index),
            TrainingTag {
                id: pool.id(index),
                label,
                origin: Origin::Oracle,
                p_malicious: None,
            },
        );
    }

    pub fn push_pseudo(&mut self, pool: &'a UnlabeledPool, index: usize, p: &Prediction) {
        self.push(
            pool.id(index),
            pool.features(index),
            TrainingTag {
                id: pool.id(index),
                label: p.label,
                origin: Origin::Pseudo,
                p_malicious: Some(p.p_malicious),
            },
        );
    }

    pub fn contains(&self, id: usize) -> bool {
        self.ids.contains(&id)
    }

    pub fn rows(&self) -> &[TrainRow<'a>] {
        &self.rows
    }

    pub fn tags(&self) -> &[TrainingTag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn count(&self, origin: Origin) -> usize {
        self.tags.iter().filter(|t| t.origin == origin).count()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub verified: usize,
    pub oracle: usize,
    pub pseudo: usize,
}

impl TrainingSummary {
    fn of(set: &MixedLabelledSet<'_>) -> Self {
        Self {
            verified: set.count(Origin::Verified),
            oracle: set.count(Origin::Oracle),
            pseudo: set.count(Origin::Pseudo),
        }
    }

    pub fn total(&self) -> usize {
        self.verified + self.oracle + self.pseudo
    }

    /// Labels known to be correct.
    pub fn correct(&self) -> usize {
        self.verified + self.oracle
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunFlag {
    /// Fewer band candidates than suggestions; the rest were drawn uniformly.
    BandExhausted,
    /// The unlabelled pool could not supply every suggestion.
    PoolExhausted,
    /// Trained on the whole training pool; labels beyond the budget are
    /// hypothetical.
    UpperBound,
}

impl fmt::Display for RunFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunFlag::BandExhausted => "band_exhausted",
            RunFlag::PoolExhausted => "pool_exhausted",
            RunFlag::UpperBound => "upper_bound",
        })
    }
}

/// One active-learning draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatOutcome {
    pub index: usize,
    pub metrics: Metrics,
    pub confusion: ConfusionCounts,
    pub epsilon_ms: f64,
    pub oracle_ids: Vec<usize>,
    pub band_candidates: usize,
    pub band_exhausted: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodOutcome {
    /// Averaged over repeats for active methods.
    pub metrics: Metrics,
    /// Of the single final model; summed over repeats for active methods.
    pub confusion: ConfusionCounts,
    /// Wall time; per-repeat mean for active methods.
    pub epsilon_ms: f64,
    pub training: TrainingSummary,
    pub ledger: BudgetLedger,
    pub flags: Vec<RunFlag>,
    pub repeats: Vec<RepeatOutcome>,
    /// Ids admitted as pseudo labels, per admission stage.
    pub pseudo_stages: Vec<Vec<usize>>,
    /// Fraction of pseudo labels that match the hidden truth.
    pub pseudo_accuracy: Option<f64>,
    /// Final training set (of the last repeat, for active methods).
    pub final_set: Vec<TrainingTag>,
}

impl MethodOutcome {
    pub fn verified_spend(&self) -> f64 {
        self.ledger.spent
    }
}

/// Everything a pipeline may read for one run. `future` is only touched by
/// the final evaluation.
#[derive(Clone, Copy, Debug)]
pub struct MethodInputs<'a> {
    pub labelled: &'a LabeledDataset,
    pub unlabelled: &'a UnlabeledPool,
    pub trainpool: &'a LabeledDataset,
    pub future: &'a LabeledDataset,
    pub ledger: &'a BudgetLedger,
    pub scenario: &'a CostScenario,
}

fn evaluate<M: Classifier>(
    model: &M,
    future: &LabeledDataset,
) -> Result<(ConfusionCounts, Metrics), LearnerError> {
    let view: Vec<&[f64]> = future
        .samples()
        .iter()
        .map(|s| s.features.as_slice())
        .collect();
    let preds = model.predict(&view)?;
    let c = ConfusionCounts::from_pairs(
        future
            .samples()
            .iter()
            .zip(&preds)
            .map(|(s, p)| (s.label, p.label)),
    );
    Ok((c, metrics(&c)))
}

fn predict_indices<M: Classifier>(
    model: &M,
    pool: &UnlabeledPool,
    indices: &[usize],
) -> Result<Vec<Prediction>, LearnerError> {
    let view: Vec<&[f64]> = indices.iter().map(|&i| pool.features(i)).collect();
    model.predict(&view)
}

fn pseudo_accuracy(set: &MixedLabelledSet<'_>, pool: &UnlabeledPool) -> Option<f64> {
    let truth: std::collections::HashMap<usize, Label> = (0..pool.len())
        .map(|i| (pool.id(i), pool.oracle().label(i)))
        .collect();
    let pseudo: Vec<_> = set
        .tags()
        .iter()
        .filter(|t| t.origin == Origin::Pseudo)
        .collect();
    if pseudo.is_empty() {
        return None;
    }
    let right = pseudo.iter().filter(|t| truth[&t.id] == t.label).count();
    Some(right as f64 / pseudo.len() as f64)
}

/// Single-model result shared by the non-active pipelines.
struct Single<'a> {
    set: MixedLabelledSet<'a>,
    confusion: ConfusionCounts,
    metrics: Metrics,
    epsilon_ms: f64,
    stages: Vec<Vec<usize>>,
}

impl Single<'_> {
    fn into_outcome(self, ledger: &BudgetLedger, pool: Option<&UnlabeledPool>) -> MethodOutcome {
        MethodOutcome {
            metrics: self.metrics,
            confusion: self.confusion,
            epsilon_ms: self.epsilon_ms,
            training: TrainingSummary::of(&self.set),
            ledger: ledger.clone(),
            flags: Vec::new(),
            repeats: Vec::new(),
            pseudo_stages: self.stages,
            pseudo_accuracy: pool.and_then(|p| pseudo_accuracy(&self.set, p)),
            final_set: self.set.tags().to_vec(),
        }
    }
}

fn fit_and_evaluate<'a, L: Learner>(
    learner: &L,
    set: MixedLabelledSet<'a>,
    future: &LabeledDataset,
) -> Result<Single<'a>, MethodError> {
    let (res, ms) = measure_epsilon(|| -> Result<_, LearnerError> {
        let model = learner.fit(set.rows())?;
        evaluate(&model, future)
    });
    let (confusion, metrics) = res?;
    Ok(Single {
        set,
        confusion,
        metrics,
        epsilon_ms: ms,
        stages: Vec::new(),
    })
}

/// Lower baseline: fit on the labelled set alone.
pub fn run_sl_lower<L: Learner>(
    learner: &L,
    labelled: &LabeledDataset,
    future: &LabeledDataset,
    ledger: &BudgetLedger,
) -> Result<MethodOutcome, MethodError> {
    let single = fit_and_evaluate(learner, MixedLabelledSet::from_verified(labelled), future)?;
    Ok(single.into_outcome(ledger, None))
}

/// Upper baseline: fit on the whole training pool with true labels.
pub fn run_sl_upper<L: Learner>(
    learner: &L,
    trainpool: &LabeledDataset,
    future: &LabeledDataset,
    ledger: &BudgetLedger,
) -> Result<MethodOutcome, MethodError> {
    let single = fit_and_evaluate(learner, MixedLabelledSet::from_verified(trainpool), future)?;
    let mut out = single.into_outcome(ledger, None);
    out.flags.push(RunFlag::UpperBound);
    Ok(out)
}

/// Fits on the labelled set, pseudo-labels `candidates` of the pool and
/// admits those with confidence `>= threshold` (all, if `threshold` is
/// `None`). Returns the admitted ids and the never-admitted remainder.
fn admit<'a, M: Classifier>(
    model: &M,
    pool: &'a UnlabeledPool,
    candidates: &[usize],
    threshold: Option<f64>,
    set: &mut MixedLabelledSet<'a>,
) -> Result<(Vec<usize>, Vec<usize>), LearnerError> {
    let preds = predict_indices(model, pool, candidates)?;
    let mut admitted = Vec::new();
    let mut rest = Vec::new();
    for (&i, p) in candidates.iter().zip(&preds) {
        if threshold.is_none_or(|t| p.confidence >= t) {
            set.push_pseudo(pool, i, p);
            admitted.push(pool.id(i));
        } else {
            rest.push(i);
        }
    }
    Ok((admitted, rest))
}

/// Pseudo-labelling with `stages` admission rounds. Round `r` fits on the
/// current mixed set and labels whatever was not admitted before.
fn pseudo_pipeline<'a, L: Learner>(
    learner: &L,
    labelled: &'a LabeledDataset,
    pool: &'a UnlabeledPool,
    future: &LabeledDataset,
    threshold: Option<f64>,
    stages: usize,
) -> Result<Single<'a>, MethodError> {
    if pool.is_empty() {
        return Err(MethodError::EmptyUnlabelled);
    }
    let mut set = MixedLabelledSet::from_verified(labelled);
    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    let mut admitted_per_stage = Vec::new();
    let mut ms_total = 0.0;
    for _ in 0..stages {
        if remaining.is_empty() {
            break;
        }
        let (res, ms) = measure_epsilon(|| -> Result<_, LearnerError> {
            let model = learner.fit(set.rows())?;
            admit(&model, pool, &remaining, threshold, &mut set)
        });
        ms_total += ms;
        let (admitted, rest) = res?;
        let changed = !admitted.is_empty();
        admitted_per_stage.push(admitted);
        remaining = rest;
        // Nothing new: the next round would refit the same model.
        if !changed {
            break;
        }
    }
    let mut single = fit_and_evaluate(learner, set, future)?;
    single.epsilon_ms += ms_total;
    single.stages = admitted_per_stage;
    Ok(single)
}

/// Pseudo-labels the whole unlabelled pool regardless of confidence.
pub fn run_vanilla_ssl<L: Learner>(
    learner: &L,
    labelled: &LabeledDataset,
    unlabelled: &UnlabeledPool,
    future: &LabeledDataset,
    ledger: &BudgetLedger,
) -> Result<MethodOutcome, MethodError> {
    let single = pseudo_pipeline(learner, labelled, unlabelled, future, None, 1)?;
    Ok(single.into_outcome(ledger, Some(unlabelled)))
}

/// Admits pseudo labels with confidence `>= threshold`, once.
pub fn run_pseudo<L: Learner>(
    learner: &L,
    labelled: &LabeledDataset,
    unlabelled: &UnlabeledPool,
    future: &LabeledDataset,
    ledger: &BudgetLedger,
    threshold: f64,
) -> Result<MethodOutcome, MethodError> {
    let single = pseudo_pipeline(learner, labelled, unlabelled, future, Some(threshold), 1)?;
    Ok(single.into_outcome(ledger, Some(unlabelled)))
}

/// Admits pseudo labels with confidence `>= threshold`, then lets the
/// retrained model label the never-admitted remainder once more.
pub fn run_pseudo_iterated<L: Learner>(
    learner: &L,
    labelled: &LabeledDataset,
    unlabelled: &UnlabeledPool,
    future: &LabeledDataset,
    ledger: &BudgetLedger,
    threshold: f64,
) -> Result<MethodOutcome, MethodError> {
    let single = pseudo_pipeline(learner, labelled, unlabelled, future, Some(threshold), 2)?;
    Ok(single.into_outcome(ledger, Some(unlabelled)))
}

/// Labelled set after giving back half of its labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Halved {
    pub kept: LabeledDataset,
    pub removed: Vec<Sample>,
    /// Sum of the removed samples' labelling costs.
    pub restored_budget: f64,
}

/// Removes `floor(n_b / 2)` benign and `floor(n_m / 2)` malicious samples,
/// chosen uniformly, and returns their labelling cost to the budget.
pub fn halve_labelled(
    labelled: &LabeledDataset,
    scenario: &CostScenario,
    rng: &mut Stream,
) -> Result<Halved, MethodError> {
    let mut drop = vec![false; labelled.len()];
    let mut restored_budget = 0.0;
    for class in [Label::Benign, Label::Malicious] {
        let mut pos: Vec<usize> = labelled
            .samples()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class)
            .map(|(i, _)| i)
            .collect();
        if pos.len() < 2 {
            return Err(MethodError::TooFewToHalve {
                class,
                available: pos.len(),
            });
        }
        let k = pos.len() / 2;
        rng.partial_shuffle(&mut pos, k);
        for &p in &pos[..k] {
            drop[p] = true;
        }
        restored_budget += k as f64 * scenario.cost(class);
    }
    let mut kept = Vec::with_capacity(labelled.len());
    let mut removed = Vec::new();
    for (s, &d) in labelled.samples().iter().zip(&drop) {
        if d {
            removed.push(s.clone());
        } else {
            kept.push(s.clone());
        }
    }
    Ok(Halved {
        kept: LabeledDataset::new(format!("{}/halved", labelled.name()), labelled.dim(), kept)?,
        removed,
        restored_budget,
    })
}

/// Picks `q` suggestions: uniformly among band candidates, topped up
/// uniformly from the other remaining samples when the band runs short.
/// Returns pool indices and whether the band ran short.
fn draw_suggestions(
    candidates: &[usize],
    others: &[usize],
    q: usize,
    rng: &mut Stream,
) -> (Vec<usize>, bool) {
    let mut cand = candidates.to_vec();
    if cand.len() >= q {
        rng.partial_shuffle(&mut cand, q);
        cand.truncate(q);
        return (cand, false);
    }
    let mut rest = others.to_vec();
    let need = (q - cand.len()).min(rest.len());
    rng.partial_shuffle(&mut rest, need);
    cand.extend_from_slice(&rest[..need]);
    (cand, true)
}

/// Shared tail of the active pipelines: given the training set built so far
/// and band-filtered candidates, repeatedly draws oracle suggestions and
/// fits the final model.
#[allow(clippy::too_many_arguments)]
fn active_rounds<'a, L: Learner>(
    learner: &L,
    base: &MixedLabelledSet<'a>,
    pool: &'a UnlabeledPool,
    remaining: &[usize],
    preds: &[Prediction],
    band: Band,
    q: usize,
    repeats: usize,
    future: &LabeledDataset,
    support_ms: f64,
    rng: &mut Stream,
) -> Result<(Vec<RepeatOutcome>, MixedLabelledSet<'a>), MethodError> {
    let mut candidates = Vec::new();
    let mut others = Vec::new();
    for (&i, p) in remaining.iter().zip(preds) {
        if band.contains(p.confidence) {
            candidates.push(i);
        } else {
            others.push(i);
        }
    }
    let repeat_base = rng.next_u64();
    let mut outcomes = Vec::with_capacity(repeats);
    let mut last = None;
    for r in 0..repeats.max(1) {
        let mut rrng = Stream::derived(repeat_base, &[r as u64]);
        let (chosen, exhausted) = draw_suggestions(&candidates, &others, q, &mut rrng);
        let mut set = base.clone();
        for &i in &chosen {
            set.push_oracle(pool, i);
        }
        let single = fit_and_evaluate(learner, set, future)?;
        outcomes.push(RepeatOutcome {
            index: r,
            metrics: single.metrics,
            confusion: single.confusion,
            epsilon_ms: support_ms + single.epsilon_ms,
            oracle_ids: chosen.iter().map(|&i| pool.id(i)).collect(),
            band_candidates: candidates.len(),
            band_exhausted: exhausted,
        });
        last = Some(single.set);
    }
    Ok((outcomes, last.expect("at least one repeat")))
}

fn active_outcome(
    repeats: Vec<RepeatOutcome>,
    last: &MixedLabelledSet<'_>,
    mut ledger: BudgetLedger,
    q: usize,
    pool: &UnlabeledPool,
    stages: Vec<Vec<usize>>,
) -> MethodOutcome {
    let all: Vec<Metrics> = repeats.iter().map(|r| r.metrics).collect();
    let mut confusion = ConfusionCounts::default();
    for r in &repeats {
        confusion.tp += r.confusion.tp;
        confusion.fp += r.confusion.fp;
        confusion.tn += r.confusion.tn;
        confusion.fn_ += r.confusion.fn_;
    }
    let epsilon_ms = repeats.iter().map(|r| r.epsilon_ms).sum::<f64>() / repeats.len() as f64;
    let mut flags = Vec::new();
    if repeats.iter().any(|r| r.band_exhausted) {
        flags.push(RunFlag::BandExhausted);
    }
    if repeats.iter().any(|r| r.oracle_ids.len() < q) {
        flags.push(RunFlag::PoolExhausted);
    }
    let bought = repeats
        .iter()
        .map(|r| r.oracle_ids.len())
        .min()
        .unwrap_or(0);
    ledger.exhaust_standardized(bought);
    MethodOutcome {
        metrics: Metrics::mean(&all),
        confusion,
        epsilon_ms,
        training: TrainingSummary::of(last),
        ledger,
        flags,
        repeats,
        pseudo_stages: stages,
        pseudo_accuracy: pseudo_accuracy(last, pool),
        final_set: last.tags().to_vec(),
    }
}

/// Halves the labelled set and returns it with the ledger after the refund.
fn halve_with_ledger(
    inputs: &MethodInputs<'_>,
    rng: &mut Stream,
) -> Result<(Halved, BudgetLedger), MethodError> {
    let halved = halve_labelled(inputs.labelled, inputs.scenario, rng)?;
    let mut ledger = inputs.ledger.clone();
    for class in [Label::Benign, Label::Malicious] {
        let n = halved.removed.iter().filter(|s| s.label == class).count();
        ledger.refund(class, n, inputs.scenario);
    }
    Ok((halved, ledger))
}

/// Active learning by uncertainty band.
///
/// A support model fit on the halved labelled set scores the unlabelled
/// pool. The oracle then labels `q = |L| - |L_half|` samples drawn from the
/// requested band; the residual budget is spread evenly over them. Each of
/// the `repeats` draws trains and evaluates its own final model.
pub fn run_active<L: Learner>(
    learner: &L,
    inputs: &MethodInputs<'_>,
    band: Band,
    repeats: usize,
    rng: &mut Stream,
) -> Result<MethodOutcome, MethodError> {
    let pool = inputs.unlabelled;
    if pool.is_empty() {
        return Err(MethodError::EmptyUnlabelled);
    }
    let (halved, ledger) = halve_with_ledger(inputs, rng)?;
    let q = inputs.labelled.len() - halved.kept.len();
    let base = MixedLabelledSet::from_verified(&halved.kept);
    let all: Vec<usize> = (0..pool.len()).collect();
    let (preds, support_ms) = measure_epsilon(|| -> Result<_, LearnerError> {
        let support = learner.fit(base.rows())?;
        predict_indices(&support, pool, &all)
    });
    let preds = preds?;
    let (outcomes, last) = active_rounds(
        learner,
        &base,
        pool,
        &all,
        &preds,
        band,
        q,
        repeats,
        inputs.future,
        support_ms,
        rng,
    )?;
    Ok(active_outcome(outcomes, &last, ledger, q, pool, Vec::new()))
}

/// Pseudo-labelling followed by active learning.
///
/// The support model fit on the halved labelled set admits confident pseudo
/// labels; a second support model fit on that mixed set scores the rest of
/// the pool, and the oracle labels `q` band suggestions from it.
pub fn run_pseudo_active<L: Learner>(
    learner: &L,
    inputs: &MethodInputs<'_>,
    band: Band,
    threshold: f64,
    repeats: usize,
    rng: &mut Stream,
) -> Result<MethodOutcome, MethodError> {
    let pool = inputs.unlabelled;
    if pool.is_empty() {
        return Err(MethodError::EmptyUnlabelled);
    }
    let (halved, ledger) = halve_with_ledger(inputs, rng)?;
    let q = inputs.labelled.len() - halved.kept.len();
    let mut base = MixedLabelledSet::from_verified(&halved.kept);
    let all: Vec<usize> = (0..pool.len()).collect();
    let (res, support_ms) = measure_epsilon(|| -> Result<_, LearnerError> {
        let support = learner.fit(base.rows())?;
        let (admitted, rest) = admit(&support, pool, &all, Some(threshold), &mut base)?;
        let second = learner.fit(base.rows())?;
        let preds = predict_indices(&second, pool, &rest)?;
        Ok((admitted, rest, preds))
    });
    let (admitted, rest, preds) = res?;
    let (outcomes, last) = active_rounds(
        learner,
        &base,
        pool,
        &rest,
        &preds,
        band,
        q,
        repeats,
        inputs.future,
        support_ms,
        rng,
    )?;
    Ok(active_outcome(
        outcomes,
        &last,
        ledger,
        q,
        pool,
        vec![admitted],
    ))
}

/// Runs `spec` on one cell. `seed` drives the method's own random draws
/// (halving and suggestions); the learner carries its own seed.
pub fn run_method<L: Learner>(
    spec: &MethodSpec,
    learner: &L,
    inputs: &MethodInputs<'_>,
    seed: u64,
) -> Result<MethodOutcome, MethodError> {
    let mut rng = Stream::new(seed);
    let t = spec.pseudo_threshold;
    match spec.kind {
        MethodKind::SlLower => run_sl_lower(learner, inputs.labelled, inputs.future, inputs.ledger),
        MethodKind::SlUpper => {
            run_sl_upper(learner, inputs.trainpool, inputs.future, inputs.ledger)
        }
        MethodKind::SslVanilla => run_vanilla_ssl(
            learner,
            inputs.labelled,
            inputs.unlabelled,
            inputs.future,
            inputs.ledger,
        ),
        MethodKind::Pseudo => run_pseudo(
            learner,
            inputs.labelled,
            inputs.unlabelled,
            inputs.future,
            inputs.ledger,
            t,
        ),
        MethodKind::PseudoIterated => run_pseudo_iterated(
            learner,
            inputs.labelled,
            inputs.unlabelled,
            inputs.future,
            inputs.ledger,
            t,
        ),
        MethodKind::Active(band) => {
            run_active(learner, inputs, band, spec.active_repeats, &mut rng)
        }
        MethodKind::PseudoActive(band) => {
            run_pseudo_active(learner, inputs, band, t, spec.active_repeats, &mut rng)
        }
    }
}
