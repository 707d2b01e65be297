//! Detection metrics, return on investment, and the Wilcoxon rank-sum test
//! used to compare populations of runs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Label;
use crate::engine::RunRecord;
use crate::methods::{MethodKind, MethodSpec};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("population is empty")]
    EmptyPopulation,
    #[error("method `{0}` has no successful records")]
    MissingMethod(String),
    #[error(
        "populations of `{a}` and `{b}` are not drawn from the same cells ({na} vs {nb} records)"
    )]
    PopulationMismatch {
        a: String,
        b: String,
        na: usize,
        nb: usize,
    },
    #[error("total budget must be > 0, got {0}")]
    NonPositiveBudget(f64),
}

/// Binary confusion counts; positive means malicious.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_pairs<I: IntoIterator<Item = (Label, Label)>>(truth_predicted: I) -> Self {
        let mut c = Self::default();
        for (truth, predicted) in truth_predicted {
            match (truth.is_malicious(), predicted.is_malicious()) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

impl Metrics {
    /// Component-wise mean.
    pub fn mean(items: &[Metrics]) -> Metrics {
        if items.is_empty() {
            return Metrics::default();
        }
        let n = items.len() as f64;
        Metrics {
            f1: items.iter().map(|m| m.f1).sum::<f64>() / n,
            precision: items.iter().map(|m| m.precision).sum::<f64>() / n,
            recall: items.iter().map(|m| m.recall).sum::<f64>() / n,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1. Every 0/0 evaluates to 0.
pub fn metrics(c: &ConfusionCounts) -> Metrics {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics {
        f1,
        precision,
        recall,
    }
}

/// Standard normal CDF.
///
/// Uses the Chebyshev fit of `erfc` from Numerical Recipes (`erfcc`), whose
/// fractional error is below 1.2e-7 for every argument:
/// `Phi(z) = erfc(-z / sqrt(2)) / 2`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    const C: [f64; 10] = [
        -1.265_512_23,
        1.000_023_68,
        0.374_091_96,
        0.096_784_18,
        -0.186_288_06,
        0.278_868_07,
        -1.135_203_98,
        1.488_515_87,
        -0.822_152_23,
        0.170_872_77,
    ];
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = C.iter().rev().fold(0.0, |acc, &c| c + t * acc);
    let ans = t * (-z * z + poly).exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tails {
    /// Alternative: the first population tends to exceed the second.
    One,
    Two,
}

impl fmt::Display for Tails {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tails::One => "one",
            Tails::Two => "two",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AcceptNull,
    RejectNull,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::AcceptNull => "accept_h0",
            Verdict::RejectNull => "reject_h0",
        })
    }
}

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Below this many elements per side the normal approximation is flagged.
pub const SMALL_SAMPLE: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    pub z: f64,
    pub p: f64,
    /// Size of the first population; in method comparisons both sides share it.
    pub pop_size: usize,
    pub effect_size: f64,
    pub verdict: Verdict,
    pub alpha: f64,
    pub tails: Tails,
    pub small_sample: bool,
}

pub fn effect_size(z: f64, pop_size: usize) -> f64 {
    z / (pop_size as f64).sqrt()
}

/// Midranks of `values` (1-based) and the tie term `sum(t^3 - t)`.
fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i..j share the average of ranks i+1..=j.
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

/// Wilcoxon rank-sum test with the normal approximation.
///
/// Ties get midranks and a tie-corrected variance; there is no continuity
/// correction. The one-tailed p-value is for the alternative "`a` exceeds
/// `b`".
pub fn wilcoxon_ranksum(
    a: &[f64],
    b: &[f64],
    tails: Tails,
    alpha: f64,
) -> Result<StatTestResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptyPopulation);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let w_a: f64 = ranks[..a.len()].iter().sum();
    let mean = na * (n + 1.0) / 2.0;
    let var = na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    let z = if var > 0.0 {
        (w_a - mean) / var.sqrt()
    } else {
        0.0
    };
    let p = match tails {
        Tails::Two => (2.0 * normal_cdf(-z.abs())).min(1.0),
        Tails::One => normal_cdf(-z),
    };
    Ok(StatTestResult {
        z,
        p,
        pop_size: a.len(),
        effect_size: effect_size(z, a.len()),
        verdict: if p <= alpha {
            Verdict::RejectNull
        } else {
            Verdict::AcceptNull
        },
        alpha,
        tails,
        small_sample: a.len() < SMALL_SAMPLE || b.len() < SMALL_SAMPLE,
    })
}

/// Development-cost model: `total = unlabelled_cost + labelling budget +
/// epsilon_ms * epsilon_rate`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    /// Fixed cost of acquiring the unlabelled data.
    pub unlabelled_cost: f64,
    /// Budget units per millisecond of pipeline wall time.
    pub epsilon_rate: f64,
}

impl CostModel {
    pub fn total(&self, budget: f64, epsilon_ms: f64) -> f64 {
        self.unlabelled_cost + budget + epsilon_ms * self.epsilon_rate
    }
}

/// Performance per unit of development budget.
pub fn roi(mu: f64, budget_total: f64) -> Result<f64, StatsError> {
    if budget_total.is_nan() || budget_total <= 0.0 {
        return Err(StatsError::NonPositiveBudget(budget_total));
    }
    Ok(mu / budget_total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenefitVerdict {
    /// The labelled-only and full-pool baselines are too close: unlabelled
    /// data cannot pay off here.
    InvestmentNotWarranted,
    Beneficial,
    NotBeneficial,
}

impl fmt::Display for BenefitVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenefitVerdict::InvestmentNotWarranted => "investment_not_warranted",
            BenefitVerdict::Beneficial => "beneficial",
            BenefitVerdict::NotBeneficial => "not_beneficial",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareOptions {
    pub tails: Tails,
    pub alpha: f64,
    /// Minimum mean-F1 gap between the upper and lower baselines.
    pub min_gap: f64,
    pub cost_model: CostModel,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            tails: Tails::Two,
            alpha: DEFAULT_ALPHA,
            min_gap: 0.05,
            cost_model: CostModel::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub baseline: String,
    pub challenger: String,
    pub test: StatTestResult,
    pub mean_f1_baseline: f64,
    pub mean_f1_challenger: f64,
    /// Mean F1 of the full-pool baseline minus that of the labelled-only one.
    pub baseline_gap: f64,
    pub roi_challenger: f64,
    pub roi_lower: f64,
    pub roi_vanilla: f64,
    pub benefit: BenefitVerdict,
}

type CellKey = (u64, String, usize, usize);

fn cell_key(r: &RunRecord) -> CellKey {
    (r.budget.to_bits(), r.scenario.clone(), r.k_index, r.n_index)
}

/// Successful records of one method, keyed by cell.
fn population<'r>(
    records: &'r [RunRecord],
    method: &MethodSpec,
) -> Result<BTreeMap<CellKey, &'r RunRecord>, StatsError> {
    let name = method.name();
    let pop: BTreeMap<_, _> = records
        .iter()
        .filter(|r| r.method == name && r.is_ok())
        .map(|r| (cell_key(r), r))
        .collect();
    if pop.is_empty() {
        return Err(StatsError::MissingMethod(name));
    }
    Ok(pop)
}

fn mean_f1(pop: &BTreeMap<CellKey, &RunRecord>) -> f64 {
    pop.values().map(|r| r.f1).sum::<f64>() / pop.len() as f64
}

fn mean_roi(pop: &BTreeMap<CellKey, &RunRecord>, model: &CostModel) -> Result<f64, StatsError> {
    let mut sum = 0.0;
    for r in pop.values() {
        sum += roi(r.f1, model.total(r.budget, r.epsilon_ms))?;
    }
    Ok(sum / pop.len() as f64)
}

/// Compares two methods over the same cells and applies the benefit rule:
/// unlabelled data is beneficial only if the full-pool baseline beats the
/// labelled-only baseline by more than `min_gap` and the challenger's ROI
/// exceeds that of both the labelled-only baseline and vanilla SsL.
pub fn compare_methods(
    records: &[RunRecord],
    baseline: &MethodSpec,
    challenger: &MethodSpec,
    opts: &CompareOptions,
) -> Result<Comparison, StatsError> {
    let base = population(records, baseline)?;
    let chal = population(records, challenger)?;
    if base.len() != chal.len() || !base.keys().eq(chal.keys()) {
        return Err(StatsError::PopulationMismatch {
            a: baseline.name(),
            b: challenger.name(),
            na: base.len(),
            nb: chal.len(),
        });
    }
    let a: Vec<f64> = chal.values().map(|r| r.f1).collect();
    let b: Vec<f64> = base.values().map(|r| r.f1).collect();
    // Challenger first: a positive z means the challenger scores higher.
    let test = wilcoxon_ranksum(&a, &b, opts.tails, opts.alpha)?;

    let lower = population(records, &MethodSpec::new(MethodKind::SlLower))?;
    let upper = population(records, &MethodSpec::new(MethodKind::SlUpper))?;
    let vanilla = population(records, &MethodSpec::new(MethodKind::SslVanilla))?;
    let baseline_gap = mean_f1(&upper) - mean_f1(&lower);
    let roi_challenger = mean_roi(&chal, &opts.cost_model)?;
    let roi_lower = mean_roi(&lower, &opts.cost_model)?;
    let roi_vanilla = mean_roi(&vanilla, &opts.cost_model)?;
    let benefit = if baseline_gap <= opts.min_gap {
        BenefitVerdict::InvestmentNotWarranted
    } else if roi_challenger > roi_lower && roi_challenger > roi_vanilla {
        BenefitVerdict::Beneficial
    } else {
        BenefitVerdict::NotBeneficial
    };
    Ok(Comparison {
        baseline: baseline.name(),
        challenger: challenger.name(),
        test,
        mean_f1_baseline: mean_f1(&base),
        mean_f1_challenger: mean_f1(&chal),
        baseline_gap,
        roi_challenger,
        roi_lower,
        roi_vanilla,
        benefit,
    })
}
