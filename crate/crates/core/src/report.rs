//! Output artifacts: results CSV, statistics CSV, transparency JSON and
//! plot data.
//!
//! Results CSV header (one row per method per run):
//!
//! ```text
//! method,budget,scenario,k_index,n_index,repeats,status,error,labelled,
//! labelled_benign,labelled_malicious,unlabelled,trainpool,trainpool_benign,
//! trainpool_malicious,future,future_benign,future_malicious,ratio_labelled,
//! ratio_trainpool,ratio_future,train_size,train_verified,train_oracle,
//! train_pseudo,pseudo_accuracy,verified_spend,f1,precision,recall,tp,fp,tn,
//! fn,flags,seed_split,seed_compose,seed_learner,seed_method,epsilon_ms
//! ```
//!
//! Statistics CSV header:
//! `dataset,baseline,challenger,tails,pop_size,z,p,effect_size,verdict,mean_f1_baseline,mean_f1_challenger,baseline_gap,roi_challenger,roi_lower,roi_vanilla,benefit`
//!
//! Plot-data CSV header: `scenario,budget,method,mean_f1,std,count`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::ClassCounts;
use crate::engine::{CampaignConfig, CampaignResults, DatasetSource, RepeatRecord, RunRecord};
use crate::learner::LearnerConfig;
use crate::stats::Comparison;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ReportError + '_ {
    move |source| ReportError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, ReportError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize()
        .map(|row| row.map_err(csv_err(path)))
        .collect()
}

pub fn write_results_csv(records: &[RunRecord], path: &Path) -> Result<(), ReportError> {
    write_rows(records, path)
}

pub fn read_results_csv(path: &Path) -> Result<Vec<RunRecord>, ReportError> {
    read_rows(path)
}

/// Drops every column whose header ends in `epsilon_ms`. Used to compare
/// results files, whose timing columns differ between executions.
pub fn strip_epsilon_columns(csv_text: &str) -> String {
    let mut lines = csv_text.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let keep: Vec<bool> = header
        .split(',')
        .map(|h| !h.ends_with("epsilon_ms"))
        .collect();
    let mut out = String::new();
    for line in std::iter::once(header).chain(lines) {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(line.as_bytes());
        let fields: Vec<String> = match rdr.records().next() {
            Some(Ok(rec)) => rec.iter().map(str::to_string).collect(),
            _ => vec![line.to_string()],
        };
        let kept: Vec<&str> = fields
            .iter()
            .zip(keep.iter().chain(std::iter::repeat(&true)))
            .filter(|(_, &k)| k)
            .map(|(f, _)| f.as_str())
            .collect();
        out.push_str(&kept.join(","));
        out.push('\n');
    }
    out
}

/// One row of the statistics CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub dataset: String,
    pub baseline: String,
    pub challenger: String,
    pub tails: String,
    pub pop_size: usize,
    pub z: f64,
    pub p: f64,
    pub effect_size: f64,
    pub verdict: String,
    pub mean_f1_baseline: f64,
    pub mean_f1_challenger: f64,
    pub baseline_gap: f64,
    pub roi_challenger: f64,
    pub roi_lower: f64,
    pub roi_vanilla: f64,
    pub benefit: String,
}

impl StatsRow {
    pub fn new(dataset: &str, c: &Comparison) -> Self {
        Self {
            dataset: dataset.to_string(),
            baseline: c.baseline.clone(),
            challenger: c.challenger.clone(),
            tails: c.test.tails.to_string(),
            pop_size: c.test.pop_size,
            z: c.test.z,
            p: c.test.p,
            effect_size: c.test.effect_size,
            verdict: c.test.verdict.to_string(),
            mean_f1_baseline: c.mean_f1_baseline,
            mean_f1_challenger: c.mean_f1_challenger,
            baseline_gap: c.baseline_gap,
            roi_challenger: c.roi_challenger,
            roi_lower: c.roi_lower,
            roi_vanilla: c.roi_vanilla,
            benefit: c.benefit.to_string(),
        }
    }
}

pub fn write_stats_csv(rows: &[StatsRow], path: &Path) -> Result<(), ReportError> {
    write_rows(rows, path)
}

/// One row of the plot-data CSV: the F1 population of a method in one
/// (scenario, budget) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub scenario: String,
    pub budget: f64,
    pub method: String,
    pub mean_f1: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
}

/// Aggregates successful records per (scenario, budget, method), keeping
/// the first-seen order of scenarios and methods and ascending budgets.
pub fn plot_data(records: &[RunRecord]) -> Vec<PlotRow> {
    let mut scenarios: Vec<&str> = Vec::new();
    let mut methods: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<(usize, u64, usize), Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        let si = position_or_push(&mut scenarios, &r.scenario);
        let mi = position_or_push(&mut methods, &r.method);
        groups
            .entry((si, r.budget.to_bits(), mi))
            .or_default()
            .push(r.f1);
    }
    groups
        .into_iter()
        .map(|((si, bits, mi), f1s)| {
            let n = f1s.len() as f64;
            let mean = f1s.iter().sum::<f64>() / n;
            let var = f1s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            PlotRow {
                scenario: scenarios[si].to_string(),
                budget: f64::from_bits(bits),
                method: methods[mi].to_string(),
                mean_f1: mean,
                std: var.sqrt(),
                count: f1s.len(),
            }
        })
        .collect()
}

fn position_or_push<'a>(v: &mut Vec<&'a str>, s: &'a str) -> usize {
    match v.iter().position(|x| *x == s) {
        Some(i) => i,
        None => {
            v.push(s);
            v.len() - 1
        }
    }
}

pub fn write_plot_csv(rows: &[PlotRow], path: &Path) -> Result<(), ReportError> {
    write_rows(rows, path)
}

/// Absolute and relative (to the source dataset) size of one set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetComposition {
    pub size: usize,
    pub benign: usize,
    pub malicious: usize,
    pub relative_size: f64,
    pub ratio: String,
}

impl SetComposition {
    fn new(c: ClassCounts, total: usize) -> Self {
        Self {
            size: c.total(),
            benign: c.benign,
            malicious: c.malicious,
            relative_size: if total == 0 {
                0.0
            } else {
                c.total() as f64 / total as f64
            },
            ratio: c.ratio().map(|r| r.to_string()).unwrap_or_default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedManifest {
    pub split: u64,
    pub compose: u64,
    pub learner: u64,
    pub method: u64,
}

/// Composition of one run, one entry per results row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunComposition {
    pub method: String,
    pub budget: f64,
    pub scenario: String,
    pub k_index: usize,
    pub n_index: usize,
    pub status: String,
    pub labelled: SetComposition,
    pub unlabelled: SetComposition,
    pub trainpool: SetComposition,
    pub future: SetComposition,
    pub seeds: SeedManifest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransparencyReport {
    pub framework: String,
    pub version: String,
    pub dataset: String,
    pub dataset_source: DatasetSource,
    pub source: SetComposition,
    pub master_seed: u64,
    pub n: usize,
    pub k: usize,
    pub test_fraction: f64,
    pub learner: LearnerConfig,
    pub methods: Vec<String>,
    pub warnings: Vec<String>,
    pub runs: Vec<RunComposition>,
    pub active_repeats: Vec<RepeatRecord>,
}

impl TransparencyReport {
    pub fn new(cfg: &CampaignConfig, res: &CampaignResults) -> Self {
        let total = res.dataset_counts.total();
        let runs = res
            .records
            .iter()
            .map(|r| {
                let labelled = ClassCounts {
                    benign: r.labelled_benign,
                    malicious: r.labelled_malicious,
                };
                let trainpool = ClassCounts {
                    benign: r.trainpool_benign,
                    malicious: r.trainpool_malicious,
                };
                let unlabelled = ClassCounts {
                    benign: trainpool.benign.saturating_sub(labelled.benign),
                    malicious: trainpool.malicious.saturating_sub(labelled.malicious),
                };
                RunComposition {
                    method: r.method.clone(),
                    budget: r.budget,
                    scenario: r.scenario.clone(),
                    k_index: r.k_index,
                    n_index: r.n_index,
                    status: r.status.clone(),
                    labelled: SetComposition::new(labelled, total),
                    unlabelled: SetComposition::new(unlabelled, total),
                    trainpool: SetComposition::new(trainpool, total),
                    future: SetComposition::new(
                        ClassCounts {
                            benign: r.future_benign,
                            malicious: r.future_malicious,
                        },
                        total,
                    ),
                    seeds: SeedManifest {
                        split: r.seed_split,
                        compose: r.seed_compose,
                        learner: r.seed_learner,
                        method: r.seed_method,
                    },
                }
            })
            .collect();
        Self {
            framework: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            dataset: res.dataset_name.clone(),
            dataset_source: cfg.dataset.clone(),
            source: SetComposition::new(res.dataset_counts, total),
            master_seed: cfg.master_seed,
            n: cfg.n,
            k: cfg.k,
            test_fraction: cfg.test_fraction,
            learner: cfg.learner.clone(),
            methods: cfg.methods.iter().map(|m| m.name()).collect(),
            warnings: res.warnings.clone(),
            runs,
            active_repeats: res.repeats.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), ReportError> {
        let file = std::fs::File::create(path).map_err(io_err(path))?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n").map_err(io_err(path))?;
        w.flush().map_err(io_err(path))
    }
}

/// Mean F1 per method over all successful records, in first-seen order.
pub fn mean_f1_by_method(records: &[RunRecord]) -> Vec<(String, f64, usize)> {
    let mut out: Vec<(String, f64, usize)> = Vec::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        match out.iter_mut().find(|(m, _, _)| *m == r.method) {
            Some(e) => {
                e.1 += r.f1;
                e.2 += 1;
            }
            None => out.push((r.method.clone(), r.f1, 1)),
        }
    }
    for e in &mut out {
        e.1 /= e.2 as f64;
    }
    out
}

/// Text table in the layout of the usual baseline-vs-best comparison.
pub fn summary_table(rows: &[StatsRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12} {:<10} {:<22} {:<5} {:>8} {:>9} {:>10} {:>8}  {:<10} benefit",
        "dataset", "baseline", "challenger", "tails", "pop", "z", "p", "effect", "verdict"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<12} {:<10} {:<22} {:<5} {:>8} {:>9.3} {:>10.3e} {:>8.4}  {:<10} {}",
            r.dataset,
            r.baseline,
            r.challenger,
            r.tails,
            r.pop_size,
            r.z,
            r.p,
            r.effect_size,
            r.verdict,
            r.benefit
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(method: &str, budget: f64, f1: f64) -> RunRecord {
        let line = "method,budget,scenario,k_index,n_index,repeats,status,error,labelled,labelled_benign,labelled_malicious,unlabelled,trainpool,trainpool_benign,trainpool_malicious,future,future_benign,future_malicious,ratio_labelled,ratio_trainpool,ratio_future,train_size,train_verified,train_oracle,train_pseudo,pseudo_accuracy,verified_spend,f1,precision,recall,tp,fp,tn,fn,flags,seed_split,seed_compose,seed_learner,seed_method,epsilon_ms\n";
        let row = format!("{method},{budget},balanced,0,0,0,ok,,10,5,5,90,100,50,50,25,12,13,50:50,50:50,48:52,10,10,0,0,,10,{f1},1,1,1,0,1,0,,1,2,3,4,0.5\n");
        let text = format!("{line}{row}");
        let mut r = csv::Reader::from_reader(text.as_bytes());
        r.deserialize().next().unwrap().unwrap()
    }

    #[test]
    fn single_record_plot_row() {
        let rows = plot_data(&[rec("sl_lower", 100.0, 0.7)]);
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].mean_f1, rows[0].std, rows[0].count), (0.7, 0.0, 1));
    }

    #[test]
    fn two_records_average() {
        let rows = plot_data(&[rec("pseudo", 100.0, 0.4), rec("pseudo", 100.0, 0.6)]);
        assert_eq!(rows.len(), 1);
        assert!((rows[0].mean_f1 - 0.5).abs() < 1e-12);
        assert!((rows[0].std - 0.1).abs() < 1e-12);
        assert_eq!(rows[0].count, 2);
    }

    #[test]
    fn plot_rows_sorted_by_budget() {
        let rows = plot_data(&[rec("a", 200.0, 0.5), rec("a", 100.0, 0.5)]);
        assert_eq!(rows[0].budget, 100.0);
        assert_eq!(rows[1].budget, 200.0);
    }

    #[test]
    fn strip_removes_only_timing() {
        let text = "a,epsilon_ms,b\n1,2.5,\"x,y\"\n";
        assert_eq!(strip_epsilon_columns(text), "a,b\n1,x,y\n");
    }

    #[test]
    fn results_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let recs = vec![rec("sl_lower", 100.0, 0.25), rec("pseudo", 50.5, 1.0 / 3.0)];
        write_results_csv(&recs, &path).unwrap();
        assert_eq!(read_results_csv(&path).unwrap(), recs);
    }
}
