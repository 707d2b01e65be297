//! Run a small campaign end to end and write results.csv, stats.csv and
//! transparency.json.
//!
//! cargo run --release --example campaign -- /tmp/campaign-out

use semisup_bench::cli::run_config;
use semisup_bench::engine::{default_workers, CampaignConfig, DatasetSource};
use semisup_bench::synth::SynthSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "campaign-out".into());
    let mut cfg = CampaignConfig::new(
        DatasetSource::Synthetic(SynthSpec {
            n_benign: 1500,
            n_malicious: 1500,
            dim: 6,
            separation: 1.8,
            seed: 11,
        }),
        vec![40.0, 80.0],
        3,
        2,
        2024,
    );
    cfg.learner.n_trees = 30;
    let res = run_config(&cfg, out.as_ref(), default_workers())?;
    for w in &res.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", res.summary);
    println!("artifacts in {out}");
    Ok(())
}
