//! Decide whether unlabelled data pays off: rank-sum test plus the
//! return-on-investment rule against both baselines.

use semisup_bench::engine::{run_campaign, CampaignConfig, DatasetSource};
use semisup_bench::methods::{MethodKind, MethodSpec};
use semisup_bench::stats::{compare_methods, CompareOptions, CostModel};
use semisup_bench::synth::SynthSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = CampaignConfig::new(
        DatasetSource::Synthetic(SynthSpec {
            n_benign: 1500,
            n_malicious: 1500,
            dim: 6,
            separation: 1.5,
            seed: 4,
        }),
        vec![40.0],
        4,
        3,
        9,
    );
    cfg.methods = [
        MethodKind::SlLower,
        MethodKind::SlUpper,
        MethodKind::SslVanilla,
        MethodKind::Pseudo,
        MethodKind::Active(semisup_bench::Band::Low),
    ]
    .into_iter()
    .map(MethodSpec::new)
    .collect();
    cfg.learner.n_trees = 30;
    let res = run_campaign(&cfg, 1)?;
    let lower = MethodSpec::new(MethodKind::SlLower);
    for cost_model in [
        CostModel::default(),
        CostModel {
            unlabelled_cost: 0.0,
            epsilon_rate: 0.05,
        },
    ] {
        println!("cost model {cost_model:?}");
        for m in &cfg.methods[2..] {
            let opts = CompareOptions {
                cost_model,
                ..CompareOptions::default()
            };
            let c = compare_methods(&res.records, &lower, m, &opts)?;
            println!(
                "  {:<12} mean F1 {:.3} vs {:.3}  p={:.3} {}  ROI {:.5} (lower {:.5}, vanilla {:.5}) -> {}",
                c.challenger,
                c.mean_f1_challenger,
                c.mean_f1_baseline,
                c.test.p,
                c.test.verdict,
                c.roi_challenger,
                c.roi_lower,
                c.roi_vanilla,
                c.benefit
            );
        }
    }
    Ok(())
}
