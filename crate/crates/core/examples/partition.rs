//! Split a dataset into future and training sets, then buy a labelled set
//! under each standard cost scenario.

use semisup_bench::dataset::{compose_labelled, split_future, CostScenario, PartitionSpec};
use semisup_bench::rng::Stream;
use semisup_bench::synth::{generate, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = generate(&SynthSpec {
        n_benign: 3000,
        n_malicious: 1000,
        dim: 4,
        separation: 2.0,
        seed: 1,
    })?;
    println!(
        "{:<16} {:>7} {:>5} {:>5} {:>6} {:>7} {:>8}",
        "scenario", "budget", "L_b", "L_m", "|U|", "|F|", "residual"
    );
    for scenario in CostScenario::standard() {
        for base in [100.0, 200.0, 400.0, 800.0] {
            let budget = base * (1.0 + scenario.cost_malicious) / 2.0;
            let min_benign = (budget / (2.0 * scenario.cost_benign)) as usize;
            let spec = PartitionSpec::new(budget, min_benign, scenario.clone(), 42);
            let mut rng = Stream::new(spec.seed);
            let (future, pool) = split_future(&d, &spec, &mut rng)?;
            let (labelled, unlabelled, ledger) = compose_labelled(&pool, &spec, &mut rng)?;
            let c = labelled.counts();
            println!(
                "{:<16} {:>7} {:>5} {:>5} {:>6} {:>7} {:>8}",
                scenario.name,
                budget,
                c.benign,
                c.malicious,
                unlabelled.len(),
                future.len(),
                ledger.residual()
            );
        }
    }
    Ok(())
}
