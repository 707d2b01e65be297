//! Run all eleven pipelines on one shared partition and compare what each
//! trained on.

use semisup_bench::dataset::{compose_labelled, split_future, CostScenario, PartitionSpec};
use semisup_bench::learner::{LearnerConfig, RandomForest};
use semisup_bench::methods::{run_method, MethodInputs, MethodSpec};
use semisup_bench::rng::{derive_seed, Stream};
use semisup_bench::synth::{generate, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = generate(&SynthSpec {
        n_benign: 2000,
        n_malicious: 2000,
        dim: 6,
        separation: 1.8,
        seed: 5,
    })?;
    let scenario = CostScenario::unbalanced();
    let spec = PartitionSpec::new(200.0, 100, scenario.clone(), 5);
    let mut rng = Stream::new(spec.seed);
    let (future, trainpool) = split_future(&d, &spec, &mut rng)?;
    let (labelled, unlabelled, ledger) = compose_labelled(&trainpool, &spec, &mut rng)?;
    let inputs = MethodInputs {
        labelled: &labelled,
        unlabelled: &unlabelled,
        trainpool: &trainpool,
        future: &future,
        ledger: &ledger,
        scenario: &scenario,
    };
    let learner = RandomForest::new(LearnerConfig {
        n_trees: 50,
        seed: 5,
        ..LearnerConfig::default()
    });
    println!(
        "labelled {} ({}), unlabelled {}",
        labelled.len(),
        labelled.counts().ratio().unwrap(),
        unlabelled.len()
    );
    println!(
        "{:<20} {:>6} {:>8} {:>6} {:>6} {:>7} {:>8}  flags",
        "method", "f1", "verified", "oracle", "pseudo", "spend", "eps_ms"
    );
    for m in MethodSpec::all() {
        let o = run_method(&m, &learner, &inputs, derive_seed(5, &[m.kind.id()]))?;
        let flags: Vec<String> = o.flags.iter().map(ToString::to_string).collect();
        println!(
            "{:<20} {:>6.3} {:>8} {:>6} {:>6} {:>7.1} {:>8.1}  {}",
            m.name(),
            o.metrics.f1,
            o.training.verified,
            o.training.oracle,
            o.training.pseudo,
            o.verified_spend(),
            o.epsilon_ms,
            flags.join("|")
        );
    }
    Ok(())
}
