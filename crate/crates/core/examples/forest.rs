//! Train the reference random forest and inspect vote confidences and the
//! active-learning bands they fall into.

use semisup_bench::dataset::{split_future, CostScenario, PartitionSpec};
use semisup_bench::learner::{rows_of, Classifier, Forest, LearnerConfig};
use semisup_bench::methods::Band;
use semisup_bench::rng::Stream;
use semisup_bench::stats::{metrics, ConfusionCounts};
use semisup_bench::synth::{generate, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = generate(&SynthSpec {
        n_benign: 1000,
        n_malicious: 1000,
        dim: 6,
        separation: 1.5,
        seed: 3,
    })?;
    let spec = PartitionSpec::new(10.0, 1, CostScenario::balanced(), 3);
    let (future, train) = split_future(&d, &spec, &mut Stream::new(3))?;
    let cfg = LearnerConfig {
        n_trees: 100,
        seed: 3,
        ..LearnerConfig::default()
    };
    let forest = Forest::fit(&rows_of(&train), &cfg)?;
    let depth = forest.trees().iter().map(|t| t.depth()).max().unwrap_or(0);
    println!(
        "{} trees, max depth {depth}, trained on {} ({})",
        forest.trees().len(),
        forest.train_size(),
        forest.train_ratio()
    );

    let view: Vec<&[f64]> = future
        .samples()
        .iter()
        .map(|s| s.features.as_slice())
        .collect();
    let preds = forest.predict(&view)?;
    let c = ConfusionCounts::from_pairs(
        future
            .samples()
            .iter()
            .zip(&preds)
            .map(|(s, p)| (s.label, p.label)),
    );
    let m = metrics(&c);
    println!(
        "test F1 {:.4}, precision {:.4}, recall {:.4}",
        m.f1, m.precision, m.recall
    );
    for band in Band::ALL {
        let n = preds.iter().filter(|p| band.contains(p.confidence)).count();
        println!("band {band:?}: {n} predictions");
    }
    Ok(())
}
