//! Generate a synthetic two-class dataset, write it as CSV and load it back.
//!
//! cargo run --example gen_dataset -- /tmp/synth.csv

use semisup_bench::dataset::{class_ratio, load_csv, write_csv};
use semisup_bench::synth::{generate, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "synth.csv".into());
    let spec = SynthSpec {
        n_benign: 800,
        n_malicious: 200,
        dim: 5,
        separation: 2.5,
        seed: 7,
    };
    let d = generate(&spec)?;
    write_csv(&d, &out, "label")?;
    let back = load_csv(&out, "label")?;
    assert_eq!(back.samples(), d.samples());
    println!(
        "wrote {} rows ({} features, ratio {}) to {out}; Bayes error {:.4}",
        back.len(),
        back.dim(),
        class_ratio(&back),
        spec.bayes_error()
    );
    Ok(())
}
