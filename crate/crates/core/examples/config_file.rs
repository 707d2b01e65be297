//! Parse a TOML campaign config and list the cells it expands to.

use semisup_bench::config::parse_config;

const CONFIG: &str = r#"
master_seed = 42
n = 10
k = 5
budgets = [100, 200, 400, 800]
methods = ["sl_lower", "sl_upper", "ssl_vanilla", "pseudo", "pseudo_iterated", "active_other"]

[dataset.synthetic]
n_benign = 10000
n_malicious = 10000
dim = 10
separation = 2.0
seed = 1

[[scenarios]]
name = "balanced"
cost_benign = 1
cost_malicious = 1

[[scenarios]]
name = "unbalanced"
cost_benign = 1
cost_malicious = 2
budgets = [200, 400, 800, 1600]

[learner]
n_trees = 100
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = parse_config(CONFIG)?;
    cfg.validate()?;
    let cells = cfg.cells();
    println!(
        "{} methods x {} cells x {} runs = {} records",
        cfg.methods.len(),
        cells.len(),
        cfg.n * cfg.k,
        cfg.methods.len() * cells.len() * cfg.n * cfg.k
    );
    for c in cells {
        println!(
            "{:<11} budget {:>5} min_benign {:>4} seed {:#018x}",
            c.scenario.name, c.budget, c.min_benign, c.seed
        );
    }
    Ok(())
}
