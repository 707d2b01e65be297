use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use semisup_bench::cli::{cmd_gen, cmd_plotdata, cmd_run, CliError};
use semisup_bench::synth::SynthSpec;

#[derive(Parser)]
#[command(version, about = "Budget-aware benchmark for semisupervised detectors")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign and write results.csv, stats.csv and transparency.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, env = "SEMISUP_WORKERS", default_value_t = 1)]
        workers: usize,
    },
    /// Aggregate a results CSV into mean F1 per (scenario, budget, method).
    Plotdata {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic two-class Gaussian dataset.
    Gen {
        #[arg(long)]
        benign: usize,
        #[arg(long)]
        malicious: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        sep: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run {
            config,
            out_dir,
            workers,
        } => {
            let out = cmd_run(&config, &out_dir, workers)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", out.summary);
            println!("wrote {}", out.results.display());
            println!("wrote {}", out.stats.display());
            println!("wrote {}", out.transparency.display());
        }
        Command::Plotdata { results, out } => {
            let n = cmd_plotdata(&results, &out)?;
            println!("wrote {n} rows to {}", out.display());
        }
        Command::Gen {
            benign,
            malicious,
            dim,
            sep,
            seed,
            out,
        } => {
            let spec = SynthSpec {
                n_benign: benign,
                n_malicious: malicious,
                dim,
                separation: sep,
                seed,
            };
            let n = cmd_gen(&spec, &out)?;
            println!("wrote {n} rows to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.one_line());
            ExitCode::from(2)
        }
    }
}
