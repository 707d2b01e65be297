//! Aggregate a results CSV into the long plot-data layout: one row per
//! (scenario, budget, method) with mean and spread of F1.
//!
//! cargo run --example plotdata -- results.csv plot.csv

use semisup_bench::cli::cmd_plotdata;

fn main() {
    let mut args = std::env::args().skip(1);
    let (Some(results), Some(out)) = (args.next(), args.next()) else {
        eprintln!("usage: plotdata <results.csv> <out.csv>");
        std::process::exit(2);
    };
    match cmd_plotdata(results.as_ref(), out.as_ref()) {
        Ok(n) => println!("{n} rows -> {out}"),
        Err(e) => {
            eprintln!("{}", e.one_line());
            std::process::exit(1);
        }
    }
}
