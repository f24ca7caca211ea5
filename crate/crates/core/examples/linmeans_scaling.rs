//! Gibbs-TS on a larger linear-in-means network with a shared direct and
//! spillover effect.
//!
//!     cargo run --release --example linmeans_scaling [n] [horizon]

use std::time::Instant;

use netbandit::graph::GraphFamily;
use netbandit::runner::{bundled, run, RunConfig, RunOptions};

fn main() -> netbandit::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(100);
    let horizon = args.get(1).copied().unwrap_or(2000);
    let mut config = RunConfig::from_toml_str(bundled("linmeans_scaling").unwrap())?;
    config.environment.n = Some(n);
    config.environment.graph = GraphFamily::Sbm { groups: (n / 10).max(1), p_within: 0.3, p_between: 1.0 / n as f64 };
    config.budget = n / 5;
    config.horizon = horizon;
    config.replication.reps = 1;
    config.validate()?;

    let start = Instant::now();
    let out = std::env::temp_dir().join("netbandit_examples").join("linmeans");
    let summary = run(&config, &RunOptions { out_dir: Some(out), ..Default::default() })?;
    println!("n = {n}, B = {}, T = {horizon}: {:.1}s", config.budget, start.elapsed().as_secs_f64());
    for p in &summary.policies {
        println!(
            "{:<12} regret {:>9.1}  second/first half {:.3}  edge accuracy {:.4}",
            p.label,
            p.final_regret.median,
            p.half_ratio,
            p.marginal_accuracy.as_ref().map_or(f64::NAN, |s| s.median)
        );
    }
    Ok(())
}
