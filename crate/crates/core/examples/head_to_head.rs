//! Gibbs-TS against explore-then-commit, a misspecified additive fit and the
//! known-graph benchmark on an 8-node pairwise instance.
//!
//!     cargo run --release --example head_to_head [reps] [large]

use netbandit::runner::{bundled, run, RunConfig, RunOptions};

fn main() -> netbandit::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let reps = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let name = if args.iter().any(|a| a == "large") { "head_to_head_large_xi" } else { "head_to_head_small_xi" };
    let mut config = RunConfig::from_toml_str(bundled(name).unwrap())?;
    config.replication.reps = reps;

    let out = std::env::temp_dir().join("netbandit_examples").join(name);
    let summary = run(&config, &RunOptions { out_dir: Some(out.clone()), ..Default::default() })?;
    println!("{name}, {reps} reps, T = {}", config.horizon);
    println!("{:<18} {:>10} {:>10} {:>10} {:>10}", "policy", "median", "q25", "q75", "half");
    for p in &summary.policies {
        let r = &p.final_regret;
        println!("{:<18} {:>10.1} {:>10.1} {:>10.1} {:>10.3}", p.label, r.median, r.q25, r.q75, p.half_ratio);
    }
    println!("trajectories in {}", out.display());
    Ok(())
}
