//! Sensitivity of Gibbs-TS to the edge prior and to the number of sweeps
//! per round, with environments matched across grid points.
//!
//!     cargo run --release --example parameter_sweeps [reps]

use netbandit::runner::{bundled, run_sweep, RunConfig, RunOptions};

fn main() -> netbandit::Result<()> {
    let reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let root = std::env::temp_dir().join("netbandit_examples").join("sweeps");
    for (name, axis, grid) in [
        ("rho_sensitivity", "rho", vec![0.05, 0.3, 0.7]),
        ("k_ablation", "sweeps", vec![1.0, 10.0, 50.0]),
    ] {
        let mut config = RunConfig::from_toml_str(bundled(name).unwrap())?;
        config.replication.reps = reps;
        let s = run_sweep(&config, axis, &grid, &RunOptions { out_dir: Some(root.join(name)), ..Default::default() })?;
        println!("{name}: median final regret by {axis}");
        for cell in &s.cells {
            let p = &cell.policies[0];
            println!("  {axis} = {:<5} median {:>8.1}  iqr {:>8.1}", cell.value, p.final_regret.median, p.final_regret.iqr);
        }
        let matched = s.cells.windows(2).all(|w| w[0].env_hashes == w[1].env_hashes);
        println!("  same environments in every cell: {matched}");
    }
    Ok(())
}
