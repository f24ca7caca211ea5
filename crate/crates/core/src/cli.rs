//! The `netbandit` command line.
//!
//! Exit status: 0 on success, 2 for configuration or usage errors (the
//! message names the offending key), 1 for any other failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::runner::{self, OracleCheck, RunConfig, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "netbandit", version, about = "Thompson sampling for treatment allocation on networks with unknown interference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Config file, or the name of a bundled config (see `describe-config --list`).
    #[arg(long)]
    pub config: String,
    /// Output directory (default: the config's output_dir, else out/<name>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for independent replications (default: available parallelism).
    #[arg(long, env = "NETBANDIT_WORKERS")]
    pub workers: Option<usize>,
    /// Replace replication.base_seed.
    #[arg(long)]
    pub seed_override: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every replication of a config and write trajectories and summaries.
    Run(Common),
    /// Repeat a run over a grid of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter to sweep: rho, sweeps, m, delta_gamma, prior_var, warmup, sigma, budget, horizon.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated grid values, e.g. 0.05,0.15,0.3.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Compare Gibbs edge marginals with exhaustive enumeration on a small instance.
    OracleCheck {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 30)]
        rounds: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        /// Post-burn-in sweeps averaged into the Gibbs marginals.
        #[arg(long, default_value_t = 5000)]
        sweeps: usize,
        #[arg(long, default_value_t = 500)]
        burn_in: usize,
        /// Largest acceptable absolute gap.
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
    },
    /// Run a config and write only the final graph estimates and edge marginals.
    Recover(Common),
    /// Downstream effect estimation (adaptive phase, graph estimate, OLS phase, RMSE table).
    Estimate(Common),
    /// Print the config reference, list bundled configs, or validate a config.
    DescribeConfig {
        /// Validate this config and print it with all defaults filled in.
        #[arg(long)]
        config: Option<String>,
        /// List the bundled configs.
        #[arg(long)]
        list: bool,
    },
}

/// Loads a config from a path, falling back to the bundled configs by name.
pub fn load_config(spec: &str) -> Result<RunConfig> {
    let path = Path::new(spec);
    if path.exists() {
        return RunConfig::load(path);
    }
    match runner::bundled(spec.trim_end_matches(".toml")) {
        Some(text) => RunConfig::from_toml_str(text),
        None => Err(Error::config(
            "--config",
            format!("`{spec}` is neither a file nor a bundled config ({})", runner::bundled_names().join(", ")),
        )),
    }
}

fn prepare(common: &Common) -> Result<(RunConfig, RunOptions)> {
    let mut config = load_config(&common.config)?;
    if let Some(seed) = common.seed_override {
        config.replication.base_seed = seed;
    }
    let options = RunOptions { out_dir: common.out.clone(), workers: common.workers, graphs_only: false };
    Ok((config, options))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

fn print_summary(summary: &runner::RunSummary) {
    println!("{:<24} {:>5} {:>12} {:>12} {:>10} {:>9}", "policy", "reps", "median", "iqr", "half", "accuracy");
    for p in &summary.policies {
        println!(
            "{:<24} {:>5} {:>12.2} {:>12.2} {:>10.3} {:>9}",
            p.label,
            p.reps,
            p.final_regret.median,
            p.final_regret.iqr,
            p.half_ratio,
            fmt_opt(p.marginal_accuracy.as_ref().map(|s| s.median))
        );
    }
}

/// Executes a parsed command.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let (config, options) = prepare(&common)?;
            let summary = runner::run(&config, &options)?;
            print_summary(&summary);
            println!("wrote {}", options.out_dir(&config).display());
        }
        Command::Recover(common) => {
            let (config, mut options) = prepare(&common)?;
            options.graphs_only = true;
            let summary = runner::run(&config, &options)?;
            print_summary(&summary);
            println!("wrote {}", options.out_dir(&config).display());
        }
        Command::Sweep { common, axis, grid } => {
            let (config, options) = prepare(&common)?;
            let (axis, grid) = match (axis, grid, &config.sweep) {
                (Some(a), Some(g), _) => (a, g),
                (Some(a), None, Some(s)) if a == s.axis => (a, s.grid.clone()),
                (None, g, Some(s)) => (s.axis.clone(), g.unwrap_or_else(|| s.grid.clone())),
                (Some(_), None, _) => return Err(Error::config("--grid", "required for this axis")),
                (None, _, None) => return Err(Error::config("--axis", "required: the config has no [sweep] table")),
            };
            let summary = runner::run_sweep(&config, &axis, &grid, &options)?;
            println!("{:<10} {:<24} {:>12} {:>12}", axis, "policy", "median", "iqr");
            for cell in &summary.cells {
                for p in &cell.policies {
                    println!("{:<10} {:<24} {:>12.2} {:>12.2}", cell.value, p.label, p.final_regret.median, p.final_regret.iqr);
                }
            }
            println!("wrote {}", options.out_dir(&config).display());
        }
        Command::Estimate(common) => {
            let (mut config, options) = prepare(&common)?;
            if config.estimation.is_none() {
                config.estimation = Some(Default::default());
            }
            let summary = runner::run_estimation(&config, &options)?;
            println!("{:<24} {:>10} {:>10} {:>10}", "estimator", "tau_d", "tau_i1", "tau_tte");
            for (name, r) in &summary.rmse {
                println!("{:<24} {:>10.4} {:>10.4} {:>10.4}", name, r.tau_d, r.tau_i1, r.tau_tte);
            }
            println!("wrote {}", options.out_dir(&config).display());
        }
        Command::OracleCheck { n, rounds, seed, sigma, sweeps, burn_in, tolerance } => {
            if n * (n.saturating_sub(1)) / 2 > crate::posterior::MAX_PAIRS {
                return Err(Error::config("--n", format!("enumeration supports at most {} node pairs", crate::posterior::MAX_PAIRS)));
            }
            let check = OracleCheck { n, rounds, seed, sigma, sweeps, burn_in, ..OracleCheck::default() };
            let report = runner::oracle_check(&check)?;
            for i in 0..n {
                for j in (i + 1)..n {
                    println!(
                        "edge ({i},{j}) true={} exact={:.4} gibbs={:.4}",
                        u8::from(report.truth.has_edge(i, j)),
                        report.exact[(i, j)],
                        report.gibbs[(i, j)]
                    );
                }
            }
            let pass = report.max_gap <= tolerance;
            println!("max |gibbs - exact| = {:.4} ({} at {tolerance})", report.max_gap, if pass { "PASS" } else { "FAIL" });
            if !pass {
                return Err(Error::Numerical(format!("oracle gap {:.4} exceeds {tolerance}", report.max_gap)));
            }
        }
        Command::DescribeConfig { config, list } => {
            if list {
                for name in runner::bundled_names() {
                    println!("{name}");
                }
            } else if let Some(c) = config {
                let cfg = load_config(&c)?;
                print!("{}", cfg.to_toml());
            } else {
                print!("{}", runner::SCHEMA);
            }
        }
    }
    Ok(())
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => 2,
        _ => 1,
    }
}

/// Parses `args` and runs the command, returning the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
