//! The disjoint-pairs instance behind the regret lower bound: one of p
//! candidate pairs is connected and only treating it pays off.
//!
//!     cargo run --release --example lower_bound_instance

use netbandit::runner::{execute, RunConfig};

fn main() -> netbandit::Result<()> {
    let (p, gamma, horizon) = (4, 1.0, 5000);
    let text = format!(
        r#"
        name = "hard_pairs"
        horizon = {horizon}
        budget = 1
        [environment]
        n = {}
        sigma = 1.0
        reward = {{ kind = "paired_indicator" }}
        graph = {{ family = "hard_pairs" }}
        [environment.protocol]
        mu = {{ dist = "constant", value = 0.0 }}
        gamma = {{ dist = "constant", value = {gamma} }}
        [replication]
        reps = 3
        [[policies]]
        label = "uniform_random"
        kind = "uniform_random"
        [[policies]]
        label = "gibbs_ts"
        kind = "gibbs_ts"
        fit = {{ kind = "count_based_shared", d_max = 1 }}
        sweeps = 2
        "#,
        2 * p
    );
    let config = RunConfig::from_toml_str(&text)?;
    let result = execute(&config, 0, None)?;
    let expected = gamma * (p - 1) as f64 / p as f64;
    println!("uniform random: expected regret per round {expected:.3}");
    for run in &result.runs {
        let connected = run.a_hat.as_ref().map(|g| g.edges().collect::<Vec<_>>());
        println!(
            "{:<15} rep {} regret {:>8.1} ({:.3} per round), graph estimate {:?}",
            run.label,
            run.rep,
            run.final_regret,
            run.final_regret / horizon as f64,
            connected
        );
    }
    Ok(())
}
