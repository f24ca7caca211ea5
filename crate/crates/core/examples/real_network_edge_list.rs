//! Runs Gibbs-TS on a network read from an edge-list file, next to the
//! known-graph and no-interference benchmarks.
//!
//!     cargo run --release --example real_network_edge_list [path/to/edges.txt]
//!
//! Without an argument a village-density stand-in network is written first.

use netbandit::graph::{generate, GraphFamily, GraphGenSpec};
use netbandit::runner::{run, RunConfig, RunOptions};

fn main() -> netbandit::Result<()> {
    let dir = std::env::temp_dir().join("netbandit_examples").join("edge_list");
    std::fs::create_dir_all(&dir)?;
    let path = match std::env::args().nth(1) {
        Some(p) => std::path::PathBuf::from(p),
        None => {
            let g = generate(&GraphGenSpec { family: GraphFamily::ErdosRenyi { p: 0.058 }, seed: 5 }, 63)?;
            let p = dir.join("village_standin.txt");
            g.write_edge_list(&p)?;
            p
        }
    };
    let text = format!(
        r#"
        name = "edge_list_example"
        horizon = 2000
        budget = 13
        [environment]
        sigma = 1.0
        reward = {{ kind = "linear_in_means_per_node" }}
        graph = {{ family = "edge_list", path = {path:?} }}
        [environment.protocol]
        mu = {{ dist = "uniform", low = 0.0, high = 1.0 }}
        beta = {{ dist = "uniform", low = 0.0, high = 1.0 }}
        [replication]
        reps = 2
        [[policies]]
        label = "gibbs_ts"
        kind = "gibbs_ts"
        [[policies]]
        label = "known_a_ts"
        kind = "known_a_ts"
        [[policies]]
        label = "no_interference_ts"
        kind = "no_interference_ts"
        "#
    );
    let config = RunConfig::from_toml_str(&text)?;
    let summary = run(&config, &RunOptions { out_dir: Some(dir.join("out")), ..Default::default() })?;
    println!("network {} with n = {}", path.display(), config.network_size()?);
    for p in &summary.policies {
        let acc = p.marginal_accuracy.as_ref().map_or(f64::NAN, |s| s.median);
        println!("{:<20} median regret {:>9.1}  second/first half {:.3}  edge accuracy {acc:.3}", p.label, p.final_regret.median, p.half_ratio);
    }
    Ok(())
}
