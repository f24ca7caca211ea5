//! Reward models: parameter layout, design rows and the optimal allocation.
//!
//!     cargo run --example reward_models

use netbandit::graph::Adjacency;
use netbandit::policies::exact_enumeration;
use netbandit::reward::{sample_params, Environment, Protocol, RewardKind, RewardSpec};
use netbandit::seeds;

fn main() -> netbandit::Result<()> {
    let n = 5;
    // path 0-1-2-3 plus an isolated node 4
    let adj = Adjacency::from_edges(n, &[(0, 1), (1, 2), (2, 3)])?;
    let z = [true, false, true, false, false];

    let kinds = [
        RewardKind::LinearInMeans,
        RewardKind::LinearInMeansShared,
        RewardKind::CountBasedShared { d_max: 2 },
        RewardKind::CountBasedPerNode { d_max: 2 },
        RewardKind::PairwiseNia,
        RewardKind::AdditivePairs,
        RewardKind::SaturationSpecA,
        RewardKind::InteractionSpecB,
    ];
    for kind in kinds {
        let spec = RewardSpec::new(kind, n)?;
        let row = spec.design_row(&z, &adj, 1)?;
        let nonzero: Vec<String> = row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, v)| format!("{k}:{v:.2}")).collect();
        println!(
            "{:<40} dim={:<4} collapsible={:<5} node 1 row [{}]",
            format!("{kind:?}"),
            spec.dimension(),
            spec.is_collapsible(),
            nonzero.join(" ")
        );
    }

    // draw a head-to-head environment and find its best budget-2 allocation
    let spec = RewardSpec::new(RewardKind::PairwiseNia, n)?;
    let mut rng = seeds::stream(1, seeds::ENVIRONMENT);
    let theta = sample_params(&spec, &Protocol::head_to_head(0.4), &mut rng)?;
    let env = Environment::new(spec, theta, adj, 0.5)?;
    let (best, value) = exact_enumeration(&spec, env.theta(), env.graph(), 2, 1000)?;
    let treated: Vec<usize> = (0..n).filter(|&i| best[i]).collect();
    println!("best allocation with B=2: {treated:?}, expected total reward {value:.3}");
    println!("expected rewards: {:.3?}", env.expected_rewards(&best)?);
    println!("one noisy draw:   {:.3?}", env.sample_rewards(&best, &mut rng)?);
    Ok(())
}
