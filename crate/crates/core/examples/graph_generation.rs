//! Random graph families and edge-list round trips.
//!
//!     cargo run --example graph_generation

use netbandit::graph::{degrees, generate, generate_with, load_edge_list, GraphFamily, GraphGenSpec};
use netbandit::seeds;

fn main() -> netbandit::Result<()> {
    let families = [
        ("erdos_renyi p=0.3", GraphFamily::ErdosRenyi { p: 0.3 }, 8),
        ("village stand-in", GraphFamily::ErdosRenyi { p: 0.058 }, 63),
        ("sbm 2 blocks", GraphFamily::Sbm { groups: 2, p_within: 0.25, p_between: 0.05 }, 20),
        ("hard pairs", GraphFamily::HardPairs, 8),
    ];
    for (name, family, n) in &families {
        let g = generate(&GraphGenSpec { family: family.clone(), seed: 7 }, *n)?;
        let d = degrees(&g);
        println!(
            "{name:<18} n={n:<3} edges={:<4} density={:.3} max degree={}",
            g.edge_count(),
            g.density(),
            d.iter().max().unwrap()
        );
    }

    // the same seed always gives the same graph
    let mut a = seeds::stream(1000, seeds::ENVIRONMENT);
    let mut b = seeds::stream(1000, seeds::ENVIRONMENT);
    let fam = GraphFamily::ErdosRenyi { p: 0.3 };
    assert_eq!(generate_with(&fam, 8, &mut a)?, generate_with(&fam, 8, &mut b)?);

    let dir = std::env::temp_dir().join("netbandit_graph_example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("sbm.txt");
    let g = generate(&GraphGenSpec { family: families[2].1.clone(), seed: 3 }, 20)?;
    g.write_edge_list(&path)?;
    // isolated nodes are not written, so the reloaded graph can be smaller
    let back = load_edge_list(&path)?;
    assert_eq!(g.edge_count(), back.edge_count());
    println!("edge list round trip: {} -> {} nodes, {} edges, {}", g.n(), back.n(), back.edge_count(), path.display());
    print!("{}", g.to_edge_list().lines().take(5).collect::<Vec<_>>().join("\n"));
    println!("\n...");
    Ok(())
}
