//! Explore-then-commit: the isolation length from the recovery bound, and
//! how often phase one recovers the graph exactly at shorter lengths.
//!
//! The adaptive rule compares each neighbour mean with the node's own
//! isolation block, which contains its direct effect. Here mu = gamma = 1,
//! so it finds no edges at any m.
//!
//!     cargo run --release --example etc_calibration

use netbandit::graph::{generate_with, GraphFamily};
use netbandit::policies::{etc_m, etc_phase1, ThresholdRule};
use netbandit::reward::{Environment, RewardKind, RewardSpec};
use netbandit::seeds;

fn main() -> netbandit::Result<()> {
    let (n, sigma, delta, horizon) = (8, 0.5, 0.3, 2000);
    let m_star = etc_m(sigma, delta, n, horizon);
    println!("n={n} sigma={sigma} delta={delta} T={horizon}: m = {m_star}, isolation rounds n*m = {}", n * m_star);

    let spec = RewardSpec::new(RewardKind::CountBasedShared { d_max: 1 }, n)?;
    for m in [5, 20, 60, m_star] {
        for rule in [ThresholdRule::Theorem, ThresholdRule::Adaptive] {
            let mut exact = 0;
            for rep in 0..20 {
                let seed = seeds::rep_seed(1000, rep);
                let g = generate_with(&GraphFamily::ErdosRenyi { p: 0.3 }, n, &mut seeds::stream(seed, seeds::ENVIRONMENT))?;
                let env = Environment::new(spec, vec![1.0, 1.0], g, sigma)?;
                let (a_hat, _) = etc_phase1(&env, m, rule, delta, &mut seeds::stream(seed, seeds::NOISE))?;
                exact += usize::from(&a_hat == env.graph());
            }
            println!("m={m:<4} {rule:<9?} exact recovery {exact}/20");
        }
    }
    Ok(())
}
