//! Driving a policy by hand: choose a treatment, observe rewards, repeat.
//! Useful when rewards come from outside the simulator.
//!
//!     cargo run --release --example policy_loop

use netbandit::graph::{edge_accuracy, generate_with, GraphFamily};
use netbandit::policies::{Agent, PolicyConfig, PolicyKind};
use netbandit::posterior::History;
use netbandit::reward::{sample_params, Environment, Protocol, RewardKind, RewardSpec};
use netbandit::runner::true_optimum;
use netbandit::seeds;

fn main() -> netbandit::Result<()> {
    let (n, budget, horizon) = (8, 3, 600);
    let seed = 2024;
    let mut env_rng = seeds::stream(seed, seeds::ENVIRONMENT);
    let graph = generate_with(&GraphFamily::ErdosRenyi { p: 0.3 }, n, &mut env_rng)?;
    let spec = RewardSpec::new(RewardKind::CountBasedShared { d_max: 3 }, n)?;
    let theta = sample_params(&spec, &Protocol::count_based(), &mut env_rng)?;
    let env = Environment::new(spec, theta, graph, 0.5)?;
    let (_, f_opt) = true_optimum(&env, budget)?;

    let config = PolicyConfig { rho: Some(0.3), ..PolicyConfig::new("gibbs", PolicyKind::GibbsTs) };
    let mut policy_rng = seeds::stream(seed, seeds::POLICY);
    let mut noise = seeds::stream(seed, seeds::NOISE);
    let mut agent = Agent::new(&config, &env, budget, horizon, &mut policy_rng)?;
    let mut history = History::new(n);
    let mut regret = 0.0;
    for t in 1..=horizon {
        let z = agent.choose(&history, &mut policy_rng)?;
        regret += f_opt - env.total_reward(&z)?;
        let r = env.sample_rewards(&z, &mut noise)?;
        history.push(z, r)?;
        if t % 100 == 0 {
            let acc = agent.graph_estimate().map(|g| edge_accuracy(g, env.graph())).transpose()?;
            println!("t={t:<4} cumulative regret {regret:>7.2}  current graph sample accuracy {:.3}", acc.unwrap_or(f64::NAN));
        }
    }
    Ok(())
}
