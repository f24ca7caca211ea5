//! Checks the Gibbs edge sampler against exhaustive enumeration of every
//! graph on four nodes.
//!
//!     cargo run --release --example gibbs_oracle

use netbandit::runner::{oracle_check, OracleCheck};

fn main() -> netbandit::Result<()> {
    let check = OracleCheck { n: 4, rounds: 30, sigma: 0.5, sweeps: 5000, burn_in: 500, ..OracleCheck::default() };
    let r = oracle_check(&check)?;
    println!("pair   true  exact   gibbs   gap");
    for i in 0..check.n {
        for j in (i + 1)..check.n {
            let (e, g) = (r.exact[(i, j)], r.gibbs[(i, j)]);
            println!("({i},{j})  {}     {e:.4}  {g:.4}  {:.4}", u8::from(r.truth.has_edge(i, j)), (e - g).abs());
        }
    }
    println!("max gap {:.4}", r.max_gap);
    Ok(())
}
