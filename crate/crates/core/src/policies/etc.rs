//! Explore-then-commit graph recovery: isolate each node for `m` rounds,
//! threshold the neighbours' mean rewards, then hand the estimate to
//! known-graph Thompson sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Adjacency;
use crate::posterior::History;
use crate::reward::Environment;

/// Isolation rounds per node: `max(1, ceil(8 sigma^2 ln(n^2 T) / delta^2))`.
pub fn etc_m(sigma: f64, delta_gamma: f64, n: usize, horizon: usize) -> usize {
    let raw = 8.0 * sigma * sigma * ((n * n) as f64 * horizon as f64).ln() / (delta_gamma * delta_gamma);
    let m = raw.ceil();
    if m.is_finite() && m >= 1.0 {
        m as usize
    } else {
        1
    }
}

/// Edge test applied to the isolation-phase means.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// `1{mean of r_i during j's block > delta/2}`, OR-symmetrized.
    #[default]
    Theorem,
    /// `1{mean_{i,j} - mean_{i,i} > 3 sigma sqrt(2/m)}`, max-symmetrized.
    Adaptive,
}

/// Design of isolation round `t` (0-based): node `t / m` treated alone.
pub fn isolation_design(n: usize, m: usize, t: usize) -> Vec<bool> {
    let mut z = vec![false; n];
    z[t / m] = true;
    z
}

/// Block means `rbar[i][j]`: node `i`'s mean reward while `j` was isolated.
pub fn block_means(history: &History, m: usize) -> Result<Vec<Vec<f64>>> {
    let n = history.n();
    if m == 0 || history.len() < n * m {
        return Err(Error::param(format!(
            "isolation phase needs {} rounds, history has {}",
            n * m,
            history.len()
        )));
    }
    let mut rbar = vec![vec![0.0; n]; n];
    for (t, round) in history.rounds()[..n * m].iter().enumerate() {
        let j = t / m;
        for i in 0..n {
            rbar[i][j] += round.r[i];
        }
    }
    for row in &mut rbar {
        for v in row.iter_mut() {
            *v /= m as f64;
        }
    }
    Ok(rbar)
}

/// Graph estimate from the first `n m` rounds of an isolation phase.
pub fn etc_estimate(history: &History, m: usize, rule: ThresholdRule, delta_gamma: f64, sigma: f64) -> Result<Adjacency> {
    let n = history.n();
    let rbar = block_means(history, m)?;
    let directed = |i: usize, j: usize| match rule {
        ThresholdRule::Theorem => rbar[i][j] > delta_gamma / 2.0,
        ThresholdRule::Adaptive => rbar[i][j] - rbar[i][i] > 3.0 * sigma * (2.0 / m as f64).sqrt(),
    };
    let mut adj = Adjacency::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if directed(i, j) || directed(j, i) {
                adj.set_edge(i, j, true);
            }
        }
    }
    Ok(adj)
}

/// Plays the isolation phase against `env` and returns the estimate with the
/// recorded rounds.
pub fn etc_phase1<R: Rng + ?Sized>(
    env: &Environment,
    m: usize,
    rule: ThresholdRule,
    delta_gamma: f64,
    rng: &mut R,
) -> Result<(Adjacency, History)> {
    if m == 0 || !(delta_gamma > 0.0) {
        return Err(Error::param("ETC needs m >= 1 and delta_gamma > 0"));
    }
    let n = env.n();
    let mut history = History::new(n);
    for t in 0..n * m {
        let z = isolation_design(n, m, t);
        let r = env.sample_rewards(&z, rng)?;
        history.push(z, r)?;
    }
    let adj = etc_estimate(&history, m, rule, delta_gamma, env.sigma())?;
    Ok((adj, history))
}
