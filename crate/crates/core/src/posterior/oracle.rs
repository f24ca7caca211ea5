//! Exact graph posterior for tiny networks.
//!
//! Every graph on `n` nodes is enumerated; `theta` is integrated out
//! analytically, so each graph's weight is its prior mass times the Gaussian
//! evidence `r | A ~ N(H mu0, sigma^2 I + H Sigma0 H^T)` of the stacked data.

use nalgebra::{DMatrix, DVector};

use super::{check_shapes, History, Prior};
use crate::error::{Error, Result};
use crate::graph::Adjacency;
use crate::reward::RewardSpec;

/// Largest number of node pairs the enumeration accepts.
pub const MAX_PAIRS: usize = 15;

fn log_evidence(history: &History, adj: &Adjacency, spec: &RewardSpec, prior: &Prior) -> Result<f64> {
    let n = spec.n();
    let big_n = history.len() * n;
    if big_n == 0 {
        return Ok(0.0);
    }
    let d = spec.dimension();
    let mut h = DMatrix::<f64>::zeros(big_n, d);
    let mut r = DVector::<f64>::zeros(big_n);
    for (s, round) in history.rounds().iter().enumerate() {
        let hs = spec.design_matrix(&round.z, adj)?;
        h.view_mut((s * n, 0), (n, d)).copy_from(&hs);
        for i in 0..n {
            r[s * n + i] = round.r[i];
        }
    }
    let resid = r - &h * DVector::from_column_slice(prior.mean());
    let mut cov = &h * prior.cov_matrix() * h.transpose();
    for k in 0..big_n {
        cov[(k, k)] += prior.sigma2();
    }
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Numerical("evidence covariance is not positive definite".into()))?;
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let quad = resid.dot(&chol.solve(&resid));
    Ok(-0.5 * (big_n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + quad))
}

/// Posterior probability of every graph, in enumeration order (bit `p` of
/// the index is the `p`-th pair in lexicographic order).
pub fn graph_posterior(history: &History, spec: &RewardSpec, prior: &Prior) -> Result<Vec<(Adjacency, f64)>> {
    check_shapes(history, spec, prior)?;
    let n = spec.n();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    if pairs.len() > MAX_PAIRS {
        return Err(Error::param(format!(
            "exact enumeration needs C(n, 2) <= {MAX_PAIRS}, got {} at n = {n}",
            pairs.len()
        )));
    }
    let (lr, lnr) = (prior.rho().ln(), (1.0 - prior.rho()).ln());
    let mut graphs = Vec::with_capacity(1 << pairs.len());
    let mut logw = Vec::with_capacity(1 << pairs.len());
    for mask in 0u32..(1u32 << pairs.len()) {
        let mut adj = Adjacency::empty(n);
        for (p, &(i, j)) in pairs.iter().enumerate() {
            if mask >> p & 1 == 1 {
                adj.set_edge(i, j, true);
            }
        }
        let k = mask.count_ones() as f64;
        logw.push(k * lr + (pairs.len() as f64 - k) * lnr + log_evidence(history, &adj, spec, prior)?);
        graphs.push(adj);
    }
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logw.iter().map(|w| (w - max).exp()).sum();
    Ok(graphs
        .into_iter()
        .zip(logw)
        .map(|(g, w)| (g, (w - max).exp() / total))
        .collect())
}

/// `P(A_ij = 1 | data)` for every pair, as a dense symmetric matrix.
pub fn exact_edge_marginals(history: &History, spec: &RewardSpec, prior: &Prior) -> Result<DMatrix<f64>> {
    let n = spec.n();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (g, p) in graph_posterior(history, spec, prior)? {
        for (i, j) in g.edges() {
            m[(i, j)] += p;
            m[(j, i)] += p;
        }
    }
    Ok(m)
}
