//! Downstream treatment-effect estimation.
//!
//! Estimands are defined under a graph and parameter vector:
//!
//! - `tau_d`: mean over all nodes of `r_i(e_i) - r_i(0)`;
//! - `tau_i1`: mean over non-isolated nodes of `r_i(e_j) - r_i(0)`, averaged
//!   uniformly over the neighbours `j` of `i`;
//! - `tau_tte`: mean over all nodes of `r_i(1) - r_i(0)`.
//!
//! Plugging an estimated `(theta, A)` into the same formulas gives the
//! estimators.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Adjacency;
use crate::posterior::History;
use crate::reward::{Environment, RewardSpec};

/// Condition number above which [`estimate_ols`] switches to ridge.
pub const CONDITION_LIMIT: f64 = 1e10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimandTriple {
    pub tau_d: f64,
    pub tau_i1: f64,
    pub tau_tte: f64,
}

impl EstimandTriple {
    pub fn as_array(&self) -> [f64; 3] {
        [self.tau_d, self.tau_i1, self.tau_tte]
    }

    pub const NAMES: [&'static str; 3] = ["tau_d", "tau_i1", "tau_tte"];
}

/// Estimands of `(theta, adj)` under `spec`.
pub fn true_estimands(spec: &RewardSpec, theta: &[f64], adj: &Adjacency) -> Result<EstimandTriple> {
    let n = spec.n();
    if theta.len() != spec.dimension() || adj.n() != n {
        return Err(Error::param("theta or graph does not match the spec"));
    }
    let zeros = vec![false; n];
    let base = spec.expected_rewards(theta, adj, &zeros)?;
    let all = spec.expected_rewards(theta, adj, &vec![true; n])?;
    let mut z = zeros.clone();
    let (mut d, mut i1, mut tte) = (0.0, 0.0, 0.0);
    let mut exposed = 0usize;
    for i in 0..n {
        z[i] = true;
        d += spec.node_reward(theta, adj, &z, i) - base[i];
        z[i] = false;
        tte += all[i] - base[i];
        let nbrs = adj.neighbors(i);
        if !nbrs.is_empty() {
            let mut s = 0.0;
            for &j in nbrs {
                z[j] = true;
                s += spec.node_reward(theta, adj, &z, i) - base[i];
                z[j] = false;
            }
            i1 += s / nbrs.len() as f64;
            exposed += 1;
        }
    }
    Ok(EstimandTriple {
        tau_d: d / n as f64,
        tau_i1: if exposed == 0 { 0.0 } else { i1 / exposed as f64 },
        tau_tte: tte / n as f64,
    })
}

/// Plug-in estimate from an estimated parameter vector and graph.
pub fn estimate_from_posterior(theta_hat: &[f64], spec: &RewardSpec, a_hat: &Adjacency) -> Result<EstimandTriple> {
    true_estimands(spec, theta_hat, a_hat)
}

/// `A_ij = 1` iff the symmetrized marginal strictly exceeds `threshold`.
pub fn graph_point_estimate(marginals: &DMatrix<f64>, threshold: f64) -> Result<Adjacency> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::param(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let n = marginals.nrows();
    if marginals.ncols() != n {
        return Err(Error::param("marginal matrix is not square"));
    }
    let mut adj = Adjacency::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let p = 0.5 * (marginals[(i, j)] + marginals[(j, i)]);
            if p > threshold {
                adj.set_edge(i, j, true);
            }
        }
    }
    Ok(adj)
}

/// `t_eval` rounds with every node treated independently with probability
/// `treat_prob`, no budget.
pub fn randomized_phase<R: Rng + ?Sized>(env: &Environment, t_eval: usize, treat_prob: f64, rng: &mut R) -> Result<History> {
    if !(0.0..=1.0).contains(&treat_prob) {
        return Err(Error::param(format!("treat_prob must lie in [0, 1], got {treat_prob}")));
    }
    let n = env.n();
    let mut h = History::new(n);
    for _ in 0..t_eval {
        let z: Vec<bool> = (0..n).map(|_| rng.random_bool(treat_prob)).collect();
        let r = env.sample_rewards(&z, rng)?;
        h.push(z, r)?;
    }
    Ok(h)
}

/// Least-squares fit and whether the ridge fallback was needed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OlsFit {
    pub theta: Vec<f64>,
    pub ridge_used: bool,
    pub condition: f64,
}

/// Ordinary least squares on the stacked design under `a_hat`; falls back to
/// `(X^T X + ridge I)^{-1} X^T r` when the condition number of `X^T X`
/// exceeds [`CONDITION_LIMIT`].
pub fn estimate_ols(history: &History, spec: &RewardSpec, a_hat: &Adjacency, ridge: f64) -> Result<OlsFit> {
    if history.is_empty() {
        return Err(Error::param("OLS needs at least one round"));
    }
    if history.n() != spec.n() || a_hat.n() != spec.n() {
        return Err(Error::param("history or graph does not match the spec"));
    }
    let d = spec.dimension();
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut xr = DVector::<f64>::zeros(d);
    let mut row = Vec::new();
    for round in history.rounds() {
        for i in 0..spec.n() {
            row.clear();
            spec.row_into(&round.z, a_hat, i, &mut row);
            for &(a, va) in &row {
                xr[a] += va * round.r[i];
                for &(b, vb) in &row {
                    gram[(a, b)] += va * vb;
                }
            }
        }
    }
    let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let ridge_used = !(condition <= CONDITION_LIMIT);
    if ridge_used {
        if !(ridge > 0.0) {
            return Err(Error::Numerical(format!(
                "design is ill-conditioned (condition {condition:e}) and no ridge penalty is configured"
            )));
        }
        for k in 0..d {
            gram[(k, k)] += ridge;
        }
    }
    let theta = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("normal equations are not positive definite".into()))?
        .solve(&xr);
    Ok(OlsFit { theta: theta.iter().copied().collect(), ridge_used, condition })
}

/// Root-mean-square error per estimand.
pub fn rmse(estimates: &[EstimandTriple], truths: &[EstimandTriple]) -> Result<EstimandTriple> {
    if estimates.is_empty() || estimates.len() != truths.len() {
        return Err(Error::param(format!(
            "rmse needs equal non-empty lists, got {} and {}",
            estimates.len(),
            truths.len()
        )));
    }
    let mut acc = [0.0; 3];
    for (e, t) in estimates.iter().zip(truths) {
        for (k, (a, b)) in e.as_array().iter().zip(t.as_array()).enumerate() {
            acc[k] += (a - b) * (a - b);
        }
    }
    let m = estimates.len() as f64;
    Ok(EstimandTriple {
        tau_d: (acc[0] / m).sqrt(),
        tau_i1: (acc[1] / m).sqrt(),
        tau_tte: (acc[2] / m).sqrt(),
    })
}

/// Writes the table with one row per estimand and one column per estimator.
pub fn write_rmse_table(path: &Path, columns: &[(String, EstimandTriple)]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "estimand")?;
    for (name, _) in columns {
        write!(f, ",{name}")?;
    }
    writeln!(f)?;
    for (k, est) in EstimandTriple::NAMES.iter().enumerate() {
        write!(f, "{est}")?;
        for (_, v) in columns {
            write!(f, ",{}", v.as_array()[k])?;
        }
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}
