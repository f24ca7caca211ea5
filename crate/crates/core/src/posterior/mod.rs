//! Joint posterior over reward parameters and the interference graph.
//!
//! Given the graph, the model `r_s = H(Z_s; A) theta + noise` is a conjugate
//! Gaussian regression. The graph is sampled one edge at a time from its full
//! conditional, which only involves the reward streams of the edge's two
//! endpoints. [`PosteriorState`] carries the chain `(theta, A)` across rounds
//! so every round starts from the previous round's sample.
//!
//! The free functions [`theta_posterior`] and [`edge_logit`] evaluate the
//! same quantities directly from the raw history. They are slow and exist as
//! references for tests and small diagnostics.

mod linalg;
mod oracle;
mod stats;

pub use oracle::{exact_edge_marginals, graph_posterior, MAX_PAIRS};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Adjacency;
use crate::reward::RewardSpec;
use stats::SuffStats;

/// Prior covariance of `theta`.
#[derive(Clone, Debug)]
pub enum PriorCov {
    /// Independent coordinates. A zero variance pins the coordinate at its mean.
    Diagonal(Vec<f64>),
    Dense { cov: DMatrix<f64>, precision: DMatrix<f64> },
}

/// Gaussian prior on `theta`, noise variance and the iid edge prior.
#[derive(Clone, Debug)]
pub struct Prior {
    mean: Vec<f64>,
    cov: PriorCov,
    sigma2: f64,
    rho: f64,
}

fn check_scalars(sigma2: f64, rho: f64) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::param(format!("noise variance must be positive, got {sigma2}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::param(format!("edge prior rho must lie in (0, 1), got {rho}")));
    }
    Ok(())
}

impl Prior {
    /// `N(mean 1, var I)` prior of dimension `dim`.
    pub fn isotropic(dim: usize, mean: f64, var: f64, sigma2: f64, rho: f64) -> Result<Self> {
        Self::diagonal(vec![mean; dim], vec![var; dim], sigma2, rho)
    }

    pub fn diagonal(mean: Vec<f64>, var: Vec<f64>, sigma2: f64, rho: f64) -> Result<Self> {
        check_scalars(sigma2, rho)?;
        if mean.len() != var.len() {
            return Err(Error::param("prior mean and variance lengths differ"));
        }
        if var.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::param("prior variances must be finite and nonnegative"));
        }
        Ok(Self { mean, cov: PriorCov::Diagonal(var), sigma2, rho })
    }

    pub fn dense(mean: Vec<f64>, cov: DMatrix<f64>, sigma2: f64, rho: f64) -> Result<Self> {
        check_scalars(sigma2, rho)?;
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::param("prior covariance shape does not match the mean"));
        }
        if (&cov - cov.transpose()).amax() > 1e-10 * cov.amax().max(1.0) {
            return Err(Error::param("prior covariance is not symmetric"));
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::param("prior covariance is not positive definite"))?;
        let precision = chol.inverse();
        let precision = (&precision + precision.transpose()) * 0.5;
        Ok(Self { mean, cov: PriorCov::Dense { cov, precision }, sigma2, rho })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &PriorCov {
        &self.cov
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Same prior with a different edge probability.
    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        check_scalars(self.sigma2, rho)?;
        self.rho = rho;
        Ok(self)
    }

    /// `log(rho / (1 - rho))`.
    pub fn log_odds(&self) -> f64 {
        (self.rho / (1.0 - self.rho)).ln()
    }

    pub fn cov_matrix(&self) -> DMatrix<f64> {
        match &self.cov {
            PriorCov::Diagonal(v) => DMatrix::from_diagonal(&DVector::from_column_slice(v)),
            PriorCov::Dense { cov, .. } => cov.clone(),
        }
    }

    /// Inverse covariance; fails when a diagonal variance is zero.
    pub fn precision_matrix(&self) -> Result<DMatrix<f64>> {
        match &self.cov {
            PriorCov::Diagonal(v) => {
                if v.iter().any(|&x| x == 0.0) {
                    return Err(Error::param("prior with zero variance has no precision matrix"));
                }
                Ok(DMatrix::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|x| 1.0 / x))))
            }
            PriorCov::Dense { precision, .. } => Ok(precision.clone()),
        }
    }
}

/// One observed round.
#[derive(Clone, Debug, PartialEq)]
pub struct Round {
    pub z: Vec<bool>,
    pub r: Vec<f64>,
}

/// Append-only log of `(Z_s, r_s)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct History {
    n: usize,
    rounds: Vec<Round>,
}

impl History {
    pub fn new(n: usize) -> Self {
        Self { n, rounds: Vec::new() }
    }

    pub fn push(&mut self, z: Vec<bool>, r: Vec<f64>) -> Result<()> {
        if z.len() != self.n || r.len() != self.n {
            return Err(Error::param(format!(
                "round has |Z| = {}, |r| = {}, history expects {}",
                z.len(),
                r.len(),
                self.n
            )));
        }
        self.rounds.push(Round { z, r });
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    /// The first `len` rounds.
    pub fn prefix(&self, len: usize) -> History {
        History { n: self.n, rounds: self.rounds[..len.min(self.rounds.len())].to_vec() }
    }
}

fn check_shapes(history: &History, spec: &RewardSpec, prior: &Prior) -> Result<()> {
    if history.n() != spec.n() {
        return Err(Error::param(format!("history has n = {}, spec has n = {}", history.n(), spec.n())));
    }
    if prior.dim() != spec.dimension() {
        return Err(Error::param(format!(
            "prior dimension {} does not match spec dimension {}",
            prior.dim(),
            spec.dimension()
        )));
    }
    Ok(())
}

/// Conjugate posterior `(mean, cov)` of `theta` given the graph, from the
/// full stacked design. An empty history returns the prior unchanged.
pub fn theta_posterior(
    history: &History,
    adj: &Adjacency,
    spec: &RewardSpec,
    prior: &Prior,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_shapes(history, spec, prior)?;
    let mu0 = DVector::from_column_slice(prior.mean());
    if history.is_empty() {
        return Ok((mu0, prior.cov_matrix()));
    }
    let d = spec.dimension();
    let p0 = prior.precision_matrix()?;
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut hr = DVector::<f64>::zeros(d);
    for round in history.rounds() {
        let h = spec.design_matrix(&round.z, adj)?;
        gram += h.transpose() * &h;
        hr += h.transpose() * DVector::from_column_slice(&round.r);
    }
    let s2 = prior.sigma2();
    let lam = gram / s2 + &p0;
    let cov = invert_spd(&lam)?;
    let mean = &cov * (hr / s2 + &p0 * mu0);
    Ok((mean, cov))
}

fn invert_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    let l = linalg::factor_with_jitter(m.as_slice(), d)?;
    // column-major storage of a symmetric matrix equals its row-major storage
    let mut inv = DMatrix::<f64>::zeros(d, d);
    let mut e = vec![0.0; d];
    for c in 0..d {
        e.fill(0.0);
        e[c] = 1.0;
        linalg::solve_lower(&l, d, &mut e);
        linalg::solve_lower_transpose(&l, d, &mut e);
        for r in 0..d {
            inv[(r, c)] = e[r];
        }
    }
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Exact Gaussian draw `mean + L e` with `cov = L L^T`.
pub fn sample_theta<R: Rng + ?Sized>(mean: &[f64], cov: &DMatrix<f64>, rng: &mut R) -> Result<Vec<f64>> {
    let d = mean.len();
    if cov.nrows() != d || cov.ncols() != d {
        return Err(Error::param("covariance shape does not match the mean"));
    }
    let l = linalg::factor_with_jitter(cov.as_slice(), d)?;
    let e: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    Ok((0..d)
        .map(|i| mean[i] + (0..=i).map(|k| l[i * d + k] * e[k]).sum::<f64>())
        .collect())
}

/// Full-conditional log-odds of `A_ij = 1`, computed from the raw history.
pub fn edge_logit(
    i: usize,
    j: usize,
    adj: &Adjacency,
    theta: &[f64],
    history: &History,
    spec: &RewardSpec,
    prior: &Prior,
) -> Result<f64> {
    check_shapes(history, spec, prior)?;
    if i == j || i >= spec.n() || j >= spec.n() {
        return Err(Error::param(format!("invalid node pair ({i}, {j})")));
    }
    if theta.len() != spec.dimension() || adj.n() != spec.n() {
        return Err(Error::param("theta or graph does not match the spec"));
    }
    let mut a0 = adj.clone();
    a0.set_edge(i, j, false);
    let mut a1 = adj.clone();
    a1.set_edge(i, j, true);
    let mut acc = 0.0;
    for round in history.rounds() {
        for l in [i, j] {
            let e0 = round.r[l] - spec.node_reward(theta, &a0, &round.z, l);
            let e1 = round.r[l] - spec.node_reward(theta, &a1, &round.z, l);
            acc += e0 * e0 - e1 * e1;
        }
    }
    Ok(prior.log_odds() + acc / (2.0 * prior.sigma2()))
}

/// Order in which a sweep visits the node pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeOrder {
    #[default]
    Lexicographic,
    RandomScan,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// State of the `(theta, A)` chain together with incrementally maintained
/// statistics of the history it has seen.
pub struct PosteriorState {
    spec: RewardSpec,
    prior: Prior,
    theta: Vec<f64>,
    adj: Adjacency,
    sweeps: usize,
    order: EdgeOrder,
    learn_graph: bool,
    stats: SuffStats,
    seen: usize,
    pairs: Vec<(usize, usize)>,
}

impl PosteriorState {
    /// Chain initialised from the prior: `A_ij ~ Bern(rho)` in lexicographic
    /// order, then `theta` from its prior.
    pub fn new<R: Rng + ?Sized>(spec: RewardSpec, prior: Prior, sweeps: usize, rng: &mut R) -> Result<Self> {
        if prior.dim() != spec.dimension() {
            return Err(Error::param(format!(
                "prior dimension {} does not match spec dimension {}",
                prior.dim(),
                spec.dimension()
            )));
        }
        let n = spec.n();
        let mut adj = Adjacency::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < prior.rho() {
                    adj.set_edge(i, j, true);
                }
            }
        }
        let mut state = Self::build(spec, prior, adj, sweeps, true);
        state.theta = prior_draw(&state.prior, rng)?;
        Ok(state)
    }

    /// State with a fixed graph: only `theta` is ever resampled.
    pub fn with_fixed_graph(spec: RewardSpec, prior: Prior, adj: Adjacency) -> Result<Self> {
        if prior.dim() != spec.dimension() || adj.n() != spec.n() {
            return Err(Error::param("prior or graph does not match the spec"));
        }
        Ok(Self::build(spec, prior, adj, 1, false))
    }

    fn build(spec: RewardSpec, prior: Prior, adj: Adjacency, sweeps: usize, learn_graph: bool) -> Self {
        let n = spec.n();
        let stats = SuffStats::new(&spec, &adj);
        let theta = prior.mean().to_vec();
        Self {
            spec,
            prior,
            theta,
            adj,
            sweeps,
            order: EdgeOrder::Lexicographic,
            learn_graph,
            stats,
            seen: 0,
            pairs: (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect(),
        }
    }

    pub fn set_edge_order(&mut self, order: EdgeOrder) {
        self.order = order;
    }

    pub fn spec(&self) -> &RewardSpec {
        &self.spec
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn adj(&self) -> &Adjacency {
        &self.adj
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn learns_graph(&self) -> bool {
        self.learn_graph
    }

    /// Number of history rounds absorbed so far.
    pub fn seen(&self) -> usize {
        self.seen
    }

    /// Replaces the graph sample, e.g. with a point estimate.
    pub fn set_graph(&mut self, adj: Adjacency) -> Result<()> {
        if adj.n() != self.spec.n() {
            return Err(Error::param("graph size does not match the spec"));
        }
        self.adj = adj;
        self.stats.reset_graph(&self.adj);
        Ok(())
    }

    /// Absorbs history rounds not seen yet.
    pub fn observe(&mut self, history: &History) -> Result<()> {
        if history.n() != self.spec.n() {
            return Err(Error::param("history size does not match the spec"));
        }
        if history.len() < self.seen {
            return Err(Error::param("history is shorter than what the state has already seen"));
        }
        for round in &history.rounds()[self.seen..] {
            self.stats.ingest(&self.adj, &round.z, &round.r);
        }
        self.seen = history.len();
        Ok(())
    }

    /// Draws `theta | A, data`.
    pub fn draw_theta<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.stats.draw_theta(&self.spec, &self.adj, &self.prior, rng, &mut self.theta)
    }

    /// Full-conditional log-odds of `A_ij = 1` under the current state.
    pub fn edge_logit(&mut self, i: usize, j: usize) -> f64 {
        self.prior.log_odds()
            + self.stats.edge_llr(&self.spec, &mut self.adj, &self.theta, self.prior.sigma2(), i, j)
    }

    /// One pass over all pairs, resampling each edge from its full conditional.
    pub fn edge_pass<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.order == EdgeOrder::RandomScan {
            self.pairs.shuffle(rng);
        }
        for idx in 0..self.pairs.len() {
            let (i, j) = self.pairs[idx];
            let p = sigmoid(self.edge_logit(i, j));
            let present = rng.random::<f64>() < p;
            if present != self.adj.has_edge(i, j) {
                self.adj.set_edge(i, j, present);
                self.stats.on_flip(i, j, present);
            }
        }
    }

    /// Runs `K` alternations of the theta draw and the edge pass, or a single
    /// theta draw for a fixed-graph state.
    pub fn step<R: Rng + ?Sized>(&mut self, history: &History, rng: &mut R) -> Result<()> {
        self.observe(history)?;
        if !self.learn_graph {
            return self.draw_theta(rng);
        }
        for _ in 0..self.sweeps {
            self.draw_theta(rng)?;
            self.edge_pass(rng);
        }
        Ok(())
    }

    /// Monte Carlo edge marginals from `sweeps` further sweeps of the chain,
    /// as a dense symmetric `n x n` matrix.
    pub fn edge_marginals<R: Rng + ?Sized>(
        &mut self,
        history: &History,
        sweeps: usize,
        rng: &mut R,
    ) -> Result<DMatrix<f64>> {
        self.observe(history)?;
        let n = self.spec.n();
        let mut acc = DMatrix::<f64>::zeros(n, n);
        if !self.learn_graph || sweeps == 0 {
            for (i, j) in self.adj.edges() {
                acc[(i, j)] = 1.0;
                acc[(j, i)] = 1.0;
            }
            return Ok(acc);
        }
        for _ in 0..sweeps {
            self.draw_theta(rng)?;
            self.edge_pass(rng);
            for (i, j) in self.adj.edges() {
                acc[(i, j)] += 1.0;
                acc[(j, i)] += 1.0;
            }
        }
        Ok(acc / sweeps as f64)
    }
}

fn prior_draw<R: Rng + ?Sized>(prior: &Prior, rng: &mut R) -> Result<Vec<f64>> {
    match prior.cov() {
        PriorCov::Diagonal(var) => Ok(prior
            .mean()
            .iter()
            .zip(var)
            .map(|(m, v)| {
                let e: f64 = StandardNormal.sample(rng);
                m + v.sqrt() * e
            })
            .collect()),
        PriorCov::Dense { cov, .. } => sample_theta(prior.mean(), cov, rng),
    }
}

/// `K` Gibbs sweeps over `(theta, A)`, warm-started from the current state.
pub fn gibbs_sweep<R: Rng + ?Sized>(state: &mut PosteriorState, history: &History, rng: &mut R) -> Result<()> {
    state.step(history, rng)
}

#[cfg(test)]
mod tests;
