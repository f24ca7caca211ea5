//! Compressed sufficient statistics for the Gibbs sampler.
//!
//! Two representations are used:
//!
//! - [`Grouped`]: rounds are grouped by their treatment vector, keeping the
//!   multiplicity and per-node reward sums of each distinct design. Gram
//!   matrices and edge conditionals are evaluated over groups instead of rounds.
//!   Toggling `A_ij` only moves node `i`'s row in rounds where `j` is treated,
//!   so each edge only visits the groups that treat one of its endpoints.
//! - [`Means`]: linear-in-means rewards depend on the neighbourhood only
//!   through the treated count `x_i` and the degree, so co-treatment counts
//!   and reward-by-treatment sums give `O(1)` edge conditionals with cheap
//!   updates when an edge flips.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::linalg::{factor_with_jitter, solve_lower, solve_lower_transpose};
use super::{Prior, PriorCov};
use crate::error::Result;
use crate::graph::Adjacency;
use crate::reward::{RewardKind, RewardSpec};

pub(crate) enum SuffStats {
    Grouped(Grouped),
    Means(Means),
}

impl SuffStats {
    pub(crate) fn new(spec: &RewardSpec, adj: &Adjacency) -> Self {
        if spec.is_linear_in_means() {
            SuffStats::Means(Means::new(spec.n(), spec.kind() == RewardKind::LinearInMeansShared, adj))
        } else {
            SuffStats::Grouped(Grouped::new(spec))
        }
    }

    pub(crate) fn ingest(&mut self, adj: &Adjacency, z: &[bool], r: &[f64]) {
        match self {
            SuffStats::Grouped(g) => g.ingest(z, r),
            SuffStats::Means(m) => m.ingest(adj, z, r),
        }
    }

    /// Recomputes any graph-dependent aggregates after `adj` was replaced.
    pub(crate) fn reset_graph(&mut self, adj: &Adjacency) {
        if let SuffStats::Means(m) = self {
            m.rebuild(adj);
        }
    }

    /// Draws `theta | A, data` into `theta`.
    pub(crate) fn draw_theta<R: Rng + ?Sized>(
        &mut self,
        spec: &RewardSpec,
        adj: &Adjacency,
        prior: &Prior,
        rng: &mut R,
        theta: &mut [f64],
    ) -> Result<()> {
        match self {
            SuffStats::Grouped(g) => g.draw_theta(spec, adj, prior, rng, theta),
            SuffStats::Means(m) => m.draw_theta(prior, rng, theta),
        }
    }

    /// Log-likelihood ratio `log p(data | A_ij = 1) - log p(data | A_ij = 0)`
    /// given `theta` and all other edges. `adj` is restored before returning.
    pub(crate) fn edge_llr(
        &mut self,
        spec: &RewardSpec,
        adj: &mut Adjacency,
        theta: &[f64],
        sigma2: f64,
        i: usize,
        j: usize,
    ) -> f64 {
        match self {
            SuffStats::Grouped(g) => g.edge_llr(spec, adj, theta, sigma2, i, j),
            SuffStats::Means(m) => m.edge_llr(adj, theta, sigma2, i, j),
        }
    }

    /// Keeps graph-dependent aggregates in sync with an edge flip that has
    /// already been applied to the adjacency.
    pub(crate) fn on_flip(&mut self, i: usize, j: usize, present: bool) {
        if let SuffStats::Means(m) = self {
            m.flip(i, j, present);
        }
    }
}

/// Draws the coordinates `cols` of `theta` from the Gaussian conditional
/// defined by the normal equations `g` (row-major over `cols`) and `b`.
///
/// Coordinates with zero prior variance are held at their prior mean and
/// their contribution is moved to the right-hand side. A dense prior requires
/// `cols` to cover every coordinate.
fn draw_block<R: Rng + ?Sized>(
    cols: &[usize],
    g: &[f64],
    b: &[f64],
    prior: &Prior,
    rng: &mut R,
    theta: &mut [f64],
) -> Result<()> {
    let k = cols.len();
    let s2 = prior.sigma2();
    let mu0 = prior.mean();
    match prior.cov() {
        PriorCov::Diagonal(var) => {
            let active: Vec<usize> = (0..k).filter(|&a| var[cols[a]] > 0.0).collect();
            let m = active.len();
            let mut lam = vec![0.0; m * m];
            let mut h = vec![0.0; m];
            for (x, &a) in active.iter().enumerate() {
                let ca = cols[a];
                let mut rhs = b[a];
                for f in (0..k).filter(|&f| var[cols[f]] == 0.0) {
                    rhs -= g[a * k + f] * mu0[cols[f]];
                }
                h[x] = rhs / s2 + mu0[ca] / var[ca];
                for (y, &bcol) in active.iter().enumerate() {
                    lam[x * m + y] = g[a * k + bcol] / s2;
                }
                lam[x * m + x] += 1.0 / var[ca];
            }
            let l = factor_with_jitter(&lam, m)?;
            solve_lower(&l, m, &mut h);
            for v in h.iter_mut() {
                let e: f64 = StandardNormal.sample(rng);
                *v += e;
            }
            solve_lower_transpose(&l, m, &mut h);
            for f in (0..k).filter(|&f| var[cols[f]] == 0.0) {
                theta[cols[f]] = mu0[cols[f]];
            }
            for (x, &a) in active.iter().enumerate() {
                theta[cols[a]] = h[x];
            }
        }
        PriorCov::Dense { precision, .. } => {
            debug_assert_eq!(k, prior.dim());
            let mut lam = vec![0.0; k * k];
            let mut h = vec![0.0; k];
            for x in 0..k {
                let mut p0mu = 0.0;
                for y in 0..k {
                    let p = precision[(cols[x], cols[y])];
                    lam[x * k + y] = g[x * k + y] / s2 + p;
                    p0mu += p * mu0[cols[y]];
                }
                h[x] = b[x] / s2 + p0mu;
            }
            let l = factor_with_jitter(&lam, k)?;
            solve_lower(&l, k, &mut h);
            for v in h.iter_mut() {
                let e: f64 = StandardNormal.sample(rng);
                *v += e;
            }
            solve_lower_transpose(&l, k, &mut h);
            for x in 0..k {
                theta[cols[x]] = h[x];
            }
        }
    }
    Ok(())
}

/// Draws every coordinate not in `touched` from the (diagonal) prior.
fn draw_untouched<R: Rng + ?Sized>(touched: &[bool], prior: &Prior, rng: &mut R, theta: &mut [f64]) {
    let PriorCov::Diagonal(var) = prior.cov() else {
        unreachable!("dense priors draw every coordinate jointly")
    };
    let mu0 = prior.mean();
    for c in (0..theta.len()).filter(|&c| !touched[c]) {
        let e: f64 = StandardNormal.sample(rng);
        theta[c] = mu0[c] + var[c].sqrt() * e;
    }
}

struct Group {
    z: Vec<bool>,
    count: f64,
    sums: Vec<f64>,
}

pub(crate) struct Grouped {
    index: HashMap<Vec<bool>, usize>,
    groups: Vec<Group>,
    by_treated: Vec<Vec<usize>>,
    // scratch buffers reused across sweeps
    entries: Vec<(usize, f64)>,
    rows: Vec<(f64, f64, usize, usize)>,
    col_slot: Vec<usize>,
    etas: Vec<f64>,
}

impl Grouped {
    fn new(spec: &RewardSpec) -> Self {
        Self {
            index: HashMap::new(),
            groups: Vec::new(),
            by_treated: vec![Vec::new(); spec.n()],
            entries: Vec::new(),
            rows: Vec::new(),
            col_slot: vec![usize::MAX; spec.dimension()],
            etas: Vec::new(),
        }
    }

    fn ingest(&mut self, z: &[bool], r: &[f64]) {
        let gi = match self.index.get(z) {
            Some(&gi) => gi,
            None => {
                let gi = self.groups.len();
                self.groups.push(Group { z: z.to_vec(), count: 0.0, sums: vec![0.0; z.len()] });
                self.index.insert(z.to_vec(), gi);
                for (k, _) in z.iter().enumerate().filter(|(_, &t)| t) {
                    self.by_treated[k].push(gi);
                }
                gi
            }
        };
        let g = &mut self.groups[gi];
        g.count += 1.0;
        for (s, v) in g.sums.iter_mut().zip(r) {
            *s += v;
        }
    }

    fn draw_theta<R: Rng + ?Sized>(
        &mut self,
        spec: &RewardSpec,
        adj: &Adjacency,
        prior: &Prior,
        rng: &mut R,
        theta: &mut [f64],
    ) -> Result<()> {
        let dense = matches!(prior.cov(), PriorCov::Dense { .. });
        self.entries.clear();
        self.rows.clear();
        let mut cols: Vec<usize> = if dense { (0..spec.dimension()).collect() } else { Vec::new() };
        if dense {
            for (s, c) in cols.iter().enumerate() {
                self.col_slot[*c] = s;
            }
        }
        for g in &self.groups {
            for i in 0..spec.n() {
                let start = self.entries.len();
                spec.row_into(&g.z, adj, i, &mut self.entries);
                let end = self.entries.len();
                if end == start {
                    continue;
                }
                for e in &self.entries[start..end] {
                    if self.col_slot[e.0] == usize::MAX {
                        self.col_slot[e.0] = cols.len();
                        cols.push(e.0);
                    }
                }
                self.rows.push((g.count, g.sums[i], start, end));
            }
        }
        let k = cols.len();
        let mut gram = vec![0.0; k * k];
        let mut b = vec![0.0; k];
        for &(m, s, start, end) in &self.rows {
            let row = &self.entries[start..end];
            for &(c1, v1) in row {
                let a = self.col_slot[c1];
                b[a] += v1 * s;
                for &(c2, v2) in row {
                    gram[a * k + self.col_slot[c2]] += m * v1 * v2;
                }
            }
        }
        let result = draw_block(&cols, &gram, &b, prior, rng, theta);
        let mut touched = vec![false; spec.dimension()];
        for &c in &cols {
            touched[c] = true;
            self.col_slot[c] = usize::MAX;
        }
        result?;
        if !dense {
            draw_untouched(&touched, prior, rng, theta);
        }
        Ok(())
    }

    fn edge_llr(
        &mut self,
        spec: &RewardSpec,
        adj: &mut Adjacency,
        theta: &[f64],
        sigma2: f64,
        i: usize,
        j: usize,
    ) -> f64 {
        let present = adj.has_edge(i, j);
        // (node, partner): node's row moves only in groups treating the partner
        let endpoints = [(i, j), (j, i)];
        self.etas.clear();
        adj.set_edge(i, j, false);
        for &(node, partner) in &endpoints {
            for &gi in &self.by_treated[partner] {
                self.etas.push(spec.node_reward(theta, adj, &self.groups[gi].z, node));
            }
        }
        adj.set_edge(i, j, true);
        let mut acc = 0.0;
        let mut slot = 0;
        for &(node, partner) in &endpoints {
            for &gi in &self.by_treated[partner] {
                let g = &self.groups[gi];
                let eta0 = self.etas[slot];
                slot += 1;
                let eta1 = spec.node_reward(theta, adj, &g.z, node);
                acc += 2.0 * g.sums[node] * (eta1 - eta0) + g.count * (eta0 * eta0 - eta1 * eta1);
            }
        }
        adj.set_edge(i, j, present);
        acc / (2.0 * sigma2)
    }
}

/// Statistics for linear-in-means rewards.
pub(crate) struct Means {
    n: usize,
    shared: bool,
    /// `c[k * n + l]`: number of rounds treating both `k` and `l`.
    c: Vec<f64>,
    /// `rz[i * n + k]`: sum of node `i`'s reward over rounds treating `k`.
    rz: Vec<f64>,
    /// `v[i * n + j] = sum_{k in N_i} c[k, j]`.
    v: Vec<f64>,
    /// `p[i] = sum_s r_si x_si` with `x_si` the treated-neighbour count.
    p: Vec<f64>,
    /// `q[i] = sum_s x_si^2`.
    q: Vec<f64>,
    deg: Vec<usize>,
}

/// Graph-dependent part of a node's squared error, up to terms that do not
/// depend on its neighbourhood.
#[inline]
fn lim_loss(d: usize, p: f64, q: f64, w: f64, mu: f64, beta: f64) -> f64 {
    if d == 0 {
        return 0.0;
    }
    let b = beta / d as f64;
    -2.0 * b * p + 2.0 * mu * b * w + b * b * q
}

impl Means {
    fn new(n: usize, shared: bool, adj: &Adjacency) -> Self {
        let mut m = Self {
            n,
            shared,
            c: vec![0.0; n * n],
            rz: vec![0.0; n * n],
            v: vec![0.0; n * n],
            p: vec![0.0; n],
            q: vec![0.0; n],
            deg: vec![0; n],
        };
        m.rebuild(adj);
        m
    }

    fn rebuild(&mut self, adj: &Adjacency) {
        let n = self.n;
        self.v.fill(0.0);
        for i in 0..n {
            let nbrs = adj.neighbors(i);
            self.deg[i] = nbrs.len();
            let (mut p, mut q) = (0.0, 0.0);
            for &k in nbrs {
                p += self.rz[i * n + k];
                for j in 0..n {
                    self.v[i * n + j] += self.c[k * n + j];
                }
            }
            for &k in nbrs {
                q += self.v[i * n + k];
            }
            self.p[i] = p;
            self.q[i] = q;
        }
    }

    fn ingest(&mut self, adj: &Adjacency, z: &[bool], r: &[f64]) {
        let n = self.n;
        let treated: Vec<usize> = (0..n).filter(|&k| z[k]).collect();
        for &k in &treated {
            for &l in &treated {
                self.c[k * n + l] += 1.0;
            }
        }
        for i in 0..n {
            for &k in &treated {
                self.rz[i * n + k] += r[i];
            }
            let x = adj.neighbors(i).iter().filter(|&&k| z[k]).count() as f64;
            if x > 0.0 {
                for &j in &treated {
                    self.v[i * n + j] += x;
                }
                self.q[i] += x * x;
                self.p[i] += r[i] * x;
            }
        }
    }

    #[inline]
    fn params(&self, theta: &[f64], i: usize) -> (f64, f64) {
        if self.shared {
            (theta[0], theta[1])
        } else {
            (theta[i], theta[self.n + i])
        }
    }

    /// Loss of node `u` with and without neighbour `w`.
    fn node_losses(&self, u: usize, w: usize, present: bool, mu: f64, beta: f64) -> (f64, f64) {
        let n = self.n;
        let (d, p, q, wv) = (self.deg[u], self.p[u], self.q[u], self.v[u * n + u]);
        let cw = self.c[w * n + w];
        let cross = self.v[u * n + w];
        if present {
            let without = lim_loss(d - 1, p - self.rz[u * n + w], q - 2.0 * cross + cw, wv - self.c[w * n + u], mu, beta);
            (without, lim_loss(d, p, q, wv, mu, beta))
        } else {
            let with = lim_loss(d + 1, p + self.rz[u * n + w], q + 2.0 * cross + cw, wv + self.c[w * n + u], mu, beta);
            (lim_loss(d, p, q, wv, mu, beta), with)
        }
    }

    fn edge_llr(&self, adj: &Adjacency, theta: &[f64], sigma2: f64, i: usize, j: usize) -> f64 {
        let present = adj.has_edge(i, j);
        let mut acc = 0.0;
        for (u, w) in [(i, j), (j, i)] {
            let (mu, beta) = self.params(theta, u);
            let (l0, l1) = self.node_losses(u, w, present, mu, beta);
            acc += l0 - l1;
        }
        acc / (2.0 * sigma2)
    }

    fn flip(&mut self, i: usize, j: usize, present: bool) {
        let n = self.n;
        for (u, w) in [(i, j), (j, i)] {
            let cw = self.c[w * n + w];
            if present {
                self.q[u] += 2.0 * self.v[u * n + w] + cw;
                self.p[u] += self.rz[u * n + w];
                self.deg[u] += 1;
                for k in 0..n {
                    self.v[u * n + k] += self.c[w * n + k];
                }
            } else {
                self.q[u] -= 2.0 * self.v[u * n + w] - cw;
                self.p[u] -= self.rz[u * n + w];
                self.deg[u] -= 1;
                for k in 0..n {
                    self.v[u * n + k] -= self.c[w * n + k];
                }
            }
        }
    }

    /// Normal equations of node `u`'s `(mu, beta)` pair.
    fn node_block(&self, u: usize) -> ([f64; 4], [f64; 2]) {
        let n = self.n;
        let d = self.deg[u];
        if d == 0 {
            return ([self.c[u * n + u], 0.0, 0.0, 0.0], [self.rz[u * n + u], 0.0]);
        }
        let inv = 1.0 / d as f64;
        let w = self.v[u * n + u] * inv;
        (
            [self.c[u * n + u], w, w, self.q[u] * inv * inv],
            [self.rz[u * n + u], self.p[u] * inv],
        )
    }

    fn draw_theta<R: Rng + ?Sized>(&mut self, prior: &Prior, rng: &mut R, theta: &mut [f64]) -> Result<()> {
        let n = self.n;
        if self.shared {
            let (mut g, mut b) = ([0.0; 4], [0.0; 2]);
            for u in 0..n {
                let (gu, bu) = self.node_block(u);
                for k in 0..4 {
                    g[k] += gu[k];
                }
                b[0] += bu[0];
                b[1] += bu[1];
            }
            return draw_block(&[0, 1], &g, &b, prior, rng, theta);
        }
        match prior.cov() {
            PriorCov::Diagonal(_) => {
                for u in 0..n {
                    let (g, b) = self.node_block(u);
                    draw_block(&[u, n + u], &g, &b, prior, rng, theta)?;
                }
                Ok(())
            }
            PriorCov::Dense { .. } => {
                let d = 2 * n;
                let mut g = vec![0.0; d * d];
                let mut b = vec![0.0; d];
                for u in 0..n {
                    let (gu, bu) = self.node_block(u);
                    let idx = [u, n + u];
                    for x in 0..2 {
                        b[idx[x]] = bu[x];
                        for y in 0..2 {
                            g[idx[x] * d + idx[y]] = gu[2 * x + y];
                        }
                    }
                }
                let cols: Vec<usize> = (0..d).collect();
                draw_block(&cols, &g, &b, prior, rng, theta)
            }
        }
    }
}
