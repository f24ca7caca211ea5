//! Reward parameterizations compatible with neighbourhood interference.
//!
//! Every parameterization is linear in its parameter vector: the expected
//! reward of node `i` is `h_i(Z; A) . theta`, where the design row `h_i` only
//! looks at `Z_i`, the treatments of `i`'s neighbours and the neighbourhood
//! itself. Two routes to the expected reward exist and are tested against
//! each other: the sparse design row dotted with theta, and
//! [`RewardSpec::node_reward`], which evaluates the closed form directly.

mod env;
mod protocol;

pub use env::Environment;
pub use protocol::{sample_params, BlockDist, Dist, Protocol};

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Adjacency;

/// The family of reward functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RewardKind {
    /// `r_i = mu_i Z_i + beta_i * (fraction of treated neighbours)`.
    #[serde(rename = "linear_in_means_per_node", alias = "linear_in_means")]
    LinearInMeans,
    /// Linear-in-means with a single `(mu, beta)` pair shared by all nodes.
    LinearInMeansShared,
    /// `r_i = mu Z_i + gamma_{min(d_i, d_max)}` with parameters shared by all nodes.
    CountBasedShared { d_max: usize },
    /// Per-node version of [`RewardKind::CountBasedShared`].
    CountBasedPerNode { d_max: usize },
    /// Direct effect, per-pair spillover and per-(node, neighbour pair) interaction.
    PairwiseNia,
    /// [`RewardKind::PairwiseNia`] without the interaction block.
    AdditivePairs,
    /// Direct effect active only when no neighbour is treated, plus pair spillovers.
    SaturationSpecA,
    /// Pair spillovers plus a `lambda_i Z_i d_i` treatment-by-exposure term.
    InteractionSpecB,
    /// `r_i = mu Z_i + gamma_1 1{d_i = 1}`: the two-parameter lower-bound instance.
    PairedIndicator,
}

/// Named parameter blocks of the layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockName {
    Mu,
    Beta,
    Gamma,
    Xi,
    Lambda,
}

impl BlockName {
    pub fn as_str(self) -> &'static str {
        match self {
            BlockName::Mu => "mu",
            BlockName::Beta => "beta",
            BlockName::Gamma => "gamma",
            BlockName::Xi => "xi",
            BlockName::Lambda => "lambda",
        }
    }
}

/// A contiguous run of parameters sharing a name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamBlock {
    pub name: BlockName,
    pub range: Range<usize>,
    /// Within-block index used for bucket-indexed distributions, e.g. the
    /// count `k` of `gamma_k`; `None` when the block has no bucket structure.
    pub buckets: Option<usize>,
}

fn choose2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// A reward kind bound to a network size, which fixes the parameter layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RewardSpec {
    kind: RewardKind,
    n: usize,
}

impl RewardSpec {
    pub fn new(kind: RewardKind, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::param(format!("reward spec needs n >= 2, got {n}")));
        }
        match kind {
            RewardKind::CountBasedShared { d_max } | RewardKind::CountBasedPerNode { d_max } if d_max == 0 => {
                Err(Error::param("count-based specs need d_max >= 1"))
            }
            _ => Ok(Self { kind, n }),
        }
    }

    #[inline]
    pub fn kind(&self) -> RewardKind {
        self.kind
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Length of the parameter vector.
    pub fn dimension(&self) -> usize {
        let n = self.n;
        match self.kind {
            RewardKind::LinearInMeans => 2 * n,
            RewardKind::LinearInMeansShared => 2,
            RewardKind::CountBasedShared { d_max } => 1 + d_max,
            RewardKind::CountBasedPerNode { d_max } => n * (1 + d_max),
            RewardKind::PairwiseNia => n + choose2(n) + n * choose2(n - 1),
            RewardKind::AdditivePairs | RewardKind::SaturationSpecA => n + choose2(n),
            RewardKind::InteractionSpecB => n + choose2(n) + n,
            RewardKind::PairedIndicator => 2,
        }
    }

    pub fn blocks(&self) -> Vec<ParamBlock> {
        let n = self.n;
        let p = choose2(n);
        let block = |name, start: usize, len: usize| ParamBlock {
            name,
            range: start..start + len,
            buckets: None,
        };
        match self.kind {
            RewardKind::LinearInMeans => vec![block(BlockName::Mu, 0, n), block(BlockName::Beta, n, n)],
            RewardKind::LinearInMeansShared => vec![block(BlockName::Mu, 0, 1), block(BlockName::Beta, 1, 1)],
            RewardKind::CountBasedShared { d_max } => vec![
                block(BlockName::Mu, 0, 1),
                ParamBlock { name: BlockName::Gamma, range: 1..1 + d_max, buckets: Some(d_max) },
            ],
            RewardKind::CountBasedPerNode { d_max } => vec![
                block(BlockName::Mu, 0, n),
                ParamBlock { name: BlockName::Gamma, range: n..n + n * d_max, buckets: Some(d_max) },
            ],
            RewardKind::PairwiseNia => vec![
                block(BlockName::Mu, 0, n),
                block(BlockName::Gamma, n, p),
                block(BlockName::Xi, n + p, n * choose2(n - 1)),
            ],
            RewardKind::AdditivePairs | RewardKind::SaturationSpecA => {
                vec![block(BlockName::Mu, 0, n), block(BlockName::Gamma, n, p)]
            }
            RewardKind::InteractionSpecB => vec![
                block(BlockName::Mu, 0, n),
                block(BlockName::Gamma, n, p),
                block(BlockName::Lambda, n + p, n),
            ],
            RewardKind::PairedIndicator => vec![block(BlockName::Mu, 0, 1), block(BlockName::Gamma, 1, 1)],
        }
    }

    /// Whether total reward is affine in `Z` for every `(A, theta)`.
    pub fn is_collapsible(&self) -> bool {
        matches!(
            self.kind,
            RewardKind::LinearInMeans | RewardKind::LinearInMeansShared | RewardKind::AdditivePairs
        )
    }

    /// Whether the kind is one of the linear-in-means variants.
    pub fn is_linear_in_means(&self) -> bool {
        matches!(self.kind, RewardKind::LinearInMeans | RewardKind::LinearInMeansShared)
    }

    /// True when toggling `A_ij` can only change node `i`'s row in rounds
    /// where `j` is treated. Linear-in-means is the exception: the neighbour
    /// count in the denominator changes regardless.
    pub fn edge_needs_treated_endpoint(&self) -> bool {
        !self.is_linear_in_means()
    }

    /// Columns touched by each node's design row, when rows of distinct
    /// nodes never share a column.
    pub fn node_partition(&self) -> Option<Vec<Vec<usize>>> {
        let n = self.n;
        match self.kind {
            RewardKind::LinearInMeans => Some((0..n).map(|i| vec![i, n + i]).collect()),
            RewardKind::CountBasedPerNode { d_max } => Some(
                (0..n)
                    .map(|i| std::iter::once(i).chain((1..=d_max).map(|k| self.gamma_node_col(i, k))).collect())
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Column of the unordered pair `{i, j}` in the gamma block.
    #[inline]
    pub fn pair_col(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.n + pair_index(self.n, a, b)
    }

    /// Column of `xi_{i, {j,k}}`.
    #[inline]
    pub fn triple_col(&self, i: usize, j: usize, k: usize) -> usize {
        let (a, b) = if j < k { (j, k) } else { (k, j) };
        let shift = |x: usize| if x > i { x - 1 } else { x };
        let m = self.n - 1;
        self.n + choose2(self.n) + i * choose2(m) + pair_index(m, shift(a), shift(b))
    }

    #[inline]
    fn gamma_node_col(&self, i: usize, k: usize) -> usize {
        match self.kind {
            RewardKind::CountBasedPerNode { d_max } => self.n + i * d_max + (k - 1),
            _ => unreachable!(),
        }
    }

    fn check_inputs(&self, z: &[bool], adj: &Adjacency) -> Result<()> {
        if z.len() != self.n || adj.n() != self.n {
            return Err(Error::param(format!(
                "treatment length {} / graph size {} do not match spec n = {}",
                z.len(),
                adj.n(),
                self.n
            )));
        }
        Ok(())
    }

    /// Appends the nonzero entries of node `i`'s design row to `out`.
    ///
    /// Caller guarantees matching sizes; `out` is not cleared.
    pub fn row_into(&self, z: &[bool], adj: &Adjacency, i: usize, out: &mut Vec<(usize, f64)>) {
        let n = self.n;
        let nbrs = adj.neighbors(i);
        match self.kind {
            RewardKind::LinearInMeans | RewardKind::LinearInMeansShared => {
                let (mu_col, beta_col) = if self.kind == RewardKind::LinearInMeans { (i, n + i) } else { (0, 1) };
                if z[i] {
                    out.push((mu_col, 1.0));
                }
                if !nbrs.is_empty() {
                    let x = treated_count(nbrs, z);
                    if x > 0 {
                        out.push((beta_col, x as f64 / nbrs.len() as f64));
                    }
                }
            }
            RewardKind::CountBasedShared { d_max } => {
                if z[i] {
                    out.push((0, 1.0));
                }
                let d = treated_count(nbrs, z);
                if d > 0 {
                    out.push((d.min(d_max), 1.0));
                }
            }
            RewardKind::CountBasedPerNode { d_max } => {
                if z[i] {
                    out.push((i, 1.0));
                }
                let d = treated_count(nbrs, z);
                if d > 0 {
                    out.push((self.gamma_node_col(i, d.min(d_max)), 1.0));
                }
            }
            RewardKind::PairwiseNia | RewardKind::AdditivePairs => {
                if z[i] {
                    out.push((i, 1.0));
                }
                for &j in nbrs.iter().filter(|&&j| z[j]) {
                    out.push((self.pair_col(i, j), 1.0));
                }
                if self.kind == RewardKind::PairwiseNia {
                    for (a, &j) in nbrs.iter().enumerate() {
                        if !z[j] {
                            continue;
                        }
                        for &k in nbrs[a + 1..].iter().filter(|&&k| z[k]) {
                            out.push((self.triple_col(i, j, k), 1.0));
                        }
                    }
                }
            }
            RewardKind::SaturationSpecA => {
                let d = treated_count(nbrs, z);
                if z[i] && d == 0 {
                    out.push((i, 1.0));
                }
                for &j in nbrs.iter().filter(|&&j| z[j]) {
                    out.push((self.pair_col(i, j), 1.0));
                }
            }
            RewardKind::InteractionSpecB => {
                if z[i] {
                    out.push((i, 1.0));
                }
                let mut d = 0usize;
                for &j in nbrs.iter().filter(|&&j| z[j]) {
                    out.push((self.pair_col(i, j), 1.0));
                    d += 1;
                }
                if z[i] && d > 0 {
                    out.push((n + choose2(n) + i, d as f64));
                }
            }
            RewardKind::PairedIndicator => {
                if z[i] {
                    out.push((0, 1.0));
                }
                if treated_count(nbrs, z) == 1 {
                    out.push((1, 1.0));
                }
            }
        }
    }

    /// Dense design row of node `i`.
    pub fn design_row(&self, z: &[bool], adj: &Adjacency, i: usize) -> Result<Vec<f64>> {
        self.check_inputs(z, adj)?;
        if i >= self.n {
            return Err(Error::param(format!("node {i} out of range for n = {}", self.n)));
        }
        let mut sparse = Vec::new();
        self.row_into(z, adj, i, &mut sparse);
        let mut row = vec![0.0; self.dimension()];
        for (c, v) in sparse {
            row[c] += v;
        }
        Ok(row)
    }

    /// The `n x D` design matrix `H(Z; A)`.
    pub fn design_matrix(&self, z: &[bool], adj: &Adjacency) -> Result<DMatrix<f64>> {
        self.check_inputs(z, adj)?;
        let mut h = DMatrix::zeros(self.n, self.dimension());
        let mut sparse = Vec::new();
        for i in 0..self.n {
            sparse.clear();
            self.row_into(z, adj, i, &mut sparse);
            for &(c, v) in &sparse {
                h[(i, c)] += v;
            }
        }
        Ok(h)
    }

    /// Expected reward of node `i`, evaluated from the closed-form reward
    /// formula without building a design row.
    ///
    /// Caller guarantees matching sizes.
    pub fn node_reward(&self, theta: &[f64], adj: &Adjacency, z: &[bool], i: usize) -> f64 {
        let n = self.n;
        let nbrs = adj.neighbors(i);
        let zi = if z[i] { 1.0 } else { 0.0 };
        match self.kind {
            RewardKind::LinearInMeans | RewardKind::LinearInMeansShared => {
                let frac = if nbrs.is_empty() {
                    0.0
                } else {
                    treated_count(nbrs, z) as f64 / nbrs.len() as f64
                };
                let (mu, beta) = if self.kind == RewardKind::LinearInMeans {
                    (theta[i], theta[n + i])
                } else {
                    (theta[0], theta[1])
                };
                mu * zi + beta * frac
            }
            RewardKind::CountBasedShared { d_max } => {
                let d = treated_count(nbrs, z);
                let spill = if d == 0 { 0.0 } else { theta[d.min(d_max)] };
                theta[0] * zi + spill
            }
            RewardKind::CountBasedPerNode { d_max } => {
                let d = treated_count(nbrs, z);
                let spill = if d == 0 { 0.0 } else { theta[self.gamma_node_col(i, d.min(d_max))] };
                theta[i] * zi + spill
            }
            RewardKind::PairwiseNia | RewardKind::AdditivePairs => {
                let mut r = theta[i] * zi;
                for (a, &j) in nbrs.iter().enumerate() {
                    if !z[j] {
                        continue;
                    }
                    r += theta[self.pair_col(i, j)];
                    if self.kind == RewardKind::PairwiseNia {
                        for &k in &nbrs[a + 1..] {
                            if z[k] {
                                r += theta[self.triple_col(i, j, k)];
                            }
                        }
                    }
                }
                r
            }
            RewardKind::SaturationSpecA => {
                let mut d = 0usize;
                let mut spill = 0.0;
                for &j in nbrs.iter().filter(|&&j| z[j]) {
                    spill += theta[self.pair_col(i, j)];
                    d += 1;
                }
                let direct = if d == 0 { theta[i] * zi } else { 0.0 };
                direct + spill
            }
            RewardKind::InteractionSpecB => {
                let mut d = 0usize;
                let mut spill = 0.0;
                for &j in nbrs.iter().filter(|&&j| z[j]) {
                    spill += theta[self.pair_col(i, j)];
                    d += 1;
                }
                theta[i] * zi + spill + theta[n + choose2(n) + i] * zi * d as f64
            }
            RewardKind::PairedIndicator => {
                let ind = if treated_count(nbrs, z) == 1 { 1.0 } else { 0.0 };
                theta[0] * zi + theta[1] * ind
            }
        }
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dimension() {
            return Err(Error::param(format!(
                "theta has length {}, spec dimension is {}",
                theta.len(),
                self.dimension()
            )));
        }
        Ok(())
    }

    /// Per-node expected rewards `H(Z; A) theta`.
    pub fn expected_rewards(&self, theta: &[f64], adj: &Adjacency, z: &[bool]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        self.check_inputs(z, adj)?;
        Ok((0..self.n).map(|i| self.node_reward(theta, adj, z, i)).collect())
    }

    /// Expected total reward `f(Z) = sum_i r_i(Z)`.
    pub fn total_reward(&self, theta: &[f64], adj: &Adjacency, z: &[bool]) -> Result<f64> {
        Ok(self.expected_rewards(theta, adj, z)?.iter().sum())
    }

    /// Affine decomposition `f(Z) = c + Z . s` of the total reward, or `None`
    /// when the kind does not collapse.
    pub fn modular_scores(&self, theta: &[f64], adj: &Adjacency) -> Option<(f64, Vec<f64>)> {
        if theta.len() != self.dimension() || adj.n() != self.n {
            return None;
        }
        let n = self.n;
        match self.kind {
            RewardKind::LinearInMeans | RewardKind::LinearInMeansShared => {
                let shared = self.kind == RewardKind::LinearInMeansShared;
                let mut s: Vec<f64> = if shared { vec![theta[0]; n] } else { theta[..n].to_vec() };
                for i in 0..n {
                    let nbrs = adj.neighbors(i);
                    if nbrs.is_empty() {
                        continue;
                    }
                    let beta = if shared { theta[1] } else { theta[n + i] };
                    let w = beta / nbrs.len() as f64;
                    for &j in nbrs {
                        s[j] += w;
                    }
                }
                Some((0.0, s))
            }
            RewardKind::AdditivePairs => {
                let mut s: Vec<f64> = theta[..n].to_vec();
                for (i, j) in adj.edges() {
                    let g = theta[self.pair_col(i, j)];
                    s[i] += g;
                    s[j] += g;
                }
                Some((0.0, s))
            }
            _ => None,
        }
    }
}

/// Index of the pair `(a, b)`, `a < b < m`, in lexicographic order.
#[inline]
fn pair_index(m: usize, a: usize, b: usize) -> usize {
    a * (2 * m - a - 1) / 2 + (b - a - 1)
}

#[inline]
pub(crate) fn treated_count(nbrs: &[usize], z: &[bool]) -> usize {
    nbrs.iter().filter(|&&k| z[k]).count()
}
