//! Budgeted treatment optimizers: `argmax_{|Z| <= B} sum_i r_i(Z; A, theta)`.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Adjacency;
use crate::reward::RewardSpec;

fn default_max_candidates() -> u64 {
    1_000_000
}
fn default_restarts() -> usize {
    20
}
fn default_max_iters() -> usize {
    200
}

/// How the budgeted argmax is solved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerMode {
    /// Top-B for collapsible specs, otherwise enumeration when it fits under
    /// the default candidate cap, otherwise local search.
    #[default]
    Auto,
    ExactEnumeration {
        #[serde(default = "default_max_candidates")]
        max_candidates: u64,
    },
    TopB,
    SwapLocalSearch {
        #[serde(default = "default_restarts")]
        restarts: usize,
        #[serde(default = "default_max_iters")]
        max_iters: usize,
    },
}

/// Number of subsets of size at most `b` of `n` items, saturating.
pub fn candidate_count(n: usize, b: usize) -> u64 {
    let mut total: u64 = 0;
    let mut c: u128 = 1;
    for k in 0..=b.min(n) {
        if k > 0 {
            c = c * (n - k + 1) as u128 / k as u128;
        }
        total = total.saturating_add(c.min(u64::MAX as u128) as u64);
    }
    total
}

/// Relative tolerance under which two objective values count as tied.
#[inline]
fn improves(candidate: f64, incumbent: f64) -> bool {
    candidate > incumbent + 1e-12 * incumbent.abs().max(1.0)
}

#[inline]
fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Indicator of the `b` largest positive scores; ties go to the lower index.
pub fn top_b(scores: &[f64], b: usize) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&j| scores[j] > 0.0).collect();
    idx.sort_by(|&x, &y| scores[y].total_cmp(&scores[x]).then(x.cmp(&y)));
    let mut z = vec![false; scores.len()];
    for &j in idx.iter().take(b) {
        z[j] = true;
    }
    z
}

/// Per-node reward cache supporting single-node toggles.
struct Evaluator<'a> {
    spec: &'a RewardSpec,
    theta: &'a [f64],
    adj: &'a Adjacency,
    z: Vec<bool>,
    rewards: Vec<f64>,
    total: f64,
}

impl<'a> Evaluator<'a> {
    fn new(spec: &'a RewardSpec, theta: &'a [f64], adj: &'a Adjacency, z: Vec<bool>) -> Self {
        let rewards: Vec<f64> = (0..spec.n()).map(|i| spec.node_reward(theta, adj, &z, i)).collect();
        let total = rewards.iter().sum();
        Self { spec, theta, adj, z, rewards, total }
    }

    /// Toggles node `j`, returning the saved rewards needed to undo it.
    fn toggle(&mut self, j: usize, saved: &mut Vec<(usize, f64)>) -> f64 {
        saved.clear();
        let prev_total = self.total;
        self.z[j] = !self.z[j];
        for &l in std::iter::once(&j).chain(self.adj.neighbors(j)) {
            let new = self.spec.node_reward(self.theta, self.adj, &self.z, l);
            saved.push((l, self.rewards[l]));
            self.total += new - self.rewards[l];
            self.rewards[l] = new;
        }
        prev_total
    }

    fn undo(&mut self, j: usize, saved: &[(usize, f64)], prev_total: f64) {
        self.z[j] = !self.z[j];
        for &(l, v) in saved {
            self.rewards[l] = v;
        }
        self.total = prev_total;
    }

    /// Value after toggling `j`, leaving the state unchanged.
    fn peek(&mut self, j: usize, saved: &mut Vec<(usize, f64)>) -> f64 {
        let prev = self.toggle(j, saved);
        let v = self.total;
        self.undo(j, saved, prev);
        v
    }

    fn recompute(&mut self) {
        for i in 0..self.spec.n() {
            self.rewards[i] = self.spec.node_reward(self.theta, self.adj, &self.z, i);
        }
        self.total = self.rewards.iter().sum();
    }
}

fn check(spec: &RewardSpec, theta: &[f64], adj: &Adjacency, budget: usize) -> Result<()> {
    if theta.len() != spec.dimension() || adj.n() != spec.n() {
        return Err(Error::param("theta or graph does not match the spec"));
    }
    if budget > spec.n() {
        return Err(Error::param(format!("budget {budget} exceeds n = {}", spec.n())));
    }
    Ok(())
}

/// Exhaustive search over all subsets of size at most `budget`.
///
/// Among tied optima the smallest set wins, then the lexicographically
/// smallest index tuple.
pub fn exact_enumeration(
    spec: &RewardSpec,
    theta: &[f64],
    adj: &Adjacency,
    budget: usize,
    max_candidates: u64,
) -> Result<(Vec<bool>, f64)> {
    check(spec, theta, adj, budget)?;
    let count = candidate_count(spec.n(), budget);
    if count > max_candidates {
        return Err(Error::param(format!(
            "exact enumeration would visit {count} treatment sets (cap {max_candidates}); use swap_local_search"
        )));
    }
    let n = spec.n();
    let mut ev = Evaluator::new(spec, theta, adj, vec![false; n]);
    let mut best = (ev.total, 0usize, vec![false; n]);
    dfs_iter(&mut ev, budget, &mut best);
    Ok((best.2, best.0))
}

/// Iterative depth-first enumeration of index tuples `j_1 < ... < j_k`, `k <= budget`.
fn dfs_iter(ev: &mut Evaluator<'_>, budget: usize, best: &mut (f64, usize, Vec<bool>)) {
    let n = ev.z.len();
    if budget == 0 || n == 0 {
        return;
    }
    let mut stack: Vec<(usize, f64, Vec<(usize, f64)>)> = Vec::with_capacity(budget);
    let mut pool: Vec<Vec<(usize, f64)>> = (0..budget).map(|_| Vec::new()).collect();
    let mut next = 0usize;
    loop {
        if next < n && stack.len() < budget {
            let mut saved = pool.pop().unwrap_or_default();
            let prev = ev.toggle(next, &mut saved);
            stack.push((next, prev, saved));
            let size = stack.len();
            if improves(ev.total, best.0) || (ties(ev.total, best.0) && size < best.1) {
                best.0 = ev.total;
                best.1 = size;
                best.2.copy_from_slice(&ev.z);
            }
            next += 1;
        } else {
            match stack.pop() {
                Some((j, prev, saved)) => {
                    ev.undo(j, &saved, prev);
                    pool.push(saved);
                    next = j + 1;
                }
                None => break,
            }
        }
    }
}

/// Best local optimum under single toggles and single swaps over several restarts.
///
/// Restart 0 starts from a greedy fill; the others from uniformly random
/// sets of size `budget`.
pub fn swap_local_search<R: Rng + ?Sized>(
    spec: &RewardSpec,
    theta: &[f64],
    adj: &Adjacency,
    budget: usize,
    restarts: usize,
    max_iters: usize,
    rng: &mut R,
) -> Result<(Vec<bool>, f64)> {
    check(spec, theta, adj, budget)?;
    let n = spec.n();
    let mut best: Option<(Vec<bool>, f64)> = None;
    let mut saved = Vec::new();
    let mut saved2 = Vec::new();
    for restart in 0..restarts.max(1) {
        let mut ev = Evaluator::new(spec, theta, adj, vec![false; n]);
        if restart == 0 {
            for _ in 0..budget {
                let mut pick = None;
                let mut val = ev.total;
                let free: Vec<usize> = (0..n).filter(|&j| !ev.z[j]).collect();
                for j in free {
                    let v = ev.peek(j, &mut saved);
                    if improves(v, val) {
                        val = v;
                        pick = Some(j);
                    }
                }
                match pick {
                    Some(j) => {
                        ev.toggle(j, &mut saved);
                    }
                    None => break,
                }
            }
        } else {
            for j in sample(rng, n, budget).into_iter() {
                ev.z[j] = true;
            }
            ev.recompute();
        }
        for _ in 0..max_iters {
            let size = ev.z.iter().filter(|&&b| b).count();
            // (value, out, in): out = node removed, in = node added
            let mut mv: Option<(f64, Option<usize>, Option<usize>)> = None;
            let mut incumbent = ev.total;
            for j in 0..n {
                if ev.z[j] || size < budget {
                    let v = ev.peek(j, &mut saved);
                    if improves(v, incumbent) {
                        incumbent = v;
                        mv = Some(if ev.z[j] { (v, Some(j), None) } else { (v, None, Some(j)) });
                    }
                }
            }
            let chosen: Vec<usize> = (0..n).filter(|&j| ev.z[j]).collect();
            let free: Vec<usize> = (0..n).filter(|&j| !ev.z[j]).collect();
            for &out in &chosen {
                let prev = ev.toggle(out, &mut saved2);
                for &inn in &free {
                    let v = ev.peek(inn, &mut saved);
                    if improves(v, incumbent) {
                        incumbent = v;
                        mv = Some((v, Some(out), Some(inn)));
                    }
                }
                ev.undo(out, &saved2, prev);
            }
            match mv {
                None => break,
                Some((_, out, inn)) => {
                    if let Some(o) = out {
                        ev.toggle(o, &mut saved);
                    }
                    if let Some(i) = inn {
                        ev.toggle(i, &mut saved);
                    }
                }
            }
        }
        ev.recompute();
        let better = match &best {
            None => true,
            Some((_, v)) => improves(ev.total, *v),
        };
        if better {
            best = Some((ev.z.clone(), ev.total));
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Solves the budgeted argmax with the requested mode.
pub fn optimize_treatment<R: Rng + ?Sized>(
    spec: &RewardSpec,
    theta: &[f64],
    adj: &Adjacency,
    budget: usize,
    mode: OptimizerMode,
    rng: &mut R,
) -> Result<Vec<bool>> {
    check(spec, theta, adj, budget)?;
    match mode {
        OptimizerMode::TopB => {
            let (_, s) = spec.modular_scores(theta, adj).ok_or_else(|| {
                Error::param(format!("top_b needs a collapsible spec, {:?} is not", spec.kind()))
            })?;
            Ok(top_b(&s, budget))
        }
        OptimizerMode::ExactEnumeration { max_candidates } => {
            Ok(exact_enumeration(spec, theta, adj, budget, max_candidates)?.0)
        }
        OptimizerMode::SwapLocalSearch { restarts, max_iters } => {
            Ok(swap_local_search(spec, theta, adj, budget, restarts, max_iters, rng)?.0)
        }
        OptimizerMode::Auto => {
            if let Some((_, s)) = spec.modular_scores(theta, adj) {
                Ok(top_b(&s, budget))
            } else if candidate_count(spec.n(), budget) <= default_max_candidates() {
                Ok(exact_enumeration(spec, theta, adj, budget, default_max_candidates())?.0)
            } else {
                Ok(swap_local_search(spec, theta, adj, budget, default_restarts(), default_max_iters(), rng)?.0)
            }
        }
    }
}

/// Whether `mode` can be used for `spec` at this size without erroring.
pub fn mode_is_feasible(spec: &RewardSpec, budget: usize, mode: OptimizerMode) -> bool {
    match mode {
        OptimizerMode::TopB => spec.is_collapsible(),
        OptimizerMode::ExactEnumeration { max_candidates } => candidate_count(spec.n(), budget) <= max_candidates,
        _ => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_with, GraphFamily};
    use crate::reward::{sample_params, Protocol, RewardKind};
    use crate::SimRng;
    use rand::SeedableRng;

    fn brute_force(spec: &RewardSpec, theta: &[f64], adj: &Adjacency, budget: usize) -> f64 {
        let n = spec.n();
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize > budget {
                continue;
            }
            let z: Vec<bool> = (0..n).map(|b| mask >> b & 1 == 1).collect();
            best = best.max(spec.total_reward(theta, adj, &z).unwrap());
        }
        best
    }

    #[test]
    fn candidate_counts() {
        assert_eq!(candidate_count(8, 3), 1 + 8 + 28 + 56);
        assert_eq!(candidate_count(20, 6), 1 + 20 + 190 + 1140 + 4845 + 15504 + 38760);
        assert_eq!(candidate_count(3, 5), 8);
    }

    #[test]
    fn top_b_examples() {
        assert_eq!(top_b(&[1.5, 2.0, 1.5], 1), vec![false, true, false]);
        assert_eq!(top_b(&[-1.0, -0.5, -2.0], 2), vec![false; 3]);
        assert_eq!(top_b(&[1.0, 1.0, 1.0], 2), vec![true, true, false]);
        assert_eq!(top_b(&[0.5, -1.0, 0.2], 3), vec![true, false, true]);
    }

    #[test]
    fn enumeration_matches_brute_force() {
        let mut rng = SimRng::seed_from_u64(1);
        for kind in [RewardKind::PairwiseNia, RewardKind::CountBasedShared { d_max: 3 }, RewardKind::InteractionSpecB] {
            for _ in 0..20 {
                let spec = RewardSpec::new(kind, 7).unwrap();
                let theta: Vec<f64> = (0..spec.dimension()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let adj = generate_with(&GraphFamily::ErdosRenyi { p: 0.4 }, 7, &mut rng).unwrap();
                let (z, v) = exact_enumeration(&spec, &theta, &adj, 3, 1_000_000).unwrap();
                assert!(z.iter().filter(|&&b| b).count() <= 3);
                assert!((v - brute_force(&spec, &theta, &adj, 3)).abs() < 1e-9);
                assert!((v - spec.total_reward(&theta, &adj, &z).unwrap()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_objective_prefers_the_empty_set() {
        let spec = RewardSpec::new(RewardKind::PairwiseNia, 5).unwrap();
        let (z, v) = exact_enumeration(&spec, &vec![0.0; spec.dimension()], &Adjacency::complete(5), 2, 100).unwrap();
        assert_eq!((z, v), (vec![false; 5], 0.0));
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let spec = RewardSpec::new(RewardKind::PairwiseNia, 10).unwrap();
        let theta = vec![0.0; spec.dimension()];
        assert!(exact_enumeration(&spec, &theta, &Adjacency::empty(10), 5, 100).is_err());
    }

    #[test]
    fn top_b_requires_collapsible_spec() {
        let spec = RewardSpec::new(RewardKind::PairwiseNia, 4).unwrap();
        let theta = vec![0.0; spec.dimension()];
        let mut rng = SimRng::seed_from_u64(0);
        assert!(optimize_treatment(&spec, &theta, &Adjacency::empty(4), 2, OptimizerMode::TopB, &mut rng).is_err());
    }

    #[test]
    fn collapsible_exact_equals_top_b() {
        let mut rng = SimRng::seed_from_u64(2);
        for kind in [RewardKind::LinearInMeans, RewardKind::AdditivePairs, RewardKind::LinearInMeansShared] {
            for _ in 0..20 {
                let spec = RewardSpec::new(kind, 10).unwrap();
                let theta: Vec<f64> = (0..spec.dimension()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let adj = generate_with(&GraphFamily::ErdosRenyi { p: 0.3 }, 10, &mut rng).unwrap();
                let (_, exact) = exact_enumeration(&spec, &theta, &adj, 3, u64::MAX).unwrap();
                let zt = optimize_treatment(&spec, &theta, &adj, 3, OptimizerMode::TopB, &mut rng).unwrap();
                let vt = spec.total_reward(&theta, &adj, &zt).unwrap();
                assert!((exact - vt).abs() < 1e-9);
                assert!(vt >= -1e-12);
            }
        }
    }

    #[test]
    fn local_search_never_beats_enumeration() {
        let mut rng = SimRng::seed_from_u64(3);
        let spec = RewardSpec::new(RewardKind::PairwiseNia, 8).unwrap();
        let mut equal = 0;
        for _ in 0..100 {
            let theta = sample_params(&spec, &Protocol::head_to_head(3.0), &mut rng).unwrap();
            let adj = generate_with(&GraphFamily::ErdosRenyi { p: 0.3 }, 8, &mut rng).unwrap();
            let (_, exact) = exact_enumeration(&spec, &theta, &adj, 3, 1_000_000).unwrap();
            let (z, local) = swap_local_search(&spec, &theta, &adj, 3, 20, 200, &mut rng).unwrap();
            assert!(z.iter().filter(|&&b| b).count() <= 3);
            assert!(exact >= local - 1e-9);
            if (exact - local).abs() < 1e-9 {
                equal += 1;
            }
        }
        assert!(equal >= 90, "local search matched enumeration in {equal}/100 instances");
    }

    #[test]
    fn constant_shift_does_not_change_the_argmax() {
        let mut rng = SimRng::seed_from_u64(4);
        let spec = RewardSpec::new(RewardKind::AdditivePairs, 6).unwrap();
        let theta: Vec<f64> = (0..spec.dimension()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let adj = generate_with(&GraphFamily::ErdosRenyi { p: 0.5 }, 6, &mut rng).unwrap();
        let (_, s) = spec.modular_scores(&theta, &adj).unwrap();
        let chosen = optimize_treatment(&spec, &theta, &adj, 2, OptimizerMode::TopB, &mut rng).unwrap();
        for c in [-5.0, 0.0, 5.0] {
            let mut best = (f64::NEG_INFINITY, 0u32);
            for mask in 0u32..64 {
                if mask.count_ones() > 2 {
                    continue;
                }
                let v = c + (0..6).filter(|&j| mask >> j & 1 == 1).map(|j| s[j]).sum::<f64>();
                if v > best.0 + 1e-12 {
                    best = (v, mask);
                }
            }
            let z: Vec<bool> = (0..6).map(|j| best.1 >> j & 1 == 1).collect();
            assert_eq!(z, chosen);
        }
    }
}
