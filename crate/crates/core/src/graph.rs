//! Undirected interference networks: representation, random generators,
//! edge-list I/O and recovery metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::SimRng;

/// Symmetric binary adjacency matrix with an empty diagonal.
///
/// A dense bit matrix answers `has_edge` in O(1); sorted neighbour lists are
/// kept alongside it so reward evaluation can iterate a node's neighbourhood
/// in O(degree).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Adjacency {
    n: usize,
    bits: Vec<bool>,
    nbrs: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            bits: vec![false; n * n],
            nbrs: vec![Vec::new(); n],
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                g.set_edge(i, j, true);
            }
        }
        g
    }

    /// Builds a graph from an edge list. Self-loops are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::param(format!("edge ({i},{j}) out of range for n={n}")));
            }
            if i == j {
                return Err(Error::param(format!("self-loop at node {i}")));
            }
            g.set_edge(i, j, true);
        }
        Ok(g)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    /// Sets `A_ij = A_ji = present`. Returns whether the entry changed.
    ///
    /// Panics if `i == j` or either index is out of range.
    pub fn set_edge(&mut self, i: usize, j: usize, present: bool) -> bool {
        assert!(i != j, "adjacency diagonal must stay zero");
        assert!(i < self.n && j < self.n, "node index out of range");
        if self.bits[i * self.n + j] == present {
            return false;
        }
        self.bits[i * self.n + j] = present;
        self.bits[j * self.n + i] = present;
        for (a, b) in [(i, j), (j, i)] {
            let list = &mut self.nbrs[a];
            match list.binary_search(&b) {
                Ok(pos) => {
                    if !present {
                        list.remove(pos);
                    }
                }
                Err(pos) => {
                    if present {
                        list.insert(pos, b);
                    }
                }
            }
        }
        true
    }

    /// Neighbours of `i` in ascending order.
    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.nbrs[i]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.nbrs[i].len()
    }

    pub fn edge_count(&self) -> usize {
        self.nbrs.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn density(&self) -> f64 {
        let pairs = self.n * (self.n.saturating_sub(1)) / 2;
        if pairs == 0 {
            0.0
        } else {
            self.edge_count() as f64 / pairs as f64
        }
    }

    /// Upper-triangle edges `(i, j)` with `i < j` in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.nbrs[i]
                .iter()
                .copied()
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    /// Serializes to the whitespace-separated edge-list format, one `i j` per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }

    /// Checks symmetry, empty diagonal and that the neighbour lists agree with the bit matrix.
    pub fn is_valid(&self) -> bool {
        for i in 0..self.n {
            if self.bits[i * self.n + i] {
                return false;
            }
            for j in 0..self.n {
                if self.bits[i * self.n + j] != self.bits[j * self.n + i] {
                    return false;
                }
            }
            let listed: Vec<usize> = (0..self.n).filter(|&j| self.bits[i * self.n + j]).collect();
            if listed != self.nbrs[i] {
                return false;
            }
        }
        true
    }
}

/// Random graph family used to build an environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphFamily {
    ErdosRenyi {
        p: f64,
    },
    /// Stochastic block model with contiguous, balanced blocks; remainder
    /// nodes join the last block.
    Sbm {
        groups: usize,
        p_within: f64,
        p_between: f64,
    },
    EdgeList {
        path: PathBuf,
    },
    /// `n = 2p` nodes in `p` disjoint candidate pairs `(2k, 2k+1)`, exactly one
    /// of which (chosen uniformly) is connected.
    HardPairs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphGenSpec {
    pub family: GraphFamily,
    pub seed: u64,
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::param(format!("{name} = {p} is not a probability")))
    }
}

/// Draws a graph from `spec.family` using a generator seeded by `spec.seed`.
pub fn generate(spec: &GraphGenSpec, n: usize) -> Result<Adjacency> {
    let mut rng = SimRng::seed_from_u64(spec.seed);
    generate_with(&spec.family, n, &mut rng)
}

/// Draws a graph from `family` using the caller's generator.
///
/// For `EdgeList` the file is loaded and `n` must match its node count
/// (pass `0` to accept whatever the file contains).
pub fn generate_with<R: Rng + ?Sized>(family: &GraphFamily, n: usize, rng: &mut R) -> Result<Adjacency> {
    if let GraphFamily::EdgeList { path } = family {
        let g = load_edge_list(path)?;
        if n != 0 && g.n() != n {
            return Err(Error::param(format!(
                "edge list {} has {} non-isolated nodes, expected {n}",
                path.display(),
                g.n()
            )));
        }
        return Ok(g);
    }
    if n < 2 {
        return Err(Error::param(format!("graph needs n >= 2, got {n}")));
    }
    let mut g = Adjacency::empty(n);
    match *family {
        GraphFamily::ErdosRenyi { p } => {
            check_prob("p", p)?;
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < p {
                        g.set_edge(i, j, true);
                    }
                }
            }
        }
        GraphFamily::Sbm {
            groups,
            p_within,
            p_between,
        } => {
            check_prob("p_within", p_within)?;
            check_prob("p_between", p_between)?;
            if groups == 0 || groups > n {
                return Err(Error::param(format!("sbm groups = {groups} invalid for n = {n}")));
            }
            let block = sbm_blocks(n, groups);
            for i in 0..n {
                for j in (i + 1)..n {
                    let p = if block[i] == block[j] { p_within } else { p_between };
                    if rng.random::<f64>() < p {
                        g.set_edge(i, j, true);
                    }
                }
            }
        }
        GraphFamily::HardPairs => {
            if n % 2 != 0 {
                return Err(Error::param(format!("hard_pairs needs even n, got {n}")));
            }
            let k = rng.random_range(0..n / 2);
            g.set_edge(2 * k, 2 * k + 1, true);
        }
        GraphFamily::EdgeList { .. } => unreachable!(),
    }
    Ok(g)
}

/// Block label of every node: contiguous blocks of `n / groups` nodes, the
/// last block absorbing the remainder.
pub fn sbm_blocks(n: usize, groups: usize) -> Vec<usize> {
    let size = (n / groups).max(1);
    (0..n).map(|i| (i / size).min(groups - 1)).collect()
}

/// Loads a whitespace-separated edge list.
///
/// Edges are symmetrized, self-loops and duplicates dropped, isolated ids
/// discarded and the survivors relabelled `0..n` in ascending id order.
/// Blank lines and lines starting with `#` are skipped.
pub fn load_edge_list(path: &Path) -> Result<Adjacency> {
    let text = std::fs::read_to_string(path)?;
    let mut pairs = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("expected two node ids, found {} fields", fields.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<u64>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("bad node id {s:?}: {e}"),
            })
        };
        let (a, b) = (parse(fields[0])?, parse(fields[1])?);
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    let ids: BTreeSet<u64> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    if ids.len() < 2 {
        return Err(Error::param(format!(
            "edge list {} has fewer than two non-isolated nodes",
            path.display()
        )));
    }
    let label: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let mut g = Adjacency::empty(ids.len());
    for (a, b) in pairs {
        g.set_edge(label[&a], label[&b], true);
    }
    Ok(g)
}

fn check_same_size(a: &Adjacency, b: &Adjacency) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::param(format!("graph sizes differ: {} vs {}", a.n(), b.n())));
    }
    Ok(())
}

/// F1 score over upper-triangle entries with "edge present" as the positive
/// class. Two empty graphs score 1; exactly one empty graph scores 0.
pub fn edge_f1(estimate: &Adjacency, truth: &Adjacency) -> Result<f64> {
    check_same_size(estimate, truth)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for i in 0..truth.n() {
        for j in (i + 1)..truth.n() {
            match (estimate.has_edge(i, j), truth.has_edge(i, j)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    if tp + fp + fn_ == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64)
}

/// Fraction of upper-triangle entries on which the two graphs agree.
pub fn edge_accuracy(estimate: &Adjacency, truth: &Adjacency) -> Result<f64> {
    check_same_size(estimate, truth)?;
    let n = truth.n();
    let pairs = n * n.saturating_sub(1) / 2;
    if pairs == 0 {
        return Ok(1.0);
    }
    let mut agree = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if estimate.has_edge(i, j) == truth.has_edge(i, j) {
                agree += 1;
            }
        }
    }
    Ok(agree as f64 / pairs as f64)
}

pub fn degrees(g: &Adjacency) -> Vec<usize> {
    (0..g.n()).map(|i| g.degree(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Adjacency {
        Adjacency::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn er_extremes() {
        let empty = generate(
            &GraphGenSpec { family: GraphFamily::ErdosRenyi { p: 0.0 }, seed: 1 },
            5,
        )
        .unwrap();
        assert_eq!(empty.edge_count(), 0);
        let full = generate(
            &GraphGenSpec { family: GraphFamily::ErdosRenyi { p: 1.0 }, seed: 1 },
            4,
        )
        .unwrap();
        assert_eq!(full.edge_count(), 6);
        assert!(full.is_valid());
    }

    #[test]
    fn bad_probability_is_rejected() {
        let spec = GraphGenSpec { family: GraphFamily::ErdosRenyi { p: 1.5 }, seed: 0 };
        assert!(matches!(generate(&spec, 4), Err(Error::Parameter(_))));
        let spec = GraphGenSpec {
            family: GraphFamily::Sbm { groups: 2, p_within: 0.2, p_between: -0.1 },
            seed: 0,
        };
        assert!(generate(&spec, 4).is_err());
        let spec = GraphGenSpec { family: GraphFamily::ErdosRenyi { p: 0.5 }, seed: 0 };
        assert!(generate(&spec, 1).is_err());
    }

    #[test]
    fn sbm_blocks_put_remainder_last() {
        assert_eq!(sbm_blocks(7, 2), vec![0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(sbm_blocks(20, 2).iter().filter(|&&b| b == 0).count(), 10);
    }

    #[test]
    fn sbm_mean_edge_count() {
        // 2 * C(10,2) * 0.25 + 10 * 10 * 0.05 = 22.5 + 5 = 27.5
        let family = GraphFamily::Sbm { groups: 2, p_within: 0.25, p_between: 0.05 };
        let total: usize = (0..1000u64)
            .map(|seed| generate(&GraphGenSpec { family: family.clone(), seed }, 20).unwrap().edge_count())
            .sum();
        let mean = total as f64 / 1000.0;
        assert!((mean - 27.5).abs() <= 1.5, "mean edge count {mean}");
    }

    #[test]
    fn hard_pairs_has_one_edge_inside_a_pair() {
        for seed in 0..20 {
            let g = generate(&GraphGenSpec { family: GraphFamily::HardPairs, seed }, 8).unwrap();
            assert_eq!(g.edge_count(), 1);
            let (i, j) = g.edges().next().unwrap();
            assert_eq!((i % 2, j), (0, i + 1));
        }
    }

    #[test]
    fn er_is_reproducible() {
        let spec = GraphGenSpec { family: GraphFamily::ErdosRenyi { p: 0.3 }, seed: 99 };
        assert_eq!(generate(&spec, 30).unwrap(), generate(&spec, 30).unwrap());
    }

    #[test]
    fn loader_dedups_and_drops_isolates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        std::fs::write(&path, "1 2\n2 1\n3 3\n").unwrap();
        let g = load_edge_list(&path).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn loader_relabels_in_id_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        std::fs::write(&path, "# comment\n40 7\n\n7 100\n").unwrap();
        let g = load_edge_list(&path).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn loader_errors() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.txt");
        std::fs::write(&empty, "").unwrap();
        assert!(matches!(load_edge_list(&empty), Err(Error::Parameter(_))));
        let bad = dir.path().join("bad.txt");
        std::fs::write(&bad, "0 1\n2 x\n").unwrap();
        assert!(matches!(load_edge_list(&bad), Err(Error::Parse { line: 2, .. })));
        let three = dir.path().join("three.txt");
        std::fs::write(&three, "0 1 2\n").unwrap();
        assert!(matches!(load_edge_list(&three), Err(Error::Parse { .. })));
        assert!(matches!(load_edge_list(&dir.path().join("missing")), Err(Error::Io(_))));
    }

    #[test]
    fn f1_cases() {
        let g = path3();
        assert_eq!(edge_f1(&g, &g).unwrap(), 1.0);
        let est = Adjacency::from_edges(3, &[(0, 1)]).unwrap();
        assert!((edge_f1(&est, &g).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(edge_f1(&Adjacency::complete(4), &Adjacency::empty(4)).unwrap(), 0.0);
        assert_eq!(edge_f1(&Adjacency::empty(4), &Adjacency::empty(4)).unwrap(), 1.0);
        assert!(edge_f1(&Adjacency::empty(3), &Adjacency::empty(4)).is_err());
    }

    #[test]
    fn accuracy_cases() {
        let truth = Adjacency::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(edge_accuracy(&truth, &truth).unwrap(), 1.0);
        let one_off = Adjacency::from_edges(4, &[(0, 1)]).unwrap();
        assert!((edge_accuracy(&one_off, &truth).unwrap() - 5.0 / 6.0).abs() < 1e-12);
        let complement = Adjacency::from_edges(4, &[(0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        assert_eq!(edge_accuracy(&complement, &truth).unwrap(), 0.0);
        assert!(edge_accuracy(&Adjacency::empty(2), &truth).is_err());
    }

    #[test]
    fn degree_cases() {
        assert_eq!(degrees(&Adjacency::empty(3)), vec![0, 0, 0]);
        assert_eq!(degrees(&path3()), vec![1, 2, 1]);
        assert_eq!(degrees(&Adjacency::complete(5)), vec![4; 5]);
    }

    #[test]
    fn set_edge_keeps_lists_sorted() {
        let mut g = Adjacency::empty(5);
        g.set_edge(2, 4, true);
        g.set_edge(2, 0, true);
        g.set_edge(3, 2, true);
        assert_eq!(g.neighbors(2), &[0, 3, 4]);
        assert!(!g.set_edge(2, 3, true));
        assert!(g.set_edge(3, 2, false));
        assert_eq!(g.neighbors(2), &[0, 4]);
        assert!(g.is_valid());
    }
}
