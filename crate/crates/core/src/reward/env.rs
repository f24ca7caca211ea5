use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::RewardSpec;
use crate::error::{Error, Result};
use crate::graph::Adjacency;

/// Ground truth: a reward model, its parameters, the network and the noise level.
#[derive(Clone, Debug)]
pub struct Environment {
    spec: RewardSpec,
    theta: Vec<f64>,
    graph: Adjacency,
    sigma: f64,
}

impl Environment {
    pub fn new(spec: RewardSpec, theta: Vec<f64>, graph: Adjacency, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param(format!("sigma must be positive, got {sigma}")));
        }
        if theta.len() != spec.dimension() {
            return Err(Error::param(format!(
                "theta has length {}, spec dimension is {}",
                theta.len(),
                spec.dimension()
            )));
        }
        if graph.n() != spec.n() {
            return Err(Error::param(format!("graph has {} nodes, spec expects {}", graph.n(), spec.n())));
        }
        Ok(Self { spec, theta, graph, sigma })
    }

    pub fn spec(&self) -> &RewardSpec {
        &self.spec
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn graph(&self) -> &Adjacency {
        &self.graph
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn expected_rewards(&self, z: &[bool]) -> Result<Vec<f64>> {
        self.spec.expected_rewards(&self.theta, &self.graph, z)
    }

    pub fn total_reward(&self, z: &[bool]) -> Result<f64> {
        self.spec.total_reward(&self.theta, &self.graph, z)
    }

    /// Expected rewards plus iid `N(0, sigma^2)` noise.
    pub fn sample_rewards<R: Rng + ?Sized>(&self, z: &[bool], rng: &mut R) -> Result<Vec<f64>> {
        let mut r = self.expected_rewards(z)?;
        for v in &mut r {
            let e: f64 = StandardNormal.sample(rng);
            *v += self.sigma * e;
        }
        Ok(r)
    }

    /// Hex SHA-256 of the ground truth, used to check that matched-seed runs
    /// share an environment.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{:?}|{}|", self.spec.kind(), self.spec.n()).as_bytes());
        for (i, j) in self.graph.edges() {
            h.update((i as u64).to_le_bytes());
            h.update((j as u64).to_le_bytes());
        }
        h.update(b"|");
        for v in &self.theta {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update(self.sigma.to_bits().to_le_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
