//! Parameter-sampling protocols: one distribution per named parameter block.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{BlockName, RewardSpec};
use crate::error::{Error, Result};

/// A scalar distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum Dist {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, sd: f64 },
    /// Normal with mean equal to the bucket count `k` (count-based gamma blocks only).
    NormalBucket { sd: f64 },
    Constant { value: f64 },
}

impl Dist {
    fn validate(&self, key: &str) -> Result<()> {
        let ok = match *self {
            Dist::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
            Dist::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd >= 0.0,
            Dist::NormalBucket { sd } => sd.is_finite() && sd >= 0.0,
            Dist::Constant { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("invalid distribution for block `{key}`: {self:?}")))
        }
    }

    fn draw<R: Rng + ?Sized>(&self, bucket: Option<usize>, rng: &mut R) -> f64 {
        match *self {
            Dist::Uniform { low, high } => {
                if low == high {
                    low
                } else {
                    rng.random_range(low..high)
                }
            }
            Dist::Normal { mean, sd } => normal(mean, sd, rng),
            Dist::NormalBucket { sd } => normal(bucket.expect("validated") as f64, sd, rng),
            Dist::Constant { value } => value,
        }
    }
}

fn normal<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    if sd == 0.0 {
        return mean;
    }
    Normal::new(mean, sd).expect("validated").sample(rng)
}

/// A block distribution, optionally drawn once and shared by every entry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockDist {
    #[serde(flatten)]
    pub dist: Dist,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub shared: bool,
}

impl From<Dist> for BlockDist {
    fn from(dist: Dist) -> Self {
        Self { dist, shared: false }
    }
}

/// Distribution table keyed by parameter block.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Protocol {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<BlockDist>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<BlockDist>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<BlockDist>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<BlockDist>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<BlockDist>,
}

impl Protocol {
    fn get(&self, name: BlockName) -> Option<&BlockDist> {
        match name {
            BlockName::Mu => self.mu.as_ref(),
            BlockName::Beta => self.beta.as_ref(),
            BlockName::Gamma => self.gamma.as_ref(),
            BlockName::Xi => self.xi.as_ref(),
            BlockName::Lambda => self.lambda.as_ref(),
        }
    }

    fn present(&self) -> Vec<BlockName> {
        [BlockName::Mu, BlockName::Beta, BlockName::Gamma, BlockName::Xi, BlockName::Lambda]
            .into_iter()
            .filter(|&b| self.get(b).is_some())
            .collect()
    }

    /// Pairwise head-to-head table; `xi_half_width` is 0.4 or 3.0 in the two published variants.
    pub fn head_to_head(xi_half_width: f64) -> Self {
        Self {
            mu: Some(Dist::Uniform { low: 0.5, high: 1.5 }.into()),
            gamma: Some(Dist::Uniform { low: 0.3, high: 1.0 }.into()),
            xi: Some(Dist::Uniform { low: -xi_half_width, high: xi_half_width }.into()),
            ..Self::default()
        }
    }

    /// Linear-in-means with `mu_i, beta_i ~ U[0, 1]`.
    pub fn village() -> Self {
        Self {
            mu: Some(Dist::Uniform { low: 0.0, high: 1.0 }.into()),
            beta: Some(Dist::Uniform { low: 0.0, high: 1.0 }.into()),
            ..Self::default()
        }
    }

    /// Count-based table with `mu ~ N(1, 0.2)` and `gamma_k ~ N(k, 0.5)`.
    pub fn count_based() -> Self {
        Self {
            mu: Some(Dist::Normal { mean: 1.0, sd: 0.2 }.into()),
            gamma: Some(Dist::NormalBucket { sd: 0.5 }.into()),
            ..Self::default()
        }
    }

    /// Spec A/B table: `mu ~ U[0.5, 1.5]`, `gamma ~ U[0.3, 1]`, `lambda ~ U[-0.3, 0.3]`.
    pub fn spec_ab(with_lambda: bool) -> Self {
        Self {
            mu: Some(Dist::Uniform { low: 0.5, high: 1.5 }.into()),
            gamma: Some(Dist::Uniform { low: 0.3, high: 1.0 }.into()),
            lambda: with_lambda.then(|| Dist::Uniform { low: -0.3, high: 0.3 }.into()),
            ..Self::default()
        }
    }

    /// Point masses for every block of `spec`.
    pub fn constant(spec: &RewardSpec, value: f64) -> Self {
        let mut p = Self::default();
        for b in spec.blocks() {
            let d = Some(Dist::Constant { value }.into());
            match b.name {
                BlockName::Mu => p.mu = d,
                BlockName::Beta => p.beta = d,
                BlockName::Gamma => p.gamma = d,
                BlockName::Xi => p.xi = d,
                BlockName::Lambda => p.lambda = d,
            }
        }
        p
    }

    /// Checks that the table names exactly the blocks of `spec`.
    pub fn check(&self, spec: &RewardSpec) -> Result<()> {
        let blocks = spec.blocks();
        for b in &blocks {
            let bd = self.get(b.name).ok_or_else(|| {
                Error::param(format!("protocol has no `{}` entry required by {:?}", b.name.as_str(), spec.kind()))
            })?;
            bd.dist.validate(b.name.as_str())?;
            if matches!(bd.dist, Dist::NormalBucket { .. }) && b.buckets.is_none() {
                return Err(Error::param(format!(
                    "normal_bucket is only valid for count-based gamma blocks, not `{}` of {:?}",
                    b.name.as_str(),
                    spec.kind()
                )));
            }
        }
        for name in self.present() {
            if !blocks.iter().any(|b| b.name == name) {
                return Err(Error::param(format!(
                    "protocol entry `{}` has no matching block in {:?}",
                    name.as_str(),
                    spec.kind()
                )));
            }
        }
        Ok(())
    }
}

/// Draws a parameter vector for `spec` from the protocol table.
pub fn sample_params<R: Rng + ?Sized>(spec: &RewardSpec, protocol: &Protocol, rng: &mut R) -> Result<Vec<f64>> {
    protocol.check(spec)?;
    let mut theta = vec![0.0; spec.dimension()];
    for b in spec.blocks() {
        let bd = protocol.get(b.name).expect("checked");
        let bucket_of = |offset: usize| b.buckets.map(|d| offset % d + 1);
        if bd.shared {
            let v = bd.dist.draw(bucket_of(0), rng);
            theta[b.range.clone()].fill(v);
        } else {
            for (off, c) in b.range.clone().enumerate() {
                theta[c] = bd.dist.draw(bucket_of(off), rng);
            }
        }
    }
    Ok(theta)
}
