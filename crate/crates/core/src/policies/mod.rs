//! Treatment-selection policies.
//!
//! Every policy is driven through [`Agent::choose`], which sees the history
//! of previous rounds and returns the next treatment vector. The
//! Thompson-sampling variants differ only in how they treat the graph:
//! sampled jointly with `theta` ([`PolicyKind::GibbsTs`]), fixed at the truth
//! ([`PolicyKind::KnownATs`]), fixed at the empty graph
//! ([`PolicyKind::NoInterferenceTs`]), or estimated once from an isolation
//! phase ([`PolicyKind::EtcTs`]).

mod etc;
mod optimize;

pub use etc::{block_means, etc_estimate, etc_m, etc_phase1, isolation_design, ThresholdRule};
pub use optimize::{
    candidate_count, exact_enumeration, mode_is_feasible, optimize_treatment, swap_local_search, top_b, OptimizerMode,
};

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Adjacency;
use crate::posterior::{EdgeOrder, History, PosteriorState, Prior};
use crate::reward::{Environment, RewardKind, RewardSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    GibbsTs,
    EtcTs,
    KnownATs,
    NoInterferenceTs,
    /// Uniformly random set of exactly `B` nodes each round.
    UniformRandom,
}

fn default_sweeps() -> usize {
    10
}
fn default_prior_var() -> f64 {
    10.0
}
fn default_marginal_sweeps() -> usize {
    50
}
fn default_delta() -> f64 {
    0.3
}

/// Explore-then-commit settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtcConfig {
    /// Isolation rounds per node; computed with [`etc_m`] when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default = "default_delta")]
    pub delta_gamma: f64,
    #[serde(default)]
    pub threshold_rule: ThresholdRule,
}

impl Default for EtcConfig {
    fn default() -> Self {
        Self { m: None, delta_gamma: default_delta(), threshold_rule: ThresholdRule::Theorem }
    }
}

/// A policy as written in a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub label: String,
    pub kind: PolicyKind,
    /// Reward model the policy fits; the environment's model when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<RewardKind>,
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
    /// Edge prior probability; `1/n` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default)]
    pub prior_mean: f64,
    #[serde(default = "default_prior_var")]
    pub prior_var: f64,
    /// Noise standard deviation assumed by the posterior; the environment's when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Centre a zero-variance prior on the true parameters (oracle diagnostics).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub prior_at_truth: bool,
    /// Rounds of uniformly random treatment before the policy takes over.
    #[serde(default)]
    pub warmup: usize,
    #[serde(default)]
    pub optimizer: OptimizerMode,
    #[serde(default)]
    pub edge_order: EdgeOrder,
    /// Extra sweeps after the last round used to estimate edge marginals.
    #[serde(default = "default_marginal_sweeps")]
    pub marginal_sweeps: usize,
    #[serde(default)]
    pub etc: EtcConfig,
}

impl PolicyConfig {
    pub fn new(label: impl Into<String>, kind: PolicyKind) -> Self {
        Self {
            label: label.into(),
            kind,
            fit: None,
            sweeps: default_sweeps(),
            rho: None,
            prior_mean: 0.0,
            prior_var: default_prior_var(),
            sigma: None,
            prior_at_truth: false,
            warmup: 0,
            optimizer: OptimizerMode::Auto,
            edge_order: EdgeOrder::Lexicographic,
            marginal_sweeps: default_marginal_sweeps(),
            etc: EtcConfig::default(),
        }
    }

    /// The fitted model at network size `n`.
    pub fn fit_spec(&self, env_kind: RewardKind, n: usize) -> Result<RewardSpec> {
        RewardSpec::new(self.fit.unwrap_or(env_kind), n)
    }

    pub fn rho_for(&self, n: usize) -> f64 {
        self.rho.unwrap_or(1.0 / n as f64)
    }

    /// Isolation rounds per node for an ETC policy.
    pub fn etc_rounds(&self, sigma: f64, n: usize, horizon: usize) -> usize {
        self.etc.m.unwrap_or_else(|| etc_m(sigma, self.etc.delta_gamma, n, horizon))
    }

    /// Checks the settings that do not depend on the environment draw.
    pub fn validate(&self, key: &str, env_kind: RewardKind, n: usize, budget: usize, sigma: f64, horizon: usize) -> Result<()> {
        let bad = |field: &str, msg: String| Error::config(format!("{key}.{field}"), msg);
        let spec = self.fit_spec(env_kind, n).map_err(|e| bad("fit", e.to_string()))?;
        let rho = self.rho_for(n);
        if !(rho > 0.0 && rho < 1.0) {
            return Err(bad("rho", format!("must lie in (0, 1), got {rho}")));
        }
        if !(self.prior_var >= 0.0 && self.prior_var.is_finite()) {
            return Err(bad("prior_var", "must be finite and nonnegative".into()));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) {
                return Err(bad("sigma", "must be positive".into()));
            }
        }
        if self.prior_at_truth && self.fit.is_some_and(|k| k != env_kind) {
            return Err(bad("prior_at_truth", "needs the fitted model to equal the environment model".into()));
        }
        if !mode_is_feasible(&spec, budget, self.optimizer) {
            return Err(bad(
                "optimizer",
                format!("{:?} cannot be used for {:?} with n = {n}, B = {budget}", self.optimizer, spec.kind()),
            ));
        }
        if self.kind == PolicyKind::EtcTs {
            if !(self.etc.delta_gamma > 0.0) {
                return Err(bad("etc.delta_gamma", "must be positive".into()));
            }
            if self.etc.m == Some(0) {
                return Err(bad("etc.m", "must be at least 1".into()));
            }
            let m = self.etc_rounds(self.sigma.unwrap_or(sigma), n, horizon);
            if n * m > horizon {
                return Err(bad("etc.m", format!("isolation phase needs n m = {} rounds, horizon is {horizon}", n * m)));
            }
        }
        Ok(())
    }
}

enum AgentState {
    Sampler(PosteriorState),
    Etc {
        m: usize,
        pending: Option<(RewardSpec, Prior)>,
        estimate: Option<Adjacency>,
        state: Option<PosteriorState>,
    },
    Random,
}

/// A policy bound to one replication.
pub struct Agent {
    label: String,
    kind: PolicyKind,
    spec: RewardSpec,
    budget: usize,
    warmup: usize,
    optimizer: OptimizerMode,
    marginal_sweeps: usize,
    sigma: f64,
    rule: ThresholdRule,
    delta_gamma: f64,
    state: AgentState,
}

impl Agent {
    /// Builds the policy for environment `env`. `rng` is the policy stream;
    /// it seeds the chain initialisation of Gibbs-TS.
    pub fn new<R: Rng + ?Sized>(
        config: &PolicyConfig,
        env: &Environment,
        budget: usize,
        horizon: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let n = env.n();
        config.validate("policy", env.spec().kind(), n, budget, env.sigma(), horizon)?;
        let spec = config.fit_spec(env.spec().kind(), n)?;
        let sigma = config.sigma.unwrap_or(env.sigma());
        let rho = config.rho_for(n);
        let prior = if config.prior_at_truth {
            Prior::diagonal(env.theta().to_vec(), vec![0.0; spec.dimension()], sigma * sigma, rho)?
        } else {
            Prior::isotropic(spec.dimension(), config.prior_mean, config.prior_var, sigma * sigma, rho)?
        };
        let state = match config.kind {
            PolicyKind::GibbsTs => {
                let mut s = PosteriorState::new(spec, prior, config.sweeps, rng)?;
                s.set_edge_order(config.edge_order);
                AgentState::Sampler(s)
            }
            PolicyKind::KnownATs => {
                AgentState::Sampler(PosteriorState::with_fixed_graph(spec, prior, env.graph().clone())?)
            }
            PolicyKind::NoInterferenceTs => {
                AgentState::Sampler(PosteriorState::with_fixed_graph(spec, prior, Adjacency::empty(n))?)
            }
            PolicyKind::EtcTs => AgentState::Etc {
                m: config.etc_rounds(sigma, n, horizon),
                pending: Some((spec, prior)),
                estimate: None,
                state: None,
            },
            PolicyKind::UniformRandom => AgentState::Random,
        };
        Ok(Self {
            label: config.label.clone(),
            kind: config.kind,
            spec,
            budget,
            warmup: config.warmup,
            optimizer: config.optimizer,
            marginal_sweeps: config.marginal_sweeps,
            sigma,
            rule: config.etc.threshold_rule,
            delta_gamma: config.etc.delta_gamma,
            state,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn fit_spec(&self) -> &RewardSpec {
        &self.spec
    }

    /// Rounds of the isolation phase (ETC only).
    pub fn isolation_rounds(&self) -> Option<usize> {
        match &self.state {
            AgentState::Etc { m, .. } => Some(m * self.spec.n()),
            _ => None,
        }
    }

    fn random_design<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<bool> {
        let n = self.spec.n();
        let mut z = vec![false; n];
        for j in sample(rng, n, self.budget).into_iter() {
            z[j] = true;
        }
        z
    }

    /// Treatment for round `history.len()` (0-based).
    pub fn choose<R: Rng + ?Sized>(&mut self, history: &History, rng: &mut R) -> Result<Vec<bool>> {
        let t = history.len();
        let n = self.spec.n();
        let z = match &mut self.state {
            AgentState::Random => self.random_design(rng),
            AgentState::Etc { m, pending, estimate, state } => {
                if t < n * *m {
                    isolation_design(n, *m, t)
                } else {
                    if state.is_none() {
                        let (spec, prior) = pending.take().expect("ETC phase 2 initialised once");
                        let a_hat = etc_estimate(history, *m, self.rule, self.delta_gamma, self.sigma)?;
                        *estimate = Some(a_hat.clone());
                        *state = Some(PosteriorState::with_fixed_graph(spec, prior, a_hat)?);
                    }
                    let s = state.as_mut().expect("initialised above");
                    s.step(history, rng)?;
                    optimize_treatment(&self.spec, s.theta(), s.adj(), self.budget, self.optimizer, rng)?
                }
            }
            AgentState::Sampler(s) => {
                if t < self.warmup {
                    let budget = self.budget;
                    let mut z = vec![false; n];
                    for j in sample(rng, n, budget).into_iter() {
                        z[j] = true;
                    }
                    z
                } else {
                    s.step(history, rng)?;
                    optimize_treatment(&self.spec, s.theta(), s.adj(), self.budget, self.optimizer, rng)?
                }
            }
        };
        debug_assert!(z.iter().filter(|&&b| b).count() <= self.budget);
        Ok(z)
    }

    /// The graph the policy currently acts on, if any.
    pub fn graph_estimate(&self) -> Option<&Adjacency> {
        match &self.state {
            AgentState::Sampler(s) => Some(s.adj()),
            AgentState::Etc { estimate, .. } => estimate.as_ref(),
            AgentState::Random => None,
        }
    }

    /// Posterior state, once it exists.
    pub fn posterior(&self) -> Option<&PosteriorState> {
        match &self.state {
            AgentState::Sampler(s) => Some(s),
            AgentState::Etc { state, .. } => state.as_ref(),
            AgentState::Random => None,
        }
    }

    /// Edge marginals after the final round: Monte Carlo averages over extra
    /// sweeps for Gibbs-TS, the 0/1 indicator of the fixed graph otherwise.
    pub fn final_marginals<R: Rng + ?Sized>(&mut self, history: &History, rng: &mut R) -> Result<Option<DMatrix<f64>>> {
        let sweeps = self.marginal_sweeps;
        match &mut self.state {
            AgentState::Sampler(s) => Ok(Some(s.edge_marginals(history, sweeps, rng)?)),
            AgentState::Etc { state: Some(s), .. } => Ok(Some(s.edge_marginals(history, 0, rng)?)),
            _ => Ok(None),
        }
    }
}
