//! Run configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{generate_with, load_edge_list, Adjacency, GraphFamily};
use crate::policies::{candidate_count, PolicyConfig, PolicyKind};
use crate::reward::{sample_params, Environment, Protocol, RewardKind, RewardSpec};
use crate::seeds;

/// Largest number of treatment sets the true optimum may be enumerated over.
pub const MAX_OPTIMUM_CANDIDATES: u64 = 5_000_000;

fn default_snapshot() -> usize {
    100
}
fn default_reps() -> usize {
    1
}
fn default_seed() -> u64 {
    42
}
fn default_true() -> bool {
    true
}

/// Ground-truth environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    /// Number of nodes; taken from the file for `edge_list` graphs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub sigma: f64,
    pub reward: RewardKind,
    pub graph: GraphFamily,
    pub protocol: Protocol,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicationConfig {
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
    /// Reuse the same replication seeds in every sweep cell.
    #[serde(default = "default_true")]
    pub matched_seeds: bool,
}

impl Default for ReplicationConfig {
    fn default() -> Self {
        Self { reps: default_reps(), base_seed: default_seed(), matched_seeds: true }
    }
}

fn default_t_eval() -> usize {
    2000
}
fn default_treat_prob() -> f64 {
    0.3
}
fn default_ridge() -> f64 {
    0.01
}
fn default_threshold() -> f64 {
    0.5
}

/// Downstream effect-estimation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    /// Label of the policy whose adaptive phase feeds the estimators; the
    /// first `gibbs_ts` policy when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(default = "default_t_eval")]
    pub t_eval: usize,
    #[serde(default = "default_treat_prob")]
    pub treat_prob: f64,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            policy: None,
            t_eval: default_t_eval(),
            treat_prob: default_treat_prob(),
            ridge: default_ridge(),
            threshold: default_threshold(),
        }
    }
}

/// Default axis and grid for the `sweep` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: String,
    pub grid: Vec<f64>,
}

/// One experiment: an environment protocol, the competing policies, and
/// the replication plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub horizon: usize,
    pub budget: usize,
    #[serde(default = "default_snapshot")]
    pub snapshot_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub replication: ReplicationConfig,
    pub policies: Vec<PolicyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimation: Option<EstimationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

fn cfg(key: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::config(key, msg)
}

/// Parses TOML text. Errors name the dotted path of the offending key.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| cfg("(document)", e.to_string().trim_end()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let key = if key == "." { "(document)".to_string() } else { key };
        cfg(key, e.into_inner().message().to_string())
    })
}

impl RunConfig {
    /// Reads, resolves and validates a configuration file. A relative
    /// edge-list path is taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg("(file)", format!("cannot read {}: {e}", path.display())))?;
        let mut config = parse_config(&text)?;
        if let GraphFamily::EdgeList { path: p } = &mut config.environment.graph {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Parses and validates TOML text without any path resolution.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config = parse_config(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs are always representable")
    }

    fn fixed_graph(&self) -> Result<Option<Adjacency>> {
        match &self.environment.graph {
            GraphFamily::EdgeList { path } => load_edge_list(path)
                .map(Some)
                .map_err(|e| cfg("environment.graph.path", e.to_string())),
            _ => Ok(None),
        }
    }

    /// Number of nodes.
    pub fn network_size(&self) -> Result<usize> {
        match (self.fixed_graph()?, self.environment.n) {
            (Some(g), Some(n)) if g.n() != n => Err(cfg(
                "environment.n",
                format!("edge list has {} non-isolated nodes, config says {n}", g.n()),
            )),
            (Some(g), _) => Ok(g.n()),
            (None, Some(n)) => Ok(n),
            (None, None) => Err(cfg("environment.n", "required unless the graph is an edge list")),
        }
    }

    pub fn env_spec(&self) -> Result<RewardSpec> {
        let n = self.network_size()?;
        RewardSpec::new(self.environment.reward, n).map_err(|e| cfg("environment.reward", e.to_string()))
    }

    /// Checks every constraint that can be checked before any round runs.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || !self.name.chars().all(safe_char) {
            return Err(cfg("name", "must be non-empty and use only letters, digits, '-', '_' and '.'"));
        }
        if self.horizon == 0 {
            return Err(cfg("horizon", "must be at least 1"));
        }
        if self.snapshot_every == 0 {
            return Err(cfg("snapshot_every", "must be at least 1"));
        }
        if self.replication.reps == 0 {
            return Err(cfg("replication.reps", "must be at least 1"));
        }
        let env = &self.environment;
        if !(env.sigma > 0.0 && env.sigma.is_finite()) {
            return Err(cfg("environment.sigma", "must be positive and finite"));
        }
        let spec = self.env_spec()?;
        let n = spec.n();
        if self.budget == 0 || self.budget > n {
            return Err(cfg("budget", format!("must lie in 1..={n}")));
        }
        env.protocol.check(&spec).map_err(|e| cfg("environment.protocol", e.to_string()))?;
        if !spec.is_collapsible() && candidate_count(n, self.budget) > MAX_OPTIMUM_CANDIDATES {
            return Err(cfg(
                "budget",
                format!(
                    "the true optimum of {:?} at n = {n}, B = {} needs {} evaluations (limit {MAX_OPTIMUM_CANDIDATES})",
                    spec.kind(),
                    self.budget,
                    candidate_count(n, self.budget)
                ),
            ));
        }
        if self.fixed_graph()?.is_none() {
            let mut rng = seeds::stream(self.replication.base_seed, seeds::ENVIRONMENT);
            generate_with(&env.graph, n, &mut rng).map_err(|e| cfg("environment.graph", e.to_string()))?;
        }
        if self.policies.is_empty() {
            return Err(cfg("policies", "at least one policy is required"));
        }
        for (k, p) in self.policies.iter().enumerate() {
            let key = format!("policies[{k}]");
            if p.label.is_empty() || !p.label.chars().all(safe_char) {
                return Err(cfg(
                    format!("{key}.label"),
                    "must be non-empty and use only letters, digits, '-', '_' and '.'",
                ));
            }
            if self.policies[..k].iter().any(|q| q.label == p.label) {
                return Err(cfg(format!("{key}.label"), format!("duplicate label `{}`", p.label)));
            }
            p.validate(&key, spec.kind(), n, self.budget, env.sigma, self.horizon)?;
            if p.prior_at_truth && p.kind == PolicyKind::UniformRandom {
                return Err(cfg(format!("{key}.prior_at_truth"), "has no effect on uniform_random"));
            }
        }
        if let Some(est) = &self.estimation {
            if est.t_eval == 0 {
                return Err(cfg("estimation.t_eval", "must be at least 1"));
            }
            if !(0.0..=1.0).contains(&est.treat_prob) {
                return Err(cfg("estimation.treat_prob", "must lie in [0, 1]"));
            }
            if !(est.threshold > 0.0 && est.threshold < 1.0) {
                return Err(cfg("estimation.threshold", "must lie in (0, 1)"));
            }
            if !(est.ridge >= 0.0) {
                return Err(cfg("estimation.ridge", "must be nonnegative"));
            }
            self.estimation_policy().map_err(|e| match e {
                Error::Config { message, .. } => cfg("estimation.policy", message),
                other => other,
            })?;
        }
        if let Some(sw) = &self.sweep {
            if sw.grid.is_empty() {
                return Err(cfg("sweep.grid", "must not be empty"));
            }
            for &v in &sw.grid {
                let mut probe = self.clone();
                probe.sweep = None;
                apply_axis(&mut probe, &sw.axis, v).map_err(|e| match e {
                    Error::Config { key, message } if key == "axis" => cfg("sweep.axis", message),
                    other => other,
                })?;
            }
        }
        Ok(())
    }

    /// Index of the policy feeding the estimation pipeline.
    pub fn estimation_policy(&self) -> Result<usize> {
        let label = self.estimation.as_ref().and_then(|e| e.policy.as_deref());
        let found = match label {
            Some(l) => self.policies.iter().position(|p| p.label == l),
            None => self.policies.iter().position(|p| p.kind == PolicyKind::GibbsTs),
        };
        let idx = found.ok_or_else(|| {
            cfg(
                "estimation.policy",
                match label {
                    Some(l) => format!("no policy labelled `{l}`"),
                    None => "no gibbs_ts policy to estimate from".to_string(),
                },
            )
        })?;
        if self.policies[idx].kind == PolicyKind::UniformRandom {
            return Err(cfg("estimation.policy", "uniform_random has no posterior to estimate from"));
        }
        Ok(idx)
    }

    /// Seed of replication `rep` in sweep cell `cell`.
    pub fn rep_seed(&self, rep: usize, cell: usize) -> u64 {
        let base = if self.replication.matched_seeds {
            self.replication.base_seed
        } else {
            self.replication.base_seed.wrapping_add(1_000_000u64.wrapping_mul(cell as u64))
        };
        seeds::rep_seed(base, rep)
    }

    /// Ground truth drawn from the environment stream of `seed`: the graph
    /// first, then the parameters.
    pub fn build_environment(&self, seed: u64) -> Result<Environment> {
        let spec = self.env_spec()?;
        let mut rng = seeds::stream(seed, seeds::ENVIRONMENT);
        let graph = match self.fixed_graph()? {
            Some(g) => g,
            None => generate_with(&self.environment.graph, spec.n(), &mut rng)?,
        };
        let theta = sample_params(&spec, &self.environment.protocol, &mut rng)?;
        Environment::new(spec, theta, graph, self.environment.sigma)
    }
}

fn safe_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')
}

/// Keys accepted by [`apply_axis`].
pub const SWEEP_AXES: &[&str] = &[
    "rho",
    "sweeps",
    "m",
    "delta_gamma",
    "prior_var",
    "warmup",
    "sigma",
    "budget",
    "horizon",
];

fn as_count(axis: &str, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(cfg(format!("grid.{axis}"), format!("{v} is not a nonnegative integer")))
    }
}

/// Sets the swept parameter to `v`. Policy-level axes apply to every policy
/// that has the parameter; `m` and `delta_gamma` only touch ETC policies.
pub fn apply_axis(config: &mut RunConfig, axis: &str, v: f64) -> Result<()> {
    match axis {
        "rho" => config.policies.iter_mut().for_each(|p| p.rho = Some(v)),
        "sweeps" | "k" => {
            let k = as_count(axis, v)?;
            config.policies.iter_mut().for_each(|p| p.sweeps = k);
        }
        "m" => {
            let m = as_count(axis, v)?;
            config
                .policies
                .iter_mut()
                .filter(|p| p.kind == PolicyKind::EtcTs)
                .for_each(|p| p.etc.m = Some(m));
        }
        "delta_gamma" => config
            .policies
            .iter_mut()
            .filter(|p| p.kind == PolicyKind::EtcTs)
            .for_each(|p| p.etc.delta_gamma = v),
        "prior_var" => config.policies.iter_mut().for_each(|p| p.prior_var = v),
        "warmup" => {
            let w = as_count(axis, v)?;
            config.policies.iter_mut().for_each(|p| p.warmup = w);
        }
        "sigma" => config.environment.sigma = v,
        "budget" => config.budget = as_count(axis, v)?,
        "horizon" => config.horizon = as_count(axis, v)?,
        other => {
            return Err(cfg(
                "axis",
                format!("unknown sweep axis `{other}`; expected one of {}", SWEEP_AXES.join(", ")),
            ))
        }
    }
    config.validate()
}

/// Annotated reference of the configuration format.
pub const SCHEMA: &str = r#"# Run configuration (TOML). Keys marked [opt] may be omitted.
name = "example"            # output file prefix; letters, digits, - _ .
horizon = 2000              # rounds T >= 1
budget = 3                  # at most B nodes treated per round, 1 <= B <= n
snapshot_every = 100        # [opt] recovery-metric cadence in rounds
output_dir = "out/example"  # [opt] overridden by --out

[environment]
n = 8                       # [opt for edge_list graphs]
sigma = 0.5                 # reward noise standard deviation
reward = { kind = "pairwise_nia" }
#   kind: linear_in_means_per_node | linear_in_means_shared | count_based_shared (d_max)
#       | count_based_per_node (d_max) | pairwise_nia | additive_pairs
#       | saturation_spec_a | interaction_spec_b | paired_indicator
graph = { family = "erdos_renyi", p = 0.3 }
#   family: erdos_renyi (p) | sbm (groups, p_within, p_between)
#         | edge_list (path, relative to this file) | hard_pairs
[environment.protocol]      # one entry per parameter block of the reward kind
mu = { dist = "uniform", low = 0.5, high = 1.5 }
gamma = { dist = "uniform", low = 0.3, high = 1.0 }
xi = { dist = "uniform", low = -0.4, high = 0.4 }
#   dist: uniform (low, high) | normal (mean, sd) | normal_bucket (sd, mean = bucket k)
#       | constant (value); add shared = true to draw one value for the whole block

[replication]               # [opt]
reps = 10                   # [opt] default 1
base_seed = 42              # [opt] replication r uses seed base_seed + 1000 r
matched_seeds = true        # [opt] reuse the seeds in every sweep cell

[[policies]]                # one table per competing policy
label = "gibbs_ts"
kind = "gibbs_ts"           # gibbs_ts | etc_ts | known_a_ts | no_interference_ts | uniform_random
fit = { kind = "pairwise_nia" }  # [opt] fitted model, default: environment model
sweeps = 10                 # [opt] Gibbs sweeps K per round
rho = 0.3                   # [opt] edge prior, default 1/n
prior_mean = 0.0            # [opt]
prior_var = 10.0            # [opt] isotropic prior variance
sigma = 0.5                 # [opt] assumed noise sd, default environment sigma
prior_at_truth = false      # [opt] zero-variance prior at the true parameters
warmup = 0                  # [opt] uniformly random rounds before the policy acts
optimizer = { mode = "auto" }
#   mode: auto | exact_enumeration (max_candidates) | top_b
#       | swap_local_search (restarts, max_iters)
edge_order = "lexicographic"  # [opt] lexicographic | random_scan
marginal_sweeps = 50        # [opt] sweeps after round T for the edge marginals
etc = { delta_gamma = 0.3, threshold_rule = "theorem" }  # [opt] m = ... to fix it
#   threshold_rule: theorem | adaptive

[estimation]                # [opt] used by the estimate command
policy = "gibbs_ts"         # [opt] default: first gibbs_ts policy
t_eval = 2000               # randomized inference rounds
treat_prob = 0.3            # Bernoulli treatment probability in that phase
ridge = 0.01                # penalty used when X^T X has condition > 1e10
threshold = 0.5             # edge-marginal threshold for the point estimate

[sweep]                     # [opt] default axis for the sweep command
axis = "rho"                # rho | sweeps | m | delta_gamma | prior_var | warmup
                            # | sigma | budget | horizon
grid = [0.05, 0.15, 0.3, 0.5, 0.7]
"#;

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
        name = "t"
        horizon = 50
        budget = 2
        [environment]
        n = 6
        sigma = 0.5
        reward = { kind = "pairwise_nia" }
        graph = { family = "erdos_renyi", p = 0.3 }
        [environment.protocol]
        mu = { dist = "uniform", low = 0.5, high = 1.5 }
        gamma = { dist = "uniform", low = 0.3, high = 1.0 }
        xi = { dist = "uniform", low = -0.4, high = 0.4 }
        [[policies]]
        label = "g"
        kind = "gibbs_ts"
    "#;

    fn key_of(e: Error) -> String {
        match e {
            Error::Config { key, .. } => key,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn basic_config_parses_with_defaults() {
        let c = RunConfig::from_toml_str(BASIC).unwrap();
        assert_eq!(c.snapshot_every, 100);
        assert_eq!(c.replication, ReplicationConfig::default());
        assert_eq!(c.policies[0].sweeps, 10);
        let back = RunConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn schema_reference_is_a_valid_config() {
        let c = RunConfig::from_toml_str(SCHEMA).unwrap();
        assert_eq!(c.policies.len(), 1);
        assert_eq!(c.sweep.unwrap().grid.len(), 5);
    }

    #[test]
    fn errors_name_the_key() {
        let e = RunConfig::from_toml_str(&BASIC.replace("sigma = 0.5", "sigma = -1.0")).unwrap_err();
        assert_eq!(key_of(e), "environment.sigma");
        let e = RunConfig::from_toml_str(&BASIC.replace("budget = 2", "budget = 9")).unwrap_err();
        assert_eq!(key_of(e), "budget");
        let e = RunConfig::from_toml_str(&BASIC.replace("kind = \"gibbs_ts\"", "kind = \"gibbs_ts\"\nswepts = 3"))
            .unwrap_err();
        assert_eq!(key_of(e), "policies[0].swepts");
        let e = RunConfig::from_toml_str(&BASIC.replace("p = 0.3", "p = 1.3")).unwrap_err();
        assert_eq!(key_of(e), "environment.graph");
        let e = RunConfig::from_toml_str(&BASIC.replace("xi = {", "lambda = {")).unwrap_err();
        assert_eq!(key_of(e), "environment.protocol");
        let e = RunConfig::from_toml_str(&BASIC.replace("horizon = 50", "horizon = \"long\"")).unwrap_err();
        assert_eq!(key_of(e), "horizon");
    }

    #[test]
    fn etc_phase_must_fit_in_the_horizon() {
        let text = BASIC.replace("kind = \"gibbs_ts\"", "kind = \"etc_ts\"\netc = { m = 9 }");
        let e = RunConfig::from_toml_str(&text).unwrap_err();
        assert_eq!(key_of(e), "policies[0].etc.m");
        assert!(RunConfig::from_toml_str(&text.replace("m = 9", "m = 8")).is_ok());
    }

    #[test]
    fn intractable_optimum_is_a_config_error() {
        let text = BASIC.replace("n = 6", "n = 60").replace("budget = 2", "budget = 10");
        assert_eq!(key_of(RunConfig::from_toml_str(&text).unwrap_err()), "budget");
    }

    #[test]
    fn unknown_axis_is_rejected() {
        let mut c = RunConfig::from_toml_str(BASIC).unwrap();
        assert_eq!(key_of(apply_axis(&mut c, "temperature", 1.0).unwrap_err()), "axis");
        apply_axis(&mut c, "rho", 0.7).unwrap();
        assert_eq!(c.policies[0].rho, Some(0.7));
        assert!(apply_axis(&mut c, "sweeps", 2.5).is_err());
    }

    #[test]
    fn environment_depends_only_on_the_seed() {
        let c = RunConfig::from_toml_str(BASIC).unwrap();
        let mut d = c.clone();
        apply_axis(&mut d, "rho", 0.05).unwrap();
        apply_axis(&mut d, "sweeps", 3.0).unwrap();
        for rep in 0..3 {
            let a = c.build_environment(c.rep_seed(rep, 0)).unwrap();
            let b = d.build_environment(d.rep_seed(rep, 4)).unwrap();
            assert_eq!(a.fingerprint(), b.fingerprint());
        }
        let a = c.build_environment(c.rep_seed(0, 0)).unwrap();
        let b = c.build_environment(c.rep_seed(1, 0)).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn edge_list_paths_resolve_against_the_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("g.txt"), "# two triangles\n10 11\n11 12\n12 10\n20 21\n").unwrap();
        let text = BASIC
            .replace("n = 6", "")
            .replace("{ family = \"erdos_renyi\", p = 0.3 }", "{ family = \"edge_list\", path = \"g.txt\" }");
        let path = dir.path().join("run.toml");
        std::fs::write(&path, text).unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.network_size().unwrap(), 5);
        let env = c.build_environment(1).unwrap();
        assert_eq!(env.graph().edge_count(), 4);
    }
}
