//! Experiment orchestration: replications, regret accounting, sweeps and
//! output files.
//!
//! Replication `r` uses seed `base_seed + 1000 r` (see [`crate::seeds`]).
//! Every policy of a replication faces the same environment and the same
//! noise stream, so policies are compared on common random numbers.
//!
//! Regret is measured with expected rewards, `f(Z*) - f(Z_t)`; the realized
//! counterpart `f(Z*) - sum_i r_{t,i}` is reported alongside.

mod bundled;
mod config;
mod estimate;
mod output;
mod stats;

pub use bundled::{bundled, bundled_names};
pub use config::{
    apply_axis, parse_config, EnvironmentConfig, EstimationConfig, ReplicationConfig, RunConfig, SweepConfig,
    MAX_OPTIMUM_CANDIDATES, SCHEMA, SWEEP_AXES,
};
pub use estimate::{run_estimation, EstimationRep, EstimationSummary, ESTIMATORS};
pub use output::{write_trajectory_csv, Manifest, CSV_HEADER};
pub use stats::{median, quantile_sorted, trimmed_mean, Spread};

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::causal::graph_point_estimate;
use crate::error::{Error, Result};
use crate::graph::{edge_accuracy, edge_f1, Adjacency, GraphFamily};
use crate::policies::{exact_enumeration, top_b, Agent, PolicyKind};
use crate::posterior::{History, PosteriorState, Prior};
use crate::reward::{Environment, Protocol, RewardKind, RewardSpec};
use crate::seeds;

/// One round of one replication.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    /// 1-based round index.
    pub t: usize,
    pub z: Vec<bool>,
    pub rewards: Vec<f64>,
    pub f_opt: f64,
    pub f_chosen: f64,
    pub regret_inst: f64,
    pub regret_cum: f64,
    pub f1_snapshot: Option<f64>,
    pub acc_snapshot: Option<f64>,
}

impl TrajectoryRecord {
    pub fn n_treated(&self) -> usize {
        self.z.iter().filter(|&&b| b).count()
    }
}

/// Exact maximiser of the expected total reward under the true `(A, theta)`:
/// top-B of the modular scores for collapsible models, enumeration otherwise.
pub fn true_optimum(env: &Environment, budget: usize) -> Result<(Vec<bool>, f64)> {
    let spec = env.spec();
    if let Some((_, s)) = spec.modular_scores(env.theta(), env.graph()) {
        let z = top_b(&s, budget);
        let f = env.total_reward(&z)?;
        return Ok((z, f));
    }
    exact_enumeration(spec, env.theta(), env.graph(), budget, MAX_OPTIMUM_CANDIDATES)
        .map_err(|e| Error::config("budget", e.to_string()))
}

/// Prefix sums of `max(f_opt - f_t, 0)`.
pub fn cumulative_regret(f_opt: f64, f_chosen: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    f_chosen
        .iter()
        .map(|f| {
            acc += (f_opt - f).max(0.0);
            acc
        })
        .collect()
}

/// A policy's trajectory and end-of-run diagnostics in one replication.
#[derive(Clone, Debug)]
pub struct PolicyRun {
    pub label: String,
    pub kind: PolicyKind,
    pub rep: usize,
    pub seed: u64,
    pub env_hash: String,
    pub records: Vec<TrajectoryRecord>,
    pub final_regret: f64,
    /// Regret accrued in rounds `1..=T/2`.
    pub first_half: f64,
    /// Regret accrued in rounds `T/2+1..=T`.
    pub second_half: f64,
    pub realized_regret: f64,
    /// Recovery of the graph sample the policy acted on in the last round.
    pub sample_accuracy: Option<f64>,
    pub sample_f1: Option<f64>,
    /// Recovery of the thresholded edge marginals.
    pub marginal_accuracy: Option<f64>,
    pub marginal_f1: Option<f64>,
    pub a_hat: Option<Adjacency>,
    pub marginals: Option<DMatrix<f64>>,
    pub isolation_rounds: Option<usize>,
}

/// Everything a policy leaves behind after its last round.
pub(crate) struct Played {
    pub run: PolicyRun,
    pub history: History,
    pub agent: Agent,
}

pub(crate) fn play(
    config: &RunConfig,
    env: &Environment,
    f_opt: f64,
    policy: usize,
    rep: usize,
    seed: u64,
) -> Result<Played> {
    let pc = &config.policies[policy];
    let (t_max, budget) = (config.horizon, config.budget);
    let mut policy_rng = seeds::stream(seed, seeds::POLICY);
    let mut noise = seeds::stream(seed, seeds::NOISE);
    let mut agent = Agent::new(pc, env, budget, t_max, &mut policy_rng).map_err(|e| match e {
        Error::Config { key, message } => {
            Error::config(key.replacen("policy", &format!("policies[{policy}]"), 1), message)
        }
        other => other,
    })?;
    let mut history = History::new(env.n());
    let mut records = Vec::with_capacity(t_max);
    let (mut cum, mut realized) = (0.0, 0.0);
    for t in 1..=t_max {
        let z = agent.choose(&history, &mut policy_rng)?;
        let treated = z.iter().filter(|&&b| b).count();
        if treated > budget {
            return Err(Error::Numerical(format!("policy `{}` treated {treated} > B nodes", pc.label)));
        }
        let r = env.sample_rewards(&z, &mut noise)?;
        let f = env.total_reward(&z)?;
        let inst = (f_opt - f).max(0.0);
        cum += inst;
        realized += f_opt - r.iter().sum::<f64>();
        let snapshot = t % config.snapshot_every == 0 || t == t_max;
        let (f1, acc) = match (snapshot, agent.graph_estimate()) {
            (true, Some(g)) => (Some(edge_f1(g, env.graph())?), Some(edge_accuracy(g, env.graph())?)),
            _ => (None, None),
        };
        records.push(TrajectoryRecord {
            t,
            z: z.clone(),
            rewards: r.clone(),
            f_opt,
            f_chosen: f,
            regret_inst: inst,
            regret_cum: cum,
            f1_snapshot: f1,
            acc_snapshot: acc,
        });
        history.push(z, r)?;
    }
    let threshold = config.estimation.as_ref().map_or(0.5, |e| e.threshold);
    let marginals = agent.final_marginals(&history, &mut policy_rng)?;
    let a_hat = match &marginals {
        Some(m) => Some(graph_point_estimate(m, threshold)?),
        None => agent.graph_estimate().cloned(),
    };
    let last = records.last().expect("horizon >= 1");
    let first_half = if t_max >= 2 { records[t_max / 2 - 1].regret_cum } else { 0.0 };
    let metric = |g: &Option<Adjacency>, f: fn(&Adjacency, &Adjacency) -> Result<f64>| -> Result<Option<f64>> {
        g.as_ref().map(|g| f(g, env.graph())).transpose()
    };
    let run = PolicyRun {
        label: pc.label.clone(),
        kind: pc.kind,
        rep,
        seed,
        env_hash: env.fingerprint(),
        final_regret: last.regret_cum,
        first_half,
        second_half: last.regret_cum - first_half,
        realized_regret: realized,
        sample_accuracy: last.acc_snapshot,
        sample_f1: last.f1_snapshot,
        marginal_accuracy: metric(&a_hat, edge_accuracy)?,
        marginal_f1: metric(&a_hat, edge_f1)?,
        a_hat,
        marginals,
        isolation_rounds: agent.isolation_rounds(),
        records,
    };
    Ok(Played { run, history, agent })
}

/// Runs every policy of replication `rep` (sweep cell `cell`).
pub fn run_replication(config: &RunConfig, rep: usize, cell: usize) -> Result<Vec<PolicyRun>> {
    let seed = config.rep_seed(rep, cell);
    let env = config.build_environment(seed)?;
    let (_, f_opt) = true_optimum(&env, config.budget)?;
    (0..config.policies.len())
        .map(|p| play(config, &env, f_opt, p, rep, seed).map(|p| p.run))
        .collect()
}

/// Ground truth of one replication, as recorded in the seed ledger.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepInfo {
    pub rep: usize,
    pub seed: u64,
    pub env_hash: String,
    pub f_opt: f64,
    pub optimum: Vec<usize>,
    pub true_edges: usize,
}

/// Results of all replications of one configuration.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub config: RunConfig,
    pub cell: usize,
    pub reps: Vec<RepInfo>,
    /// Ordered by replication, then by policy in config order.
    pub runs: Vec<PolicyRun>,
}

impl RunResult {
    pub fn runs_of<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a PolicyRun> + 'a {
        self.runs.iter().filter(move |r| r.label == label)
    }
}

/// Worker count: the explicit value, else available parallelism.
pub fn resolve_workers(workers: Option<usize>) -> usize {
    workers
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub(crate) fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_workers(workers))
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs all replications of `config` (sweep cell `cell`) without writing
/// anything. Results do not depend on the number of workers.
pub fn execute(config: &RunConfig, cell: usize, workers: Option<usize>) -> Result<RunResult> {
    config.validate()?;
    let reps: Vec<usize> = (0..config.replication.reps).collect();
    let setups: Vec<(RepInfo, Environment)> = reps
        .iter()
        .map(|&rep| {
            let seed = config.rep_seed(rep, cell);
            let env = config.build_environment(seed)?;
            let (z, f_opt) = true_optimum(&env, config.budget)?;
            let info = RepInfo {
                rep,
                seed,
                env_hash: env.fingerprint(),
                f_opt,
                optimum: (0..z.len()).filter(|&j| z[j]).collect(),
                true_edges: env.graph().edge_count(),
            };
            Ok((info, env))
        })
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, usize)> =
        reps.iter().flat_map(|&r| (0..config.policies.len()).map(move |p| (r, p))).collect();
    let runs = in_pool(workers, || {
        tasks
            .par_iter()
            .map(|&(r, p)| {
                let (info, env) = &setups[r];
                play(config, env, info.f_opt, p, r, info.seed).map(|p| p.run)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(RunResult { config: config.clone(), cell, reps: setups.into_iter().map(|(i, _)| i).collect(), runs })
}

/// Per-policy aggregate over replications.
#[derive(Clone, Debug, Serialize)]
pub struct PolicySummary {
    pub label: String,
    pub kind: PolicyKind,
    pub reps: usize,
    pub final_regret: Spread,
    pub final_regret_values: Vec<f64>,
    pub median_first_half: f64,
    pub median_second_half: f64,
    /// `median_second_half / median_first_half`; below 1 means decelerating regret.
    pub half_ratio: f64,
    pub realized_regret: Spread,
    pub sample_accuracy: Option<Spread>,
    pub sample_f1: Option<Spread>,
    pub marginal_accuracy: Option<Spread>,
    pub marginal_f1: Option<Spread>,
    pub exact_recoveries: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isolation_rounds: Option<usize>,
}

fn spread_opt(values: Vec<Option<f64>>) -> Option<Spread> {
    values.into_iter().collect::<Option<Vec<f64>>>().map(|v| Spread::of(&v))
}

/// JSON summary of a run.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub regret_definition: String,
    pub seed_scheme: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub replications: Vec<RepInfo>,
    pub policies: Vec<PolicySummary>,
}

impl RunSummary {
    pub fn policy(&self, label: &str) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.label == label)
    }
}

pub const REGRET_DEFINITION: &str = "expected-reward regret f(Z*) - f(Z_t) under the true (A, theta), \
accumulated over rounds; realized_regret uses the observed reward sums instead of f(Z_t)";

pub const SEED_SCHEME: &str = "replication r uses seed base_seed + 1000 r (offset by 1000000 per sweep cell \
when matched_seeds = false); ChaCha8 streams: environment = 1, policy = 2, noise = 3, evaluation = 4";

pub fn config_hash(config: &RunConfig) -> String {
    Sha256::digest(config.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn summarize(result: &RunResult) -> RunSummary {
    let policies = result
        .config
        .policies
        .iter()
        .map(|pc| {
            let runs: Vec<&PolicyRun> = result.runs_of(&pc.label).collect();
            let finals: Vec<f64> = runs.iter().map(|r| r.final_regret).collect();
            let first: Vec<f64> = runs.iter().map(|r| r.first_half).collect();
            let second: Vec<f64> = runs.iter().map(|r| r.second_half).collect();
            let (m1, m2) = (median(&first), median(&second));
            let exact = runs
                .iter()
                .map(|r| r.marginal_accuracy.map(|a| usize::from(a == 1.0)))
                .collect::<Option<Vec<usize>>>()
                .map(|v| v.into_iter().sum());
            PolicySummary {
                label: pc.label.clone(),
                kind: pc.kind,
                reps: runs.len(),
                final_regret: Spread::of(&finals),
                final_regret_values: finals,
                median_first_half: m1,
                median_second_half: m2,
                half_ratio: m2 / m1,
                realized_regret: Spread::of(&runs.iter().map(|r| r.realized_regret).collect::<Vec<_>>()),
                sample_accuracy: spread_opt(runs.iter().map(|r| r.sample_accuracy).collect()),
                sample_f1: spread_opt(runs.iter().map(|r| r.sample_f1).collect()),
                marginal_accuracy: spread_opt(runs.iter().map(|r| r.marginal_accuracy).collect()),
                marginal_f1: spread_opt(runs.iter().map(|r| r.marginal_f1).collect()),
                exact_recoveries: exact,
                isolation_rounds: runs.first().and_then(|r| r.isolation_rounds),
            }
        })
        .collect();
    RunSummary {
        name: result.config.name.clone(),
        regret_definition: REGRET_DEFINITION.into(),
        seed_scheme: SEED_SCHEME.into(),
        config_hash: config_hash(&result.config),
        config: result.config.clone(),
        replications: result.reps.clone(),
        policies,
    }
}

/// Output settings shared by the commands.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Output directory; the config's `output_dir`, else `out/<name>`, when absent.
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    /// Skip the per-round CSVs and write only the graph estimates.
    pub graphs_only: bool,
}

impl RunOptions {
    pub fn out_dir(&self, config: &RunConfig) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| Path::new("out").join(&config.name))
    }
}

/// Runs a configuration and writes trajectories, graph estimates,
/// `summary.json` and `manifest.json` under the output directory.
pub fn run(config: &RunConfig, options: &RunOptions) -> Result<RunSummary> {
    let result = execute(config, 0, options.workers)?;
    let dir = options.out_dir(config);
    let mut manifest = Manifest::new(&dir, config);
    output::write_result(&result, &dir, options.graphs_only, &mut manifest)?;
    let summary = summarize(&result);
    manifest.write_json("summary.json", &summary)?;
    manifest.finish()?;
    Ok(summary)
}

/// One cell of a sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepCell {
    pub value: f64,
    pub dir: String,
    pub env_hashes: Vec<String>,
    pub policies: Vec<PolicySummary>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub name: String,
    pub axis: String,
    pub grid: Vec<f64>,
    pub matched_seeds: bool,
    pub seed_scheme: String,
    pub regret_definition: String,
    pub config_hash: String,
    pub cells: Vec<SweepCell>,
}

impl SweepSummary {
    /// Final-regret medians of `label`, one per grid value.
    pub fn medians(&self, label: &str) -> Vec<f64> {
        self.cells
            .iter()
            .filter_map(|c| c.policies.iter().find(|p| p.label == label).map(|p| p.final_regret.median))
            .collect()
    }
}

/// Runs `config` once per grid value of `axis`, writing each cell to its own
/// subdirectory plus `sweep_summary.csv` / `sweep_summary.json` at the top.
pub fn run_sweep(config: &RunConfig, axis: &str, grid: &[f64], options: &RunOptions) -> Result<SweepSummary> {
    if grid.is_empty() {
        return Err(Error::config("grid", "must not be empty"));
    }
    let mut cells_cfg = Vec::with_capacity(grid.len());
    for &v in grid {
        let mut c = config.clone();
        apply_axis(&mut c, axis, v)?;
        cells_cfg.push(c);
    }
    let dir = options.out_dir(config);
    let mut manifest = Manifest::new(&dir, config);
    let mut cells = Vec::with_capacity(grid.len());
    for (k, (c, &v)) in cells_cfg.iter().zip(grid).enumerate() {
        let result = execute(c, k, options.workers)?;
        let sub = format!("{axis}_{v}");
        output::write_result(&result, &dir.join(&sub), options.graphs_only, &mut manifest)?;
        let summary = summarize(&result);
        manifest.write_json(&format!("{sub}/summary.json"), &summary)?;
        cells.push(SweepCell {
            value: v,
            dir: sub,
            env_hashes: result.reps.iter().map(|r| r.env_hash.clone()).collect(),
            policies: summary.policies,
        });
    }
    let summary = SweepSummary {
        name: config.name.clone(),
        axis: axis.to_string(),
        grid: grid.to_vec(),
        matched_seeds: config.replication.matched_seeds,
        seed_scheme: SEED_SCHEME.into(),
        regret_definition: REGRET_DEFINITION.into(),
        config_hash: config_hash(config),
        cells,
    };
    output::write_sweep_csv(&summary, &mut manifest)?;
    manifest.write_json("sweep_summary.json", &summary)?;
    manifest.finish()?;
    Ok(summary)
}

/// Settings of the Gibbs-versus-enumeration check.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleCheck {
    pub n: usize,
    pub rounds: usize,
    pub seed: u64,
    pub sigma: f64,
    pub d_max: usize,
    pub rho: f64,
    pub prior_var: f64,
    pub burn_in: usize,
    pub sweeps: usize,
}

impl Default for OracleCheck {
    fn default() -> Self {
        Self { n: 4, rounds: 30, seed: 7, sigma: 0.5, d_max: 3, rho: 0.3, prior_var: 10.0, burn_in: 500, sweeps: 5000 }
    }
}

#[derive(Clone, Debug)]
pub struct OracleReport {
    pub truth: Adjacency,
    pub exact: DMatrix<f64>,
    pub gibbs: DMatrix<f64>,
    pub max_gap: f64,
}

/// Gibbs edge marginals against exhaustive enumeration on a small
/// count-based instance with uniformly random designs.
pub fn oracle_check(c: &OracleCheck) -> Result<OracleReport> {
    let spec = RewardSpec::new(RewardKind::CountBasedShared { d_max: c.d_max }, c.n)?;
    let mut env_rng = seeds::stream(c.seed, seeds::ENVIRONMENT);
    let graph = crate::graph::generate_with(&GraphFamily::ErdosRenyi { p: 0.5 }, c.n, &mut env_rng)?;
    let theta = crate::reward::sample_params(&spec, &Protocol::count_based(), &mut env_rng)?;
    let env = Environment::new(spec, theta, graph, c.sigma)?;
    let mut design_rng = seeds::stream(c.seed, seeds::POLICY);
    let mut noise = seeds::stream(c.seed, seeds::NOISE);
    let mut history = History::new(c.n);
    for _ in 0..c.rounds {
        let z: Vec<bool> = (0..c.n).map(|_| rand::Rng::random_bool(&mut design_rng, 0.5)).collect();
        let r = env.sample_rewards(&z, &mut noise)?;
        history.push(z, r)?;
    }
    let prior = Prior::isotropic(spec.dimension(), 0.0, c.prior_var, c.sigma * c.sigma, c.rho)?;
    let exact = crate::posterior::exact_edge_marginals(&history, &spec, &prior)?;
    let mut chain_rng = seeds::stream(c.seed, seeds::EVALUATION);
    let mut state = PosteriorState::new(spec, prior, 1, &mut chain_rng)?;
    for _ in 0..c.burn_in {
        state.step(&history, &mut chain_rng)?;
    }
    let gibbs = state.edge_marginals(&history, c.sweeps, &mut chain_rng)?;
    let max_gap = (&exact - &gibbs).abs().max();
    Ok(OracleReport { truth: env.graph().clone(), exact, gibbs, max_gap })
}
