//! Downstream estimation pipeline: an adaptive phase with a graph-learning
//! policy, a thresholded graph estimate, then plug-in and OLS effect
//! estimates compared with the truth.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::output::{write_trajectory_csv, Manifest};
use super::{config_hash, in_pool, play, true_optimum, RunConfig, RunOptions, SEED_SCHEME};
use crate::causal::{estimate_from_posterior, estimate_ols, randomized_phase, rmse, true_estimands, write_rmse_table, EstimandTriple};
use crate::error::{Error, Result};
use crate::graph::{edge_accuracy, edge_f1};
use crate::posterior::theta_posterior;
use crate::seeds;

/// Estimator columns, in output order.
pub const ESTIMATORS: [&str; 4] = ["posterior_mean_ahat", "ols_ahat", "posterior_mean_true_a", "ols_true_a"];

/// One replication of the pipeline.
#[derive(Clone, Debug, Serialize)]
pub struct EstimationRep {
    pub rep: usize,
    pub seed: u64,
    pub env_hash: String,
    pub truth: EstimandTriple,
    /// Aligned with [`ESTIMATORS`].
    pub estimates: Vec<EstimandTriple>,
    pub ahat_accuracy: f64,
    pub ahat_f1: f64,
    pub ridge_ahat: bool,
    pub ridge_true_a: bool,
    pub adaptive_regret: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimationSummary {
    pub name: String,
    pub policy: String,
    pub config_hash: String,
    pub seed_scheme: String,
    /// RMSE per estimator, aligned with [`ESTIMATORS`].
    pub rmse: Vec<(String, EstimandTriple)>,
    pub mean_truth: EstimandTriple,
    pub reps: Vec<EstimationRep>,
    pub config: RunConfig,
}

impl EstimationSummary {
    pub fn rmse_of(&self, estimator: &str) -> Option<EstimandTriple> {
        self.rmse.iter().find(|(k, _)| k == estimator).map(|(_, v)| *v)
    }
}

fn one_rep(config: &RunConfig, policy: usize, rep: usize) -> Result<(EstimationRep, Vec<super::TrajectoryRecord>)> {
    let est = config.estimation.clone().unwrap_or_default();
    let seed = config.rep_seed(rep, 0);
    let env = config.build_environment(seed)?;
    let (_, f_opt) = true_optimum(&env, config.budget)?;
    let played = play(config, &env, f_opt, policy, rep, seed)?;
    let a_hat = played.run.a_hat.clone().ok_or_else(|| Error::config("estimation.policy", "policy has no graph estimate"))?;
    let state = played
        .agent
        .posterior()
        .ok_or_else(|| Error::config("estimation.policy", "policy has no posterior"))?;
    let fit = *state.spec();
    let prior = state.prior().clone();
    let post_mean = |g| -> Result<Vec<f64>> {
        Ok(theta_posterior(&played.history, g, &fit, &prior)?.0.iter().copied().collect())
    };
    let mut eval_rng = seeds::stream(seed, seeds::EVALUATION);
    let eval = randomized_phase(&env, est.t_eval, est.treat_prob, &mut eval_rng)?;
    let ols_ahat = estimate_ols(&eval, &fit, &a_hat, est.ridge)?;
    let ols_true = estimate_ols(&eval, &fit, env.graph(), est.ridge)?;
    let estimates = vec![
        estimate_from_posterior(&post_mean(&a_hat)?, &fit, &a_hat)?,
        estimate_from_posterior(&ols_ahat.theta, &fit, &a_hat)?,
        estimate_from_posterior(&post_mean(env.graph())?, &fit, env.graph())?,
        estimate_from_posterior(&ols_true.theta, &fit, env.graph())?,
    ];
    let rep_out = EstimationRep {
        rep,
        seed,
        env_hash: env.fingerprint(),
        truth: true_estimands(env.spec(), env.theta(), env.graph())?,
        estimates,
        ahat_accuracy: edge_accuracy(&a_hat, env.graph())?,
        ahat_f1: edge_f1(&a_hat, env.graph())?,
        ridge_ahat: ols_ahat.ridge_used,
        ridge_true_a: ols_true.ridge_used,
        adaptive_regret: played.run.final_regret,
    };
    Ok((rep_out, played.run.records))
}

/// Runs the pipeline for every replication and writes `rmse_table.csv`,
/// `estimates_long.csv`, `estimation_summary.json`, the adaptive-phase
/// trajectories and the manifest.
pub fn run_estimation(config: &RunConfig, options: &RunOptions) -> Result<EstimationSummary> {
    config.validate()?;
    let policy = config.estimation_policy()?;
    let label = config.policies[policy].label.clone();
    let reps: Vec<usize> = (0..config.replication.reps).collect();
    let results = in_pool(options.workers, || {
        reps.par_iter().map(|&r| one_rep(config, policy, r)).collect::<Result<Vec<_>>>()
    })??;
    let truths: Vec<EstimandTriple> = results.iter().map(|(r, _)| r.truth).collect();
    let mut table = Vec::new();
    for (k, name) in ESTIMATORS.iter().enumerate() {
        let est: Vec<EstimandTriple> = results.iter().map(|(r, _)| r.estimates[k]).collect();
        table.push((name.to_string(), rmse(&est, &truths)?));
    }
    let m = truths.len() as f64;
    let mean_truth = EstimandTriple {
        tau_d: truths.iter().map(|t| t.tau_d).sum::<f64>() / m,
        tau_i1: truths.iter().map(|t| t.tau_i1).sum::<f64>() / m,
        tau_tte: truths.iter().map(|t| t.tau_tte).sum::<f64>() / m,
    };

    let dir = options.out_dir(config);
    let mut manifest = Manifest::new(&dir, config);
    for (r, records) in &results {
        manifest.record_seed(r.rep, r.seed);
        if !options.graphs_only {
            let p = manifest.path(&format!("{label}/rep_{:03}.csv", r.rep))?;
            write_trajectory_csv(&p, records)?;
        }
    }
    write_rmse_table(&manifest.path("rmse_table.csv")?, &table)?;
    let p = manifest.path("estimates_long.csv")?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(p)?);
    writeln!(f, "rep,estimator,estimand,estimate,truth")?;
    for (r, _) in &results {
        for (k, name) in ESTIMATORS.iter().enumerate() {
            for (e, est_name) in EstimandTriple::NAMES.iter().enumerate() {
                writeln!(f, "{},{},{},{},{}", r.rep, name, est_name, r.estimates[k].as_array()[e], r.truth.as_array()[e])?;
            }
        }
    }
    f.flush()?;
    drop(f);
    let summary = EstimationSummary {
        name: config.name.clone(),
        policy: label,
        config_hash: config_hash(config),
        seed_scheme: SEED_SCHEME.into(),
        rmse: table,
        mean_truth,
        reps: results.into_iter().map(|(r, _)| r).collect(),
        config: config.clone(),
    };
    manifest.write_json("estimation_summary.json", &summary)?;
    manifest.finish()?;
    Ok(summary)
}
