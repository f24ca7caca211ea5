//! File outputs.
//!
//! Layout of a run directory:
//!
//! ```text
//! <label>/rep_000.csv            per-round trajectory
//! <label>/rep_000_graph.txt      final graph estimate as an edge list
//! <label>/rep_000_marginals.csv  dense n x n edge marginals
//! summary.json
//! manifest.json                  every file above, config hash, seed ledger
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use super::{config_hash, RunConfig, RunResult, SweepSummary, TrajectoryRecord, SEED_SCHEME};
use crate::error::Result;

pub const CSV_HEADER: &str = "t,regret_inst,regret_cum,f_opt,f_chosen,n_treated,f1_snapshot,acc_snapshot";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes one replication's trajectory; snapshot columns are empty off-cadence.
pub fn write_trajectory_csv(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{}",
            r.t,
            r.regret_inst,
            r.regret_cum,
            r.f_opt,
            r.f_chosen,
            r.n_treated(),
            opt(r.f1_snapshot),
            opt(r.acc_snapshot)
        )?;
    }
    f.flush()?;
    Ok(())
}

fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        writeln!(f, "{}", row.join(","))?;
    }
    f.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SeedEntry {
    rep: usize,
    seed: u64,
}

#[derive(Serialize)]
struct ManifestFile<'a> {
    config_name: &'a str,
    config_hash: &'a str,
    seed_scheme: &'a str,
    base_seed: u64,
    seed_ledger: Vec<SeedEntry>,
    files: &'a [String],
}

/// Tracks the files written under a directory.
pub struct Manifest {
    root: PathBuf,
    name: String,
    hash: String,
    base_seed: u64,
    seeds: Vec<(usize, u64)>,
    files: Vec<String>,
}

impl Manifest {
    pub fn new(root: &Path, config: &RunConfig) -> Self {
        Self {
            root: root.to_path_buf(),
            name: config.name.clone(),
            hash: config_hash(config),
            base_seed: config.replication.base_seed,
            seeds: Vec::new(),
            files: Vec::new(),
        }
    }

    /// Absolute path of `rel`, creating parent directories and recording it.
    pub fn path(&mut self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.files.push(rel.to_string());
        Ok(p)
    }

    pub fn record_seed(&mut self, rep: usize, seed: u64) {
        if !self.seeds.contains(&(rep, seed)) {
            self.seeds.push((rep, seed));
        }
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let p = self.path(rel)?;
        let text = serde_json::to_string_pretty(value).map_err(|e| std::io::Error::other(e.to_string()))?;
        std::fs::write(p, text + "\n")?;
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Writes `manifest.json`.
    pub fn finish(mut self) -> Result<PathBuf> {
        self.seeds.sort();
        let body = ManifestFile {
            config_name: &self.name,
            config_hash: &self.hash,
            seed_scheme: SEED_SCHEME,
            base_seed: self.base_seed,
            seed_ledger: self.seeds.iter().map(|&(rep, seed)| SeedEntry { rep, seed }).collect(),
            files: &self.files,
        };
        let text = serde_json::to_string_pretty(&body).map_err(|e| std::io::Error::other(e.to_string()))?;
        std::fs::create_dir_all(&self.root)?;
        let p = self.root.join("manifest.json");
        std::fs::write(&p, text + "\n")?;
        Ok(p)
    }
}

/// Writes the per-replication files of `result` under `dir`, recording them
/// in `manifest` relative to its root.
pub(crate) fn write_result(result: &RunResult, dir: &Path, graphs_only: bool, manifest: &mut Manifest) -> Result<()> {
    let prefix = dir
        .strip_prefix(&manifest.root)
        .map(|p| p.to_path_buf())
        .unwrap_or_default();
    let rel = |s: String| -> String {
        if prefix.as_os_str().is_empty() {
            s
        } else {
            prefix.join(s).to_string_lossy().into_owned()
        }
    };
    for info in &result.reps {
        manifest.record_seed(info.rep, info.seed);
    }
    for run in &result.runs {
        let stem = format!("{}/rep_{:03}", run.label, run.rep);
        if !graphs_only {
            let p = manifest.path(&rel(format!("{stem}.csv")))?;
            write_trajectory_csv(&p, &run.records)?;
        }
        if let Some(g) = &run.a_hat {
            let p = manifest.path(&rel(format!("{stem}_graph.txt")))?;
            g.write_edge_list(&p)?;
        }
        if let Some(m) = &run.marginals {
            let p = manifest.path(&rel(format!("{stem}_marginals.csv")))?;
            write_matrix_csv(&p, m)?;
        }
    }
    Ok(())
}

pub(crate) fn write_sweep_csv(summary: &SweepSummary, manifest: &mut Manifest) -> Result<()> {
    let p = manifest.path("sweep_summary.csv")?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(p)?);
    writeln!(
        f,
        "axis,value,label,reps,median,q25,q75,iqr,mean,trimmed_mean,median_accuracy,median_f1,exact_recoveries"
    )?;
    for cell in &summary.cells {
        for ps in &cell.policies {
            let r = &ps.final_regret;
            writeln!(
                f,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                summary.axis,
                cell.value,
                ps.label,
                ps.reps,
                r.median,
                r.q25,
                r.q75,
                r.iqr,
                r.mean,
                r.trimmed_mean,
                opt(ps.marginal_accuracy.as_ref().map(|s| s.median)),
                opt(ps.marginal_f1.as_ref().map(|s| s.median)),
                ps.exact_recoveries.map(|v| v.to_string()).unwrap_or_default()
            )?;
        }
    }
    f.flush()?;
    Ok(())
}
