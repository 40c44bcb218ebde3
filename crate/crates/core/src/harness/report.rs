//! Running a configured experiment and writing its tables.
//!
//! Output directory layout: one CSV per table, `summary.json` with the
//! run-level scalars, and `manifest.json` holding the full configuration, its
//! SHA-256 hash and the master seed, which is all a rerun needs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{load_data, ExperimentConfig, LoadedData, Mode};
use super::{
    run_covariate_shift, run_drns_sweep, run_eval_stationary, run_optimize, ReplicateSummary,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

const SUMMARY_COLUMNS: [&str; 9] = [
    "method",
    "ground_truth",
    "mean_estimate",
    "bias",
    "rmse",
    "rmse_ci95",
    "std",
    "replicates",
    "failures",
];

fn summary_cells(s: &ReplicateSummary) -> Vec<String> {
    vec![
        s.method.clone(),
        num(s.ground_truth),
        num(s.mean_estimate),
        num(s.bias),
        num(s.rmse),
        num(s.rmse_ci95),
        num(s.std),
        s.replicates.to_string(),
        s.failures.to_string(),
    ]
}

fn with_extra<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(extra).copied().collect()
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub summary: serde_json::Value,
}

/// Loads the data and runs the configured protocol.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<RunOutput> {
    config.validate()?;
    let seed = config.seed;
    let reps = config.replicates();
    let seed_s = seed.to_string();
    let data = load_data(&config.data_source(), seed)?;
    let wrong = |what: &str| {
        Error::validation(format!("mode {:?} needs a {what} data source", config.mode))
    };
    match config.mode {
        Mode::EvalStationary => {
            let LoadedData::Multiclass(ds) = data else {
                return Err(wrong("multiclass"));
            };
            let out = run_eval_stationary(&ds, &config.eval, reps, seed, workers)?;
            let mut rows = Table::new(
                "eval_replicates",
                &["replicate", "seed", "method", "estimate"],
            );
            for r in &out.rows {
                rows.push(vec![
                    r.replicate.to_string(),
                    r.seed.to_string(),
                    r.method.name().into(),
                    num(r.estimate),
                ]);
            }
            let mut summary = Table::new("eval_summary", &with_extra(&SUMMARY_COLUMNS, &["seed"]));
            for s in &out.summaries {
                let mut cells = summary_cells(s);
                cells.push(seed_s.clone());
                summary.push(cells);
            }
            Ok(RunOutput {
                tables: vec![summary, rows],
                summary: serde_json::json!({ "ground_truth": out.ground_truth, "summaries": out.summaries }),
            })
        }
        Mode::Optimize => {
            let LoadedData::Multiclass(ds) = data else {
                return Err(wrong("multiclass"));
            };
            let out = run_optimize(&ds, &config.optimize, reps, seed, workers)?;
            let mut rows = Table::new(
                "optimize_replicates",
                &["replicate", "seed", "learner", "imputation", "test_error"],
            );
            for r in &out.rows {
                rows.push(vec![
                    r.replicate.to_string(),
                    r.seed.to_string(),
                    r.learner.name().into(),
                    r.imputation.name().into(),
                    num(r.test_error),
                ]);
            }
            let mut summary = Table::new(
                "optimize_summary",
                &[
                    "learner",
                    "imputation",
                    "mean_error",
                    "std",
                    "replicates",
                    "dr_wins",
                    "dr_losses",
                    "sign_test_p",
                    "seed",
                ],
            );
            for s in &out.summaries {
                summary.push(vec![
                    s.learner.name().into(),
                    s.imputation.name().into(),
                    num(s.mean_error),
                    num(s.std),
                    s.replicates.to_string(),
                    opt(s.dr_wins),
                    opt(s.dr_losses),
                    opt(s.sign_test_p),
                    seed_s.clone(),
                ]);
            }
            Ok(RunOutput {
                tables: vec![summary, rows],
                summary: serde_json::json!({ "summaries": out.summaries }),
            })
        }
        Mode::CovariateShift => {
            let LoadedData::Regression(ds) = data else {
                return Err(wrong("regression"));
            };
            let out = run_covariate_shift(&ds, &config.shift, reps, seed, workers)?;
            let mut rows = Table::new(
                "shift_replicates",
                &["fraction", "replicate", "seed", "ips", "dr"],
            );
            for r in &out.rows {
                rows.push(vec![
                    num(r.fraction),
                    r.replicate.to_string(),
                    r.seed.to_string(),
                    opt(r.ips),
                    opt(r.dr),
                ]);
            }
            let cols = with_extra(&["fraction"], &with_extra(&SUMMARY_COLUMNS, &["seed"]));
            let mut summary = Table::new("shift_summary", &cols);
            for (f, ips, dr) in &out.summaries {
                for s in [ips, dr] {
                    let mut cells = vec![num(*f)];
                    cells.extend(summary_cells(s));
                    cells.push(seed_s.clone());
                    summary.push(cells);
                }
            }
            Ok(RunOutput {
                tables: vec![summary, rows],
                summary: serde_json::json!({ "ground_truth": out.ground_truth, "sampler": out.sampler }),
            })
        }
        Mode::Drns => {
            let LoadedData::Multilabel(ds) = data else {
                return Err(wrong("multilabel"));
            };
            let out = run_drns_sweep(&ds, &config.drns, reps, seed, workers)?;
            let mut rows = Table::new(
                "drns_replicates",
                &["replicate", "seed", "method", "estimate", "trajectories"],
            );
            for r in &out.rows {
                rows.push(vec![
                    r.replicate.to_string(),
                    r.seed.to_string(),
                    r.method.clone(),
                    opt(r.estimate),
                    r.trajectories.to_string(),
                ]);
            }
            let mut summary = Table::new(
                "drns_summary",
                &with_extra(&SUMMARY_COLUMNS, &["mean_trajectories", "seed"]),
            );
            for s in &out.summaries {
                let mut cells = summary_cells(&s.summary);
                cells.push(num(s.mean_trajectories));
                cells.push(seed_s.clone());
                summary.push(cells);
            }
            Ok(RunOutput {
                tables: vec![summary, rows],
                summary: serde_json::json!({
                    "ground_truth": out.ground_truth,
                    "ground_truth_se": out.ground_truth_se,
                    "min_propensity": out.min_propensity,
                }),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub file: String,
    pub columns: Vec<String>,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub replicates: usize,
    pub tables: Vec<TableEntry>,
    pub tool_version: String,
}

/// SHA-256 of the configuration's canonical JSON (keys sorted).
pub fn config_hash(config: &ExperimentConfig) -> String {
    let value = serde_json::to_value(config).expect("config serializes");
    let canonical = serde_json::to_string(&value).expect("value serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_report(
    dir: impl AsRef<Path>,
    config: &ExperimentConfig,
    output: &RunOutput,
) -> Result<Manifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for t in &output.tables {
        write(&dir.join(t.file_name()), &t.to_csv())?;
    }
    let summary = serde_json::to_string_pretty(&output.summary).expect("summary serializes");
    write(&dir.join("summary.json"), &summary)?;
    let manifest = Manifest {
        config: config.clone(),
        config_hash: config_hash(config),
        seed: config.seed,
        replicates: config.replicates(),
        tables: output
            .tables
            .iter()
            .map(|t| TableEntry {
                file: t.file_name(),
                columns: t.columns.clone(),
                rows: t.rows.len(),
            })
            .collect(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
    };
    write(
        &dir.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(manifest)
}
