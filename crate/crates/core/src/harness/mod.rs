//! Experiment driver: parameter sweeps over Monte-Carlo drops.
//!
//! Drop seeds are derived from `(master_seed, sweep_index, drop_index)`, so
//! every scheme is scored on the same drops and results do not depend on
//! the scheme list, its order or the number of worker threads.

mod config;
mod output;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{parse_scheme_list, ConfigFile};
pub use output::{emit_cdf, emit_plot_script, write_atomic, CdfPoint, PlotKind};

use crate::assignment::{assign_all, SchemeConfig, SchemeId};
use crate::error::{Error, Result};
use crate::network::{generate_drop, normalize_powers, AssociationMap, NetworkConfig};
use crate::performance::{evaluate, LsfdMode};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum Sweep {
    UeCount(Vec<usize>),
    PilotLength(Vec<usize>),
    AssocThreshold(Vec<f64>),
    /// Single point at the base configuration; per-user SE is kept for CDFs.
    Cdf,
}

impl Sweep {
    pub fn len(&self) -> usize {
        match self {
            Sweep::UeCount(v) | Sweep::PilotLength(v) => v.len(),
            Sweep::AssocThreshold(v) => v.len(),
            Sweep::Cdf => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis_label(&self) -> &'static str {
        match self {
            Sweep::UeCount(_) => "number of UEs",
            Sweep::PilotLength(_) => "pilot length",
            Sweep::AssocThreshold(_) => "association threshold",
            Sweep::Cdf => "number of UEs",
        }
    }

    /// Configuration and x-axis value of point `index`.
    fn point(&self, base: &NetworkConfig, index: usize) -> (NetworkConfig, f64) {
        let mut cfg = base.clone();
        let value = match self {
            Sweep::UeCount(v) => {
                cfg.num_ues = v[index];
                v[index] as f64
            }
            Sweep::PilotLength(v) => {
                cfg.pilot_length = v[index];
                v[index] as f64
            }
            Sweep::AssocThreshold(v) => {
                cfg.assoc_threshold = v[index];
                v[index]
            }
            Sweep::Cdf => cfg.num_ues as f64,
        };
        (cfg, value)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSpec {
    pub base: NetworkConfig,
    /// DPB parameters and tie rule; `scheme` and `seed` are set per run.
    pub scheme_params: SchemeConfig,
    pub lsfd: LsfdMode,
    pub sweep: Sweep,
    pub schemes: Vec<SchemeId>,
    pub num_drops: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses the global pool.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(base: NetworkConfig, sweep: Sweep, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            base,
            scheme_params: SchemeConfig::new(SchemeId::Eem),
            lsfd: LsfdMode::Optimal,
            sweep,
            schemes: SchemeId::ALL.to_vec(),
            num_drops: 50,
            master_seed: 1,
            output_dir: output_dir.into(),
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() {
            return Err(Error::InvalidConfig("sweep has no values".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("no schemes selected".into()));
        }
        if self.num_drops == 0 {
            return Err(Error::InvalidConfig("num_drops must be positive".into()));
        }
        self.scheme_params.validate()?;
        for i in 0..self.sweep.len() {
            self.sweep.point(&self.base, i).0.validate()?;
        }
        Ok(())
    }

    pub fn drop_seed(&self, sweep_index: usize, drop_index: usize) -> u64 {
        seed::derive(self.master_seed, &[sweep_index as u64, drop_index as u64])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub scheme: SchemeId,
    pub sweep_value: f64,
    pub drop_seed: u64,
    pub sum_se: f64,
    /// 5th percentile of the per-user SE.
    pub p5_se: f64,
    /// 10th percentile of the per-user SE (the SE reached by 90% of UEs).
    pub p10_se: f64,
    pub mean_se: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DropResult {
    pub row: ResultRow,
    pub per_user_se: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub scheme: SchemeId,
    pub sweep_value: f64,
    pub drops: usize,
    pub mean_sum_se: f64,
    pub stderr_sum_se: f64,
    pub mean_p5_se: f64,
    pub mean_p10_se: f64,
    pub mean_mean_se: f64,
}

fn run_drop(spec: &ExperimentSpec, sweep_index: usize, drop_index: usize) -> Result<Vec<DropResult>> {
    let (cfg, sweep_value) = spec.sweep.point(&spec.base, sweep_index);
    let drop_seed = spec.drop_seed(sweep_index, drop_index);
    let real = generate_drop(&cfg, drop_seed)?;
    let assoc = AssociationMap::build(&real, cfg.assoc_threshold);
    let powers = normalize_powers(&cfg);
    spec.schemes
        .iter()
        .map(|&scheme| {
            let scheme_cfg = SchemeConfig {
                scheme,
                seed: drop_seed,
                ..spec.scheme_params.clone()
            };
            let pa = assign_all(&scheme_cfg, &real, &assoc, &powers, cfg.pilot_length)?;
            let report = evaluate(&real, &assoc, &pa, &powers, &cfg, spec.lsfd)?;
            Ok(DropResult {
                row: ResultRow {
                    scheme,
                    sweep_value,
                    drop_seed,
                    sum_se: report.sum_se,
                    p5_se: report.percentile(0.05),
                    p10_se: report.percentile(0.10),
                    mean_se: report.mean_se(),
                },
                per_user_se: report.se,
            })
        })
        .collect()
}

fn sort_results(results: &mut [DropResult]) {
    results.sort_by(|a, b| {
        a.row
            .sweep_value
            .total_cmp(&b.row.sweep_value)
            .then(a.row.drop_seed.cmp(&b.row.drop_seed))
            .then(a.row.scheme.cmp(&b.row.scheme))
    });
}

/// Runs every (sweep point, drop, scheme) combination and returns the results
/// in `(sweep_value, drop_seed, scheme)` order. Nothing is written.
pub fn simulate(spec: &ExperimentSpec) -> Result<Vec<DropResult>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.sweep.len())
        .flat_map(|s| (0..spec.num_drops).map(move |d| (s, d)))
        .collect();
    let work = || -> Result<Vec<DropResult>> {
        let nested: Vec<Vec<DropResult>> = jobs
            .par_iter()
            .map(|&(s, d)| run_drop(spec, s, d))
            .collect::<Result<_>>()?;
        Ok(nested.into_iter().flatten().collect())
    };
    let mut results = match spec.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    sort_results(&mut results);
    Ok(results)
}

/// Mean and standard error of the per-drop metrics, per sweep value and
/// scheme.
pub fn aggregate(results: &[DropResult]) -> Vec<AggregateRow> {
    let mut groups: Vec<((f64, SchemeId), Vec<&ResultRow>)> = Vec::new();
    for r in results {
        let key = (r.row.sweep_value, r.row.scheme);
        match groups.iter_mut().find(|(k, _)| k.0 == key.0 && k.1 == key.1) {
            Some((_, rows)) => rows.push(&r.row),
            None => groups.push((key, vec![&r.row])),
        }
    }
    groups.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0).then(a.0 .1.cmp(&b.0 .1)));
    groups
        .into_iter()
        .map(|((sweep_value, scheme), rows)| {
            let n = rows.len() as f64;
            let mean = |f: fn(&ResultRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
            let mean_sum = mean(|r| r.sum_se);
            let var = if rows.len() > 1 {
                rows.iter().map(|r| (r.sum_se - mean_sum).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            AggregateRow {
                scheme,
                sweep_value,
                drops: rows.len(),
                mean_sum_se: mean_sum,
                stderr_sum_se: (var / n).sqrt(),
                mean_p5_se: mean(|r| r.p5_se),
                mean_p10_se: mean(|r| r.p10_se),
                mean_mean_se: mean(|r| r.mean_se),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct Metadata<'a> {
    spec: &'a ExperimentSpec,
    rows: usize,
    version: &'static str,
    git_describe: String,
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

/// Files produced by [`run_experiment`].
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub results: Vec<DropResult>,
    pub rows_csv: PathBuf,
    pub aggregate_csv: PathBuf,
    pub metadata_json: PathBuf,
    pub cdf_csvs: Vec<PathBuf>,
    pub plot_script: PathBuf,
}

/// Simulates and writes `results.csv`, `aggregate.csv`, `metadata.json`,
/// one `cdf_<scheme>.csv` per scheme in CDF mode, and `plot.py`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let results = simulate(spec)?;
    let dir = &spec.output_dir;
    std::fs::create_dir_all(dir)?;

    let rows_csv = dir.join("results.csv");
    output::write_csv(&rows_csv, results.iter().map(|r| &r.row))?;
    let aggregate_csv = dir.join("aggregate.csv");
    output::write_csv(&aggregate_csv, aggregate(&results).iter())?;

    let metadata_json = dir.join("metadata.json");
    let meta = Metadata {
        spec,
        rows: results.len(),
        version: env!("CARGO_PKG_VERSION"),
        git_describe: git_describe(),
    };
    write_atomic(&metadata_json, serde_json::to_string_pretty(&meta)?.as_bytes())?;

    let mut cdf_csvs = Vec::new();
    let plot_kind = if spec.sweep == Sweep::Cdf {
        for &scheme in &spec.schemes {
            let path = dir.join(format!("cdf_{scheme}.csv"));
            let points = emit_cdf(&results, scheme)?;
            output::write_csv(&path, points.iter())?;
            cdf_csvs.push(path);
        }
        PlotKind::Cdf
    } else {
        PlotKind::Sweep {
            x_label: spec.sweep.axis_label().to_string(),
        }
    };
    let plot_inputs = if cdf_csvs.is_empty() {
        vec![aggregate_csv.clone()]
    } else {
        cdf_csvs.clone()
    };
    let script = emit_plot_script(&plot_inputs, &plot_kind)?;
    let plot_script = dir.join("plot.py");
    write_atomic(&plot_script, script.as_bytes())?;

    Ok(ExperimentOutput {
        results,
        rows_csv,
        aggregate_csv,
        metadata_json,
        cdf_csvs,
        plot_script,
    })
}
