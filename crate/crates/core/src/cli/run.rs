use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, Failure};
use crate::engine::{run_active_learning, RoundRecord};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub encoder: String,
    pub head: String,
    pub strategy: String,
    pub seeds: Vec<u64>,
    pub final_accuracy: Vec<f64>,
    pub target_count: Vec<usize>,
    pub mean_final_acc: f64,
    /// Sample standard deviation over seeds divided by `√n`; 0 for one seed.
    pub stderr_final_acc: f64,
    pub mean_target_count: f64,
}

pub(crate) fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn write_rounds(path: &Path, records: &[RoundRecord], wall_time: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        let wall_ms = if wall_time { r.wall_ms } else { 0 };
        w.serialize(RoundRecord {
            wall_ms,
            ..r.clone()
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Run every seed, writing `config.json`, `rounds_<seed>.csv` and
/// `summary.json` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(
        cfg.output_dir.join("config.json"),
        serde_json::to_string_pretty(cfg)?,
    )?;
    let base = cfg.load_base()?;
    let mut final_accuracy = Vec::with_capacity(cfg.seeds.len());
    let mut target_count = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let splits = cfg.splits(base.as_ref(), seed)?;
        let al = crate::engine::ALConfig {
            seed,
            ..cfg.al.clone()
        };
        let outcome = run_active_learning(&splits, &al)?;
        write_rounds(
            &cfg.output_dir.join(format!("rounds_{seed}.csv")),
            &outcome.records,
            cfg.report_wall_time,
        )?;
        let last = outcome
            .records
            .last()
            .ok_or_else(|| Error::Insufficient("run finished without any rounds".into()))?;
        final_accuracy.push(last.accuracy);
        target_count.push(last.target_count);
    }
    let (mean_final_acc, stderr_final_acc) = mean_stderr(&final_accuracy);
    let summary = RunSummary {
        encoder: cfg.al.encoder.tag().into(),
        head: cfg.al.head.tag().into(),
        strategy: cfg.al.acquisition.strategy.tag().into(),
        seeds: cfg.seeds.clone(),
        mean_target_count: target_count.iter().sum::<usize>() as f64 / target_count.len() as f64,
        final_accuracy,
        target_count,
        mean_final_acc,
        stderr_final_acc,
    };
    fs::write(
        cfg.output_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}

fn load_with_overrides(
    path: &Path,
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(d) = out_dir {
        cfg.output_dir = d.to_path_buf();
    }
    Ok(cfg)
}

pub fn cmd_run(
    path: &Path,
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<RunSummary, Failure> {
    let cfg = load_with_overrides(path, seed, out_dir).map_err(Failure::Config)?;
    run_experiment(&cfg).map_err(Failure::Runtime)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    ImbalanceRatio,
    RedundantRatio,
    RetrainPeriod,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::ImbalanceRatio => "imbalance_ratio",
            SweepAxis::RedundantRatio => "redundant_ratio",
            SweepAxis::RetrainPeriod => "retrain_period",
        }
    }

    fn apply(self, cfg: &mut ExperimentConfig, value: f64) -> Result<()> {
        match self {
            SweepAxis::ImbalanceRatio => cfg.pool.imbalance_ratio = value,
            SweepAxis::RedundantRatio => cfg.pool.redundant_ratio = Some(value),
            SweepAxis::RetrainPeriod => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::config(format!(
                        "retrain_period {value} is not a positive integer"
                    )));
                }
                cfg.al.retrain_period = value as usize;
            }
        }
        cfg.validate()
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imbalance_ratio" => Ok(SweepAxis::ImbalanceRatio),
            "redundant_ratio" => Ok(SweepAxis::RedundantRatio),
            "retrain_period" => Ok(SweepAxis::RetrainPeriod),
            other => Err(Error::config(format!(
                "unknown sweep axis {other:?}; expected imbalance_ratio, redundant_ratio or retrain_period"
            ))),
        }
    }
}

#[derive(Serialize)]
struct SweepRow {
    value: f64,
    seed: u64,
    final_accuracy: f64,
}

/// One sub-experiment per value in `<output_dir>/<axis>_<value>`, plus
/// `<output_dir>/sweep.csv` with a row per (value, seed).
pub fn cmd_sweep(
    path: &Path,
    axis: SweepAxis,
    values: &[f64],
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<Vec<RunSummary>, Failure> {
    let base = load_with_overrides(path, seed, out_dir).map_err(Failure::Config)?;
    if values.is_empty() {
        return Err(Failure::Config(Error::config(
            "sweep needs at least one value",
        )));
    }
    let configs: Vec<ExperimentConfig> = values
        .iter()
        .map(|&v| {
            let mut cfg = base.clone();
            axis.apply(&mut cfg, v)?;
            cfg.output_dir = base.output_dir.join(format!("{}_{v}", axis.name()));
            Ok(cfg)
        })
        .collect::<Result<_>>()
        .map_err(Failure::Config)?;
    let sweep = || -> Result<Vec<RunSummary>> {
        fs::create_dir_all(&base.output_dir)?;
        let mut w = csv::Writer::from_path(base.output_dir.join("sweep.csv"))?;
        let mut out = Vec::new();
        for (cfg, &value) in configs.iter().zip(values) {
            let summary = run_experiment(cfg)?;
            for (&seed, &final_accuracy) in summary.seeds.iter().zip(&summary.final_accuracy) {
                w.serialize(SweepRow {
                    value,
                    seed,
                    final_accuracy,
                })?;
            }
            out.push(summary);
        }
        w.flush()?;
        Ok(out)
    };
    sweep().map_err(Failure::Runtime)
}
