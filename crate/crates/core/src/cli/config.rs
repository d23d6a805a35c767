use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::{
    build_messy_pool, load_csv, load_idx, make_synthetic_messy, BaseData, MessyPoolConfig,
    PoolSplits, SyntheticConfig, TaskSpec,
};
use crate::engine::ALConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdxFiles {
    pub images: PathBuf,
    pub labels: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// Generated per seed; target classes are `0..target_classes`.
    Synthetic(SyntheticConfig),
    /// Target-class source plus an optional second source whose classes are
    /// all redundant.
    Idx {
        target: IdxFiles,
        #[serde(default)]
        redundant: Option<IdxFiles>,
    },
    Csv {
        path: PathBuf,
        label_column: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    /// Required for file datasets; synthetic data supplies its own.
    #[serde(default)]
    pub task: Option<TaskSpec>,
    pub pool: MessyPoolConfig,
    pub al: ALConfig,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Record measured round times; otherwise `wall_ms` is written as 0 so
    /// reruns are byte-identical.
    #[serde(default)]
    pub report_wall_time: bool,
}

impl ExperimentConfig {
    /// Parse and validate. Relative paths resolve against the config's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.dataset {
            DatasetSpec::Synthetic(_) => {}
            DatasetSpec::Idx { target, redundant } => {
                fix(&mut target.images);
                fix(&mut target.labels);
                if let Some(r) = redundant {
                    fix(&mut r.images);
                    fix(&mut r.labels);
                }
            }
            DatasetSpec::Csv { path, .. } => fix(path),
        }
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must list at least one seed"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::config("seeds must be distinct"));
        }
        if !matches!(self.dataset, DatasetSpec::Synthetic(_)) && self.task.is_none() {
            return Err(Error::config(
                "task.target_classes is required for idx and csv datasets",
            ));
        }
        self.pool.validate()?;
        self.al.validate()
    }

    /// Load file-backed data once; synthetic data is generated per seed.
    pub fn load_base(&self) -> Result<Option<BaseData>> {
        Ok(match &self.dataset {
            DatasetSpec::Synthetic(_) => None,
            DatasetSpec::Idx { target, redundant } => {
                let t = load_idx(&target.images, &target.labels)?;
                Some(match redundant {
                    Some(r) => BaseData::Pair {
                        target: t,
                        redundant: load_idx(&r.images, &r.labels)?,
                    },
                    None => BaseData::Single(t),
                })
            }
            DatasetSpec::Csv { path, label_column } => {
                Some(BaseData::Single(load_csv(path, label_column)?))
            }
        })
    }

    /// Pool splits for one seed; the seed drives data generation and pool
    /// sampling.
    pub fn splits(&self, base: Option<&BaseData>, seed: u64) -> Result<PoolSplits> {
        let pool_cfg = MessyPoolConfig {
            seed,
            ..self.pool.clone()
        };
        match (&self.dataset, base) {
            (DatasetSpec::Synthetic(sc), _) => {
                let (data, task) = make_synthetic_messy(sc, seed)?;
                let task = self.task.clone().unwrap_or(task);
                build_messy_pool(&BaseData::Single(data), &task, &pool_cfg)
            }
            (_, Some(base)) => {
                let task = self
                    .task
                    .as_ref()
                    .ok_or_else(|| Error::config("missing task"))?;
                build_messy_pool(base, task, &pool_cfg)
            }
            (_, None) => Err(Error::contract("file dataset was not loaded")),
        }
    }
}
