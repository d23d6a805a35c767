use serde::{Deserialize, Serialize};

use super::{Dataset, TaskSpec};
use crate::numerics::{Matrix, Rng};
use crate::{Error, Result};

/// Gaussian class clusters with task-relevant and nuisance dimensions.
///
/// Feature layout is `[task dims | nuisance dims]`. Raw classes `0..t` are
/// the targets and sit at distinct points of the task subspace with unit
/// noise; raw classes `t..t+r` are redundant and all sit at the task-space
/// origin. Nuisance dims carry `N(0, nuisance_scale²)` noise for every class;
/// redundant classes are additionally offset along one nuisance axis each
/// (magnitude `nuisance_scale`), so they differ only there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub target_classes: usize,
    pub redundant_classes: usize,
    pub task_dims: usize,
    pub nuisance_dims: usize,
    pub nuisance_scale: f64,
    /// Distance of each target mean from the task-space origin.
    #[serde(default = "default_separation")]
    pub task_separation: f64,
    #[serde(default = "default_per_class")]
    pub per_class: usize,
}

fn default_separation() -> f64 {
    18.0
}

fn default_per_class() -> usize {
    600
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            target_classes: 3,
            redundant_classes: 7,
            task_dims: 3,
            nuisance_dims: 7,
            nuisance_scale: 3.0,
            task_separation: default_separation(),
            per_class: default_per_class(),
        }
    }
}

/// Signed axis `i` in a space of `dims` dimensions: axes are used in order,
/// then again with flipped sign and growing magnitude.
fn axis_point(i: usize, dims: usize) -> (usize, f64) {
    let axis = i % dims;
    let lap = i / dims;
    let sign = if lap.is_multiple_of(2) { 1.0 } else { -1.0 };
    (axis, sign * (1.0 + (lap / 2) as f64 * 0.5))
}

pub fn make_synthetic_messy(cfg: &SyntheticConfig, seed: u64) -> Result<(Dataset, TaskSpec)> {
    if cfg.target_classes < 2 {
        return Err(Error::config(
            "synthetic generator needs at least 2 target classes",
        ));
    }
    if cfg.task_dims < 1 {
        return Err(Error::config(
            "synthetic generator needs at least 1 task dimension",
        ));
    }
    if cfg.per_class < 1 {
        return Err(Error::config("per_class must be positive"));
    }
    if !(cfg.nuisance_scale >= 0.0) || !(cfg.task_separation > 0.0) {
        return Err(Error::config(
            "nuisance_scale must be >= 0 and task_separation > 0",
        ));
    }
    let n_classes = cfg.target_classes + cfg.redundant_classes;
    let dim = cfg.task_dims + cfg.nuisance_dims;
    let n = n_classes * cfg.per_class;

    let mut rng = Rng::stream(seed, "synthetic");
    let mut features = Matrix::zeros(n, dim);
    let mut labels = Vec::with_capacity(n);
    for class in 0..n_classes {
        let mut mean = vec![0.0; dim];
        if class < cfg.target_classes {
            let (axis, mag) = axis_point(class, cfg.task_dims);
            mean[axis] = mag * cfg.task_separation;
        } else if cfg.nuisance_dims > 0 {
            let (axis, mag) = axis_point(class - cfg.target_classes, cfg.nuisance_dims);
            mean[cfg.task_dims + axis] = mag * cfg.nuisance_scale;
        }
        for _ in 0..cfg.per_class {
            let row = features.row_mut(labels.len());
            for (j, v) in row.iter_mut().enumerate() {
                let scale = if j < cfg.task_dims {
                    1.0
                } else {
                    cfg.nuisance_scale
                };
                *v = mean[j] + scale * rng.normal();
            }
            labels.push(class);
        }
    }
    let mut data = Dataset::new(features, labels)?;
    data.class_names = Some(
        (0..n_classes)
            .map(|c| {
                if c < cfg.target_classes {
                    format!("target_{c}")
                } else {
                    format!("redundant_{}", c - cfg.target_classes)
                }
            })
            .collect(),
    );
    let task = TaskSpec::new((0..cfg.target_classes).collect())?;
    Ok((data, task))
}
