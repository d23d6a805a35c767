use serde::{Deserialize, Serialize};

use crate::numerics::Matrix;
use crate::{Error, Result};

/// Feature matrix with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub class_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if features.rows() != labels.len() {
            return Err(Error::contract(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("dataset features".into()));
        }
        Ok(Self {
            features,
            labels,
            class_names: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// One past the largest label.
    pub fn n_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Row indices grouped by label.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_classes()];
        for (i, &y) in self.labels.iter().enumerate() {
            out[y].push(i);
        }
        out
    }

    /// Rows `idx`, in order. May be empty.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }
}

/// Which raw classes are targets. Every other raw class collapses onto a
/// single redundant task label placed right after the targets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TaskSpecRepr", into = "TaskSpecRepr")]
pub struct TaskSpec {
    target_classes: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct TaskSpecRepr {
    target_classes: Vec<usize>,
}

impl TryFrom<TaskSpecRepr> for TaskSpec {
    type Error = Error;

    fn try_from(r: TaskSpecRepr) -> Result<Self> {
        TaskSpec::new(r.target_classes)
    }
}

impl From<TaskSpec> for TaskSpecRepr {
    fn from(t: TaskSpec) -> Self {
        TaskSpecRepr {
            target_classes: t.target_classes,
        }
    }
}

impl TaskSpec {
    pub fn new(target_classes: Vec<usize>) -> Result<Self> {
        if target_classes.is_empty() {
            return Err(Error::config("task needs at least one target class"));
        }
        for (i, c) in target_classes.iter().enumerate() {
            if target_classes[..i].contains(c) {
                return Err(Error::config(format!("target class {c} listed twice")));
            }
        }
        Ok(Self { target_classes })
    }

    pub fn target_classes(&self) -> &[usize] {
        &self.target_classes
    }

    pub fn n_targets(&self) -> usize {
        self.target_classes.len()
    }

    pub fn redundant_class_index(&self) -> usize {
        self.target_classes.len()
    }

    pub fn task_class_count(&self) -> usize {
        self.target_classes.len() + 1
    }

    pub fn is_target(&self, raw: usize) -> bool {
        self.target_classes.contains(&raw)
    }

    /// Target raw class → its position in the target list; anything else →
    /// the redundant index.
    pub fn task_label(&self, raw: usize) -> usize {
        self.target_classes
            .iter()
            .position(|&c| c == raw)
            .unwrap_or(self.redundant_class_index())
    }
}
