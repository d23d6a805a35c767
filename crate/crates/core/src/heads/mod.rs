//! Stochastic prediction heads. Each fitted head exposes `K` realisations
//! (trees of a forest, or cached posterior weight samples) that each map an
//! input to a class distribution.

mod forest;
mod laplace;

use serde::{Deserialize, Serialize};

pub use forest::{fit_forest, DecisionTree, ForestConfig, RandomForest};
pub use laplace::{fit_laplace, laplace_map_loss, LaplaceConfig, LaplaceHead};

use crate::numerics::Matrix;
use crate::{Error, Result};

/// `B × K × C` per-member class probabilities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberProbs {
    inputs: usize,
    members: usize,
    classes: usize,
    data: Vec<f64>,
}

impl MemberProbs {
    pub fn new(inputs: usize, members: usize, classes: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != inputs * members * classes {
            return Err(Error::contract(
                "member probability buffer has the wrong length",
            ));
        }
        Ok(Self {
            inputs,
            members,
            classes,
            data,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn members(&self) -> usize {
        self.members
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// The `K × C` block for input `i`.
    pub fn input(&self, i: usize) -> &[f64] {
        let s = self.members * self.classes;
        &self.data[i * s..(i + 1) * s]
    }

    /// Keep the first `k` members.
    pub fn truncate_members(&self, k: usize) -> MemberProbs {
        if k >= self.members {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.inputs * k * self.classes);
        for i in 0..self.inputs {
            data.extend_from_slice(&self.input(i)[..k * self.classes]);
        }
        MemberProbs {
            inputs: self.inputs,
            members: k,
            classes: self.classes,
            data,
        }
    }

    /// Mean over members for input `i`.
    pub fn marginal(&self, i: usize) -> Vec<f64> {
        marginal(self.input(i), self.members, self.classes)
    }

    pub fn marginals(&self) -> Matrix {
        let mut out = Matrix::zeros(self.inputs, self.classes);
        for i in 0..self.inputs {
            out.row_mut(i).copy_from_slice(&self.marginal(i));
        }
        out
    }
}

/// Column means of a row-major `k × c` block.
pub fn marginal(block: &[f64], k: usize, c: usize) -> Vec<f64> {
    let mut m = vec![0.0; c];
    for row in block.chunks_exact(c).take(k) {
        for (a, &p) in m.iter_mut().zip(row) {
            *a += p;
        }
    }
    for a in &mut m {
        *a /= k as f64;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeadSpec {
    RandomForest(ForestConfig),
    LaplaceMlp(LaplaceConfig),
}

impl HeadSpec {
    pub fn tag(&self) -> &'static str {
        match self {
            HeadSpec::RandomForest(_) => "random_forest",
            HeadSpec::LaplaceMlp(_) => "laplace_mlp",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            HeadSpec::RandomForest(c) => c.validate(),
            HeadSpec::LaplaceMlp(c) => c.validate(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> HeadSpec {
        match self {
            HeadSpec::RandomForest(c) => HeadSpec::RandomForest(ForestConfig { seed, ..c.clone() }),
            HeadSpec::LaplaceMlp(c) => HeadSpec::LaplaceMlp(LaplaceConfig { seed, ..c.clone() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HeadPosterior {
    RandomForest(RandomForest),
    LaplaceMlp(LaplaceHead),
}

impl HeadPosterior {
    pub fn fit(spec: &HeadSpec, z: &Matrix, y: &[usize], n_classes: usize) -> Result<Self> {
        Ok(match spec {
            HeadSpec::RandomForest(c) => {
                HeadPosterior::RandomForest(fit_forest(z, y, n_classes, c)?)
            }
            HeadSpec::LaplaceMlp(c) => HeadPosterior::LaplaceMlp(fit_laplace(z, y, n_classes, c)?),
        })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            HeadPosterior::RandomForest(_) => "random_forest",
            HeadPosterior::LaplaceMlp(_) => "laplace_mlp",
        }
    }

    /// Number of realisations `K`.
    pub fn realisations(&self) -> usize {
        match self {
            HeadPosterior::RandomForest(f) => f.trees.len(),
            HeadPosterior::LaplaceMlp(l) => l.samples.len(),
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            HeadPosterior::RandomForest(f) => f.n_classes,
            HeadPosterior::LaplaceMlp(l) => l.map.output_dim(),
        }
    }

    pub fn predict_members(&self, z: &Matrix) -> Result<MemberProbs> {
        match self {
            HeadPosterior::RandomForest(f) => f.predict_members(z),
            HeadPosterior::LaplaceMlp(l) => l.predict_members(z),
        }
    }

    /// Mean prediction over members, `B × C`.
    pub fn predict_marginal(&self, z: &Matrix) -> Result<Matrix> {
        Ok(self.predict_members(z)?.marginals())
    }
}
