//! Random forest of CART trees with Gini splits. Each tree is one posterior
//! realisation; leaves store add-one smoothed class frequencies.

use serde::{Deserialize, Serialize};

use super::MemberProbs;
use crate::numerics::{Matrix, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Candidate features per split; `None` means `ceil(√d)`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 250,
            max_depth: 12,
            min_leaf: 2,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.max_depth == 0 || self.min_leaf == 0 {
            return Err(Error::config(
                "n_trees, max_depth and min_leaf must be >= 1",
            ));
        }
        if self.features_per_split == Some(0) {
            return Err(Error::config("features_per_split must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        probs: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

struct Grower<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    max_depth: usize,
    min_leaf: usize,
    mtry: usize,
    rng: Rng,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn leaf(&mut self, samples: &[usize]) -> usize {
        let mut counts = vec![0.0; self.n_classes];
        for &s in samples {
            counts[self.y[s]] += 1.0;
        }
        let denom = samples.len() as f64 + self.n_classes as f64;
        let probs = counts.into_iter().map(|c| (c + 1.0) / denom).collect();
        self.nodes.push(Node::Leaf { probs });
        self.nodes.len() - 1
    }

    /// Best `(feature, threshold, score)` where score is
    /// `Σ_left c²/n_l + Σ_right c²/n_r`; larger means a bigger Gini decrease.
    fn best_split(&mut self, samples: &mut [usize]) -> Option<(usize, f64, f64)> {
        let n = samples.len();
        let d = self.x.cols();
        let mut total = vec![0usize; self.n_classes];
        for &s in samples.iter() {
            total[self.y[s]] += 1;
        }
        let parent: f64 = total.iter().map(|&c| (c * c) as f64).sum::<f64>() / n as f64;
        let mut best: Option<(usize, f64, f64)> = None;
        let features = self.rng.sample_indices(d, self.mtry.min(d));
        let mut left = vec![0usize; self.n_classes];
        for f in features {
            samples.sort_by(|&a, &b| self.x[(a, f)].total_cmp(&self.x[(b, f)]));
            left.iter_mut().for_each(|c| *c = 0);
            let (mut sl, mut sr): (f64, f64) = (0.0, parent * n as f64);
            for i in 1..n {
                // move samples[i-1] to the left side, updating Σc² on both sides
                let cls = self.y[samples[i - 1]];
                let lc = left[cls] as f64;
                let rc = (total[cls] - left[cls]) as f64;
                sl += 2.0 * lc + 1.0;
                sr -= 2.0 * rc - 1.0;
                left[cls] += 1;
                if i < self.min_leaf || n - i < self.min_leaf {
                    continue;
                }
                let lo = self.x[(samples[i - 1], f)];
                let hi = self.x[(samples[i], f)];
                if lo >= hi {
                    continue;
                }
                let score = sl / i as f64 + sr / (n - i) as f64;
                if score > parent + 1e-12 && best.is_none_or(|b| score > b.2) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((f, threshold, score));
                }
            }
        }
        best
    }

    fn grow(&mut self, samples: &mut [usize], depth: usize) -> usize {
        let first = self.y[samples[0]];
        let pure = samples.iter().all(|&s| self.y[s] == first);
        if pure || depth >= self.max_depth || samples.len() < 2 * self.min_leaf {
            return self.leaf(samples);
        }
        let Some((feature, threshold, _)) = self.best_split(samples) else {
            return self.leaf(samples);
        };
        let (mut l, mut r): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&s| self.x[(s, feature)] <= threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { probs: Vec::new() });
        let left = self.grow(&mut l, depth + 1);
        let right = self.grow(&mut r, depth + 1);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }
}

impl DecisionTree {
    /// Grow a tree on `samples` (row indices, duplicates allowed), trying
    /// `mtry` random features per split. `limits` is `(max_depth, min_leaf)`.
    pub fn fit(
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        mut samples: Vec<usize>,
        limits: (usize, usize),
        mtry: usize,
        rng: Rng,
    ) -> DecisionTree {
        let (max_depth, min_leaf) = limits;
        let mut g = Grower {
            x,
            y,
            n_classes,
            max_depth,
            min_leaf,
            mtry,
            rng,
            nodes: Vec::new(),
        };
        g.grow(&mut samples, 0);
        DecisionTree { nodes: g.nodes }
    }

    pub fn predict_row(&self, row: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { probs } => return probs,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub n_classes: usize,
    pub input_dim: usize,
}

impl RandomForest {
    pub fn predict_members(&self, z: &Matrix) -> Result<MemberProbs> {
        if z.cols() != self.input_dim {
            return Err(Error::contract(format!(
                "forest trained on {} features, got {}",
                self.input_dim,
                z.cols()
            )));
        }
        let (k, c) = (self.trees.len(), self.n_classes);
        let mut data = Vec::with_capacity(z.rows() * k * c);
        for row in z.row_iter() {
            for t in &self.trees {
                data.extend_from_slice(t.predict_row(row));
            }
        }
        MemberProbs::new(z.rows(), k, c, data)
    }
}

pub fn fit_forest(
    z: &Matrix,
    y: &[usize],
    n_classes: usize,
    cfg: &ForestConfig,
) -> Result<RandomForest> {
    cfg.validate()?;
    let n = z.rows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if y.len() != n {
        return Err(Error::contract("label count does not match rows"));
    }
    if let Some(&bad) = y.iter().find(|&&v| v >= n_classes) {
        return Err(Error::contract(format!(
            "label {bad} out of range 0..{n_classes}"
        )));
    }
    let d = z.cols();
    let mtry = cfg
        .features_per_split
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d.max(1));
    let trees = (0..cfg.n_trees)
        .map(|t| {
            let mut rng = Rng::stream(cfg.seed, &format!("forest/tree/{t}"));
            let samples: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.below(n)).collect()
            } else {
                (0..n).collect()
            };
            DecisionTree::fit(
                z,
                y,
                n_classes,
                samples,
                (cfg.max_depth, cfg.min_leaf),
                mtry,
                rng,
            )
        })
        .collect();
    Ok(RandomForest {
        trees,
        n_classes,
        input_dim: d,
    })
}
