//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use tdal::acquisition::{AcquisitionConfig, Strategy};
use tdal::cli::{DatasetSpec, ExperimentConfig};
use tdal::datasets::{MessyPoolConfig, SyntheticConfig};
use tdal::engine::{ALConfig, EncoderSpec};
use tdal::heads::{ForestConfig, HeadSpec};
use tdal::numerics::Rng;
use tdal::representations::{FineTuneConfig, SplitVaeConfig};

/// Random row-stochastic `k × c` block with some near-degenerate rows.
pub fn random_block(rng: &mut Rng, k: usize, c: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k * c);
    for _ in 0..k {
        let sharp = 1 + rng.below(4) as i32;
        let row: Vec<f64> = (0..c).map(|_| rng.uniform().powi(sharp) + 1e-6).collect();
        let s: f64 = row.iter().sum();
        out.extend(row.iter().map(|v| v / s));
    }
    out
}

/// I(y; y*) for one target, by enumerating `p(θ_k, y, y*) = p(y|θ_k) p(y*|θ_k) / K`
/// and summing `p(y, y*) ln p(y, y*) / (p(y) p(y*))` over the marginalised table.
pub fn enumerate_epig_single(p: &[f64], q: &[f64], k: usize, c: usize) -> f64 {
    let mut table = vec![0.0; k * c * c];
    for t in 0..k {
        for y in 0..c {
            for ys in 0..c {
                table[(t * c + y) * c + ys] = p[t * c + y] * q[t * c + ys] / k as f64;
            }
        }
    }
    let mut joint = vec![0.0; c * c];
    for t in 0..k {
        for i in 0..c * c {
            joint[i] += table[t * c * c + i];
        }
    }
    let mut mi = 0.0;
    for y in 0..c {
        let py: f64 = (0..c).map(|ys| joint[y * c + ys]).sum();
        for ys in 0..c {
            let pys: f64 = (0..c).map(|yy| joint[yy * c + ys]).sum();
            let j = joint[y * c + ys];
            if j > 0.0 {
                mi += j * (j.ln() - py.ln() - pys.ln());
            }
        }
    }
    mi
}

pub fn enumerate_epig(p: &[f64], targets: &[Vec<f64>], k: usize, c: usize) -> f64 {
    targets
        .iter()
        .map(|q| enumerate_epig_single(p, q, k, c))
        .sum::<f64>()
        / targets.len() as f64
}

/// I(y; θ) from the joint `p(y, θ_k) = p(y|θ_k)/K`.
pub fn enumerate_bald(block: &[f64], k: usize, c: usize) -> f64 {
    let mut py = vec![0.0; c];
    for t in 0..k {
        for y in 0..c {
            py[y] += block[t * c + y] / k as f64;
        }
    }
    let mut mi = 0.0;
    for t in 0..k {
        for y in 0..c {
            let j = block[t * c + y] / k as f64;
            if j > 0.0 {
                mi += j * (j / (py[y] / k as f64)).ln();
            }
        }
    }
    mi
}

pub fn forest(n_trees: usize) -> HeadSpec {
    HeadSpec::RandomForest(ForestConfig {
        n_trees,
        ..Default::default()
    })
}

pub fn td_ft() -> EncoderSpec {
    EncoderSpec::TdFt(FineTuneConfig {
        pretrain_epochs: 30,
        finetune_epochs: 60,
        ..Default::default()
    })
}

pub fn td_split() -> EncoderSpec {
    EncoderSpec::TdSplit(SplitVaeConfig {
        epochs: 150,
        learning_rate: 2e-3,
        ..Default::default()
    })
}

/// The synthetic messy-pool experiment: 3 target and 7 redundant classes,
/// nuisance scale 3, 2000-row pool.
pub fn synthetic_experiment(
    encoder: EncoderSpec,
    strategy: Strategy,
    imbalance_ratio: f64,
    budget: usize,
    batch_size: usize,
    seeds: Vec<u64>,
    output_dir: &Path,
) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSpec::Synthetic(SyntheticConfig::default()),
        task: None,
        pool: MessyPoolConfig {
            imbalance_ratio,
            redundant_ratio: None,
            pool_size: 2000,
            test_size: 400,
            target_sample_size: 100,
            seed: 0,
        },
        al: ALConfig {
            budget,
            batch_size,
            retrain_period: 5,
            encoder,
            head: forest(250),
            acquisition: AcquisitionConfig {
                strategy,
                realisations: 100,
                target_samples: 100,
                power_beta: 8.0,
                seed: 0,
            },
            initial_per_class: 2,
            seed: 0,
        },
        seeds,
        output_dir: output_dir.to_path_buf(),
        report_wall_time: false,
    }
}

/// A small, fast configuration for plumbing tests.
pub fn tiny_experiment(output_dir: &Path) -> ExperimentConfig {
    let mut cfg = synthetic_experiment(
        EncoderSpec::Pca { out_dim: 3 },
        Strategy::Epig,
        4.0,
        20,
        10,
        vec![0, 1],
        output_dir,
    );
    cfg.dataset = DatasetSpec::Synthetic(SyntheticConfig {
        per_class: 120,
        ..Default::default()
    });
    cfg.pool.pool_size = 300;
    cfg.pool.test_size = 80;
    cfg.pool.target_sample_size = 10;
    cfg.al.head = forest(20);
    cfg.al.acquisition.realisations = 20;
    cfg.al.acquisition.target_samples = 10;
    cfg
}
