//! The active-learning loop: fit the encoder on schedule, fit the head on
//! the encoded labeled set, score the unlabeled pool, power-sample a batch,
//! query the oracle, and record test accuracy.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{power_select, score_pool, AcquisitionConfig};
use crate::datasets::{sample_initial_labeled, Dataset, PoolSplits};
use crate::heads::{HeadPosterior, HeadSpec};
use crate::numerics::{argmax, derive_seed, Rng};
use crate::representations::{
    fit_pca, fit_td_ft, fit_td_split, EncoderModel, FineTuneConfig, PretrainedAutoencoder,
    SplitVaeConfig,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderSpec {
    Identity,
    Pca { out_dim: usize },
    TdSplit(SplitVaeConfig),
    TdFt(FineTuneConfig),
}

impl EncoderSpec {
    pub fn tag(&self) -> &'static str {
        match self {
            EncoderSpec::Identity => "identity",
            EncoderSpec::Pca { .. } => "pca",
            EncoderSpec::TdSplit(_) => "td_split",
            EncoderSpec::TdFt(_) => "td_ft",
        }
    }

    /// Task-driven encoders use labels and are refit on the retrain schedule.
    pub fn is_task_driven(&self) -> bool {
        matches!(self, EncoderSpec::TdSplit(_) | EncoderSpec::TdFt(_))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EncoderSpec::Identity => Ok(()),
            EncoderSpec::Pca { out_dim } if *out_dim == 0 => {
                Err(Error::config("pca out_dim must be >= 1"))
            }
            EncoderSpec::Pca { .. } => Ok(()),
            EncoderSpec::TdSplit(c) => c.validate(),
            EncoderSpec::TdFt(c) => c.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ALConfig {
    /// Labels acquired after the initial set.
    pub budget: usize,
    pub batch_size: usize,
    /// Encoder refit period in rounds.
    #[serde(default = "default_retrain_period")]
    pub retrain_period: usize,
    pub encoder: EncoderSpec,
    pub head: HeadSpec,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default = "default_initial_per_class")]
    pub initial_per_class: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_retrain_period() -> usize {
    5
}

fn default_initial_per_class() -> usize {
    2
}

impl ALConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if self.budget < self.batch_size {
            return Err(Error::config(format!(
                "budget {} is smaller than batch_size {}",
                self.budget, self.batch_size
            )));
        }
        if self.retrain_period == 0 {
            return Err(Error::config("retrain_period must be >= 1"));
        }
        if self.initial_per_class == 0 {
            return Err(Error::config("initial_per_class must be >= 1"));
        }
        self.encoder.validate()?;
        self.head.validate()?;
        self.acquisition.validate()
    }

    pub fn rounds(&self) -> usize {
        self.budget.div_ceil(self.batch_size)
    }

    /// Encoder refits happen at rounds 1, 1 + k, 1 + 2k, ...
    pub fn is_retrain_round(&self, round: usize) -> bool {
        (round - 1).is_multiple_of(self.retrain_period)
    }
}

/// Labeled and unlabeled pool indices. `labeled` keeps acquisition order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolState {
    pub unlabeled: Vec<usize>,
    pub labeled: Vec<(usize, usize)>,
    pub round: usize,
}

impl PoolState {
    pub fn new(pool_size: usize, initial: &[(usize, usize)]) -> Result<Self> {
        let mut is_labeled = vec![false; pool_size];
        for &(i, _) in initial {
            if i >= pool_size || is_labeled[i] {
                return Err(Error::contract(format!(
                    "initial index {i} is out of range or repeated"
                )));
            }
            is_labeled[i] = true;
        }
        Ok(Self {
            unlabeled: (0..pool_size).filter(|&i| !is_labeled[i]).collect(),
            labeled: initial.to_vec(),
            round: 0,
        })
    }

    pub fn labeled_indices(&self) -> Vec<usize> {
        self.labeled.iter().map(|&(i, _)| i).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.labeled.iter().map(|&(_, y)| y).collect()
    }

    /// Move the unlabeled entries at `positions` into the labeled set.
    fn acquire(&mut self, positions: &[usize], splits: &PoolSplits) -> Result<Vec<usize>> {
        let picked: Vec<usize> = positions.iter().map(|&p| self.unlabeled[p]).collect();
        for &i in &picked {
            self.labeled.push((i, label_oracle(splits, i)?));
        }
        let mut drop = vec![false; self.unlabeled.len()];
        for &p in positions {
            drop[p] = true;
        }
        let mut keep = drop.iter();
        self.unlabeled
            .retain(|_| !keep.next().copied().unwrap_or(false));
        Ok(picked)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Cumulative labels, initial set included.
    pub labels: usize,
    pub accuracy: f64,
    /// Cumulative acquisitions whose true class is a target class.
    pub target_count: usize,
    pub retrained: bool,
    pub wall_ms: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<RoundRecord>,
    pub state: PoolState,
    pub acquired: Vec<usize>,
}

/// Task label for pool row `index`: targets map to their task index, every
/// other class to the redundant label.
pub fn label_oracle(splits: &PoolSplits, index: usize) -> Result<usize> {
    splits.oracle_label(index)
}

/// Fraction of `test` rows whose marginal argmax matches the label.
pub fn evaluate(head: &HeadPosterior, encoder: &EncoderModel, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let z = encoder.encode_head(&test.features)?;
    let marginal = head.predict_marginal(&z)?;
    let hits = test
        .labels
        .iter()
        .enumerate()
        .filter(|&(r, &y)| argmax(marginal.row(r)) == y)
        .count();
    Ok(hits as f64 / test.len() as f64)
}

struct EncoderState {
    pretrained: Option<Arc<PretrainedAutoencoder>>,
    model: Option<EncoderModel>,
}

impl EncoderState {
    fn refit(
        &mut self,
        spec: &EncoderSpec,
        splits: &PoolSplits,
        state: &PoolState,
        seed: u64,
    ) -> Result<bool> {
        let pool_x = &splits.pool.features;
        let n_classes = splits.task.task_class_count();
        let labeled_x = pool_x.select_rows(&state.labeled_indices());
        let labeled_y = state.labels();
        let model = match spec {
            EncoderSpec::Identity | EncoderSpec::Pca { .. } if self.model.is_some() => {
                return Ok(false)
            }
            EncoderSpec::Identity => EncoderModel::identity(pool_x.cols()),
            EncoderSpec::Pca { out_dim } => fit_pca(pool_x, *out_dim)?,
            EncoderSpec::TdSplit(cfg) => {
                let cfg = SplitVaeConfig {
                    seed: derive_seed(seed, &format!("encoder/td_split/{}", state.round)),
                    ..cfg.clone()
                };
                let unlabeled_x = pool_x.select_rows(&state.unlabeled);
                fit_td_split(&unlabeled_x, &labeled_x, &labeled_y, n_classes, &cfg)?
            }
            EncoderSpec::TdFt(cfg) => {
                let pre_cfg = FineTuneConfig {
                    seed: derive_seed(seed, "encoder/td_ft/pretrain"),
                    ..cfg.clone()
                };
                let pretrained = match &self.pretrained {
                    Some(p) => Arc::clone(p),
                    None => {
                        let p = PretrainedAutoencoder::fit(pool_x, &pre_cfg)?;
                        self.pretrained = Some(Arc::clone(&p));
                        p
                    }
                };
                let ft_cfg = FineTuneConfig {
                    seed: derive_seed(seed, &format!("encoder/td_ft/{}", state.round)),
                    ..cfg.clone()
                };
                fit_td_ft(&pretrained, &labeled_x, &labeled_y, n_classes, &ft_cfg)?.encoder
            }
        };
        self.model = Some(model);
        Ok(true)
    }
}

fn fit_head(
    spec: &HeadSpec,
    encoder: &EncoderModel,
    splits: &PoolSplits,
    state: &PoolState,
    seed: u64,
) -> Result<HeadPosterior> {
    let x = splits.pool.features.select_rows(&state.labeled_indices());
    let z = encoder.encode_head(&x)?;
    HeadPosterior::fit(
        &spec.with_seed(seed),
        &z,
        &state.labels(),
        splits.task.task_class_count(),
    )
}

/// Run the loop to budget. Uses `splits.initial_labeled` when non-empty,
/// otherwise samples `initial_per_class` labels per task class.
pub fn run_active_learning(splits: &PoolSplits, cfg: &ALConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let initial = if splits.initial_labeled.is_empty() {
        sample_initial_labeled(
            splits,
            cfg.initial_per_class,
            derive_seed(cfg.seed, "initial"),
        )?
    } else {
        splits.initial_labeled.clone()
    };
    let initial: Vec<(usize, usize)> = initial
        .into_iter()
        .map(|i| Ok((i, label_oracle(splits, i)?)))
        .collect::<Result<_>>()?;
    let mut state = PoolState::new(splits.pool.len(), &initial)?;
    let mut encoder = EncoderState {
        pretrained: None,
        model: None,
    };
    let acq = AcquisitionConfig {
        seed: derive_seed(cfg.seed, "acquisition"),
        ..cfg.acquisition.clone()
    };
    let mut records = Vec::with_capacity(cfg.rounds());
    let mut acquired = Vec::with_capacity(cfg.budget);
    let mut target_count = 0;
    // head fitted on the current labeled set under the current encoder
    let mut current_head: Option<HeadPosterior> = None;

    for round in 1..=cfg.rounds() {
        if state.unlabeled.is_empty() {
            break;
        }
        let started = Instant::now();
        state.round = round;
        let step = |e: Error| Error::Round {
            round,
            source: Box::new(e),
        };
        let retrained = if cfg.encoder.is_task_driven() {
            if cfg.is_retrain_round(round) {
                encoder
                    .refit(&cfg.encoder, splits, &state, cfg.seed)
                    .map_err(step)?
            } else {
                false
            }
        } else {
            encoder
                .refit(&cfg.encoder, splits, &state, cfg.seed)
                .map_err(step)?
        };
        let model = encoder.model.as_ref().expect("encoder fitted in round 1");
        let head = match current_head.take() {
            Some(h) if !retrained => h,
            _ => fit_head(
                &cfg.head,
                model,
                splits,
                &state,
                derive_seed(cfg.seed, &format!("head/{round}/score")),
            )
            .map_err(step)?,
        };

        let candidates = splits.pool.features.select_rows(&state.unlabeled);
        let scores = score_pool(
            &head,
            model,
            &candidates,
            &splits.target_samples,
            &acq,
            round,
        )
        .map_err(step)?;
        let want = (cfg.budget - acquired.len())
            .min(cfg.batch_size)
            .min(state.unlabeled.len());
        let mut rng = Rng::stream(cfg.seed, &format!("select/{round}"));
        let positions =
            power_select(&scores.scores, want, acq.power_beta, &mut rng).map_err(step)?;
        let picked = state.acquire(&positions, splits).map_err(step)?;
        target_count += picked.iter().filter(|&&i| splits.is_target_row(i)).count();
        acquired.extend_from_slice(&picked);

        let head = fit_head(
            &cfg.head,
            model,
            splits,
            &state,
            derive_seed(cfg.seed, &format!("head/{round}/eval")),
        )
        .map_err(step)?;
        let accuracy = evaluate(&head, model, &splits.test).map_err(step)?;
        current_head = Some(head);
        records.push(RoundRecord {
            round,
            labels: state.labeled.len(),
            accuracy,
            target_count,
            retrained,
            wall_ms: started.elapsed().as_millis() as u64,
        });
    }
    Ok(RunOutcome {
        records,
        state,
        acquired,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::Strategy;
    use crate::datasets::{
        build_messy_pool, make_synthetic_messy, BaseData, MessyPoolConfig, SyntheticConfig,
    };
    use crate::heads::ForestConfig;
    use crate::numerics::Matrix;

    fn splits(seed: u64) -> PoolSplits {
        let (data, task) = make_synthetic_messy(
            &SyntheticConfig {
                per_class: 200,
                ..Default::default()
            },
            seed,
        )
        .unwrap();
        build_messy_pool(
            &BaseData::Single(data),
            &task,
            &MessyPoolConfig {
                imbalance_ratio: 4.0,
                redundant_ratio: None,
                pool_size: 300,
                test_size: 120,
                target_sample_size: 20,
                seed,
            },
        )
        .unwrap()
    }

    fn config(strategy: Strategy, budget: usize, batch: usize) -> ALConfig {
        ALConfig {
            budget,
            batch_size: batch,
            retrain_period: 5,
            encoder: EncoderSpec::Pca { out_dim: 3 },
            head: HeadSpec::RandomForest(ForestConfig {
                n_trees: 20,
                ..Default::default()
            }),
            acquisition: AcquisitionConfig {
                strategy,
                realisations: 20,
                target_samples: 20,
                ..Default::default()
            },
            initial_per_class: 2,
            seed: 1,
        }
    }

    #[test]
    fn two_rounds_consume_budget() {
        let s = splits(0);
        let out = run_active_learning(&s, &config(Strategy::Epig, 20, 10)).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.state.labeled.len(), 8 + 20);
        assert_eq!(out.records[1].labels, 28);
        assert!(out.records[0].retrained && !out.records[1].retrained);
    }

    #[test]
    fn index_conservation() {
        let s = splits(1);
        let out = run_active_learning(&s, &config(Strategy::Bald, 35, 10)).unwrap();
        assert_eq!(out.acquired.len(), 35);
        assert_eq!(out.records.len(), 4);
        let mut all: Vec<usize> = out.state.labeled_indices();
        all.extend_from_slice(&out.state.unlabeled);
        all.sort_unstable();
        assert_eq!(all, (0..s.pool.len()).collect::<Vec<_>>());
        for w in out.records.windows(2) {
            assert!(w[1].target_count >= w[0].target_count);
            assert!(w[1].target_count - w[0].target_count <= 10);
        }
        for &(i, y) in &out.state.labeled {
            assert_eq!(y, label_oracle(&s, i).unwrap());
        }
    }

    #[test]
    fn deterministic_records() {
        let s = splits(2);
        let cfg = config(Strategy::Confidence, 20, 5);
        let strip = |r: Vec<RoundRecord>| -> Vec<RoundRecord> {
            r.into_iter()
                .map(|r| RoundRecord { wall_ms: 0, ..r })
                .collect()
        };
        let a = run_active_learning(&s, &cfg).unwrap();
        let b = run_active_learning(&s, &cfg).unwrap();
        assert_eq!(strip(a.records), strip(b.records));
        assert_eq!(a.acquired, b.acquired);
    }

    #[test]
    fn oracle_is_idempotent_and_collapses_redundant() {
        let s = splits(3);
        for i in 0..s.pool.len() {
            let y = label_oracle(&s, i).unwrap();
            assert_eq!(y, label_oracle(&s, i).unwrap());
            if !s.is_target_row(i) {
                assert_eq!(y, s.task.redundant_class_index());
            }
        }
        assert!(label_oracle(&s, s.pool.len()).is_err());
    }

    #[test]
    fn retrain_schedule() {
        let cfg = ALConfig {
            retrain_period: 5,
            ..config(Strategy::Random, 20, 1)
        };
        let rounds: Vec<usize> = (1..=20).filter(|&r| cfg.is_retrain_round(r)).collect();
        assert_eq!(rounds, vec![1, 6, 11, 16]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = config(Strategy::Epig, 5, 10);
        assert!(cfg.validate().is_err());
        cfg.budget = 10;
        cfg.retrain_period = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = ALConfig {
            encoder: EncoderSpec::TdSplit(SplitVaeConfig::default()),
            ..config(Strategy::Epig, 20, 10)
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ALConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn constant_head_accuracy() {
        // one-tree forest trained on a single class predicts that class everywhere
        let s = splits(4);
        let z = Matrix::zeros(3, 1);
        let head = HeadPosterior::fit(
            &HeadSpec::RandomForest(ForestConfig {
                n_trees: 1,
                ..Default::default()
            }),
            &z,
            &[0, 0, 0],
            s.task.task_class_count(),
        )
        .unwrap();
        let test = Dataset::new(Matrix::zeros(6, 1), vec![0, 1, 2, 3, 0, 1]).unwrap();
        let acc = evaluate(&head, &EncoderModel::identity(1), &test).unwrap();
        assert!((acc - 2.0 / 6.0).abs() < 1e-15);
    }
}
