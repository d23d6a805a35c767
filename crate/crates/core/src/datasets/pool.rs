use serde::{Deserialize, Serialize};

use super::{Dataset, TaskSpec};
use crate::numerics::{Matrix, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessyPoolConfig {
    /// Redundant-class count over target-class count in the pool.
    pub imbalance_ratio: f64,
    /// Target classes over all classes used; `None` keeps every available
    /// redundant class.
    #[serde(default)]
    pub redundant_ratio: Option<f64>,
    pub pool_size: usize,
    pub test_size: usize,
    pub target_sample_size: usize,
    #[serde(default)]
    pub seed: u64,
}

impl MessyPoolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.imbalance_ratio >= 1.0) || !self.imbalance_ratio.is_finite() {
            return Err(Error::config(format!(
                "imbalance_ratio must be >= 1, got {}",
                self.imbalance_ratio
            )));
        }
        if let Some(rr) = self.redundant_ratio {
            if !(rr > 0.0 && rr <= 1.0) {
                return Err(Error::config(format!(
                    "redundant_ratio must be in (0, 1], got {rr}"
                )));
            }
        }
        if self.pool_size == 0 || self.test_size == 0 || self.target_sample_size == 0 {
            return Err(Error::config(
                "pool_size, test_size and target_sample_size must be positive",
            ));
        }
        Ok(())
    }
}

/// Raw material for a pool: either one dataset whose non-target classes are
/// redundant, or a target dataset plus a wholly redundant one (e.g. MNIST
/// digits with FashionMNIST as filler).
#[derive(Debug, Clone)]
pub enum BaseData {
    Single(Dataset),
    Pair { target: Dataset, redundant: Dataset },
}

/// Output of [`build_messy_pool`].
///
/// `pool.labels` and `test.labels` hold task labels. The `*_source` vectors
/// index rows of the combined source data.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolSplits {
    pub task: TaskSpec,
    pub pool: Dataset,
    pub pool_raw_labels: Vec<usize>,
    pub pool_source: Vec<usize>,
    pub test: Dataset,
    pub test_source: Vec<usize>,
    pub target_samples: Matrix,
    pub target_source: Vec<usize>,
    pub initial_labeled: Vec<usize>,
}

impl PoolSplits {
    /// Task label the oracle would return for pool row `index`.
    pub fn oracle_label(&self, index: usize) -> Result<usize> {
        self.pool_raw_labels
            .get(index)
            .map(|&raw| self.task.task_label(raw))
            .ok_or_else(|| {
                Error::contract(format!(
                    "pool index {index} out of range ({} rows)",
                    self.pool_raw_labels.len()
                ))
            })
    }

    pub fn is_target_row(&self, index: usize) -> bool {
        self.task.is_target(self.pool_raw_labels[index])
    }
}

/// Per-class pool counts.
///
/// With `r > 0` redundant classes: the largest `q` such that
/// `r·q + t·⌊q/IR⌋ ≤ pool_size`; each target gets `⌊q/IR⌋` and the leftover
/// is handed to redundant classes round-robin. Without redundant classes the
/// pool is split evenly over targets, remainder to the lowest indices.
pub fn class_quotas(
    pool_size: usize,
    ir: f64,
    t: usize,
    r: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if t == 0 {
        return Err(Error::config("no target classes"));
    }
    let target_quota = |q: usize| ((q as f64) / ir + 1e-9).floor() as usize;
    if r == 0 {
        let base = pool_size / t;
        if base == 0 {
            return Err(Error::Insufficient(format!(
                "quota underflow: pool_size {pool_size} < {t} target classes"
            )));
        }
        let rem = pool_size % t;
        let targets = (0..t).map(|i| base + usize::from(i < rem)).collect();
        return Ok((targets, Vec::new()));
    }
    let mut q = pool_size / r;
    while q > 0 && r * q + t * target_quota(q) > pool_size {
        q -= 1;
    }
    let tq = target_quota(q);
    if tq == 0 {
        return Err(Error::Insufficient(format!(
            "quota underflow: pool_size {pool_size} with IR {ir} leaves no target examples"
        )));
    }
    let mut redundant = vec![q; r];
    let mut rem = pool_size - r * q - t * tq;
    let mut i = 0;
    while rem > 0 {
        redundant[i % r] += 1;
        rem -= 1;
        i += 1;
    }
    Ok((vec![tq; t], redundant))
}

/// Split `total` into `parts` near-equal shares, remainder to the front.
fn even_split(total: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| total / parts + usize::from(i < total % parts))
        .collect()
}

/// Combined view of the base data: features, raw labels, the target raw
/// classes and the redundant raw classes available.
fn combine(base: &BaseData, task: &TaskSpec) -> Result<(Dataset, Vec<usize>)> {
    match base {
        BaseData::Single(d) => {
            let present = d.indices_by_class();
            for &c in task.target_classes() {
                if present.get(c).is_none_or(|v| v.is_empty()) {
                    return Err(Error::Insufficient(format!(
                        "target class {c} has no examples"
                    )));
                }
            }
            let redundant = (0..present.len())
                .filter(|&c| !task.is_target(c) && !present[c].is_empty())
                .collect();
            Ok((d.clone(), redundant))
        }
        BaseData::Pair { target, redundant } => {
            if target.dim() != redundant.dim() {
                return Err(Error::contract(format!(
                    "target data has {} features but redundant data has {}",
                    target.dim(),
                    redundant.dim()
                )));
            }
            let offset = target.n_classes();
            for &c in task.target_classes() {
                if c >= offset {
                    return Err(Error::config(format!(
                        "target class {c} not present in target dataset"
                    )));
                }
            }
            let features = target.features.vstack(&redundant.features)?;
            let mut labels = target.labels.clone();
            labels.extend(redundant.labels.iter().map(|&y| y + offset));
            let present: Vec<bool> = {
                let mut p = vec![false; redundant.n_classes()];
                for &y in &redundant.labels {
                    p[y] = true;
                }
                p
            };
            let red_classes = (0..redundant.n_classes())
                .filter(|&c| present[c])
                .map(|c| c + offset)
                .collect();
            Ok((Dataset::new(features, labels)?, red_classes))
        }
    }
}

/// Build pool, balanced test set and EPIG target samples from `base`.
///
/// Targets are the minority classes of the pool. Test rows are balanced over
/// the task labels present; target samples come from target-class rows held
/// out of both pool and test. `initial_labeled` is left empty; see
/// [`sample_initial_labeled`].
pub fn build_messy_pool(
    base: &BaseData,
    task: &TaskSpec,
    cfg: &MessyPoolConfig,
) -> Result<PoolSplits> {
    cfg.validate()?;
    let (source, mut redundant_classes) = combine(base, task)?;
    let t = task.n_targets();
    if let Some(rr) = cfg.redundant_ratio {
        let total = ((t as f64) / rr).round() as usize;
        let wanted = total.saturating_sub(t);
        if wanted > redundant_classes.len() {
            return Err(Error::Insufficient(format!(
                "redundant ratio {rr} needs {wanted} redundant classes, only {} available",
                redundant_classes.len()
            )));
        }
        redundant_classes.truncate(wanted);
    }
    let r = redundant_classes.len();
    let (target_q, redundant_q) = class_quotas(cfg.pool_size, cfg.imbalance_ratio, t, r)?;

    let n_labels = t + usize::from(r > 0);
    let test_per_label = even_split(cfg.test_size, n_labels);
    let redundant_test = if r > 0 {
        even_split(test_per_label[t], r)
    } else {
        Vec::new()
    };

    let by_class = source.indices_by_class();
    let mut pool_idx = Vec::with_capacity(cfg.pool_size);
    let mut test_idx = Vec::with_capacity(cfg.test_size);
    let mut held_out_targets = Vec::new();

    let classes = task
        .target_classes()
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, target_q[i], test_per_label[i]))
        .chain(
            redundant_classes
                .iter()
                .enumerate()
                .map(|(j, &c)| (c, redundant_q[j], redundant_test[j])),
        );
    for (class, n_pool, n_test) in classes {
        let mut members = by_class.get(class).cloned().unwrap_or_default();
        if members.len() < n_pool + n_test {
            return Err(Error::Insufficient(format!(
                "class {class} has {} examples, needs {n_pool} for the pool and {n_test} for the test set",
                members.len()
            )));
        }
        Rng::stream(cfg.seed, &format!("pool/class/{class}")).shuffle(&mut members);
        pool_idx.extend_from_slice(&members[..n_pool]);
        test_idx.extend_from_slice(&members[n_pool..n_pool + n_test]);
        if task.is_target(class) {
            held_out_targets.extend_from_slice(&members[n_pool + n_test..]);
        }
    }

    if held_out_targets.len() < cfg.target_sample_size {
        return Err(Error::Insufficient(format!(
            "{} held-out target examples, need {} target samples",
            held_out_targets.len(),
            cfg.target_sample_size
        )));
    }
    held_out_targets.sort_unstable();
    let picks = Rng::stream(cfg.seed, "pool/target_samples")
        .sample_indices(held_out_targets.len(), cfg.target_sample_size);
    let target_source: Vec<usize> = picks.into_iter().map(|i| held_out_targets[i]).collect();

    Rng::stream(cfg.seed, "pool/order").shuffle(&mut pool_idx);
    Rng::stream(cfg.seed, "test/order").shuffle(&mut test_idx);

    let to_task = |idx: &[usize]| -> Dataset {
        let mut d = source.subset(idx);
        d.labels = d.labels.iter().map(|&y| task.task_label(y)).collect();
        d.class_names = None;
        d
    };

    Ok(PoolSplits {
        task: task.clone(),
        pool: to_task(&pool_idx),
        pool_raw_labels: pool_idx.iter().map(|&i| source.labels[i]).collect(),
        pool_source: pool_idx.clone(),
        test: to_task(&test_idx),
        test_source: test_idx,
        target_samples: source.features.select_rows(&target_source),
        target_source,
        initial_labeled: Vec::new(),
    })
}

/// `per_class` pool indices of every task label, sampled uniformly without
/// replacement. The redundant label is skipped only when the pool holds no
/// redundant rows at all.
pub fn sample_initial_labeled(
    splits: &PoolSplits,
    per_class: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if per_class == 0 {
        return Err(Error::config("initial labels per class must be >= 1"));
    }
    let n_task = splits.task.task_class_count();
    let mut members = vec![Vec::new(); n_task];
    for (i, &y) in splits.pool.labels.iter().enumerate() {
        members[y].push(i);
    }
    let redundant = splits.task.redundant_class_index();
    let mut out = Vec::with_capacity(per_class * n_task);
    for (label, m) in members.iter().enumerate() {
        if label == redundant && m.is_empty() {
            continue;
        }
        if m.len() < per_class {
            return Err(Error::Insufficient(format!(
                "task class {label} has {} pool members, need {per_class} initial labels",
                m.len()
            )));
        }
        let picks =
            Rng::stream(seed, &format!("initial/{label}")).sample_indices(m.len(), per_class);
        out.extend(picks.into_iter().map(|i| m[i]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{make_synthetic_messy, SyntheticConfig};

    fn synthetic(per_class: usize) -> (Dataset, TaskSpec) {
        make_synthetic_messy(
            &SyntheticConfig {
                per_class,
                ..Default::default()
            },
            3,
        )
        .unwrap()
    }

    fn cfg(ir: f64, pool: usize) -> MessyPoolConfig {
        MessyPoolConfig {
            imbalance_ratio: ir,
            redundant_ratio: None,
            pool_size: pool,
            test_size: 200,
            target_sample_size: 50,
            seed: 9,
        }
    }

    #[test]
    fn quotas_hit_pool_size() {
        let (t, r) = class_quotas(1000, 10.0, 3, 7).unwrap();
        assert_eq!(t, vec![13, 13, 13]);
        assert_eq!(t.iter().sum::<usize>() + r.iter().sum::<usize>(), 1000);
        assert!(r.iter().all(|&q| q == 137 || q == 138), "{r:?}");
        assert!(class_quotas(20, 150.0, 3, 7).is_err());
    }

    #[test]
    fn balanced_when_everything_is_a_target() {
        let (t, r) = class_quotas(10, 1.0, 3, 0).unwrap();
        assert_eq!(t, vec![4, 3, 3]);
        assert!(r.is_empty());
    }

    #[test]
    fn pool_counts_and_labels() {
        let (data, task) = synthetic(400);
        let s = build_messy_pool(&BaseData::Single(data), &task, &cfg(10.0, 1000)).unwrap();
        assert_eq!(s.pool.len(), 1000);
        let mut counts = [0; 4];
        for &y in &s.pool.labels {
            counts[y] += 1;
        }
        assert_eq!(&counts[..3], &[13, 13, 13]);
        assert_eq!(counts[3], 961);

        let mut test_counts = vec![0; 4];
        for &y in &s.test.labels {
            test_counts[y] += 1;
        }
        assert_eq!(test_counts, vec![50; 4]);
        assert_eq!(s.target_samples.rows(), 50);
    }

    #[test]
    fn splits_are_disjoint_and_targets_only() {
        let (data, task) = synthetic(300);
        let raw = data.labels.clone();
        let s = build_messy_pool(&BaseData::Single(data), &task, &cfg(2.0, 800)).unwrap();
        let mut seen = std::collections::HashSet::new();
        for &i in s
            .pool_source
            .iter()
            .chain(&s.test_source)
            .chain(&s.target_source)
        {
            assert!(seen.insert(i), "row {i} used twice");
        }
        assert!(s.target_source.iter().all(|&i| raw[i] < 3));
        assert!(s.pool.labels.iter().all(|&y| y < 4));
    }

    #[test]
    fn pure_in_inputs_and_seed() {
        let (data, task) = synthetic(200);
        let base = BaseData::Single(data);
        let a = build_messy_pool(&base, &task, &cfg(10.0, 600)).unwrap();
        let b = build_messy_pool(&base, &task, &cfg(10.0, 600)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn insufficient_examples() {
        let (data, task) = synthetic(30);
        assert!(matches!(
            build_messy_pool(&BaseData::Single(data), &task, &cfg(10.0, 1000)),
            Err(Error::Insufficient(_))
        ));
    }

    #[test]
    fn redundant_ratio_one_drops_redundant_category() {
        let (data, task) = synthetic(200);
        let mut c = cfg(1.0, 300);
        c.redundant_ratio = Some(1.0);
        let s = build_messy_pool(&BaseData::Single(data), &task, &c).unwrap();
        let mut counts = vec![0; 4];
        for &y in &s.pool.labels {
            counts[y] += 1;
        }
        assert_eq!(counts, vec![100, 100, 100, 0]);
        let init = sample_initial_labeled(&s, 2, 0).unwrap();
        assert_eq!(init.len(), 6);
    }

    #[test]
    fn redundant_ratio_limits_classes() {
        let (data, task) = synthetic(200);
        let mut c = cfg(2.0, 400);
        c.redundant_ratio = Some(0.5);
        let s = build_messy_pool(&BaseData::Single(data), &task, &c).unwrap();
        let mut raw: Vec<usize> = s.pool_raw_labels.clone();
        raw.sort_unstable();
        raw.dedup();
        assert_eq!(raw, vec![0, 1, 2, 3, 4, 5]);
        c.redundant_ratio = Some(0.2);
        assert!(build_messy_pool(&BaseData::Single(synthetic(200).0), &task, &c).is_err());
    }

    #[test]
    fn pair_base_offsets_redundant_labels() {
        let (a, _) = synthetic(100);
        let (b, _) = synthetic(100);
        let task = TaskSpec::new(vec![1, 2]).unwrap();
        let base = BaseData::Pair {
            target: a,
            redundant: b,
        };
        let s = build_messy_pool(&base, &task, &cfg(10.0, 500)).unwrap();
        // Only classes 1 and 2 of the target set participate; all ten
        // redundant-set classes are offset by 10.
        assert!(s
            .pool_raw_labels
            .iter()
            .all(|&y| y == 1 || y == 2 || y >= 10));
        assert_eq!(
            s.oracle_label(0).unwrap(),
            task.task_label(s.pool_raw_labels[0])
        );
    }

    #[test]
    fn initial_labeled_per_class() {
        let (data, task) = synthetic(200);
        let s = build_messy_pool(&BaseData::Single(data), &task, &cfg(10.0, 600)).unwrap();
        let init = sample_initial_labeled(&s, 2, 4).unwrap();
        assert_eq!(init.len(), 8);
        let mut counts = vec![0; 4];
        for &i in &init {
            counts[s.pool.labels[i]] += 1;
        }
        assert_eq!(counts, vec![2; 4]);
        let mut dedup = init.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), 8);
        assert_eq!(init, sample_initial_labeled(&s, 2, 4).unwrap());
        assert!(sample_initial_labeled(&s, 500, 4).is_err());
    }
}
