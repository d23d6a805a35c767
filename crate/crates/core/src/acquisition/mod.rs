//! Acquisition scores (EPIG, BALD, least confidence, random) over head
//! realisations, and power-sampled batch selection. All entropies are in
//! nats.

use serde::{Deserialize, Serialize};

use crate::heads::{marginal, HeadPosterior, MemberProbs};
use crate::numerics::{gemm_tn, Matrix, Rng};
use crate::representations::EncoderModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Epig,
    Bald,
    Confidence,
    Random,
}

impl Strategy {
    pub fn tag(self) -> &'static str {
        match self {
            Strategy::Epig => "epig",
            Strategy::Bald => "bald",
            Strategy::Confidence => "confidence",
            Strategy::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub strategy: Strategy,
    /// Head realisations `K` used for scoring.
    pub realisations: usize,
    /// Target inputs `M` used by EPIG.
    pub target_samples: usize,
    pub power_beta: f64,
    pub seed: u64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Epig,
            realisations: 100,
            target_samples: 500,
            power_beta: 4.0,
            seed: 0,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.realisations == 0 {
            return Err(Error::config("realisations must be >= 1"));
        }
        if self.strategy == Strategy::Epig && self.target_samples == 0 {
            return Err(Error::config("epig needs target_samples >= 1"));
        }
        if !(self.power_beta >= 0.0) || !self.power_beta.is_finite() {
            return Err(Error::config("power_beta must be a finite number >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreVector {
    pub strategy: Strategy,
    pub scores: Vec<f64>,
}

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> Result<f64> {
    if let Some(bad) = p.iter().find(|&&v| !(v >= 0.0)) {
        return Err(Error::contract(format!(
            "probability {bad} is negative or NaN"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::contract(format!("probabilities sum to {total}")));
    }
    Ok(entropy_unchecked(p))
}

fn entropy_unchecked(p: &[f64]) -> f64 {
    -p.iter().map(|&v| xlnx(v)).sum::<f64>()
}

fn check_block(block: &[f64], k: usize, c: usize) -> Result<()> {
    if k == 0 || c == 0 || block.len() != k * c {
        return Err(Error::contract(format!(
            "member block of length {} is not {k}×{c}",
            block.len()
        )));
    }
    Ok(())
}

/// Mutual information between the label and the realisation index:
/// `H(mean member) − mean H(member)` for a row-major `k × c` block.
pub fn bald(block: &[f64], k: usize, c: usize) -> Result<f64> {
    check_block(block, k, c)?;
    let mean_h = block.chunks_exact(c).map(entropy_unchecked).sum::<f64>() / k as f64;
    Ok(entropy_unchecked(&marginal(block, k, c)) - mean_h)
}

/// Least confidence of the member-mean prediction.
pub fn confidence_score(block: &[f64], k: usize, c: usize) -> Result<f64> {
    check_block(block, k, c)?;
    let m = marginal(block, k, c);
    Ok(1.0 - m.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Target-side member predictions packed for repeated EPIG evaluation:
/// `q` is `K × (M·C)` with target `m` in columns `m·C..(m+1)·C`.
#[derive(Debug, Clone)]
pub struct EpigTargets {
    k: usize,
    c: usize,
    m: usize,
    q: Vec<f64>,
    q_marginal: Vec<f64>,
}

impl EpigTargets {
    pub fn new(targets: &[&[f64]], k: usize, c: usize) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::contract("epig needs at least one target"));
        }
        let m = targets.len();
        let mut q = vec![0.0; k * m * c];
        for (t, block) in targets.iter().enumerate() {
            check_block(block, k, c).map_err(|_| {
                Error::contract(format!("target {t} is not a {k}×{c} member block"))
            })?;
            for r in 0..k {
                q[r * m * c + t * c..r * m * c + (t + 1) * c]
                    .copy_from_slice(&block[r * c..(r + 1) * c]);
            }
        }
        let q_marginal = marginal(&q, k, m * c);
        Ok(Self {
            k,
            c,
            m,
            q,
            q_marginal,
        })
    }

    pub fn from_members(members: &MemberProbs) -> Result<Self> {
        let blocks: Vec<&[f64]> = (0..members.inputs()).map(|i| members.input(i)).collect();
        Self::new(&blocks, members.members(), members.classes())
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Mean over targets of `Σ J ln(J / (p ⊗ q))` with
    /// `J[y, y*] = (1/K) Σ_k P[k, y] Q_m[k, y*]`.
    pub fn score(&self, candidate: &[f64]) -> Result<f64> {
        let (k, c, m) = (self.k, self.c, self.m);
        if candidate.len() != k * c {
            return Err(Error::contract(format!(
                "candidate block of length {} does not match {k} realisations × {c} classes",
                candidate.len()
            )));
        }
        let p = marginal(candidate, k, c);
        let mut joint = vec![0.0; c * m * c];
        gemm_tn(candidate, &self.q, &mut joint, k, c, m * c);
        let inv_k = 1.0 / k as f64;
        let mut total = 0.0;
        for (y, row) in joint.chunks_exact(m * c).enumerate() {
            if p[y] <= 0.0 {
                continue;
            }
            for (&s, &q) in row.iter().zip(&self.q_marginal) {
                let jv = s * inv_k;
                if jv > 0.0 {
                    total += jv * (jv / (p[y] * q)).ln();
                }
            }
        }
        Ok(total / m as f64)
    }
}

/// EPIG of one candidate against `M` target member blocks, all `k × c`.
pub fn epig(candidate: &[f64], targets: &[&[f64]], k: usize, c: usize) -> Result<f64> {
    check_block(candidate, k, c)?;
    EpigTargets::new(targets, k, c)?.score(candidate)
}

/// Draw `batch` distinct indices sequentially, each with probability
/// proportional to `score^β` among those not yet drawn. Zero total weight
/// (and `β = 0`) falls back to uniform.
pub fn power_select(scores: &[f64], batch: usize, beta: f64, rng: &mut Rng) -> Result<Vec<usize>> {
    if batch > scores.len() {
        return Err(Error::Insufficient(format!(
            "cannot select {batch} of {} candidates",
            scores.len()
        )));
    }
    if !(beta >= 0.0) {
        return Err(Error::contract("power beta must be >= 0"));
    }
    let mut log_w = Vec::with_capacity(scores.len());
    for &s in scores {
        if !s.is_finite() || s < -1e-9 {
            return Err(Error::contract(format!(
                "acquisition score {s} is not a finite value >= 0"
            )));
        }
        log_w.push(if beta == 0.0 {
            0.0
        } else {
            beta * s.max(0.0).ln()
        });
    }
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = if top == f64::NEG_INFINITY {
        vec![1.0; scores.len()]
    } else {
        log_w.iter().map(|&l| (l - top).exp()).collect()
    };
    let mut taken = vec![false; scores.len()];
    let mut picked = Vec::with_capacity(batch);
    for _ in 0..batch {
        let mut total: f64 = w
            .iter()
            .zip(&taken)
            .filter(|(_, &t)| !t)
            .map(|(w, _)| w)
            .sum();
        if total <= 0.0 {
            for (wi, &t) in w.iter_mut().zip(&taken) {
                if !t {
                    *wi = 1.0;
                }
            }
            total = taken.iter().filter(|&&t| !t).count() as f64;
        }
        let target = rng.uniform() * total;
        let mut acc = 0.0;
        let mut choice = None;
        for (i, (&wi, &t)) in w.iter().zip(&taken).enumerate() {
            if t || wi <= 0.0 {
                continue;
            }
            acc += wi;
            choice = Some(i);
            if target < acc {
                break;
            }
        }
        let i = choice.expect("positive remaining weight");
        taken[i] = true;
        picked.push(i);
    }
    Ok(picked)
}

/// Score every candidate row under `cfg.strategy`, using the first
/// `cfg.realisations` head members and the first `cfg.target_samples`
/// target rows.
pub fn score_pool(
    head: &HeadPosterior,
    encoder: &EncoderModel,
    candidates: &Matrix,
    targets: &Matrix,
    cfg: &AcquisitionConfig,
    round: usize,
) -> Result<ScoreVector> {
    cfg.validate()?;
    let n = candidates.rows();
    let scores: Vec<f64> = match cfg.strategy {
        Strategy::Random => {
            let mut rng = Rng::stream(cfg.seed, &format!("acquisition/random/{round}"));
            (0..n).map(|_| rng.uniform()).collect()
        }
        strategy => {
            let z = encoder.encode_head(candidates)?;
            let members = head.predict_members(&z)?.truncate_members(cfg.realisations);
            let (k, c) = (members.members(), members.classes());
            match strategy {
                Strategy::Bald => (0..n)
                    .map(|i| bald(members.input(i), k, c))
                    .collect::<Result<_>>()?,
                Strategy::Confidence => (0..n)
                    .map(|i| confidence_score(members.input(i), k, c))
                    .collect::<Result<_>>()?,
                _ => {
                    let m = targets.rows().min(cfg.target_samples);
                    if m == 0 {
                        return Err(Error::Insufficient(
                            "epig needs at least one target sample".into(),
                        ));
                    }
                    let idx: Vec<usize> = (0..m).collect();
                    let zt = encoder.encode_head(&targets.select_rows(&idx))?;
                    let tm = head
                        .predict_members(&zt)?
                        .truncate_members(cfg.realisations);
                    let packed = EpigTargets::from_members(&tm)?;
                    (0..n)
                        .map(|i| packed.score(members.input(i)))
                        .collect::<Result<_>>()?
                }
            }
        }
    };
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!(
            "{} score {bad}",
            cfg.strategy.tag()
        )));
    }
    Ok(ScoreVector {
        strategy: cfg.strategy,
        scores,
    })
}
