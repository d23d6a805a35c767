//! Split-latent semi-supervised VAE.
//!
//! Maximises, by minibatch ascent,
//!
//! ```text
//! J = Σ_pool ELBO(x) + Σ_labelled [ ELBO(x) + α · E_q[ c(z_c)_y ] ]
//! ```
//!
//! where `z_c` is the first `classified_dim` latent coordinates and `c` is a
//! one-hidden-layer softmax classifier. Expectations use one reparameterised
//! sample. The encoder output is `[μ | log σ²]`; the fitted representation is
//! the posterior mean `μ`.

use serde::{Deserialize, Serialize};

use super::encoder::Standardizer;
use super::schedule::{interleave, upsample_balanced, BatchKind};
use super::{EncoderKind, EncoderModel};
use crate::numerics::{
    sigmoid, softplus, Activation, AdamState, Matrix, Mlp, OutputActivation, Rng,
};
use crate::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderLikelihood {
    GaussianUnitVar,
    Bernoulli,
}

/// Form of the supervised term: `p(y|z_c)` as written in the objective, or
/// `ln p(y|z_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierTerm {
    Probability,
    LogProbability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitVaeConfig {
    pub latent_dim: usize,
    pub classified_dim: usize,
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub decoder_likelihood: DecoderLikelihood,
    pub classifier_term: ClassifierTerm,
    /// Hidden width of encoder and decoder.
    pub hidden: usize,
    pub classifier_hidden: usize,
    /// Standardise inputs with pool statistics (Gaussian likelihood only).
    pub standardize: bool,
    pub seed: u64,
}

impl Default for SplitVaeConfig {
    fn default() -> Self {
        Self {
            latent_dim: 10,
            classified_dim: 3,
            alpha: 20.0,
            epochs: 500,
            batch_size: 200,
            learning_rate: 2e-4,
            decoder_likelihood: DecoderLikelihood::GaussianUnitVar,
            classifier_term: ClassifierTerm::Probability,
            hidden: 64,
            classifier_hidden: 32,
            standardize: true,
            seed: 0,
        }
    }
}

impl SplitVaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classified_dim == 0 || self.classified_dim > self.latent_dim {
            return Err(Error::config(format!(
                "classified_dim {} must be in 1..={}",
                self.classified_dim, self.latent_dim
            )));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::config("alpha must be >= 0"));
        }
        if self.batch_size == 0 || self.hidden == 0 || self.classifier_hidden == 0 {
            return Err(Error::config(
                "batch_size and hidden widths must be positive",
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        Ok(())
    }
}

/// KL(N(μ, diag σ²) ‖ N(0, I)) with `logvar = ln σ²`.
pub fn kl_standard_normal(mu: &[f64], logvar: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| m * m + lv.exp() - 1.0 - lv)
        .sum::<f64>()
}

/// Summed objective over a batch and its gradient in the flat
/// `[encoder | decoder | classifier]` parameter layout.
#[derive(Debug, Clone)]
pub struct ElboOutput {
    /// Σ ELBO + α Σ classifier term.
    pub objective: f64,
    pub reconstruction: f64,
    pub kl: f64,
    pub classifier: f64,
    pub grad: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitVae {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub classifier: Mlp,
    latent_dim: usize,
    classified_dim: usize,
    likelihood: DecoderLikelihood,
    term: ClassifierTerm,
}

impl SplitVae {
    pub fn new(
        input_dim: usize,
        n_classes: usize,
        cfg: &SplitVaeConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let l = cfg.latent_dim;
        Ok(Self {
            encoder: Mlp::new(
                &[input_dim, cfg.hidden, 2 * l],
                Activation::Tanh,
                OutputActivation::Linear,
                rng,
            )?,
            decoder: Mlp::new(
                &[l, cfg.hidden, input_dim],
                Activation::Tanh,
                OutputActivation::Linear,
                rng,
            )?,
            classifier: Mlp::new(
                &[cfg.classified_dim, cfg.classifier_hidden, n_classes],
                Activation::Tanh,
                OutputActivation::Softmax,
                rng,
            )?,
            latent_dim: l,
            classified_dim: cfg.classified_dim,
            likelihood: cfg.decoder_likelihood,
            term: cfg.classifier_term,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn classified_dim(&self) -> usize {
        self.classified_dim
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count() + self.classifier.param_count()
    }

    /// Split points of the flat layout: encoder, decoder, classifier.
    pub fn blocks(&self) -> [std::ops::Range<usize>; 3] {
        let e = self.encoder.param_count();
        let d = e + self.decoder.param_count();
        [0..e, e..d, d..self.param_count()]
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.encoder.params().to_vec();
        p.extend_from_slice(self.decoder.params());
        p.extend_from_slice(self.classifier.params());
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::contract("split VAE parameter length mismatch"));
        }
        let [e, d, c] = self.blocks();
        self.encoder.set_params(&p[e])?;
        self.decoder.set_params(&p[d])?;
        self.classifier.set_params(&p[c])
    }

    /// Objective and gradient for a batch with fixed noise `eps` (`B × |z|`).
    /// With `labels`, the classifier term weighted by `alpha` is included.
    pub fn objective(
        &self,
        x: &Matrix,
        eps: &Matrix,
        labels: Option<&[usize]>,
        alpha: f64,
    ) -> Result<ElboOutput> {
        let b = x.rows();
        let l = self.latent_dim;
        if eps.shape() != (b, l) {
            return Err(Error::contract(format!(
                "noise shape {:?}, expected ({b}, {l})",
                eps.shape()
            )));
        }
        if let Some(y) = labels {
            if y.len() != b {
                return Err(Error::contract("label count does not match batch"));
            }
        }
        let enc = self.encoder.forward_cached(x)?;
        let stats = enc.output();
        let mut z = Matrix::zeros(b, l);
        for r in 0..b {
            let s = stats.row(r);
            for j in 0..l {
                z[(r, j)] = s[j] + (0.5 * s[l + j]).exp() * eps[(r, j)];
            }
        }

        let dec = self.decoder.forward_cached(&z)?;
        let out = dec.output();
        let mut reconstruction = 0.0;
        let mut d_out = Matrix::zeros(b, x.cols());
        for r in 0..b {
            for (j, (&xv, &o)) in x.row(r).iter().zip(out.row(r)).enumerate() {
                match self.likelihood {
                    DecoderLikelihood::GaussianUnitVar => {
                        let diff = xv - o;
                        reconstruction += -0.5 * diff * diff - 0.5 * LN_2PI;
                        d_out[(r, j)] = diff;
                    }
                    DecoderLikelihood::Bernoulli => {
                        reconstruction += xv * o - softplus(o);
                        d_out[(r, j)] = xv - sigmoid(o);
                    }
                }
            }
        }
        let dec_back = self.decoder.backward(&dec, &d_out)?;
        let mut dz = dec_back.input;

        let mut classifier = 0.0;
        let mut cls_grad = vec![0.0; self.classifier.param_count()];
        if let Some(y) = labels {
            let zc = z.select_cols(0, self.classified_dim);
            let cls = self.classifier.forward_cached(&zc)?;
            let p = cls.output();
            let mut dlogits = Matrix::zeros(b, p.cols());
            for r in 0..b {
                let py = p[(r, y[r])];
                let (value, weight) = match self.term {
                    ClassifierTerm::Probability => (py, py),
                    ClassifierTerm::LogProbability => (py.ln(), 1.0),
                };
                classifier += value;
                // d term / d logits = weight · (e_y − p)
                for c in 0..p.cols() {
                    let e = if c == y[r] { 1.0 } else { 0.0 };
                    dlogits[(r, c)] = alpha * weight * (e - p[(r, c)]);
                }
            }
            let back = self.classifier.backward_logits(&cls, &dlogits)?;
            cls_grad = back.params;
            for r in 0..b {
                for j in 0..self.classified_dim {
                    dz[(r, j)] += back.input[(r, j)];
                }
            }
        }

        let mut kl = 0.0;
        let mut d_stats = Matrix::zeros(b, 2 * l);
        for r in 0..b {
            let s = stats.row(r);
            kl += kl_standard_normal(&s[..l], &s[l..]);
            for j in 0..l {
                let mu = s[j];
                let lv = s[l + j];
                let sigma = (0.5 * lv).exp();
                d_stats[(r, j)] = dz[(r, j)] - mu;
                d_stats[(r, l + j)] =
                    dz[(r, j)] * eps[(r, j)] * 0.5 * sigma - 0.5 * (lv.exp() - 1.0);
            }
        }
        let enc_back = self.encoder.backward(&enc, &d_stats)?;

        let mut grad = enc_back.params;
        grad.extend_from_slice(&dec_back.params);
        grad.extend_from_slice(&cls_grad);
        Ok(ElboOutput {
            objective: reconstruction - kl + alpha * classifier,
            reconstruction,
            kl,
            classifier,
            grad,
        })
    }

    fn draw_noise(&self, rows: usize, rng: &mut Rng) -> Matrix {
        let mut eps = Matrix::zeros(rows, self.latent_dim);
        for v in eps.data_mut() {
            *v = rng.normal();
        }
        eps
    }

    /// Train from a fresh seed-derived initialisation.
    pub fn train(
        pool_x: &Matrix,
        labeled_x: &Matrix,
        labeled_y: &[usize],
        n_classes: usize,
        cfg: &SplitVaeConfig,
    ) -> Result<(Self, Option<Standardizer>)> {
        cfg.validate()?;
        if labeled_y.is_empty() {
            return Err(Error::contract("td_split needs a non-empty labeled set"));
        }
        if labeled_x.rows() != labeled_y.len() {
            return Err(Error::contract(
                "labeled features and labels differ in length",
            ));
        }
        if labeled_y.iter().any(|&y| y >= n_classes) {
            return Err(Error::contract("label out of range"));
        }
        let scaler = (cfg.standardize
            && cfg.decoder_likelihood == DecoderLikelihood::GaussianUnitVar)
            .then(|| Standardizer::fit(pool_x));
        let (pool_x, labeled_x) = match &scaler {
            Some(s) => (s.apply(pool_x), s.apply(labeled_x)),
            None => (pool_x.clone(), labeled_x.clone()),
        };

        let mut vae = Self::new(
            pool_x.cols(),
            n_classes,
            cfg,
            &mut Rng::stream(cfg.seed, "td_split/init"),
        )?;
        let mut params = vae.params();
        let mut adam = AdamState::new(params.len(), cfg.learning_rate);
        let bs = cfg.batch_size;

        for epoch in 0..cfg.epochs {
            let mut rng = Rng::stream(cfg.seed, &format!("td_split/epoch/{epoch}"));
            let mut order: Vec<usize> = (0..pool_x.rows()).collect();
            rng.shuffle(&mut order);
            let lab_order = upsample_balanced(labeled_y, n_classes, &mut rng);
            let u_batches: Vec<&[usize]> = order.chunks(bs).collect();
            let l_batches: Vec<&[usize]> = lab_order.chunks(bs).collect();
            let (mut ui, mut li) = (0, 0);
            for (bi, kind) in interleave(u_batches.len(), l_batches.len())
                .into_iter()
                .enumerate()
            {
                let out = match kind {
                    BatchKind::Unlabeled => {
                        let idx = u_batches[ui];
                        ui += 1;
                        let x = pool_x.select_rows(idx);
                        let eps = vae.draw_noise(idx.len(), &mut rng);
                        vae.objective(&x, &eps, None, cfg.alpha)?
                    }
                    BatchKind::Labeled => {
                        let idx = l_batches[li];
                        li += 1;
                        let x = labeled_x.select_rows(idx);
                        let y: Vec<usize> = idx.iter().map(|&i| labeled_y[i]).collect();
                        let eps = vae.draw_noise(idx.len(), &mut rng);
                        vae.objective(&x, &eps, Some(&y), cfg.alpha)?
                    }
                };
                if !out.objective.is_finite() || out.grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "td_split epoch {epoch} batch {bi}: objective {} (reconstruction {}, kl {}, classifier {})",
                        out.objective, out.reconstruction, out.kl, out.classifier
                    )));
                }
                let n = match kind {
                    BatchKind::Unlabeled => u_batches[ui - 1].len(),
                    BatchKind::Labeled => l_batches[li - 1].len(),
                } as f64;
                // ascend J: minimise −J / B
                let neg: Vec<f64> = out.grad.iter().map(|g| -g / n).collect();
                adam.step(&mut params, &neg)?;
                vae.set_params(&params)?;
            }
        }
        Ok((vae, scaler))
    }

    pub fn into_encoder(self, scaler: Option<Standardizer>) -> Result<EncoderModel> {
        let classified = self.classified_dim;
        EncoderModel::new(
            EncoderKind::TdSplit {
                scaler,
                encoder: self.encoder,
                latent_dim: self.latent_dim,
                classified_dim: classified,
            },
            Some(0..classified),
        )
    }
}

/// Single-sample ELBO of an unlabeled batch (summed over rows), with noise
/// drawn from `rng`.
pub fn elbo(vae: &SplitVae, x: &Matrix, rng: &mut Rng) -> Result<ElboOutput> {
    if !x.is_finite() {
        return Err(Error::NonFinite("elbo input".into()));
    }
    let eps = vae.draw_noise(x.rows(), rng);
    vae.objective(x, &eps, None, 0.0)
}

/// The full split objective over a pool and a labeled set with frozen
/// reparameterisation noise, as used for gradient checks.
#[derive(Debug, Clone)]
pub struct SplitObjective {
    pub pool_x: Matrix,
    pub pool_eps: Matrix,
    pub labeled_x: Matrix,
    pub labeled_y: Vec<usize>,
    pub labeled_eps: Matrix,
    pub alpha: f64,
}

impl SplitObjective {
    pub fn evaluate(&self, vae: &SplitVae) -> Result<(f64, Vec<f64>)> {
        let u = vae.objective(&self.pool_x, &self.pool_eps, None, self.alpha)?;
        let l = vae.objective(
            &self.labeled_x,
            &self.labeled_eps,
            Some(&self.labeled_y),
            self.alpha,
        )?;
        let grad = u.grad.iter().zip(&l.grad).map(|(a, b)| a + b).collect();
        Ok((u.objective + l.objective, grad))
    }
}

/// Fit the split VAE and return its posterior-mean encoder; the head sees
/// only the first `classified_dim` coordinates.
pub fn fit_td_split(
    pool_x: &Matrix,
    labeled_x: &Matrix,
    labeled_y: &[usize],
    n_classes: usize,
    cfg: &SplitVaeConfig,
) -> Result<EncoderModel> {
    let (vae, scaler) = SplitVae::train(pool_x, labeled_x, labeled_y, n_classes, cfg)?;
    vae.into_encoder(scaler)
}
