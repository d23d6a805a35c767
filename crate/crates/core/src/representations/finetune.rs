//! Autoencoder pretraining followed by supervised fine-tuning through a
//! guidance classifier.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::encoder::Standardizer;
use super::schedule::upsample_balanced;
use super::{EncoderKind, EncoderModel};
use crate::numerics::{Activation, AdamState, Matrix, Mlp, OutputActivation, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FineTuneConfig {
    /// Hidden widths of the encoder; the decoder mirrors them.
    pub hidden: Vec<usize>,
    pub representation_dim: usize,
    pub classifier_hidden: usize,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub pretrain_learning_rate: f64,
    pub finetune_learning_rate: f64,
    pub batch_size: usize,
    pub upsample_minority: bool,
    pub standardize: bool,
    pub seed: u64,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64],
            representation_dim: 16,
            classifier_hidden: 32,
            pretrain_epochs: 100,
            finetune_epochs: 100,
            pretrain_learning_rate: 1e-3,
            finetune_learning_rate: 1e-3,
            batch_size: 64,
            upsample_minority: true,
            standardize: true,
            seed: 0,
        }
    }
}

impl FineTuneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.representation_dim == 0 {
            return Err(Error::config("representation_dim must be >= 1"));
        }
        if self.hidden.contains(&0) || self.classifier_hidden == 0 || self.batch_size == 0 {
            return Err(Error::config(
                "hidden widths and batch_size must be positive",
            ));
        }
        if !(self.pretrain_learning_rate > 0.0 && self.finetune_learning_rate > 0.0) {
            return Err(Error::config("learning rates must be positive"));
        }
        Ok(())
    }

    fn encoder_sizes(&self, input_dim: usize) -> Vec<usize> {
        let mut s = vec![input_dim];
        s.extend_from_slice(&self.hidden);
        s.push(self.representation_dim);
        s
    }
}

/// Stage-one checkpoint: an MLP autoencoder trained on the pool by squared
/// reconstruction error. Shared read-only between refits.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainedAutoencoder {
    pub scaler: Option<Standardizer>,
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub final_loss: f64,
}

impl PretrainedAutoencoder {
    pub fn fit(pool_x: &Matrix, cfg: &FineTuneConfig) -> Result<Arc<Self>> {
        cfg.validate()?;
        let scaler = cfg.standardize.then(|| Standardizer::fit(pool_x));
        let x = match &scaler {
            Some(s) => s.apply(pool_x),
            None => pool_x.clone(),
        };
        let d = x.cols();
        let enc_sizes = cfg.encoder_sizes(d);
        let dec_sizes: Vec<usize> = enc_sizes.iter().rev().copied().collect();
        let mut rng = Rng::stream(cfg.seed, "td_ft/pretrain/init");
        let mut encoder = Mlp::new(
            &enc_sizes,
            Activation::Tanh,
            OutputActivation::Linear,
            &mut rng,
        )?;
        let mut decoder = Mlp::new(
            &dec_sizes,
            Activation::Tanh,
            OutputActivation::Linear,
            &mut rng,
        )?;
        let ne = encoder.param_count();
        let mut params = encoder.params().to_vec();
        params.extend_from_slice(decoder.params());
        let mut adam = AdamState::new(params.len(), cfg.pretrain_learning_rate);

        let mut final_loss = f64::NAN;
        for epoch in 0..cfg.pretrain_epochs {
            let mut rng = Rng::stream(cfg.seed, &format!("td_ft/pretrain/epoch/{epoch}"));
            let mut order: Vec<usize> = (0..x.rows()).collect();
            rng.shuffle(&mut order);
            let mut total = 0.0;
            for idx in order.chunks(cfg.batch_size) {
                let xb = x.select_rows(idx);
                let (loss, grad) = reconstruction_loss(&encoder, &decoder, &xb)?;
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "td_ft pretrain epoch {epoch}: loss {loss}"
                    )));
                }
                total += loss * idx.len() as f64;
                adam.step(&mut params, &grad)?;
                encoder.set_params(&params[..ne])?;
                decoder.set_params(&params[ne..])?;
            }
            final_loss = total / x.rows().max(1) as f64;
        }
        Ok(Arc::new(Self {
            scaler,
            encoder,
            decoder,
            final_loss,
        }))
    }

    pub fn encoder_model(&self) -> Result<EncoderModel> {
        EncoderModel::new(
            EncoderKind::TdFt {
                scaler: self.scaler.clone(),
                encoder: self.encoder.clone(),
            },
            None,
        )
    }
}

/// Mean `½‖x − dec(enc(x))‖²` and its gradient over `[encoder | decoder]`.
pub(crate) fn reconstruction_loss(
    encoder: &Mlp,
    decoder: &Mlp,
    x: &Matrix,
) -> Result<(f64, Vec<f64>)> {
    let b = x.rows().max(1) as f64;
    let ec = encoder.forward_cached(x)?;
    let dc = decoder.forward_cached(ec.output())?;
    let xhat = dc.output();
    let mut up = Matrix::zeros(x.rows(), x.cols());
    let mut loss = 0.0;
    for (u, (&a, &t)) in up
        .data_mut()
        .iter_mut()
        .zip(xhat.data().iter().zip(x.data()))
    {
        let diff = a - t;
        loss += 0.5 * diff * diff;
        *u = diff / b;
    }
    let db = decoder.backward(&dc, &up)?;
    let eb = encoder.backward(&ec, &db.input)?;
    let mut grad = eb.params;
    grad.extend_from_slice(&db.params);
    Ok((loss / b, grad))
}

/// Mean cross-entropy of `classifier(encoder(x))` against `y`, with the
/// gradient over `[encoder | classifier]`.
pub fn finetune_loss(
    encoder: &Mlp,
    classifier: &Mlp,
    x: &Matrix,
    y: &[usize],
) -> Result<(f64, Vec<f64>)> {
    if y.len() != x.rows() {
        return Err(Error::contract("label count does not match rows"));
    }
    let b = x.rows().max(1) as f64;
    let ec = encoder.forward_cached(x)?;
    let cc = classifier.forward_cached(ec.output())?;
    let p = cc.output();
    let mut dlogits = p.clone();
    let mut loss = 0.0;
    for (r, &yr) in y.iter().enumerate() {
        if yr >= p.cols() {
            return Err(Error::contract(format!("label {yr} out of range")));
        }
        loss -= p[(r, yr)].max(f64::MIN_POSITIVE).ln();
        dlogits[(r, yr)] -= 1.0;
    }
    for v in dlogits.data_mut() {
        *v /= b;
    }
    let cb = classifier.backward_logits(&cc, &dlogits)?;
    let eb = encoder.backward(&ec, &cb.input)?;
    let mut grad = eb.params;
    grad.extend_from_slice(&cb.params);
    Ok((loss / b, grad))
}

#[derive(Debug, Clone)]
pub struct FineTuneOutcome {
    pub encoder: EncoderModel,
    /// Mean cross-entropy on the labeled set before the first update.
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Guidance-classifier accuracy on the (non-upsampled) labeled set.
    pub train_accuracy: f64,
}

/// Stage two: restore the pretrained encoder, attach a fresh guidance
/// classifier and minimise cross-entropy on the labeled set. The checkpoint
/// itself is never modified.
pub fn fit_td_ft(
    pretrained: &PretrainedAutoencoder,
    labeled_x: &Matrix,
    labeled_y: &[usize],
    n_classes: usize,
    cfg: &FineTuneConfig,
) -> Result<FineTuneOutcome> {
    cfg.validate()?;
    if labeled_y.is_empty() {
        return Err(Error::contract("td_ft needs a non-empty labeled set"));
    }
    let x = match &pretrained.scaler {
        Some(s) => s.apply(labeled_x),
        None => labeled_x.clone(),
    };
    let mut encoder = pretrained.encoder.clone();
    let mut classifier = Mlp::new(
        &[encoder.output_dim(), cfg.classifier_hidden, n_classes],
        Activation::Tanh,
        OutputActivation::Softmax,
        &mut Rng::stream(cfg.seed, "td_ft/classifier/init"),
    )?;
    let ne = encoder.param_count();
    let mut params = encoder.params().to_vec();
    params.extend_from_slice(classifier.params());
    let mut adam = AdamState::new(params.len(), cfg.finetune_learning_rate);

    let initial_loss = finetune_loss(&encoder, &classifier, &x, labeled_y)?.0;
    for epoch in 0..cfg.finetune_epochs {
        let mut rng = Rng::stream(cfg.seed, &format!("td_ft/finetune/epoch/{epoch}"));
        let order = if cfg.upsample_minority {
            upsample_balanced(labeled_y, n_classes, &mut rng)
        } else {
            let mut o: Vec<usize> = (0..labeled_y.len()).collect();
            rng.shuffle(&mut o);
            o
        };
        for idx in order.chunks(cfg.batch_size) {
            let xb = x.select_rows(idx);
            let yb: Vec<usize> = idx.iter().map(|&i| labeled_y[i]).collect();
            let (loss, grad) = finetune_loss(&encoder, &classifier, &xb, &yb)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "td_ft finetune epoch {epoch}: loss {loss}"
                )));
            }
            adam.step(&mut params, &grad)?;
            encoder.set_params(&params[..ne])?;
            classifier.set_params(&params[ne..])?;
        }
    }
    let final_loss = finetune_loss(&encoder, &classifier, &x, labeled_y)?.0;
    let probs = classifier.forward(&encoder.forward(&x)?)?;
    let correct = labeled_y
        .iter()
        .enumerate()
        .filter(|&(r, &y)| crate::numerics::argmax(probs.row(r)) == y)
        .count();

    Ok(FineTuneOutcome {
        encoder: EncoderModel::new(
            EncoderKind::TdFt {
                scaler: pretrained.scaler.clone(),
                encoder,
            },
            None,
        )?,
        initial_loss,
        final_loss,
        train_accuracy: correct as f64 / labeled_y.len() as f64,
    })
}
