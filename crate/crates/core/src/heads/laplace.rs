//! One-hidden-layer softmax network with a diagonal, tempered Laplace
//! posterior. Posterior weight samples are drawn once at fit time and cached
//! as the head's realisations.

use serde::{Deserialize, Serialize};

use super::MemberProbs;
use crate::numerics::{Activation, AdamState, Matrix, Mlp, OutputActivation, Rng};
use crate::{Error, Result};

const HESSIAN_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaplaceConfig {
    pub hidden: usize,
    /// Exponent on the likelihood; `None` means the parameter count.
    pub tempering: Option<f64>,
    /// Precision of the isotropic Gaussian prior.
    pub prior_precision: f64,
    pub samples: usize,
    pub map_steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for LaplaceConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            tempering: None,
            prior_precision: 1.0,
            samples: 100,
            map_steps: 300,
            learning_rate: 1e-2,
            seed: 0,
        }
    }
}

impl LaplaceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.samples == 0 {
            return Err(Error::config(
                "laplace hidden width and samples must be >= 1",
            ));
        }
        if !(self.prior_precision > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::config(
                "laplace prior precision and learning rate must be > 0",
            ));
        }
        if let Some(t) = self.tempering {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::config("laplace tempering must be a positive number"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceHead {
    pub map: Mlp,
    pub posterior_variance: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
    pub tempering: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// `tempering · Σ NLL + ½·prior_precision·‖θ‖²` and its gradient.
pub fn laplace_map_loss(
    net: &Mlp,
    z: &Matrix,
    y: &[usize],
    tempering: f64,
    prior_precision: f64,
) -> Result<(f64, Vec<f64>)> {
    let params = net.params();
    let prior: f64 = 0.5 * prior_precision * params.iter().map(|p| p * p).sum::<f64>();
    let mut grad: Vec<f64> = params.iter().map(|p| prior_precision * p).collect();
    if z.rows() == 0 {
        return Ok((prior, grad));
    }
    let cache = net.forward_cached(z)?;
    let probs = cache.output();
    let mut nll = 0.0;
    let mut dlogits = probs.clone();
    for (r, &label) in y.iter().enumerate() {
        nll -= probs[(r, label)].max(f64::MIN_POSITIVE).ln();
        dlogits.row_mut(r)[label] -= 1.0;
    }
    let back = net.backward_logits(&cache, &dlogits)?;
    for (g, b) in grad.iter_mut().zip(&back.params) {
        *g += tempering * b;
    }
    let loss = tempering * nll + prior;
    if !loss.is_finite() {
        return Err(Error::NonFinite("laplace MAP loss".into()));
    }
    Ok((loss, grad))
}

/// Diagonal of `Σ_n Jₙᵀ (diag pₙ − pₙpₙᵀ) Jₙ`, computed as
/// `Σ_n Σ_c p_{n,c} (Jₙᵀ(e_c − pₙ))²`.
fn ggn_diagonal(net: &Mlp, z: &Matrix) -> Result<Vec<f64>> {
    let c = net.output_dim();
    let mut diag = vec![0.0; net.param_count()];
    for r in 0..z.rows() {
        let x = z.select_rows(&[r]);
        let cache = net.forward_cached(&x)?;
        let p = cache.output().row(0).to_vec();
        let mut d = Matrix::zeros(1, c);
        for k in 0..c {
            if p[k] < 1e-300 {
                continue;
            }
            for (j, v) in d.row_mut(0).iter_mut().enumerate() {
                *v = f64::from(u8::from(j == k)) - p[j];
            }
            let g = net.backward_logits(&cache, &d)?.params;
            for (h, gi) in diag.iter_mut().zip(&g) {
                *h += p[k] * gi * gi;
            }
        }
    }
    Ok(diag)
}

pub fn fit_laplace(
    z: &Matrix,
    y: &[usize],
    n_classes: usize,
    cfg: &LaplaceConfig,
) -> Result<LaplaceHead> {
    cfg.validate()?;
    if y.len() != z.rows() {
        return Err(Error::contract("label count does not match rows"));
    }
    if n_classes < 1 {
        return Err(Error::contract("laplace head needs at least one class"));
    }
    if let Some(&bad) = y.iter().find(|&&v| v >= n_classes) {
        return Err(Error::contract(format!(
            "label {bad} out of range 0..{n_classes}"
        )));
    }
    let sizes = [z.cols(), cfg.hidden, n_classes];
    let mut rng = Rng::stream(cfg.seed, "laplace/init");
    let mut net = if z.rows() == 0 {
        // the prior mode is the MAP
        Mlp::zeros(&sizes, Activation::Tanh, OutputActivation::Softmax)?
    } else {
        Mlp::new(
            &sizes,
            Activation::Tanh,
            OutputActivation::Softmax,
            &mut rng,
        )?
    };
    let tempering = cfg.tempering.unwrap_or(net.param_count() as f64);
    let (initial_loss, _) = laplace_map_loss(&net, z, y, tempering, cfg.prior_precision)?;
    let mut final_loss = initial_loss;
    if z.rows() > 0 {
        let mut adam = AdamState::new(net.param_count(), cfg.learning_rate);
        let mut best = (initial_loss, net.params().to_vec());
        for _ in 0..cfg.map_steps {
            let (loss, grad) = laplace_map_loss(&net, z, y, tempering, cfg.prior_precision)?;
            if loss < best.0 {
                best = (loss, net.params().to_vec());
            }
            adam.step(net.params_mut(), &grad)?;
        }
        let (loss, _) = laplace_map_loss(&net, z, y, tempering, cfg.prior_precision)?;
        if loss > best.0 {
            net.set_params(&best.1)?;
            final_loss = best.0;
        } else {
            final_loss = loss;
        }
    }
    let ggn = ggn_diagonal(&net, z)?;
    let posterior_variance: Vec<f64> = ggn
        .iter()
        .map(|g| 1.0 / (tempering * g + cfg.prior_precision).max(HESSIAN_FLOOR))
        .collect();
    let mut rng = Rng::stream(cfg.seed, "laplace/samples");
    let samples = (0..cfg.samples)
        .map(|_| {
            net.params()
                .iter()
                .zip(&posterior_variance)
                .map(|(m, v)| m + v.sqrt() * rng.normal())
                .collect()
        })
        .collect();
    Ok(LaplaceHead {
        map: net,
        posterior_variance,
        samples,
        tempering,
        initial_loss,
        final_loss,
    })
}

impl LaplaceHead {
    pub fn predict_members(&self, z: &Matrix) -> Result<MemberProbs> {
        if z.cols() != self.map.input_dim() {
            return Err(Error::contract(format!(
                "laplace head trained on {} features, got {}",
                self.map.input_dim(),
                z.cols()
            )));
        }
        let (k, c) = (self.samples.len(), self.map.output_dim());
        let mut data = vec![0.0; z.rows() * k * c];
        let mut net = self.map.clone();
        for (s, theta) in self.samples.iter().enumerate() {
            net.set_params(theta)?;
            let out = net.forward(z)?;
            for r in 0..z.rows() {
                let at = (r * k + s) * c;
                data[at..at + c].copy_from_slice(out.row(r));
            }
        }
        MemberProbs::new(z.rows(), k, c, data)
    }
}
