use serde::{Deserialize, Serialize};

use super::matrix::{gemm_nn, gemm_nt, gemm_tn};
use super::{sigmoid, softmax_into, Matrix, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Linear,
    Softmax,
    Sigmoid,
}

/// Fully connected feed-forward network.
///
/// Parameters live in one flat vector: for each layer, the `in × out`
/// row-major weight block followed by the `out` biases. Gradients use the
/// same layout, which keeps optimisers and checkpoints layout-agnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    hidden: Activation,
    output: OutputActivation,
    params: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Matrix,
    pre: Vec<Matrix>,
    post: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.post.last().expect("at least one layer")
    }

    /// Pre-activation values of the final layer.
    pub fn logits(&self) -> &Matrix {
        self.pre.last().expect("at least one layer")
    }

    pub fn into_output(mut self) -> Matrix {
        self.post.pop().expect("at least one layer")
    }
}

/// Result of a backward pass.
#[derive(Debug, Clone)]
pub struct Backward {
    /// Gradient with respect to the flat parameter vector.
    pub params: Vec<f64>,
    /// Gradient with respect to the network input.
    pub input: Matrix,
}

fn param_count_for(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(
        sizes: &[usize],
        hidden: Activation,
        output: OutputActivation,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut net = Self::zeros(sizes, hidden, output)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = (2.0 * rng.uniform() - 1.0) * limit;
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], hidden: Activation, output: OutputActivation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::contract(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            hidden,
            output,
            params: vec![0.0; param_count_for(sizes)],
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// `(offset, fan_in, fan_out)` per layer.
    fn layout(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.n_layers());
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            out.push((offset, w[0], w[1]));
            offset += w[0] * w[1] + w[1];
        }
        out
    }

    /// Weight block of `layer` (row-major `in × out`).
    pub fn weights(&self, layer: usize) -> &[f64] {
        let (off, i, o) = self.layout()[layer];
        &self.params[off..off + i * o]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let (off, i, o) = self.layout()[layer];
        &self.params[off + i * o..off + i * o + o]
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward_cached(x)?.into_output())
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<ForwardCache> {
        if x.cols() != self.input_dim() {
            return Err(Error::contract(format!(
                "mlp input has {} columns, expected {}",
                x.cols(),
                self.input_dim()
            )));
        }
        let batch = x.rows();
        let layout = self.layout();
        let mut pre = Vec::with_capacity(layout.len());
        let mut post: Vec<Matrix> = Vec::with_capacity(layout.len());
        for (l, &(off, fan_in, fan_out)) in layout.iter().enumerate() {
            let h = if l == 0 { x } else { &post[l - 1] };
            let w = &self.params[off..off + fan_in * fan_out];
            let b = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            let mut z = Matrix::zeros(batch, fan_out);
            for r in 0..batch {
                z.row_mut(r).copy_from_slice(b);
            }
            gemm_nn(h.data(), w, z.data_mut(), batch, fan_in, fan_out);
            let last = l + 1 == layout.len();
            let a = if last {
                match self.output {
                    OutputActivation::Linear => z.clone(),
                    OutputActivation::Sigmoid => z.map(sigmoid),
                    OutputActivation::Softmax => {
                        let mut a = Matrix::zeros(batch, fan_out);
                        for r in 0..batch {
                            softmax_into(z.row(r), a.row_mut(r));
                        }
                        a
                    }
                }
            } else {
                match self.hidden {
                    Activation::Tanh => z.map(f64::tanh),
                    Activation::Relu => z.map(|v| v.max(0.0)),
                }
            };
            pre.push(z);
            post.push(a);
        }
        Ok(ForwardCache {
            input: x.clone(),
            pre,
            post,
        })
    }

    /// Backpropagate `upstream = ∂L/∂output` through the output activation.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<Backward> {
        let out = cache.output();
        if upstream.shape() != out.shape() {
            return Err(Error::contract(format!(
                "upstream gradient shape {:?} does not match output {:?}",
                upstream.shape(),
                out.shape()
            )));
        }
        let dz = match self.output {
            OutputActivation::Linear => upstream.clone(),
            OutputActivation::Sigmoid => {
                let mut dz = upstream.clone();
                for (g, &s) in dz.data_mut().iter_mut().zip(out.data()) {
                    *g *= s * (1.0 - s);
                }
                dz
            }
            OutputActivation::Softmax => {
                let mut dz = upstream.clone();
                for r in 0..dz.rows() {
                    let p = out.row(r);
                    let dot: f64 = upstream.row(r).iter().zip(p).map(|(g, p)| g * p).sum();
                    for (g, &pi) in dz.row_mut(r).iter_mut().zip(p) {
                        *g = pi * (*g - dot);
                    }
                }
                dz
            }
        };
        self.backward_logits(cache, &dz)
    }

    /// Backpropagate a gradient taken with respect to the final
    /// pre-activations (e.g. the fused softmax cross-entropy `p − onehot`).
    pub fn backward_logits(&self, cache: &ForwardCache, dlogits: &Matrix) -> Result<Backward> {
        if dlogits.shape() != cache.logits().shape() {
            return Err(Error::contract(format!(
                "logit gradient shape {:?} does not match {:?}",
                dlogits.shape(),
                cache.logits().shape()
            )));
        }
        let batch = dlogits.rows();
        let layout = self.layout();
        let mut grads = vec![0.0; self.params.len()];
        let mut dz = dlogits.clone();
        let mut input_grad = Matrix::zeros(batch, self.input_dim());
        for l in (0..layout.len()).rev() {
            let (off, fan_in, fan_out) = layout[l];
            let h = if l == 0 {
                &cache.input
            } else {
                &cache.post[l - 1]
            };
            gemm_tn(
                h.data(),
                dz.data(),
                &mut grads[off..off + fan_in * fan_out],
                batch,
                fan_in,
                fan_out,
            );
            let gb = &mut grads[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            for r in 0..batch {
                for (g, &d) in gb.iter_mut().zip(dz.row(r)) {
                    *g += d;
                }
            }
            let w = &self.params[off..off + fan_in * fan_out];
            let mut dh = Matrix::zeros(batch, fan_in);
            gemm_nt(dz.data(), w, dh.data_mut(), batch, fan_out, fan_in);
            if l == 0 {
                input_grad = dh;
            } else {
                let a = &cache.post[l - 1];
                let z = &cache.pre[l - 1];
                match self.hidden {
                    Activation::Tanh => {
                        for (g, &av) in dh.data_mut().iter_mut().zip(a.data()) {
                            *g *= 1.0 - av * av;
                        }
                    }
                    Activation::Relu => {
                        for (g, &zv) in dh.data_mut().iter_mut().zip(z.data()) {
                            if zv <= 0.0 {
                                *g = 0.0;
                            }
                        }
                    }
                }
                dz = dh;
            }
        }
        Ok(Backward {
            params: grads,
            input: input_grad,
        })
    }
}
