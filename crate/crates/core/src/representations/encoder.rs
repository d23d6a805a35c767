use std::ops::Range;

use crate::numerics::{Matrix, Mlp};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum EncoderKind {
    Identity {
        dim: usize,
    },
    /// `z = (x − mean) · components`, components stored `d × k`.
    Pca {
        mean: Vec<f64>,
        components: Matrix,
        explained_variance: Vec<f64>,
    },
    /// Encoder net of the split VAE; its output is `[μ | log σ²]`.
    TdSplit {
        scaler: Option<Standardizer>,
        encoder: Mlp,
        latent_dim: usize,
        classified_dim: usize,
    },
    TdFt {
        scaler: Option<Standardizer>,
        encoder: Mlp,
    },
}

/// Per-feature affine rescaling `(x − mean) / scale` fitted on the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let mean = x.col_means();
        let mut var = vec![0.0; x.cols()];
        for r in x.row_iter() {
            for ((v, &xi), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (xi - m) * (xi - m);
            }
        }
        let n = x.rows().max(1) as f64;
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        out
    }
}

fn scaled<'a>(scaler: &Option<Standardizer>, x: &'a Matrix) -> std::borrow::Cow<'a, Matrix> {
    match scaler {
        Some(s) => std::borrow::Cow::Owned(s.apply(x)),
        None => std::borrow::Cow::Borrowed(x),
    }
}

impl EncoderKind {
    pub fn tag(&self) -> &'static str {
        match self {
            EncoderKind::Identity { .. } => "identity",
            EncoderKind::Pca { .. } => "pca",
            EncoderKind::TdSplit { .. } => "td_split",
            EncoderKind::TdFt { .. } => "td_ft",
        }
    }
}

/// A fitted, deterministic encoder `g: x ↦ z`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    pub kind: EncoderKind,
    output_dim: usize,
    head_inputs: Range<usize>,
}

impl EncoderModel {
    pub(crate) fn new(kind: EncoderKind, head_inputs: Option<Range<usize>>) -> Result<Self> {
        let output_dim = match &kind {
            EncoderKind::Identity { dim } => *dim,
            EncoderKind::Pca { components, .. } => components.cols(),
            EncoderKind::TdSplit { latent_dim, .. } => *latent_dim,
            EncoderKind::TdFt { encoder, .. } => encoder.output_dim(),
        };
        let head_inputs = head_inputs.unwrap_or(0..output_dim);
        if head_inputs.start >= head_inputs.end || head_inputs.end > output_dim {
            return Err(Error::contract(format!(
                "head input range {head_inputs:?} outside 0..{output_dim}"
            )));
        }
        Ok(Self {
            kind,
            output_dim,
            head_inputs,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(EncoderKind::Identity { dim }, None).expect("identity range is valid")
    }

    pub fn tag(&self) -> &'static str {
        self.kind.tag()
    }

    pub fn input_dim(&self) -> usize {
        match &self.kind {
            EncoderKind::Identity { dim } => *dim,
            EncoderKind::Pca { mean, .. } => mean.len(),
            EncoderKind::TdSplit { encoder, .. } | EncoderKind::TdFt { encoder, .. } => {
                encoder.input_dim()
            }
        }
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Representation coordinates fed to the prediction head.
    pub fn head_inputs(&self) -> Range<usize> {
        self.head_inputs.clone()
    }

    pub fn head_input_dim(&self) -> usize {
        self.head_inputs.len()
    }

    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::contract(format!(
                "encoder expects {} features, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        match &self.kind {
            EncoderKind::Identity { .. } => Ok(x.clone()),
            EncoderKind::Pca {
                mean, components, ..
            } => {
                let mut centered = x.clone();
                for r in 0..centered.rows() {
                    for (v, m) in centered.row_mut(r).iter_mut().zip(mean) {
                        *v -= m;
                    }
                }
                centered.matmul(components)
            }
            EncoderKind::TdSplit {
                scaler,
                encoder,
                latent_dim,
                ..
            } => Ok(encoder
                .forward(&scaled(scaler, x))?
                .select_cols(0, *latent_dim)),
            EncoderKind::TdFt { scaler, encoder } => encoder.forward(&scaled(scaler, x)),
        }
    }

    /// `encode` restricted to the head input coordinates.
    pub fn encode_head(&self, x: &Matrix) -> Result<Matrix> {
        let z = self.encode(x)?;
        if self.head_inputs == (0..self.output_dim) {
            Ok(z)
        } else {
            Ok(z.select_cols(self.head_inputs.start, self.head_inputs.end))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_encoder() {
        let e = EncoderModel::identity(3);
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(e.encode(&x).unwrap(), x);
        assert_eq!(e.head_inputs(), 0..3);
        assert!(e.encode(&Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn head_range_validated() {
        assert!(EncoderModel::new(EncoderKind::Identity { dim: 3 }, Some(0..4)).is_err());
        assert!(EncoderModel::new(EncoderKind::Identity { dim: 3 }, Some(1..1)).is_err());
        let e = EncoderModel::new(EncoderKind::Identity { dim: 3 }, Some(0..2)).unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(e.encode_head(&x).unwrap().data(), &[1.0, 2.0]);
    }
}
