//! Encoder checkpoints: a JSON manifest naming each tensor with its shape,
//! plus one little-endian `f64` blob holding the tensors back to back.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::encoder::Standardizer;
use super::{EncoderKind, EncoderModel};
use crate::numerics::{Activation, Matrix, Mlp, OutputActivation};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TENSOR_FILE: &str = "tensors.bin";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetSpec {
    sizes: Vec<usize>,
    hidden: Activation,
    output: OutputActivation,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    variant: String,
    output_dim: usize,
    head_inputs: [usize; 2],
    #[serde(default)]
    latent_dim: Option<usize>,
    #[serde(default)]
    classified_dim: Option<usize>,
    #[serde(default)]
    network: Option<NetSpec>,
    tensors: Vec<TensorEntry>,
}

struct Writer {
    entries: Vec<TensorEntry>,
    blob: Vec<u8>,
}

impl Writer {
    fn push(&mut self, name: &str, shape: Vec<usize>, data: &[f64]) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.entries.push(TensorEntry {
            name: name.to_string(),
            shape,
        });
        for v in data {
            self.blob.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn scaler(&mut self, s: &Option<Standardizer>) {
        if let Some(s) = s {
            self.push("scaler.mean", vec![s.mean.len()], &s.mean);
            self.push("scaler.scale", vec![s.scale.len()], &s.scale);
        }
    }

    fn mlp(&mut self, prefix: &str, net: &Mlp) {
        for l in 0..net.n_layers() {
            let (i, o) = (net.sizes()[l], net.sizes()[l + 1]);
            self.push(&format!("{prefix}.{l}.weight"), vec![i, o], net.weights(l));
            self.push(&format!("{prefix}.{l}.bias"), vec![o], net.bias(l));
        }
    }
}

pub fn save_checkpoint(model: &EncoderModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut w = Writer {
        entries: Vec::new(),
        blob: Vec::new(),
    };
    let mut latent = None;
    let mut classified = None;
    let mut network = None;
    match &model.kind {
        EncoderKind::Identity { .. } => {}
        EncoderKind::Pca {
            mean,
            components,
            explained_variance,
        } => {
            w.push("pca.mean", vec![mean.len()], mean);
            w.push(
                "pca.components",
                vec![components.rows(), components.cols()],
                components.data(),
            );
            w.push(
                "pca.explained_variance",
                vec![explained_variance.len()],
                explained_variance,
            );
        }
        EncoderKind::TdSplit {
            scaler,
            encoder,
            latent_dim,
            classified_dim,
        } => {
            w.scaler(scaler);
            w.mlp("encoder", encoder);
            latent = Some(*latent_dim);
            classified = Some(*classified_dim);
            network = Some(encoder);
        }
        EncoderKind::TdFt { scaler, encoder } => {
            w.scaler(scaler);
            w.mlp("encoder", encoder);
            network = Some(encoder);
        }
    }
    let hi = model.head_inputs();
    let manifest = Manifest {
        variant: model.tag().to_string(),
        output_dim: model.output_dim(),
        head_inputs: [hi.start, hi.end],
        latent_dim: latent,
        classified_dim: classified,
        network: network.map(|n| NetSpec {
            sizes: n.sizes().to_vec(),
            hidden: n.hidden_activation(),
            output: n.output_activation(),
        }),
        tensors: w.entries,
    };
    std::fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_vec_pretty(&manifest)?,
    )?;
    std::fs::write(dir.join(TENSOR_FILE), w.blob)?;
    Ok(())
}

type TakeTensor<'a> = dyn FnMut(&str) -> Result<(Vec<usize>, Vec<f64>)> + 'a;

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<EncoderModel> {
    let dir = dir.as_ref();
    let manifest: Manifest = serde_json::from_slice(&std::fs::read(dir.join(MANIFEST_FILE))?)?;
    let blob = std::fs::read(dir.join(TENSOR_FILE))?;
    let mut tensors = std::collections::HashMap::new();
    let mut at = 0usize;
    for t in &manifest.tensors {
        let n: usize = t.shape.iter().product();
        let bytes = blob.get(at..at + 8 * n).ok_or_else(|| Error::Truncated {
            path: dir.join(TENSOR_FILE),
            detail: format!("tensor {} needs {} bytes", t.name, 8 * n),
        })?;
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        tensors.insert(t.name.clone(), (t.shape.clone(), data));
        at += 8 * n;
    }
    let mut take = |name: &str| {
        tensors
            .remove(name)
            .ok_or_else(|| Error::config(format!("checkpoint missing tensor {name}")))
    };
    let scaler = |take: &mut TakeTensor<'_>| -> Result<Option<Standardizer>> {
        match (take("scaler.mean"), take("scaler.scale")) {
            (Ok((_, mean)), Ok((_, scale))) => Ok(Some(Standardizer { mean, scale })),
            _ => Ok(None),
        }
    };
    let mlp = |take: &mut TakeTensor<'_>, spec: &NetSpec| -> Result<Mlp> {
        let mut net = Mlp::zeros(&spec.sizes, spec.hidden, spec.output)?;
        let mut params = Vec::with_capacity(net.param_count());
        for l in 0..net.n_layers() {
            params.extend(take(&format!("encoder.{l}.weight"))?.1);
            params.extend(take(&format!("encoder.{l}.bias"))?.1);
        }
        net.set_params(&params)?;
        Ok(net)
    };
    let head = Some(manifest.head_inputs[0]..manifest.head_inputs[1]);
    let kind = match manifest.variant.as_str() {
        "identity" => EncoderKind::Identity {
            dim: manifest.output_dim,
        },
        "pca" => {
            let (_, mean) = take("pca.mean")?;
            let (shape, comp) = take("pca.components")?;
            let (_, explained_variance) = take("pca.explained_variance")?;
            EncoderKind::Pca {
                mean,
                components: Matrix::from_vec(shape[0], shape[1], comp)?,
                explained_variance,
            }
        }
        "td_split" | "td_ft" => {
            let spec = manifest
                .network
                .as_ref()
                .ok_or_else(|| Error::config("checkpoint missing network spec"))?;
            let scaler = scaler(&mut take)?;
            let encoder = mlp(&mut take, spec)?;
            if manifest.variant == "td_ft" {
                EncoderKind::TdFt { scaler, encoder }
            } else {
                EncoderKind::TdSplit {
                    scaler,
                    encoder,
                    latent_dim: manifest.latent_dim.unwrap_or(manifest.output_dim),
                    classified_dim: manifest.classified_dim.unwrap_or(manifest.output_dim),
                }
            }
        }
        other => return Err(Error::config(format!("unknown encoder variant {other:?}"))),
    };
    EncoderModel::new(kind, head)
}
