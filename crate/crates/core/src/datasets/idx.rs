//! IDX (MNIST-style) binary files: big-endian `u32` header, then raw bytes.

use std::path::Path;

use super::Dataset;
use crate::numerics::Matrix;
use crate::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Truncated {
            path: path.to_path_buf(),
            detail: format!("header ends before byte {}", at + 4),
        })
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let found = read_u32(bytes, 0, path)?;
    if found != expected {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found,
            expected,
        });
    }
    Ok(())
}

fn payload<'a>(bytes: &'a [u8], header: usize, len: usize, path: &Path) -> Result<&'a [u8]> {
    bytes
        .get(header..header + len)
        .ok_or_else(|| Error::Truncated {
            path: path.to_path_buf(),
            detail: format!(
                "expected {len} data bytes, found {}",
                bytes.len().saturating_sub(header)
            ),
        })
}

/// Load an IDX image/label pair. Pixels are scaled to `[0, 1]`.
pub fn load_idx(image_path: impl AsRef<Path>, label_path: impl AsRef<Path>) -> Result<Dataset> {
    let image_path = image_path.as_ref();
    let label_path = label_path.as_ref();
    let images = std::fs::read(image_path)?;
    let labels = std::fs::read(label_path)?;

    check_magic(&images, IDX_IMAGES_MAGIC, image_path)?;
    let n_images = read_u32(&images, 4, image_path)? as usize;
    let rows = read_u32(&images, 8, image_path)? as usize;
    let cols = read_u32(&images, 12, image_path)? as usize;

    check_magic(&labels, IDX_LABELS_MAGIC, label_path)?;
    let n_labels = read_u32(&labels, 4, label_path)? as usize;

    if n_images != n_labels {
        return Err(Error::CountMismatch {
            images: n_images,
            labels: n_labels,
        });
    }
    if n_images == 0 {
        return Err(Error::EmptyDataset);
    }
    let dim = rows * cols;
    let pixels = payload(&images, 16, n_images * dim, image_path)?;
    let label_bytes = payload(&labels, 8, n_labels, label_path)?;

    let data = pixels.iter().map(|&b| f64::from(b) / 255.0).collect();
    let features = Matrix::from_vec(n_images, dim, data)?;
    Dataset::new(
        features,
        label_bytes.iter().map(|&b| usize::from(b)).collect(),
    )
}

/// Write an IDX image file (`count × rows × cols` bytes).
pub fn write_idx_images(
    path: impl AsRef<Path>,
    rows: u32,
    cols: u32,
    images: &[Vec<u8>],
) -> Result<()> {
    let mut out = Vec::with_capacity(16 + images.len() * (rows * cols) as usize);
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&rows.to_be_bytes());
    out.extend_from_slice(&cols.to_be_bytes());
    for img in images {
        if img.len() != (rows * cols) as usize {
            return Err(Error::contract(
                "image byte count does not match rows × cols",
            ));
        }
        out.extend_from_slice(img);
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    std::fs::write(path, out)?;
    Ok(())
}
