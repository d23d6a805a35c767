use nalgebra::{DMatrix, SymmetricEigen};

use super::{EncoderKind, EncoderModel};
use crate::numerics::Matrix;
use crate::{Error, Result};

/// Principal-component encoder onto the top `out_dim` eigenvectors of the
/// sample covariance. Each component is signed so that its largest-magnitude
/// loading is positive. Negative eigenvalues from round-off are clipped to 0.
pub fn fit_pca(x: &Matrix, out_dim: usize) -> Result<EncoderModel> {
    let (n, d) = x.shape();
    if out_dim == 0 || out_dim > n.min(d) {
        return Err(Error::contract(format!(
            "pca out_dim {out_dim} must be in 1..={}",
            n.min(d)
        )));
    }
    let mean = x.col_means();
    let mut centered = x.clone();
    for r in 0..n {
        for (v, m) in centered.row_mut(r).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let denom = (n.max(2) - 1) as f64;
    let cov = centered.t_matmul(&centered)?.map(|v| v / denom);
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, cov.data()));

    let mut order: Vec<usize> = (0..d).collect();
    // Descending eigenvalue; ties by index for a deterministic order.
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut components = Matrix::zeros(d, out_dim);
    let mut explained = Vec::with_capacity(out_dim);
    for (k, &col) in order.iter().take(out_dim).enumerate() {
        let v = eig.eigenvectors.column(col);
        let mut pivot = 0;
        for i in 0..d {
            if v[i].abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            components[(i, k)] = sign * v[i];
        }
        explained.push(eig.eigenvalues[col].max(0.0));
    }
    EncoderModel::new(
        EncoderKind::Pca {
            mean,
            components,
            explained_variance: explained,
        },
        None,
    )
}
