//! PCA and truncated SVD.

use std::time::Instant;

use nalgebra::DMatrix;

use super::{check_target_dim, EmbeddingResult, Hyperparameters};
use crate::error::{Error, Result};
use crate::grid::PointCloud;

/// Right singular vectors of `a` for the `k` largest singular values, as
/// columns, each flipped so that its largest-magnitude entry is positive.
pub(crate) fn top_right_singular_vectors(a: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let svd = a.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Argument("SVD did not produce right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .total_cmp(&svd.singular_values[i])
            .then(i.cmp(&j))
    });
    let mut v = DMatrix::zeros(a.ncols(), k);
    for (c, &r) in order.iter().take(k).enumerate() {
        let row = v_t.row(r);
        let lead = (0..row.len())
            .max_by(|&p, &q| row[p].abs().total_cmp(&row[q].abs()).then(q.cmp(&p)))
            .unwrap_or(0);
        let sign = if row[lead] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..a.ncols() {
            v[(j, c)] = sign * row[j];
        }
    }
    Ok(v)
}

fn project(x: &PointCloud, k: usize, center: bool, method: &str) -> Result<EmbeddingResult> {
    check_target_dim(x, k)?;
    let start = Instant::now();
    let mut a = x.to_matrix();
    if center {
        let mean = a.row_mean();
        for mut row in a.row_iter_mut() {
            row -= &mean;
        }
    }
    let v = top_right_singular_vectors(&a, k)?;
    let y = PointCloud::from_matrix(&(a * v))?;
    EmbeddingResult::builtin(y, method, Hyperparameters::new(), start.elapsed().as_secs_f64())
}

/// Coordinates of the mean-centered rows on the top-`k` principal directions.
pub fn pca_project(x: &PointCloud, k: usize) -> Result<EmbeddingResult> {
    project(x, k, true, "pca")
}

/// `U_k Σ_k` of the uncentered data, i.e. the rows projected on the top-`k`
/// right singular vectors.
pub fn truncated_svd_project(x: &PointCloud, k: usize) -> Result<EmbeddingResult> {
    project(x, k, false, "tsvd")
}
