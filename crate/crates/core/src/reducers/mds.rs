//! Metric multidimensional scaling by stress majorization (SMACOF).

use std::time::Instant;

use super::linear::top_right_singular_vectors;
use super::{check_target_dim, EmbeddingResult, HyperValue, Hyperparameters};
use crate::error::{Error, Result};
use crate::grid::PointCloud;

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct SmacofOutcome {
    pub y: PointCloud,
    /// Raw stress Σ_{i<j} (d_ij − δ_ij)² of the initial configuration and of
    /// every accepted iterate.
    pub stress_history: Vec<f64>,
    /// sqrt(stress / Σ δ_ij²) of the returned configuration.
    pub normalized_stress: f64,
}

/// Pairwise distances, upper triangle in row order.
fn upper_distances(x: &PointCloud) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        let a = x.row(i);
        for j in i + 1..n {
            let b = x.row(j);
            out.push(a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt());
        }
    }
    out
}

/// One pass over all pairs: the stress of `z` and its Guttman transform
/// (unit weights), `z⁺ᵢ = (1/N) Σ_{j≠i} (δᵢⱼ / dᵢⱼ)(zᵢ − zⱼ)`.
fn stress_and_update(delta: &[f64], z: &[f64], k: usize, next: &mut [f64]) -> f64 {
    let n = z.len() / k;
    next.iter_mut().for_each(|v| *v = 0.0);
    let mut stress = 0.0;
    let mut p = 0;
    for i in 0..n {
        let zi = &z[i * k..(i + 1) * k];
        for j in i + 1..n {
            let zj = &z[j * k..(j + 1) * k];
            let d = zi.iter().zip(zj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let e = d - delta[p];
            stress += e * e;
            if d > 0.0 {
                let r = delta[p] / d;
                for c in 0..k {
                    let diff = r * (zi[c] - zj[c]);
                    next[i * k + c] += diff;
                    next[j * k + c] -= diff;
                }
            }
            p += 1;
        }
    }
    let inv = 1.0 / n as f64;
    next.iter_mut().for_each(|v| *v *= inv);
    stress
}

/// Runs SMACOF from `init` against the distances of `x`. Stops when the
/// relative stress decrease falls below `tol`, the stress vanishes, or after
/// `max_iter` updates.
pub fn smacof(x: &PointCloud, init: &PointCloud, max_iter: usize, tol: f64) -> Result<SmacofOutcome> {
    if max_iter < 1 {
        return Err(Error::Argument("max_iter must be at least 1".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::Argument(format!("tol must be non-negative, got {tol}")));
    }
    if init.len() != x.len() {
        return Err(Error::Argument(format!(
            "initial configuration has {} rows, data has {}",
            init.len(),
            x.len()
        )));
    }
    let delta = upper_distances(x);
    if let Some(p) = delta.iter().position(|d| !d.is_finite()) {
        return Err(Error::Argument(format!("non-finite pairwise distance (pair {p})")));
    }
    let total: f64 = delta.iter().map(|d| d * d).sum();
    let k = init.dim();
    let mut z = init.as_slice().to_vec();
    let mut next = vec![0.0; z.len()];
    let mut history = Vec::new();
    let mut iter = 0;
    loop {
        let s = stress_and_update(&delta, &z, k, &mut next);
        let stop = match history.last() {
            Some(&prev) => prev - s < tol * prev,
            None => false,
        } || s <= 1e-30 * total
            || iter == max_iter;
        history.push(s);
        if stop {
            break;
        }
        std::mem::swap(&mut z, &mut next);
        iter += 1;
    }
    let last = *history.last().expect("at least one stress evaluation");
    let normalized_stress = if total > 0.0 { (last / total).sqrt() } else { 0.0 };
    Ok(SmacofOutcome {
        y: PointCloud::new(k, z)?,
        stress_history: history,
        normalized_stress,
    })
}

/// Classical MDS of the Euclidean distances of `x`.
///
/// The double-centered squared-distance matrix equals `X_c X_cᵀ` for
/// centered coordinates `X_c`, so its top eigenpairs come from the thin SVD
/// of `X_c` without forming the N×N matrix.
pub fn classical_mds(x: &PointCloud, k: usize) -> Result<PointCloud> {
    check_target_dim(x, k)?;
    let mut a = x.to_matrix();
    let mean = a.row_mean();
    for mut row in a.row_iter_mut() {
        row -= &mean;
    }
    let v = top_right_singular_vectors(&a, k)?;
    PointCloud::from_matrix(&(a * v))
}

/// Metric MDS: SMACOF initialized from classical MDS.
pub fn mds_project(x: &PointCloud, k: usize, max_iter: usize, tol: f64) -> Result<EmbeddingResult> {
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("input contains non-finite values".into()));
    }
    let start = Instant::now();
    let init = classical_mds(x, k)?;
    let out = smacof(x, &init, max_iter, tol)?;
    let mut hp = Hyperparameters::new();
    hp.insert("max_iter".into(), HyperValue::Number(max_iter as f64));
    hp.insert("tol".into(), HyperValue::Number(tol));
    EmbeddingResult::builtin(out.y, "mds", hp, start.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stress_of_exact_configuration_is_zero() {
        let x = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]).unwrap();
        let out = smacof(&x, &x, 5, 1e-9).unwrap();
        assert_eq!(out.stress_history.len(), 1);
        assert!(out.normalized_stress < 1e-15);
    }

    #[test]
    fn improves_a_bad_start() {
        let x = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 2.0]]).unwrap();
        let init = PointCloud::from_rows(&[[0.0, 0.0], [0.1, 0.3], [0.2, 0.1], [0.9, 0.4], [0.3, 0.3]]).unwrap();
        let out = smacof(&x, &init, 500, 0.0).unwrap();
        let h = &out.stress_history;
        assert!(h.last().unwrap() < &(1e-3 * h[0]));
        for w in h.windows(2) {
            assert!(w[1] <= w[0], "stress increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn argument_errors() {
        // Finite coordinates whose distance overflows.
        let x = PointCloud::from_rows(&[[0.0, 0.0], [1e300, -1e300]]).unwrap();
        assert!(matches!(mds_project(&x, 1, 10, 1e-6), Err(Error::Argument(_))));
        let ok = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        assert!(matches!(mds_project(&ok, 1, 0, 1e-6), Err(Error::Argument(_))));
    }
}
