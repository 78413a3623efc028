//! Neighborhood preservation ratio.

use crate::error::{Error, Result};
use crate::grid::PointCloud;
use crate::knn::KdTree;

pub const DEFAULT_KN: usize = 10;

/// Distances within this relative gap count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// The `kn` nearest neighbors of row `p`, treating distances equal up to
/// [`TIE_TOLERANCE`] as ties and resolving them by row index. Rounding
/// would otherwise decide between the equidistant points of a lattice.
pub fn tolerant_neighbors(tree: &KdTree, p: usize, kn: usize) -> Vec<usize> {
    let cloud = tree.points();
    let others = cloud.len() - 1;
    let q = cloud.row(p);
    let mut fetch = (2 * kn).min(others);
    loop {
        let found = tree.nearest(q, fetch, Some(p));
        let d: Vec<f64> = found.iter().map(|&i| distance(q, cloud.row(i))).collect();
        let cut = d[kn - 1];
        let tol = TIE_TOLERANCE * cut.max(f64::MIN_POSITIVE);
        if fetch < others && d[fetch - 1] <= cut + tol {
            fetch = (2 * fetch).min(others);
            continue;
        }
        let mut sure: Vec<usize> = Vec::with_capacity(kn);
        let mut tied: Vec<usize> = Vec::new();
        for (&i, &di) in found.iter().zip(&d) {
            if di < cut - tol {
                sure.push(i);
            } else if di <= cut + tol {
                tied.push(i);
            }
        }
        tied.sort_unstable();
        let need = kn - sure.len();
        sure.extend(tied.into_iter().take(need));
        return sure;
    }
}

/// Mean over points of `|kNN_high(p) ∩ kNN_low(p)| / kn`. Neighbors are
/// Euclidean, exclude the point itself, and break ties by row index (see
/// [`tolerant_neighbors`]).
pub fn npr(x_high: &PointCloud, y_low: &PointCloud, kn: usize) -> Result<f64> {
    let n = x_high.len();
    if y_low.len() != n {
        return Err(Error::Argument(format!(
            "row counts differ: {n} high-dimensional, {} low-dimensional",
            y_low.len()
        )));
    }
    if kn < 1 || kn + 1 > n {
        return Err(Error::Argument(format!(
            "kn = {kn} must lie in 1..={}",
            n.saturating_sub(1)
        )));
    }
    let high = KdTree::new(x_high);
    let low = KdTree::new(y_low);
    let mut hits = 0usize;
    let mut mark = vec![usize::MAX; n];
    for p in 0..n {
        for q in tolerant_neighbors(&high, p, kn) {
            mark[q] = p;
        }
        hits += tolerant_neighbors(&low, p, kn)
            .into_iter()
            .filter(|&q| mark[q] == p)
            .count();
    }
    Ok(hits as f64 / (n * kn) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_one_and_bounds_checked() {
        let x = PointCloud::from_rows(&[[0.0], [1.0], [3.0], [7.0]]).unwrap();
        assert_eq!(npr(&x, &x, 2).unwrap(), 1.0);
        assert!(matches!(npr(&x, &x, 0), Err(Error::Argument(_))));
        assert!(matches!(npr(&x, &x, 4), Err(Error::Argument(_))));
    }

    #[test]
    fn near_ties_resolve_by_index() {
        // Rows 1..=4 are equidistant from row 0 up to rounding.
        let e = 1e-13;
        let x = PointCloud::from_rows(&[
            [0.0, 0.0],
            [1.0 + e, 0.0],
            [0.0, 1.0],
            [-1.0, 0.0],
            [0.0, -1.0 - e],
            [5.0, 5.0],
        ])
        .unwrap();
        let tree = KdTree::new(&x);
        assert_eq!(tolerant_neighbors(&tree, 0, 2), vec![1, 2]);
        assert_eq!(tolerant_neighbors(&tree, 0, 5), vec![2, 3, 1, 4, 5]);
    }

    #[test]
    fn reversed_line_keeps_neighbors() {
        let x = PointCloud::from_rows(&[[0.0], [1.0], [3.0], [7.0]]).unwrap();
        let y = PointCloud::from_rows(&[[0.0], [-1.0], [-3.0], [-7.0]]).unwrap();
        assert_eq!(npr(&x, &y, 1).unwrap(), 1.0);
    }
}
