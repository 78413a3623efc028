//! Tensor-product cubic splines with not-a-knot end conditions.
//!
//! Each axis is fitted independently (the 1-D fit is linear in the data), so
//! an n-D spline is obtained by applying the 1-D fit along every axis in
//! turn. Coefficients are stored per cell in the local power basis
//! `Σₚ cₚ (x − xᵢ)ᵖ`, `p = 0..=3`.

use crate::error::{Error, Result};
use crate::grid::{PointCloud, TensorGrid};

pub const MAX_DERIVATIVE_ORDER: usize = 3;
const MIN_NODES: usize = 4;

/// Solves a tridiagonal system in place (Thomas algorithm).
/// `sub[0]` and `sup[n-1]` are ignored.
fn solve_tridiagonal(sub: &[f64], diag: &mut [f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    for i in 1..n {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
    }
}

/// Per-cell power-basis coefficients of the not-a-knot cubic interpolant,
/// `4 · (len − 1)` values. Requires at least four nodes.
fn cubic_coefficients(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    debug_assert!(n >= MIN_NODES && y.len() == n);
    let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let slope: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / dx[i]).collect();

    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 1..n - 1 {
        sub[i] = dx[i];
        diag[i] = 2.0 * (dx[i - 1] + dx[i]);
        sup[i] = dx[i - 1];
        rhs[i] = 3.0 * (dx[i] * slope[i - 1] + dx[i - 1] * slope[i]);
    }
    // Third derivative continuous across the second and penultimate nodes.
    let d0 = x[2] - x[0];
    diag[0] = dx[1];
    sup[0] = d0;
    rhs[0] = ((dx[0] + 2.0 * d0) * dx[1] * slope[0] + dx[0] * dx[0] * slope[1]) / d0;
    let d1 = x[n - 1] - x[n - 3];
    sub[n - 1] = d1;
    diag[n - 1] = dx[n - 3];
    rhs[n - 1] = (dx[n - 2] * dx[n - 2] * slope[n - 3] + (2.0 * d1 + dx[n - 2]) * dx[n - 3] * slope[n - 2]) / d1;
    solve_tridiagonal(&sub, &mut diag, &sup, &mut rhs);
    let s = rhs;

    let mut out = Vec::with_capacity(4 * (n - 1));
    for i in 0..n - 1 {
        let h = dx[i];
        out.push(y[i]);
        out.push(s[i]);
        out.push((3.0 * slope[i] - 2.0 * s[i] - s[i + 1]) / h);
        out.push((s[i] + s[i + 1] - 2.0 * slope[i]) / (h * h));
    }
    out
}

/// Applies the 1-D fit along `axis` of a row-major array with `shape`.
fn fit_along_axis(data: &[f64], shape: &[usize], axis: usize, nodes: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let len = shape[axis];
    let new_len = 4 * (len - 1);
    let mut out = vec![0.0; outer * new_len * inner];
    let mut fiber = vec![0.0; len];
    for o in 0..outer {
        for q in 0..inner {
            for (i, f) in fiber.iter_mut().enumerate() {
                *f = data[(o * len + i) * inner + q];
            }
            for (i, c) in cubic_coefficients(nodes, &fiber).into_iter().enumerate() {
                out[(o * new_len + i) * inner + q] = c;
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = new_len;
    (out, new_shape)
}

/// A vector-valued tensor-product cubic spline over a [`TensorGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SplineField {
    grid: TensorGrid,
    /// Row-major strides of the coefficient array.
    strides: Vec<usize>,
    coefficients: Vec<Vec<f64>>,
}

/// Fits one spline per column of `samples`; row `k` must be the value at
/// grid point `k`.
pub fn fit_spline(grid: &TensorGrid, samples: &PointCloud) -> Result<SplineField> {
    if samples.len() != grid.len() {
        return Err(Error::Argument(format!(
            "{} sample rows for a grid of {} points",
            samples.len(),
            grid.len()
        )));
    }
    if let Some(a) = grid.axes().iter().position(|ax| ax.len() < MIN_NODES) {
        return Err(Error::Argument(format!(
            "axis {a} has {} nodes; cubic splines need at least {MIN_NODES}",
            grid.axis(a).len()
        )));
    }
    let shape = grid.shape();
    let coefficients = (0..samples.dim())
        .map(|c| {
            let mut data = samples.column(c);
            let mut sh = shape.clone();
            for (a, nodes) in grid.axes().iter().enumerate() {
                let (d, s) = fit_along_axis(&data, &sh, a, nodes);
                data = d;
                sh = s;
            }
            data
        })
        .collect();
    let coef_shape: Vec<usize> = shape.iter().map(|&n| 4 * (n - 1)).collect();
    let mut strides = vec![1; coef_shape.len()];
    for a in (0..coef_shape.len().saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * coef_shape[a + 1];
    }
    Ok(SplineField {
        grid: grid.clone(),
        strides,
        coefficients,
    })
}

fn falling_factorial(p: usize, d: usize) -> f64 {
    (p - d + 1..=p).product::<usize>() as f64
}

impl SplineField {
    pub fn grid(&self) -> &TensorGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.coefficients.len()
    }

    /// Cell index and local offset along `axis`. Points on an interior node
    /// belong to the cell on their right.
    fn locate(&self, axis: usize, x: f64) -> Result<(usize, f64)> {
        let nodes = self.grid.axis(axis);
        let (lo, hi) = (nodes[0], nodes[nodes.len() - 1]);
        let slack = 1e-9 * (hi - lo);
        if !(x >= lo - slack && x <= hi + slack) {
            return Err(Error::Domain(format!(
                "coordinate {x} outside spline axis {axis} range [{lo}, {hi}]"
            )));
        }
        let cell = nodes[1..nodes.len() - 1].partition_point(|&v| v <= x);
        Ok((cell, x - nodes[cell]))
    }

    /// Partial derivative of every component at `x`; `orders[a]` is the
    /// derivative order along axis `a` (each at most 3).
    pub fn derivative(&self, x: &[f64], orders: &[usize]) -> Result<Vec<f64>> {
        let n = self.grid.ndim();
        if x.len() != n || orders.len() != n {
            return Err(Error::Argument(format!(
                "query needs {n} coordinates and {n} derivative orders"
            )));
        }
        if let Some(o) = orders.iter().find(|&&o| o > MAX_DERIVATIVE_ORDER) {
            return Err(Error::Argument(format!(
                "derivative order {o} exceeds {MAX_DERIVATIVE_ORDER}"
            )));
        }
        // Per axis: coefficient offset of the cell and basis weights.
        let mut bases = Vec::with_capacity(n);
        for a in 0..n {
            let (cell, t) = self.locate(a, x[a])?;
            let d = orders[a];
            let mut w = [0.0; 4];
            for (p, wp) in w.iter_mut().enumerate().skip(d) {
                *wp = falling_factorial(p, d) * t.powi((p - d) as i32);
            }
            bases.push((4 * cell * self.strides[a], w));
        }
        let mut out = vec![0.0; self.components()];
        let mut digits = vec![0usize; n];
        loop {
            let mut weight = 1.0;
            let mut offset = 0;
            for a in 0..n {
                weight *= bases[a].1[digits[a]];
                offset += bases[a].0 + digits[a] * self.strides[a];
            }
            if weight != 0.0 {
                for (o, coef) in out.iter_mut().zip(&self.coefficients) {
                    *o += weight * coef[offset];
                }
            }
            let mut a = n;
            loop {
                if a == 0 {
                    return Ok(out);
                }
                a -= 1;
                digits[a] += 1;
                if digits[a] < 4 {
                    break;
                }
                digits[a] = 0;
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.derivative(x, &vec![0; self.grid.ndim()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(grid: &TensorGrid, f: impl Fn(&[f64]) -> Vec<f64>) -> PointCloud {
        let rows: Vec<Vec<f64>> = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        PointCloud::from_rows(&rows).unwrap()
    }

    #[test]
    fn constant_data() {
        let grid = TensorGrid::unit(2, 6).unwrap();
        let s = fit_spline(&grid, &sample(&grid, |_| vec![2.5])).unwrap();
        let x = [0.37, 0.81];
        assert!((s.value(&x).unwrap()[0] - 2.5).abs() < 1e-14);
        for orders in [[1, 0], [0, 1], [1, 1], [2, 0], [3, 0], [0, 3], [2, 1]] {
            assert!(s.derivative(&x, &orders).unwrap()[0].abs() < 1e-12, "{orders:?}");
        }
    }

    #[test]
    fn reproduces_cubics_with_derivatives() {
        // degree ≤ 3 in each variable
        let f = |x: &[f64]| x[0].powi(3) - 2.0 * x[0] * x[0] * x[1] + x[1].powi(3) * x[0] + 0.5 * x[1];
        let fx = |x: &[f64]| 3.0 * x[0] * x[0] - 4.0 * x[0] * x[1] + x[1].powi(3);
        let fxy = |x: &[f64]| -4.0 * x[0] + 3.0 * x[1] * x[1];
        let fxxx = |_: &[f64]| 6.0;
        let fyyy = |x: &[f64]| 6.0 * x[0];
        let fxyy = |x: &[f64]| 6.0 * x[1];
        let axes = vec![vec![0.0, 0.1, 0.35, 0.5, 0.8, 1.0], vec![-1.0, -0.5, 0.0, 0.5, 1.0]];
        let grid = TensorGrid::new(axes).unwrap();
        let s = fit_spline(&grid, &sample(&grid, |x| vec![f(x), -f(x)])).unwrap();
        for x in [[0.05, -0.75], [0.6, 0.25], [0.9, 0.7], [0.42, -0.1]] {
            let check = |orders: [usize; 2], want: f64| {
                let got = s.derivative(&x, &orders).unwrap();
                assert!(
                    (got[0] - want).abs() < 1e-8,
                    "{orders:?} at {x:?}: {} vs {want}",
                    got[0]
                );
                assert!((got[1] + want).abs() < 1e-8);
            };
            check([0, 0], f(&x));
            check([1, 0], fx(&x));
            check([1, 1], fxy(&x));
            check([3, 0], fxxx(&x));
            check([0, 3], fyyy(&x));
            check([1, 2], fxyy(&x));
        }
    }

    #[test]
    fn interpolates_nodes() {
        let grid = TensorGrid::unit(2, 7).unwrap();
        let s = fit_spline(&grid, &sample(&grid, |x| vec![(3.0 * x[0]).sin() * (x[1] * 5.0).exp()])).unwrap();
        for idx in 0..grid.len() {
            let x = grid.point(idx);
            let want = (3.0 * x[0]).sin() * (x[1] * 5.0).exp();
            let got = s.value(&x).unwrap()[0];
            assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn three_dimensional_cubic() {
        let grid = TensorGrid::unit(3, 5).unwrap();
        let f = |x: &[f64]| x[0] * x[1] * x[2] + x[2].powi(3) - x[0] * x[1] * x[1];
        let s = fit_spline(&grid, &sample(&grid, |x| vec![f(x)])).unwrap();
        let x = [0.3, 0.55, 0.9];
        assert!((s.value(&x).unwrap()[0] - f(&x)).abs() < 1e-10);
        assert!((s.derivative(&x, &[1, 1, 1]).unwrap()[0] - 1.0).abs() < 1e-10);
        assert!((s.derivative(&x, &[0, 0, 3]).unwrap()[0] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn argument_errors() {
        let grid = TensorGrid::unit(2, 5).unwrap();
        let short = PointCloud::new(1, vec![0.0; 24]).unwrap();
        assert!(fit_spline(&grid, &short).is_err());
        let small = TensorGrid::uniform(&[(0.0, 1.0), (0.0, 1.0)], 3).unwrap();
        assert!(fit_spline(&small, &PointCloud::new(1, vec![0.0; 9]).unwrap()).is_err());
        let s = fit_spline(&grid, &PointCloud::new(1, vec![1.0; 25]).unwrap()).unwrap();
        assert!(s.derivative(&[0.5, 0.5], &[4, 0]).is_err());
        assert!(s.value(&[1.5, 0.5]).is_err());
    }
}
