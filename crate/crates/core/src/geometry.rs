//! Coordinate Riemannian geometry on open subsets of ℝⁿ.
//!
//! Index conventions (0-based):
//!
//! * metric jet: `dg[(i, j, k)] = ∂ₖ g_ij`, `d2g[(i, j, k, l)] = ∂ₖ∂ₗ g_ij`
//! * Christoffel symbols: `gamma[(k, i, j)] = Γᵏ_ij`
//! * their derivatives: `dgamma[(l, j, k, i)] = ∂ᵢ Γˡ_jk`
//! * Riemann tensor: `riemann[(l, i, j, k)] = Rˡ_ijk` with
//!   `R(eᵢ, eⱼ)eₖ = Σₗ Rˡ_ijk eₗ` and `R(X,Y)Z = ∇_Y∇_X Z − ∇_X∇_Y Z − ∇_[X,Y] Z`.
//!
//! Under that sign convention the sectional curvature of the coordinate
//! plane `(eᵢ, eⱼ)` has numerator `g(R(eᵢ, eⱼ)eᵢ, eⱼ)`, which is +1 on the
//! unit sphere.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TensorGrid;

/// Smallest admissible metric eigenvalue before regularization kicks in.
pub const MIN_EIGENVALUE: f64 = 1e-10;
/// Relative size of the ridge added to a near-singular metric.
pub const RIDGE_SCALE: f64 = 1e-8;
/// Smallest admissible plane denominator.
pub const MIN_PLANE_DENOMINATOR: f64 = 1e-12;
pub const DEFAULT_TRIM: usize = 2;

/// Dense cube `n × n × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    t[(a, b, c)] = f(a, b, c);
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl std::ops::Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, (a, b, c): (usize, usize, usize)) -> &f64 {
        &self.data[(a * self.n + b) * self.n + c]
    }
}

impl std::ops::IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (a, b, c): (usize, usize, usize)) -> &mut f64 {
        &mut self.data[(a * self.n + b) * self.n + c]
    }
}

/// Dense `n × n × n × n` array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Tensor4 {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        t[(a, b, c, d)] = f(a, b, c, d);
                    }
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl std::ops::Index<(usize, usize, usize, usize)> for Tensor4 {
    type Output = f64;
    fn index(&self, (a, b, c, d): (usize, usize, usize, usize)) -> &f64 {
        &self.data[((a * self.n + b) * self.n + c) * self.n + d]
    }
}

impl std::ops::IndexMut<(usize, usize, usize, usize)> for Tensor4 {
    fn index_mut(&mut self, (a, b, c, d): (usize, usize, usize, usize)) -> &mut f64 {
        &mut self.data[((a * self.n + b) * self.n + c) * self.n + d]
    }
}

/// Denominator used for coordinate-plane sectional curvature.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectionalMode {
    /// `g_ii g_jj − g_ij²`, the usual Riemannian definition.
    #[default]
    Standard,
    /// `sqrt(g_ii g_jj − g_ij²)`.
    PaperSqrt,
}

impl std::str::FromStr for SectionalMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(SectionalMode::Standard),
            "paper-sqrt" | "paper_sqrt" => Ok(SectionalMode::PaperSqrt),
            _ => Err(Error::Argument(format!(
                "unknown sectional mode {s:?} (expected standard or paper-sqrt)"
            ))),
        }
    }
}

/// Coordinate pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn plane_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// `JᵀJ`: the pullback of the Euclidean metric through a map with Jacobian
/// `J` (column `i` is `∂f/∂xᵢ`).
pub fn pullback_from_jacobian(jacobian: &DMatrix<f64>) -> DMatrix<f64> {
    jacobian.tr_mul(jacobian)
}

/// Metric value with its first and second derivatives at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricJet {
    pub g: DMatrix<f64>,
    pub dg: Tensor3,
    pub d2g: Tensor4,
}

impl MetricJet {
    /// Jet of `JᵀJ` from derivatives of a map `f: ℝⁿ → ℝᶜ` by the product rule.
    ///
    /// `first[(a, i)] = ∂ᵢfₐ`, `second[a][(i, j)] = ∂ᵢ∂ⱼfₐ`,
    /// `third[a][(i, j, k)] = ∂ᵢ∂ⱼ∂ₖfₐ`.
    pub fn from_map_derivatives(first: &DMatrix<f64>, second: &[DMatrix<f64>], third: &[Tensor3]) -> Self {
        let n = first.ncols();
        let c = first.nrows();
        let g = pullback_from_jacobian(first);
        let dg = Tensor3::from_fn(n, |i, j, k| {
            (0..c)
                .map(|a| second[a][(i, k)] * first[(a, j)] + first[(a, i)] * second[a][(j, k)])
                .sum()
        });
        let d2g = Tensor4::from_fn(n, |i, j, k, l| {
            (0..c)
                .map(|a| {
                    third[a][(i, k, l)] * first[(a, j)]
                        + second[a][(i, k)] * second[a][(j, l)]
                        + second[a][(i, l)] * second[a][(j, k)]
                        + first[(a, i)] * third[a][(j, k, l)]
                })
                .sum()
        });
        MetricJet { g, dg, d2g }
    }

    pub fn constant(g: DMatrix<f64>) -> Self {
        let n = g.nrows();
        MetricJet {
            g,
            dg: Tensor3::zeros(n),
            d2g: Tensor4::zeros(n),
        }
    }
}

/// Ridge λ to add before inversion: zero for a healthy metric,
/// `RIDGE_SCALE · trace(g)/n` when the smallest eigenvalue is below
/// `MIN_EIGENVALUE`.
pub fn regularization(g: &DMatrix<f64>) -> Result<f64> {
    let n = g.nrows();
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateMetric {
            node: 0,
            detail: "metric has non-finite entries".into(),
        });
    }
    let min_eig = g.clone().symmetric_eigenvalues().min();
    if min_eig >= MIN_EIGENVALUE {
        return Ok(0.0);
    }
    let trace = g.trace();
    if trace <= 0.0 {
        return Err(Error::DegenerateMetric {
            node: 0,
            detail: format!("metric has non-positive trace {trace:e}"),
        });
    }
    Ok(RIDGE_SCALE * trace / n as f64)
}

fn regularized_inverse(g: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let n = g.nrows();
    let reg = g + DMatrix::identity(n, n) * lambda;
    let min_eig = reg.clone().symmetric_eigenvalues().min();
    if !(min_eig >= MIN_EIGENVALUE) {
        return Err(Error::DegenerateMetric {
            node: 0,
            detail: format!("smallest eigenvalue {min_eig:e} after ridge {lambda:e}"),
        });
    }
    reg.try_inverse().ok_or_else(|| Error::DegenerateMetric {
        node: 0,
        detail: "metric is singular".into(),
    })
}

/// `C_mij = ∂ⱼ g_mi + ∂ᵢ g_mj − ∂ₘ g_ij`.
fn christoffel_first_kind(dg: &Tensor3) -> Tensor3 {
    Tensor3::from_fn(dg.dim(), |m, i, j| dg[(m, i, j)] + dg[(m, j, i)] - dg[(i, j, m)])
}

fn christoffel_with_inverse(g_inv: &DMatrix<f64>, dg: &Tensor3) -> Tensor3 {
    let n = dg.dim();
    let first = christoffel_first_kind(dg);
    let mut gamma = Tensor3::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * (0..n).map(|m| g_inv[(m, k)] * first[(m, i, j)]).sum::<f64>();
                gamma[(k, i, j)] = v;
                gamma[(k, j, i)] = v;
            }
        }
    }
    gamma
}

/// Christoffel symbols Γᵏ_ij = ½ Σₘ gᵐᵏ (∂ⱼ g_mi + ∂ᵢ g_mj − ∂ₘ g_ij), with
/// the inverse taken of `g + λ·Id`.
pub fn christoffel_at(g: &DMatrix<f64>, dg: &Tensor3, lambda: f64) -> Result<Tensor3> {
    let g_inv = regularized_inverse(g, lambda)?;
    Ok(christoffel_with_inverse(&g_inv, dg))
}

/// `∂ᵢ Γˡ_jk`, using `∂ᵢ g⁻¹ = −g⁻¹ (∂ᵢ g) g⁻¹`.
fn christoffel_derivative(g_inv: &DMatrix<f64>, dg: &Tensor3, d2g: &Tensor4) -> Tensor4 {
    let n = dg.dim();
    let first = christoffel_first_kind(dg);
    // ∂ᵢ C_mjk
    let dfirst = Tensor4::from_fn(n, |m, j, k, i| {
        d2g[(m, j, k, i)] + d2g[(m, k, j, i)] - d2g[(j, k, m, i)]
    });
    // ∂ᵢ gᵐˡ
    let dinv: Vec<DMatrix<f64>> = (0..n)
        .map(|i| {
            let d = DMatrix::from_fn(n, n, |a, b| dg[(a, b, i)]);
            -(g_inv * d * g_inv)
        })
        .collect();
    Tensor4::from_fn(n, |l, j, k, i| {
        0.5 * (0..n)
            .map(|m| dinv[i][(m, l)] * first[(m, j, k)] + g_inv[(m, l)] * dfirst[(m, j, k, i)])
            .sum::<f64>()
    })
}

/// Rˡ_ijk = ∂ⱼ Γˡ_ik − ∂ᵢ Γˡ_jk + Σₚ (Γᵖ_ik Γˡ_jp − Γᵖ_jk Γˡ_ip).
pub fn riemann_at(gamma: &Tensor3, dgamma: &Tensor4) -> Tensor4 {
    let n = gamma.dim();
    Tensor4::from_fn(n, |l, i, j, k| {
        let mut v = dgamma[(l, i, k, j)] - dgamma[(l, j, k, i)];
        for p in 0..n {
            v += gamma[(p, i, k)] * gamma[(l, j, p)] - gamma[(p, j, k)] * gamma[(l, i, p)];
        }
        v
    })
}

/// Sectional curvature of every coordinate plane, in [`plane_pairs`] order.
///
/// Numerator `Σₗ Rˡ_iji g_lj`; denominator per `mode`.
pub fn sectional_at(g: &DMatrix<f64>, riemann: &Tensor4, mode: SectionalMode) -> Result<Vec<f64>> {
    let n = g.nrows();
    plane_pairs(n)
        .into_iter()
        .map(|(i, j)| {
            let area = g[(i, i)] * g[(j, j)] - g[(i, j)] * g[(j, i)];
            if !(area > MIN_PLANE_DENOMINATOR) {
                return Err(Error::DegeneratePlane {
                    i,
                    j,
                    denominator: area,
                });
            }
            let numerator: f64 = (0..n).map(|l| riemann[(l, i, j, i)] * g[(l, j)]).sum();
            let denom = match mode {
                SectionalMode::Standard => area,
                SectionalMode::PaperSqrt => area.sqrt(),
            };
            Ok(numerator / denom)
        })
        .collect()
}

/// Everything computed at one point from a metric jet.
#[derive(Debug, Clone, PartialEq)]
pub struct PointGeometry {
    pub lambda: f64,
    pub christoffel: Tensor3,
    pub riemann: Tensor4,
    pub sectional: Vec<f64>,
}

/// Christoffel → Riemann → sectional at a point, regularizing the metric
/// when needed. The reported `lambda` is zero unless the ridge was applied.
pub fn geometry_from_jet(jet: &MetricJet, mode: SectionalMode) -> Result<PointGeometry> {
    let lambda = regularization(&jet.g)?;
    let n = jet.g.nrows();
    let g = &jet.g + DMatrix::identity(n, n) * lambda;
    let g_inv = regularized_inverse(&jet.g, lambda)?;
    let christoffel = christoffel_with_inverse(&g_inv, &jet.dg);
    let dgamma = christoffel_derivative(&g_inv, &jet.dg, &jet.d2g);
    let riemann = riemann_at(&christoffel, &dgamma);
    let sectional = sectional_at(&g, &riemann, mode)?;
    Ok(PointGeometry {
        lambda,
        christoffel,
        riemann,
        sectional,
    })
}

/// Symmetric matrices on a grid, upper triangle stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    pub grid: TensorGrid,
    packed: Vec<Vec<f64>>,
    /// Largest ridge applied at any node.
    pub regularization: f64,
}

impl MetricField {
    pub fn new(grid: TensorGrid, values: &[DMatrix<f64>]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Argument(format!(
                "{} metric values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let n = grid.ndim();
        let packed = values
            .iter()
            .map(|g| {
                if g.nrows() != n || g.ncols() != n {
                    return Err(Error::Argument(format!("metric must be {n}×{n}")));
                }
                Ok(upper_pairs(n).map(|(i, j)| g[(i, j)]).collect())
            })
            .collect::<Result<_>>()?;
        Ok(MetricField {
            grid,
            packed,
            regularization: 0.0,
        })
    }

    pub fn at(&self, node: usize) -> DMatrix<f64> {
        unpack_symmetric(self.grid.ndim(), &self.packed[node])
    }

    /// Packed upper-triangle values at every node.
    pub fn packed(&self) -> &[Vec<f64>] {
        &self.packed
    }
}

/// `(i, j)` with `i ≤ j`, row by row.
pub fn upper_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i..n).map(move |j| (i, j)))
}

pub fn unpack_symmetric(n: usize, packed: &[f64]) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(n, n);
    for ((i, j), v) in upper_pairs(n).zip(packed) {
        g[(i, j)] = *v;
        g[(j, i)] = *v;
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelField {
    pub grid: TensorGrid,
    pub values: Vec<Tensor3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiemannField {
    pub grid: TensorGrid,
    pub values: Vec<Tensor4>,
}

/// Sectional curvature of every coordinate plane at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionalCurvatureField {
    pub grid: TensorGrid,
    /// `values[node][p]` for the `p`-th pair of [`plane_pairs`].
    pub values: Vec<Vec<f64>>,
    pub mode: SectionalMode,
}

impl SectionalCurvatureField {
    pub fn new(grid: TensorGrid, values: Vec<Vec<f64>>, mode: SectionalMode) -> Result<Self> {
        let pairs = plane_pairs(grid.ndim()).len();
        if values.len() != grid.len() || values.iter().any(|v| v.len() != pairs) {
            return Err(Error::Argument(format!(
                "sectional field needs {} nodes × {pairs} planes",
                grid.len()
            )));
        }
        Ok(SectionalCurvatureField { grid, values, mode })
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        plane_pairs(self.grid.ndim())
    }

    /// Largest |K_ij| over nodes at least `trim` layers from the boundary.
    pub fn max_abs_interior(&self, trim: usize) -> f64 {
        (0..self.grid.len())
            .filter(|&idx| self.grid.is_interior(idx, trim))
            .flat_map(|idx| self.values[idx].iter().map(|v| v.abs()))
            .fold(0.0, f64::max)
    }
}

/// Curvature fields computed node by node from metric jets.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureFields {
    pub christoffel: ChristoffelField,
    pub riemann: RiemannField,
    pub sectional: SectionalCurvatureField,
    /// Ridge applied per node (zero where none was needed).
    pub lambdas: Vec<f64>,
}

pub fn curvature_fields(grid: &TensorGrid, jets: &[MetricJet], mode: SectionalMode) -> Result<CurvatureFields> {
    if jets.len() != grid.len() {
        return Err(Error::Argument(format!(
            "{} metric jets for a grid of {} nodes",
            jets.len(),
            grid.len()
        )));
    }
    let mut christoffel = Vec::with_capacity(jets.len());
    let mut riemann = Vec::with_capacity(jets.len());
    let mut sectional = Vec::with_capacity(jets.len());
    let mut lambdas = Vec::with_capacity(jets.len());
    for (node, jet) in jets.iter().enumerate() {
        let pg = geometry_from_jet(jet, mode).map_err(|e| e.at_node(node))?;
        christoffel.push(pg.christoffel);
        riemann.push(pg.riemann);
        sectional.push(pg.sectional);
        lambdas.push(pg.lambda);
    }
    Ok(CurvatureFields {
        christoffel: ChristoffelField {
            grid: grid.clone(),
            values: christoffel,
        },
        riemann: RiemannField {
            grid: grid.clone(),
            values: riemann,
        },
        sectional: SectionalCurvatureField::new(grid.clone(), sectional, mode)?,
        lambdas,
    })
}

/// Trapezoid weights for nodes `lo..=hi` of `axis`.
fn trapezoid_weights(axis: &[f64], lo: usize, hi: usize) -> Vec<f64> {
    (lo..=hi)
        .map(|i| {
            let left = if i > lo { axis[i] - axis[i - 1] } else { 0.0 };
            let right = if i < hi { axis[i + 1] - axis[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// 𝒦 = sqrt(Σ_{i<j} ∫ K_ij² dV) over the grid with `trim` boundary layers
/// removed on every side, by the tensor trapezoidal rule.
pub fn l2_curvature_score(field: &SectionalCurvatureField, trim: usize) -> Result<f64> {
    if trim < 1 {
        return Err(Error::Argument("trim must remove at least one boundary layer".into()));
    }
    let grid = &field.grid;
    let mut weights = Vec::with_capacity(grid.ndim());
    for (a, axis) in grid.axes().iter().enumerate() {
        if axis.len() < 2 * trim + 2 {
            return Err(Error::Argument(format!(
                "axis {a} has {} nodes; trimming {trim} per side leaves fewer than 2",
                axis.len()
            )));
        }
        weights.push(trapezoid_weights(axis, trim, axis.len() - 1 - trim));
    }
    let mut total = 0.0;
    for idx in 0..grid.len() {
        if !grid.is_interior(idx, trim) {
            continue;
        }
        let w: f64 = grid
            .unravel(idx)
            .iter()
            .zip(&weights)
            .map(|(&i, ws)| ws[i - trim])
            .product();
        total += w * field.values[idx].iter().map(|k| k * k).sum::<f64>();
    }
    let score = total.sqrt();
    if score.is_finite() {
        Ok(score)
    } else {
        Err(Error::Scoring("curvature score is not finite".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn diag_metric_jet(x1: f64, h: impl Fn(f64) -> [f64; 3]) -> MetricJet {
        // g = diag(1, h(x1)); only ∂₀ derivatives are non-zero.
        let [v, d1, d2] = h(x1);
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, v]);
        let mut dg = Tensor3::zeros(2);
        dg[(1, 1, 0)] = d1;
        let mut d2g = Tensor4::zeros(2);
        d2g[(1, 1, 0, 0)] = d2;
        MetricJet { g, dg, d2g }
    }

    fn sphere(x: f64) -> [f64; 3] {
        [x.sin().powi(2), (2.0 * x).sin(), 2.0 * (2.0 * x).cos()]
    }

    fn hyperbolic(x: f64) -> [f64; 3] {
        let e = (2.0 * x).exp();
        [e, 2.0 * e, 4.0 * e]
    }

    #[test]
    fn pullback_examples() {
        let id = DMatrix::<f64>::identity(2, 2);
        assert_eq!(pullback_from_jacobian(&id), id);
        let j = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(
            pullback_from_jacobian(&j),
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])
        );
        assert_eq!(pullback_from_jacobian(&(&id * 2.0)), &id * 4.0);
    }

    #[test]
    fn christoffel_of_constant_metric_vanishes() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let gamma = christoffel_at(&g, &Tensor3::zeros(2), 0.0).unwrap();
        assert!(gamma.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn christoffel_polar_type_metric() {
        // g = diag(1, x1²) at x1 = 2
        let jet = diag_metric_jet(2.0, |x| [x * x, 2.0 * x, 2.0]);
        let gamma = christoffel_at(&jet.g, &jet.dg, 0.0).unwrap();
        let expected = |k, i, j| match (k, i, j) {
            (0, 1, 1) => -2.0,
            (1, 0, 1) | (1, 1, 0) => 0.5,
            _ => 0.0,
        };
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!((gamma[(k, i, j)] - expected(k, i, j)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn christoffel_sphere_metric() {
        let jet = diag_metric_jet(PI / 4.0, sphere);
        let gamma = christoffel_at(&jet.g, &jet.dg, 0.0).unwrap();
        assert!((gamma[(0, 1, 1)] + 0.5).abs() < 1e-14);
        assert!((gamma[(1, 0, 1)] - 1.0).abs() < 1e-14);
        assert!((gamma[(1, 1, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_metric_is_reported() {
        let g = DMatrix::zeros(2, 2);
        assert!(matches!(
            christoffel_at(&g, &Tensor3::zeros(2), 0.0),
            Err(Error::DegenerateMetric { .. })
        ));
    }

    #[test]
    fn flat_space_has_zero_curvature() {
        let gamma = Tensor3::zeros(3);
        let r = riemann_at(&gamma, &Tensor4::zeros(3));
        assert!(r.as_slice().iter().all(|v| *v == 0.0));
        let k = sectional_at(&DMatrix::identity(3, 3), &r, SectionalMode::Standard).unwrap();
        assert_eq!(k, vec![0.0; 3]);
    }

    #[test]
    fn riemann_is_antisymmetric_in_first_pair() {
        let n = 3;
        let mut seed = 1u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let gamma = Tensor3::from_fn(n, |_, _, _| next());
        let dgamma = Tensor4::from_fn(n, |_, _, _, _| next());
        let r = riemann_at(&gamma, &dgamma);
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        assert!((r[(l, i, j, k)] + r[(l, j, i, k)]).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn sphere_and_hyperbolic_plane() {
        for x in [0.3, 0.7, 1.2, 2.0] {
            let k = geometry_from_jet(&diag_metric_jet(x, sphere), SectionalMode::Standard)
                .unwrap()
                .sectional;
            assert!((k[0] - 1.0).abs() < 1e-12, "sphere K={k:?} at {x}");
            let k = geometry_from_jet(&diag_metric_jet(x, hyperbolic), SectionalMode::Standard)
                .unwrap()
                .sectional;
            assert!((k[0] + 1.0).abs() < 1e-12, "hyperbolic K={k:?} at {x}");
        }
    }

    #[test]
    fn modes_agree_on_orthonormal_frames_and_share_zeros() {
        let jet = diag_metric_jet(1.0, |_| [1.0, 0.7, -0.4]);
        let a = geometry_from_jet(&jet, SectionalMode::Standard).unwrap().sectional;
        let b = geometry_from_jet(&jet, SectionalMode::PaperSqrt).unwrap().sectional;
        assert_eq!(a, b);
        let jet = diag_metric_jet(1.0, sphere);
        let a = geometry_from_jet(&jet, SectionalMode::Standard).unwrap().sectional;
        let b = geometry_from_jet(&jet, SectionalMode::PaperSqrt).unwrap().sectional;
        let area = jet.g[(1, 1)];
        assert!((b[0] - a[0] * area.sqrt()).abs() < 1e-12);
        let flat = MetricJet::constant(DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]));
        assert_eq!(
            geometry_from_jet(&flat, SectionalMode::PaperSqrt).unwrap().sectional,
            vec![0.0]
        );
    }

    #[test]
    fn degenerate_plane_is_an_error() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            sectional_at(&g, &Tensor4::zeros(2), SectionalMode::Standard),
            Err(Error::DegeneratePlane { .. })
        ));
    }

    #[test]
    fn near_singular_metric_gets_a_ridge() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let lambda = regularization(&g).unwrap();
        assert_eq!(lambda, RIDGE_SCALE * 0.5);
        let pg = geometry_from_jet(&MetricJet::constant(g), SectionalMode::Standard).unwrap();
        assert_eq!(pg.lambda, lambda);
        assert_eq!(regularization(&DMatrix::identity(2, 2)).unwrap(), 0.0);
    }

    #[test]
    fn product_rule_jet_matches_direct_metric() {
        // f(x) = (x0, x1 + x0², x0 x1) → g = JᵀJ
        let x = [0.3, -0.7];
        let first = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0 * x[0], 1.0, x[1], x[0]]);
        let second = vec![
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        ];
        let third = vec![Tensor3::zeros(2); 3];
        let jet = MetricJet::from_map_derivatives(&first, &second, &third);
        // g00 = 1 + 4x0² + x1², g01 = 2x0 + x0 x1, g11 = 1 + x0²
        assert!((jet.g[(0, 0)] - (1.0 + 4.0 * x[0] * x[0] + x[1] * x[1])).abs() < 1e-14);
        assert!((jet.dg[(0, 0, 0)] - 8.0 * x[0]).abs() < 1e-14);
        assert!((jet.dg[(0, 0, 1)] - 2.0 * x[1]).abs() < 1e-14);
        assert!((jet.dg[(0, 1, 0)] - (2.0 + x[1])).abs() < 1e-14);
        assert!((jet.dg[(0, 1, 1)] - x[0]).abs() < 1e-14);
        assert!((jet.dg[(1, 1, 0)] - 2.0 * x[0]).abs() < 1e-14);
        assert!((jet.d2g[(0, 0, 0, 0)] - 8.0).abs() < 1e-14);
        assert!((jet.d2g[(0, 0, 1, 1)] - 2.0).abs() < 1e-14);
        assert!((jet.d2g[(0, 1, 0, 1)] - 1.0).abs() < 1e-14);
        assert!((jet.d2g[(1, 1, 0, 0)] - 2.0).abs() < 1e-14);
        // f is an immersion of a flat domain into ℝ³; not flat in general,
        // but the symmetric structure of d2g must hold.
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        assert_eq!(jet.d2g[(i, j, k, l)], jet.d2g[(j, i, l, k)]);
                    }
                }
            }
        }
    }

    fn constant_field(n: usize, res: usize, values: Vec<f64>) -> SectionalCurvatureField {
        let grid = TensorGrid::unit(n, res).unwrap();
        let len = grid.len();
        SectionalCurvatureField::new(grid, vec![values; len], SectionalMode::Standard).unwrap()
    }

    #[test]
    fn score_of_constant_fields() {
        assert_eq!(l2_curvature_score(&constant_field(2, 9, vec![0.0]), 2).unwrap(), 0.0);
        // trimmed domain [2/8, 6/8]², measure 1/4
        let s = l2_curvature_score(&constant_field(2, 9, vec![-3.0]), 2).unwrap();
        assert!((s - 3.0 * 0.5).abs() < 1e-14, "{s}");
        // two pairs (n = 3), trim 1 on 3 nodes... needs ≥ 4; use a box grid instead
        let grid = TensorGrid::uniform(&[(-1.0, 2.0), (-1.0, 2.0), (-1.0, 2.0)], 4).unwrap();
        let len = grid.len();
        let field =
            SectionalCurvatureField::new(grid, vec![vec![1.5, 2.0, 0.0]; len], SectionalMode::Standard).unwrap();
        let s = l2_curvature_score(&field, 1).unwrap();
        assert!((s - (1.5f64.powi(2) + 4.0).sqrt()).abs() < 1e-12, "{s}");
    }

    #[test]
    fn score_rejects_over_trimming() {
        assert!(l2_curvature_score(&constant_field(2, 5, vec![1.0]), 2).is_err());
        assert!(l2_curvature_score(&constant_field(2, 6, vec![1.0]), 2).is_ok());
        assert!(l2_curvature_score(&constant_field(2, 6, vec![1.0]), 0).is_err());
    }

    #[test]
    fn metric_field_packs_upper_triangle() {
        let grid = TensorGrid::unit(2, 4).unwrap();
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        let field = MetricField::new(grid, &vec![g.clone(); 16]).unwrap();
        assert_eq!(field.packed()[3], vec![1.0, 0.5, 2.0]);
        assert_eq!(field.at(3), g);
    }
}
