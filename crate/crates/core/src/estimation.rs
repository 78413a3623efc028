//! Estimating the pullback metric of a sampled map `f` on a grid and its
//! sectional curvature.
//!
//! Two estimators are available:
//!
//! * [`EstimationMethod::FunctionSpline`]: spline every component of `f`,
//!   take analytic derivatives up to order three and assemble the metric
//!   jet `g = JᵀJ`, `∂g`, `∂²g` by the product rule.
//! * [`EstimationMethod::MetricKnn`]: estimate `g` at every node from its
//!   `K` nearest grid neighbors by least squares, spline the metric field
//!   and differentiate it twice.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    geometry_from_jet, l2_curvature_score, plane_pairs, upper_pairs, MetricField, MetricJet, SectionalCurvatureField,
    SectionalMode, Tensor3, Tensor4, DEFAULT_TRIM, MIN_EIGENVALUE,
};
use crate::grid::{PointCloud, TensorGrid};
use crate::knn::KdTree;
use crate::spline::{fit_spline, SplineField};

pub const DEFAULT_K_NEIGHBORS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationMethod {
    FunctionSpline,
    MetricKnn,
}

impl std::str::FromStr for EstimationMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "function_spline" | "function-spline" => Ok(EstimationMethod::FunctionSpline),
            "metric_knn" | "metric-knn" => Ok(EstimationMethod::MetricKnn),
            _ => Err(Error::Argument(format!(
                "unknown estimator {s:?} (expected function-spline or metric-knn)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationConfig {
    pub method: EstimationMethod,
    pub k_neighbors: usize,
    pub trim: usize,
    pub mode: SectionalMode,
    pub rescale_output: bool,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            method: EstimationMethod::MetricKnn,
            k_neighbors: DEFAULT_K_NEIGHBORS,
            trim: DEFAULT_TRIM,
            mode: SectionalMode::Standard,
            rescale_output: true,
        }
    }
}

impl EstimationConfig {
    pub fn function_spline() -> Self {
        EstimationConfig {
            method: EstimationMethod::FunctionSpline,
            ..Default::default()
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.method == EstimationMethod::MetricKnn && self.k_neighbors <= n {
            return Err(Error::Argument(format!(
                "k_neighbors = {} must exceed the source dimension {n}",
                self.k_neighbors
            )));
        }
        if self.trim < 1 {
            return Err(Error::Argument("trim must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    /// The metric was near-singular and a ridge was added before inversion.
    Regularized,
    /// Least-squares metric eigenvalues were clamped to stay positive definite.
    Clamped,
    /// Curvature could not be computed; the node's coefficients are set to 0.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeIssue {
    pub node: usize,
    pub kind: IssueKind,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub issues: Vec<NodeIssue>,
    /// Eigenvalues clamped during SPD projection, summed over nodes.
    pub clamped_eigenvalues: usize,
}

impl Diagnostics {
    /// Distinct interior nodes with at least one issue.
    pub fn degenerate_interior_nodes(&self, grid: &TensorGrid, trim: usize) -> usize {
        let mut nodes: Vec<usize> = self
            .issues
            .iter()
            .map(|i| i.node)
            .filter(|&n| grid.is_interior(n, trim))
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureEstimate {
    /// Curvature on the estimator's support: the input grid with
    /// `support_trim` layers removed per side.
    pub field: SectionalCurvatureField,
    pub support_trim: usize,
    /// Node indices refer to the input grid.
    pub diagnostics: Diagnostics,
}

impl CurvatureEstimate {
    /// `trim` counted from the boundary of the input grid.
    fn support_relative(&self, trim: usize) -> Result<usize> {
        trim.checked_sub(self.support_trim).filter(|t| *t >= 1).ok_or_else(|| {
            Error::Argument(format!(
                "trim {trim} must exceed the estimator's support margin {}",
                self.support_trim
            ))
        })
    }

    pub fn score(&self, trim: usize) -> Result<f64> {
        l2_curvature_score(&self.field, self.support_relative(trim)?)
    }

    /// Largest |K_ij| at least `trim` layers inside the input grid.
    pub fn max_abs_interior(&self, trim: usize) -> f64 {
        let t = trim.saturating_sub(self.support_trim);
        self.field.max_abs_interior(t)
    }

    /// Input-grid index of support node `i`.
    pub fn input_index(&self, i: usize) -> usize {
        let g = &self.field.grid;
        let layers = self.support_trim;
        g.unravel(i)
            .iter()
            .zip(g.shape())
            .fold(0, |acc, (&m, len)| acc * (len + 2 * layers) + m + layers)
    }

    /// `(input-grid node, K values)` at least `trim` layers inside.
    pub fn interior_values(&self, trim: usize) -> Vec<(usize, &[f64])> {
        let t = trim.saturating_sub(self.support_trim);
        let g = &self.field.grid;
        (0..g.len())
            .filter(|&i| g.is_interior(i, t))
            .map(|i| (self.input_index(i), self.field.values[i].as_slice()))
            .collect()
    }
}

/// Multi-indices of order `order` over `n` axes as sorted index tuples.
fn index_tuples(n: usize, order: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, order: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == order {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, order, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, order, 0, &mut Vec::new(), &mut out);
    out
}

fn orders_of(n: usize, tuple: &[usize]) -> Vec<usize> {
    let mut o = vec![0; n];
    for &i in tuple {
        o[i] += 1;
    }
    o
}

/// Jet of the pullback metric from spline derivatives of `f` at `x`.
fn function_jet(spline: &SplineField, x: &[f64]) -> Result<MetricJet> {
    let n = x.len();
    let c = spline.components();
    let mut first = DMatrix::zeros(c, n);
    for i in 0..n {
        let d = spline.derivative(x, &orders_of(n, &[i]))?;
        for a in 0..c {
            first[(a, i)] = d[a];
        }
    }
    let mut second = vec![DMatrix::zeros(n, n); c];
    for t in index_tuples(n, 2) {
        let d = spline.derivative(x, &orders_of(n, &t))?;
        for a in 0..c {
            second[a][(t[0], t[1])] = d[a];
            second[a][(t[1], t[0])] = d[a];
        }
    }
    let mut third = vec![Tensor3::zeros(n); c];
    for t in index_tuples(n, 3) {
        let d = spline.derivative(x, &orders_of(n, &t))?;
        let (i, j, k) = (t[0], t[1], t[2]);
        for a in 0..c {
            for (p, q, r) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                third[a][(p, q, r)] = d[a];
            }
        }
    }
    Ok(MetricJet::from_map_derivatives(&first, &second, &third))
}

/// Jet of a splined metric field (packed upper triangle per component).
fn metric_spline_jet(spline: &SplineField, x: &[f64]) -> Result<MetricJet> {
    let n = x.len();
    let pairs: Vec<(usize, usize)> = upper_pairs(n).collect();
    let fill = |vals: &[f64]| {
        let mut g = DMatrix::zeros(n, n);
        for (&(i, j), v) in pairs.iter().zip(vals) {
            g[(i, j)] = *v;
            g[(j, i)] = *v;
        }
        g
    };
    let g = fill(&spline.value(x)?);
    let mut dg = Tensor3::zeros(n);
    for k in 0..n {
        let d = fill(&spline.derivative(x, &orders_of(n, &[k]))?);
        for i in 0..n {
            for j in 0..n {
                dg[(i, j, k)] = d[(i, j)];
            }
        }
    }
    let mut d2g = Tensor4::zeros(n);
    for t in index_tuples(n, 2) {
        let d = fill(&spline.derivative(x, &orders_of(n, &t))?);
        for i in 0..n {
            for j in 0..n {
                d2g[(i, j, t[0], t[1])] = d[(i, j)];
                d2g[(i, j, t[1], t[0])] = d[(i, j)];
            }
        }
    }
    Ok(MetricJet { g, dg, d2g })
}

/// Runs the geometry pipeline at every node, recording rather than
/// propagating node-local failures.
fn sectional_from_jets(
    grid: &TensorGrid,
    mode: SectionalMode,
    mut jet_at: impl FnMut(&[f64]) -> Result<MetricJet>,
    node_label: impl Fn(usize) -> usize,
    diagnostics: &mut Diagnostics,
) -> Result<SectionalCurvatureField> {
    let pairs = plane_pairs(grid.ndim()).len();
    let mut values = Vec::with_capacity(grid.len());
    for node in 0..grid.len() {
        let jet = jet_at(&grid.point(node))?;
        match geometry_from_jet(&jet, mode) {
            Ok(pg) => {
                if pg.lambda > 0.0 {
                    diagnostics.issues.push(NodeIssue {
                        node: node_label(node),
                        kind: IssueKind::Regularized,
                        detail: format!("ridge {:e}", pg.lambda),
                    });
                }
                values.push(pg.sectional);
            }
            Err(e @ (Error::DegenerateMetric { .. } | Error::DegeneratePlane { .. })) => {
                diagnostics.issues.push(NodeIssue {
                    node: node_label(node),
                    kind: IssueKind::Failed,
                    detail: e.at_node(node_label(node)).to_string(),
                });
                values.push(vec![0.0; pairs]);
            }
            Err(e) => return Err(e),
        }
    }
    SectionalCurvatureField::new(grid.clone(), values, mode)
}

fn check_samples(grid: &TensorGrid, samples: &PointCloud) -> Result<()> {
    if samples.len() != grid.len() {
        return Err(Error::Argument(format!(
            "{} sample rows for a grid of {} points",
            samples.len(),
            grid.len()
        )));
    }
    Ok(())
}

fn prepared(samples: &PointCloud, config: &EstimationConfig) -> PointCloud {
    if config.rescale_output {
        samples.rescale_to_unit_box().0
    } else {
        samples.clone()
    }
}

/// Curvature of the pullback metric of `f` by splining `f` itself.
pub fn estimate_curvature_via_function(
    grid: &TensorGrid,
    samples: &PointCloud,
    config: &EstimationConfig,
) -> Result<CurvatureEstimate> {
    check_samples(grid, samples)?;
    config.validate(grid.ndim())?;
    let f = prepared(samples, config);
    let spline = fit_spline(grid, &f)?;
    let mut diagnostics = Diagnostics::default();
    let field = sectional_from_jets(
        grid,
        config.mode,
        |x| function_jet(&spline, x),
        |node| node,
        &mut diagnostics,
    )?;
    Ok(CurvatureEstimate {
        field,
        support_trim: 0,
        diagnostics,
    })
}

/// Least-squares metric from `K > n` neighbors: the symmetric `A`
/// minimizing `Σᵢⱼ (vᵢᵀ A vⱼ − tᵢⱼ)²` with `vᵢ = xᵢ − x` and
/// `tᵢⱼ = (f(xᵢ) − f(x))·(f(xⱼ) − f(x))`.
///
/// Neighbors are put in a canonical order first, so the result does not
/// depend on the order they are passed in.
pub fn knn_metric_at<P: AsRef<[f64]>, Q: AsRef<[f64]>>(
    x: &[f64],
    neighbors: &[P],
    image_x: &[f64],
    image_neighbors: &[Q],
) -> Result<DMatrix<f64>> {
    let n = x.len();
    let k = neighbors.len();
    if k <= n {
        return Err(Error::Argument(format!(
            "{k} neighbors cannot determine a metric in dimension {n} (need more than {n})"
        )));
    }
    if image_neighbors.len() != k {
        return Err(Error::Argument(format!(
            "{k} neighbors but {} neighbor images",
            image_neighbors.len()
        )));
    }
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    if !finite(x)
        || !finite(image_x)
        || neighbors.iter().any(|p| !finite(p.as_ref()) || p.as_ref().len() != n)
        || image_neighbors
            .iter()
            .any(|q| !finite(q.as_ref()) || q.as_ref().len() != image_x.len())
    {
        return Err(Error::Argument(
            "neighbor data must be finite and dimension-consistent".into(),
        ));
    }
    let mut offsets: Vec<(Vec<f64>, Vec<f64>)> = neighbors
        .iter()
        .zip(image_neighbors)
        .map(|(p, q)| {
            (
                p.as_ref().iter().zip(x).map(|(a, b)| a - b).collect(),
                q.as_ref().iter().zip(image_x).map(|(a, b)| a - b).collect(),
            )
        })
        .collect();
    offsets.sort_by(|a, b| {
        a.0.iter()
            .chain(&a.1)
            .zip(b.0.iter().chain(&b.1))
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let unknowns: Vec<(usize, usize)> = upper_pairs(n).collect();
    let p = unknowns.len();
    let mut design = DMatrix::zeros(k * k, p);
    let mut target = DVector::zeros(k * k);
    for (i, (vi, wi)) in offsets.iter().enumerate() {
        for (j, (vj, wj)) in offsets.iter().enumerate() {
            let row = i * k + j;
            for (col, &(a, b)) in unknowns.iter().enumerate() {
                design[(row, col)] = if a == b {
                    vi[a] * vj[a]
                } else {
                    vi[a] * vj[b] + vi[b] * vj[a]
                };
            }
            target[row] = wi.iter().zip(wj).map(|(s, t)| s * t).sum();
        }
    }
    let svd = design.svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-12 * smax) {
        return Err(Error::Estimation {
            node: 0,
            detail: format!("neighbors do not span ℝ^{n} (singular values {smin:e}/{smax:e})"),
        });
    }
    let sol = svd.solve(&target, 0.0).map_err(|e| Error::Estimation {
        node: 0,
        detail: e.to_string(),
    })?;
    let mut a = DMatrix::zeros(n, n);
    for (&(i, j), v) in unknowns.iter().zip(sol.iter()) {
        a[(i, j)] = *v;
        a[(j, i)] = *v;
    }
    Ok(a)
}

/// Clamps eigenvalues below `MIN_EIGENVALUE`; returns the projected matrix
/// and how many eigenvalues were clamped.
fn project_spd(a: DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let eig = a.clone().symmetric_eigen();
    let clamped = eig.eigenvalues.iter().filter(|&&l| l < MIN_EIGENVALUE).count();
    if clamped == 0 {
        return (a, 0);
    }
    let vals = eig.eigenvalues.map(|l| l.max(MIN_EIGENVALUE));
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&vals) * q.transpose();
    (0.5 * (&out + out.transpose()), clamped)
}

/// Metric estimated at every grid node from its `k` nearest grid
/// neighbors.
pub fn estimate_metric_field(
    grid: &TensorGrid,
    samples: &PointCloud,
    k: usize,
    diagnostics: &mut Diagnostics,
) -> Result<MetricField> {
    check_samples(grid, samples)?;
    let n = grid.ndim();
    if k <= n {
        return Err(Error::Argument(format!(
            "k_neighbors = {k} must exceed the source dimension {n}"
        )));
    }
    if k >= grid.len() {
        return Err(Error::Argument(format!(
            "k_neighbors = {k} needs a grid of more than {k} points"
        )));
    }
    let source = grid.to_point_cloud();
    let tree = KdTree::new(&source);
    let mut metrics = Vec::with_capacity(grid.len());
    for node in 0..grid.len() {
        let x = source.row(node);
        let nn = tree.nearest(x, k, Some(node));
        let pts: Vec<&[f64]> = nn.iter().map(|&i| source.row(i)).collect();
        let imgs: Vec<&[f64]> = nn.iter().map(|&i| samples.row(i)).collect();
        let a = knn_metric_at(x, &pts, samples.row(node), &imgs).map_err(|e| e.at_node(node))?;
        let (a, clamped) = project_spd(a);
        if clamped > 0 {
            diagnostics.clamped_eigenvalues += clamped;
            diagnostics.issues.push(NodeIssue {
                node,
                kind: IssueKind::Clamped,
                detail: format!("{clamped} eigenvalue(s) clamped to {MIN_EIGENVALUE:e}"),
            });
        }
        metrics.push(a);
    }
    MetricField::new(grid.clone(), &metrics)
}

/// Curvature of a sampled metric field: spline each metric component and
/// differentiate twice. Diagnostics use the field's own node indices.
pub fn curvature_from_metric_field(
    field: &MetricField,
    mode: SectionalMode,
    diagnostics: &mut Diagnostics,
) -> Result<SectionalCurvatureField> {
    curvature_from_metric_field_labeled(field, mode, |node| node, diagnostics)
}

fn curvature_from_metric_field_labeled(
    field: &MetricField,
    mode: SectionalMode,
    node_label: impl Fn(usize) -> usize,
    diagnostics: &mut Diagnostics,
) -> Result<SectionalCurvatureField> {
    let packed = PointCloud::from_rows(field.packed())?;
    let spline = fit_spline(&field.grid, &packed)?;
    sectional_from_jets(
        &field.grid,
        mode,
        |x| metric_spline_jet(&spline, x),
        node_label,
        diagnostics,
    )
}

/// Boundary layers whose neighbor sets are one-sided: the largest per-axis
/// index offset between a central node and its `k` nearest neighbors.
///
/// Least-squares metrics at those nodes carry a first-order bias that the
/// interior nodes (with point-symmetric neighborhoods) do not, and a spline
/// through both amplifies the jump when differentiated twice, so they are
/// excluded from the metric spline.
pub fn metric_support_layers(grid: &TensorGrid, k: usize) -> usize {
    let center: Vec<usize> = grid.shape().iter().map(|&n| n / 2).collect();
    let idx = grid.ravel(&center);
    let cloud = grid.to_point_cloud();
    let tree = KdTree::new(&cloud);
    tree.nearest(cloud.row(idx), k, Some(idx))
        .into_iter()
        .flat_map(|j| {
            grid.unravel(j)
                .into_iter()
                .zip(center.clone())
                .map(|(a, b)| a.abs_diff(b))
        })
        .max()
        .unwrap_or(0)
}

/// Curvature of the pullback metric of `f` via neighbor-based metric
/// estimation.
pub fn estimate_curvature_via_metric(
    grid: &TensorGrid,
    samples: &PointCloud,
    config: &EstimationConfig,
) -> Result<CurvatureEstimate> {
    check_samples(grid, samples)?;
    config.validate(grid.ndim())?;
    let f = prepared(samples, config);
    let mut diagnostics = Diagnostics::default();
    let metric = estimate_metric_field(grid, &f, config.k_neighbors, &mut diagnostics)?;
    let layers = metric_support_layers(grid, config.k_neighbors);
    if config.trim <= layers {
        return Err(Error::Argument(format!(
            "trim {} must exceed the {layers} boundary layer(s) spanned by {} neighbors",
            config.trim, config.k_neighbors
        )));
    }
    let support = grid.trimmed(layers)?;
    let inner: Vec<DMatrix<f64>> = (0..support.len())
        .map(|i| metric.at(grid.untrimmed_index(i, layers)))
        .collect();
    let inner = MetricField::new(support, &inner)?;
    let field = curvature_from_metric_field_labeled(
        &inner,
        config.mode,
        |node| grid.untrimmed_index(node, layers),
        &mut diagnostics,
    )?;
    Ok(CurvatureEstimate {
        field,
        support_trim: layers,
        diagnostics,
    })
}

pub fn estimate_curvature(
    grid: &TensorGrid,
    samples: &PointCloud,
    config: &EstimationConfig,
) -> Result<CurvatureEstimate> {
    match config.method {
        EstimationMethod::FunctionSpline => estimate_curvature_via_function(grid, samples, config),
        EstimationMethod::MetricKnn => estimate_curvature_via_metric(grid, samples, config),
    }
}

/// Curvature score of one sampled round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureScore {
    /// Score after the configured output normalization.
    pub score: f64,
    /// Score on the samples as given.
    pub score_raw: f64,
    /// Interior nodes with at least one issue (normalized run).
    pub degenerate_nodes: usize,
    pub interior_nodes: usize,
    pub diagnostics: Diagnostics,
}

impl CurvatureScore {
    pub fn degenerate_rate(&self) -> f64 {
        self.degenerate_nodes as f64 / self.interior_nodes.max(1) as f64
    }
}

/// Scores `samples` (row `k` is `f` at grid point `k`).
pub fn curvature_score(grid: &TensorGrid, samples: &PointCloud, config: &EstimationConfig) -> Result<CurvatureScore> {
    let est = estimate_curvature(grid, samples, config)?;
    let score = est.score(config.trim)?;
    let score_raw = if config.rescale_output {
        let raw = EstimationConfig {
            rescale_output: false,
            ..*config
        };
        estimate_curvature(grid, samples, &raw)?.score(config.trim)?
    } else {
        score
    };
    let interior_nodes = (0..grid.len()).filter(|&i| grid.is_interior(i, config.trim)).count();
    Ok(CurvatureScore {
        score,
        score_raw,
        degenerate_nodes: est.diagnostics.degenerate_interior_nodes(grid, config.trim),
        interior_nodes,
        diagnostics: est.diagnostics,
    })
}
