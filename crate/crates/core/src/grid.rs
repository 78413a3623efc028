use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `N` points in ℝᵈ, stored row-major. Row index is the point's identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("point dimension must be at least 1".into()));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::Argument(format!(
                "{} values cannot form rows of dimension {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!(
                "non-finite value in row {} column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(PointCloud { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Argument(format!(
                    "row {i} has {} columns, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        PointCloud::new(dim, data)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            data.extend(m.row(i).iter());
        }
        PointCloud::new(m.ncols(), data)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Applies `x ↦ scale·x + shift` to every row.
    pub fn affine(&self, scale: f64, shift: &[f64]) -> PointCloud {
        let data = self
            .rows()
            .flat_map(|r| r.iter().zip(shift).map(|(x, s)| scale * x + s).collect::<Vec<_>>())
            .collect();
        PointCloud { dim: self.dim, data }
    }

    /// Translates the bounding-box minimum to the origin and divides by the
    /// largest side. Returns the rescaled cloud and the side length used
    /// (1 when the cloud is a single point).
    pub fn rescale_to_unit_box(&self) -> (PointCloud, f64) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for r in self.rows() {
            for j in 0..self.dim {
                lo[j] = lo[j].min(r[j]);
                hi[j] = hi[j].max(r[j]);
            }
        }
        let extent = lo.iter().zip(&hi).map(|(l, h)| h - l).fold(0.0, f64::max);
        let extent = if extent > 0.0 { extent } else { 1.0 };
        let shift: Vec<f64> = lo.iter().map(|l| -l / extent).collect();
        (self.affine(1.0 / extent, &shift), extent)
    }
}

/// A full tensor-product grid. Points are enumerated in row-major order:
/// the last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    axes: Vec<Vec<f64>>,
}

impl TensorGrid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Argument("grid needs at least one axis".into()));
        }
        for (a, nodes) in axes.iter().enumerate() {
            if nodes.len() < 2 {
                return Err(Error::Argument(format!("axis {a} has fewer than 2 nodes")));
            }
            if nodes.iter().any(|x| !x.is_finite()) || nodes.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Argument(format!(
                    "axis {a} nodes must be finite and strictly increasing"
                )));
            }
        }
        Ok(TensorGrid { axes })
    }

    /// `resolution` equispaced nodes on [0, 1] along each of `n` axes.
    pub fn unit(n: usize, resolution: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::Argument("grid dimension must be at least 1".into()));
        }
        if resolution < 4 {
            return Err(Error::Argument(format!(
                "grid resolution {resolution} is below 4 nodes per axis (needed for cubic splines)"
            )));
        }
        let axis: Vec<f64> = (0..resolution).map(|i| i as f64 / (resolution - 1) as f64).collect();
        TensorGrid::new(vec![axis; n])
    }

    /// Equispaced box grid `[lo_a, hi_a]` with `resolution` nodes per axis.
    pub fn uniform(bounds: &[(f64, f64)], resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::Argument("resolution must be at least 2".into()));
        }
        let axes = bounds
            .iter()
            .map(|&(lo, hi)| {
                (0..resolution)
                    .map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64)
                    .collect()
            })
            .collect();
        TensorGrid::new(axes)
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        &self.axes[a]
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Per-axis node indices of flat point index `idx`.
    pub fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.axes.len()];
        for a in (0..self.axes.len()).rev() {
            let len = self.axes[a].len();
            out[a] = idx % len;
            idx /= len;
        }
        out
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, axis)| acc * axis.len() + i)
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.unravel(idx)
            .iter()
            .zip(&self.axes)
            .map(|(&i, axis)| axis[i])
            .collect()
    }

    pub fn to_point_cloud(&self) -> PointCloud {
        let data = (0..self.len()).flat_map(|i| self.point(i)).collect();
        PointCloud { dim: self.ndim(), data }
    }

    /// Whether point `idx` lies at least `trim` layers away from every face.
    pub fn is_interior(&self, idx: usize, trim: usize) -> bool {
        self.unravel(idx)
            .iter()
            .zip(&self.axes)
            .all(|(&i, axis)| i >= trim && i + trim < axis.len())
    }

    /// The grid with `layers` nodes removed from both ends of every axis.
    pub fn trimmed(&self, layers: usize) -> Result<TensorGrid> {
        if layers == 0 {
            return Ok(self.clone());
        }
        let axes = self
            .axes
            .iter()
            .enumerate()
            .map(|(a, axis)| {
                if axis.len() < 2 * layers + 2 {
                    return Err(Error::Argument(format!(
                        "axis {a} has {} nodes; cannot remove {layers} layers per side",
                        axis.len()
                    )));
                }
                Ok(axis[layers..axis.len() - layers].to_vec())
            })
            .collect::<Result<_>>()?;
        TensorGrid::new(axes)
    }

    /// Index in `self` of point `sub_idx` of `self.trimmed(layers)`.
    pub fn untrimmed_index(&self, sub_idx: usize, layers: usize) -> usize {
        let shape: Vec<usize> = self.axes.iter().map(|a| a.len() - 2 * layers).collect();
        let mut rest = sub_idx;
        let mut multi = vec![0; shape.len()];
        for a in (0..shape.len()).rev() {
            multi[a] = rest % shape[a] + layers;
            rest /= shape[a];
        }
        self.ravel(&multi)
    }

    /// Recovers the tensor grid a point cloud was enumerated from, if any.
    pub fn from_point_cloud(cloud: &PointCloud) -> Result<Self> {
        let n = cloud.dim();
        let mut axes = Vec::with_capacity(n);
        for a in 0..n {
            let mut vals = cloud.column(a);
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            axes.push(vals);
        }
        let grid = TensorGrid::new(axes).map_err(|_| Error::Argument("points do not form a tensor grid".into()))?;
        if grid.len() != cloud.len() || grid.to_point_cloud() != *cloud {
            return Err(Error::Argument(
                "points do not form a full tensor grid in row-major order".into(),
            ));
        }
        Ok(grid)
    }
}

/// The `resolutionⁿ` equispaced grid on [0, 1]ⁿ as a point cloud.
pub fn make_grid(n: usize, resolution: usize) -> Result<PointCloud> {
    Ok(TensorGrid::unit(n, resolution)?.to_point_cloud())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_grid() {
        let g = make_grid(1, 4).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn two_dimensional_grid_is_row_major() {
        let g = make_grid(2, 4).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g.row(1), &[0.0, 1.0 / 3.0]);
        assert_eq!(g.row(4), &[1.0 / 3.0, 0.0]);
        let all = g.as_slice();
        assert_eq!(all.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
        assert_eq!(all.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
    }

    #[test]
    fn resolution_below_four_is_rejected() {
        assert!(matches!(make_grid(2, 3), Err(Error::Argument(_))));
        assert!(make_grid(0, 8).is_err());
    }

    #[test]
    fn ravel_roundtrip_and_interior() {
        let g = TensorGrid::unit(3, 5).unwrap();
        for idx in 0..g.len() {
            assert_eq!(g.ravel(&g.unravel(idx)), idx);
        }
        assert!(g.is_interior(g.ravel(&[2, 2, 2]), 2));
        assert!(!g.is_interior(g.ravel(&[1, 2, 2]), 2));
    }

    #[test]
    fn trimming_keeps_row_major_order() {
        let g = TensorGrid::unit(2, 6).unwrap();
        let t = g.trimmed(1).unwrap();
        assert_eq!(t.shape(), vec![4, 4]);
        for i in 0..t.len() {
            assert_eq!(t.point(i), g.point(g.untrimmed_index(i, 1)));
        }
        assert!(g.trimmed(3).is_err());
        assert_eq!(g.trimmed(0).unwrap(), g);
    }

    #[test]
    fn recovers_grid_from_cloud() {
        let g = TensorGrid::unit(2, 6).unwrap();
        assert_eq!(TensorGrid::from_point_cloud(&g.to_point_cloud()).unwrap(), g);
        let shuffled = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(TensorGrid::from_point_cloud(&shuffled).is_err());
    }

    #[test]
    fn unit_box_rescale() {
        let c = PointCloud::from_rows(&[[2.0, 1.0], [6.0, 3.0]]).unwrap();
        let (r, extent) = c.rescale_to_unit_box();
        assert_eq!(extent, 4.0);
        assert_eq!(r.as_slice(), &[0.0, 0.0, 1.0, 0.5]);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(PointCloud::new(2, vec![0.0, f64::NAN]).is_err());
        assert!(PointCloud::new(2, vec![0.0, 1.0, 2.0]).is_err());
    }
}
