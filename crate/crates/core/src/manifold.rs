//! Problem-instance generator.
//!
//! Each source axis `i` is mapped along a plane curve γᵢ with prescribed
//! curvature. The curve is padded into ℝᵐ so that it occupies ambient
//! coordinates `i` and `i + 1` (0-based), the padded curves are summed into
//! Φ₀, and the result is rotated by a Haar-random `R ∈ SO(m)` and shifted by
//! a Gaussian vector `z`:
//!
//! ```text
//! Φ(x) = R · Σᵢ pad(γᵢ(xᵢ)) + z
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::curve::{ArcLengthCurve, CurvatureFamily, CurvatureSpec, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::geometry::pullback_from_jacobian;
use crate::grid::{PointCloud, TensorGrid};

pub const DEFAULT_RESOLUTION: usize = 32;
pub const DEFAULT_ETA: f64 = 0.01;
pub const THETA_EASY: f64 = 1.2;
pub const THETA_HARD: f64 = 1.8;
pub const SUITE_SOURCE_DIM: usize = 2;
pub const SUITE_TARGET_DIM: usize = 7;

/// Everything needed to regenerate one problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub n: usize,
    pub m: usize,
    pub families: Vec<CurvatureFamily>,
    pub thetas: Vec<f64>,
    pub eta: f64,
    pub seed: u64,
    pub grid_resolution: usize,
    pub instance_id: String,
}

impl InstanceDescriptor {
    pub fn new(
        m: usize,
        families: Vec<CurvatureFamily>,
        thetas: Vec<f64>,
        eta: f64,
        seed: u64,
        grid_resolution: usize,
    ) -> Result<Self> {
        let n = families.len();
        let mut d = InstanceDescriptor {
            n,
            m,
            families,
            thetas,
            eta,
            seed,
            grid_resolution,
            instance_id: String::new(),
        };
        d.instance_id = d.canonical_id();
        d.validate()?;
        Ok(d)
    }

    /// Identifier derived from every field except the seed (seeds are
    /// themselves derived from the identifier).
    pub fn canonical_id(&self) -> String {
        let axes: Vec<String> = self
            .families
            .iter()
            .zip(&self.thetas)
            .map(|(f, t)| format!("{f}{t}"))
            .collect();
        format!(
            "n{}-m{}-{}-eta{}-r{}",
            self.n,
            self.m,
            axes.join("-"),
            self.eta,
            self.grid_resolution
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Argument("field `n` must be at least 1".into()));
        }
        if self.m <= self.n {
            return Err(Error::Argument(format!(
                "field `m` ({}) must exceed `n` ({})",
                self.m, self.n
            )));
        }
        if self.families.len() != self.n {
            return Err(Error::Argument(format!(
                "field `families` has {} entries, expected n = {}",
                self.families.len(),
                self.n
            )));
        }
        if self.thetas.len() != self.n {
            return Err(Error::Argument(format!(
                "field `thetas` has {} entries, expected n = {}",
                self.thetas.len(),
                self.n
            )));
        }
        if let Some(t) = self.thetas.iter().find(|t| !t.is_finite() || **t <= 0.0) {
            return Err(Error::Argument(format!(
                "field `thetas` contains {t}; values must be finite and positive"
            )));
        }
        if !self.eta.is_finite() || self.eta < 0.0 {
            return Err(Error::Argument(format!(
                "field `eta` must be finite and non-negative, got {}",
                self.eta
            )));
        }
        if self.grid_resolution < 4 {
            return Err(Error::Argument(format!(
                "field `grid_resolution` must be at least 4, got {}",
                self.grid_resolution
            )));
        }
        let expected = self.canonical_id();
        if self.instance_id != expected {
            return Err(Error::Argument(format!(
                "field `instance_id` is {:?}, expected {expected:?}",
                self.instance_id
            )));
        }
        Ok(())
    }

    pub fn curvature_specs(&self) -> Result<Vec<CurvatureSpec>> {
        self.families
            .iter()
            .zip(&self.thetas)
            .map(|(&f, &t)| CurvatureSpec::new(f, t))
            .collect()
    }

    pub fn grid(&self) -> Result<TensorGrid> {
        TensorGrid::unit(self.n, self.grid_resolution)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: InstanceDescriptor = serde_json::from_str(text)?;
        d.validate()?;
        Ok(d)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Whether any axis uses the flat family.
    pub fn has_flat_axis(&self) -> bool {
        self.families.contains(&CurvatureFamily::Flat)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Stable 64-bit seed for `label` under `base` (FNV-1a, then SplitMix64).
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(base ^ h)
}

/// Draws `R` from the Haar measure on SO(m): QR of a Gaussian matrix, column
/// signs fixed so that diag(R) > 0, then one column reflected if det = −1.
pub fn sample_special_orthogonal<G: Rng + ?Sized>(m: usize, rng: &mut G) -> Result<DMatrix<f64>> {
    if m < 1 {
        return Err(Error::Argument("rotation dimension must be at least 1".into()));
    }
    let gauss = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = gauss.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    Ok(q)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MakegenOptions {
    /// Replace the sampled rotation by the identity. The random stream is
    /// consumed identically either way.
    pub identity_rotation: bool,
}

/// A sampled generator Φ.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmersionMap {
    pub curves: Vec<ArcLengthCurve>,
    pub rotation: DMatrix<f64>,
    pub translation: DVector<f64>,
    pub descriptor: InstanceDescriptor,
}

pub fn makegen(descriptor: &InstanceDescriptor) -> Result<ImmersionMap> {
    makegen_with(descriptor, MakegenOptions::default())
}

pub fn makegen_with(descriptor: &InstanceDescriptor, opts: MakegenOptions) -> Result<ImmersionMap> {
    descriptor.validate()?;
    let curves = descriptor
        .curvature_specs()?
        .into_iter()
        .map(|spec| ArcLengthCurve::tabulate(spec, 1.0, DEFAULT_STEP))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(descriptor.seed);
    let m = descriptor.m;
    let sampled = sample_special_orthogonal(m, &mut rng)?;
    let rotation = if opts.identity_rotation {
        DMatrix::identity(m, m)
    } else {
        sampled
    };
    let translation = DVector::from_fn(m, |_, _| descriptor.eta * rng.sample::<f64, _>(StandardNormal));
    Ok(ImmersionMap {
        curves,
        rotation,
        translation,
        descriptor: descriptor.clone(),
    })
}

impl ImmersionMap {
    pub fn source_dim(&self) -> usize {
        self.curves.len()
    }

    pub fn target_dim(&self) -> usize {
        self.rotation.nrows()
    }

    /// Φ₀(x): the padded curves summed, before rotation and translation.
    pub fn unrotated(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.source_dim() {
            return Err(Error::Argument(format!(
                "point has dimension {}, expected {}",
                x.len(),
                self.source_dim()
            )));
        }
        let mut out = DVector::zeros(self.target_dim());
        for (i, (curve, &s)) in self.curves.iter().zip(x).enumerate() {
            let p = curve.point(s)?;
            out[i] += p[0];
            out[i + 1] += p[1];
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        Ok(&self.rotation * self.unrotated(x)? + &self.translation)
    }

    /// Analytic derivatives of Φ at `x`: `(J, H, T)` with
    /// `J[i]`, `H[i][i]`, `T[i][i][i]` the only non-zero partials, each an
    /// m-vector (Φ is a sum of one-variable functions).
    pub fn derivatives(&self, x: &[f64]) -> Result<Vec<[DVector<f64>; 3]>> {
        self.curves
            .iter()
            .zip(x)
            .enumerate()
            .map(|(i, (curve, &s))| {
                let d = curve.derivatives(s)?;
                let pad = |v: [f64; 2]| {
                    let mut p = DVector::zeros(self.target_dim());
                    p[i] = v[0];
                    p[i + 1] = v[1];
                    &self.rotation * p
                };
                Ok([pad(d[0]), pad(d[1]), pad(d[2])])
            })
            .collect()
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let cols: Vec<DVector<f64>> = self.derivatives(x)?.into_iter().map(|[d1, _, _]| d1).collect();
        Ok(DMatrix::from_columns(&cols))
    }

    /// Analytic pullback of the Euclidean metric, JᵀJ.
    pub fn pullback_metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(pullback_from_jacobian(&self.jacobian(x)?))
    }
}

/// Applies Φ to every row of `grid`, preserving row order.
pub fn evaluate_immersion(map: &ImmersionMap, grid: &PointCloud) -> Result<PointCloud> {
    if grid.dim() != map.source_dim() {
        return Err(Error::Argument(format!(
            "grid has dimension {}, map expects {}",
            grid.dim(),
            map.source_dim()
        )));
    }
    let m = map.target_dim();
    let mut data = Vec::with_capacity(grid.len() * m);
    for (k, x) in grid.rows().enumerate() {
        let y = map.eval(x).map_err(|e| match e {
            Error::Domain(msg) => Error::Domain(format!("row {k}: {msg}")),
            other => other,
        })?;
        data.extend(y.iter());
    }
    PointCloud::new(m, data)
}

/// The benchmark suite: every unordered pair of curvature families
/// (repetition allowed, 15 multisets) crossed with every ordered pair of
/// (θ₁, θ₂) ∈ {easy, hard}², giving 60 instances with n = 2, m = 7.
pub fn enumerate_suite(
    theta_easy: f64,
    theta_hard: f64,
    eta: f64,
    base_seed: u64,
    grid_resolution: usize,
) -> Result<Vec<InstanceDescriptor>> {
    let fams = CurvatureFamily::ALL;
    let thetas = [
        (theta_easy, theta_easy),
        (theta_easy, theta_hard),
        (theta_hard, theta_easy),
        (theta_hard, theta_hard),
    ];
    let mut out = Vec::with_capacity(60);
    for a in 0..fams.len() {
        for b in a..fams.len() {
            for &(t1, t2) in &thetas {
                let mut d = InstanceDescriptor::new(
                    SUITE_TARGET_DIM,
                    vec![fams[a], fams[b]],
                    vec![t1, t2],
                    eta,
                    0,
                    grid_resolution,
                )?;
                d.seed = derive_seed(base_seed, &d.instance_id);
                out.push(d);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use CurvatureFamily::*;

    fn descriptor(families: Vec<CurvatureFamily>, eta: f64, seed: u64) -> InstanceDescriptor {
        let n = families.len();
        InstanceDescriptor::new(7, families, vec![1.5; n], eta, seed, 8).unwrap()
    }

    #[test]
    fn so1_is_trivial() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            assert_eq!(sample_special_orthogonal(1, &mut rng).unwrap()[(0, 0)], 1.0);
        }
        assert!(sample_special_orthogonal(0, &mut rng).is_err());
    }

    #[test]
    fn rotations_are_special_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in 1..9 {
            for _ in 0..20 {
                let r = sample_special_orthogonal(m, &mut rng).unwrap();
                let err = (r.transpose() * &r - DMatrix::identity(m, m)).amax();
                assert!(err < 1e-10, "m={m} err={err}");
                assert!((r.determinant() - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn haar_entries_are_sign_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let trials = 10_000;
        let mean: f64 = (0..trials)
            .map(|_| sample_special_orthogonal(3, &mut rng).unwrap()[(0, 0)])
            .sum::<f64>()
            / trials as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn makegen_is_deterministic() {
        let d = descriptor(vec![Sine, Polyroll], 0.01, 99);
        let a = makegen(&d).unwrap();
        let b = makegen(&d).unwrap();
        assert_eq!(a, b);
        let grid = d.grid().unwrap().to_point_cloud();
        assert_eq!(
            evaluate_immersion(&a, &grid).unwrap(),
            evaluate_immersion(&b, &grid).unwrap()
        );
    }

    #[test]
    fn flat_flat_without_rotation_is_padded_identity() {
        let d = descriptor(vec![Flat, Flat], 0.0, 1);
        let map = makegen_with(
            &d,
            MakegenOptions {
                identity_rotation: true,
            },
        )
        .unwrap();
        let y = map.eval(&[0.3, 0.8]).unwrap();
        let expected = [0.3, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0];
        for (a, b) in y.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{y}");
        }
    }

    #[test]
    fn translation_scale_follows_eta() {
        let mut samples = Vec::new();
        for seed in 0..400u64 {
            let d = descriptor(vec![Flat, Circle], 0.01, seed);
            samples.extend(makegen(&d).unwrap().translation.iter().copied());
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let sd = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-3, "mean {mean}");
        assert!((sd - 0.01).abs() < 5e-4, "sd {sd}");
    }

    #[test]
    fn rotation_preserves_norms_when_untranslated() {
        let d = descriptor(vec![Logistic, Circle], 0.0, 5);
        let map = makegen(&d).unwrap();
        for x in [[0.1, 0.2], [0.5, 0.9], [1.0, 0.0]] {
            let a = map.eval(&x).unwrap().norm();
            let b = map.unrotated(&x).unwrap().norm();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_domain_row_is_named() {
        let d = descriptor(vec![Flat, Flat], 0.0, 1);
        let map = makegen(&d).unwrap();
        let grid = PointCloud::from_rows(&[[0.0, 0.0], [0.5, 1.5]]).unwrap();
        match evaluate_immersion(&map, &grid) {
            Err(Error::Domain(msg)) => assert!(msg.starts_with("row 1"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pullback_is_rotation_invariant_with_unit_diagonal() {
        let d = descriptor(vec![Polyroll, Sine], 0.0, 77);
        let rotated = makegen(&d).unwrap();
        let plain = makegen_with(
            &d,
            MakegenOptions {
                identity_rotation: true,
            },
        )
        .unwrap();
        let grid = d.grid().unwrap();
        for idx in 0..grid.len() {
            let x = grid.point(idx);
            let g1 = rotated.pullback_metric(&x).unwrap();
            let g0 = plain.pullback_metric(&x).unwrap();
            assert!((&g1 - &g0).amax() < 1e-8);
            for i in 0..2 {
                assert!((g0[(i, i)] - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn suite_has_sixty_instances() {
        let suite = enumerate_suite(THETA_EASY, THETA_HARD, DEFAULT_ETA, 7, 32).unwrap();
        assert_eq!(suite.len(), 60);
        assert!(suite.iter().all(|d| d.n == 2 && d.m == 7 && d.eta == 0.01));
        let flat_flat = suite.iter().filter(|d| d.families == vec![Flat, Flat]).count();
        assert_eq!(flat_flat, 4);
        let mut ids: Vec<_> = suite.iter().map(|d| d.instance_id.clone()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 60);
        let again = enumerate_suite(THETA_EASY, THETA_HARD, DEFAULT_ETA, 7, 32).unwrap();
        assert_eq!(suite, again);
        let other = enumerate_suite(THETA_EASY, THETA_HARD, DEFAULT_ETA, 8, 32).unwrap();
        assert_ne!(suite[0].seed, other[0].seed);
    }

    #[test]
    fn descriptor_json_roundtrip_and_validation() {
        let d = descriptor(vec![Sine, Flat], 0.01, 42);
        let text = d.to_json().unwrap();
        for key in [
            "\"n\"",
            "\"m\"",
            "\"families\"",
            "\"thetas\"",
            "\"eta\"",
            "\"seed\"",
            "\"grid_resolution\"",
            "\"instance_id\"",
            "\"sine\"",
        ] {
            assert!(text.contains(key), "{key} missing in {text}");
        }
        let back = InstanceDescriptor::from_json(&text).unwrap();
        assert_eq!(back, d);
        let grid = d.grid().unwrap().to_point_cloud();
        assert_eq!(
            evaluate_immersion(&makegen(&back).unwrap(), &grid).unwrap(),
            evaluate_immersion(&makegen(&d).unwrap(), &grid).unwrap()
        );

        let bad = text.replace("\"m\": 7", "\"m\": 2");
        match InstanceDescriptor::from_json(&bad) {
            Err(Error::Argument(msg)) => assert!(msg.contains("`m`"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = text.replace("\"sine\"", "\"spiral\"");
        assert!(InstanceDescriptor::from_json(&bad).is_err());
    }
}
