use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use curvebench::bench::generate_dataset;
use curvebench::curve::{
    curvature_value, reconstruct_curve, turning_angle, ArcLengthCurve, CurvatureFamily, CurvatureSpec, DEFAULT_STEP,
};
use curvebench::estimation::{curvature_score, estimate_curvature, EstimationConfig};
use curvebench::geometry::{geometry_from_jet, MetricJet, SectionalMode, Tensor3, Tensor4};
use curvebench::grid::{PointCloud, TensorGrid};
use curvebench::manifold::{enumerate_suite, makegen, sample_special_orthogonal, InstanceDescriptor, MakegenOptions};

fn spec(f: CurvatureFamily, t: f64) -> CurvatureSpec {
    CurvatureSpec::new(f, t).unwrap()
}

#[test]
fn closed_form_curves() {
    let s: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let flat = reconstruct_curve(spec(CurvatureFamily::Flat, 1.0), &s).unwrap();
    for (p, &si) in flat.points.iter().zip(&s) {
        assert!((p[0] - si).abs() < 1e-12 && p[1].abs() < 1e-15);
    }
    let c = 2.0 * PI * 1.5;
    let circle = reconstruct_curve(spec(CurvatureFamily::Circle, 1.5), &s).unwrap();
    for (p, &si) in circle.points.iter().zip(&s) {
        assert!((p[0] - (c * si).sin() / c).abs() < 1e-9);
        assert!((p[1] - (1.0 - (c * si).cos()) / c).abs() < 1e-9);
    }
}

#[test]
fn curvature_families_match_their_definitions() {
    let s: f64 = 0.37;
    let t = 1.4;
    let cases = [
        (CurvatureFamily::Logistic, 10.0 * t / (1.0 + (-0.5 * s).exp())),
        (CurvatureFamily::Polyroll, 4.0 * t * (s + 1.0f64).powf(2.0 * t)),
        (CurvatureFamily::Sine, (5.0 + 10.0 * (t - 1.0)) * (2.0 * PI * s).sin()),
        (CurvatureFamily::Circle, 2.0 * PI * t),
        (CurvatureFamily::Flat, 0.0),
    ];
    for (f, want) in cases {
        assert!((curvature_value(&spec(f, t), s).unwrap() - want).abs() < 1e-12, "{f}");
    }
}

fn max_curvature(sp: &CurvatureSpec) -> f64 {
    (0..=1000)
        .map(|i| curvature_value(sp, i as f64 / 1000.0).unwrap().abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn turning_angle_integrates_curvature(fi in 0usize..5, t in 0.5f64..2.0, s in 0.01f64..0.99) {
        let sp = spec(CurvatureFamily::ALL[fi], t);
        let h = 1e-5;
        let fd = (turning_angle(&sp, s + h).unwrap() - turning_angle(&sp, s - h).unwrap()) / (2.0 * h);
        let k = curvature_value(&sp, s).unwrap();
        prop_assert!((fd - k).abs() < 1e-5 * k.abs().max(1.0));
    }

    // A chord of a unit-speed curve with curvature κ falls short of the arc by
    // about κ²h²/24, so the 10·h² bound is attainable only while
    // max |κ| < √240 ≈ 15.5. Spec draws violating that are skipped.
    #[test]
    fn lattice_is_unit_speed_where_attainable(fi in 0usize..5, t in 0.3f64..2.0) {
        let sp = spec(CurvatureFamily::ALL[fi], t);
        prop_assume!(max_curvature(&sp) < 15.0);
        let curve = ArcLengthCurve::tabulate(sp, 1.0, DEFAULT_STEP).unwrap();
        let h = curve.step();
        let nodes: Vec<[f64; 2]> = curve.nodes().map(|(_, p)| p).collect();
        for w in nodes.windows(2) {
            let chord = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            prop_assert!((chord / h - 1.0).abs() < 10.0 * h * h);
        }
    }

    #[test]
    fn off_lattice_points_match_tangents(fi in 0usize..5, t in 0.5f64..2.0, s in 0.0f64..0.999) {
        let sp = spec(CurvatureFamily::ALL[fi], t);
        let curve = ArcLengthCurve::tabulate(sp, 1.0, DEFAULT_STEP).unwrap();
        let d = 1e-4;
        let (a, b) = (curve.point(s).unwrap(), curve.point(s + d).unwrap());
        let tangent = curve.derivatives(s + d / 2.0).unwrap()[0];
        // Central-difference error is |γ'''| d²/24 with |γ'''| ≤ κ² + |κ'|,
        // and |κ'| ≤ 8 max|κ| for every family on [0, 1].
        let k = max_curvature(&sp);
        let tol = 1e-8 + (k * k + 8.0 * k) * d * d / 12.0;
        prop_assert!(((b[0] - a[0]) / d - tangent[0]).abs() < tol);
        prop_assert!(((b[1] - a[1]) / d - tangent[1]).abs() < tol);
    }
}

#[test]
fn suite_generators_keep_unit_speed_along_each_axis() {
    // Each axis follows a unit-speed curve. The two curves share ambient
    // coordinate 1, so only the diagonal of the pullback is pinned to 1.
    let suite = enumerate_suite(1.2, 1.8, 0.01, 4, 8).unwrap();
    for d in suite.iter().step_by(7) {
        let map = makegen(d).unwrap();
        for x in [[0.1, 0.2], [0.5, 0.5], [0.9, 0.33]] {
            let g = map.pullback_metric(&x).unwrap();
            assert!(
                (g[(0, 0)] - 1.0).abs() < 1e-9 && (g[(1, 1)] - 1.0).abs() < 1e-9,
                "{}",
                d.instance_id
            );
        }
    }
}

#[test]
fn flat_flat_padding_without_rotation() {
    let d = InstanceDescriptor::new(7, vec![CurvatureFamily::Flat; 2], vec![1.0, 1.0], 0.0, 3, 8).unwrap();
    let x = generate_dataset(
        &d,
        MakegenOptions {
            identity_rotation: true,
        },
    )
    .unwrap();
    let grid = d.grid().unwrap().to_point_cloud();
    for (row, g) in x.rows().zip(grid.rows()) {
        // Axis 0 runs along ambient 0, axis 1 along ambient 1.
        assert!((row[0] - g[0]).abs() < 1e-12 && (row[1] - g[1]).abs() < 1e-12);
        assert!(row[2..].iter().all(|&v| v == 0.0));
    }
}

#[test]
fn analytic_jets_give_constant_curvature() {
    // Sphere of radius 2 in geodesic polar coordinates: g = diag(1, 4 sin²(x/2)).
    for x in [0.8, 1.5, 2.4] {
        let (s, c) = ((x / 2.0f64).sin(), (x / 2.0f64).cos());
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0 * s * s]);
        // dg(i, j, k) = ∂ₖ g_ij and d2g(i, j, k, l) = ∂ₖ∂ₗ g_ij.
        let dg = Tensor3::from_fn(2, |i, j, k| if (i, j, k) == (1, 1, 0) { 4.0 * s * c } else { 0.0 });
        let d2g = Tensor4::from_fn(2, |i, j, k, l| {
            if (i, j, k, l) == (1, 1, 0, 0) {
                2.0 * (c * c - s * s)
            } else {
                0.0
            }
        });
        let pg = geometry_from_jet(&MetricJet { g, dg, d2g }, SectionalMode::Standard).unwrap();
        assert!((pg.sectional[0] - 0.25).abs() < 1e-12);
    }
}

fn sphere_patch(res: usize, rot_seed: Option<u64>) -> (TensorGrid, PointCloud) {
    let grid = TensorGrid::unit(2, res).unwrap();
    let rot = rot_seed.map(|s| sample_special_orthogonal(3, &mut ChaCha8Rng::seed_from_u64(s)).unwrap());
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .map(|i| {
            let p = grid.point(i);
            let (u, v) = (1.0 + p[0], p[1]);
            let q = [u.sin() * v.cos(), u.sin() * v.sin(), u.cos()];
            match &rot {
                Some(r) => (0..3).map(|a| (0..3).map(|b| r[(a, b)] * q[b]).sum()).collect(),
                None => q.to_vec(),
            }
        })
        .collect();
    (grid, PointCloud::from_rows(&rows).unwrap())
}

#[test]
fn both_estimators_find_the_unit_sphere() {
    let (grid, x) = sphere_patch(32, None);
    for config in [EstimationConfig::default(), EstimationConfig::function_spline()] {
        let config = EstimationConfig {
            rescale_output: false,
            ..config
        };
        let est = estimate_curvature(&grid, &x, &config).unwrap();
        for (_, k) in est.interior_values(config.trim) {
            assert!((k[0] - 1.0).abs() < 0.01, "{:?}: {}", config.method, k[0]);
        }
    }
}

#[test]
fn raw_scores_are_rigid_motion_invariant() {
    // The rescaled score is not: the bounding box depends on orientation.
    let (grid, a) = sphere_patch(24, None);
    let (_, b) = sphere_patch(24, Some(8));
    for config in [EstimationConfig::default(), EstimationConfig::function_spline()] {
        let sa = curvature_score(&grid, &a, &config).unwrap().score_raw;
        let sb = curvature_score(&grid, &b, &config).unwrap().score_raw;
        assert!((sa - sb).abs() < 1e-8 * sa, "{sa} vs {sb}");
    }
}

#[test]
fn paper_sqrt_mode_differs_only_by_the_denominator() {
    let (grid, x) = sphere_patch(24, None);
    let std_cfg = EstimationConfig {
        rescale_output: false,
        ..Default::default()
    };
    let sqrt_cfg = EstimationConfig {
        mode: SectionalMode::PaperSqrt,
        ..std_cfg
    };
    let a = estimate_curvature(&grid, &x, &std_cfg).unwrap();
    let b = estimate_curvature(&grid, &x, &sqrt_cfg).unwrap();
    // For the unit-sphere chart D = sin²u, so K = 1 while K_sqrt = sin u,
    // which ranges over [0.84, 1] on this patch.
    for ((i, ka), (_, kb)) in a.interior_values(2).into_iter().zip(b.interior_values(2)) {
        let u = 1.0 + grid.point(i)[0];
        assert!((ka[0] - 1.0).abs() < 5e-3, "{}", ka[0]);
        assert!((kb[0] - u.sin()).abs() < 5e-3, "{} vs {}", kb[0], u.sin());
    }
}
