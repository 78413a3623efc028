//! Plane curves with a prescribed curvature function.
//!
//! A curvature function κ(s) determines a unit-speed plane curve up to a
//! rigid motion:
//!
//! ```text
//! α(s) = ∫₀ˢ κ(u) du,      γ(s) = ( ∫₀ˢ cos α(t) dt, ∫₀ˢ sin α(t) dt )
//! ```
//!
//! With all integration base points at zero, γ(0) = (0, 0) and γ'(0) = (1, 0).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quadrature step used to tabulate curves.
pub const DEFAULT_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurvatureFamily {
    Logistic,
    Polyroll,
    Sine,
    Circle,
    Flat,
}

impl CurvatureFamily {
    pub const ALL: [CurvatureFamily; 5] = [
        CurvatureFamily::Logistic,
        CurvatureFamily::Polyroll,
        CurvatureFamily::Sine,
        CurvatureFamily::Circle,
        CurvatureFamily::Flat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CurvatureFamily::Logistic => "logistic",
            CurvatureFamily::Polyroll => "polyroll",
            CurvatureFamily::Sine => "sine",
            CurvatureFamily::Circle => "circle",
            CurvatureFamily::Flat => "flat",
        }
    }
}

impl fmt::Display for CurvatureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CurvatureFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CurvatureFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| {
                Error::Argument(format!(
                    "unknown curvature family {s:?} (expected one of logistic, polyroll, sine, circle, flat)"
                ))
            })
    }
}

/// A curvature family together with its growth parameter θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSpec {
    family: CurvatureFamily,
    theta: f64,
}

impl CurvatureSpec {
    pub fn new(family: CurvatureFamily, theta: f64) -> Result<Self> {
        if !theta.is_finite() || theta <= 0.0 {
            return Err(Error::Argument(format!(
                "theta must be finite and positive, got {theta}"
            )));
        }
        Ok(CurvatureSpec { family, theta })
    }

    pub fn family(&self) -> CurvatureFamily {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// κ(s) without the finiteness check on `s`.
    fn eval(&self, s: f64) -> f64 {
        let t = self.theta;
        match self.family {
            CurvatureFamily::Logistic => 10.0 * t / (1.0 + (-0.5 * s).exp()),
            CurvatureFamily::Polyroll => 4.0 * t * (s + 1.0).powf(2.0 * t),
            CurvatureFamily::Sine => (5.0 + 10.0 * (t - 1.0)) * (2.0 * PI * s).sin(),
            CurvatureFamily::Circle => 2.0 * PI * t,
            CurvatureFamily::Flat => 0.0,
        }
    }

    /// dκ/ds.
    fn eval_derivative(&self, s: f64) -> f64 {
        let t = self.theta;
        match self.family {
            CurvatureFamily::Logistic => {
                let e = (-0.5 * s).exp();
                10.0 * t * 0.5 * e / ((1.0 + e) * (1.0 + e))
            }
            CurvatureFamily::Polyroll => 8.0 * t * t * (s + 1.0).powf(2.0 * t - 1.0),
            CurvatureFamily::Sine => (5.0 + 10.0 * (t - 1.0)) * 2.0 * PI * (2.0 * PI * s).cos(),
            CurvatureFamily::Circle | CurvatureFamily::Flat => 0.0,
        }
    }
}

fn check_finite(s: f64) -> Result<()> {
    if s.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("arc-length parameter must be finite, got {s}")))
    }
}

/// Closed-form value κ(s) of the family.
pub fn curvature_value(spec: &CurvatureSpec, s: f64) -> Result<f64> {
    check_finite(s)?;
    let k = spec.eval(s);
    if k.is_finite() {
        Ok(k)
    } else {
        Err(Error::Domain(format!(
            "{} curvature is undefined at s = {s}",
            spec.family
        )))
    }
}

/// ∫ₐᵇ κ by a single Simpson panel.
fn simpson_panel(spec: &CurvatureSpec, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (spec.eval(a) + 4.0 * spec.eval(0.5 * (a + b)) + spec.eval(b))
}

/// Turning angle α(s) = ∫₀ˢ κ(u) du by composite Simpson with step `DEFAULT_STEP`.
pub fn turning_angle(spec: &CurvatureSpec, s: f64) -> Result<f64> {
    check_finite(s)?;
    let panels = (s.abs() / DEFAULT_STEP).ceil().max(1.0) as usize;
    let h = s / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        acc += simpson_panel(spec, k as f64 * h, (k + 1) as f64 * h);
    }
    if acc.is_finite() {
        Ok(acc)
    } else {
        Err(Error::Domain(format!(
            "{} curvature is not integrable on [0, {s}]",
            spec.family
        )))
    }
}

/// A unit-speed curve tabulated on a uniform arc-length lattice `0, h, 2h, …`.
///
/// Off-lattice queries integrate one partial Simpson panel from the
/// preceding lattice node, so accuracy does not degrade between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcLengthCurve {
    spec: CurvatureSpec,
    step: f64,
    s_max: f64,
    angles: Vec<f64>,
    points: Vec<[f64; 2]>,
}

impl ArcLengthCurve {
    /// Tabulates the curve over `[0, s_max]` with quadrature step `step`.
    pub fn tabulate(spec: CurvatureSpec, s_max: f64, step: f64) -> Result<Self> {
        if !s_max.is_finite() || s_max <= 0.0 {
            return Err(Error::Argument(format!(
                "curve length must be finite and positive, got {s_max}"
            )));
        }
        if !step.is_finite() || step <= 0.0 {
            return Err(Error::Argument(format!("invalid quadrature step {step}")));
        }
        let nodes = (s_max / step).ceil() as usize + 1;
        let mut angles = Vec::with_capacity(nodes);
        let mut points = Vec::with_capacity(nodes);
        angles.push(0.0);
        points.push([0.0, 0.0]);
        for k in 0..nodes - 1 {
            let a = k as f64 * step;
            let b = (k + 1) as f64 * step;
            let mid = 0.5 * (a + b);
            let alpha_a = angles[k];
            let alpha_mid = alpha_a + simpson_panel(&spec, a, mid);
            let alpha_b = alpha_a + simpson_panel(&spec, a, b);
            let p = points[k];
            let w = step / 6.0;
            points.push([
                p[0] + w * (alpha_a.cos() + 4.0 * alpha_mid.cos() + alpha_b.cos()),
                p[1] + w * (alpha_a.sin() + 4.0 * alpha_mid.sin() + alpha_b.sin()),
            ]);
            angles.push(alpha_b);
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::Domain(format!(
                "{} curvature is not integrable on [0, {s_max}]",
                spec.family
            )));
        }
        Ok(ArcLengthCurve {
            spec,
            step,
            s_max: s_max.max((nodes - 1) as f64 * step),
            angles,
            points,
        })
    }

    pub fn spec(&self) -> &CurvatureSpec {
        &self.spec
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Upper end of the queryable arc-length interval.
    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    /// Lattice nodes `(s_k, γ(s_k))`.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, [f64; 2])> + '_ {
        self.points.iter().enumerate().map(|(k, p)| (k as f64 * self.step, *p))
    }

    fn locate(&self, s: f64) -> Result<(usize, f64)> {
        check_finite(s)?;
        if s < 0.0 || s > self.s_max {
            return Err(Error::Domain(format!(
                "arc length {s} outside curve domain [0, {}]",
                self.s_max
            )));
        }
        let k = ((s / self.step).floor() as usize).min(self.points.len() - 1);
        Ok((k, s - k as f64 * self.step))
    }

    /// Turning angle α(s).
    pub fn angle(&self, s: f64) -> Result<f64> {
        let (k, delta) = self.locate(s)?;
        let a = k as f64 * self.step;
        Ok(self.angles[k] + simpson_panel(&self.spec, a, a + delta))
    }

    /// γ(s).
    pub fn point(&self, s: f64) -> Result<[f64; 2]> {
        let (k, delta) = self.locate(s)?;
        if delta == 0.0 {
            return Ok(self.points[k]);
        }
        let a = k as f64 * self.step;
        let alpha_a = self.angles[k];
        let alpha_mid = alpha_a + simpson_panel(&self.spec, a, a + 0.5 * delta);
        let alpha_b = alpha_a + simpson_panel(&self.spec, a, a + delta);
        let p = self.points[k];
        let w = delta / 6.0;
        Ok([
            p[0] + w * (alpha_a.cos() + 4.0 * alpha_mid.cos() + alpha_b.cos()),
            p[1] + w * (alpha_a.sin() + 4.0 * alpha_mid.sin() + alpha_b.sin()),
        ])
    }

    /// Derivatives γ', γ'', γ''' at `s`, from α and the closed-form κ, κ'.
    pub fn derivatives(&self, s: f64) -> Result<[[f64; 2]; 3]> {
        let alpha = self.angle(s)?;
        let (sin, cos) = alpha.sin_cos();
        let k = self.spec.eval(s);
        let dk = self.spec.eval_derivative(s);
        let tangent = [cos, sin];
        let normal = [-sin, cos];
        Ok([
            tangent,
            [k * normal[0], k * normal[1]],
            [dk * normal[0] - k * k * tangent[0], dk * normal[1] - k * k * tangent[1]],
        ])
    }
}

/// Samples of a reconstructed curve at caller-chosen arc lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneCurve {
    pub s_values: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub spec: CurvatureSpec,
    /// Integration base points (a1, a2, b); always zero here.
    pub base_points: (f64, f64, f64),
}

/// Reconstructs γ_κ at each of `s_grid`, which must be strictly increasing,
/// start at or above 0 and reach at least 1.
pub fn reconstruct_curve(spec: CurvatureSpec, s_grid: &[f64]) -> Result<PlaneCurve> {
    if s_grid.len() < 2 {
        return Err(Error::Argument("s grid needs at least two values".into()));
    }
    if s_grid.iter().any(|s| !s.is_finite()) {
        return Err(Error::Domain("s grid contains non-finite values".into()));
    }
    if let Some(w) = s_grid.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::Argument(format!(
            "s grid must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    if s_grid[0] < 0.0 {
        return Err(Error::Domain(format!("s grid starts below 0 ({})", s_grid[0])));
    }
    let s_max = s_grid[s_grid.len() - 1].max(1.0);
    let curve = ArcLengthCurve::tabulate(spec, s_max, DEFAULT_STEP)?;
    let points = s_grid.iter().map(|&s| curve.point(s)).collect::<Result<Vec<_>>>()?;
    Ok(PlaneCurve {
        s_values: s_grid.to_vec(),
        points,
        spec,
        base_points: (0.0, 0.0, 0.0),
    })
}
