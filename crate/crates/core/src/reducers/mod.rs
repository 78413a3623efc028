//! Dimensionality reducers and the neighborhood-preservation baseline.
//!
//! Built-in reducers are PCA, truncated SVD and metric MDS. Anything else
//! (ISOMAP, t-SNE, UMAP, ...) runs as an external command speaking a small
//! CSV protocol, see [`external`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PointCloud;

pub mod external;
pub mod linear;
pub mod mds;
pub mod npr;

pub use external::{run_external_reducer, ExternalOptions};
pub use linear::{pca_project, truncated_svd_project};
pub use mds::{mds_project, smacof, SmacofOutcome};
pub use npr::npr;

/// A hyperparameter value: reducers receive these as text placeholders or
/// read the numeric ones directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HyperValue {
    Number(f64),
    Text(String),
}

impl fmt::Display for HyperValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperValue::Number(v) => write!(f, "{v}"),
            HyperValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for HyperValue {
    fn from(v: f64) -> Self {
        HyperValue::Number(v)
    }
}

impl From<&str> for HyperValue {
    fn from(s: &str) -> Self {
        HyperValue::Text(s.to_string())
    }
}

pub type Hyperparameters = BTreeMap<String, HyperValue>;

/// Output of one reducer run. Row `i` of `y` is the image of input row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingResult {
    pub y: PointCloud,
    pub method: String,
    pub hyperparameters: Hyperparameters,
    /// Seconds.
    pub wall_time: f64,
    /// Captured child output (external reducers only).
    pub stdout: String,
    pub stderr: String,
}

impl EmbeddingResult {
    pub(crate) fn builtin(
        y: PointCloud,
        method: &str,
        hyperparameters: Hyperparameters,
        wall_time: f64,
    ) -> Result<Self> {
        check_finite(&y, method)?;
        Ok(EmbeddingResult {
            y,
            method: method.to_string(),
            hyperparameters,
            wall_time,
            stdout: String::new(),
            stderr: String::new(),
        })
    }
}

pub(crate) fn check_finite(y: &PointCloud, method: &str) -> Result<()> {
    match y.as_slice().iter().position(|v| !v.is_finite()) {
        Some(p) => Err(Error::Argument(format!(
            "{method}: non-finite output at row {}",
            p / y.dim().max(1)
        ))),
        None => Ok(()),
    }
}

pub(crate) fn check_target_dim(x: &PointCloud, k: usize) -> Result<()> {
    let max = x.len().min(x.dim());
    if k < 1 || k > max {
        return Err(Error::Argument(format!(
            "target dimension k = {k} must lie in 1..={max} for a {}x{} input",
            x.len(),
            x.dim()
        )));
    }
    Ok(())
}
