//! Reducer selection.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PointCloud;
use crate::reducers::mds::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::reducers::{
    mds_project, pca_project, run_external_reducer, truncated_svd_project, EmbeddingResult, ExternalOptions,
    HyperValue, Hyperparameters,
};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum MethodSpec {
    Pca,
    Tsvd,
    Mds,
    /// A command template for the subprocess protocol.
    External(String),
}

impl MethodSpec {
    pub const BUILTIN: [&'static str; 3] = ["pca", "tsvd", "mds"];

    /// File-system safe label.
    pub fn slug(&self) -> String {
        match self {
            MethodSpec::External(cmd) => {
                let h = crate::manifold::derive_seed(0, cmd);
                format!("external-{h:016x}")
            }
            other => other.to_string(),
        }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::Pca => f.write_str("pca"),
            MethodSpec::Tsvd => f.write_str("tsvd"),
            MethodSpec::Mds => f.write_str("mds"),
            MethodSpec::External(cmd) => write!(f, "external:{cmd}"),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(MethodSpec::Pca),
            "tsvd" => Ok(MethodSpec::Tsvd),
            "mds" => Ok(MethodSpec::Mds),
            _ => match s.strip_prefix("external:") {
                Some(cmd) if !cmd.trim().is_empty() => Ok(MethodSpec::External(cmd.to_string())),
                _ => Err(Error::Argument(format!(
                    "unknown method {s:?}; valid methods are pca, tsvd, mds, external:<command>"
                ))),
            },
        }
    }
}

impl From<MethodSpec> for String {
    fn from(m: MethodSpec) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for MethodSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone)]
pub struct ReducerSettings {
    pub timeout: Duration,
    /// Working directory for external commands.
    pub workdir: PathBuf,
}

impl ReducerSettings {
    pub fn new(workdir: impl Into<PathBuf>) -> Self {
        ReducerSettings {
            timeout: Duration::from_secs(600),
            workdir: workdir.into(),
        }
    }
}

fn number(hp: &Hyperparameters, key: &str, default: f64) -> Result<f64> {
    match hp.get(key) {
        None => Ok(default),
        Some(HyperValue::Number(v)) => Ok(*v),
        Some(HyperValue::Text(t)) => t
            .parse()
            .map_err(|_| Error::Argument(format!("hyperparameter {key} = {t:?} is not a number"))),
    }
}

/// Runs `method` on `x`. External commands receive `seed` as a
/// hyperparameter; the built-in reducers are deterministic and ignore it.
pub fn run_reducer(
    method: &MethodSpec,
    x: &PointCloud,
    k: usize,
    hyperparameters: &Hyperparameters,
    seed: u64,
    settings: &ReducerSettings,
) -> Result<EmbeddingResult> {
    match method {
        MethodSpec::Pca => pca_project(x, k),
        MethodSpec::Tsvd => truncated_svd_project(x, k),
        MethodSpec::Mds => {
            let max_iter = number(hyperparameters, "max_iter", DEFAULT_MAX_ITER as f64)?;
            if !(max_iter >= 1.0 && max_iter.fract() == 0.0) {
                return Err(Error::Argument(format!(
                    "max_iter = {max_iter} must be a positive integer"
                )));
            }
            let tol = number(hyperparameters, "tol", DEFAULT_TOL)?;
            mds_project(x, k, max_iter as usize, tol)
        }
        MethodSpec::External(cmd) => {
            let mut hp = hyperparameters.clone();
            hp.insert("seed".into(), HyperValue::Text(seed.to_string()));
            let opts = ExternalOptions {
                timeout: settings.timeout,
                workdir: settings.workdir.clone(),
            };
            let mut out = run_external_reducer(cmd, x, k, &hp, &opts)?;
            out.method = method.to_string();
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        for s in ["pca", "tsvd", "mds", "external:python umap.py {input} {output} {k}"] {
            assert_eq!(s.parse::<MethodSpec>().unwrap().to_string(), s);
        }
        let err = "isomap".parse::<MethodSpec>().unwrap_err().to_string();
        assert!(err.contains("pca, tsvd, mds"));
        assert!("external:".parse::<MethodSpec>().is_err());
    }
}
