//! Seeded uniform random search over a declared hyperparameter space.
//!
//! A space is a JSON object mapping each name to either a range or a finite
//! set:
//!
//! ```json
//! { "perplexity": { "range": [5, 50] },
//!   "n_neighbors": { "range": [5, 50], "integer": true },
//!   "learning_rate": { "range": [10, 1000], "log": true },
//!   "metric": { "choice": ["euclidean", "cosine"] } }
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::report::EmbeddingScore;
use crate::error::{Error, Result};
use crate::reducers::{HyperValue, Hyperparameters};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ParamSpace {
    Range {
        range: [f64; 2],
        #[serde(default)]
        integer: bool,
        #[serde(default)]
        log: bool,
    },
    Choice {
        choice: Vec<HyperValue>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HyperSpace(pub BTreeMap<String, ParamSpace>);

impl HyperSpace {
    pub fn from_json(text: &str) -> Result<Self> {
        let space: HyperSpace = serde_json::from_str(text)?;
        space.validate()?;
        Ok(space)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in &self.0 {
            match p {
                ParamSpace::Range {
                    range: [lo, hi], log, ..
                } => {
                    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                        return Err(Error::Argument(format!("{name}: range [{lo}, {hi}] is invalid")));
                    }
                    if *log && *lo <= 0.0 {
                        return Err(Error::Argument(format!(
                            "{name}: log range needs a positive lower bound"
                        )));
                    }
                }
                ParamSpace::Choice { choice } if choice.is_empty() => {
                    return Err(Error::Argument(format!("{name}: empty choice set")));
                }
                ParamSpace::Choice { .. } => {}
            }
        }
        Ok(())
    }

    /// One uniform draw; names are visited in sorted order.
    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> Hyperparameters {
        self.0
            .iter()
            .map(|(name, p)| {
                let v = match p {
                    ParamSpace::Range {
                        range: [lo, hi],
                        integer,
                        log,
                    } => {
                        let u: f64 = rng.random();
                        let mut v = if *log {
                            (lo.ln() + u * (hi.ln() - lo.ln())).exp()
                        } else {
                            lo + u * (hi - lo)
                        };
                        if *integer {
                            v = v.round().clamp(lo.ceil(), hi.floor());
                        }
                        HyperValue::Number(v.clamp(*lo, *hi))
                    }
                    ParamSpace::Choice { choice } => choice[rng.random_range(0..choice.len())].clone(),
                };
                (name.clone(), v)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Minimize the curvature score.
    Score,
    /// Maximize the neighborhood preservation ratio.
    Npr,
}

impl Objective {
    pub fn value(self, s: &EmbeddingScore) -> f64 {
        match self {
            Objective::Score => s.curvature_score,
            Objective::Npr => s.npr,
        }
    }

    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Objective::Score => a < b,
            Objective::Npr => a > b,
        }
    }
}

impl FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "score" => Ok(Objective::Score),
            "npr" => Ok(Objective::Npr),
            _ => Err(Error::Argument(format!(
                "unknown objective {s:?} (expected score or npr)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub hyperparameters: Hyperparameters,
    pub value: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub best: Hyperparameters,
    pub best_value: f64,
    pub objective: Objective,
    pub budget: usize,
    pub seed: u64,
    pub trials: Vec<Trial>,
}

/// Evaluates `budget` seeded draws from `space` and keeps the best; ties go
/// to the earliest draw and failed evaluations never win.
pub fn random_search(
    space: &HyperSpace,
    budget: usize,
    objective: Objective,
    seed: u64,
    mut evaluate: impl FnMut(&Hyperparameters) -> Result<EmbeddingScore>,
) -> Result<TuneOutcome> {
    if budget < 1 {
        return Err(Error::Argument("budget must be at least 1".into()));
    }
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Hyperparameters> = (0..budget).map(|_| space.sample(&mut rng)).collect();
    let mut trials = Vec::with_capacity(budget);
    let mut best: Option<(usize, f64)> = None;
    for (i, hp) in draws.into_iter().enumerate() {
        let (value, error) = match evaluate(&hp) {
            Ok(s) if objective.value(&s).is_finite() => (Some(objective.value(&s)), None),
            Ok(s) => (None, Some(format!("non-finite objective {}", objective.value(&s)))),
            Err(e) => (None, Some(e.to_string())),
        };
        if let Some(v) = value {
            if best.is_none_or(|(_, b)| objective.better(v, b)) {
                best = Some((i, v));
            }
        }
        trials.push(Trial {
            hyperparameters: hp,
            value,
            error,
        });
    }
    let (i, best_value) = best.ok_or_else(|| {
        Error::Tuning(format!(
            "all {budget} evaluations failed; first error: {}",
            trials[0].error.as_deref().unwrap_or("unknown")
        ))
    })?;
    Ok(TuneOutcome {
        best: trials[i].hyperparameters.clone(),
        best_value,
        objective,
        budget,
        seed,
        trials,
    })
}
