//! Score reports and their aggregation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{curvature_score, EstimationConfig};
use crate::grid::PointCloud;
use crate::io::format_f64;
use crate::manifold::InstanceDescriptor;
use crate::reducers::{npr, Hyperparameters};

/// Largest tolerated fraction of interior nodes with estimator issues.
pub const MAX_DEGENERATE_RATE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingScore {
    /// 𝒦 of the normalized embedding.
    pub curvature_score: f64,
    /// 𝒦 of the embedding as given.
    pub curvature_score_raw: f64,
    pub npr: f64,
    pub degenerate_nodes: usize,
    pub interior_nodes: usize,
}

/// Scores embedding `y` of the dataset `x` sampled on `descriptor`'s grid.
pub fn score_embedding(
    descriptor: &InstanceDescriptor,
    x: &PointCloud,
    y: &PointCloud,
    config: &EstimationConfig,
    kn: usize,
) -> Result<EmbeddingScore> {
    let grid = descriptor.grid()?;
    if y.len() != grid.len() || x.len() != grid.len() {
        return Err(Error::Argument(format!(
            "row mismatch: grid has {} nodes, dataset {} rows, embedding {} rows",
            grid.len(),
            x.len(),
            y.len()
        )));
    }
    let cs = curvature_score(&grid, y, config)?;
    if cs.degenerate_rate() > MAX_DEGENERATE_RATE {
        return Err(Error::Scoring(format!(
            "{} of {} interior nodes are degenerate; the embedding is too collapsed to assess",
            cs.degenerate_nodes, cs.interior_nodes
        )));
    }
    Ok(EmbeddingScore {
        curvature_score: cs.score,
        curvature_score_raw: cs.score_raw,
        npr: npr(x, y, kn)?,
        degenerate_nodes: cs.degenerate_nodes,
        interior_nodes: cs.interior_nodes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub master: u64,
    pub instance: u64,
    pub run: u64,
}

/// One (instance, method, repeat) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub instance_id: String,
    pub method: String,
    pub repeat: usize,
    pub hyperparameters: Hyperparameters,
    pub estimator: EstimationConfig,
    pub kn: usize,
    pub status: RunStatus,
    #[serde(flatten)]
    pub score: Option<EmbeddingScore>,
    pub error: Option<String>,
    pub seeds: RunSeeds,
    pub wall_time_reduce: Option<f64>,
    pub wall_time_score: Option<f64>,
    /// Trials of the hyperparameter search, when one ran.
    pub tuning_budget: Option<usize>,
    pub stdout: String,
    pub stderr: String,
}

impl ScoreReport {
    pub fn curvature_score(&self) -> Option<f64> {
        self.score.as_ref().map(|s| s.curvature_score)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }
}

pub const SUMMARY_COLUMNS: [&str; 7] = ["instance_id", "method", "repeat", "score", "score_raw", "npr", "status"];

/// The per-run table. Wall times are left out so that identical runs give
/// identical bytes.
pub fn write_summary_csv<W: std::io::Write>(out: W, reports: &[ScoreReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for r in reports {
        let (score, raw, npr) = match &r.score {
            Some(s) => (
                format_f64(s.curvature_score),
                format_f64(s.curvature_score_raw),
                format_f64(s.npr),
            ),
            None => Default::default(),
        };
        let status = match r.status {
            RunStatus::Ok => "ok",
            RunStatus::Failed => "failed",
        };
        w.write_record([
            r.instance_id.as_str(),
            r.method.as_str(),
            &r.repeat.to_string(),
            &score,
            &raw,
            &npr,
            status,
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One row of a summary CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub instance_id: String,
    pub method: String,
    pub repeat: usize,
    pub score: Option<f64>,
    pub status: RunStatus,
}

pub fn read_summary_csv<R: std::io::Read>(input: R) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_reader(input);
    let head = r.headers()?.clone();
    if head.iter().collect::<Vec<_>>() != SUMMARY_COLUMNS {
        return Err(Error::Argument(format!(
            "summary header must be {}",
            SUMMARY_COLUMNS.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Argument(format!("summary row {i}: bad {what}"));
        let score = match &rec[3] {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad("score"))?),
        };
        let status = match &rec[6] {
            "ok" => RunStatus::Ok,
            "failed" => RunStatus::Failed,
            _ => return Err(bad("status")),
        };
        rows.push(SummaryRow {
            instance_id: rec[0].to_string(),
            method: rec[1].to_string(),
            repeat: rec[2].parse().map_err(|_| bad("repeat"))?,
            score,
            status,
        });
    }
    Ok(rows)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Distribution {
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Distribution {
            min: *v.first()?,
            q1: quantile(&v, 0.25)?,
            median: quantile(&v, 0.5)?,
            q3: quantile(&v, 0.75)?,
            max: *v.last()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub runs: usize,
    pub failures: usize,
    pub score: Option<Distribution>,
    /// Median over instances with at least one flat axis.
    pub median_flat: Option<f64>,
    /// Median over instances whose axes are all curved.
    pub median_curved: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMedian {
    /// Curvature families of the two axes, e.g. `flat+sine`.
    pub family_pair: String,
    pub method: String,
    pub median: Option<f64>,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub master_seed: u64,
    pub repeats: usize,
    pub methods: Vec<String>,
    pub instances: Vec<String>,
    pub estimator: EstimationConfig,
    pub kn: usize,
    pub tuning_budget: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub methods: Vec<MethodSummary>,
    pub cells: Vec<CellMedian>,
    pub manifest: RunManifest,
}

pub fn family_pair(d: &InstanceDescriptor) -> String {
    d.families.iter().map(|f| f.as_str()).collect::<Vec<_>>().join("+")
}

impl SuiteSummary {
    /// Aggregates `reports`; methods keep the manifest's order.
    pub fn from_reports(reports: &[ScoreReport], instances: &[InstanceDescriptor], manifest: RunManifest) -> Self {
        let by_id: BTreeMap<&str, &InstanceDescriptor> =
            instances.iter().map(|d| (d.instance_id.as_str(), d)).collect();
        let mut methods = Vec::new();
        let mut cells = Vec::new();
        for method in &manifest.methods {
            let mine: Vec<&ScoreReport> = reports.iter().filter(|r| &r.method == method).collect();
            let scores = |pred: &dyn Fn(&InstanceDescriptor) -> bool| -> Vec<f64> {
                mine.iter()
                    .filter(|r| by_id.get(r.instance_id.as_str()).is_some_and(|d| pred(d)))
                    .filter_map(|r| r.curvature_score())
                    .collect()
            };
            let all = scores(&|_| true);
            methods.push(MethodSummary {
                method: method.clone(),
                runs: mine.len(),
                failures: mine.iter().filter(|r| r.status == RunStatus::Failed).count(),
                score: Distribution::of(&all),
                median_flat: median(&scores(&|d| d.has_flat_axis())),
                median_curved: median(&scores(&|d| !d.has_flat_axis())),
            });
            let mut pairs: Vec<String> = Vec::new();
            for d in instances {
                let p = family_pair(d);
                if !pairs.contains(&p) {
                    pairs.push(p);
                }
            }
            for pair in pairs {
                let runs = mine
                    .iter()
                    .filter(|r| {
                        by_id
                            .get(r.instance_id.as_str())
                            .is_some_and(|d| family_pair(d) == pair)
                    })
                    .count();
                cells.push(CellMedian {
                    median: median(&scores(&|d| family_pair(d) == pair)),
                    family_pair: pair,
                    method: method.clone(),
                    runs,
                });
            }
        }
        SuiteSummary {
            methods,
            cells,
            manifest,
        }
    }

    pub fn write_cells_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["family_pair", "method", "median_score", "runs"])?;
        for c in &self.cells {
            w.write_record([
                c.family_pair.as_str(),
                c.method.as_str(),
                &c.median.map(format_f64).unwrap_or_default(),
                &c.runs.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
