//! The full generate, reduce, score pipeline over the instance suite.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::method::{run_reducer, MethodSpec, ReducerSettings};
use super::report::{score_embedding, write_summary_csv, RunManifest, RunSeeds, RunStatus, ScoreReport, SuiteSummary};
use super::tune::{random_search, HyperSpace, Objective};
use super::DEFAULT_MASTER_SEED;
use crate::error::{Error, Result};
use crate::estimation::EstimationConfig;
use crate::grid::PointCloud;
use crate::io::write_cloud_file;
use crate::manifold::{
    derive_seed, enumerate_suite, evaluate_immersion, makegen_with, InstanceDescriptor, MakegenOptions, DEFAULT_ETA,
    DEFAULT_RESOLUTION, THETA_EASY, THETA_HARD,
};
use crate::reducers::npr::DEFAULT_KN;
use crate::reducers::Hyperparameters;

/// Samples Φ on the instance grid.
pub fn generate_dataset(descriptor: &InstanceDescriptor, opts: MakegenOptions) -> Result<PointCloud> {
    let map = makegen_with(descriptor, opts)?;
    evaluate_immersion(&map, &descriptor.grid()?.to_point_cloud())
}

/// Writes `<id>.json` and `<id>.csv` into `dir`.
pub fn write_instance(descriptor: &InstanceDescriptor, x: &PointCloud, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join(format!("{}.json", descriptor.instance_id));
    let csv = dir.join(format!("{}.csv", descriptor.instance_id));
    descriptor.write(&json)?;
    write_cloud_file(&csv, 'x', x)?;
    Ok((json, csv))
}

#[derive(Debug, Clone)]
pub struct TuningConfig {
    /// Spaces keyed by method label; methods without one are not tuned.
    pub spaces: BTreeMap<String, HyperSpace>,
    pub budget: usize,
    pub objective: Objective,
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub master_seed: u64,
    pub theta_easy: f64,
    pub theta_hard: f64,
    pub eta: f64,
    pub resolution: usize,
    pub methods: Vec<MethodSpec>,
    pub repeats: usize,
    /// Target dimension of the reducers.
    pub k: usize,
    pub kn: usize,
    pub estimator: EstimationConfig,
    pub timeout: Duration,
    pub tuning: Option<TuningConfig>,
    /// Worker threads.
    pub jobs: usize,
    pub makegen: MakegenOptions,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            master_seed: DEFAULT_MASTER_SEED,
            theta_easy: THETA_EASY,
            theta_hard: THETA_HARD,
            eta: DEFAULT_ETA,
            resolution: DEFAULT_RESOLUTION,
            methods: vec![MethodSpec::Pca],
            repeats: super::DEFAULT_REPEATS,
            k: 2,
            kn: DEFAULT_KN,
            estimator: EstimationConfig::default(),
            timeout: Duration::from_secs(600),
            tuning: None,
            jobs: 1,
            makegen: MakegenOptions::default(),
        }
    }
}

impl SuiteConfig {
    pub fn instances(&self) -> Result<Vec<InstanceDescriptor>> {
        enumerate_suite(
            self.theta_easy,
            self.theta_hard,
            self.eta,
            self.master_seed,
            self.resolution,
        )
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub instances: Vec<InstanceDescriptor>,
    /// Ordered by instance, then method, then repeat.
    pub reports: Vec<ScoreReport>,
    pub summary: SuiteSummary,
}

struct Job<'a> {
    instance: &'a InstanceDescriptor,
    data: &'a std::result::Result<PointCloud, String>,
    method: &'a MethodSpec,
    repeat: usize,
}

fn run_job(config: &SuiteConfig, job: &Job, out_dir: &Path) -> ScoreReport {
    let id = &job.instance.instance_id;
    let label = job.method.to_string();
    let run_seed = derive_seed(config.master_seed, &format!("{id}/{label}/{}", job.repeat));
    let mut report = ScoreReport {
        instance_id: id.clone(),
        method: label.clone(),
        repeat: job.repeat,
        hyperparameters: Hyperparameters::new(),
        estimator: config.estimator,
        kn: config.kn,
        status: RunStatus::Failed,
        score: None,
        error: None,
        seeds: RunSeeds {
            master: config.master_seed,
            instance: job.instance.seed,
            run: run_seed,
        },
        wall_time_reduce: None,
        wall_time_score: None,
        tuning_budget: None,
        stdout: String::new(),
        stderr: String::new(),
    };
    let x = match job.data {
        Ok(x) => x,
        Err(e) => {
            report.error = Some(format!("dataset generation failed: {e}"));
            return report;
        }
    };
    let settings = ReducerSettings {
        timeout: config.timeout,
        workdir: out_dir
            .join("runs")
            .join(id)
            .join(job.method.slug())
            .join(format!("r{}", job.repeat)),
    };
    let result = (|| -> Result<()> {
        if let Some(space) = config
            .tuning
            .as_ref()
            .and_then(|t| t.spaces.get(&label).map(|s| (t, s)))
        {
            let (tuning, space) = space;
            let outcome = random_search(space, tuning.budget, tuning.objective, run_seed, |hp| {
                let emb = run_reducer(job.method, x, config.k, hp, run_seed, &settings)?;
                score_embedding(job.instance, x, &emb.y, &config.estimator, config.kn)
            })?;
            report.hyperparameters = outcome.best;
            report.tuning_budget = Some(tuning.budget);
        }
        let emb = run_reducer(job.method, x, config.k, &report.hyperparameters, run_seed, &settings);
        let emb = emb?;
        report.hyperparameters = emb.hyperparameters.clone();
        report.hyperparameters.remove("seed");
        report.wall_time_reduce = Some(emb.wall_time);
        report.stdout = emb.stdout.clone();
        report.stderr = emb.stderr.clone();
        let start = Instant::now();
        let score = score_embedding(job.instance, x, &emb.y, &config.estimator, config.kn)?;
        report.wall_time_score = Some(start.elapsed().as_secs_f64());
        report.score = Some(score);
        Ok(())
    })();
    match result {
        Ok(()) => report.status = RunStatus::Ok,
        Err(e) => {
            if let Error::Protocol(p) = &e {
                use crate::error::ProtocolError::*;
                if let NonZeroExit { stdout, stderr, .. } | Timeout { stdout, stderr, .. } = p {
                    report.stdout = stdout.clone();
                    report.stderr = stderr.clone();
                }
            }
            report.error = Some(e.to_string());
        }
    }
    report
}

/// Runs every (instance, method, repeat) job, writing instances, per-run
/// reports and summaries under `out_dir`. Failed runs are recorded and
/// skipped; the call fails only when every run failed.
pub fn run_suite(config: &SuiteConfig, out_dir: &Path) -> Result<SuiteOutcome> {
    if config.methods.is_empty() {
        return Err(Error::Argument("at least one method is required".into()));
    }
    if config.repeats < 1 {
        return Err(Error::Argument("repeats must be at least 1".into()));
    }
    config.estimator.validate(2)?;
    let instances = config.instances()?;
    let instance_dir = out_dir.join("instances");
    let datasets: Vec<std::result::Result<PointCloud, String>> = instances
        .iter()
        .map(|d| {
            let x = generate_dataset(d, config.makegen)?;
            write_instance(d, &x, &instance_dir)?;
            Ok(x)
        })
        .map(|r: Result<PointCloud>| r.map_err(|e| e.to_string()))
        .collect();

    let mut jobs = Vec::new();
    for (instance, data) in instances.iter().zip(&datasets) {
        for method in &config.methods {
            for repeat in 0..config.repeats {
                jobs.push(Job {
                    instance,
                    data,
                    method,
                    repeat,
                });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))?;
    let reports: Vec<ScoreReport> = pool.install(|| jobs.par_iter().map(|j| run_job(config, j, out_dir)).collect());

    let report_dir = out_dir.join("reports");
    std::fs::create_dir_all(&report_dir).map_err(|e| Error::io(&report_dir, e))?;
    for (r, j) in reports.iter().zip(&jobs) {
        let name = format!("{}__{}__r{}.json", r.instance_id, j.method.slug(), r.repeat);
        r.write(&report_dir.join(name))?;
    }
    let manifest = RunManifest {
        master_seed: config.master_seed,
        repeats: config.repeats,
        methods: config.methods.iter().map(|m| m.to_string()).collect(),
        instances: instances.iter().map(|d| d.instance_id.clone()).collect(),
        estimator: config.estimator,
        kn: config.kn,
        tuning_budget: config.tuning.as_ref().map(|t| t.budget),
    };
    let summary = SuiteSummary::from_reports(&reports, &instances, manifest);
    let path = out_dir.join("summary.csv");
    write_summary_csv(std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?, &reports)?;
    let path = out_dir.join("cells.csv");
    summary.write_cells_csv(std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?)?;
    let path = out_dir.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n").map_err(|e| Error::io(&path, e))?;

    if reports.iter().all(|r| r.status == RunStatus::Failed) {
        return Err(Error::Scoring(format!(
            "all {} runs failed; first error: {}",
            reports.len(),
            reports[0].error.as_deref().unwrap_or("unknown")
        )));
    }
    Ok(SuiteOutcome {
        instances,
        reports,
        summary,
    })
}
