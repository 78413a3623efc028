use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use curvebench::bench::report::{read_summary_csv, SUMMARY_COLUMNS};
use curvebench::bench::suite::TuningConfig;
use curvebench::bench::{
    generate_dataset, plot, random_search, run_reducer, run_suite, score_embedding, write_instance, HyperSpace,
    MethodSpec, Objective, ReducerSettings, RunStatus, SuiteConfig, DEFAULT_MASTER_SEED, DEFAULT_REPEATS, SEED_ENV,
};
use curvebench::curve::CurvatureFamily;
use curvebench::estimation::{EstimationConfig, EstimationMethod, DEFAULT_K_NEIGHBORS};
use curvebench::geometry::{SectionalMode, DEFAULT_TRIM};
use curvebench::io::{read_cloud_file, write_cloud_file};
use curvebench::manifold::{
    derive_seed, InstanceDescriptor, MakegenOptions, DEFAULT_ETA, DEFAULT_RESOLUTION, SUITE_TARGET_DIM, THETA_EASY,
    THETA_HARD,
};
use curvebench::reducers::npr::DEFAULT_KN;
use curvebench::reducers::{HyperValue, Hyperparameters};

#[derive(Parser)]
#[command(
    name = "curvebench",
    version,
    about = "Curvature-based benchmark for dimensionality reduction"
)]
struct Cli {
    /// Master seed; all randomness derives from it.
    #[arg(long, global = true, env = SEED_ENV, default_value_t = DEFAULT_MASTER_SEED)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write instance descriptors and their sampled datasets.
    Generate(GenerateArgs),
    /// Run a reducer on a dataset CSV.
    Reduce(ReduceArgs),
    /// Score an embedding against its instance.
    Score(ScoreArgs),
    /// Run reducers over the whole instance suite.
    Suite(SuiteArgs),
    /// Random search over a reducer's hyperparameters.
    Tune(TuneArgs),
    /// SVG of a 2-D embedding or of a suite summary.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SuiteFlags {
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: usize,
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
    #[arg(long, default_value_t = THETA_EASY)]
    theta_easy: f64,
    #[arg(long, default_value_t = THETA_HARD)]
    theta_hard: f64,
}

#[derive(Args)]
struct GenerateArgs {
    /// Regenerate a single instance from its descriptor.
    #[arg(long, conflicts_with_all = ["families", "thetas"])]
    instance: Option<PathBuf>,
    /// Comma-separated curvature families, one per axis (single instance).
    #[arg(long, value_delimiter = ',', requires = "thetas")]
    families: Vec<CurvatureFamily>,
    /// Comma-separated θ values, one per axis.
    #[arg(long, value_delimiter = ',', requires = "families")]
    thetas: Vec<f64>,
    /// Ambient dimension (single instance).
    #[arg(long, default_value_t = SUITE_TARGET_DIM)]
    ambient_dim: usize,
    #[command(flatten)]
    suite: SuiteFlags,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Skip the random rotation (testing aid).
    #[arg(long, hide = true)]
    identity_rotation: bool,
}

fn parse_hyper(s: &str) -> Result<(String, HyperValue), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let v = match v.parse::<f64>() {
        Ok(x) => HyperValue::Number(x),
        Err(_) => HyperValue::Text(v.to_string()),
    };
    Ok((k.to_string(), v))
}

#[derive(Args)]
struct ReduceArgs {
    /// Dataset CSV (header x1..xm).
    #[arg(long)]
    input: PathBuf,
    /// pca, tsvd, mds or external:<command template>.
    #[arg(long)]
    method: String,
    /// Target dimension.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Hyperparameter as key=value; repeatable.
    #[arg(long = "hyper", value_parser = parse_hyper)]
    hyper: Vec<(String, HyperValue)>,
    /// Embedding CSV to write; a `.meta.json` sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Seconds before an external reducer is killed.
    #[arg(long, default_value_t = 600.0)]
    timeout: f64,
    /// Working directory for external reducers (default: next to --out).
    #[arg(long)]
    workdir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args)]
struct EstimatorFlags {
    #[arg(long, default_value = "metric-knn")]
    estimator: EstimationMethod,
    #[arg(long, default_value_t = DEFAULT_K_NEIGHBORS)]
    k_neighbors: usize,
    #[arg(long, default_value_t = DEFAULT_TRIM)]
    trim: usize,
    /// standard or paper-sqrt.
    #[arg(long, default_value = "standard")]
    mode: SectionalMode,
    #[arg(long, value_enum, default_value = "on")]
    rescale: OnOff,
    /// Neighbors for the NPR baseline.
    #[arg(long, default_value_t = DEFAULT_KN)]
    kn: usize,
}

impl EstimatorFlags {
    fn config(&self) -> EstimationConfig {
        EstimationConfig {
            method: self.estimator,
            k_neighbors: self.k_neighbors,
            trim: self.trim,
            mode: self.mode,
            rescale_output: matches!(self.rescale, OnOff::On),
        }
    }
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Embedding CSV (header y1..yk), rows in grid order.
    #[arg(long)]
    embedding: PathBuf,
    /// Dataset CSV; regenerated from the instance when omitted.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Method label stored in the report.
    #[arg(long, default_value = "unknown")]
    method: String,
    #[command(flatten)]
    estimator: EstimatorFlags,
    /// Report JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    /// Method to run; repeatable or comma-separated.
    #[arg(long = "method", value_delimiter = ',', default_value = "pca")]
    methods: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
    #[command(flatten)]
    suite: SuiteFlags,
    #[command(flatten)]
    estimator: EstimatorFlags,
    #[arg(long, default_value = "suite-out")]
    out_dir: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 600.0)]
    timeout: f64,
    /// Hyperparameter space for a method, as method=space.json; repeatable.
    #[arg(long = "space")]
    spaces: Vec<String>,
    /// Tuning budget per run (used with --space).
    #[arg(long, default_value_t = 10)]
    budget: usize,
    #[arg(long, default_value = "score")]
    objective: Objective,
    #[arg(long, hide = true)]
    identity_rotation: bool,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    method: String,
    /// Hyperparameter space JSON.
    #[arg(long)]
    space: PathBuf,
    #[arg(long, default_value_t = 10)]
    budget: usize,
    #[arg(long, default_value = "score")]
    objective: Objective,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[command(flatten)]
    estimator: EstimatorFlags,
    #[arg(long, default_value_t = 600.0)]
    timeout: f64,
    #[arg(long, default_value = "tune-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Embedding CSV or suite summary CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Grid columns used for coloring (default: square grid).
    #[arg(long)]
    columns: Option<usize>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate(a) => generate(cli.seed, a),
        Command::Reduce(a) => reduce(cli.seed, a),
        Command::Score(a) => score(cli.seed, a),
        Command::Suite(a) => suite(cli.seed, a),
        Command::Tune(a) => tune(cli.seed, a),
        Command::Plot(a) => plot_cmd(a),
    }
}

fn timeout(secs: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(secs).with_context(|| format!("invalid timeout {secs}"))
}

fn generate(seed: u64, a: GenerateArgs) -> Result<()> {
    let opts = MakegenOptions {
        identity_rotation: a.identity_rotation,
    };
    let descriptors = if let Some(path) = &a.instance {
        vec![InstanceDescriptor::read(path)?]
    } else if !a.families.is_empty() {
        let mut d = InstanceDescriptor::new(
            a.ambient_dim,
            a.families.clone(),
            a.thetas.clone(),
            a.suite.eta,
            0,
            a.suite.resolution,
        )?;
        d.seed = derive_seed(seed, &d.instance_id);
        vec![d]
    } else {
        SuiteConfig {
            master_seed: seed,
            theta_easy: a.suite.theta_easy,
            theta_hard: a.suite.theta_hard,
            eta: a.suite.eta,
            resolution: a.suite.resolution,
            ..Default::default()
        }
        .instances()?
    };
    for d in &descriptors {
        let x = generate_dataset(d, opts)?;
        let (json, csv) = write_instance(d, &x, &a.out_dir)?;
        println!("{}\t{}", json.display(), csv.display());
    }
    Ok(())
}

fn sidecar(out: &Path) -> PathBuf {
    out.with_extension("meta.json")
}

fn reduce(seed: u64, a: ReduceArgs) -> Result<()> {
    let method: MethodSpec = a.method.parse()?;
    let x = read_cloud_file(&a.input, Some('x'))?;
    let hp: Hyperparameters = a.hyper.into_iter().collect();
    let workdir = a.workdir.unwrap_or_else(|| {
        let mut name = a.out.file_name().unwrap_or_default().to_os_string();
        name.push(".work");
        a.out.with_file_name(name)
    });
    let settings = ReducerSettings {
        timeout: timeout(a.timeout)?,
        workdir,
    };
    let emb = run_reducer(&method, &x, a.k, &hp, seed, &settings)?;
    write_cloud_file(&a.out, 'y', &emb.y)?;
    let meta = serde_json::json!({
        "method": emb.method,
        "hyperparameters": emb.hyperparameters,
        "k": a.k,
        "seed": seed,
        "wall_time": emb.wall_time,
        "stdout": emb.stdout,
        "stderr": emb.stderr,
    });
    let path = sidecar(&a.out);
    fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n").with_context(|| path.display().to_string())?;
    Ok(())
}

fn score(seed: u64, a: ScoreArgs) -> Result<()> {
    let d = InstanceDescriptor::read(&a.instance)?;
    let x = match &a.dataset {
        Some(p) => read_cloud_file(p, Some('x'))?,
        None => generate_dataset(&d, MakegenOptions::default())?,
    };
    let y = read_cloud_file(&a.embedding, Some('y'))?;
    let config = a.estimator.config();
    config.validate(d.n)?;
    let meta = fs::read_to_string(sidecar(&a.embedding))
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .unwrap_or_default();
    let hyperparameters =
        serde_json::from_value::<Hyperparameters>(meta["hyperparameters"].clone()).unwrap_or_default();
    let start = std::time::Instant::now();
    let s = score_embedding(&d, &x, &y, &config, a.estimator.kn)?;
    let report = curvebench::bench::ScoreReport {
        instance_id: d.instance_id.clone(),
        method: a.method,
        repeat: 0,
        hyperparameters,
        estimator: config,
        kn: a.estimator.kn,
        status: RunStatus::Ok,
        score: Some(s),
        error: None,
        seeds: curvebench::bench::report::RunSeeds {
            master: seed,
            instance: d.seed,
            run: meta["seed"].as_u64().unwrap_or(seed),
        },
        wall_time_reduce: None,
        wall_time_score: Some(start.elapsed().as_secs_f64()),
        tuning_budget: None,
        stdout: String::new(),
        stderr: String::new(),
    };
    match &a.out {
        Some(p) => report.write(p)?,
        None => println!("{}", report.to_json()?),
    }
    Ok(())
}

fn suite(seed: u64, a: SuiteArgs) -> Result<()> {
    let methods = a
        .methods
        .iter()
        .map(|m| m.parse::<MethodSpec>())
        .collect::<curvebench::Result<Vec<_>>>()?;
    let tuning = if a.spaces.is_empty() {
        None
    } else {
        let mut spaces = BTreeMap::new();
        for s in &a.spaces {
            let (m, path) = s
                .rsplit_once('=')
                .with_context(|| format!("--space expects method=path, got {s:?}"))?;
            let m: MethodSpec = m.parse()?;
            spaces.insert(m.to_string(), HyperSpace::read(Path::new(path))?);
        }
        Some(TuningConfig {
            spaces,
            budget: a.budget,
            objective: a.objective,
        })
    };
    let config = SuiteConfig {
        master_seed: seed,
        theta_easy: a.suite.theta_easy,
        theta_hard: a.suite.theta_hard,
        eta: a.suite.eta,
        resolution: a.suite.resolution,
        methods,
        repeats: a.repeats,
        kn: a.estimator.kn,
        estimator: a.estimator.config(),
        timeout: timeout(a.timeout)?,
        tuning,
        jobs: a.jobs,
        makegen: MakegenOptions {
            identity_rotation: a.identity_rotation,
        },
        ..Default::default()
    };
    let outcome = run_suite(&config, &a.out_dir)?;
    for m in &outcome.summary.methods {
        let med = |v: Option<f64>| v.map_or("-".into(), |x| format!("{x:.4e}"));
        println!(
            "{}\truns {}\tfailed {}\tmedian {}\tflat {}\tcurved {}",
            m.method,
            m.runs,
            m.failures,
            med(m.score.as_ref().map(|d| d.median)),
            med(m.median_flat),
            med(m.median_curved)
        );
    }
    Ok(())
}

fn tune(seed: u64, a: TuneArgs) -> Result<()> {
    let method: MethodSpec = a.method.parse()?;
    let d = InstanceDescriptor::read(&a.instance)?;
    let x = generate_dataset(&d, MakegenOptions::default())?;
    let space = HyperSpace::read(&a.space)?;
    let config = a.estimator.config();
    config.validate(d.n)?;
    let settings = ReducerSettings {
        timeout: timeout(a.timeout)?,
        workdir: a.out_dir.join("work"),
    };
    let run_seed = derive_seed(seed, &format!("tune/{}/{method}", d.instance_id));
    let outcome = random_search(&space, a.budget, a.objective, run_seed, |hp| {
        let emb = run_reducer(&method, &x, a.k, hp, run_seed, &settings)?;
        score_embedding(&d, &x, &emb.y, &config, a.estimator.kn)
    })?;
    fs::create_dir_all(&a.out_dir)?;
    let path = a.out_dir.join("tune.json");
    fs::write(&path, serde_json::to_string_pretty(&outcome)? + "\n").with_context(|| path.display().to_string())?;
    println!("{}", serde_json::to_string(&outcome.best)?);
    Ok(())
}

fn plot_cmd(a: PlotArgs) -> Result<()> {
    let text = fs::read_to_string(&a.input).with_context(|| a.input.display().to_string())?;
    let first = text.lines().next().unwrap_or_default();
    let svg = if first.starts_with(SUMMARY_COLUMNS[0]) {
        plot::box_svg(&read_summary_csv(text.as_bytes())?)?
    } else {
        let y = read_cloud_file(&a.input, None)?;
        if first.starts_with('x') && y.dim() != 2 {
            bail!(
                "{} is a {}-dimensional dataset; reduce it to 2-D first or score it with `curvebench score`",
                a.input.display(),
                y.dim()
            );
        }
        plot::scatter_svg(&y, a.columns)?
    };
    fs::write(&a.out, svg).with_context(|| a.out.display().to_string())?;
    Ok(())
}
