//! Benchmark orchestration: generate instances, reduce, score, aggregate.

pub mod method;
pub mod plot;
pub mod report;
pub mod suite;
pub mod tune;

pub use method::{run_reducer, MethodSpec, ReducerSettings};
pub use report::{score_embedding, EmbeddingScore, RunStatus, ScoreReport, SuiteSummary};
pub use suite::{generate_dataset, run_suite, write_instance, SuiteConfig, SuiteOutcome};
pub use tune::{random_search, HyperSpace, Objective, TuneOutcome};

/// Master seed used when neither a flag nor `CURVEBENCH_SEED` provides one.
pub const DEFAULT_MASTER_SEED: u64 = 20_240_601;
pub const SEED_ENV: &str = "CURVEBENCH_SEED";
pub const DEFAULT_REPEATS: usize = 3;
