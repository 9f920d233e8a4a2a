//! Experiment driver: paired evaluations (policy vs lookahead), density
//! generalization sweeps, cross-guidance runs, and throughput benchmarks,
//! all built on one episode runner with a paired-seed discipline.

mod bench;
mod eval;
mod metrics;
mod runner;
mod sweep;

pub use bench::{benchmark_throughput, BenchRow, BenchTable, DEFAULT_WARMUP_STEPS};
pub use eval::{
    read_episode_records, run_eval, run_paired, write_episode_records, write_summary_csv,
    ControllerKind, PairedEval, RunSpec, DEFAULT_EPISODES,
};
pub use metrics::{summarize, EpisodeRecord, MetricsSummary};
pub use runner::{run_episodes, ControlCtx, Controller, EvalOutcome, PolicyController};
pub use sweep::{
    cross_guidance, density_sweep, paired_table, DensitySweep, PairedRow, PairedTable,
    DEFAULT_DENSITY_MULTIPLIERS,
};
