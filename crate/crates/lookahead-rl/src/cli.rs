//! Command-line front end: the full pipeline as subcommands over a shared
//! config file, with flag > file > default precedence, deterministic
//! seeding, and timestamped logs on standard error.
//!
//! Exit codes: 0 on success, 1 on validation errors (bad config values,
//! missing or incompatible artifacts), 2 on runtime errors.

use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config, RunConfig};
use crate::dynamics::{collect_transitions, train_dynamics, TransitionDataset};
use crate::error::{Error, Result};
use crate::harness::{
    benchmark_throughput, cross_guidance, density_sweep, paired_table, run_eval, run_paired,
    write_episode_records, write_summary_csv, ControllerKind, MetricsSummary, PairedEval,
    RunSpec,
};
use crate::lookahead::ModelSource;
use crate::nncore::load_checkpoint;
use crate::ppo::{self, PolicyArtifact};

#[derive(Parser, Debug)]
#[command(
    name = "lookahead-rl",
    version,
    about = "Train, model, and evaluate lookahead controllers on desk-scale environments"
)]
struct Cli {
    /// Config file; missing sections take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker-thread cap; 1 guarantees bit-exact reproducibility.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Artifact paths and evaluation overrides shared by the evaluation-style
/// subcommands. Anything left unset falls back to the config file, then to
/// the defaults (checkpoints under the output directory).
#[derive(Args, Debug, Clone, Default)]
struct SpecArgs {
    /// Policy checkpoint (default: <out>/policy_final.ckpt).
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Value checkpoint (default: <out>/value_final.ckpt).
    #[arg(long)]
    value: Option<PathBuf>,
    /// Dynamics checkpoint (default: <out>/dynamics.ckpt).
    #[arg(long)]
    dynamics: Option<PathBuf>,
    /// Episodes to evaluate.
    #[arg(long)]
    episodes: Option<usize>,
    /// Plan through the simulator itself instead of a learned model.
    #[arg(long)]
    oracle: bool,
    /// Density multiplier applied to the evaluation environment.
    #[arg(long)]
    density: Option<f64>,
    /// Size multiplier applied to the evaluation environment.
    #[arg(long)]
    size: Option<f64>,
    /// Sampled trajectories per decision (N).
    #[arg(long)]
    trajectories: Option<usize>,
    /// Planning horizon (H).
    #[arg(long)]
    horizon: Option<usize>,
    /// Trajectories averaged into the action (E).
    #[arg(long)]
    elite: Option<usize>,
    /// Use the policy mean instead of sampling (policy controller only).
    #[arg(long)]
    deterministic: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the policy and value networks.
    TrainPolicy,
    /// Collect one-step transitions by running the trained policy.
    CollectData {
        /// Policy checkpoint (default: <out>/policy_final.ckpt).
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Number of transitions to collect.
        #[arg(long)]
        transitions: Option<usize>,
        /// Output dataset path (default: <out>/transitions.mbld).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train the one-step dynamics model on a transition dataset.
    TrainDynamics {
        /// Input dataset path (default: <out>/transitions.mbld).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Evaluate one controller; `--paired` runs both on identical seeds.
    Eval {
        /// `policy` or `lookahead`.
        #[arg(long)]
        controller: Option<String>,
        /// Evaluate both controllers with identical episode seeds.
        #[arg(long)]
        paired: bool,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Paired policy-vs-lookahead evaluation across density multipliers.
    SweepDensity {
        /// Comma-separated density multipliers.
        #[arg(long, value_delimiter = ',')]
        multipliers: Option<Vec<f64>>,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Evaluate a policy on a modified env, guided by that env's dynamics
    /// model, against running the policy alone.
    CrossGuide {
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Steps/second and per-success cost, policy vs lookahead (N, H) grid.
    Bench {
        /// Comma-separated NxH pairs, e.g. `64x1,1024x2`.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<String>>,
        /// Untimed control steps before each measurement.
        #[arg(long)]
        warmup: Option<usize>,
        /// Timed control steps per measurement.
        #[arg(long)]
        steps: Option<usize>,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Print a checkpoint's architecture, tensor shapes, norms, and meta.
    InspectCkpt { path: PathBuf },
}

/// Resolve the effective config: file (when given), then global flags.
fn load_cfg(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Build a [`RunSpec`] from the config plus per-subcommand overrides.
fn build_spec(cfg: &RunConfig, args: &SpecArgs, controller: ControllerKind) -> RunSpec {
    let mut spec = RunSpec::new(
        controller,
        args.policy
            .clone()
            .unwrap_or_else(|| cfg.out_dir.join("policy_final.ckpt")),
        cfg.env.clone(),
    );
    spec.value = Some(
        args.value
            .clone()
            .unwrap_or_else(|| cfg.out_dir.join("value_final.ckpt")),
    );
    spec.dynamics = Some(
        args.dynamics
            .clone()
            .unwrap_or_else(|| cfg.out_dir.join("dynamics.ckpt")),
    );
    spec.lookahead = cfg.lookahead.clone();
    if args.oracle {
        spec.lookahead.model_source = ModelSource::Oracle;
    }
    if let Some(n) = args.trajectories {
        spec.lookahead.n_trajectories = n;
    }
    if let Some(h) = args.horizon {
        spec.lookahead.horizon = h;
    }
    if let Some(e) = args.elite {
        spec.lookahead.elite = e;
    }
    if let Some(d) = args.density {
        spec.env.density_multiplier = d;
    }
    if let Some(s) = args.size {
        spec.env.size_multiplier = s;
    }
    spec.episodes = args.episodes.unwrap_or(cfg.eval.episodes);
    spec.seed = cfg.seed;
    spec.threads = cfg.threads;
    spec.deterministic_policy = args.deterministic || cfg.eval.deterministic_policy;
    spec
}

fn require_file(path: &Path, role: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Artifact(format!(
            "{role} not found: {}",
            path.display()
        )))
    }
}

/// Fail early, naming the missing path, before any episodes run.
fn require_artifacts(spec: &RunSpec, need_lookahead: bool) -> Result<()> {
    require_file(&spec.policy, "policy checkpoint")?;
    if need_lookahead || spec.controller == ControllerKind::Lookahead {
        if let Some(value) = &spec.value {
            require_file(value, "value checkpoint")?;
        }
        if spec.lookahead.model_source == ModelSource::Learned {
            if let Some(dynamics) = &spec.dynamics {
                require_file(dynamics, "dynamics checkpoint")?;
            }
        }
    }
    Ok(())
}

fn parse_grid(entries: &[String]) -> Result<Vec<(usize, usize)>> {
    entries
        .iter()
        .map(|entry| {
            let bad = || {
                Error::config(
                    "bench.grid",
                    format!("expected NxH (e.g. 64x2), got `{entry}`"),
                )
            };
            let (n, h) = entry.split_once('x').ok_or_else(bad)?;
            let n = n.trim().parse::<usize>().map_err(|_| bad())?;
            let h = h.trim().parse::<usize>().map_err(|_| bad())?;
            Ok((n, h))
        })
        .collect()
}

fn summary_text(label: &str, s: &MetricsSummary) -> String {
    let se = s
        .reward_std_error
        .map(|e| format!(" ± {e:.4}"))
        .unwrap_or_default();
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
    format!(
        "controller: {label}\n\
         episodes: {}\n\
         average_reward: {:.4}{se}\n\
         consecutive_successes: {:.2}\n\
         average_episode_length: {:.1}\n\
         timesteps_per_success: {}\n\
         runtime_per_success_s: {}\n\
         steps_per_second: {:.1}\n\
         wall_clock_s: {:.2}\n",
        s.episodes,
        s.average_reward,
        s.consecutive_successes,
        s.average_episode_length,
        opt(s.timesteps_per_success),
        opt(s.runtime_per_success),
        s.steps_per_second,
        s.wall_clock,
    )
}

/// Write a table as `<stem>.csv` and `<stem>.txt` under `out_dir` and print
/// the text form.
fn emit_table(out_dir: &Path, stem: &str, csv: &str, text: &str) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(format!("{stem}.csv")), csv)?;
    fs::write(out_dir.join(format!("{stem}.txt")), text)?;
    println!("{text}");
    Ok(())
}

fn write_paired_outputs(out_dir: &Path, stem: &str, pair: &PairedEval) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    write_episode_records(&out_dir.join("episodes_policy.jsonl"), &pair.policy.records)?;
    write_episode_records(
        &out_dir.join("episodes_lookahead.jsonl"),
        &pair.lookahead.records,
    )?;
    write_summary_csv(
        &out_dir.join(format!("{stem}.csv")),
        &[
            ("policy".to_string(), pair.policy.summary.clone()),
            ("lookahead".to_string(), pair.lookahead.summary.clone()),
        ],
    )?;
    let text = format!(
        "{}\n{}",
        summary_text("policy", &pair.policy.summary),
        summary_text("lookahead", &pair.lookahead.summary)
    );
    fs::write(out_dir.join(format!("{stem}.txt")), &text)?;
    println!("{text}");
    Ok(())
}

fn cmd_train_policy(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir)?;
    let out = ppo::train(&cfg.ppo, &cfg.env, cfg.seed, &cfg.out_dir)?;
    println!(
        "trained {} updates over {} env steps\npolicy: {}\nvalue: {}\ncurve: {}",
        out.updates,
        out.env_steps,
        out.policy_path.display(),
        out.value_path.display(),
        out.curve_path.display(),
    );
    Ok(())
}

fn cmd_collect_data(
    cfg: &RunConfig,
    policy: Option<PathBuf>,
    transitions: Option<usize>,
    data: Option<PathBuf>,
) -> Result<()> {
    let policy_path = policy.unwrap_or_else(|| cfg.out_dir.join("policy_final.ckpt"));
    require_file(&policy_path, "policy checkpoint")?;
    let policy = PolicyArtifact::load(&policy_path)?;
    let count = transitions.unwrap_or(cfg.dynamics.transitions);
    let out_path = data.unwrap_or_else(|| cfg.out_dir.join("transitions.mbld"));
    fs::create_dir_all(&cfg.out_dir)?;
    let dataset = collect_transitions(
        &policy,
        &cfg.env,
        count,
        &cfg.dynamics.exploration,
        cfg.seed,
        Some(&out_path),
    )?;
    println!(
        "collected {} transitions ({} held out) -> {}",
        dataset.count(),
        dataset.test_count(),
        out_path.display()
    );
    Ok(())
}

fn cmd_train_dynamics(cfg: &RunConfig, data: Option<PathBuf>) -> Result<()> {
    let data_path = data.unwrap_or_else(|| cfg.out_dir.join("transitions.mbld"));
    require_file(&data_path, "transition dataset")?;
    let dataset = TransitionDataset::read(&data_path)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let model_path = cfg.out_dir.join("dynamics.ckpt");
    let out = train_dynamics(&dataset, &cfg.dynamics.train, cfg.seed, Some(&model_path))?;
    let mut curve = String::new();
    for record in &out.curve {
        curve.push_str(&serde_json::to_string(record)?);
        curve.push('\n');
    }
    let curve_path = cfg.out_dir.join("dynamics_curve.jsonl");
    fs::write(&curve_path, curve)?;
    let mut text = format!(
        "best epoch: {}\ntrain rmse (normalized): {:.6}\nheld-out rmse (normalized): {:.6}\nheld-out MAE by feature group:\n",
        out.best_epoch, out.metrics.train.rmse, out.metrics.test.rmse
    );
    for group in &out.metrics.test.mae {
        text.push_str(&format!("  {}: {:.6}\n", group.group, group.mae));
    }
    text.push_str(&format!(
        "model: {}\ncurve: {}",
        model_path.display(),
        curve_path.display()
    ));
    println!("{text}");
    Ok(())
}

fn cmd_eval(
    cfg: &RunConfig,
    controller: Option<String>,
    paired: bool,
    args: &SpecArgs,
) -> Result<()> {
    let controller = match controller {
        Some(s) => s.parse()?,
        None => cfg.eval.controller,
    };
    let spec = build_spec(cfg, args, controller);
    if paired {
        spec.validate()?;
        require_artifacts(&spec, true)?;
        let pair = run_paired(&spec)?;
        write_paired_outputs(&cfg.out_dir, "summary_paired", &pair)?;
    } else {
        spec.validate()?;
        require_artifacts(&spec, false)?;
        let outcome = run_eval(&spec, Some(&cfg.out_dir))?;
        println!("{}", summary_text(&controller.to_string(), &outcome.summary));
    }
    Ok(())
}

fn cmd_sweep_density(
    cfg: &RunConfig,
    multipliers: Option<Vec<f64>>,
    args: &SpecArgs,
) -> Result<()> {
    let spec = build_spec(cfg, args, ControllerKind::Lookahead);
    spec.validate()?;
    require_artifacts(&spec, true)?;
    let multipliers = multipliers.unwrap_or_else(|| cfg.eval.density_multipliers.clone());
    let sweep = density_sweep(&spec, &multipliers)?;
    let table = sweep.table();
    emit_table(&cfg.out_dir, "density_sweep", &table.to_csv(), &table.to_text())
}

fn cmd_cross_guide(cfg: &RunConfig, args: &SpecArgs) -> Result<()> {
    let spec = build_spec(cfg, args, ControllerKind::Lookahead);
    let mut spec = spec;
    spec.lookahead.model_source = ModelSource::Learned;
    spec.validate()?;
    require_artifacts(&spec, true)?;
    let pair = cross_guidance(
        &spec.policy,
        spec.value.as_ref().expect("build_spec always sets value"),
        spec.dynamics
            .as_ref()
            .expect("build_spec always sets dynamics"),
        &spec.env,
        &spec.lookahead,
        spec.episodes,
        spec.seed,
        spec.threads,
    )?;
    let labeled = [("cross_guidance".to_string(), &pair)];
    let table = paired_table("experiment", &labeled);
    emit_table(
        &cfg.out_dir,
        "cross_guidance",
        &table.to_csv(),
        &table.to_text(),
    )
}

fn cmd_bench(
    cfg: &RunConfig,
    grid: Option<Vec<String>>,
    warmup: Option<usize>,
    steps: Option<usize>,
    args: &SpecArgs,
) -> Result<()> {
    let spec = build_spec(cfg, args, ControllerKind::Lookahead);
    let grid = match grid {
        Some(entries) => parse_grid(&entries)?,
        None => cfg.eval.bench_grid.clone(),
    };
    require_artifacts(&spec, !grid.is_empty())?;
    let table = benchmark_throughput(
        &spec,
        &grid,
        warmup.unwrap_or(cfg.eval.bench_warmup),
        steps.unwrap_or(cfg.eval.bench_steps),
    )?;
    emit_table(&cfg.out_dir, "bench", &table.to_csv(), &table.to_text())
}

fn cmd_inspect_ckpt(path: &Path) -> Result<()> {
    require_file(path, "checkpoint")?;
    let (header, tensors) = load_checkpoint(path)?;
    let mut text = format!(
        "kind: {}\nrun_id: {}\nseed: {}\nstep: {}\narch: {}\ntensors:\n",
        header.kind,
        header.meta.run_id,
        header.meta.seed,
        header.meta.step,
        serde_json::to_string_pretty(&header.arch)?,
    );
    let mut total = 0usize;
    for entry in &header.tensors {
        let params: usize = entry.shape.iter().product();
        total += params;
        text.push_str(&format!(
            "  {}: {:?} ({params} params)\n",
            entry.name, entry.shape
        ));
    }
    text.push_str(&format!(
        "total parameters: {total}\nnorm: {}",
        serde_json::to_string_pretty(&header.norm)?
    ));
    drop(tensors);
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_cfg(&cli)?;
    match cli.command {
        Command::TrainPolicy => cmd_train_policy(&cfg),
        Command::CollectData {
            policy,
            transitions,
            data,
        } => cmd_collect_data(&cfg, policy, transitions, data),
        Command::TrainDynamics { data } => cmd_train_dynamics(&cfg, data),
        Command::Eval {
            controller,
            paired,
            spec,
        } => cmd_eval(&cfg, controller, paired, &spec),
        Command::SweepDensity { multipliers, spec } => {
            cmd_sweep_density(&cfg, multipliers, &spec)
        }
        Command::CrossGuide { spec } => cmd_cross_guide(&cfg, &spec),
        Command::Bench {
            grid,
            warmup,
            steps,
            spec,
        } => cmd_bench(&cfg, grid, warmup, steps, &spec),
        Command::InspectCkpt { path } => cmd_inspect_ckpt(&path),
    }
}

/// Parse arguments, run the selected subcommand, and translate the outcome
/// into a process exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp_millis()
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if e.kind() == ErrorKind::DisplayHelp || e.kind() == ErrorKind::DisplayVersion =>
        {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::TaskSpec;
    use crate::testutil;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(args).unwrap()
    }

    #[test]
    fn grid_entries_parse_and_reject_garbage() {
        let grid = parse_grid(&["64x1".into(), " 1024x2 ".into()]).unwrap();
        assert_eq!(grid, vec![(64, 1), (1024, 2)]);
        for bad in ["64", "x2", "64x", "64xtwo", "3.5x2"] {
            let err = parse_grid(&[bad.to_string()]).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{bad}");
        }
    }

    #[test]
    fn flags_override_config_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("run.toml");
        fs::write(&cfg_path, "seed = 5\nout_dir = \"from_file\"\nthreads = 2\n").unwrap();
        let cli = parse(&[
            "lookahead-rl",
            "train-policy",
            "--config",
            cfg_path.to_str().unwrap(),
            "--seed",
            "9",
            "--out",
            "from_flag",
        ]);
        let cfg = load_cfg(&cli).unwrap();
        assert_eq!(cfg.seed, 9, "flag beats file");
        assert_eq!(cfg.out_dir, PathBuf::from("from_flag"));
        assert_eq!(cfg.threads, 2, "file beats default");
    }

    #[test]
    fn build_spec_applies_overrides_on_top_of_config() {
        let cli = parse(&[
            "lookahead-rl",
            "eval",
            "--controller",
            "lookahead",
            "--oracle",
            "--trajectories",
            "32",
            "--horizon",
            "3",
            "--density",
            "4.0",
            "--episodes",
            "7",
        ]);
        let cfg = load_cfg(&cli).unwrap();
        let (controller, args) = match &cli.command {
            Command::Eval {
                controller, spec, ..
            } => (controller.clone(), spec.clone()),
            _ => unreachable!(),
        };
        let controller: ControllerKind = controller.unwrap().parse().unwrap();
        let spec = build_spec(&cfg, &args, controller);
        assert_eq!(spec.controller, ControllerKind::Lookahead);
        assert_eq!(spec.lookahead.model_source, ModelSource::Oracle);
        assert_eq!(spec.lookahead.n_trajectories, 32);
        assert_eq!(spec.lookahead.horizon, 3);
        assert_eq!(spec.lookahead.elite, 2, "untouched fields keep defaults");
        assert_eq!(spec.env.density_multiplier, 4.0);
        assert_eq!(spec.episodes, 7);
        assert_eq!(spec.policy, PathBuf::from("out/policy_final.ckpt"));
    }

    #[test]
    fn unknown_controller_is_a_validation_error() {
        let err = "mpc".parse::<ControllerKind>().unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("mpc"));
    }

    #[test]
    fn missing_artifacts_are_reported_with_their_path() {
        let dir = tempfile::tempdir().unwrap();
        let env_cfg = testutil::fast_pendulum(8);
        let task = TaskSpec::from_config(&env_cfg).unwrap();
        let policy_path = dir.path().join("policy.ckpt");
        testutil::tiny_policy(&task, 1).save(&policy_path).unwrap();

        let mut spec = RunSpec::new(ControllerKind::Lookahead, policy_path, env_cfg);
        spec.value = Some(dir.path().join("value.ckpt"));
        spec.dynamics = Some(dir.path().join("dynamics.ckpt"));
        let err = require_artifacts(&spec, false).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("value.ckpt"), "{err}");

        testutil::tiny_value(&task, 2)
            .save(spec.value.as_ref().unwrap())
            .unwrap();
        let err = require_artifacts(&spec, false).unwrap_err();
        assert!(err.to_string().contains("dynamics.ckpt"), "{err}");

        // The oracle source needs no dynamics file.
        spec.lookahead.model_source = ModelSource::Oracle;
        require_artifacts(&spec, false).unwrap();
    }
}
