//! Computational-cost benchmark: steps/second for the plain policy and for
//! the lookahead controller across an (N, H) grid, combined with success
//! statistics into runtime-per-success.
//!
//! Timing runs on a single environment instance in a single thread; the
//! first `warmup` control steps are excluded, and so are checkpoint loading
//! and all file I/O. Success statistics come from a separate evaluation with
//! the usual paired-seed discipline.

use std::time::Instant;

use crate::envs::{DeskEnv, EnvConfig};
use crate::error::{Error, Result};
use crate::lookahead::LookaheadController;
use crate::rng::derive_rng;

use super::eval::{load_arms, run_arm, ControllerKind, RunSpec};
use super::runner::{ControlCtx, Controller, PolicyController};
use super::sweep::aligned;

/// Control steps excluded from timing at the start of a measurement.
pub const DEFAULT_WARMUP_STEPS: usize = 100;

/// One controller configuration's measured cost.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub controller: String,
    /// Trajectory count; `None` for the plain policy.
    pub n_trajectories: Option<usize>,
    /// Planning horizon; `None` for the plain policy.
    pub horizon: Option<usize>,
    /// Timed control steps per second (act + environment step).
    pub steps_per_second: f64,
    /// From the success evaluation; `None` when no episode succeeded.
    pub timesteps_per_success: Option<f64>,
    /// `timesteps_per_success / steps_per_second`, seconds.
    pub runtime_per_success: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
}

impl BenchTable {
    pub const CSV_HEADER: &'static str =
        "controller,n_trajectories,horizon,steps_per_second,timesteps_per_success,runtime_per_success";

    pub fn to_csv(&self) -> String {
        fn opt_usize(v: Option<usize>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        fn opt_f64(v: Option<f64>) -> String {
            v.map(|x| format!("{x:.6}")).unwrap_or_default()
        }
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.6},{},{}\n",
                row.controller,
                opt_usize(row.n_trajectories),
                opt_usize(row.horizon),
                row.steps_per_second,
                opt_f64(row.timesteps_per_success),
                opt_f64(row.runtime_per_success),
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let header: Vec<String> = [
            "controller",
            "config",
            "steps_per_s",
            "timesteps_per_success",
            "runtime_per_success_s",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let mut lines = vec![header];
        for row in &self.rows {
            let config = match (row.n_trajectories, row.horizon) {
                (Some(n), Some(h)) => format!("N={n} H={h}"),
                _ => "-".to_string(),
            };
            lines.push(vec![
                row.controller.clone(),
                config,
                format!("{:.1}", row.steps_per_second),
                row.timesteps_per_success
                    .map(|v| format!("{v:.2}"))
                    .unwrap_or_else(|| "-".into()),
                row.runtime_per_success
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "-".into()),
            ]);
        }
        aligned(&lines)
    }
}

/// Drive one controller on one environment for `warmup + timed` control
/// steps (auto-resetting between episodes) and return timed steps/second.
fn measure<C: Controller>(
    controller: &mut C,
    env_cfg: &EnvConfig,
    seed: u64,
    warmup: usize,
    timed: usize,
) -> Result<f64> {
    let mut env = DeskEnv::new(env_cfg, seed)?;
    let mut rng = derive_rng(seed, "controller", 0);
    controller.begin_episode();
    let mut obs = env.obs();
    let mut start = Instant::now();
    for i in 0..warmup + timed {
        if i == warmup {
            start = Instant::now();
        }
        let state = env.packed_state().to_vec();
        let prev_action = env.prev_action().to_vec();
        let ctx = ControlCtx {
            obs: &obs,
            state: &state,
            goal: env.goal(),
            prev_action: &prev_action,
            task: env.task(),
        };
        let action = controller.act(&ctx, &mut rng)?;
        let step = env.step(&action)?;
        if step.terminated || step.truncated {
            obs = env.reset();
            controller.begin_episode();
        } else {
            obs = step.obs;
        }
    }
    let elapsed = start.elapsed().as_secs_f64().max(1e-9);
    Ok(timed as f64 / elapsed)
}

fn combine(
    controller: &str,
    n: Option<usize>,
    h: Option<usize>,
    steps_per_second: f64,
    timesteps_per_success: Option<f64>,
) -> BenchRow {
    BenchRow {
        controller: controller.to_string(),
        n_trajectories: n,
        horizon: h,
        steps_per_second,
        timesteps_per_success,
        runtime_per_success: timesteps_per_success.map(|t| t / steps_per_second),
    }
}

/// Measure the plain policy and each `(N, H)` lookahead configuration.
/// `timed_steps` control steps are timed per row after `warmup` untimed
/// ones; success rates come from a `spec.episodes`-episode evaluation per
/// row (identical seeds across rows). The lookahead elite count is clamped
/// to each row's N.
pub fn benchmark_throughput(
    spec: &RunSpec,
    grid: &[(usize, usize)],
    warmup: usize,
    timed_steps: usize,
) -> Result<BenchTable> {
    spec.validate_common()?;
    if timed_steps == 0 {
        return Err(Error::config(
            "bench.steps",
            "at least one timed step is required",
        ));
    }
    for &(n, h) in grid {
        if n == 0 || h == 0 {
            return Err(Error::config(
                "bench.grid",
                format!("trajectory counts and horizons must be >= 1, got N={n} H={h}"),
            ));
        }
    }
    if !grid.is_empty() {
        spec.validate_lookahead_inputs()?;
    }
    let arms = load_arms(spec, !grid.is_empty())?;
    let mut rows = Vec::with_capacity(grid.len() + 1);

    let policy_sps = {
        let mut controller =
            PolicyController::new(arms.policy.clone(), spec.deterministic_policy);
        measure(&mut controller, &spec.env, spec.seed, warmup, timed_steps)?
    };
    let policy_eval = run_arm(spec, &arms, ControllerKind::Policy)?;
    rows.push(combine(
        "policy",
        None,
        None,
        policy_sps,
        policy_eval.summary.timesteps_per_success,
    ));

    for &(n, h) in grid {
        let mut sub = spec.clone();
        sub.lookahead.n_trajectories = n;
        sub.lookahead.horizon = h;
        sub.lookahead.elite = sub.lookahead.elite.min(n);
        sub.lookahead.validate()?;
        let sps = {
            let mut controller = LookaheadController::new(
                arms.policy.clone(),
                arms.value.clone().expect("validated: value present"),
                arms.model.clone().expect("validated: model present"),
                sub.lookahead.clone(),
            )?;
            measure(&mut controller, &sub.env, sub.seed, warmup, timed_steps)?
        };
        let eval = run_arm(&sub, &arms, ControllerKind::Lookahead)?;
        rows.push(combine(
            "lookahead",
            Some(n),
            Some(h),
            sps,
            eval.summary.timesteps_per_success,
        ));
    }
    Ok(BenchTable { rows })
}
