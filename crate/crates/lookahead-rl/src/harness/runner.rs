//! Shared episode runner.
//!
//! Every evaluation in this crate (plain policy, lookahead, sweeps,
//! benchmarks) funnels through [`run_episodes`], which enforces the
//! paired-seed discipline: episode `i` always uses environment seed
//! `base_seed + i` and a controller stream derived from that same seed, so
//! two controllers evaluated with the same `base_seed` face identical
//! initial states and goal sequences.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;

use crate::envs::{DeskEnv, EnvConfig, TaskSpec};
use crate::error::{Error, Result};
use crate::nncore::gaussian_sample;
use crate::ppo::PolicyArtifact;
use crate::rng::{derive_rng, episode_seed};

use super::metrics::{summarize, EpisodeRecord, MetricsSummary};

/// Read-only view of the environment handed to a controller each step.
pub struct ControlCtx<'a> {
    /// Current observation (raw, unnormalized).
    pub obs: &'a [f32],
    /// Packed physical state (the transition-model state).
    pub state: &'a [f32],
    /// Current goal angle.
    pub goal: f64,
    /// Action applied on the previous step.
    pub prev_action: &'a [f32],
    pub task: &'a TaskSpec,
}

/// An action source driving one episode at a time.
pub trait Controller {
    /// Called once when an episode starts.
    fn begin_episode(&mut self) {}
    /// Choose the next action. `rng` is the per-episode controller stream.
    fn act(&mut self, ctx: &ControlCtx<'_>, rng: &mut ChaCha8Rng) -> Result<Vec<f32>>;
}

/// Acts directly through the policy: mean action when `deterministic`,
/// otherwise a sample.
#[derive(Debug, Clone)]
pub struct PolicyController {
    pub artifact: PolicyArtifact,
    pub deterministic: bool,
}

impl PolicyController {
    pub fn new(artifact: PolicyArtifact, deterministic: bool) -> Self {
        PolicyController {
            artifact,
            deterministic,
        }
    }
}

impl Controller for PolicyController {
    fn act(&mut self, ctx: &ControlCtx<'_>, rng: &mut ChaCha8Rng) -> Result<Vec<f32>> {
        let (mean, log_std) = self.artifact.dist(ctx.obs)?;
        if self.deterministic {
            Ok(mean)
        } else {
            Ok(gaussian_sample(&mean, &log_std, rng).0)
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub records: Vec<EpisodeRecord>,
    pub summary: MetricsSummary,
}

fn run_one<C: Controller>(
    controller: &mut C,
    env_cfg: &EnvConfig,
    episode: usize,
    base_seed: u64,
) -> Result<EpisodeRecord> {
    let seed = episode_seed(base_seed, episode as u64);
    let mut env = DeskEnv::new(env_cfg, seed)?;
    let mut rng = derive_rng(seed, "controller", 0);
    controller.begin_episode();
    let mut obs = env.obs();
    let mut total = 0.0f64;
    let mut steps = 0u32;
    let mut successes;
    let start = Instant::now();
    loop {
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
        total += step.reward as f64;
        steps += 1;
        successes = step.info.consecutive_successes;
        if step.terminated || step.truncated {
            break;
        }
        obs = step.obs;
    }
    let wall_time = start.elapsed().as_secs_f64();
    Ok(EpisodeRecord {
        episode,
        seed,
        reward: total / steps as f64,
        reward_total: total,
        successes,
        length: steps,
        wall_time,
    })
}

/// Run `episodes` independent episodes and aggregate them. With
/// `threads > 1`, episodes are sharded round-robin across worker threads;
/// results are merged in episode order and are identical to a
/// single-threaded run (each episode owns its env and RNG streams).
pub fn run_episodes<C, F>(
    make_controller: F,
    env_cfg: &EnvConfig,
    episodes: usize,
    base_seed: u64,
    threads: usize,
) -> Result<EvalOutcome>
where
    C: Controller,
    F: Fn() -> Result<C> + Sync,
{
    if episodes == 0 {
        return Err(Error::config("episodes", "at least one episode is required"));
    }
    let threads = threads.max(1).min(episodes);
    let mut records: Vec<EpisodeRecord> = Vec::with_capacity(episodes);
    if threads == 1 {
        let mut controller = make_controller()?;
        for i in 0..episodes {
            records.push(run_one(&mut controller, env_cfg, i, base_seed)?);
        }
    } else {
        let results = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for w in 0..threads {
                let make = &make_controller;
                handles.push(scope.spawn(move || -> Result<Vec<EpisodeRecord>> {
                    let mut controller = make()?;
                    let mut out = Vec::new();
                    let mut i = w;
                    while i < episodes {
                        out.push(run_one(&mut controller, env_cfg, i, base_seed)?);
                        i += threads;
                    }
                    Ok(out)
                }));
            }
            handles
                .into_iter()
                .map(|h| h.join().expect("evaluation worker panicked"))
                .collect::<Vec<_>>()
        });
        for r in results {
            records.extend(r?);
        }
        records.sort_by_key(|r| r.episode);
    }
    let summary = summarize(&records);
    Ok(EvalOutcome { records, summary })
}
