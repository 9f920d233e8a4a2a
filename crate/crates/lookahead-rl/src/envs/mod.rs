//! Deterministic desk-scale environments.
//!
//! Two tasks share one interface: reorient an object to a goal angle, collect
//! a bonus per reached goal (the goal then re-randomizes and the episode
//! continues), and avoid dropping the object.
//!
//! * `goal_pendulum` — a torque-actuated revolute link; "falling" is
//!   replaced by timeout only.
//! * `planar_hand` — two planar fingers rotate a disc resting in a palm
//!   cradle; the episode ends early if the disc drops below the palm line.
//!
//! Everything is deterministic given (config, seed, action sequence).

mod actuation;
mod angles;
mod config;
mod pendulum;
mod planar_hand;
mod task;

pub use actuation::{pd_torque, tendon_torque};
pub use angles::{rot_dist, wrap_angle};
pub use config::{Actuation, EnvConfig, EnvKind, HandParams, PendulumParams};
pub use task::{reward_from_obs, TaskSpec, HAND_ANGLE_INDEX};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::rng::derive_rng;

/// Structured view of the environment state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub q: Vec<f32>,
    pub qd: Vec<f32>,
    /// Object pose (x, y, theta); zeros for the pendulum, whose angle lives
    /// in `q[0]`.
    pub pose: [f32; 3],
    pub vel: [f32; 3],
    pub goal: f32,
    pub prev_action: Vec<f32>,
    pub step_count: u32,
    pub consecutive_successes: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub goal_reached: bool,
    pub fell: bool,
    /// Distance to the goal that was active during this step.
    pub rot_dist: f32,
    pub consecutive_successes: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f32>,
    pub reward: f32,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

/// A desk environment instance. Owns its RNG (derived from the seed), so a
/// vector of instances can be stepped independently.
#[derive(Debug, Clone)]
pub struct DeskEnv {
    task: TaskSpec,
    state: Vec<f32>,
    goal: f64,
    prev_action: Vec<f32>,
    step_count: u32,
    successes: u32,
    rng: ChaCha8Rng,
}

fn uniform_angle(rng: &mut ChaCha8Rng) -> f64 {
    // u in [0, 1) maps to (-pi, pi], with pi attained at u = 0.
    let u: f64 = rng.gen();
    std::f64::consts::PI * (1.0 - 2.0 * u)
}

impl DeskEnv {
    /// Build and reset an environment. All randomness comes from `seed`
    /// through the "env" stream.
    pub fn new(cfg: &EnvConfig, seed: u64) -> Result<DeskEnv> {
        let task = TaskSpec::from_config(cfg)?;
        let mut env = DeskEnv {
            prev_action: vec![0.0; task.action_dim],
            state: vec![0.0; task.state_dim],
            goal: 0.0,
            step_count: 0,
            successes: 0,
            rng: derive_rng(seed, "env", 0),
            task,
        };
        env.reset();
        Ok(env)
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn config(&self) -> &EnvConfig {
        &self.task.cfg
    }

    /// Reset to a fresh episode: object at rest with a uniform random
    /// orientation, goal resampled outside the tolerance, counters and
    /// previous action zeroed. Returns the initial observation.
    pub fn reset(&mut self) -> Vec<f32> {
        let theta = uniform_angle(&mut self.rng);
        self.state = match self.task.cfg.kind {
            EnvKind::GoalPendulum => vec![theta as f32, 0.0],
            EnvKind::PlanarHand => planar_hand::rest_state(&self.task.cfg, theta),
        };
        self.goal = self.sample_goal(self.task.object_angle(&self.state));
        self.prev_action = vec![0.0; self.task.action_dim];
        self.step_count = 0;
        self.successes = 0;
        self.obs()
    }

    fn sample_goal(&mut self, theta: f64) -> f64 {
        loop {
            let g = uniform_angle(&mut self.rng);
            if rot_dist(theta, g) > self.task.cfg.goal_tolerance {
                return g;
            }
        }
    }

    /// Current observation.
    pub fn obs(&self) -> Vec<f32> {
        self.task.build_obs(&self.state, self.goal, &self.prev_action)
    }

    /// Packed physical state (the transition-model state).
    pub fn packed_state(&self) -> &[f32] {
        &self.state
    }

    pub fn goal(&self) -> f64 {
        self.goal
    }

    pub fn prev_action(&self) -> &[f32] {
        &self.prev_action
    }

    pub fn step_count(&self) -> u32 {
        self.step_count
    }

    pub fn consecutive_successes(&self) -> u32 {
        self.successes
    }

    /// Structured state view.
    pub fn env_state(&self) -> EnvState {
        let s = &self.state;
        let (q, qd, pose, vel) = match self.task.cfg.kind {
            EnvKind::GoalPendulum => (
                vec![s[0]],
                vec![s[1]],
                [0.0f32; 3],
                [0.0f32; 3],
            ),
            EnvKind::PlanarHand => (
                s[0..4].to_vec(),
                s[4..8].to_vec(),
                [s[8], s[9], s[10]],
                [s[11], s[12], s[13]],
            ),
        };
        EnvState {
            q,
            qd,
            pose,
            vel,
            goal: self.goal as f32,
            prev_action: self.prev_action.clone(),
            step_count: self.step_count,
            consecutive_successes: self.successes,
        }
    }

    /// Override the packed physical state (scripted scenarios and tests).
    pub fn set_packed_state(&mut self, state: &[f32]) {
        assert_eq!(state.len(), self.task.state_dim);
        self.state = state.to_vec();
    }

    /// Override the goal angle (scripted scenarios and tests).
    pub fn set_goal(&mut self, goal: f64) {
        self.goal = wrap_angle(goal);
    }

    /// Advance one control step.
    pub fn step(&mut self, action: &[f32]) -> Result<StepResult> {
        self.task.check_action(action)?;
        let mut a = action.to_vec();
        self.task.clip_action(&mut a);

        physics_step(&self.task.cfg, &mut self.state, &a);

        let old_goal = self.goal;
        let theta = self.task.object_angle(&self.state);
        let dist = rot_dist(theta, old_goal);
        let goal_reached = dist <= self.task.cfg.goal_tolerance;
        if goal_reached {
            self.successes += 1;
            self.goal = self.sample_goal(theta);
        }
        let fell = self.task.fall(&self.state);
        self.step_count += 1;
        let terminated = fell;
        let truncated = !fell && self.step_count >= self.task.cfg.max_episode_steps;

        // Reward is judged against the goal that was active during the step.
        let reward_obs = self.task.build_obs(&self.state, old_goal, &a);
        let reward = reward_from_obs(
            &self.task,
            &reward_obs,
            &a,
            &self.prev_action,
            goal_reached,
            fell,
        )? as f32;

        self.prev_action = a;
        Ok(StepResult {
            obs: self.obs(),
            reward,
            terminated,
            truncated,
            info: StepInfo {
                goal_reached,
                fell,
                rot_dist: dist as f32,
                consecutive_successes: self.successes,
            },
        })
    }
}

/// Dispatch one control step of pure physics on a packed state. The action
/// must already be clipped.
pub(crate) fn physics_step(cfg: &EnvConfig, state: &mut [f32], action: &[f32]) {
    match cfg.kind {
        EnvKind::GoalPendulum => pendulum::step_physics(cfg, state, action),
        EnvKind::PlanarHand => planar_hand::step_physics(cfg, state, action),
    }
}

/// Side-effect-free transition: exactly the physics portion of
/// [`DeskEnv::step`] (same clipping, same integrator), with no reward, goal,
/// or counter logic. This exposes the simulator as a ground-truth transition
/// model for lookahead ablations.
pub fn oracle_step(task: &TaskSpec, state: &[f32], action: &[f32]) -> Result<Vec<f32>> {
    task.check_action(action)?;
    if state.len() != task.state_dim {
        return Err(crate::error::Error::shape(
            "oracle_step",
            format!("{} state dims", task.state_dim),
            format!("{}", state.len()),
        ));
    }
    let mut a = action.to_vec();
    task.clip_action(&mut a);
    let mut next = state.to_vec();
    physics_step(&task.cfg, &mut next, &a);
    Ok(next)
}

/// Pendulum mechanical energy (exposed for integrator audits).
pub fn pendulum_energy(cfg: &EnvConfig, state: &[f32]) -> f64 {
    pendulum::energy(cfg, state)
}
