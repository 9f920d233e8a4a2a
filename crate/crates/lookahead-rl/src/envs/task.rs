//! Task-level glue shared by the environments, the trainers, and the
//! lookahead controller: packed-state layout, observation construction,
//! action conventions, the shaped reward, and the fall predicate.
//!
//! Packed physical state (the transition-model state):
//! * goal_pendulum (2): `[theta, theta_dot]`
//! * planar_hand (14): `[q0..q3, qd0..qd3, x, y, theta, vx, vy, omega]`
//!
//! Observation layouts (frozen):
//! * goal_pendulum (6): `[cos theta, sin theta, theta_dot, cos goal,
//!   sin goal, prev_action]`
//! * planar_hand fully actuated (20): `q(4) | qd(4) | (x, y, theta) |
//!   (vx, vy, omega) | (cos goal, sin goal) | prev_action(4)`
//! * planar_hand under-actuated (18): same with `prev_action(2)`

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::envs::angles::{rot_dist, wrap_angle};
use crate::envs::config::{Actuation, EnvConfig, EnvKind};
use crate::error::{Error, Result};

/// Index of the object angle in the packed planar-hand state.
pub const HAND_ANGLE_INDEX: usize = 10;

#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub cfg: EnvConfig,
    pub state_dim: usize,
    pub action_dim: usize,
    pub obs_dim: usize,
    /// Number of (position, velocity) joint pairs heading the packed state:
    /// positions at indices `0..n_joints`, velocities at
    /// `n_joints..2 * n_joints`. One for the pendulum, four finger joints
    /// for the hand. `joint_reference` yields one entry per joint.
    pub n_joints: usize,
    /// Packed-state indices holding angles that must be wrapped to
    /// `(-pi, pi]` after a model prediction.
    pub angle_indices: Vec<usize>,
}

impl TaskSpec {
    pub fn from_config(cfg: &EnvConfig) -> Result<TaskSpec> {
        cfg.validate()?;
        let spec = match cfg.kind {
            EnvKind::GoalPendulum => TaskSpec {
                cfg: cfg.clone(),
                state_dim: 2,
                action_dim: 1,
                obs_dim: 6,
                n_joints: 1,
                angle_indices: vec![0],
            },
            EnvKind::PlanarHand => {
                let action_dim = match cfg.actuation {
                    Actuation::FullyActuated => 4,
                    Actuation::UnderActuated => 2,
                };
                TaskSpec {
                    cfg: cfg.clone(),
                    state_dim: 14,
                    action_dim,
                    obs_dim: 14 + 2 + action_dim,
                    n_joints: 4,
                    angle_indices: vec![HAND_ANGLE_INDEX],
                }
            }
        };
        Ok(spec)
    }

    /// Object orientation from a packed state.
    pub fn object_angle(&self, state: &[f32]) -> f64 {
        match self.cfg.kind {
            EnvKind::GoalPendulum => state[0] as f64,
            EnvKind::PlanarHand => state[HAND_ANGLE_INDEX] as f64,
        }
    }

    /// True when the packed state is past the fall threshold (object center
    /// more than `fall_distance` below the palm line). Pendulums never fall.
    pub fn fall(&self, state: &[f32]) -> bool {
        match self.cfg.kind {
            EnvKind::GoalPendulum => false,
            EnvKind::PlanarHand => (state[9] as f64) < -self.cfg.fall_distance,
        }
    }

    /// Build the observation for a packed state, goal angle, and previous
    /// action.
    pub fn build_obs(&self, state: &[f32], goal: f64, prev_action: &[f32]) -> Vec<f32> {
        debug_assert_eq!(state.len(), self.state_dim);
        debug_assert_eq!(prev_action.len(), self.action_dim);
        let mut obs = Vec::with_capacity(self.obs_dim);
        match self.cfg.kind {
            EnvKind::GoalPendulum => {
                let theta = state[0] as f64;
                obs.push(theta.cos() as f32);
                obs.push(theta.sin() as f32);
                obs.push(state[1]);
            }
            EnvKind::PlanarHand => obs.extend_from_slice(state),
        }
        obs.push(goal.cos() as f32);
        obs.push(goal.sin() as f32);
        obs.extend_from_slice(prev_action);
        debug_assert_eq!(obs.len(), self.obs_dim);
        obs
    }

    /// Per-dimension action bounds.
    pub fn action_bounds(&self) -> (f64, f64) {
        match self.cfg.kind {
            EnvKind::GoalPendulum => {
                let t = self.cfg.pendulum.torque_limit;
                (-t, t)
            }
            EnvKind::PlanarHand => match self.cfg.actuation {
                Actuation::FullyActuated => (-1.0, 1.0),
                Actuation::UnderActuated => (0.0, 1.0),
            },
        }
    }

    /// Clip an action into its legal box.
    pub fn clip_action(&self, action: &mut [f32]) {
        let (lo, hi) = self.action_bounds();
        for a in action {
            *a = a.clamp(lo as f32, hi as f32);
        }
    }

    /// Validate an incoming action (length and finiteness).
    pub fn check_action(&self, action: &[f32]) -> Result<()> {
        if action.len() != self.action_dim {
            return Err(Error::shape(
                "action",
                format!("{} dims", self.action_dim),
                format!("{}", action.len()),
            ));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::non_finite("action"));
        }
        Ok(())
    }

    /// Uniform random action inside the legal box (exploration noise for
    /// transition-data collection).
    pub fn uniform_action(&self, rng: &mut ChaCha8Rng) -> Vec<f32> {
        let (lo, hi) = self.action_bounds();
        (0..self.action_dim)
            .map(|_| {
                let u: f64 = rng.gen();
                (lo + u * (hi - lo)) as f32
            })
            .collect()
    }

    /// Per-joint actuation reference implied by a (clipped) action:
    /// the PD target positions under full actuation, the tendon targets
    /// `S*a` under under-actuation, and the raw torque for the pendulum.
    /// This is the per-joint action feature used by the modular dynamics
    /// model.
    pub fn joint_reference(&self, action: &[f32]) -> Vec<f64> {
        match self.cfg.kind {
            EnvKind::GoalPendulum => vec![action[0] as f64],
            EnvKind::PlanarHand => match self.cfg.actuation {
                Actuation::FullyActuated => (0..4)
                    .map(|j| {
                        let lo = self.cfg.joint_limit_low[j];
                        let hi = self.cfg.joint_limit_high[j];
                        lo + (action[j] as f64 + 1.0) * 0.5 * (hi - lo)
                    })
                    .collect(),
                Actuation::UnderActuated => {
                    // Joint j of finger f tracks synergy[j%2] * a[f].
                    (0..4)
                        .map(|j| {
                            let finger = j / 2;
                            self.cfg.synergy[j % 2] * action[finger] as f64
                        })
                        .collect()
                }
            },
        }
    }

    /// Wrap angle entries of a model-predicted state back into `(-pi, pi]`.
    pub fn sanitize_model_state(&self, state: &mut [f32]) {
        for &i in &self.angle_indices {
            state[i] = wrap_angle(state[i] as f64) as f32;
        }
    }

    /// Shaped reward from raw ingredients.
    pub fn reward_terms(
        &self,
        rot_distance: f64,
        action: &[f32],
        prev_action: &[f32],
        goal_reached: bool,
        fell: bool,
    ) -> f64 {
        let c = &self.cfg;
        let l2: f64 = action.iter().map(|a| (*a as f64).powi(2)).sum();
        let smooth: f64 = action
            .iter()
            .zip(prev_action)
            .map(|(a, p)| (*a as f64 - *p as f64).powi(2))
            .sum();
        -c.rot_weight * rot_distance
            + if goal_reached { c.goal_bonus } else { 0.0 }
            - if fell { c.fall_penalty } else { 0.0 }
            - c.action_l2_weight * l2
            - c.action_smooth_weight * smooth
    }

    /// Object angle and goal angle encoded in an observation.
    pub fn angles_from_obs(&self, obs: &[f32]) -> (f64, f64) {
        match self.cfg.kind {
            EnvKind::GoalPendulum => (
                (obs[1] as f64).atan2(obs[0] as f64),
                (obs[4] as f64).atan2(obs[3] as f64),
            ),
            EnvKind::PlanarHand => (
                obs[HAND_ANGLE_INDEX] as f64,
                (obs[15] as f64).atan2(obs[14] as f64),
            ),
        }
    }
}

/// Shaped reward computed from an observation:
/// `r = -rot_weight * rot_dist(theta, goal) + goal_bonus * [goal_reached]
///  - fall_penalty * [fell] - action_l2_weight * |a|^2
///  - action_smooth_weight * |a - a_prev|^2`.
pub fn reward_from_obs(
    task: &TaskSpec,
    obs: &[f32],
    action: &[f32],
    prev_action: &[f32],
    goal_reached: bool,
    fell: bool,
) -> Result<f64> {
    if obs.len() != task.obs_dim {
        return Err(Error::shape(
            "reward_from_obs",
            format!("{} obs dims", task.obs_dim),
            format!("{}", obs.len()),
        ));
    }
    if obs.iter().any(|v| !v.is_finite()) {
        return Err(Error::non_finite("reward_from_obs observation"));
    }
    let (theta, goal) = task.angles_from_obs(obs);
    Ok(task.reward_terms(rot_dist(theta, goal), action, prev_action, goal_reached, fell))
}
