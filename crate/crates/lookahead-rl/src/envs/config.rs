//! Environment configuration.
//!
//! All values are overridable from the TOML config file; the defaults below
//! define the reference tasks. Unknown keys are rejected so typos fail fast.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    GoalPendulum,
    PlanarHand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actuation {
    FullyActuated,
    UnderActuated,
}

/// Pendulum-specific physical parameters (point mass on a massless rod).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PendulumParams {
    /// Bob mass before the density multiplier, kg.
    pub mass: f64,
    /// Rod length before the size multiplier, m.
    pub length: f64,
    /// Viscous joint damping, N·m·s/rad.
    pub damping: f64,
    /// Action (torque) limit, N·m.
    pub torque_limit: f64,
    pub gravity: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams {
            mass: 0.2,
            length: 0.5,
            damping: 0.05,
            torque_limit: 2.0,
            gravity: 9.81,
        }
    }
}

/// Planar-hand geometry and contact parameters.
///
/// The scene: a disc (radius `disc_radius * size_multiplier`, mass
/// `disc_mass * density_multiplier`) rests in a V-shaped palm cradle whose
/// walls rise at ±45° from an apex placed so the seated disc center sits at
/// y = 0 (the palm line). Two mirrored fingers — 2-joint planar chains —
/// reach in from the sides; only the fingertip contacts the disc rim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HandParams {
    pub disc_radius: f64,
    pub disc_mass: f64,
    pub gravity: f64,
    /// Penalty-spring contact stiffness, N/m (compression only).
    pub contact_stiffness: f64,
    /// Contact normal damping, N·s/m.
    pub contact_damping: f64,
    /// Coulomb friction coefficient capping tangential force.
    pub friction: f64,
    /// Regularization gain of tangential friction, N·s/m: the tangential
    /// force is `-tangential_gain * v_slip`, capped at `±friction * N`.
    pub tangential_gain: f64,
    /// Length of each palm wall segment measured from the apex, m.
    pub palm_wall_length: f64,
    /// Scales palm-wall contact stiffness; 0 removes the palm (used to
    /// script free-fall scenarios).
    pub palm_stiffness_scale: f64,
    /// Finger base positions are (±finger_base_x, finger_base_y).
    pub finger_base_x: f64,
    pub finger_base_y: f64,
    /// Link lengths, m.
    pub link1: f64,
    pub link2: f64,
    /// Lumped per-joint rotor inertia, kg·m² (links are massless; inertial
    /// coupling between joints is neglected at this fidelity).
    pub joint_inertia: f64,
    /// Passive joint damping, N·m·s/rad.
    pub joint_damping: f64,
    /// Initial joint angles after reset, rad (both fingers, mirrored).
    pub rest_pose: [f64; 2],
}

impl Default for HandParams {
    fn default() -> Self {
        HandParams {
            disc_radius: 0.04,
            disc_mass: 0.1,
            gravity: 9.81,
            contact_stiffness: 2000.0,
            contact_damping: 4.0,
            friction: 0.8,
            tangential_gain: 8.0,
            palm_wall_length: 0.12,
            palm_stiffness_scale: 1.0,
            finger_base_x: 0.10,
            finger_base_y: 0.03,
            link1: 0.06,
            link2: 0.05,
            joint_inertia: 1e-3,
            joint_damping: 0.02,
            rest_pose: [0.3, 0.3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub actuation: Actuation,
    /// Control timestep, s.
    pub dt: f64,
    /// Physics substeps per control step.
    pub substeps: u32,
    pub max_episode_steps: u32,
    /// Success threshold on the object-vs-goal angle, rad.
    pub goal_tolerance: f64,
    /// Fall threshold: object center this far below the palm line ends the
    /// episode (planar hand only), m.
    pub fall_distance: f64,
    /// Scales object mass and rotational inertia.
    pub density_multiplier: f64,
    /// Scales object geometry.
    pub size_multiplier: f64,
    // Reward coefficients.
    pub rot_weight: f64,
    pub goal_bonus: f64,
    pub fall_penalty: f64,
    pub action_l2_weight: f64,
    pub action_smooth_weight: f64,
    /// PD gains per finger joint (fully actuated planar hand).
    pub kp: Vec<f64>,
    pub kd: Vec<f64>,
    /// Tendon stiffness K and damping D diagonals per joint.
    pub tendon_stiffness: Vec<f64>,
    pub tendon_damping: Vec<f64>,
    /// Per-finger synergy column: how one tendon command maps to that
    /// finger's joint targets.
    pub synergy: Vec<f64>,
    /// Finger joint limits, rad.
    pub joint_limit_low: Vec<f64>,
    pub joint_limit_high: Vec<f64>,
    /// Finger joint torque limit, N·m.
    pub torque_limit: f64,
    pub pendulum: PendulumParams,
    pub hand: HandParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            kind: EnvKind::GoalPendulum,
            actuation: Actuation::FullyActuated,
            dt: 1.0 / 60.0,
            substeps: 4,
            max_episode_steps: 600,
            goal_tolerance: 0.1,
            fall_distance: 0.1,
            density_multiplier: 1.0,
            size_multiplier: 1.0,
            rot_weight: 1.0,
            goal_bonus: 250.0,
            fall_penalty: 5.0,
            action_l2_weight: 0.01,
            action_smooth_weight: 0.01,
            kp: vec![3.0; 4],
            kd: vec![0.1; 4],
            tendon_stiffness: vec![2.0; 4],
            tendon_damping: vec![0.1; 4],
            synergy: vec![1.0, 0.7],
            joint_limit_low: vec![-0.5; 4],
            joint_limit_high: vec![1.6; 4],
            torque_limit: 1.0,
            pendulum: PendulumParams::default(),
            hand: HandParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn pendulum() -> Self {
        EnvConfig::default()
    }

    pub fn planar_hand(actuation: Actuation) -> Self {
        EnvConfig {
            kind: EnvKind::PlanarHand,
            actuation,
            ..EnvConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, path: &str, msg: String| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("env.{path}"), msg))
            }
        };
        check(self.dt > 0.0, "dt", format!("must be > 0, got {}", self.dt))?;
        check(self.substeps >= 1, "substeps", "must be >= 1".into())?;
        check(
            self.max_episode_steps >= 1,
            "max_episode_steps",
            "must be >= 1".into(),
        )?;
        check(
            self.goal_tolerance > 0.0,
            "goal_tolerance",
            format!("must be > 0, got {}", self.goal_tolerance),
        )?;
        check(
            self.fall_distance > 0.0,
            "fall_distance",
            "must be > 0".into(),
        )?;
        check(
            self.density_multiplier > 0.0,
            "density_multiplier",
            format!("must be > 0, got {}", self.density_multiplier),
        )?;
        check(
            self.size_multiplier > 0.0,
            "size_multiplier",
            "must be > 0".into(),
        )?;
        check(
            self.tendon_stiffness.iter().all(|k| *k >= 0.0),
            "tendon_stiffness",
            "diagonal entries must be >= 0".into(),
        )?;
        check(
            self.tendon_damping.iter().all(|d| *d >= 0.0),
            "tendon_damping",
            "diagonal entries must be >= 0".into(),
        )?;
        check(
            self.synergy.iter().all(|s| s.is_finite()),
            "synergy",
            "entries must be finite".into(),
        )?;
        check(self.torque_limit > 0.0, "torque_limit", "must be > 0".into())?;
        check(
            self.pendulum.torque_limit > 0.0,
            "pendulum.torque_limit",
            "must be > 0".into(),
        )?;
        if self.kind == EnvKind::PlanarHand {
            let n = 4;
            for (name, len) in [
                ("kp", self.kp.len()),
                ("kd", self.kd.len()),
                ("tendon_stiffness", self.tendon_stiffness.len()),
                ("tendon_damping", self.tendon_damping.len()),
                ("joint_limit_low", self.joint_limit_low.len()),
                ("joint_limit_high", self.joint_limit_high.len()),
            ] {
                check(len == n, name, format!("needs {n} entries, got {len}"))?;
            }
            check(self.synergy.len() == 2, "synergy", "needs 2 entries (one column per finger joint)".into())?;
            check(
                self.joint_limit_low
                    .iter()
                    .zip(&self.joint_limit_high)
                    .all(|(lo, hi)| lo < hi),
                "joint_limit_low",
                "each low limit must be below the high limit".into(),
            )?;
        }
        Ok(())
    }

    /// Scaled object radius (planar hand), m.
    pub fn disc_radius(&self) -> f64 {
        self.hand.disc_radius * self.size_multiplier
    }

    /// Scaled object mass (planar hand), kg.
    pub fn disc_mass(&self) -> f64 {
        self.hand.disc_mass * self.density_multiplier
    }

    /// Disc rotational inertia (solid disc), kg·m².
    pub fn disc_inertia(&self) -> f64 {
        0.5 * self.disc_mass() * self.disc_radius() * self.disc_radius()
    }

    /// Scaled pendulum length, m.
    pub fn pendulum_length(&self) -> f64 {
        self.pendulum.length * self.size_multiplier
    }

    /// Scaled pendulum mass, kg.
    pub fn pendulum_mass(&self) -> f64 {
        self.pendulum.mass * self.density_multiplier
    }
}
