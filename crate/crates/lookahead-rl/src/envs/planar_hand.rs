//! Planar two-finger hand rotating a disc in a V-shaped palm cradle.
//!
//! Scene (all in the x-y plane, gravity along -y):
//!
//! * A solid disc (radius `r`, mass `m`) whose orientation `theta` is the
//!   task angle. At rest it sits in the cradle with its center at the
//!   origin; the palm line is `y = 0`.
//! * The cradle: two static wall segments rising at ±45° from the apex
//!   `(0, -r*sqrt(2))`, placed so the seated disc center is exactly at the
//!   origin.
//! * Two mirrored fingers, each a 2-joint chain of massless links with
//!   lumped rotor inertia per joint. Joint angle 0 points the finger at the
//!   disc axis; positive angles curl the finger up and over the disc.
//!   Only the fingertip interacts with the disc.
//!
//! Contacts are penalty springs acting at the disc rim: a compression-only
//! normal force `max(0, k*pen - c*v_n)` plus regularized Coulomb friction
//! (`-tangential_gain * v_slip`, capped at `±mu*N`). Fingertip forces react
//! back onto the finger joints through the chain Jacobian. Integration is
//! semi-implicit Euler over `substeps`; joint positions are clamped to
//! their limits with velocity zeroing; state is quantized to `f32` once per
//! control step.
//!
//! Packed state (14): `[q0..q3, qd0..qd3, x, y, theta, vx, vy, omega]`.

use crate::envs::actuation::{pd_torque, tendon_torque};
use crate::envs::angles::wrap_angle;
use crate::envs::config::{Actuation, EnvConfig};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy)]
struct Vec2 {
    x: f64,
    y: f64,
}

impl Vec2 {
    fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }
    fn add(self, o: Vec2) -> Self {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
    fn sub(self, o: Vec2) -> Self {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
    fn scale(self, s: f64) -> Self {
        Vec2::new(self.x * s, self.y * s)
    }
    fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }
    fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }
    fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
    /// Rotate +90°.
    fn perp(self) -> Self {
        Vec2::new(-self.y, self.x)
    }
}

/// Finger chain geometry: joint positions, tip, and tip Jacobian columns.
struct FingerKinematics {
    tip: Vec2,
    /// d(tip)/d(q1), d(tip)/d(q2).
    jac: [Vec2; 2],
    tip_vel: Vec2,
}

/// `finger` 0 is the left hand side (base -x), 1 the right (mirrored).
fn finger_kinematics(cfg: &EnvConfig, finger: usize, q: &[f64], qd: &[f64]) -> FingerKinematics {
    let h = &cfg.hand;
    let (sign, base_x, beta) = if finger == 0 {
        (1.0, -h.finger_base_x, 0.0)
    } else {
        (-1.0, h.finger_base_x, std::f64::consts::PI)
    };
    let base = Vec2::new(base_x, h.finger_base_y);
    let q1 = q[2 * finger];
    let q2 = q[2 * finger + 1];
    let phi1 = beta + sign * q1;
    let phi2 = phi1 + sign * q2;
    let j2 = base.add(Vec2::new(phi1.cos(), phi1.sin()).scale(h.link1));
    let tip = j2.add(Vec2::new(phi2.cos(), phi2.sin()).scale(h.link2));
    let jac1 = tip.sub(base).perp().scale(sign);
    let jac2 = tip.sub(j2).perp().scale(sign);
    let tip_vel = jac1.scale(qd[2 * finger]).add(jac2.scale(qd[2 * finger + 1]));
    FingerKinematics {
        tip,
        jac: [jac1, jac2],
        tip_vel,
    }
}

/// Penalty contact of the disc rim against a point obstacle at `point`
/// moving with `point_vel`. Returns the force on the disc and the torque
/// about its center, or `None` when not in contact.
#[allow(clippy::too_many_arguments)]
fn rim_contact(
    center: Vec2,
    vel: Vec2,
    omega: f64,
    radius: f64,
    point: Vec2,
    point_vel: Vec2,
    stiffness: f64,
    damping: f64,
    friction: f64,
    tangential_gain: f64,
) -> Option<(Vec2, f64)> {
    let delta = center.sub(point);
    let dist = delta.norm();
    if dist >= radius || dist < 1e-9 {
        return None;
    }
    let normal = delta.scale(1.0 / dist); // from contact point toward center
    let pen = radius - dist;
    let r_vec = normal.scale(-radius); // center -> contact point on the rim
    let contact_vel = vel.add(r_vec.perp().scale(omega));
    let rel = contact_vel.sub(point_vel);
    let v_n = rel.dot(normal); // positive = separating
    let f_n = (stiffness * pen - damping * v_n).max(0.0);
    let tangent = normal.perp();
    let v_t = rel.dot(tangent);
    let cap = friction * f_n;
    let f_t = (-tangential_gain * v_t).clamp(-cap, cap);
    let force = normal.scale(f_n).add(tangent.scale(f_t));
    let torque = r_vec.cross(force);
    Some((force, torque))
}

/// Closest point on the wall segment `apex + t*dir, t in [0, len]`.
fn segment_closest(apex: Vec2, dir: Vec2, len: f64, p: Vec2) -> Vec2 {
    let t = p.sub(apex).dot(dir).clamp(0.0, len);
    apex.add(dir.scale(t))
}

/// One control step of the planar hand. `action` must already be clipped.
pub fn step_physics(cfg: &EnvConfig, state: &mut [f32], action: &[f32]) {
    let h_cfg = &cfg.hand;
    let m = cfg.disc_mass();
    let inertia = cfg.disc_inertia();
    let radius = cfg.disc_radius();
    let g = h_cfg.gravity;
    let dt = cfg.dt / cfg.substeps as f64;

    let apex = Vec2::new(0.0, -radius * SQRT2);
    let wall_dirs = [
        Vec2::new(-SQRT2 / 2.0, SQRT2 / 2.0),
        Vec2::new(SQRT2 / 2.0, SQRT2 / 2.0),
    ];

    let mut q = [0.0f64; 4];
    let mut qd = [0.0f64; 4];
    for j in 0..4 {
        q[j] = state[j] as f64;
        qd[j] = state[4 + j] as f64;
    }
    let mut pos = Vec2::new(state[8] as f64, state[9] as f64);
    let mut theta = state[10] as f64;
    let mut vel = Vec2::new(state[11] as f64, state[12] as f64);
    let mut omega = state[13] as f64;

    // Tendon synergy matrix (4 joints x 2 actuators, block diagonal).
    let action_f64: Vec<f64> = action.iter().map(|a| *a as f64).collect();
    let s_matrix = [
        cfg.synergy[0], 0.0,
        cfg.synergy[1], 0.0,
        0.0, cfg.synergy[0],
        0.0, cfg.synergy[1],
    ];

    for _ in 0..cfg.substeps {
        // Actuation torques from the current joint state.
        let mut tau = [0.0f64; 4];
        match cfg.actuation {
            Actuation::FullyActuated => {
                for j in 0..4 {
                    let lo = cfg.joint_limit_low[j];
                    let hi = cfg.joint_limit_high[j];
                    let u = lo + (action_f64[j] + 1.0) * 0.5 * (hi - lo);
                    tau[j] = pd_torque(cfg.kp[j], cfg.kd[j], u, q[j], qd[j], cfg.torque_limit);
                }
            }
            Actuation::UnderActuated => {
                let t = tendon_torque(
                    &cfg.tendon_stiffness,
                    &s_matrix,
                    &cfg.tendon_damping,
                    &action_f64,
                    &q,
                    &qd,
                    cfg.torque_limit,
                )
                .expect("validated dimensions");
                tau.copy_from_slice(&t);
            }
        }

        // Contacts.
        let mut force = Vec2::new(0.0, -m * g);
        let mut torque = 0.0f64;
        for f in 0..2 {
            let kin = finger_kinematics(cfg, f, &q, &qd);
            if let Some((cf, ct)) = rim_contact(
                pos,
                vel,
                omega,
                radius,
                kin.tip,
                kin.tip_vel,
                h_cfg.contact_stiffness,
                h_cfg.contact_damping,
                h_cfg.friction,
                h_cfg.tangential_gain,
            ) {
                force = force.add(cf);
                torque += ct;
                // Reaction on the finger joints through the tip Jacobian.
                let reaction = cf.scale(-1.0);
                tau[2 * f] += kin.jac[0].dot(reaction);
                tau[2 * f + 1] += kin.jac[1].dot(reaction);
            }
        }
        if h_cfg.palm_stiffness_scale > 0.0 {
            for dir in wall_dirs {
                let closest = segment_closest(apex, dir, h_cfg.palm_wall_length, pos);
                if let Some((cf, ct)) = rim_contact(
                    pos,
                    vel,
                    omega,
                    radius,
                    closest,
                    Vec2::new(0.0, 0.0),
                    h_cfg.contact_stiffness * h_cfg.palm_stiffness_scale,
                    h_cfg.contact_damping * h_cfg.palm_stiffness_scale,
                    h_cfg.friction,
                    h_cfg.tangential_gain,
                ) {
                    force = force.add(cf);
                    torque += ct;
                }
            }
        }

        // Semi-implicit Euler: velocities first, then positions.
        for j in 0..4 {
            let qdd = (tau[j] - h_cfg.joint_damping * qd[j]) / h_cfg.joint_inertia;
            qd[j] += qdd * dt;
            q[j] += qd[j] * dt;
            let (lo, hi) = (cfg.joint_limit_low[j], cfg.joint_limit_high[j]);
            if q[j] < lo {
                q[j] = lo;
                qd[j] = qd[j].max(0.0);
            } else if q[j] > hi {
                q[j] = hi;
                qd[j] = qd[j].min(0.0);
            }
        }
        vel = vel.add(force.scale(dt / m));
        pos = pos.add(vel.scale(dt));
        omega += torque / inertia * dt;
        theta += omega * dt;
    }

    for j in 0..4 {
        state[j] = q[j] as f32;
        state[4 + j] = qd[j] as f32;
    }
    state[8] = pos.x as f32;
    state[9] = pos.y as f32;
    state[10] = wrap_angle(theta) as f32;
    state[11] = vel.x as f32;
    state[12] = vel.y as f32;
    state[13] = omega as f32;
}

/// Packed state of the disc seated at rest with orientation `theta` and the
/// fingers parked at the rest pose.
pub fn rest_state(cfg: &EnvConfig, theta: f64) -> Vec<f32> {
    let mut state = vec![0.0f32; 14];
    state[0] = cfg.hand.rest_pose[0] as f32;
    state[1] = cfg.hand.rest_pose[1] as f32;
    state[2] = cfg.hand.rest_pose[0] as f32;
    state[3] = cfg.hand.rest_pose[1] as f32;
    state[10] = wrap_angle(theta) as f32;
    state
}
