//! Joint actuation laws: PD position control and tendon-synergy coupling.

use crate::error::{Error, Result};

/// PD torque toward the reference position `u`:
/// `tau = kp*(u - q) - kd*qd`, clipped to `[-tau_max, tau_max]`.
pub fn pd_torque(kp: f64, kd: f64, u: f64, q: f64, qd: f64, tau_max: f64) -> f64 {
    let tau = kp * (u - q) - kd * qd;
    tau.clamp(-tau_max, tau_max)
}

/// Tendon-synergy torque: `tau = K*(S*a - q) - D*qd` (element-wise on
/// joints; `K`, `D` diagonal, given as vectors; `S` is `n_joints x
/// n_actuators`, row-major). Results are clipped to `[-tau_max, tau_max]`.
pub fn tendon_torque(
    k: &[f64],
    s: &[f64],
    d: &[f64],
    a: &[f64],
    q: &[f64],
    qd: &[f64],
    tau_max: f64,
) -> Result<Vec<f64>> {
    let n_joints = q.len();
    let n_act = a.len();
    if k.len() != n_joints || d.len() != n_joints || qd.len() != n_joints {
        return Err(Error::shape(
            "tendon_torque",
            format!("{n_joints} joints for K, D, qd"),
            format!("K {} / D {} / qd {}", k.len(), d.len(), qd.len()),
        ));
    }
    if s.len() != n_joints * n_act {
        return Err(Error::shape(
            "tendon_torque",
            format!("S with {n_joints}x{n_act} entries"),
            format!("{}", s.len()),
        ));
    }
    let mut tau = Vec::with_capacity(n_joints);
    for j in 0..n_joints {
        let mut target = 0.0;
        for (i, ai) in a.iter().enumerate() {
            target += s[j * n_act + i] * ai;
        }
        let t = k[j] * (target - q[j]) - d[j] * qd[j];
        tau.push(t.clamp(-tau_max, tau_max));
    }
    Ok(tau)
}
