//! Goal-pendulum physics: a single torque-actuated revolute link (point
//! mass on a massless rod), hanging at `theta = 0`, integrated with
//! semi-implicit Euler.
//!
//! Packed state: `[theta, theta_dot]`. Internally the substep loop runs in
//! `f64`; the state is quantized back to `f32` once per control step, so a
//! trajectory is a deterministic function of the `f32` state sequence.

use crate::envs::angles::wrap_angle;
use crate::envs::config::EnvConfig;

/// One control step: `substeps` semi-implicit Euler updates under gravity,
/// viscous damping, and the (already clipped) applied torque.
pub fn step_physics(cfg: &EnvConfig, state: &mut [f32], action: &[f32]) {
    let m = cfg.pendulum_mass();
    let l = cfg.pendulum_length();
    let g = cfg.pendulum.gravity;
    let c = cfg.pendulum.damping;
    let inertia = m * l * l;
    let tau = action[0] as f64;
    let h = cfg.dt / cfg.substeps as f64;

    let mut theta = state[0] as f64;
    let mut omega = state[1] as f64;
    for _ in 0..cfg.substeps {
        let alpha = (tau - m * g * l * theta.sin() - c * omega) / inertia;
        omega += alpha * h;
        theta += omega * h;
    }
    state[0] = wrap_angle(theta) as f32;
    state[1] = omega as f32;
}

/// Mechanical energy (kinetic + potential above the hanging rest pose).
pub fn energy(cfg: &EnvConfig, state: &[f32]) -> f64 {
    let m = cfg.pendulum_mass();
    let l = cfg.pendulum_length();
    let g = cfg.pendulum.gravity;
    let inertia = m * l * l;
    let theta = state[0] as f64;
    let omega = state[1] as f64;
    0.5 * inertia * omega * omega + m * g * l * (1.0 - theta.cos())
}
