//! Angle arithmetic on the circle.

use std::f64::consts::PI;

/// Wrap any angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let r = theta.rem_euclid(two_pi); // [0, 2*pi)
    if r > PI {
        r - two_pi
    } else {
        r
    }
}

/// Shortest angular distance `|wrap(a - b)|`, in `[0, pi]`.
pub fn rot_dist(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}
