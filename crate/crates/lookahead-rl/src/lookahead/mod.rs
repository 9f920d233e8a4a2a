//! Model-based lookahead control: sample imagined trajectories with the
//! policy, roll them through a one-step transition model (learned or the
//! simulator itself), score them with discounted reward plus a terminal
//! value, and execute the mean first action of the best few.

mod controller;
mod core;

pub use controller::{LookaheadController, OracleModel};
pub use core::{
    elite_indices, evaluate_trajectories, lookahead_step, sample_trajectories, select_action,
    LookaheadConfig, ModelSource, TrajectoryBatch,
};
