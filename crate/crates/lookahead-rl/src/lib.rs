//! Model-based lookahead control on desk-scale manipulation tasks.
//!
//! The crate is organized around a single pipeline:
//!
//! 1. [`nncore`] — a minimal dense-network engine (MLPs with batch
//!    normalization and dropout, Gaussian policy heads, Adam, binary
//!    checkpoints).
//! 2. [`envs`] — deterministic rigid-body toy environments: a goal-angle
//!    pendulum and a planar two-finger hand rotating a disc in a cradle,
//!    with PD or tendon-synergy actuation.
//! 3. [`ppo`] — an actor-critic PPO trainer producing policy and value
//!    checkpoints.
//! 4. [`dynamics`] — one-step transition-model learning from logged
//!    interaction data (monolithic and per-joint modular variants).
//! 5. [`lookahead`] — the sampling controller: imagine short action
//!    sequences through the policy and a transition model, score them with
//!    discounted reward plus a terminal value estimate, and execute the
//!    average of the best first actions.
//! 6. [`harness`] — paired-seed evaluation, density sweeps, cross-guidance
//!    studies, and throughput benchmarks.
//!
//! Everything is seeded and single-threaded by default; identical configs
//! and seeds reproduce artifacts byte-for-byte.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod envs;
pub mod error;
pub mod harness;
pub mod lookahead;
pub mod nncore;
pub mod ppo;
pub mod rng;
#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
