//! Lookahead as a drop-in episode controller, with the simulator available
//! as a ground-truth transition model.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::dynamics::OneStepModel;
use crate::envs::{oracle_step, TaskSpec};
use crate::error::Result;
use crate::harness::{ControlCtx, Controller};
use crate::lookahead::core::{lookahead_step, LookaheadConfig};
use crate::nncore::{Tensor, TensorBuffer};
use crate::ppo::{PolicyArtifact, ValueArtifact};

/// The simulator's own one-control-step transition exposed through the
/// model interface (clipping included). Exact by construction: states and
/// the simulator's packed states are the same f32 encoding.
#[derive(Debug, Clone)]
pub struct OracleModel {
    pub task: TaskSpec,
}

impl OneStepModel for OracleModel {
    fn state_dim(&self) -> usize {
        self.task.state_dim
    }

    fn action_dim(&self) -> usize {
        self.task.action_dim
    }

    fn predict_batch(
        &self,
        states: &TensorBuffer,
        actions: &TensorBuffer,
    ) -> Result<TensorBuffer> {
        let mut out = Tensor::matrix(states.rows(), states.cols());
        for r in 0..states.rows() {
            out.row_mut(r)
                .copy_from_slice(&oracle_step(&self.task, states.row(r), actions.row(r))?);
        }
        Ok(out)
    }
}

/// Episode controller that plans with [`lookahead_step`] at every decision.
#[derive(Clone)]
pub struct LookaheadController {
    pub policy: PolicyArtifact,
    pub value: ValueArtifact,
    pub model: Arc<dyn OneStepModel + Send + Sync>,
    pub cfg: LookaheadConfig,
}

impl LookaheadController {
    pub fn new(
        policy: PolicyArtifact,
        value: ValueArtifact,
        model: Arc<dyn OneStepModel + Send + Sync>,
        cfg: LookaheadConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(LookaheadController {
            policy,
            value,
            model,
            cfg,
        })
    }
}

impl Controller for LookaheadController {
    fn act(&mut self, ctx: &ControlCtx<'_>, rng: &mut ChaCha8Rng) -> Result<Vec<f32>> {
        lookahead_step(
            &self.policy,
            &self.value,
            self.model.as_ref(),
            ctx.task,
            ctx.state,
            ctx.goal,
            ctx.prev_action,
            &self.cfg,
            rng,
        )
    }
}
