use crate::error::Result;
use crate::la::Matrix;
use crate::lens::lens_policy;
use crate::model::{LensMode, PolicyDistribution, WeightSet};

use super::encode::{posenc, prepare_state};
use super::game::GameState;

/// Anything that yields a move distribution for a state at a lens stage.
pub trait PolicySource: Sync {
    fn policy(&self, s: &GameState, stage: i32) -> Result<PolicyDistribution>;

    fn best_move(&self, s: &GameState, stage: i32) -> Result<usize> {
        Ok(self.policy(s, stage)?.argmax())
    }
}

/// Zero-ablation lens policies of a model.
pub struct LensPlayer<'a> {
    pub weights: &'a WeightSet,
    pub mode: LensMode,
    posenc: Matrix,
}

impl<'a> LensPlayer<'a> {
    pub fn new(weights: &'a WeightSet, mode: LensMode) -> Self {
        Self {
            weights,
            mode,
            posenc: posenc(),
        }
    }
}

impl PolicySource for LensPlayer<'_> {
    fn policy(&self, s: &GameState, stage: i32) -> Result<PolicyDistribution> {
        let p = prepare_state(self.weights, s, &self.posenc)?;
        lens_policy(self.weights, &p.h0, &p.legal, stage, self.mode)
    }
}
