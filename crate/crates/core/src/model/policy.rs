use serde::{Deserialize, Serialize};

use super::config::{MOVES, TOKENS};
use super::weights::{PolicyWeights, WeightSet};
use crate::error::{Error, Result};
use crate::la::{mish, softmax_masked, Matrix};

/// A legality-masked distribution over the 64×64 source-target moves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDistribution {
    /// Row-major `source * 64 + target`.
    pub probs: Vec<f64>,
    pub legal: Vec<bool>,
    /// Lens stage this came from; `-1` is the input embedding.
    pub stage: i32,
}

impl PolicyDistribution {
    pub fn from_logits(logits: &[f64], legal: &[bool], stage: i32) -> Result<Self> {
        if logits.len() != MOVES || legal.len() != MOVES {
            return Err(Error::config(format!(
                "policy needs {MOVES} logits and mask entries, got {} and {}",
                logits.len(),
                legal.len()
            )));
        }
        Ok(Self {
            probs: softmax_masked(logits, legal)?,
            legal: legal.to_vec(),
            stage,
        })
    }

    pub fn legal_indices(&self) -> Vec<usize> {
        legal_indices(&self.legal)
    }

    /// Probabilities of the legal moves, in move-index order.
    pub fn legal_probs(&self) -> Vec<f64> {
        self.legal
            .iter()
            .zip(&self.probs)
            .filter(|(&l, _)| l)
            .map(|(_, &p)| p)
            .collect()
    }

    /// Most probable legal move; ties go to the lowest move index.
    pub fn argmax(&self) -> usize {
        argmax_masked(&self.probs, &self.legal).expect("a policy always has a legal move")
    }
}

pub fn legal_indices(legal: &[bool]) -> Vec<usize> {
    legal
        .iter()
        .enumerate()
        .filter(|(_, &l)| l)
        .map(|(i, _)| i)
        .collect()
}

/// Index of the largest masked value, lowest index on ties.
pub fn argmax_masked(values: &[f64], mask: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (&v, &m)) in values.iter().zip(mask).enumerate() {
        if m && best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Per-token Mish MLP, then `source · targetᵀ` over all square pairs.
pub fn policy_logits(final_h: &Matrix, p: &PolicyWeights) -> Result<Matrix> {
    if final_h.rows() != TOKENS {
        return Err(Error::config(format!(
            "policy head expects 64 tokens, got {}",
            final_h.rows()
        )));
    }
    let mut hidden = final_h.matmul(&p.dense)?;
    hidden.add_row_vector(&p.dense_bias)?;
    let hidden = hidden.map(mish);
    let mut source = hidden.matmul(&p.source)?;
    source.add_row_vector(&p.source_bias)?;
    let mut target = hidden.matmul(&p.target)?;
    target.add_row_vector(&p.target_bias)?;
    source.matmul_t(&target)
}

pub fn policy_head(final_h: &Matrix, w: &WeightSet, legal: &[bool]) -> Result<PolicyDistribution> {
    let logits = policy_logits(final_h, &w.policy)?;
    PolicyDistribution::from_logits(logits.data(), legal, w.config.last_stage())
}
