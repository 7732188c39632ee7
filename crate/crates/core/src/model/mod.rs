//! Post-LN/DeepNorm encoder over 64 board tokens, its Pre-LN twin, and the
//! source×target policy head.

mod config;
mod forward;
pub mod io;
mod policy;
mod weights;

pub use config::{deepnorm_alpha, ModelConfig, NormStyle, SmolgenConfig, MOVES, TOKENS};
pub use forward::{
    forward, prepare_input, AblationLabel, AblationSpec, ActivationTrace, LensMode, SublayerKind,
    SublayerRecord,
};
pub(crate) use forward::check_stage;
pub use policy::{argmax_masked, legal_indices, policy_head, policy_logits, PolicyDistribution};
pub use weights::{
    AttentionWeights, FfnWeights, InputWeights, LayerWeights, PolicyWeights, SmolgenWeights,
    WeightSet,
};

#[cfg(test)]
mod tests;
