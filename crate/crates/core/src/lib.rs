//! Zero-ablation logit lens for Post-LN/DeepNorm transformer encoders.
//!
//! The crate contains a small dense kernel ([`la`]), a from-scratch encoder
//! with a source×target policy head ([`model`]), the lens itself ([`lens`]),
//! the closed-form residual decomposition used to check it ([`decomp`]),
//! policy-dynamics metrics ([`metrics`]) and a toy 8×8 game with puzzles,
//! tournaments and Bayesian Elo ([`arena`]).

pub mod arena;
pub mod decomp;
pub mod error;
pub mod la;
pub mod lens;
pub mod metrics;
pub mod model;
pub mod notation;

pub use error::{Error, Result};
