use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of board tokens.
pub const TOKENS: usize = 64;
/// Size of the flattened source×target move space.
pub const MOVES: usize = TOKENS * TOKENS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormStyle {
    /// Normalization after each residual add, residual branch scaled by α.
    PostlnDeepnorm,
    /// Normalization before each sublayer plus one final normalization.
    Preln,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmolgenConfig {
    /// Per-token compression width.
    pub compress: usize,
    pub hidden: usize,
}

impl Default for SmolgenConfig {
    fn default() -> Self {
        Self {
            compress: 4,
            hidden: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub d_model: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub ffn_dim: usize,
    pub planes: usize,
    pub norm_style: NormStyle,
    #[serde(default)]
    pub smolgen: Option<SmolgenConfig>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::toy(0)
    }
}

impl ModelConfig {
    /// Four layers of width 32 with four heads.
    pub fn toy(seed: u64) -> Self {
        Self {
            layers: 4,
            d_model: 32,
            heads: 4,
            head_dim: 8,
            ffn_dim: 48,
            planes: 4,
            norm_style: NormStyle::PostlnDeepnorm,
            smolgen: None,
            seed,
        }
    }

    pub fn with_norm_style(mut self, style: NormStyle) -> Self {
        self.norm_style = style;
        self
    }

    pub fn with_layers(mut self, layers: usize) -> Self {
        self.layers = layers;
        self
    }

    pub fn with_smolgen(mut self, smolgen: SmolgenConfig) -> Self {
        self.smolgen = Some(smolgen);
        self
    }

    /// DeepNorm residual multiplier `(2N)^(1/4)`. Pre-LN models use a plain
    /// residual, so this is 1 for them.
    pub fn alpha(&self) -> f64 {
        match self.norm_style {
            NormStyle::PostlnDeepnorm => deepnorm_alpha(self.layers),
            NormStyle::Preln => 1.0,
        }
    }

    pub fn input_width(&self) -> usize {
        self.planes + TOKENS
    }

    /// Highest lens stage; stage `last_stage()` is the unablated model.
    pub fn last_stage(&self) -> i32 {
        self.layers as i32 - 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.layers == 0 {
            return bad("model needs at least one layer".into());
        }
        if self.heads == 0 || self.head_dim == 0 {
            return bad("heads and head_dim must be positive".into());
        }
        if self.d_model != self.heads * self.head_dim {
            return bad(format!(
                "d_model {} != heads {} x head_dim {}",
                self.d_model, self.heads, self.head_dim
            ));
        }
        if self.ffn_dim == 0 || self.planes == 0 {
            return bad("ffn_dim and planes must be positive".into());
        }
        if let Some(s) = self.smolgen {
            if s.compress == 0 || s.hidden == 0 {
                return bad("smolgen sizes must be positive".into());
            }
        }
        Ok(())
    }
}

pub fn deepnorm_alpha(layers: usize) -> f64 {
    (2.0 * layers as f64).powf(0.25)
}
