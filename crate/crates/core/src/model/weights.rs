use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, NormStyle, SmolgenConfig, MOVES, TOKENS};
use crate::error::{Error, Result};
use crate::la::{LayerNormParams, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputWeights {
    /// `(planes + 64) × d_model`
    pub linear: Matrix,
    pub bias: Vec<f64>,
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionWeights {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
    /// Value projection bias.
    pub b_v: Vec<f64>,
    pub w_o: Matrix,
    /// Output projection bias.
    pub b_o: Vec<f64>,
}

impl AttentionWeights {
    /// Constant row the attention sublayer adds to every token: `b_V · W_O + b_O`.
    /// Attention rows sum to one, so the value bias passes through unchanged.
    pub fn bias_path(&self) -> Vec<f64> {
        let mut out = crate::la::vec_matmul(&self.b_v, &self.w_o).expect("shapes validated");
        for (o, b) in out.iter_mut().zip(&self.b_o) {
            *o += b;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnWeights {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    /// Output bias.
    pub b2: Vec<f64>,
}

/// Supplementary attention logits generated from a compressed board vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmolgenWeights {
    /// `d_model × compress`, applied per token.
    pub compress: Matrix,
    /// `(64·compress) × hidden`
    pub dense1: Matrix,
    pub bias1: Vec<f64>,
    /// `hidden × (heads·hidden)`
    pub dense2: Matrix,
    pub bias2: Vec<f64>,
    /// `hidden × 4096`, shared by all heads.
    pub emit: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub attn: AttentionWeights,
    pub ffn: FfnWeights,
    /// Post-attention norm (Post-LN) or pre-attention norm (Pre-LN).
    pub norm_mha: LayerNormParams,
    /// Post-FFN norm (Post-LN) or pre-FFN norm (Pre-LN).
    pub norm_ffn: LayerNormParams,
    pub smolgen: Option<SmolgenWeights>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyWeights {
    pub dense: Matrix,
    pub dense_bias: Vec<f64>,
    pub source: Matrix,
    pub source_bias: Vec<f64>,
    pub target: Matrix,
    pub target_bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSet {
    pub config: ModelConfig,
    pub input: InputWeights,
    pub layers: Vec<LayerWeights>,
    /// Present only for Pre-LN models.
    pub final_norm: Option<LayerNormParams>,
    pub policy: PolicyWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ParamKind {
    Weight { deepnorm: bool },
    Bias,
    Scale,
    Shift,
}

pub(crate) enum ParamMut<'a> {
    Mat(&'a mut Matrix),
    Vec(&'a mut Vec<f64>),
}

impl ParamMut<'_> {
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        match self {
            ParamMut::Mat(m) => m.data_mut(),
            ParamMut::Vec(v) => v.as_mut_slice(),
        }
    }

    pub(crate) fn shape(&self) -> Vec<usize> {
        match self {
            ParamMut::Mat(m) => vec![m.rows(), m.cols()],
            ParamMut::Vec(v) => vec![v.len()],
        }
    }
}

pub(crate) struct NamedParam<'a> {
    pub name: String,
    pub kind: ParamKind,
    pub value: ParamMut<'a>,
}

fn mat(rows: usize, cols: usize) -> Matrix {
    Matrix::zeros(rows, cols)
}

impl WeightSet {
    /// Weights that make every sublayer output zero: all matrices and biases
    /// zero, norm scales one, norm shifts zero, input scale one.
    pub fn neutral(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let d = config.d_model;
        let layers = (0..config.layers)
            .map(|_| LayerWeights {
                attn: AttentionWeights {
                    w_q: mat(d, d),
                    w_k: mat(d, d),
                    w_v: mat(d, d),
                    b_v: vec![0.0; d],
                    w_o: mat(d, d),
                    b_o: vec![0.0; d],
                },
                ffn: FfnWeights {
                    w1: mat(d, config.ffn_dim),
                    b1: vec![0.0; config.ffn_dim],
                    w2: mat(config.ffn_dim, d),
                    b2: vec![0.0; d],
                },
                norm_mha: LayerNormParams::identity(d),
                norm_ffn: LayerNormParams::identity(d),
                smolgen: config.smolgen.map(|s| neutral_smolgen(config, s)),
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            input: InputWeights {
                linear: mat(config.input_width(), d),
                bias: vec![0.0; d],
                scale: vec![1.0; d],
                shift: vec![0.0; d],
            },
            layers,
            final_norm: match config.norm_style {
                NormStyle::Preln => Some(LayerNormParams::identity(d)),
                NormStyle::PostlnDeepnorm => None,
            },
            policy: PolicyWeights {
                dense: mat(d, d),
                dense_bias: vec![0.0; d],
                source: mat(d, d),
                source_bias: vec![0.0; d],
                target: mat(d, d),
                target_bias: vec![0.0; d],
            },
        })
    }

    /// Seeded random initialization. Matrices are N(0, 1/√d_model); for
    /// DeepNorm models the value, output and FFN projections are further
    /// multiplied by `(2N)^(-1/4)`.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        let mut w = Self::neutral(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let weight = Normal::new(0.0, 1.0 / (config.d_model as f64).sqrt()).expect("finite std");
        let small = Normal::new(0.0, 0.1).expect("finite std");
        let down = match config.norm_style {
            NormStyle::PostlnDeepnorm => config.alpha().recip(),
            NormStyle::Preln => 1.0,
        };
        for mut p in w.params_mut() {
            let kind = p.kind;
            for x in p.value.values_mut() {
                *x = match kind {
                    ParamKind::Weight { deepnorm } => {
                        let v = weight.sample(&mut rng);
                        if deepnorm {
                            v * down
                        } else {
                            v
                        }
                    }
                    ParamKind::Bias | ParamKind::Shift => small.sample(&mut rng),
                    ParamKind::Scale => 1.0 + small.sample(&mut rng),
                };
            }
        }
        Ok(w)
    }

    pub fn alpha(&self) -> f64 {
        self.config.alpha()
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Every learned array with a stable dotted name, in a fixed order.
    pub(crate) fn params_mut<'a>(&'a mut self) -> Vec<NamedParam<'a>> {
        use ParamKind::*;
        let mut out = Vec::new();
        let mut push = |name: String, kind: ParamKind, value: ParamMut<'a>| {
            out.push(NamedParam { name, kind, value })
        };
        let WeightSet {
            input,
            layers,
            final_norm,
            policy,
            ..
        } = self;
        let w = Weight { deepnorm: false };
        let dn = Weight { deepnorm: true };
        push("input.linear".into(), w, ParamMut::Mat(&mut input.linear));
        push("input.bias".into(), Bias, ParamMut::Vec(&mut input.bias));
        push("input.scale".into(), Scale, ParamMut::Vec(&mut input.scale));
        push("input.shift".into(), Shift, ParamMut::Vec(&mut input.shift));
        for (i, l) in layers.iter_mut().enumerate() {
            let p = |s: &str| format!("layers.{i}.{s}");
            push(p("attn.w_q"), w, ParamMut::Mat(&mut l.attn.w_q));
            push(p("attn.w_k"), w, ParamMut::Mat(&mut l.attn.w_k));
            push(p("attn.w_v"), dn, ParamMut::Mat(&mut l.attn.w_v));
            push(p("attn.b_v"), Bias, ParamMut::Vec(&mut l.attn.b_v));
            push(p("attn.w_o"), dn, ParamMut::Mat(&mut l.attn.w_o));
            push(p("attn.b_o"), Bias, ParamMut::Vec(&mut l.attn.b_o));
            push(p("ffn.w1"), dn, ParamMut::Mat(&mut l.ffn.w1));
            push(p("ffn.b1"), Bias, ParamMut::Vec(&mut l.ffn.b1));
            push(p("ffn.w2"), dn, ParamMut::Mat(&mut l.ffn.w2));
            push(p("ffn.b2"), Bias, ParamMut::Vec(&mut l.ffn.b2));
            push(p("norm_mha.gamma"), Scale, ParamMut::Vec(&mut l.norm_mha.gamma));
            push(p("norm_mha.beta"), Shift, ParamMut::Vec(&mut l.norm_mha.beta));
            push(p("norm_ffn.gamma"), Scale, ParamMut::Vec(&mut l.norm_ffn.gamma));
            push(p("norm_ffn.beta"), Shift, ParamMut::Vec(&mut l.norm_ffn.beta));
            if let Some(s) = l.smolgen.as_mut() {
                push(p("smolgen.compress"), w, ParamMut::Mat(&mut s.compress));
                push(p("smolgen.dense1"), w, ParamMut::Mat(&mut s.dense1));
                push(p("smolgen.bias1"), Bias, ParamMut::Vec(&mut s.bias1));
                push(p("smolgen.dense2"), w, ParamMut::Mat(&mut s.dense2));
                push(p("smolgen.bias2"), Bias, ParamMut::Vec(&mut s.bias2));
                push(p("smolgen.emit"), w, ParamMut::Mat(&mut s.emit));
            }
        }
        if let Some(n) = final_norm.as_mut() {
            push("final_norm.gamma".into(), Scale, ParamMut::Vec(&mut n.gamma));
            push("final_norm.beta".into(), Shift, ParamMut::Vec(&mut n.beta));
        }
        push("policy.dense".into(), w, ParamMut::Mat(&mut policy.dense));
        push("policy.dense_bias".into(), Bias, ParamMut::Vec(&mut policy.dense_bias));
        push("policy.source".into(), w, ParamMut::Mat(&mut policy.source));
        push("policy.source_bias".into(), Bias, ParamMut::Vec(&mut policy.source_bias));
        push("policy.target".into(), w, ParamMut::Mat(&mut policy.target));
        push("policy.target_bias".into(), Bias, ParamMut::Vec(&mut policy.target_bias));
        out
    }

    /// Checks every array against the config and for finiteness.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.layers.len() != self.config.layers {
            return Err(Error::config(format!(
                "{} layer blocks for a {}-layer config",
                self.layers.len(),
                self.config.layers
            )));
        }
        let mut reference = Self::neutral(&self.config)?;
        let mut this = self.clone();
        let expected = reference.params_mut();
        let actual = this.params_mut();
        if expected.len() != actual.len() {
            return Err(Error::config("parameter list does not match config"));
        }
        for (e, mut a) in expected.into_iter().zip(actual) {
            if e.name != a.name || e.value.shape() != a.value.shape() {
                return Err(Error::config(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    a.name,
                    a.value.shape(),
                    e.value.shape()
                )));
            }
            if a.value.values_mut().iter().any(|x| !x.is_finite()) {
                return Err(Error::config(format!("parameter {} is not finite", a.name)));
            }
        }
        Ok(())
    }
}

fn neutral_smolgen(config: &ModelConfig, s: SmolgenConfig) -> SmolgenWeights {
    SmolgenWeights {
        compress: mat(config.d_model, s.compress),
        dense1: mat(TOKENS * s.compress, s.hidden),
        bias1: vec![0.0; s.hidden],
        dense2: mat(s.hidden, config.heads * s.hidden),
        bias2: vec![0.0; config.heads * s.hidden],
        emit: mat(s.hidden, MOVES),
    }
}
