use serde::{Deserialize, Serialize};

use super::config::{NormStyle, MOVES, TOKENS};
use super::policy::policy_logits;
use super::weights::{AttentionWeights, FfnWeights, LayerWeights, SmolgenWeights, WeightSet};
use crate::error::{Error, Result};
use crate::la::{
    layer_norm_eps, mish, softmax_rows, squared_relu, swish, vec_matmul, Matrix, NormStats,
    LN_EPS,
};

/// How biases are treated in the layers a lens cuts away.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LensMode {
    /// Ablate LayerNorm β together with the sublayers.
    #[default]
    Default,
    /// Keep LayerNorm β of ablated layers.
    KeepBeta,
}

impl LensMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LensMode::Default => "default",
            LensMode::KeepBeta => "keep-beta",
        }
    }
}

impl std::str::FromStr for LensMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(LensMode::Default),
            "keep-beta" | "keep_beta" => Ok(LensMode::KeepBeta),
            other => Err(Error::Argument(format!("unknown lens mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationLabel {
    Full,
    LensDefault,
    LensKeepBeta,
}

/// Which sublayers and norm shifts are zeroed in a forward pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationSpec {
    /// Sublayers of layers `0..=keep_through` run; `-1` keeps none.
    pub keep_through: i32,
    pub zero_mha: Vec<bool>,
    pub zero_ffn: Vec<bool>,
    pub zero_ln_beta: Vec<bool>,
    pub label: AblationLabel,
}

impl AblationSpec {
    pub fn full(layers: usize) -> Self {
        Self {
            keep_through: layers as i32 - 1,
            zero_mha: vec![false; layers],
            zero_ffn: vec![false; layers],
            zero_ln_beta: vec![false; layers],
            label: AblationLabel::Full,
        }
    }

    /// Zero every sublayer of layers `> stage`; in [`LensMode::Default`] also
    /// their LayerNorm β.
    pub fn lens(layers: usize, stage: i32, mode: LensMode) -> Result<Self> {
        check_stage(layers, stage)?;
        let cut: Vec<bool> = (0..layers).map(|l| l as i32 > stage).collect();
        let (zero_ln_beta, label) = match mode {
            LensMode::Default => (cut.clone(), AblationLabel::LensDefault),
            LensMode::KeepBeta => (vec![false; layers], AblationLabel::LensKeepBeta),
        };
        Ok(Self {
            keep_through: stage,
            zero_mha: cut.clone(),
            zero_ffn: cut,
            zero_ln_beta,
            label,
        })
    }

    pub fn layers(&self) -> usize {
        self.zero_mha.len()
    }
}

pub(crate) fn check_stage(layers: usize, stage: i32) -> Result<()> {
    if stage < -1 || stage >= layers as i32 {
        return Err(Error::Argument(format!(
            "stage {stage} outside -1..={}",
            layers as i32 - 1
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SublayerKind {
    Mha,
    Ffn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublayerRecord {
    pub layer: usize,
    pub kind: SublayerKind,
    /// Unbiased sublayer output; the zero matrix when ablated.
    pub raw: Matrix,
    /// Constant row added alongside `raw`; zero when ablated.
    pub bias: Vec<f64>,
    /// Post-LN: `α·h + raw + bias` before normalization.
    /// Pre-LN: `h + raw + bias`, which is also the stream value.
    pub residual: Matrix,
    /// Post-LN: statistics of the post-norm. Pre-LN: of the pre-norm input.
    pub stats: NormStats,
    /// Hidden state after this sublayer.
    pub output: Matrix,
    pub ablated: bool,
    pub beta_zeroed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationTrace {
    pub h0: Matrix,
    /// `2N` records, attention then FFN per layer.
    pub sublayers: Vec<SublayerRecord>,
    /// Input to the policy head.
    pub final_hidden: Matrix,
    /// Statistics of the Pre-LN final norm.
    pub final_stats: Option<NormStats>,
    /// `64 × 64` source×target logits.
    pub policy_logits: Matrix,
    pub ablation: AblationSpec,
}

impl ActivationTrace {
    /// Residual-stream state after layer `stage` (`-1` is the prepared input).
    pub fn hidden_after(&self, stage: i32) -> &Matrix {
        if stage < 0 {
            &self.h0
        } else {
            &self.sublayers[2 * stage as usize + 1].output
        }
    }

    pub fn sublayer(&self, layer: usize, kind: SublayerKind) -> &SublayerRecord {
        let idx = 2 * layer + usize::from(kind == SublayerKind::Ffn);
        &self.sublayers[idx]
    }
}

/// `h₀ = scale ⊙ mish([planes, posenc]·W + b) + shift`, with `planes` given
/// row-major as `64 × P` booleans.
pub fn prepare_input(planes: &[bool], posenc: &Matrix, w: &WeightSet) -> Result<Matrix> {
    let p = w.config.planes;
    if planes.len() != TOKENS * p {
        return Err(Error::config(format!(
            "expected {} plane bits, got {}",
            TOKENS * p,
            planes.len()
        )));
    }
    if posenc.shape() != (TOKENS, TOKENS) {
        return Err(Error::config(format!(
            "positional encoding must be 64x64, got {:?}",
            posenc.shape()
        )));
    }
    if posenc.data().iter().any(|&v| v != -1.0 && v != 0.0 && v != 1.0) {
        return Err(Error::config("positional encoding entries must be -1, 0 or 1"));
    }
    let x = Matrix::from_fn(TOKENS, p + TOKENS, |r, c| {
        if c < p {
            if planes[r * p + c] {
                1.0
            } else {
                0.0
            }
        } else {
            posenc.get(r, c - p)
        }
    });
    let mut h = x.matmul(&w.input.linear)?;
    h.add_row_vector(&w.input.bias)?;
    let d = w.config.d_model;
    for row in h.data_mut().chunks_exact_mut(d) {
        for j in 0..d {
            row[j] = w.input.scale[j] * mish(row[j]) + w.input.shift[j];
        }
    }
    Ok(h)
}

/// Supplementary `heads × 64 × 64` attention logits.
pub(crate) fn smolgen_logits(x: &Matrix, s: &SmolgenWeights, heads: usize) -> Result<Vec<Matrix>> {
    let compressed = x.matmul(&s.compress)?;
    let mut hidden = vec_matmul(compressed.data(), &s.dense1)?;
    for (h, b) in hidden.iter_mut().zip(&s.bias1) {
        *h = swish(*h + b);
    }
    let mut per_head = vec_matmul(&hidden, &s.dense2)?;
    for (h, b) in per_head.iter_mut().zip(&s.bias2) {
        *h = swish(*h + b);
    }
    let width = s.dense1.cols();
    (0..heads)
        .map(|h| {
            let logits = vec_matmul(&per_head[h * width..(h + 1) * width], &s.emit)?;
            debug_assert_eq!(logits.len(), MOVES);
            Matrix::from_vec(TOKENS, TOKENS, logits)
        })
        .collect()
}

/// Bidirectional multi-head attention without the bias path.
pub(crate) fn attention_raw(
    x: &Matrix,
    a: &AttentionWeights,
    smolgen: Option<&SmolgenWeights>,
    heads: usize,
    head_dim: usize,
) -> Result<Matrix> {
    let q = x.matmul(&a.w_q)?;
    let k = x.matmul(&a.w_k)?;
    let v = x.matmul(&a.w_v)?;
    let extra = smolgen.map(|s| smolgen_logits(x, s, heads)).transpose()?;
    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut concat = Matrix::zeros(x.rows(), heads * head_dim);
    for h in 0..heads {
        let qh = q.col_slice(h * head_dim, head_dim);
        let kh = k.col_slice(h * head_dim, head_dim);
        let vh = v.col_slice(h * head_dim, head_dim);
        let mut scores = qh.matmul_t(&kh)?.scale(scale);
        if let Some(extra) = &extra {
            for (s, e) in scores.data_mut().iter_mut().zip(extra[h].data()) {
                *s += e;
            }
        }
        softmax_rows(&mut scores);
        let out = scores.matmul(&vh)?;
        for r in 0..x.rows() {
            concat.row_mut(r)[h * head_dim..(h + 1) * head_dim].copy_from_slice(out.row(r));
        }
    }
    concat.matmul(&a.w_o)
}

/// FFN output without the output bias.
pub(crate) fn ffn_raw(x: &Matrix, f: &FfnWeights) -> Result<Matrix> {
    let mut hidden = x.matmul(&f.w1)?;
    hidden.add_row_vector(&f.b1)?;
    let hidden = hidden.map(squared_relu);
    hidden.matmul(&f.w2)
}

struct SublayerOut {
    raw: Matrix,
    bias: Vec<f64>,
}

fn run_sublayer(
    kind: SublayerKind,
    x: &Matrix,
    lw: &LayerWeights,
    w: &WeightSet,
    ablated: bool,
) -> Result<SublayerOut> {
    let d = w.config.d_model;
    if ablated {
        return Ok(SublayerOut {
            raw: Matrix::zeros(x.rows(), d),
            bias: vec![0.0; d],
        });
    }
    Ok(match kind {
        SublayerKind::Mha => SublayerOut {
            raw: attention_raw(
                x,
                &lw.attn,
                lw.smolgen.as_ref(),
                w.config.heads,
                w.config.head_dim,
            )?,
            bias: lw.attn.bias_path(),
        },
        SublayerKind::Ffn => SublayerOut {
            raw: ffn_raw(x, &lw.ffn)?,
            bias: lw.ffn.b2.clone(),
        },
    })
}

/// Runs the encoder from a prepared embedding under the given ablation and
/// records everything the decomposition and the metrics need.
pub fn forward(w: &WeightSet, h0: &Matrix, ab: &AblationSpec) -> Result<ActivationTrace> {
    let n = w.n_layers();
    if h0.shape() != (TOKENS, w.config.d_model) {
        return Err(Error::config(format!(
            "input embedding must be 64x{}, got {:?}",
            w.config.d_model,
            h0.shape()
        )));
    }
    if ab.layers() != n || ab.zero_ffn.len() != n || ab.zero_ln_beta.len() != n {
        return Err(Error::config(format!(
            "ablation spec for {} layers on a {n}-layer model",
            ab.layers()
        )));
    }
    let alpha = w.alpha();
    let mut h = h0.clone();
    let mut sublayers = Vec::with_capacity(2 * n);
    for (l, lw) in w.layers.iter().enumerate() {
        for kind in [SublayerKind::Mha, SublayerKind::Ffn] {
            let ablated = match kind {
                SublayerKind::Mha => ab.zero_mha[l],
                SublayerKind::Ffn => ab.zero_ffn[l],
            };
            let norm = match kind {
                SublayerKind::Mha => &lw.norm_mha,
                SublayerKind::Ffn => &lw.norm_ffn,
            };
            let beta_zeroed = ab.zero_ln_beta[l];
            let record = match w.config.norm_style {
                NormStyle::PostlnDeepnorm => {
                    let out = run_sublayer(kind, &h, lw, w, ablated)?;
                    let mut residual = h.scale(alpha);
                    for (r, z) in residual.data_mut().iter_mut().zip(out.raw.data()) {
                        *r += z;
                    }
                    residual.add_row_vector(&out.bias)?;
                    let (normed, stats) = layer_norm_eps(&residual, norm, LN_EPS, beta_zeroed)?;
                    SublayerRecord {
                        layer: l,
                        kind,
                        raw: out.raw,
                        bias: out.bias,
                        residual,
                        stats,
                        output: normed,
                        ablated,
                        beta_zeroed,
                    }
                }
                NormStyle::Preln => {
                    let (x, stats) = layer_norm_eps(&h, norm, LN_EPS, beta_zeroed)?;
                    let out = run_sublayer(kind, &x, lw, w, ablated)?;
                    let mut residual = h.clone();
                    if !ablated {
                        for (r, z) in residual.data_mut().iter_mut().zip(out.raw.data()) {
                            *r += z;
                        }
                        residual.add_row_vector(&out.bias)?;
                    }
                    SublayerRecord {
                        layer: l,
                        kind,
                        raw: out.raw,
                        bias: out.bias,
                        output: residual.clone(),
                        residual,
                        stats,
                        ablated,
                        beta_zeroed,
                    }
                }
            };
            h = record.output.clone();
            sublayers.push(record);
        }
    }
    let (final_hidden, final_stats) = match (&w.config.norm_style, &w.final_norm) {
        (NormStyle::PostlnDeepnorm, _) => (h, None),
        (NormStyle::Preln, Some(fnorm)) => {
            let (out, stats) = layer_norm_eps(&h, fnorm, LN_EPS, false)?;
            (out, Some(stats))
        }
        (NormStyle::Preln, None) => {
            return Err(Error::config("pre-LN model without a final norm"));
        }
    };
    let policy_logits = policy_logits(&final_hidden, &w.policy)?;
    Ok(ActivationTrace {
        h0: h0.clone(),
        sublayers,
        final_hidden,
        final_stats,
        policy_logits,
        ablation: ab.clone(),
    })
}
