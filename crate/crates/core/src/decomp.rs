//! Closed-form decomposition of a Post-LN/DeepNorm encoder's final hidden
//! state into input, attention, FFN, bias and mean-centering terms:
//!
//! `h_N = i + z_mha + z_ffn + b − m`
//!
//! Every summand is a traced quantity (raw sublayer output, bias vector, LN
//! shift or LN mean) multiplied by the α powers, γ products and recorded σ
//! of all the normalizations that follow it. Sublayers zeroed by a lens
//! contribute nothing, but their normalizations still scale everything
//! upstream, which is exactly the truncation the lens performs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::la::Matrix;
use crate::model::{
    forward, policy_head, AblationSpec, ActivationTrace, LensMode, NormStyle, PolicyDistribution,
    SublayerKind, WeightSet, TOKENS,
};

/// Scalar and γ coefficients of one layer's contributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerLedger {
    pub layer: usize,
    /// Per token: `α^(2(N−l)−1) / ∏_{l'≥l} σ^MHA σ^FFN`.
    pub mha_scale: Vec<f64>,
    /// Per token: `α^(2(N−l)−2) / (σ^FFN_l ∏_{l'>l} σ^MHA σ^FFN)`.
    pub ffn_scale: Vec<f64>,
    /// Per token: `α^(2(N−l)−1) / (σ^FFN_l ∏_{l'>l} σ^MHA σ^FFN)`, the β^MHA coefficient.
    pub beta_mha_scale: Vec<f64>,
    /// Per token: `α^(2(N−l)−2) / ∏_{l'>l} σ^MHA σ^FFN`, the β^FFN coefficient.
    pub beta_ffn_scale: Vec<f64>,
    /// `⊙_{l'≥l} γ^MHA ⊙ γ^FFN`
    pub mha_gamma: Vec<f64>,
    /// `γ^FFN_l ⊙_{l'>l} γ^MHA ⊙ γ^FFN`
    pub ffn_gamma: Vec<f64>,
    /// `⊙_{l'>l} γ^MHA ⊙ γ^FFN`
    pub after_gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTerms {
    pub i_term: Matrix,
    pub z_mha: Matrix,
    pub z_ffn: Matrix,
    pub b_term: Matrix,
    pub m_term: Matrix,
    /// One mean-centering summand per sublayer, attention then FFN per layer.
    pub m_summands: Vec<Matrix>,
    pub ledgers: Vec<LayerLedger>,
}

impl DecompositionTerms {
    /// `i + z_mha + z_ffn + b − m`
    pub fn reconstruct(&self) -> Matrix {
        let mut out = self.i_term.clone();
        for (((o, zm), zf), (b, m)) in out
            .data_mut()
            .iter_mut()
            .zip(self.z_mha.data())
            .zip(self.z_ffn.data())
            .zip(self.b_term.data().iter().zip(self.m_term.data()))
        {
            *o += zm + zf + b - m;
        }
        out
    }

    pub fn norms(&self) -> TermNorms {
        TermNorms {
            i: self.i_term.frobenius_norm(),
            z_mha: self.z_mha.frobenius_norm(),
            z_ffn: self.z_ffn.frobenius_norm(),
            b: self.b_term.frobenius_norm(),
            m: self.m_term.frobenius_norm(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermNorms {
    pub i: f64,
    pub z_mha: f64,
    pub z_ffn: f64,
    pub b: f64,
    pub m: f64,
}

/// `acc += s[t] * g[j] * v[j]` for every token `t`.
fn accumulate_row_term(acc: &mut Matrix, s: &[f64], g: &[f64], v: &[f64]) {
    for t in 0..acc.rows() {
        let row = acc.row_mut(t);
        for j in 0..row.len() {
            row[j] += s[t] * g[j] * v[j];
        }
    }
}

/// `acc += s[t] * g[j] * z[t][j]`
fn accumulate_matrix_term(acc: &mut Matrix, s: &[f64], g: &[f64], z: &Matrix) {
    for t in 0..acc.rows() {
        let zt = z.row(t);
        let row = acc.row_mut(t);
        for j in 0..row.len() {
            row[j] += s[t] * g[j] * zt[j];
        }
    }
}

pub fn decompose(w: &WeightSet, trace: &ActivationTrace, upto: i32) -> Result<DecompositionTerms> {
    if w.config.norm_style != NormStyle::PostlnDeepnorm {
        return Err(Error::Mode("decomposition is defined for post-LN models".into()));
    }
    let n = w.n_layers();
    let d = w.config.d_model;
    if trace.sublayers.len() != 2 * n || trace.h0.shape() != (TOKENS, d) {
        return Err(Error::Config(format!(
            "trace with {} sublayers does not match a {n}-layer model",
            trace.sublayers.len()
        )));
    }
    if trace.ablation.keep_through != upto {
        return Err(Error::Config(format!(
            "trace was produced keeping layers through {}, not {upto}",
            trace.ablation.keep_through
        )));
    }
    let alpha = w.alpha();
    let sig = |l: usize, kind: SublayerKind, t: usize| trace.sublayer(l, kind).stats.sigma[t];
    // Product of σ^MHA σ^FFN over layers `from..n`, per token.
    let sigma_tail = |from: usize, t: usize| -> f64 {
        (from..n)
            .map(|l| sig(l, SublayerKind::Mha, t) * sig(l, SublayerKind::Ffn, t))
            .product()
    };
    let gamma_tail = |from: usize| -> Vec<f64> {
        let mut g = vec![1.0; d];
        for l in from..n {
            for j in 0..d {
                g[j] *= w.layers[l].norm_mha.gamma[j] * w.layers[l].norm_ffn.gamma[j];
            }
        }
        g
    };

    let mut i_term = Matrix::zeros(TOKENS, d);
    let i_scale: Vec<f64> = (0..TOKENS)
        .map(|t| alpha.powi(2 * n as i32) / sigma_tail(0, t))
        .collect();
    accumulate_matrix_term(&mut i_term, &i_scale, &gamma_tail(0), &trace.h0);

    let mut z_mha = Matrix::zeros(TOKENS, d);
    let mut z_ffn = Matrix::zeros(TOKENS, d);
    let mut b_term = Matrix::zeros(TOKENS, d);
    let mut m_term = Matrix::zeros(TOKENS, d);
    let mut m_summands = Vec::with_capacity(2 * n);
    let mut ledgers = Vec::with_capacity(n);

    for l in 0..n {
        let lw = &w.layers[l];
        let e_mha = 2 * (n - l) as i32 - 1;
        let e_ffn = 2 * (n - l) as i32 - 2;
        let mha_scale: Vec<f64> = (0..TOKENS)
            .map(|t| alpha.powi(e_mha) / sigma_tail(l, t))
            .collect();
        let ffn_scale: Vec<f64> = (0..TOKENS)
            .map(|t| alpha.powi(e_ffn) / (sig(l, SublayerKind::Ffn, t) * sigma_tail(l + 1, t)))
            .collect();
        let beta_mha_scale: Vec<f64> = (0..TOKENS)
            .map(|t| alpha.powi(e_mha) / (sig(l, SublayerKind::Ffn, t) * sigma_tail(l + 1, t)))
            .collect();
        let beta_ffn_scale: Vec<f64> = (0..TOKENS)
            .map(|t| alpha.powi(e_ffn) / sigma_tail(l + 1, t))
            .collect();
        let mha_gamma = gamma_tail(l);
        let after_gamma = gamma_tail(l + 1);
        let ffn_gamma: Vec<f64> = after_gamma
            .iter()
            .zip(&lw.norm_ffn.gamma)
            .map(|(a, g)| a * g)
            .collect();

        let mha = trace.sublayer(l, SublayerKind::Mha);
        let ffn = trace.sublayer(l, SublayerKind::Ffn);
        accumulate_matrix_term(&mut z_mha, &mha_scale, &mha_gamma, &mha.raw);
        accumulate_matrix_term(&mut z_ffn, &ffn_scale, &ffn_gamma, &ffn.raw);

        if !trace.ablation.zero_mha[l] {
            let value_bias = crate::la::vec_matmul(&lw.attn.b_v, &lw.attn.w_o)?;
            accumulate_row_term(&mut b_term, &mha_scale, &mha_gamma, &value_bias);
            accumulate_row_term(&mut b_term, &mha_scale, &mha_gamma, &lw.attn.b_o);
        }
        if !trace.ablation.zero_ffn[l] {
            accumulate_row_term(&mut b_term, &ffn_scale, &ffn_gamma, &lw.ffn.b2);
        }
        if !trace.ablation.zero_ln_beta[l] {
            accumulate_row_term(&mut b_term, &beta_mha_scale, &ffn_gamma, &lw.norm_mha.beta);
            accumulate_row_term(&mut b_term, &beta_ffn_scale, &after_gamma, &lw.norm_ffn.beta);
        }

        for (rec, scale, gamma) in [
            (mha, &mha_scale, &mha_gamma),
            (ffn, &ffn_scale, &ffn_gamma),
        ] {
            let mut summand = Matrix::zeros(TOKENS, d);
            let s: Vec<f64> = scale.iter().zip(&rec.stats.mu).map(|(s, mu)| s * mu).collect();
            accumulate_row_term(&mut summand, &s, gamma, &vec![1.0; d]);
            for (m, x) in m_term.data_mut().iter_mut().zip(summand.data()) {
                *m += x;
            }
            m_summands.push(summand);
        }

        ledgers.push(LayerLedger {
            layer: l,
            mha_scale,
            ffn_scale,
            beta_mha_scale,
            beta_ffn_scale,
            mha_gamma,
            ffn_gamma,
            after_gamma,
        });
    }

    Ok(DecompositionTerms {
        i_term,
        z_mha,
        z_ffn,
        b_term,
        m_term,
        m_summands,
        ledgers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub stage: i32,
    pub max_abs_err: f64,
    /// Largest per-token `‖sum − h‖ / ‖h‖`.
    pub max_rel_err: f64,
    pub norms: TermNorms,
}

/// Ablation used for a lens stage; the last stage is the unablated model.
pub fn stage_spec(w: &WeightSet, stage: i32, mode: LensMode) -> Result<AblationSpec> {
    if stage == w.config.last_stage() {
        Ok(AblationSpec::full(w.n_layers()))
    } else {
        AblationSpec::lens(w.n_layers(), stage, mode)
    }
}

/// Runs the truncated forward pass for `upto`, decomposes it and measures how
/// far the summed terms are from the traced final state.
pub fn verify_identity(
    w: &WeightSet,
    h0: &Matrix,
    upto: i32,
    mode: LensMode,
) -> Result<IdentityReport> {
    let trace = forward(w, h0, &stage_spec(w, upto, mode)?)?;
    let terms = decompose(w, &trace, upto)?;
    let recon = terms.reconstruct();
    let h = &trace.final_hidden;
    let mut max_rel = 0.0f64;
    for t in 0..h.rows() {
        let diff: f64 = recon
            .row(t)
            .iter()
            .zip(h.row(t))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = crate::la::l2_norm(h.row(t)).max(f64::MIN_POSITIVE);
        max_rel = max_rel.max(diff / scale);
    }
    Ok(IdentityReport {
        stage: upto,
        max_abs_err: recon.max_abs_diff(h),
        max_rel_err: max_rel,
        norms: terms.norms(),
    })
}

/// Policy obtained by feeding the summed decomposition to the policy head.
pub fn decomposition_policy(
    w: &WeightSet,
    h0: &Matrix,
    legal: &[bool],
    upto: i32,
    mode: LensMode,
) -> Result<PolicyDistribution> {
    let trace = forward(w, h0, &stage_spec(w, upto, mode)?)?;
    let terms = decompose(w, &trace, upto)?;
    let mut p = policy_head(&terms.reconstruct(), w, legal)?;
    p.stage = upto;
    Ok(p)
}
