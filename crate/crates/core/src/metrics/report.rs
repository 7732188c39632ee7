//! Per-stage metric series from a lens report, and FFN output norms.

use rayon::prelude::*;

use super::bands::{percentile_bands, MetricSeries};
use super::divergence::{entropy, js_divergence, top_move_probability};
use super::kendall::{tau_b_on, top_k_indices};
use crate::error::{Error, Result};
use crate::la::{l2_norm, Matrix};
use crate::lens::{LensReport, PreparedPosition};
use crate::model::{forward, AblationSpec, ActivationTrace, SublayerKind, WeightSet};

pub const METRIC_NAMES: [&str; 5] = ["js", "entropy", "top_move_prob", "kendall_all", "kendall_topk"];

/// One row per stage of a single position, one column per metric.
fn position_metrics(stages: &[Vec<f64>], top_k: usize) -> Result<Vec<[Option<f64>; 5]>> {
    let last = stages.last().expect("nonempty");
    let all: Vec<usize> = (0..last.len()).collect();
    let mut union: Vec<usize> = stages.iter().flat_map(|p| top_k_indices(p, top_k)).collect();
    union.sort_unstable();
    union.dedup();
    stages
        .iter()
        .map(|p| {
            Ok([
                Some(js_divergence(p, last)?),
                Some(entropy(p)?),
                Some(top_move_probability(p, last)?),
                tau_b_on(p, last, &all),
                tau_b_on(p, last, &union),
            ])
        })
        .collect()
}

/// Bands for every metric in [`METRIC_NAMES`], computed over each
/// position's legal moves against that position's final-stage policy.
/// The top-k filter unions the top `k` moves of every stage of a position.
pub fn compute_metrics(report: &LensReport, top_k: usize) -> Result<Vec<MetricSeries>> {
    if report.positions.is_empty() {
        return Err(Error::Input("lens report has no positions".into()));
    }
    let stages: Vec<i32> = report.stages().collect();
    let rows: Vec<Vec<[Option<f64>; 5]>> = report
        .positions
        .par_iter()
        .map(|pos| {
            if pos.stages.len() != stages.len() {
                return Err(Error::Input(format!(
                    "position {} has {} stages, expected {}",
                    pos.position_id,
                    pos.stages.len(),
                    stages.len()
                )));
            }
            let probs: Vec<Vec<f64>> = pos.stages.iter().map(|d| d.legal_probs()).collect();
            position_metrics(&probs, top_k).map_err(|e| Error::Position {
                index: pos.position_id,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    Ok(METRIC_NAMES
        .iter()
        .enumerate()
        .map(|(m, name)| {
            let values = (0..stages.len())
                .map(|s| rows.iter().map(|r| r[s][m]).collect())
                .collect();
            percentile_bands(name, stages.clone(), values)
        })
        .collect())
}

/// Mean per-token L2 norm of the unbiased FFN output of `layer`.
pub fn mlp_output_norm(trace: &ActivationTrace, layer: usize) -> Result<f64> {
    let layers = trace.sublayers.len() / 2;
    if layer >= layers {
        return Err(Error::Argument(format!(
            "layer {layer} out of range for a {layers}-layer trace"
        )));
    }
    let raw: &Matrix = &trace.sublayer(layer, SublayerKind::Ffn).raw;
    Ok(raw.iter_rows().map(l2_norm).sum::<f64>() / raw.rows() as f64)
}

/// FFN output norms of the unablated model, one band per layer; the series'
/// stage axis holds layer indices.
pub fn mlp_norm_series(w: &WeightSet, positions: &[PreparedPosition]) -> Result<MetricSeries> {
    if positions.is_empty() {
        return Err(Error::Input("no positions".into()));
    }
    let n = w.n_layers();
    let per_pos: Vec<Vec<f64>> = positions
        .par_iter()
        .map(|p| {
            let t = forward(w, &p.h0, &AblationSpec::full(n))?;
            (0..n).map(|l| mlp_output_norm(&t, l)).collect()
        })
        .collect::<Result<_>>()?;
    let values = (0..n)
        .map(|l| per_pos.iter().map(|v| Some(v[l])).collect())
        .collect();
    Ok(percentile_bands("mlp_norm", (0..n as i32).collect(), values))
}
