//! Post-LN logit lens.
//!
//! Stage `k` keeps the sublayers of layers `0..=k` and zeroes every later
//! sublayer output (and its biases), while the later layer norms and the
//! DeepNorm α still run with statistics recomputed on the truncated stream.
//! Stage `-1` is the prepared input embedding; stage `N-1` is the full model.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::la::{layer_norm, Matrix};
use crate::model::{
    check_stage, forward, policy_logits, AblationSpec, LensMode, NormStyle, PolicyDistribution,
    WeightSet, MOVES,
};
use crate::notation::{move_name, parse_move};

/// An encoded position ready for the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedPosition {
    pub h0: Matrix,
    pub legal: Vec<bool>,
}

/// Display name used for a stage in reports and tournaments.
pub fn stage_label(stage: i32, layers: usize) -> String {
    if stage < 0 {
        "Input".to_string()
    } else if stage == layers as i32 - 1 {
        "Full".to_string()
    } else {
        format!("L{stage}")
    }
}

pub fn lens_policy(
    w: &WeightSet,
    h0: &Matrix,
    legal: &[bool],
    stage: i32,
    mode: LensMode,
) -> Result<PolicyDistribution> {
    check_stage(w.n_layers(), stage)?;
    let spec = if stage == w.config.last_stage() {
        AblationSpec::full(w.n_layers())
    } else {
        AblationSpec::lens(w.n_layers(), stage, mode)?
    };
    let trace = forward(w, h0, &spec)?;
    PolicyDistribution::from_logits(trace.policy_logits.data(), legal, stage)
}

/// Standard Pre-LN lens: final norm and policy head applied to the stream
/// state after layer `stage` of an unablated pass.
pub fn preln_lens_direct(
    w: &WeightSet,
    h0: &Matrix,
    legal: &[bool],
    stage: i32,
) -> Result<PolicyDistribution> {
    if w.config.norm_style != NormStyle::Preln {
        return Err(Error::Mode(
            "the direct lens needs a pre-LN model; use lens_policy".into(),
        ));
    }
    check_stage(w.n_layers(), stage)?;
    let trace = forward(w, h0, &AblationSpec::full(w.n_layers()))?;
    let final_norm = w
        .final_norm
        .as_ref()
        .ok_or_else(|| Error::Config("pre-LN model without a final norm".into()))?;
    let (normed, _) = layer_norm(trace.hidden_after(stage), final_norm)?;
    let logits = policy_logits(&normed, &w.policy)?;
    PolicyDistribution::from_logits(logits.data(), legal, stage)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionLens {
    pub position_id: usize,
    /// Ordered by stage, `-1` first.
    pub stages: Vec<PolicyDistribution>,
}

impl PositionLens {
    pub fn final_policy(&self) -> &PolicyDistribution {
        self.stages.last().expect("at least one stage")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensReport {
    pub layers: usize,
    pub mode: LensMode,
    pub positions: Vec<PositionLens>,
}

impl LensReport {
    pub fn stages(&self) -> impl Iterator<Item = i32> {
        -1..self.layers as i32
    }
}

pub fn lens_sweep(
    w: &WeightSet,
    positions: &[PreparedPosition],
    mode: LensMode,
) -> Result<LensReport> {
    if positions.is_empty() {
        return Err(Error::Input("lens sweep needs at least one position".into()));
    }
    let n = w.n_layers() as i32;
    let pairs: Vec<(usize, i32)> = (0..positions.len())
        .flat_map(|p| (-1..n).map(move |k| (p, k)))
        .collect();
    let results: Vec<Result<PolicyDistribution>> = pairs
        .par_iter()
        .map(|&(p, k)| {
            lens_policy(w, &positions[p].h0, &positions[p].legal, k, mode).map_err(|e| {
                Error::Position {
                    index: p,
                    source: Box::new(e),
                }
            })
        })
        .collect();
    let mut iter = results.into_iter();
    let mut out = Vec::with_capacity(positions.len());
    for position_id in 0..positions.len() {
        let stages = iter
            .by_ref()
            .take((n + 1) as usize)
            .collect::<Result<Vec<_>>>()?;
        out.push(PositionLens {
            position_id,
            stages,
        });
    }
    Ok(LensReport {
        layers: w.n_layers(),
        mode,
        positions: out,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LensRecord {
    position_id: usize,
    stage: i32,
    label: String,
    full: bool,
    mode: LensMode,
    moves: Vec<String>,
    probs: Vec<f64>,
}

/// One JSON object per `(position, stage)`, probabilities over legal moves only.
pub fn report_to_jsonl(r: &LensReport) -> String {
    let mut out = String::new();
    for pos in &r.positions {
        for dist in &pos.stages {
            let idx = dist.legal_indices();
            let rec = LensRecord {
                position_id: pos.position_id,
                stage: dist.stage,
                label: stage_label(dist.stage, r.layers),
                full: dist.stage == r.layers as i32 - 1,
                mode: r.mode,
                moves: idx.iter().map(|&m| move_name(m)).collect(),
                probs: idx.iter().map(|&m| dist.probs[m]).collect(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
    }
    out
}

pub fn report_from_jsonl(s: &str) -> Result<LensReport> {
    let mut by_pos: BTreeMap<usize, BTreeMap<i32, PolicyDistribution>> = BTreeMap::new();
    let mut mode = None;
    for (lineno, line) in s.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: LensRecord = serde_json::from_str(line)
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        if *mode.get_or_insert(rec.mode) != rec.mode {
            return Err(Error::Format("report mixes lens modes".into()));
        }
        if rec.moves.len() != rec.probs.len() || rec.moves.is_empty() {
            return Err(Error::Format(format!(
                "line {}: {} moves with {} probabilities",
                lineno + 1,
                rec.moves.len(),
                rec.probs.len()
            )));
        }
        let mut probs = vec![0.0; MOVES];
        let mut legal = vec![false; MOVES];
        for (m, &p) in rec.moves.iter().zip(&rec.probs) {
            let idx = parse_move(m)?;
            if legal[idx] {
                return Err(Error::Format(format!("line {}: duplicate move {m}", lineno + 1)));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Format(format!("line {}: bad probability", lineno + 1)));
            }
            legal[idx] = true;
            probs[idx] = p;
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Format(format!(
                "line {}: probabilities sum to {total}",
                lineno + 1
            )));
        }
        let slot = by_pos.entry(rec.position_id).or_default();
        if slot
            .insert(
                rec.stage,
                PolicyDistribution {
                    probs,
                    legal,
                    stage: rec.stage,
                },
            )
            .is_some()
        {
            return Err(Error::Format(format!(
                "duplicate record for position {} stage {}",
                rec.position_id, rec.stage
            )));
        }
    }
    let Some(mode) = mode else {
        return Err(Error::Format("empty lens report".into()));
    };
    let layers = by_pos
        .values()
        .flat_map(|m| m.keys())
        .max()
        .map(|&k| k + 1)
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::Format("report has no layer stages".into()))? as usize;
    let positions = by_pos
        .into_iter()
        .map(|(position_id, stages)| {
            let keys: Vec<i32> = stages.keys().copied().collect();
            let expected: Vec<i32> = (-1..layers as i32).collect();
            if keys != expected {
                return Err(Error::Format(format!(
                    "position {position_id} has stages {keys:?}, expected -1..={}",
                    layers - 1
                )));
            }
            let stages: Vec<PolicyDistribution> = stages.into_values().collect();
            if stages.iter().any(|s| s.legal != stages[0].legal) {
                return Err(Error::Format(format!(
                    "position {position_id} changes its legal moves across stages"
                )));
            }
            Ok(PositionLens {
                position_id,
                stages,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LensReport {
        layers,
        mode,
        positions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{prepare_input, ModelConfig, SmolgenConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_position(w: &WeightSet, seed: u64) -> PreparedPosition {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let planes: Vec<bool> = (0..64 * w.config.planes).map(|_| rng.random_bool(0.25)).collect();
        let posenc = Matrix::from_fn(64, 64, |r, c| if r == c { -1.0 } else { rng.random_range(0..2) as f64 });
        let mut legal: Vec<bool> = (0..MOVES).map(|_| rng.random_bool(0.01)).collect();
        legal[rng.random_range(0..MOVES)] = true;
        PreparedPosition {
            h0: prepare_input(&planes, &posenc, w).unwrap(),
            legal,
        }
    }

    #[test]
    fn last_stage_is_full_model_bitwise() {
        let w = WeightSet::init(&ModelConfig::toy(7)).unwrap();
        let pos = random_position(&w, 1);
        let full = forward(&w, &pos.h0, &AblationSpec::full(4)).unwrap();
        let direct = PolicyDistribution::from_logits(full.policy_logits.data(), &pos.legal, 3).unwrap();
        for mode in [LensMode::Default, LensMode::KeepBeta] {
            assert_eq!(lens_policy(&w, &pos.h0, &pos.legal, 3, mode).unwrap(), direct);
        }
    }

    #[test]
    fn neutral_model_is_stage_independent() {
        let w = WeightSet::neutral(&ModelConfig::toy(0)).unwrap();
        let mut w = w;
        w.policy = WeightSet::init(&ModelConfig::toy(3)).unwrap().policy;
        let pos = random_position(&WeightSet::init(&ModelConfig::toy(3)).unwrap(), 2);
        let reference = lens_policy(&w, &pos.h0, &pos.legal, -1, LensMode::Default).unwrap();
        for k in 0..4 {
            let p = lens_policy(&w, &pos.h0, &pos.legal, k, LensMode::Default).unwrap();
            assert_eq!(p.probs, reference.probs);
        }
    }

    #[test]
    fn early_stage_diverges_from_final() {
        let w = WeightSet::init(&ModelConfig::toy(7)).unwrap();
        let pos = random_position(&w, 7);
        let a = lens_policy(&w, &pos.h0, &pos.legal, 0, LensMode::Default).unwrap();
        let b = lens_policy(&w, &pos.h0, &pos.legal, 3, LensMode::Default).unwrap();
        let js = crate::metrics::js_divergence(&a.probs, &b.probs).unwrap();
        assert!(js > 0.0);
    }

    #[test]
    fn stage_out_of_range() {
        let w = WeightSet::init(&ModelConfig::toy(7)).unwrap();
        let pos = random_position(&w, 7);
        assert!(matches!(
            lens_policy(&w, &pos.h0, &pos.legal, 4, LensMode::Default),
            Err(Error::Argument(_))
        ));
        assert!(lens_policy(&w, &pos.h0, &pos.legal, -2, LensMode::Default).is_err());
    }

    #[test]
    fn sweep_shape_and_determinism() {
        let w = WeightSet::init(&ModelConfig::toy(5)).unwrap();
        let positions = vec![random_position(&w, 1)];
        let a = lens_sweep(&w, &positions, LensMode::Default).unwrap();
        assert_eq!(a.positions.len(), 1);
        assert_eq!(a.positions[0].stages.len(), 5);
        let stages: Vec<i32> = a.positions[0].stages.iter().map(|s| s.stage).collect();
        assert_eq!(stages, vec![-1, 0, 1, 2, 3]);
        assert_eq!(a, lens_sweep(&w, &positions, LensMode::Default).unwrap());
        for s in &a.positions[0].stages {
            let total: f64 = s.probs.iter().sum();
            assert!((total - 1.0).abs() <= 1e-9);
            assert!(s.probs.iter().zip(&s.legal).all(|(&p, &l)| l || p == 0.0));
        }
    }

    #[test]
    fn keep_beta_changes_some_stage() {
        let w = WeightSet::init(&ModelConfig::toy(5)).unwrap();
        let positions = vec![random_position(&w, 4)];
        let a = lens_sweep(&w, &positions, LensMode::Default).unwrap();
        let b = lens_sweep(&w, &positions, LensMode::KeepBeta).unwrap();
        let differs = a.positions[0]
            .stages
            .iter()
            .zip(&b.positions[0].stages)
            .any(|(x, y)| x.probs != y.probs);
        assert!(differs);
        assert_eq!(a.positions[0].final_policy(), b.positions[0].final_policy());
    }

    #[test]
    fn sweep_errors_carry_position_index() {
        let w = WeightSet::init(&ModelConfig::toy(5)).unwrap();
        let mut positions = vec![random_position(&w, 1), random_position(&w, 2)];
        positions[1].legal = vec![false; MOVES];
        match lens_sweep(&w, &positions, LensMode::Default) {
            Err(Error::Position { index, source }) => {
                assert_eq!(index, 1);
                assert!(matches!(*source, Error::NoLegalMoves));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(lens_sweep(&w, &[], LensMode::Default).is_err());
    }

    #[test]
    fn direct_lens_rejects_postln() {
        let w = WeightSet::init(&ModelConfig::toy(5)).unwrap();
        let pos = random_position(&w, 1);
        assert!(matches!(
            preln_lens_direct(&w, &pos.h0, &pos.legal, 0),
            Err(Error::Mode(_))
        ));
    }

    #[test]
    fn direct_lens_matches_zero_ablation_on_preln() {
        let cfg = ModelConfig::toy(9).with_norm_style(NormStyle::Preln);
        let w = WeightSet::init(&cfg).unwrap();
        let pos = random_position(&w, 3);
        for k in -1..4 {
            let a = preln_lens_direct(&w, &pos.h0, &pos.legal, k).unwrap();
            let b = lens_policy(&w, &pos.h0, &pos.legal, k, LensMode::Default).unwrap();
            let gap = a.probs.iter().zip(&b.probs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(gap <= 1e-10, "stage {k}: {gap}");
        }
        let full = lens_policy(&w, &pos.h0, &pos.legal, 3, LensMode::Default).unwrap();
        let direct = preln_lens_direct(&w, &pos.h0, &pos.legal, 3).unwrap();
        let gap = full.probs.iter().zip(&direct.probs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(gap <= 1e-12);
    }

    #[test]
    fn single_layer_preln_input_stage_is_final_norm_of_embedding() {
        let cfg = ModelConfig::toy(2).with_norm_style(NormStyle::Preln).with_layers(1);
        let w = WeightSet::init(&cfg).unwrap();
        let pos = random_position(&w, 5);
        let (normed, _) = layer_norm(&pos.h0, w.final_norm.as_ref().unwrap()).unwrap();
        let expected = PolicyDistribution::from_logits(
            policy_logits(&normed, &w.policy).unwrap().data(),
            &pos.legal,
            -1,
        )
        .unwrap();
        assert_eq!(preln_lens_direct(&w, &pos.h0, &pos.legal, -1).unwrap(), expected);
    }

    #[test]
    fn smolgen_model_lens_is_well_formed() {
        let cfg = ModelConfig::toy(12).with_smolgen(SmolgenConfig::default());
        let w = WeightSet::init(&cfg).unwrap();
        let pos = random_position(&w, 8);
        let r = lens_sweep(&w, &[pos], LensMode::Default).unwrap();
        for s in &r.positions[0].stages {
            assert!((s.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let w = WeightSet::init(&ModelConfig::toy(5)).unwrap();
        let positions = vec![random_position(&w, 1), random_position(&w, 2)];
        let r = lens_sweep(&w, &positions, LensMode::KeepBeta).unwrap();
        let text = report_to_jsonl(&r);
        assert_eq!(text.lines().count(), 10);
        let back = report_from_jsonl(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn jsonl_rejects_malformed() {
        for bad in [
            "",
            "{}",
            r#"{"position_id":0,"stage":-1,"label":"Input","full":false,"mode":"default","moves":["a1a2"],"probs":[0.5]}"#,
            r#"{"position_id":0,"stage":0,"label":"Full","full":true,"mode":"default","moves":["a1a2","a1a2"],"probs":[0.5,0.5]}"#,
            r#"{"position_id":0,"stage":0,"label":"Full","full":true,"mode":"default","moves":["a1a2"],"probs":[1.0]}"#,
        ] {
            assert!(report_from_jsonl(bad).is_err(), "{bad}");
        }
    }
}
