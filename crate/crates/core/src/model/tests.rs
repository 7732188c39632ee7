use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::la::{layer_norm_eps, LayerNormParams, Matrix, LN_EPS};

fn random_input(w: &WeightSet, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planes: Vec<bool> = (0..64 * w.config.planes).map(|_| rng.random_bool(0.3)).collect();
    let posenc = Matrix::from_fn(64, 64, |r, c| if r == c { -1.0 } else { rng.random_range(0..2) as f64 });
    prepare_input(&planes, &posenc, w).unwrap()
}

fn strip_label(mut t: ActivationTrace) -> ActivationTrace {
    t.ablation.label = AblationLabel::Full;
    t
}

#[test]
fn full_forward_smoke() {
    let w = WeightSet::init(&ModelConfig::toy(1)).unwrap();
    let h0 = random_input(&w, 1);
    let t = forward(&w, &h0, &AblationSpec::full(4)).unwrap();
    assert_eq!(t.sublayers.len(), 8);
    assert_eq!(t.policy_logits.shape(), (64, 64));
    assert!(t.policy_logits.is_finite());
    assert!(t.sublayers.iter().all(|s| s.stats.sigma.iter().all(|&x| x > 0.0)));
}

#[test]
fn forward_is_deterministic() {
    let w = WeightSet::init(&ModelConfig::toy(8)).unwrap();
    let h0 = random_input(&w, 2);
    let spec = AblationSpec::lens(4, 1, LensMode::Default).unwrap();
    assert_eq!(forward(&w, &h0, &spec).unwrap(), forward(&w, &h0, &spec).unwrap());
}

#[test]
fn last_stage_lens_is_the_full_model() {
    for seed in 0..5 {
        let w = WeightSet::init(&ModelConfig::toy(seed)).unwrap();
        let h0 = random_input(&w, seed);
        let full = forward(&w, &h0, &AblationSpec::full(4)).unwrap();
        for mode in [LensMode::Default, LensMode::KeepBeta] {
            let lens = forward(&w, &h0, &AblationSpec::lens(4, 3, mode).unwrap()).unwrap();
            assert_eq!(strip_label(lens), full);
        }
    }
}

#[test]
fn fully_ablated_postln_is_repeated_normalization() {
    let mut w = WeightSet::init(&ModelConfig::toy(12)).unwrap();
    for l in &mut w.layers {
        l.norm_mha.gamma = vec![1.0; 32];
        l.norm_ffn.gamma = vec![1.0; 32];
    }
    let h0 = random_input(&w, 5);
    let t = forward(&w, &h0, &AblationSpec::lens(4, -1, LensMode::Default).unwrap()).unwrap();

    let alpha = deepnorm_alpha(4);
    let id = LayerNormParams::identity(32);
    let mut oracle = h0.clone();
    for _ in 0..8 {
        oracle = layer_norm_eps(&oracle.scale(alpha), &id, LN_EPS, false).unwrap().0;
    }
    assert!(t.final_hidden.max_abs_diff(&oracle) < 1e-12);
    for row in t.final_hidden.iter_rows() {
        assert!((row.iter().sum::<f64>() / 32.0).abs() <= 1e-10);
    }
}

#[test]
fn neutral_weights_make_ablation_a_no_op() {
    let w = WeightSet::neutral(&ModelConfig::toy(0)).unwrap();
    let h0 = Matrix::from_fn(64, 32, |r, c| ((r * 13 + c * 5) % 9) as f64 - 4.0);
    let full = forward(&w, &h0, &AblationSpec::full(4)).unwrap();
    let cut = forward(&w, &h0, &AblationSpec::lens(4, -1, LensMode::Default).unwrap()).unwrap();
    assert_eq!(full.final_hidden, cut.final_hidden);
    assert_eq!(full.policy_logits, cut.policy_logits);
    assert!(full.sublayers.iter().all(|s| s.raw.data().iter().all(|&x| x == 0.0)));
}

#[test]
fn post_norm_rows_are_centered_without_beta() {
    let mut w = WeightSet::init(&ModelConfig::toy(4)).unwrap();
    for l in &mut w.layers {
        l.norm_mha.beta = vec![0.0; 32];
        l.norm_ffn.beta = vec![0.0; 32];
    }
    let h0 = random_input(&w, 9);
    let t = forward(&w, &h0, &AblationSpec::full(4)).unwrap();
    for s in &t.sublayers {
        let gamma = match s.kind {
            SublayerKind::Mha => &w.layers[s.layer].norm_mha.gamma,
            SublayerKind::Ffn => &w.layers[s.layer].norm_ffn.gamma,
        };
        // γ ≠ 1, so undo the scale before checking the mean.
        for row in s.output.iter_rows() {
            let mean: f64 = row.iter().zip(gamma).map(|(x, g)| x / g).sum::<f64>() / 32.0;
            assert!(mean.abs() <= 1e-10);
        }
    }
}

#[test]
fn preln_residual_is_transparent() {
    let w = WeightSet::init(&ModelConfig::toy(21).with_norm_style(NormStyle::Preln)).unwrap();
    let h0 = random_input(&w, 3);
    let t = forward(&w, &h0, &AblationSpec::full(4)).unwrap();
    let mut acc = h0.clone();
    for (i, s) in t.sublayers.iter().enumerate() {
        for (a, z) in acc.data_mut().iter_mut().zip(s.raw.data()) {
            *a += z;
        }
        acc.add_row_vector(&s.bias).unwrap();
        if i % 2 == 1 {
            let k = (i / 2) as i32;
            assert!(acc.max_abs_diff(t.hidden_after(k)) <= 1e-10);
        }
    }
    assert!(t.final_stats.is_some());
}

#[test]
fn prepare_input_examples() {
    let mut w = WeightSet::init(&ModelConfig::toy(30)).unwrap();
    w.input.bias = vec![0.0; 32];
    let zeros = vec![false; 64 * 4];
    let h0 = prepare_input(&zeros, &Matrix::zeros(64, 64), &w).unwrap();
    for row in h0.iter_rows() {
        assert_eq!(row, w.input.shift.as_slice());
    }

    // Identical input rows map to identical output rows.
    let planes: Vec<bool> = (0..256).map(|i| i % 4 == 1).collect();
    let posenc = Matrix::from_fn(64, 64, |_, c| if c == 5 { 1.0 } else { 0.0 });
    let h = prepare_input(&planes, &posenc, &w).unwrap();
    for r in 1..64 {
        assert_eq!(h.row(r), h.row(0));
    }

    // Toggling one plane bit changes only the token and columns its weight row touches.
    for j in 0..32 {
        if j % 3 == 0 {
            w.input.linear.set(2, j, 0.0);
        }
    }
    let mut toggled = planes.clone();
    toggled[10 * 4 + 2] = true;
    let a = prepare_input(&planes, &posenc, &w).unwrap();
    let b = prepare_input(&toggled, &posenc, &w).unwrap();
    for r in 0..64 {
        for j in 0..32 {
            let changed = a.get(r, j) != b.get(r, j);
            assert_eq!(changed, r == 10 && j % 3 != 0, "token {r} column {j}");
        }
    }
}

#[test]
fn prepare_input_rejects_bad_posenc() {
    let w = WeightSet::init(&ModelConfig::toy(1)).unwrap();
    let bad = Matrix::from_fn(64, 64, |_, _| 0.5);
    assert!(matches!(
        prepare_input(&vec![false; 256], &bad, &w),
        Err(crate::Error::Config(_))
    ));
    assert!(prepare_input(&vec![false; 255], &Matrix::zeros(64, 64), &w).is_err());
}

#[test]
fn smolgen_adds_attention_logits() {
    let cfg = ModelConfig::toy(44).with_smolgen(SmolgenConfig::default());
    let with = WeightSet::init(&cfg).unwrap();
    let mut without = with.clone();
    without.config.smolgen = None;
    for l in &mut without.layers {
        l.smolgen = None;
    }
    let h0 = random_input(&with, 4);
    let a = forward(&with, &h0, &AblationSpec::full(4)).unwrap();
    let b = forward(&without, &h0, &AblationSpec::full(4)).unwrap();
    assert!(a.policy_logits.is_finite());
    assert!(a.final_hidden.max_abs_diff(&b.final_hidden) > 1e-6);

    // A smolgen block that emits zeros is the same as no smolgen at all.
    let mut silent = with.clone();
    for l in &mut silent.layers {
        let s = l.smolgen.as_mut().unwrap();
        s.emit = Matrix::zeros(s.emit.rows(), s.emit.cols());
    }
    let c = forward(&silent, &h0, &AblationSpec::full(4)).unwrap();
    assert_eq!(c.final_hidden, b.final_hidden);
}

#[test]
fn ablation_spec_shapes() {
    let s = AblationSpec::lens(4, 1, LensMode::Default).unwrap();
    assert_eq!(s.zero_mha, vec![false, false, true, true]);
    assert_eq!(s.zero_ln_beta, vec![false, false, true, true]);
    let s = AblationSpec::lens(4, 1, LensMode::KeepBeta).unwrap();
    assert_eq!(s.zero_ln_beta, vec![false; 4]);
    assert!(AblationSpec::lens(4, 4, LensMode::Default).is_err());
    assert!(AblationSpec::lens(4, -2, LensMode::Default).is_err());
    let w = WeightSet::init(&ModelConfig::toy(1)).unwrap();
    assert!(forward(&w, &Matrix::zeros(64, 32), &AblationSpec::full(3)).is_err());
}
