use crate::error::{Error, Result};
use crate::model::argmax_masked;

const SUM_TOL: f64 = 1e-9;

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Argument(format!("{name} has a negative or non-finite entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::Argument(format!("{name} sums to {total}")));
    }
    Ok(())
}

/// `Σ p ln(p/q)` over `p > 0`.
fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum()
}

/// Jensen-Shannon divergence in nats; lies in `[0, ln 2]`.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Argument(format!(
            "distributions of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    check_distribution(p, "p")?;
    check_distribution(q, "q")?;
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let js = 0.5 * kl(p, &m) + 0.5 * kl(q, &m);
    Ok(js.max(0.0))
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> Result<f64> {
    check_distribution(p, "p")?;
    Ok(-p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>())
}

/// Probability `layer_p` puts on the final policy's top move; ties in
/// `final_p` go to the lowest index.
pub fn top_move_probability(layer_p: &[f64], final_p: &[f64]) -> Result<f64> {
    if layer_p.len() != final_p.len() || final_p.is_empty() {
        return Err(Error::Argument("policies must share a nonempty support".into()));
    }
    let top = argmax_masked(final_p, &vec![true; final_p.len()]).expect("nonempty");
    Ok(layer_p[top])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn js_examples() {
        assert_eq!(js_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        let ln2 = std::f64::consts::LN_2;
        assert!((js_divergence(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - ln2).abs() <= 1e-12);
        // ½·ln(4/3) + ½·(½ln(2/3) + ½ln 2), evaluated by hand.
        let expected = 0.5 * (4.0f64 / 3.0).ln() + 0.25 * (2.0f64 / 3.0).ln() + 0.25 * 2f64.ln();
        let got = js_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((got - expected).abs() <= 1e-12);
        assert!((got - 0.215761).abs() <= 1e-6);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
        assert!((entropy(&[0.25; 4]).unwrap() - 4f64.ln()).abs() <= 1e-12);
        let expected = -(0.75 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        assert!((entropy(&[0.75, 0.25]).unwrap() - expected).abs() <= 1e-12);
        assert!((expected - 0.562335).abs() <= 5e-7);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(entropy(&[-0.5, 1.5]), Err(Error::Argument(_))));
        assert!(js_divergence(&[1.0], &[0.5, 0.5]).is_err());
        assert!(js_divergence(&[-0.1, 1.1], &[0.5, 0.5]).is_err());
        assert!(entropy(&[0.2, 0.2]).is_err());
    }

    #[test]
    fn top_move_examples() {
        assert_eq!(top_move_probability(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(top_move_probability(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(top_move_probability(&[0.25; 4], &[0.1, 0.2, 0.6, 0.1]).unwrap(), 0.25);
        // Tie in the final policy resolves to the lower index.
        assert_eq!(top_move_probability(&[0.1, 0.2, 0.7], &[0.0, 0.5, 0.5]).unwrap(), 0.2);
    }

    fn dist(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, n).prop_filter_map("nonzero mass", |v| {
            let t: f64 = v.iter().sum();
            (t > 1e-6).then(|| v.iter().map(|x| x / t).collect())
        })
    }

    proptest! {
        #[test]
        fn js_symmetric_and_bounded((p, q) in (2usize..20).prop_flat_map(|n| (dist(n), dist(n)))) {
            let a = js_divergence(&p, &q).unwrap();
            let b = js_divergence(&q, &p).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!(a <= std::f64::consts::LN_2 + 1e-12);
            prop_assert!(js_divergence(&p, &p).unwrap().abs() <= 1e-15);
        }

        #[test]
        fn entropy_bounded(p in (1usize..30).prop_flat_map(dist)) {
            let h = entropy(&p).unwrap();
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (p.len() as f64).ln() + 1e-12);
        }
    }
}
