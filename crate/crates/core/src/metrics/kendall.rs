//! Kendall's τ-b in `O(n log n)`: sort by `(x, y)`, then count the inversions
//! a stable merge sort by `y` has to undo.

use std::cmp::Ordering;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauFilter {
    All,
    /// Only indices ranked in the top `k` of either input.
    TopKUnion(usize),
}

/// Indices of the `k` largest scores, ties broken by lower index.
pub fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Number of tied pairs within runs of equal values of a sorted sequence.
fn tied_pairs<T>(sorted: &[T], eq: impl Fn(&T, &T) -> bool) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j].total_cmp(&v[i]) == Ordering::Less {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// τ-b over the given index subset. `None` when fewer than two items remain
/// or either side is entirely tied.
pub fn tau_b_on(x: &[f64], y: &[f64], indices: &[usize]) -> Option<f64> {
    let n = indices.len();
    if n < 2 {
        return None;
    }
    let mut pairs: Vec<(f64, f64)> = indices.iter().map(|&i| (x[i], y[i])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let total = (n as u64) * (n as u64 - 1) / 2;
    let x_ties = tied_pairs(&pairs, |a, b| a.0 == b.0);
    let joint_ties = tied_pairs(&pairs, |a, b| a.0 == b.0 && a.1 == b.1);
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_count(&mut ys, &mut Vec::with_capacity(n));
    let y_ties = tied_pairs(&ys, |a, b| a == b);

    let denom = ((total - x_ties) as f64 * (total - y_ties) as f64).sqrt();
    if denom == 0.0 {
        return None;
    }
    // concordant − discordant
    let numer = total as f64 - x_ties as f64 - y_ties as f64 + joint_ties as f64 - 2.0 * swaps as f64;
    Some((numer / denom).clamp(-1.0, 1.0))
}

/// Tie-corrected Kendall τ between two score vectors.
pub fn kendall_tau(x: &[f64], y: &[f64], filter: TauFilter) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!(
            "score vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Argument("NaN score".into()));
    }
    let indices: Vec<usize> = match filter {
        TauFilter::All => (0..x.len()).collect(),
        TauFilter::TopKUnion(k) => {
            let mut set = top_k_indices(x, k);
            set.extend(top_k_indices(y, k));
            set.sort_unstable();
            set.dedup();
            set
        }
    };
    Ok(tau_b_on(x, y, &indices))
}
