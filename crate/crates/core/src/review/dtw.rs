//! Dynamic time warping between label sequences.

use serde::{Deserialize, Serialize};

use crate::label::AspectLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtwResult {
    pub distance: f64,
    /// Aligned `(a index, b index)` pairs from `(0, 0)` to the two ends.
    pub path: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot align an empty sequence")]
pub struct EmptySequence;

/// Local cost: 0 for equal labels, 1 otherwise.
pub fn label_mismatch(a: AspectLabel, b: AspectLabel) -> f64 {
    if a == b {
        0.0
    } else {
        1.0
    }
}

/// Minimal accumulated cost under the steps (1,1), (0,1), (1,0).
///
/// On ties the traceback prefers the diagonal predecessor, then the one
/// reached by a (0,1) step, then the one reached by a (1,0) step.
pub fn dtw_align<T, F>(a: &[T], b: &[T], cost: F) -> Result<DtwResult, EmptySequence>
where
    T: Copy,
    F: Fn(T, T) -> f64,
{
    if a.is_empty() || b.is_empty() {
        return Err(EmptySequence);
    }
    let (n, m) = (a.len(), b.len());
    let mut acc = vec![f64::INFINITY; n * m];
    let at = |i: usize, j: usize| i * m + j;

    for i in 0..n {
        for j in 0..m {
            let local = cost(a[i], b[j]);
            let best_prev = if i == 0 && j == 0 {
                0.0
            } else {
                let mut best = f64::INFINITY;
                if i > 0 && j > 0 {
                    best = best.min(acc[at(i - 1, j - 1)]);
                }
                if j > 0 {
                    best = best.min(acc[at(i, j - 1)]);
                }
                if i > 0 {
                    best = best.min(acc[at(i - 1, j)]);
                }
                best
            };
            acc[at(i, j)] = local + best_prev;
        }
    }

    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while (i, j) != (0, 0) {
        let mut candidates: Vec<(usize, usize)> = Vec::with_capacity(3);
        if i > 0 && j > 0 {
            candidates.push((i - 1, j - 1));
        }
        if j > 0 {
            candidates.push((i, j - 1));
        }
        if i > 0 {
            candidates.push((i - 1, j));
        }
        let mut pick = candidates[0];
        for &c in &candidates[1..] {
            if acc[at(c.0, c.1)] < acc[at(pick.0, pick.1)] {
                pick = c;
            }
        }
        (i, j) = pick;
        path.push(pick);
    }
    path.reverse();
    Ok(DtwResult { distance: acc[at(n - 1, m - 1)], path })
}

/// DTW over aspect labels with the 0/1 mismatch cost.
pub fn label_dtw(a: &[AspectLabel], b: &[AspectLabel]) -> Result<DtwResult, EmptySequence> {
    dtw_align(a, b, label_mismatch)
}
