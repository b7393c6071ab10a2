//! Small descriptive statistics over finite samples.

/// Nearest-rank percentile: the value at 1-based rank `ceil(pct/100 * N)` of
/// the sorted sample. `pct` is an integer in `1..=100`. Returns `None` for an
/// empty sample.
pub fn nearest_rank(sorted: &[f64], pct: u32) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len();
    let rank = ((pct as usize) * n).div_ceil(100).max(1);
    Some(sorted[rank.min(n) - 1])
}

/// Sorts a finite sample ascending. Panics on NaN.
pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    v
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}
