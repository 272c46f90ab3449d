//! Two-sample Mann-Whitney U test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest smaller-sample size for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// `U` of the first sample: rank sum of `x` minus `n1 (n1 + 1) / 2`.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub exact: bool,
}

/// Midranks (1-based) of the pooled sample.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided Mann-Whitney U test. Uses the exact permutation distribution
/// of the midrank sum when the smaller sample has at most
/// [`EXACT_LIMIT`] values, otherwise the normal approximation with tie and
/// continuity corrections.
pub fn mann_whitney(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty("mann-whitney needs two nonempty samples".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("mann-whitney sample contains a non-finite value"));
    }
    let (n1, n2) = (x.len(), y.len());
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midranks(&pooled);
    let rx: f64 = ranks[..n1].iter().sum();
    let u = rx - (n1 * (n1 + 1)) as f64 / 2.0;
    if n1.min(n2) <= EXACT_LIMIT {
        let p = exact_p(&ranks, n1, rx);
        return Ok(MannWhitney { u, p, exact: true });
    }
    let n = (n1 + n2) as f64;
    let mean = (n1 * n2) as f64 / 2.0;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    for group in sorted.chunk_by(|a, b| a == b) {
        let t = group.len() as f64;
        ties += t * t * t - t;
    }
    let var = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::standard();
        (2.0 * (1.0 - normal.cdf(z))).min(1.0)
    };
    Ok(MannWhitney { u, p, exact: false })
}

/// Exact two-sided p of the rank sum `rx` of `n1` values drawn from the
/// pooled midranks: `min(1, 2 min(P(R <= rx), P(R >= rx)))`.
fn exact_p(ranks: &[f64], n1: usize, rx: f64) -> f64 {
    // Doubled midranks are integers. Choosing the smaller group keeps the
    // table small; its rank sum determines the other.
    let n = ranks.len();
    let small = n1.min(n - n1);
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let max_sum: usize = {
        let mut d = doubled.clone();
        d.sort_unstable_by(|a, b| b.cmp(a));
        d[..small].iter().sum()
    };
    // ways[k][s]: subsets of size k with doubled rank sum s.
    let mut ways = vec![vec![0.0f64; max_sum + 1]; small + 1];
    ways[0][0] = 1.0;
    for &d in &doubled {
        for k in (1..=small).rev() {
            let (lo, hi) = ways.split_at_mut(k);
            let (prev, cur) = (&lo[k - 1], &mut hi[0]);
            for s in (d..=max_sum).rev() {
                cur[s] += prev[s - d];
            }
        }
    }
    let dist = &ways[small];
    let count: f64 = dist.iter().sum();
    let obs2 = (2.0 * rx).round() as usize;
    let obs = if small == n1 { obs2 } else { total - obs2 };
    let le: f64 = dist[..=obs.min(max_sum)].iter().sum();
    let ge: f64 = if obs <= max_sum { dist[obs..].iter().sum() } else { 0.0 };
    (2.0 * le.min(ge) / count).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let r = mann_whitney(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert!(r.exact);
        assert!((r.p - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_are_not_significant() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((mann_whitney(&x, &x).unwrap().p - 1.0).abs() < 1e-12);
        let big: Vec<f64> = (0..40).map(|i| (i % 7) as f64).collect();
        assert!((mann_whitney(&big, &big).unwrap().p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn rejects_empty() {
        assert!(mann_whitney(&[], &[1.0]).is_err());
    }
}
