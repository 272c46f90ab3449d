//! Inter-rater agreement and majority-vote ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cohen's κ between two label sequences with marginal-product chance
/// agreement. Identical constant sequences (chance agreement 1) give 1.
pub fn cohen_kappa(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty("kappa of empty sequences".into()));
    }
    let n = a.len() as f64;
    let mut ma: BTreeMap<usize, f64> = BTreeMap::new();
    let mut mb: BTreeMap<usize, f64> = BTreeMap::new();
    let mut agree = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        *ma.entry(x).or_default() += 1.0;
        *mb.entry(y).or_default() += 1.0;
        if x == y {
            agree += 1.0;
        }
    }
    let po = agree / n;
    let pe: f64 = ma
        .iter()
        .map(|(k, ca)| ca / n * mb.get(k).copied().unwrap_or(0.0) / n)
        .sum();
    Ok(chance_corrected(po, pe))
}

fn chance_corrected(po: f64, pe: f64) -> f64 {
    if (1.0 - pe).abs() < 1e-15 {
        1.0
    } else {
        (po - pe) / (1.0 - pe)
    }
}

/// Fleiss' κ over an items × categories table of vote counts, each row
/// summing to `raters`.
pub fn fleiss_kappa(table: &[Vec<u32>], raters: u32) -> Result<f64> {
    if raters < 2 {
        return Err(Error::invalid(format!("fleiss kappa needs at least 2 raters, got {raters}")));
    }
    if table.is_empty() {
        return Err(Error::Empty("fleiss kappa of an empty table".into()));
    }
    let cats = table[0].len();
    let k = raters as f64;
    let mut totals = vec![0.0; cats];
    let mut p_bar = 0.0;
    for (i, row) in table.iter().enumerate() {
        if row.len() != cats || row.iter().sum::<u32>() != raters {
            return Err(Error::invalid(format!("row {i} does not sum to {raters} votes")));
        }
        let sq: f64 = row.iter().map(|&v| (v as f64) * (v as f64)).sum();
        p_bar += (sq - k) / (k * (k - 1.0));
        for (t, &v) in totals.iter_mut().zip(row) {
            *t += v as f64;
        }
    }
    let n = table.len() as f64;
    p_bar /= n;
    let pe: f64 = totals.iter().map(|t| (t / (n * k)).powi(2)).sum();
    Ok(chance_corrected(p_bar, pe))
}

/// Scott's π: the two-rater agreement with pooled marginals, which equals
/// Fleiss' κ on the corresponding two-rater table.
pub fn scott_pi(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty("pi of empty sequences".into()));
    }
    let n = a.len() as f64;
    let mut pooled: BTreeMap<usize, f64> = BTreeMap::new();
    for &v in a.iter().chain(b) {
        *pooled.entry(v).or_default() += 1.0;
    }
    let po = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let pe: f64 = pooled.values().map(|c| (c / (2.0 * n)).powi(2)).sum();
    Ok(chance_corrected(po, pe))
}

/// Vote-count table over the frames where every rater has a label.
pub fn ratings_table(raters: &[&[Option<usize>]], n_classes: usize) -> Vec<Vec<u32>> {
    let n = raters.iter().map(|r| r.len()).min().unwrap_or(0);
    (0..n)
        .filter(|&t| raters.iter().all(|r| r[t].is_some()))
        .map(|t| {
            let mut row = vec![0u32; n_classes];
            for r in raters {
                row[r[t].unwrap()] += 1;
            }
            row
        })
        .collect()
}

/// Fleiss' κ of aligned rater sequences; frames missing any label are skipped.
pub fn fleiss_kappa_sequences(raters: &[&[Option<usize>]], n_classes: usize) -> Result<f64> {
    fleiss_kappa(&ratings_table(raters, n_classes), raters.len() as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementTier {
    /// Every rater gave the majority label.
    Full,
    /// More than half of the raters agree.
    Majority,
    NoMajority,
}

/// Majority label and agreement tier of every frame. A label needs more
/// than half of all raters; raters without a label count against it.
pub fn majority_truth(raters: &[&[Option<usize>]]) -> Vec<(Option<usize>, AgreementTier)> {
    let k = raters.len();
    let n = raters.iter().map(|r| r.len()).min().unwrap_or(0);
    (0..n)
        .map(|t| {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for r in raters {
                if let Some(c) = r[t] {
                    *counts.entry(c).or_default() += 1;
                }
            }
            match counts.into_iter().max_by_key(|&(c, v)| (v, std::cmp::Reverse(c))) {
                Some((c, v)) if v == k => (Some(c), AgreementTier::Full),
                Some((c, v)) if 2 * v > k => (Some(c), AgreementTier::Majority),
                _ => (None, AgreementTier::NoMajority),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cohen_hand_values() {
        assert_eq!(cohen_kappa(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.0);
        assert_eq!(cohen_kappa(&[0, 1, 2, 1], &[0, 1, 2, 1]).unwrap(), 1.0);
        assert_eq!(cohen_kappa(&[3, 3, 3], &[3, 3, 3]).unwrap(), 1.0);
        let a = [0, 1, 1, 2, 0, 2];
        let b = [0, 1, 2, 2, 1, 2];
        assert_eq!(cohen_kappa(&a, &b).unwrap(), cohen_kappa(&b, &a).unwrap());
        assert!(cohen_kappa(&[0], &[]).is_err());
    }

    #[test]
    fn fleiss_hand_value() {
        // Item 1: two A and one B; item 2: three B.
        let k = fleiss_kappa(&[vec![2, 1], vec![0, 3]], 3).unwrap();
        assert!((k - 0.25).abs() < 1e-12);
        assert_eq!(fleiss_kappa(&[vec![3, 0], vec![0, 3]], 3).unwrap(), 1.0);
        assert!(fleiss_kappa(&[vec![1, 0]], 1).is_err());
        assert!(fleiss_kappa(&[vec![2, 0]], 3).is_err());
    }

    #[test]
    fn fleiss_with_two_raters_is_scott_pi() {
        let a = [0, 1, 1, 2, 0, 2, 1, 1];
        let b = [0, 1, 2, 2, 1, 2, 1, 0];
        let sa: Vec<Option<usize>> = a.iter().map(|&v| Some(v)).collect();
        let sb: Vec<Option<usize>> = b.iter().map(|&v| Some(v)).collect();
        let f = fleiss_kappa_sequences(&[&sa, &sb], 3).unwrap();
        assert!((f - scott_pi(&a, &b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn majority_tiers() {
        let r1 = [Some(0), Some(0), Some(0), None];
        let r2 = [Some(0), Some(0), Some(1), Some(2)];
        let r3 = [Some(0), Some(1), Some(2), Some(2)];
        let m = majority_truth(&[&r1, &r2, &r3]);
        assert_eq!(m[0], (Some(0), AgreementTier::Full));
        assert_eq!(m[1], (Some(0), AgreementTier::Majority));
        assert_eq!(m[2], (None, AgreementTier::NoMajority));
        assert_eq!(m[3], (Some(2), AgreementTier::Majority));
    }
}
