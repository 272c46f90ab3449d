use crate::error::{Error, Result};

/// Relative frequency of every class in a label sequence.
pub fn activity_profile(labels: &[usize], n_classes: usize) -> Result<Vec<f64>> {
    if labels.is_empty() {
        return Err(Error::Empty("activity profile of no frames".into()));
    }
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        if l >= n_classes {
            return Err(Error::UnknownLabel(format!("class index {l} of {n_classes}")));
        }
        counts[l] += 1;
    }
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / labels.len() as f64)
        .collect())
}

/// Largest absolute difference between two profiles.
pub fn profile_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles() {
        assert_eq!(activity_profile(&[0; 9], 7).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(activity_profile(&[0, 1, 1, 0], 5).unwrap()[..2], [0.5, 0.5]);
        assert!(activity_profile(&[], 5).is_err());
        assert_eq!(profile_distance(&[0.5, 0.5], &[0.25, 0.75]), 0.25);
    }
}
