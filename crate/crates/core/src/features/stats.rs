//! Fourteen per-channel window statistics.

use crate::error::Result;
use crate::features::spectrum::{magnitude_spectrum, Spectrum};

pub const NUM_FEATURES: usize = 14;

/// Feature names in output order. `spectral_entropy` completes the set of
/// fourteen; the others follow the usual activity-recognition definitions.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "mean",
    "variance",
    "max",
    "min",
    "sma",
    "energy",
    "iqr",
    "skewness",
    "kurtosis",
    "dominant_freq",
    "weighted_freq",
    "freq_skewness",
    "freq_kurtosis",
    "spectral_entropy",
];

/// Computes the 14 features of one channel window.
///
/// Degenerate moments (zero variance, or an all-zero non-DC spectrum) give
/// 0 for skewness and kurtosis; kurtosis is excess kurtosis. A constant
/// window has all five spectral features equal to 0.
pub fn channel_features(window: &[f64], rate: f64) -> Result<[f64; NUM_FEATURES]> {
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    let (mut sma, mut energy) = (0.0, 0.0);
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for &x in window {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
        sma += x.abs();
        energy += x * x;
        max = max.max(x);
        min = min.min(x);
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let (skew, kurt) = shape_moments(m2, m3, m4, mean);

    let mut sorted = window.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);

    // Spectral shape is taken from the mean-removed window so that the
    // zero-padding does not turn the signal level into spurious non-DC energy.
    let freq = if degenerate(m2, mean) {
        [0.0; 5]
    } else {
        let centered: Vec<f64> = window.iter().map(|x| x - mean).collect();
        spectral_features(&magnitude_spectrum(&centered, rate)?)
    };
    Ok([
        mean,
        m2,
        max,
        min,
        sma / n,
        energy / n,
        iqr,
        skew,
        kurt,
        freq[0],
        freq[1],
        freq[2],
        freq[3],
        freq[4],
    ])
}

/// Skewness and excess kurtosis from central moments; zero when the
/// variance vanishes relative to the signal level.
fn shape_moments(m2: f64, m3: f64, m4: f64, level: f64) -> (f64, f64) {
    if degenerate(m2, level) {
        return (0.0, 0.0);
    }
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Variance indistinguishable from rounding noise at the given level.
pub(crate) fn degenerate(m2: f64, level: f64) -> bool {
    let tol = 1e-14 * level.abs();
    m2 == 0.0 || m2 <= tol * tol
}

/// Linear interpolation between order statistics (`h = (n-1) p`).
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Dominant frequency, weighted mean frequency, frequency skewness,
/// frequency kurtosis and spectral entropy over the non-DC bins.
fn spectral_features(s: &Spectrum) -> [f64; 5] {
    let mags = &s.magnitudes[1..];
    let total: f64 = mags.iter().sum();
    if total <= 0.0 {
        return [0.0; 5];
    }
    let mut peak = 0;
    for (i, &m) in mags.iter().enumerate() {
        if m > mags[peak] {
            peak = i;
        }
    }
    let dominant = s.frequency(peak + 1);
    let freq = |i: usize| s.frequency(i + 1);
    let mean: f64 = mags.iter().enumerate().map(|(i, &m)| freq(i) * m).sum::<f64>() / total;
    let (mut m2, mut m3, mut m4, mut entropy) = (0.0, 0.0, 0.0, 0.0);
    for (i, &m) in mags.iter().enumerate() {
        let p = m / total;
        let d = freq(i) - mean;
        m2 += p * d * d;
        m3 += p * d * d * d;
        m4 += p * d * d * d * d;
        if p > 0.0 {
            entropy -= p * p.ln();
        }
    }
    let (skew, kurt) = shape_moments(m2, m3, m4, mean);
    [dominant, mean, skew, kurt, entropy]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_window() {
        let c = -2.5;
        let f = channel_features(&[c; 120], 52.0).unwrap();
        assert_eq!(f[0], c);
        assert_eq!(f[1], 0.0);
        assert_eq!(f[2], c);
        assert_eq!(f[3], c);
        assert_eq!(f[4], c.abs());
        assert_eq!(f[5], c * c);
        assert_eq!(f[6], 0.0);
        assert_eq!(f[7], 0.0);
        assert_eq!(f[8], 0.0);
        assert_eq!(&f[9..], &[0.0; 5]);
        let f = channel_features(&[0.1; 120], 52.0).unwrap();
        assert!(f[1] < 1e-30);
        assert_eq!(&f[7..], &[0.0; 7]);
    }

    #[test]
    fn sinusoid_statistics() {
        let x: Vec<f64> = (0..120)
            .map(|n| (2.0 * PI * 13.0 * n as f64 / 52.0).sin())
            .collect();
        let f = channel_features(&x, 52.0).unwrap();
        assert!((f[1] - 0.5).abs() < 1e-2);
        assert!((f[9] - 13.0).abs() <= 52.0 / 128.0);
    }

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&s, 0.25), 2.0);
        assert_eq!(quantile_sorted(&s, 0.75), 4.0);
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.25), 1.75);
    }
}
