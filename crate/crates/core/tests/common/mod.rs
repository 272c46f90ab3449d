//! Slow, direct reference implementations used as test oracles.
#![allow(dead_code)]

use std::f64::consts::PI;

use itertools::Itertools;
use rand::Rng;

pub const PAD: usize = 128;

/// |X_k| for k = 0..=64 straight from the DFT sum of the zero-padded window.
pub fn dft_magnitudes(x: &[f64]) -> Vec<f64> {
    (0..=PAD / 2)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (n, v) in x.iter().enumerate() {
                let angle = 2.0 * PI * ((k * n) % PAD) as f64 / PAD as f64;
                re += v * angle.cos();
                im -= v * angle.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

fn insertion_sorted(x: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = Vec::with_capacity(x.len());
    for &e in x {
        let pos = v.iter().position(|&o| o > e).unwrap_or(v.len());
        v.insert(pos, e);
    }
    v
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let below = pos.floor();
    let frac = pos - below;
    let i = below as usize;
    if frac == 0.0 {
        sorted[i]
    } else {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    }
}

/// The fourteen per-channel features, computed with plain loops, plus the
/// two largest non-DC magnitudes (to recognize ambiguous peaks).
pub fn naive_features(x: &[f64], rate: f64) -> ([f64; 14], (f64, f64)) {
    let n = x.len() as f64;
    let mut mean = 0.0;
    for v in x {
        mean += v;
    }
    mean /= n;
    let moment = |k: i32| x.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
    let var = moment(2);
    let skew = moment(3) / var.powf(1.5);
    let kurt = moment(4) / (var * var) - 3.0;
    let max = x.iter().cloned().fold(f64::MIN, f64::max);
    let min = x.iter().cloned().fold(f64::MAX, f64::min);
    let sma = x.iter().map(|v| v.abs()).sum::<f64>() / n;
    let energy = x.iter().map(|v| v * v).sum::<f64>() / n;
    let sorted = insertion_sorted(x);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);

    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let mags = dft_magnitudes(&centered);
    let bins: Vec<(f64, f64)> = (1..mags.len()).map(|k| (k as f64 * rate / PAD as f64, mags[k])).collect();
    let total: f64 = bins.iter().map(|b| b.1).sum();
    let mut best = 0;
    for i in 1..bins.len() {
        if bins[i].1 > bins[best].1 {
            best = i;
        }
    }
    let mut by_mag: Vec<f64> = bins.iter().map(|b| b.1).collect();
    by_mag.sort_by(|a, b| b.total_cmp(a));
    let fmean = bins.iter().map(|(f, m)| f * m).sum::<f64>() / total;
    let fmoment = |k: i32| bins.iter().map(|(f, m)| m / total * (f - fmean).powi(k)).sum::<f64>();
    let fvar = fmoment(2);
    let entropy = -bins
        .iter()
        .map(|(_, m)| m / total)
        .filter(|p| *p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>();
    (
        [
            mean,
            var,
            max,
            min,
            sma,
            energy,
            iqr,
            skew,
            kurt,
            bins[best].0,
            fmean,
            fmoment(3) / fvar.powf(1.5),
            fmoment(4) / (fvar * fvar) - 3.0,
            entropy,
        ],
        (by_mag[0], by_mag[1]),
    )
}

/// Assorted window shapes: offsets, scales, tones, spikes and ties.
pub fn random_window<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let offset = rng.random_range(-12.0..12.0);
    let scale = 10f64.powf(rng.random_range(-2.0..1.0));
    let tone = rng.random_range(0.0..26.0);
    let tone_amp = rng.random_range(0.0..3.0);
    let quantize = rng.random_bool(0.2);
    (0..len)
        .map(|t| {
            let mut v = offset + scale * rng.random_range(-1.0..1.0) + tone_amp * (2.0 * PI * tone * t as f64 / 52.0).sin();
            if rng.random_bool(0.01) {
                v += 20.0 * scale;
            }
            if quantize {
                v = (v * 4.0).round() / 4.0;
            }
            v
        })
        .collect()
}

/// Two-sided exact Mann-Whitney p by listing every split of the pooled
/// sample; U counts pairs x > y as 1 and ties as 1/2.
pub fn enumerated_mann_whitney(x: &[f64], y: &[f64]) -> (f64, f64) {
    let u_of = |a: &[f64], b: &[f64]| -> f64 {
        let mut u = 0.0;
        for p in a {
            for q in b {
                if p > q {
                    u += 1.0;
                } else if p == q {
                    u += 0.5;
                }
            }
        }
        u
    };
    let observed = u_of(x, y);
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (mut total, mut le, mut ge) = (0u64, 0u64, 0u64);
    for pick in (0..pooled.len()).combinations(x.len()) {
        let a: Vec<f64> = pick.iter().map(|&i| pooled[i]).collect();
        let b: Vec<f64> = (0..pooled.len()).filter(|i| !pick.contains(i)).map(|i| pooled[i]).collect();
        let u = u_of(&a, &b);
        total += 1;
        if u <= observed + 1e-9 {
            le += 1;
        }
        if u >= observed - 1e-9 {
            ge += 1;
        }
    }
    (observed, (2.0 * le.min(ge) as f64 / total as f64).min(1.0))
}

/// |a - b| relative to the larger magnitude, with unit floor.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
