use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Transform length; windows are zero-padded up to this.
pub const FFT_LEN: usize = 128;
/// Number of non-negative frequency bins (`0..=FFT_LEN/2`).
pub const NUM_BINS: usize = FFT_LEN / 2 + 1;

/// One-sided magnitude spectrum of a zero-padded window.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub magnitudes: Vec<f64>,
    pub bin_hz: f64,
}

impl Spectrum {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }
}

/// Zero-pads `window` to 128 samples and returns |X_k| for bins 0..=64.
pub fn magnitude_spectrum(window: &[f64], rate: f64) -> Result<Spectrum> {
    if window.len() > FFT_LEN {
        return Err(Error::invalid(format!(
            "window of {} samples exceeds transform length {FFT_LEN}",
            window.len()
        )));
    }
    if window.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("non-finite sample in spectrum input"));
    }
    let mut buf: Vec<Complex<f64>> = window
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(FFT_LEN)
        .collect();
    thread_local! {
        static PLAN: std::sync::Arc<dyn rustfft::Fft<f64>> =
            FftPlanner::new().plan_fft_forward(FFT_LEN);
    }
    PLAN.with(|fft| fft.process(&mut buf));
    Ok(Spectrum {
        magnitudes: buf[..NUM_BINS].iter().map(|c| c.norm()).collect(),
        bin_hz: rate / FFT_LEN as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Direct evaluation of the DFT definition.
    fn dft_mag(x: &[f64]) -> Vec<f64> {
        (0..NUM_BINS)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, &v) in x.iter().enumerate() {
                    let a = -2.0 * PI * (k * n) as f64 / FFT_LEN as f64;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                re.hypot(im)
            })
            .collect()
    }

    #[test]
    fn zero_window_gives_zero_spectrum() {
        let s = magnitude_spectrum(&[0.0; 120], 52.0).unwrap();
        assert_eq!(s.magnitudes.len(), 65);
        assert!(s.magnitudes.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn sinusoid_peak_at_13_hz() {
        let x: Vec<f64> = (0..120)
            .map(|n| (2.0 * PI * 13.0 * n as f64 / 52.0).sin())
            .collect();
        let s = magnitude_spectrum(&x, 52.0).unwrap();
        let oracle = dft_mag(&x);
        for (a, b) in s.magnitudes.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9);
        }
        let peak = (1..NUM_BINS)
            .max_by(|&a, &b| oracle[a].total_cmp(&oracle[b]))
            .unwrap();
        assert!((s.frequency(peak) - 13.0).abs() <= s.bin_hz);
    }

    #[test]
    fn parseval_holds() {
        let x: Vec<f64> = (0..120).map(|n| ((n * 7919) % 101) as f64 / 13.0 - 3.0).collect();
        let s = magnitude_spectrum(&x, 52.0).unwrap();
        let m = &s.magnitudes;
        // Real input: bins 1..63 appear twice in the full 128-point spectrum.
        let full: f64 = m[0] * m[0]
            + m[64] * m[64]
            + 2.0 * m[1..64].iter().map(|v| v * v).sum::<f64>();
        let time: f64 = x.iter().map(|v| v * v).sum();
        assert!((time - full / 128.0).abs() <= 1e-9 * time);
    }

    #[test]
    fn nan_is_rejected() {
        let mut x = [0.0; 120];
        x[3] = f64::NAN;
        assert!(magnitude_spectrum(&x, 52.0).is_err());
    }
}
