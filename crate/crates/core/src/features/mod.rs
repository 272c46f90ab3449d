//! Hand-crafted window features and standardization for the SVM path.

pub mod spectrum;
pub mod stats;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use spectrum::{magnitude_spectrum, Spectrum, FFT_LEN, NUM_BINS};
pub use stats::{channel_features, FEATURE_NAMES, NUM_FEATURES};

use crate::data::{ChannelId, FrameIndex, Recording, SensorSet};
use crate::error::{Error, Result};

/// Row-major frames × features design matrix with column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    rows: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>) -> Self {
        FeatureMatrix {
            names,
            rows: 0,
            data: Vec::new(),
        }
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let mut m = FeatureMatrix::new(names);
        for r in rows {
            m.push_row(r)?;
        }
        Ok(m)
    }

    pub fn cols(&self) -> usize {
        self.names.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.cols(),
                got: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols().max(1)).take(self.rows)
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, idx: &[usize]) -> FeatureMatrix {
        let mut out = FeatureMatrix::new(self.names.clone());
        for &i in idx {
            out.data.extend_from_slice(self.row(i));
            out.rows += 1;
        }
        out
    }

    /// Appends all rows of `other` (same column layout).
    pub fn append(&mut self, other: &FeatureMatrix) -> Result<()> {
        if other.cols() != self.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.cols(),
                got: other.cols(),
            });
        }
        self.data.extend_from_slice(&other.data);
        self.rows += other.rows;
        Ok(())
    }

    /// Writes a CSV table with a header of column names, one row per frame.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.names)?;
        for row in self.iter_rows() {
            wtr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Column names for a sensor configuration, e.g. `left_arm_acc_x.mean`.
pub fn feature_names(sensors: SensorSet) -> Vec<String> {
    sensors
        .channels()
        .into_iter()
        .flat_map(|k| {
            let ch = ChannelId::from_index(k).column_name();
            FEATURE_NAMES.iter().map(move |f| format!("{ch}.{f}"))
        })
        .collect()
}

/// Features of the sample span `[start, start + len)` over the configured
/// channels, concatenated in channel order.
pub fn frame_features(
    recording: &Recording,
    start: usize,
    len: usize,
    sensors: SensorSet,
) -> Result<Vec<f64>> {
    if start + len > recording.len() {
        return Err(Error::invalid(format!(
            "frame [{start}, {}) outside recording of {} samples",
            start + len,
            recording.len()
        )));
    }
    let mut out = Vec::with_capacity(sensors.len() * 6 * NUM_FEATURES);
    for k in sensors.channels() {
        let window = &recording.channel(k)[start..start + len];
        out.extend_from_slice(&channel_features(window, recording.sample_rate)?);
    }
    Ok(out)
}

/// Feature matrix of the selected frames of one recording.
pub fn recording_features(
    recording: &Recording,
    frames: &FrameIndex,
    selected: &[usize],
    sensors: SensorSet,
) -> Result<FeatureMatrix> {
    let mut m = FeatureMatrix::new(feature_names(sensors));
    for &i in selected {
        let (s, _) = frames.span(i);
        m.push_row(&frame_features(recording, s, frames.window_len, sensors)?)?;
    }
    Ok(m)
}

/// Per-column affine normalization fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Columns whose variance was zero and whose scale was clamped to 1.
    pub clamped: Vec<bool>,
}

impl Standardizer {
    pub fn fit(x: &FeatureMatrix) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Empty("standardizer training set".into()));
        }
        let n = x.rows() as f64;
        let d = x.cols();
        let mut mean = vec![0.0; d];
        let mut std = vec![0.0; d];
        let mut clamped = vec![false; d];
        for j in 0..d {
            let col: Vec<f64> = x.iter_rows().map(|r| r[j]).collect();
            let (lo, hi) = col
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            if lo == hi {
                mean[j] = lo;
                std[j] = 1.0;
                clamped[j] = true;
                continue;
            }
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            mean[j] = m;
            if stats::degenerate(var, m) {
                std[j] = 1.0;
                clamped[j] = true;
            } else {
                std[j] = var.sqrt();
            }
        }
        Ok(Standardizer { mean, std, clamped })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn apply_matrix(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        let mut out = x.clone();
        for i in 0..out.rows() {
            let z = self.apply(x.row(i))?;
            out.row_mut(i).copy_from_slice(&z);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::NUM_CHANNELS;

    fn rec() -> Recording {
        let cols = (0..NUM_CHANNELS)
            .map(|k| (0..300).map(|t| ((t * (k + 3)) % 17) as f64 - 8.0).collect())
            .collect();
        Recording::from_columns("s", 52.0, cols).unwrap()
    }

    #[test]
    fn dimension_follows_sensor_configuration() {
        let r = rec();
        assert_eq!(frame_features(&r, 0, 120, SensorSet::all()).unwrap().len(), 336);
        assert_eq!(frame_features(&r, 0, 120, "la".parse().unwrap()).unwrap().len(), 84);
        assert_eq!(frame_features(&r, 0, 120, "ll,rl".parse().unwrap()).unwrap().len(), 168);
        assert_eq!(feature_names(SensorSet::all()).len(), 336);
        assert!(frame_features(&r, 200, 120, SensorSet::all()).is_err());
    }

    #[test]
    fn standardizer_fit_apply() {
        let rows = vec![
            vec![1.0, 5.0, 2.0],
            vec![2.0, 5.0, 4.0],
            vec![3.0, 5.0, 9.0],
            vec![6.0, 5.0, -1.0],
        ];
        let m = FeatureMatrix::from_rows(vec!["a".into(), "b".into(), "c".into()], &rows).unwrap();
        let s = Standardizer::fit(&m).unwrap();
        assert_eq!(s.clamped, vec![false, true, false]);
        let z = s.apply_matrix(&m).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = z.iter_rows().map(|r| r[j]).collect();
            let mean = col.iter().sum::<f64>() / 4.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-6);
            if j == 1 {
                assert!(col.iter().all(|&v| v == 0.0));
            } else {
                assert!((var - 1.0).abs() < 1e-6);
            }
        }
        // Held-out vector: column a has mean 3, population std sqrt(3.5).
        let held = s.apply(&[4.0, 7.0, 3.5]).unwrap();
        assert!((held[0] - (4.0 - 3.0) / 3.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(held[1], 2.0);
        assert!((held[2] - (3.5 - 3.5) / 3.5f64.sqrt()).abs() < 1e-12);
        assert!(s.apply(&[1.0]).is_err());
        assert!(Standardizer::fit(&FeatureMatrix::new(vec!["a".into()])).is_err());
    }

    #[test]
    fn csv_export_has_named_columns() {
        let r = rec();
        let frames = crate::data::window_frames(&r, 120, 60).unwrap();
        let m = recording_features(&r, &frames, &[0, 2], "ra".parse().unwrap()).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("right_arm_acc_x.mean,right_arm_acc_x.variance"));
        assert_eq!(lines.count(), 2);
    }
}
