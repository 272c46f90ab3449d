//! Multichannel recordings and their text file format.
//!
//! ```text
//! # subject=S01
//! # sample_rate=52
//! t_index,left_arm_acc_x,left_arm_acc_y,...,right_leg_gyro_z
//! 0,0.12,-9.79,...
//! ```
//!
//! Header comments are optional (`sample_rate` defaults to 52 Hz). Columns
//! may appear in any order; they are mapped onto the fixed channel layout.
//! A non-finite or empty value marks that sample as invalid.

use std::io::{BufRead, BufReader, Read, Write};

use crate::data::channel::{ChannelId, NUM_CHANNELS};
use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: f64 = 52.0;

/// One subject session: `T` samples of the 24 channels plus a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub sample_rate: f64,
    len: usize,
    /// Column-major: channel `k` occupies `data[k * len .. (k + 1) * len]`.
    data: Vec<f64>,
    valid: Vec<bool>,
}

impl Recording {
    /// Builds a recording from column-major channel data.
    pub fn from_columns(
        subject_id: impl Into<String>,
        sample_rate: f64,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if columns.len() != NUM_CHANNELS {
            return Err(Error::DimensionMismatch {
                expected: NUM_CHANNELS,
                got: columns.len(),
            });
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::invalid(format!("sample rate {sample_rate}")));
        }
        let len = columns[0].len();
        if let Some(bad) = columns.iter().find(|c| c.len() != len) {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: bad.len(),
            });
        }
        let data: Vec<f64> = columns.into_iter().flatten().collect();
        let valid = (0..len)
            .map(|t| (0..NUM_CHANNELS).all(|k| data[k * len + t].is_finite()))
            .collect();
        Ok(Recording {
            subject_id: subject_id.into(),
            sample_rate,
            len,
            data,
            valid,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len as f64 / self.sample_rate
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        &self.data[k * self.len..(k + 1) * self.len]
    }

    pub fn sample(&self, t: usize, k: usize) -> f64 {
        self.data[k * self.len + t]
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    /// Marks a sample invalid (e.g. a dropped sensor connection).
    pub fn invalidate(&mut self, t: usize) {
        self.valid[t] = false;
    }

    /// Converts seconds to a sample index using the nominal rate.
    pub fn sample_at(&self, seconds: f64) -> usize {
        seconds_to_sample(seconds, self.sample_rate)
    }
}

pub(crate) fn seconds_to_sample(seconds: f64, rate: f64) -> usize {
    let s = (seconds * rate).round();
    if s <= 0.0 {
        0
    } else {
        s as usize
    }
}

/// Parses the recording text format. `default_subject` is used when the
/// file carries no `# subject=` header.
pub fn parse_recording<R: Read>(reader: R, default_subject: &str) -> Result<Recording> {
    let mut subject = default_subject.to_string();
    let mut rate = DEFAULT_SAMPLE_RATE;
    let mut body = String::new();
    let mut header_line = 0usize;
    let mut lines = BufReader::new(reader).lines();
    let mut line_no = 0usize;
    // Leading `#` comments carry metadata; everything after goes to the csv reader.
    for line in lines.by_ref() {
        let line = line?;
        line_no += 1;
        let trimmed = line.trim();
        if let Some(meta) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = meta.split_once('=') {
                match k.trim() {
                    "subject" => subject = v.trim().to_string(),
                    "sample_rate" => {
                        rate = v
                            .trim()
                            .parse()
                            .map_err(|_| Error::format(line_no, "bad sample_rate"))?;
                    }
                    _ => {}
                }
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        header_line = line_no;
        body.push_str(&line);
        body.push('\n');
        break;
    }
    for line in lines {
        body.push_str(&line?);
        body.push('\n');
    }
    if header_line == 0 {
        return Err(Error::format(line_no.max(1), "missing header row"));
    }

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let headers = rdr.headers()?.clone();
    let t_col = headers
        .iter()
        .position(|h| h == "t_index")
        .ok_or_else(|| Error::format(header_line, "missing t_index column"))?;
    let mut col_of = [0usize; NUM_CHANNELS];
    for ch in ChannelId::all() {
        let name = ch.column_name();
        col_of[ch.index()] = headers
            .iter()
            .position(|h| h == name)
            .ok_or(Error::MissingChannel(name))?;
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); NUM_CHANNELS];
    let mut last_t: Option<i64> = None;
    for (i, rec) in rdr.records().enumerate() {
        let line = header_line + 1 + i;
        let rec = rec.map_err(|e| Error::format(line, e.to_string()))?;
        let t: i64 = rec
            .get(t_col)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(line, "unparseable t_index"))?;
        if let Some(prev) = last_t {
            if t <= prev {
                return Err(Error::format(line, "non-monotone timestamps"));
            }
        }
        last_t = Some(t);
        for (k, col) in columns.iter_mut().enumerate() {
            let field = rec
                .get(col_of[k])
                .ok_or_else(|| Error::format(line, "short row"))?;
            let v = if field.is_empty() {
                f64::NAN
            } else {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::format(line, format!("unparseable value `{field}`")))?
            };
            col.push(v);
        }
    }
    Recording::from_columns(subject, rate, columns).map_err(|e| match e {
        Error::InvalidInput(m) => Error::format(1, m),
        other => other,
    })
}

/// Writes a recording in the text format. Values use the shortest
/// representation that parses back to the identical `f64`.
pub fn write_recording<W: Write>(rec: &Recording, mut w: W) -> Result<()> {
    writeln!(w, "# subject={}", rec.subject_id)?;
    writeln!(w, "# sample_rate={}", rec.sample_rate)?;
    let mut header = String::from("t_index");
    for ch in ChannelId::all() {
        header.push(',');
        header.push_str(&ch.column_name());
    }
    writeln!(w, "{header}")?;
    let mut row = String::new();
    for t in 0..rec.len() {
        row.clear();
        row.push_str(&t.to_string());
        for k in 0..NUM_CHANNELS {
            row.push(',');
            let v = rec.sample(t, k);
            if v.is_finite() {
                row.push_str(&v.to_string());
            } else {
                row.push_str("NaN");
            }
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: usize, drop: Option<&str>, nan_at: Option<(usize, usize)>) -> String {
        let mut s = String::from("# subject=S07\n# sample_rate=52\nt_index");
        let names: Vec<String> = ChannelId::all()
            .map(|c| c.column_name())
            .filter(|n| Some(n.as_str()) != drop)
            .collect();
        for n in &names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for t in 0..rows {
            s.push_str(&t.to_string());
            for k in 0..names.len() {
                if nan_at == Some((t, k)) {
                    s.push_str(",nan");
                } else {
                    s.push_str(&format!(",{}", (t * 31 + k) as f64 * 0.25 - 7.0));
                }
            }
            s.push('\n');
        }
        s
    }

    #[test]
    fn parses_well_formed_file() {
        let rec = parse_recording(table(300, None, None).as_bytes(), "x").unwrap();
        assert_eq!(rec.len(), 300);
        assert_eq!(rec.subject_id, "S07");
        assert_eq!(rec.sample_rate, 52.0);
        assert!(rec.valid().iter().all(|&v| v));
        assert_eq!(rec.sample(3, 5), (3 * 31 + 5) as f64 * 0.25 - 7.0);
    }

    #[test]
    fn missing_channel_is_named() {
        let err = parse_recording(table(5, Some("left_leg_gyro_z"), None).as_bytes(), "x")
            .unwrap_err();
        match err {
            Error::MissingChannel(name) => assert_eq!(name, "left_leg_gyro_z"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn nan_sample_marks_row_invalid() {
        let rec = parse_recording(table(10, None, Some((4, 9))).as_bytes(), "x").unwrap();
        let invalid: Vec<usize> = (0..10).filter(|&t| !rec.valid()[t]).collect();
        assert_eq!(invalid, vec![4]);
        assert!(rec.sample(4, 9).is_nan());
        // Every other value of the row is still read.
        assert_eq!(rec.sample(4, 8), (4 * 31 + 8) as f64 * 0.25 - 7.0);
    }

    #[test]
    fn rejects_non_monotone_timestamps() {
        let text = table(4, None, None).replace("\n2,", "\n0,");
        match parse_recording(text.as_bytes(), "x").unwrap_err() {
            Error::Format { line, msg } => {
                assert_eq!(line, 6);
                assert!(msg.contains("non-monotone"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_garbage_row_with_line_number() {
        let text = table(4, None, None).replace("\n1,", "\n1,abc;");
        match parse_recording(text.as_bytes(), "x").unwrap_err() {
            Error::Format { line, .. } => assert_eq!(line, 5),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_recording_is_allowed() {
        let rec = parse_recording(table(0, None, None).as_bytes(), "x").unwrap();
        assert!(rec.is_empty());
    }
}
