//! Class sets and interval annotation tracks.
//!
//! Annotation files are line-delimited JSON, one interval per line:
//!
//! ```text
//! {"annotator":"A1","track":"posture","start_s":0.0,"end_s":12.5,"label":"prone"}
//! ```

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::data::recording::seconds_to_sample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Track {
    Posture,
    Movement,
    Meta,
}

impl Track {
    pub fn name(self) -> &'static str {
        match self {
            Track::Posture => "posture",
            Track::Movement => "movement",
            Track::Meta => "meta",
        }
    }
}

pub const POSTURE_CLASSES: [&str; 5] = ["prone", "supine", "side L", "side R", "crawl posture"];
pub const MOVEMENT_CLASSES: [&str; 7] = [
    "macro still",
    "turn L",
    "turn R",
    "pivot L",
    "pivot R",
    "crawl proto",
    "crawl commando",
];
pub const META_TAGS: [&str; 3] = ["carried", "out-of-camera", "sensor-drop"];

/// Ordered class names of one classification track.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSet {
    pub track: Track,
    pub classes: Vec<String>,
}

impl ClassSet {
    pub fn posture() -> Self {
        ClassSet {
            track: Track::Posture,
            classes: POSTURE_CLASSES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn movement() -> Self {
        ClassSet {
            track: Track::Movement,
            classes: MOVEMENT_CLASSES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Arbitrary class set, mainly for tests and toy problems.
    pub fn custom(track: Track, classes: &[&str]) -> Self {
        ClassSet {
            track,
            classes: classes.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn for_track(track: Track) -> Option<Self> {
        match track {
            Track::Posture => Some(Self::posture()),
            Track::Movement => Some(Self::movement()),
            Track::Meta => None,
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.classes[idx]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
}

/// One annotator's intervals on one track.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    pub annotator_id: String,
    pub track: Track,
    intervals: Vec<Interval>,
}

impl AnnotationSet {
    /// Validates and stores intervals sorted by start time.
    pub fn new(
        annotator_id: impl Into<String>,
        track: Track,
        mut intervals: Vec<Interval>,
    ) -> Result<Self> {
        for iv in &intervals {
            if !iv.start_s.is_finite() || !iv.end_s.is_finite() || iv.start_s >= iv.end_s {
                return Err(Error::invalid(format!(
                    "interval [{}, {}) has start >= end",
                    iv.start_s, iv.end_s
                )));
            }
            let known = match track {
                Track::Meta => META_TAGS.contains(&iv.label.as_str()),
                t => ClassSet::for_track(t)
                    .map(|cs| cs.index_of(&iv.label).is_some())
                    .unwrap_or(false),
            };
            if !known {
                return Err(Error::UnknownLabel(iv.label.clone()));
            }
        }
        intervals.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        if let Some(w) = intervals.windows(2).find(|w| w[1].start_s < w[0].end_s) {
            return Err(Error::invalid(format!(
                "overlapping intervals at {}s and {}s",
                w[0].start_s, w[1].start_s
            )));
        }
        Ok(AnnotationSet {
            annotator_id: annotator_id.into(),
            track,
            intervals,
        })
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    /// Intervals converted to half-open sample ranges at `rate`.
    pub fn sample_spans(&self, rate: f64) -> Vec<(usize, usize, &str)> {
        self.intervals
            .iter()
            .map(|iv| {
                (
                    seconds_to_sample(iv.start_s, rate),
                    seconds_to_sample(iv.end_s, rate),
                    iv.label.as_str(),
                )
            })
            .collect()
    }

    /// Label of the sample span `[start, end)`; see [`frame_label`].
    pub fn label_span(&self, start: usize, end: usize, rate: f64) -> Option<&str> {
        frame_label(&self.sample_spans(rate), start, end)
    }
}

/// Label covering the most samples of `[start, end)`.
///
/// Coverage is summed per label; ties go to the label whose first covering
/// interval starts earlier. Returns `None` when nothing overlaps the span.
pub fn frame_label<'a>(spans: &[(usize, usize, &'a str)], start: usize, end: usize) -> Option<&'a str> {
    // (label, covered samples, earliest overlapping start)
    let mut tally: Vec<(&str, usize, usize)> = Vec::new();
    for &(s, e, label) in spans {
        let lo = s.max(start);
        let hi = e.min(end);
        if hi <= lo {
            continue;
        }
        match tally.iter_mut().find(|t| t.0 == label) {
            Some(t) => {
                t.1 += hi - lo;
                t.2 = t.2.min(s);
            }
            None => tally.push((label, hi - lo, s)),
        }
    }
    tally
        .into_iter()
        .min_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)))
        .map(|t| t.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AnnotationRecord {
    annotator: String,
    track: Track,
    start_s: f64,
    end_s: f64,
    label: String,
}

/// Parses a line-delimited annotation file into one set per
/// (annotator, track), in order of first appearance.
pub fn parse_annotations<R: Read>(reader: R) -> Result<Vec<AnnotationSet>> {
    let mut groups: Vec<(String, Track, Vec<Interval>)> = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: AnnotationRecord =
            serde_json::from_str(&line).map_err(|e| Error::format(i + 1, e.to_string()))?;
        let iv = Interval {
            start_s: rec.start_s,
            end_s: rec.end_s,
            label: rec.label,
        };
        match groups
            .iter_mut()
            .find(|g| g.0 == rec.annotator && g.1 == rec.track)
        {
            Some(g) => g.2.push(iv),
            None => groups.push((rec.annotator, rec.track, vec![iv])),
        }
    }
    groups
        .into_iter()
        .map(|(a, t, ivs)| AnnotationSet::new(a, t, ivs))
        .collect()
}

pub fn write_annotations<W: Write>(sets: &[AnnotationSet], mut w: W) -> Result<()> {
    for set in sets {
        for iv in &set.intervals {
            let rec = AnnotationRecord {
                annotator: set.annotator_id.clone(),
                track: set.track,
                start_s: iv.start_s,
                end_s: iv.end_s,
                label: iv.label.clone(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            writeln!(w)?;
        }
    }
    Ok(())
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn frame_label_ignores_interval_order(
            cuts in proptest::collection::btree_set(1usize..400, 1..8),
            labels in proptest::collection::vec(0usize..5, 9),
            start in 0usize..300,
            perm_seed in any::<u64>(),
        ) {
            let cuts: Vec<usize> = std::iter::once(0).chain(cuts).chain(std::iter::once(400)).collect();
            let mut spans: Vec<(usize, usize, &str)> = cuts
                .windows(2)
                .enumerate()
                .filter(|(i, _)| i % 3 != 2) // leave some gaps
                .map(|(i, w)| (w[0], w[1], POSTURE_CLASSES[labels[i % labels.len()]]))
                .collect();
            let expected = frame_label(&spans, start, start + 120);
            // Deterministic shuffle.
            let mut s = perm_seed;
            for i in (1..spans.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (s >> 33) as usize % (i + 1);
                spans.swap(i, j);
            }
            prop_assert_eq!(frame_label(&spans, start, start + 120), expected);
        }
    }
}
