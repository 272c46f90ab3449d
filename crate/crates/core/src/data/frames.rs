//! Frame windowing, per-frame soft labels and usability masking.

use serde::{Deserialize, Serialize};

use crate::data::annotation::{AnnotationSet, ClassSet, Track};
use crate::data::recording::Recording;
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 120;
pub const DEFAULT_HOP: usize = 60;

/// Start offsets of fixed-length analysis windows over one recording.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameIndex {
    pub window_len: usize,
    pub hop: usize,
    pub starts: Vec<usize>,
}

impl FrameIndex {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    /// Sample span `[start, end)` of frame `i`.
    pub fn span(&self, i: usize) -> (usize, usize) {
        (self.starts[i], self.starts[i] + self.window_len)
    }
}

/// Number of complete windows in `len` samples.
pub fn frame_count(len: usize, window_len: usize, hop: usize) -> usize {
    if len < window_len {
        0
    } else {
        (len - window_len) / hop + 1
    }
}

/// Splits a recording into overlapping windows. Recordings shorter than one
/// window yield no frames.
pub fn window_frames(recording: &Recording, window_len: usize, hop: usize) -> Result<FrameIndex> {
    window_len_frames(recording.len(), window_len, hop)
}

pub fn window_len_frames(len: usize, window_len: usize, hop: usize) -> Result<FrameIndex> {
    if window_len == 0 || hop == 0 || hop > window_len {
        return Err(Error::invalid(format!(
            "window {window_len} / hop {hop}: need 0 < hop <= window"
        )));
    }
    let n = frame_count(len, window_len, hop);
    Ok(FrameIndex {
        window_len,
        hop,
        starts: (0..n).map(|i| i * hop).collect(),
    })
}

/// Probability vector over a class set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SoftLabel(pub Vec<f64>);

impl SoftLabel {
    pub fn one_hot(class: usize, n: usize) -> Self {
        let mut p = vec![0.0; n];
        p[class] = 1.0;
        SoftLabel(p)
    }

    pub fn uniform(n: usize) -> Self {
        SoftLabel(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.0.iter().all(|&p| (0.0..=1.0).contains(&p))
            && (self.0.iter().sum::<f64>() - 1.0).abs() <= tol
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Converts annotator votes into a prior over `n_classes`.
///
/// `None` votes (unannotated) are ignored; if every vote is `None` the frame
/// is unusable and `None` is returned.
pub fn vote_priors(votes: &[Option<usize>], n_classes: usize) -> Option<SoftLabel> {
    let cast: Vec<usize> = votes.iter().flatten().copied().collect();
    if cast.is_empty() {
        return None;
    }
    let mut counts = vec![0usize; n_classes];
    for &v in &cast {
        counts[v] += 1;
    }
    let k = cast.len() as f64;
    Some(SoftLabel(counts.into_iter().map(|c| c as f64 / k).collect()))
}

/// Per-frame class index of one annotation track (`None` when the frame is
/// unannotated or the label is outside `classes`).
pub fn rasterize(
    track: &AnnotationSet,
    frames: &FrameIndex,
    rate: f64,
    classes: &ClassSet,
) -> Vec<Option<usize>> {
    let spans = track.sample_spans(rate);
    (0..frames.len())
        .map(|i| {
            let (s, e) = frames.span(i);
            crate::data::annotation::frame_label(&spans, s, e).and_then(|l| classes.index_of(l))
        })
        .collect()
}

/// A frame is usable iff none of its samples is meta-tagged or invalid.
pub fn usable_mask(meta_tracks: &[&AnnotationSet], frames: &FrameIndex, recording: &Recording) -> Vec<bool> {
    let n = recording.len();
    let mut bad = vec![false; n];
    for (t, v) in recording.valid().iter().enumerate() {
        bad[t] = !v;
    }
    for set in meta_tracks.iter().filter(|s| s.track == Track::Meta) {
        for (s, e, _) in set.sample_spans(recording.sample_rate) {
            for b in bad.iter_mut().take(e.min(n)).skip(s) {
                *b = true;
            }
        }
    }
    // Prefix sums of contaminated samples.
    let mut prefix = vec![0usize; n + 1];
    for t in 0..n {
        prefix[t + 1] = prefix[t] + bad[t] as usize;
    }
    (0..frames.len())
        .map(|i| {
            let (s, e) = frames.span(i);
            prefix[e] == prefix[s]
        })
        .collect()
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn window_count_matches_closed_form(len in 0usize..5000, win in 1usize..300, hop_frac in 0.0f64..1.0) {
            let hop = ((win as f64 * hop_frac).ceil() as usize).clamp(1, win);
            let f = window_len_frames(len, win, hop).unwrap();
            let expected = if len >= win { (len - win) / hop + 1 } else { 0 };
            prop_assert_eq!(f.len(), expected);
            for w in f.starts.windows(2) {
                prop_assert_eq!(w[1] - w[0], hop);
            }
            if let Some(&last) = f.starts.last() {
                prop_assert!(last + win <= len);
            }
        }

        #[test]
        fn priors_sum_to_one_in_thirds(votes in proptest::collection::vec(0usize..5, 3)) {
            let v: Vec<Option<usize>> = votes.into_iter().map(Some).collect();
            let p = vote_priors(&v, 5).unwrap();
            prop_assert!((p.0.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for x in p.0 {
                let k = x * 3.0;
                prop_assert!((k - k.round()).abs() < 1e-9);
            }
        }
    }
}
