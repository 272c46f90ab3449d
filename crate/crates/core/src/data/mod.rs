//! Recordings, annotation tracks, windowing and vote priors.

pub mod annotation;
pub mod channel;
pub mod frames;
pub mod recording;

pub use annotation::{
    frame_label, parse_annotations, write_annotations, AnnotationSet, ClassSet, Interval, Track,
};
pub use channel::{Axis, ChannelId, Modality, Sensor, SensorSet, NUM_CHANNELS};
pub use frames::{
    argmax, rasterize, usable_mask, vote_priors, window_frames, FrameIndex, SoftLabel,
    DEFAULT_HOP, DEFAULT_WINDOW,
};
pub use recording::{parse_recording, write_recording, Recording, DEFAULT_SAMPLE_RATE};

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn recording_text_round_trip_is_bit_exact(
            len in 0usize..40,
            seed in proptest::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 24),
        ) {
            let cols: Vec<Vec<f64>> = (0..NUM_CHANNELS)
                .map(|k| (0..len).map(|t| seed[k] / (t as f64 + 1.0) + t as f64 * 1e-7).collect())
                .collect();
            let rec = Recording::from_columns("S1", 52.0, cols).unwrap();
            let mut buf = Vec::new();
            write_recording(&rec, &mut buf).unwrap();
            let back = parse_recording(buf.as_slice(), "other").unwrap();
            prop_assert_eq!(back.len(), rec.len());
            prop_assert_eq!(&back.subject_id, "S1");
            for k in 0..NUM_CHANNELS {
                for (a, b) in back.channel(k).iter().zip(rec.channel(k)) {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }
}
