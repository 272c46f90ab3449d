//! Subject-level datasets: loading a directory of recordings and annotator
//! files, deriving frames, usability, vote priors and majority truth, and
//! writing synthetic datasets in the same layout.
//!
//! Directory layout, one group of files per subject `ID`:
//!
//! * `ID.rec.csv`: the recording
//! * `ID.annot.<annotator>.jsonl`: one annotator's posture, movement and meta tracks
//! * `ID.truth.jsonl`: optional hidden truth (synthetic data only)
//! * `scenario.json`: optional generator settings

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    parse_annotations, parse_recording, rasterize, usable_mask, vote_priors, window_frames,
    write_annotations, write_recording, AnnotationSet, ClassSet, FrameIndex, Recording, SensorSet,
    SoftLabel, Track, DEFAULT_HOP, DEFAULT_WINDOW,
};
use crate::error::{Error, Result};
use crate::eval::{fleiss_kappa_sequences, majority_truth, AgreementTier};
use crate::features::{recording_features, FeatureMatrix};
use crate::synth::{generate_infant, simulate_annotators, AnnotatorNoise, Scenario};

/// Frame-level labels of one track of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackData {
    pub classes: ClassSet,
    /// Per annotator, per frame.
    pub votes: Vec<Vec<Option<usize>>>,
    /// Vote priors; `None` for unusable or unannotated frames.
    pub priors: Vec<Option<SoftLabel>>,
    /// Majority label; `None` for unusable or no-majority frames.
    pub majority: Vec<Option<usize>>,
    pub tiers: Vec<AgreementTier>,
    /// Generator truth, when known.
    pub hidden: Option<Vec<Option<usize>>>,
}

impl TrackData {
    fn build(
        track: Track,
        annotators: &[&AnnotationSet],
        hidden: Option<&AnnotationSet>,
        frames: &FrameIndex,
        rate: f64,
        usable: &[bool],
    ) -> Self {
        let classes = ClassSet::for_track(track).expect("labelled track");
        let votes: Vec<Vec<Option<usize>>> = annotators
            .iter()
            .map(|a| rasterize(a, frames, rate, &classes))
            .collect();
        let refs: Vec<&[Option<usize>]> = votes.iter().map(Vec::as_slice).collect();
        let mt = majority_truth(&refs);
        let mut priors = Vec::with_capacity(frames.len());
        let mut majority = Vec::with_capacity(frames.len());
        let mut tiers = Vec::with_capacity(frames.len());
        for (t, &(label, tier)) in mt.iter().enumerate() {
            let frame_votes: Vec<Option<usize>> = votes.iter().map(|v| v[t]).collect();
            priors.push(if usable[t] { vote_priors(&frame_votes, classes.len()) } else { None });
            majority.push(if usable[t] { label } else { None });
            tiers.push(tier);
        }
        let hidden = hidden.map(|h| rasterize(h, frames, rate, &classes));
        TrackData {
            classes,
            votes,
            priors,
            majority,
            tiers,
            hidden,
        }
    }

    /// Frames with a majority label, optionally restricted to full agreement.
    pub fn evaluable(&self, full_agreement_only: bool) -> Vec<usize> {
        (0..self.majority.len())
            .filter(|&t| {
                self.majority[t].is_some() && (!full_agreement_only || self.tiers[t] == AgreementTier::Full)
            })
            .collect()
    }

    /// Fleiss' κ across annotators over usable, fully annotated frames.
    pub fn kappa(&self, usable: &[bool]) -> Result<f64> {
        let masked: Vec<Vec<Option<usize>>> = self
            .votes
            .iter()
            .map(|v| v.iter().zip(usable).map(|(&l, &u)| if u { l } else { None }).collect())
            .collect();
        let refs: Vec<&[Option<usize>]> = masked.iter().map(Vec::as_slice).collect();
        fleiss_kappa_sequences(&refs, self.classes.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectData {
    pub id: String,
    pub recording: Recording,
    pub frames: FrameIndex,
    pub usable: Vec<bool>,
    /// All-sensor features of the usable frames, in frame order.
    pub features: FeatureMatrix,
    /// Frame index of every feature row.
    pub feature_frames: Vec<usize>,
    pub posture: TrackData,
    pub movement: TrackData,
}

impl SubjectData {
    /// Derives frame-level data from a recording and annotator tracks.
    /// Tracks are grouped by annotator id; `truth` holds optional hidden
    /// posture/movement tracks.
    pub fn build(
        recording: Recording,
        annotations: &[AnnotationSet],
        truth: &[AnnotationSet],
        window_len: usize,
        hop: usize,
    ) -> Result<Self> {
        let frames = window_frames(&recording, window_len, hop)?;
        let meta: Vec<&AnnotationSet> = annotations.iter().filter(|a| a.track == Track::Meta).collect();
        let usable = usable_mask(&meta, &frames, &recording);
        let of = |track| -> Vec<&AnnotationSet> { annotations.iter().filter(|a| a.track == track).collect() };
        let hidden = |track| truth.iter().find(|a| a.track == track);
        let rate = recording.sample_rate;
        let posture = TrackData::build(Track::Posture, &of(Track::Posture), hidden(Track::Posture), &frames, rate, &usable);
        let movement =
            TrackData::build(Track::Movement, &of(Track::Movement), hidden(Track::Movement), &frames, rate, &usable);
        let feature_frames: Vec<usize> = (0..frames.len()).filter(|&t| usable[t]).collect();
        let features = recording_features(&recording, &frames, &feature_frames, SensorSet::all())?;
        Ok(SubjectData {
            id: recording.subject_id.clone(),
            recording,
            frames,
            usable,
            features,
            feature_frames,
            posture,
            movement,
        })
    }

    pub fn track(&self, track: Track) -> &TrackData {
        match track {
            Track::Posture => &self.posture,
            Track::Movement => &self.movement,
            Track::Meta => panic!("meta track carries no class labels"),
        }
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub subjects: Vec<SubjectData>,
    pub window_len: usize,
    pub hop: usize,
    /// Problems found while loading (skipped subjects, missing files).
    pub warnings: Vec<String>,
}

/// How to synthesize a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub scenario: Scenario,
    pub subjects: usize,
    pub annotators: usize,
    pub noise: AnnotatorNoise,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            scenario: Scenario::default(),
            subjects: 12,
            annotators: 3,
            noise: AnnotatorNoise {
                jitter_s: 0.3,
                confusion_rate: 0.1,
                seed: 0,
            },
            seed: 0,
        }
    }
}

/// Generated files of one synthetic subject.
#[derive(Debug, Clone)]
pub struct SynthSubject {
    pub recording: Recording,
    pub annotations: Vec<AnnotationSet>,
    pub truth: Vec<AnnotationSet>,
}

fn subject_id(i: usize) -> String {
    format!("S{:02}", i + 1)
}

/// Generates every subject of `cfg`; subject seeds derive from `cfg.seed`.
pub fn synthesize(cfg: &SynthConfig) -> Result<Vec<SynthSubject>> {
    cfg.scenario.validate()?;
    if cfg.subjects == 0 || cfg.annotators == 0 {
        return Err(Error::invalid("need at least one subject and one annotator"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<(u64, u64)> = (0..cfg.subjects).map(|_| (rng.random(), rng.random())).collect();
    seeds
        .par_iter()
        .enumerate()
        .map(|(i, &(signal_seed, noise_seed))| {
            let infant = generate_infant(&cfg.scenario, &subject_id(i), signal_seed)?;
            let noise = AnnotatorNoise {
                seed: noise_seed ^ cfg.noise.seed,
                ..cfg.noise
            };
            let annotations = simulate_annotators(&infant, &noise, cfg.annotators)?
                .into_iter()
                .flatten()
                .collect();
            Ok(SynthSubject {
                truth: vec![infant.posture, infant.movement, infant.meta],
                annotations,
                recording: infant.recording,
            })
        })
        .collect()
}

impl Dataset {
    /// Builds a dataset directly from synthetic subjects.
    pub fn from_synth(subjects: Vec<SynthSubject>, window_len: usize, hop: usize) -> Result<Self> {
        let subjects = subjects
            .into_par_iter()
            .map(|s| SubjectData::build(s.recording, &s.annotations, &s.truth, window_len, hop))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            subjects,
            window_len,
            hop,
            warnings: Vec::new(),
        })
    }

    pub fn synthetic(cfg: &SynthConfig) -> Result<Self> {
        Self::from_synth(synthesize(cfg)?, DEFAULT_WINDOW, DEFAULT_HOP)
    }

    /// Loads every subject of `dir`. Subjects without annotator files are
    /// skipped with a warning.
    pub fn load(dir: &Path, window_len: usize, hop: usize) -> Result<Self> {
        let mut ids = Vec::new();
        let mut annot_files = Vec::new();
        for entry in fs::read_dir(dir)? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(".rec.csv") {
                ids.push(id.to_string());
            } else if name.contains(".annot.") && name.ends_with(".jsonl") {
                annot_files.push(name);
            }
        }
        ids.sort();
        annot_files.sort();
        if ids.is_empty() {
            return Err(Error::Empty(format!("no *.rec.csv recordings in {}", dir.display())));
        }
        let mut warnings = Vec::new();
        let mut jobs = Vec::new();
        for id in ids {
            let prefix = format!("{id}.annot.");
            let files: Vec<&String> = annot_files.iter().filter(|f| f.starts_with(&prefix)).collect();
            if files.is_empty() {
                warnings.push(format!("subject {id}: no annotation files, skipped"));
                continue;
            }
            jobs.push((id, files.into_iter().cloned().collect::<Vec<_>>()));
        }
        let subjects = jobs
            .par_iter()
            .map(|(id, files)| {
                let read_sets = |path: &Path| -> Result<Vec<AnnotationSet>> {
                    parse_annotations(BufReader::new(File::open(path)?))
                        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
                };
                let rec_path = dir.join(format!("{id}.rec.csv"));
                let recording = parse_recording(BufReader::new(File::open(&rec_path)?), id)
                    .map_err(|e| Error::invalid(format!("{}: {e}", rec_path.display())))?;
                let mut annotations = Vec::new();
                for f in files {
                    annotations.extend(read_sets(&dir.join(f))?);
                }
                let truth_path = dir.join(format!("{id}.truth.jsonl"));
                let truth = if truth_path.exists() { read_sets(&truth_path)? } else { Vec::new() };
                SubjectData::build(recording, &annotations, &truth, window_len, hop)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            subjects,
            window_len,
            hop,
            warnings,
        })
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }
}

/// Writes synthetic subjects and their generator settings to `dir`.
pub fn write_synthetic(dir: &Path, cfg: &SynthConfig, subjects: &[SynthSubject]) -> Result<()> {
    fs::create_dir_all(dir)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("scenario.json"))?), cfg)?;
    for s in subjects {
        let id = &s.recording.subject_id;
        write_recording(&s.recording, BufWriter::new(File::create(dir.join(format!("{id}.rec.csv")))?))?;
        let mut annotators: Vec<&str> = s.annotations.iter().map(|a| a.annotator_id.as_str()).collect();
        annotators.dedup();
        for a in annotators {
            let sets: Vec<AnnotationSet> = s.annotations.iter().filter(|x| x.annotator_id == a).cloned().collect();
            write_annotations(&sets, BufWriter::new(File::create(dir.join(format!("{id}.annot.{a}.jsonl")))?))?;
        }
        write_annotations(&s.truth, BufWriter::new(File::create(dir.join(format!("{id}.truth.jsonl")))?))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            scenario: Scenario {
                duration_s: 90.0,
                ..Scenario::default()
            },
            subjects: 3,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn disk_round_trip_matches_memory() {
        let cfg = small();
        let subjects = synthesize(&cfg).unwrap();
        let dir = std::env::temp_dir().join(format!("im-dataset-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        write_synthetic(&dir, &cfg, &subjects).unwrap();
        let names: Vec<String> = fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names.iter().filter(|n| n.ends_with(".rec.csv")).count(), 3);
        assert_eq!(names.iter().filter(|n| n.contains(".annot.")).count(), 9);
        assert_eq!(names.iter().filter(|n| n.ends_with(".truth.jsonl")).count(), 3);
        let loaded = Dataset::load(&dir, DEFAULT_WINDOW, DEFAULT_HOP).unwrap();
        let mem = Dataset::from_synth(subjects, DEFAULT_WINDOW, DEFAULT_HOP).unwrap();
        assert_eq!(loaded.len(), 3);
        for (a, b) in loaded.subjects.iter().zip(&mem.subjects) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.usable, b.usable);
            assert_eq!(a.posture, b.posture);
            assert_eq!(a.movement, b.movement);
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn priors_and_truth_respect_usability() {
        let cfg = SynthConfig {
            scenario: Scenario {
                meta_rate: 0.5,
                ..small().scenario
            },
            ..small()
        };
        let ds = Dataset::synthetic(&cfg).unwrap();
        let s = &ds.subjects[0];
        assert!(s.usable.iter().any(|u| !u));
        for t in 0..s.n_frames() {
            if !s.usable[t] {
                assert!(s.posture.priors[t].is_none() && s.posture.majority[t].is_none());
            } else if let Some(p) = &s.movement.priors[t] {
                assert!(p.is_normalized(1e-12));
            }
        }
        assert_eq!(s.features.rows(), s.usable.iter().filter(|&&u| u).count());
        assert_eq!(s.features.cols(), 336);
    }

    #[test]
    fn clean_annotators_agree_fully() {
        let cfg = SynthConfig {
            noise: AnnotatorNoise::none(0),
            ..small()
        };
        let ds = Dataset::synthetic(&cfg).unwrap();
        for s in &ds.subjects {
            assert_eq!(s.posture.kappa(&s.usable).unwrap(), 1.0);
            for t in s.movement.evaluable(false) {
                assert_eq!(s.movement.tiers[t], AgreementTier::Full);
                assert_eq!(s.movement.majority[t], s.movement.hidden.as_ref().unwrap()[t]);
            }
        }
    }
}
