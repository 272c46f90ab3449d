//! Leave-one-subject-out evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{condition_from_labels, fit, ClassifierConfig, ClassifierKind, Example, TrackModel};
use crate::data::{ClassSet, SoftLabel, Track};
use crate::dataset::{Dataset, SubjectData};
use crate::error::{Error, Result};
use crate::eval::agreement::cohen_kappa;
use crate::eval::metrics::{ConfusionMatrix, Metrics};
use crate::eval::profile::activity_profile;
use crate::iar::{iar_refine, IarConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    FullAgreement,
    AllFrames,
}

impl Subset {
    pub const BOTH: [Subset; 2] = [Subset::FullAgreement, Subset::AllFrames];

    pub fn name(self) -> &'static str {
        match self {
            Subset::FullAgreement => "full_agreement",
            Subset::AllFrames => "all_frames",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackSelection {
    Posture,
    Movement,
    Both,
}

impl TrackSelection {
    pub fn tracks(self) -> Vec<Track> {
        match self {
            TrackSelection::Posture => vec![Track::Posture],
            TrackSelection::Movement => vec![Track::Movement],
            TrackSelection::Both => vec![Track::Posture, Track::Movement],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosoConfig {
    pub classifier: ClassifierConfig,
    pub tracks: TrackSelection,
    /// Refinement of training labels; `None` trains on raw vote priors.
    pub iar: Option<IarConfig>,
}

impl Default for LosoConfig {
    fn default() -> Self {
        LosoConfig {
            classifier: ClassifierConfig::default(),
            tracks: TrackSelection::Both,
            iar: Some(IarConfig::default()),
        }
    }
}

/// Everything one fold produced for one track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldTrack {
    pub track: Track,
    /// Per frame of the held-out subject; `None` for unusable frames.
    pub predictions: Vec<Option<usize>>,
    pub model_digest: u64,
}

/// Audit trail of one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRun {
    pub test_subject: String,
    /// Subjects whose data entered refinement, normalization or training.
    pub train_subjects: Vec<String>,
    pub tracks: Vec<FoldTrack>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub subject: String,
    pub frames: usize,
    pub metrics: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub subset: Subset,
    /// Metrics of the confusion matrix pooled over folds.
    pub pooled: Metrics,
    pub confusion: ConfusionMatrix,
    pub folds: Vec<FoldResult>,
    /// Mean of per-fold UAR over folds with evaluable frames.
    pub mean_fold_uar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePair {
    pub subject: String,
    pub human: Vec<f64>,
    pub machine: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackReport {
    pub track: Track,
    pub classes: ClassSet,
    pub subsets: Vec<SubsetReport>,
    /// Fleiss' κ among the annotators, pooled over subjects.
    pub human_kappa: Option<f64>,
    /// Cohen's κ between the classifier and each annotator, pooled.
    pub machine_kappa: Vec<(String, f64)>,
    pub profiles: Vec<ProfilePair>,
}

impl TrackReport {
    pub fn subset(&self, subset: Subset) -> &SubsetReport {
        self.subsets.iter().find(|s| s.subset == subset).expect("both subsets are evaluated")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosoReport {
    pub config: LosoConfig,
    pub subjects: Vec<String>,
    pub tracks: Vec<TrackReport>,
    pub skipped: Vec<String>,
    pub warnings: Vec<String>,
}

impl LosoReport {
    pub fn track(&self, track: Track) -> Option<&TrackReport> {
        self.tracks.iter().find(|t| t.track == track)
    }
}

fn training_labels(
    subjects: &[&SubjectData],
    track: Track,
    cfg: &LosoConfig,
    conditions: Option<&[Vec<usize>]>,
    salt: u64,
) -> Result<Vec<Vec<Option<SoftLabel>>>> {
    match &cfg.iar {
        Some(iar) => Ok(iar_refine(subjects, track, &cfg.classifier.reseeded(salt), iar, conditions)?.state.labels),
        None => Ok(subjects.iter().map(|s| s.track(track).priors.clone()).collect()),
    }
}

fn fit_on(
    cfg: &ClassifierConfig,
    track: Track,
    subjects: &[&SubjectData],
    labels: &[Vec<Option<SoftLabel>>],
    conditions: Option<&[Vec<usize>]>,
) -> Result<TrackModel> {
    let examples: Vec<Example> = subjects
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (s, l))| Example {
            subject: s,
            labels: l,
            condition: conditions.map(|c| c[i].as_slice()),
        })
        .collect();
    fit(cfg, track, &examples)
}

/// Trains on every subject except `test` and predicts `test`. Only the
/// training subjects' data is read before prediction.
pub fn run_fold(dataset: &Dataset, test: usize, cfg: &LosoConfig) -> Result<FoldRun> {
    let train: Vec<&SubjectData> = dataset
        .subjects
        .iter()
        .enumerate()
        .filter(|&(i, s)| i != test && s.usable.iter().any(|&u| u))
        .map(|(_, s)| s)
        .collect();
    let held_out = &dataset.subjects[test];
    let tracks = cfg.tracks.tracks();
    let salt = test as u64 * 7919;
    let needs_posture = tracks.contains(&Track::Posture) || cfg.classifier.kind == ClassifierKind::Cnn;
    let mut out = Vec::new();

    let mut posture_labels = None;
    let mut posture_model = None;
    if needs_posture {
        let labels = training_labels(&train, Track::Posture, cfg, None, salt)?;
        let model = fit_on(&cfg.classifier.reseeded(salt), Track::Posture, &train, &labels, None)?;
        if tracks.contains(&Track::Posture) {
            out.push(FoldTrack {
                track: Track::Posture,
                predictions: model.predict(held_out, None)?,
                model_digest: model.digest(),
            });
        }
        posture_labels = Some(labels);
        posture_model = Some(model);
    }
    if tracks.contains(&Track::Movement) {
        // Conditioned networks train on (refined) posture labels and are
        // tested on predicted posture.
        let (train_cond, test_cond) = match cfg.classifier.kind {
            ClassifierKind::Cnn => {
                let labels = posture_labels.as_ref().expect("posture trained");
                let train_cond: Vec<Vec<usize>> = labels.iter().map(|l| condition_from_labels(l)).collect();
                let test_cond = posture_model.as_ref().expect("posture trained").predict_all_frames(held_out)?;
                (Some(train_cond), Some(test_cond))
            }
            ClassifierKind::Svm => (None, None),
        };
        let labels = training_labels(&train, Track::Movement, cfg, train_cond.as_deref(), salt + 1)?;
        let model = fit_on(&cfg.classifier.reseeded(salt + 1), Track::Movement, &train, &labels, train_cond.as_deref())?;
        out.push(FoldTrack {
            track: Track::Movement,
            predictions: model.predict(held_out, test_cond.as_deref())?,
            model_digest: model.digest(),
        });
    }
    Ok(FoldRun {
        test_subject: held_out.id.clone(),
        train_subjects: train.iter().map(|s| s.id.clone()).collect(),
        tracks: out,
    })
}

fn subset_report(
    subset: Subset,
    classes: &ClassSet,
    track: Track,
    dataset: &Dataset,
    runs: &[Option<FoldRun>],
) -> Result<SubsetReport> {
    let mut pooled = ConfusionMatrix::new(classes.clone());
    let mut folds = Vec::new();
    for (s, run) in dataset.subjects.iter().zip(runs) {
        let Some(run) = run else { continue };
        let preds = &run.tracks.iter().find(|t| t.track == track).expect("track predicted").predictions;
        let td = s.track(track);
        let mut cm = ConfusionMatrix::new(classes.clone());
        for t in td.evaluable(subset == Subset::FullAgreement) {
            if let (Some(truth), Some(pred)) = (td.majority[t], preds[t]) {
                cm.add(truth, pred)?;
            }
        }
        pooled.merge(&cm)?;
        let frames = cm.total() as usize;
        folds.push(FoldResult {
            subject: s.id.clone(),
            frames,
            metrics: (frames > 0).then(|| Metrics::from_confusion(&cm)),
        });
    }
    let uars: Vec<f64> = folds.iter().filter_map(|f| f.metrics.as_ref().map(|m| m.uar)).collect();
    Ok(SubsetReport {
        subset,
        pooled: Metrics::from_confusion(&pooled),
        confusion: pooled,
        mean_fold_uar: (!uars.is_empty()).then(|| uars.iter().sum::<f64>() / uars.len() as f64),
        folds,
    })
}

fn human_kappa(dataset: &Dataset, track: Track) -> Option<f64> {
    let k = dataset.subjects.first()?.track(track).votes.len();
    let mut pooled: Vec<Vec<Option<usize>>> = vec![Vec::new(); k];
    for s in &dataset.subjects {
        let td = s.track(track);
        if td.votes.len() != k {
            return None;
        }
        for (a, v) in td.votes.iter().enumerate() {
            pooled[a].extend(v.iter().zip(&s.usable).map(|(&l, &u)| if u { l } else { None }));
        }
    }
    let refs: Vec<&[Option<usize>]> = pooled.iter().map(Vec::as_slice).collect();
    crate::eval::fleiss_kappa_sequences(&refs, ClassSet::for_track(track)?.len()).ok()
}

fn machine_kappa(dataset: &Dataset, track: Track, runs: &[Option<FoldRun>]) -> Vec<(String, f64)> {
    let Some(k) = dataset.subjects.first().map(|s| s.track(track).votes.len()) else {
        return Vec::new();
    };
    (0..k)
        .filter_map(|a| {
            let (mut pred, mut human) = (Vec::new(), Vec::new());
            for (s, run) in dataset.subjects.iter().zip(runs) {
                let Some(run) = run else { continue };
                let preds = &run.tracks.iter().find(|t| t.track == track)?.predictions;
                let votes = s.track(track).votes.get(a)?;
                for (p, v) in preds.iter().zip(votes) {
                    if let (Some(p), Some(v)) = (p, v) {
                        pred.push(*p);
                        human.push(*v);
                    }
                }
            }
            cohen_kappa(&pred, &human).ok().map(|kappa| (format!("A{}", a + 1), kappa))
        })
        .collect()
}

fn profiles(dataset: &Dataset, track: Track, runs: &[Option<FoldRun>]) -> Vec<ProfilePair> {
    let n = ClassSet::for_track(track).map(|c| c.len()).unwrap_or(0);
    dataset
        .subjects
        .iter()
        .zip(runs)
        .filter_map(|(s, run)| {
            let preds = &run.as_ref()?.tracks.iter().find(|t| t.track == track)?.predictions;
            let td = s.track(track);
            let human: Vec<usize> = td.majority.iter().flatten().copied().collect();
            let machine: Vec<usize> = preds
                .iter()
                .zip(&td.majority)
                .filter_map(|(p, m)| m.and(*p))
                .collect();
            Some(ProfilePair {
                subject: s.id.clone(),
                human: activity_profile(&human, n).ok()?,
                machine: activity_profile(&machine, n).ok()?,
            })
        })
        .collect()
}

/// Runs every fold (in parallel) and assembles the report in subject order.
pub fn loso_run(dataset: &Dataset, cfg: &LosoConfig) -> Result<LosoReport> {
    Ok(loso_with_runs(dataset, cfg)?.0)
}

/// As [`loso_run`], also returning the per-fold audit trail.
pub fn loso_with_runs(dataset: &Dataset, cfg: &LosoConfig) -> Result<(LosoReport, Vec<Option<FoldRun>>)> {
    if dataset.len() < 3 {
        return Err(Error::invalid(format!("leave-one-subject-out needs at least 3 subjects, got {}", dataset.len())));
    }
    let mut warnings = dataset.warnings.clone();
    let mut skipped = Vec::new();
    for s in &dataset.subjects {
        if !s.usable.iter().any(|&u| u) {
            warnings.push(format!("subject {}: no usable frames, fold skipped", s.id));
            skipped.push(s.id.clone());
        }
    }
    let runs: Vec<Option<FoldRun>> = (0..dataset.len())
        .into_par_iter()
        .map(|i| {
            if skipped.contains(&dataset.subjects[i].id) {
                return Ok(None);
            }
            let run = run_fold(dataset, i, cfg)?;
            log::info!("fold {} done", run.test_subject);
            Ok(Some(run))
        })
        .collect::<Result<_>>()?;
    let mut tracks = Vec::new();
    for track in cfg.tracks.tracks() {
        let classes = ClassSet::for_track(track).expect("labelled track");
        let subsets = Subset::BOTH
            .iter()
            .map(|&s| subset_report(s, &classes, track, dataset, &runs))
            .collect::<Result<Vec<_>>>()?;
        tracks.push(TrackReport {
            track,
            classes,
            subsets,
            human_kappa: human_kappa(dataset, track),
            machine_kappa: machine_kappa(dataset, track, &runs),
            profiles: profiles(dataset, track, &runs),
        });
    }
    let report = LosoReport {
        config: cfg.clone(),
        subjects: dataset.subjects.iter().map(|s| s.id.clone()).collect(),
        tracks,
        skipped,
        warnings,
    };
    Ok((report, runs))
}
