//! Iterative annotation refinement: annotator vote priors are multiplied
//! by likelihoods from classifiers trained on the other training subjects,
//! then renormalized. Every iteration combines with the original priors.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{fit, ClassifierConfig, Example};
use crate::data::{SoftLabel, Track};
use crate::dataset::SubjectData;
use crate::error::{Error, Result};

/// Product masses below this are treated as underflow.
pub const UNDERFLOW: f64 = 1e-300;

/// What `iterations = 0` means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroIterations {
    /// Reject the request.
    #[default]
    Error,
    /// Return the original priors unchanged.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IarConfig {
    pub iterations: usize,
    pub zero_iterations: ZeroIterations,
}

impl Default for IarConfig {
    fn default() -> Self {
        IarConfig {
            iterations: 5,
            zero_iterations: ZeroIterations::Error,
        }
    }
}

/// Elementwise product of prior and likelihood, renormalized. Falls back
/// to the prior when the product mass underflows.
pub fn combine_posterior(prior: &SoftLabel, likelihood: &SoftLabel) -> Result<SoftLabel> {
    if prior.len() != likelihood.len() {
        return Err(Error::DimensionMismatch {
            expected: prior.len(),
            got: likelihood.len(),
        });
    }
    if likelihood.0.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::invalid("likelihood entries must be finite and nonnegative"));
    }
    let product: Vec<f64> = prior.0.iter().zip(&likelihood.0).map(|(p, l)| p * l).collect();
    let mass: f64 = product.iter().sum();
    if mass < UNDERFLOW {
        return Ok(prior.clone());
    }
    Ok(SoftLabel(product.into_iter().map(|v| v / mass).collect()))
}

pub type Labels = Vec<Option<SoftLabel>>;

#[derive(Debug, Clone, PartialEq)]
pub struct IarState {
    pub iteration: usize,
    /// Current labels per subject.
    pub labels: Vec<Labels>,
    /// Original vote priors per subject.
    pub originals: Vec<Labels>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IarResult {
    pub state: IarState,
    /// Labels after each iteration; entry 0 holds the originals.
    pub history: Vec<Vec<Labels>>,
}

/// Refines the `track` priors of the training subjects. `conditions`
/// supplies per-subject posture classes when the classifier needs them.
pub fn iar_refine(
    subjects: &[&SubjectData],
    track: Track,
    classifier: &ClassifierConfig,
    cfg: &IarConfig,
    conditions: Option<&[Vec<usize>]>,
) -> Result<IarResult> {
    let originals: Vec<Labels> = subjects.iter().map(|s| s.track(track).priors.clone()).collect();
    let mut history = vec![originals.clone()];
    if cfg.iterations == 0 {
        return match cfg.zero_iterations {
            ZeroIterations::Error => Err(Error::invalid("refinement needs at least one iteration")),
            ZeroIterations::Identity => Ok(IarResult {
                state: IarState {
                    iteration: 0,
                    labels: originals.clone(),
                    originals,
                },
                history,
            }),
        };
    }
    if subjects.len() < 2 {
        return Err(Error::InnerFoldImpossible(subjects.len()));
    }
    if let Some(c) = conditions {
        if c.len() != subjects.len() {
            return Err(Error::DimensionMismatch {
                expected: subjects.len(),
                got: c.len(),
            });
        }
    }
    let mut labels = originals.clone();
    for iteration in 1..=cfg.iterations {
        let next: Vec<Labels> = (0..subjects.len())
            .into_par_iter()
            .map(|j| {
                let train: Vec<Example> = (0..subjects.len())
                    .filter(|&i| i != j)
                    .map(|i| Example {
                        subject: subjects[i],
                        labels: &labels[i],
                        condition: conditions.map(|c| c[i].as_slice()),
                    })
                    .collect();
                let salt = (iteration * subjects.len() + j) as u64;
                let model = fit(&classifier.reseeded(salt), track, &train)?;
                let probs = model.predict_proba(subjects[j], conditions.map(|c| c[j].as_slice()))?;
                originals[j]
                    .iter()
                    .zip(probs)
                    .map(|(prior, lik)| match (prior, lik) {
                        (Some(p), Some(l)) => combine_posterior(p, &SoftLabel(l)).map(Some),
                        (p, _) => Ok(p.clone()),
                    })
                    .collect::<Result<Labels>>()
            })
            .collect::<Result<Vec<_>>>()?;
        labels = next;
        history.push(labels.clone());
        log::info!("{} refinement iteration {iteration} done", track.name());
    }
    Ok(IarResult {
        state: IarState {
            iteration: cfg.iterations,
            labels,
            originals,
        },
        history,
    })
}

/// One line of the refined-label export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub infant: String,
    pub frame: usize,
    pub class_probs: Vec<f64>,
}

/// Writes labelled frames as JSON lines, subjects in the given order.
pub fn write_labels<W: Write>(ids: &[&str], labels: &[Labels], mut w: W) -> Result<()> {
    for (id, seq) in ids.iter().zip(labels) {
        for (frame, l) in seq.iter().enumerate() {
            if let Some(l) = l {
                let rec = LabelRecord {
                    infant: id.to_string(),
                    frame,
                    class_probs: l.0.clone(),
                };
                serde_json::to_writer(&mut w, &rec)?;
                writeln!(w)?;
            }
        }
    }
    Ok(())
}

pub fn read_labels<R: BufRead>(r: R) -> Result<Vec<LabelRecord>> {
    r.lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
        .map(|(i, l)| serde_json::from_str(&l?).map_err(|e| Error::format(i + 1, e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, SynthConfig};
    use crate::synth::{AnnotatorNoise, Scenario};

    fn sl(v: &[f64]) -> SoftLabel {
        SoftLabel(v.to_vec())
    }

    #[test]
    fn combine_hand_values() {
        let out = combine_posterior(&sl(&[1.0 / 3.0, 2.0 / 3.0, 0.0]), &sl(&[0.5, 0.25, 0.25])).unwrap();
        for (a, b) in out.0.iter().zip([0.5, 0.5, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let out = combine_posterior(&sl(&[1.0, 0.0, 0.0]), &sl(&[0.1, 0.6, 0.3])).unwrap();
        assert_eq!(out.0, vec![1.0, 0.0, 0.0]);
        let u = 1.0 / 3.0;
        let out = combine_posterior(&sl(&[u, u, u]), &sl(&[0.2, 0.3, 0.5])).unwrap();
        for (a, b) in out.0.iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn combine_edge_cases() {
        assert!(combine_posterior(&sl(&[0.5, 0.5]), &sl(&[1.0, 0.0, 0.0])).is_err());
        assert!(combine_posterior(&sl(&[0.5, 0.5]), &sl(&[f64::NAN, 1.0])).is_err());
        let prior = sl(&[0.5, 0.5, 0.0]);
        assert_eq!(combine_posterior(&prior, &sl(&[0.0, 0.0, 1.0])).unwrap(), prior);
        assert_eq!(combine_posterior(&prior, &sl(&[1e-320, 1e-320, 1.0])).unwrap(), prior);
    }

    fn small(noise: AnnotatorNoise, subjects: usize) -> Dataset {
        Dataset::synthetic(&SynthConfig {
            scenario: Scenario {
                duration_s: 180.0,
                ..Scenario::default()
            },
            subjects,
            noise,
            seed: 5,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn unanimous_labels_are_fixed_points() {
        let ds = small(AnnotatorNoise::none(0), 4);
        let refs: Vec<&SubjectData> = ds.subjects.iter().collect();
        let cfg = IarConfig {
            iterations: 2,
            ..IarConfig::default()
        };
        let out = iar_refine(&refs, Track::Posture, &ClassifierConfig::default(), &cfg, None).unwrap();
        assert_eq!(out.state.labels, out.state.originals);
        assert_eq!(out.history.len(), 3);
    }

    #[test]
    fn iteration_count_and_fold_size_are_checked() {
        let ds = small(AnnotatorNoise::none(0), 3);
        let refs: Vec<&SubjectData> = ds.subjects.iter().collect();
        let clf = ClassifierConfig::default();
        let zero = IarConfig {
            iterations: 0,
            zero_iterations: ZeroIterations::Error,
        };
        assert!(iar_refine(&refs, Track::Posture, &clf, &zero, None).is_err());
        let ident = IarConfig {
            zero_iterations: ZeroIterations::Identity,
            ..zero
        };
        let out = iar_refine(&refs, Track::Posture, &clf, &ident, None).unwrap();
        assert_eq!(out.state.labels, out.state.originals);
        let err = iar_refine(&refs[..1], Track::Posture, &clf, &IarConfig::default(), None).unwrap_err();
        assert!(matches!(err, Error::InnerFoldImpossible(1)));
    }

    #[test]
    fn noisy_refinement_keeps_support_and_normalization() {
        let noise = AnnotatorNoise {
            jitter_s: 0.5,
            confusion_rate: 0.2,
            seed: 1,
        };
        let ds = small(noise, 4);
        let refs: Vec<&SubjectData> = ds.subjects.iter().collect();
        let cfg = IarConfig {
            iterations: 2,
            ..IarConfig::default()
        };
        let out = iar_refine(&refs, Track::Movement, &ClassifierConfig::default(), &cfg, None).unwrap();
        let mut changed = 0;
        for labels in &out.history[1..] {
            for (seq, orig) in labels.iter().zip(&out.state.originals) {
                for (l, p) in seq.iter().zip(orig) {
                    match (l, p) {
                        (Some(l), Some(p)) => {
                            assert!(l.is_normalized(1e-9));
                            for (a, b) in l.0.iter().zip(&p.0) {
                                assert!(*b > 0.0 || *a == 0.0);
                            }
                            changed += (l != p) as usize;
                        }
                        (None, None) => {}
                        _ => panic!("label presence changed"),
                    }
                }
            }
        }
        assert!(changed > 0);
        let again = iar_refine(&refs, Track::Movement, &ClassifierConfig::default(), &cfg, None).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn export_round_trips() {
        let labels = vec![vec![Some(sl(&[0.25, 0.75])), None, Some(sl(&[1.0, 0.0]))]];
        let mut buf = Vec::new();
        write_labels(&["S01"], &labels, &mut buf).unwrap();
        let recs = read_labels(buf.as_slice()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].frame, 2);
        assert_eq!(recs[0].class_probs, vec![0.25, 0.75]);
        assert_eq!(recs[0].infant, "S01");
    }
}
