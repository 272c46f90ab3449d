//! Uniform training and prediction over both classifier families.

use serde::{Deserialize, Serialize};

use crate::data::{ClassSet, SensorSet, SoftLabel, Track};
use crate::dataset::SubjectData;
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Standardizer, NUM_FEATURES};
use crate::nn::{train_network, ModelConfig, Network, SequenceInput, TrainConfig, TrainItem};
use crate::svm::{ecoc_train, EcocModel, SvmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Svm,
    Cnn,
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Svm => "svm",
            ClassifierKind::Cnn => "cnn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub svm: SvmParams,
    pub cnn: TrainConfig,
    pub sensors: SensorSet,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            kind: ClassifierKind::Svm,
            svm: SvmParams::default(),
            cnn: TrainConfig::default(),
            sensors: SensorSet::all(),
        }
    }
}

impl ClassifierConfig {
    /// Copy whose random seeds are offset by `salt`, for independent
    /// models within one run.
    pub fn reseeded(&self, salt: u64) -> Self {
        let mix = |s: u64| s.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(salt);
        let mut c = self.clone();
        c.svm.seed = mix(self.svm.seed);
        c.cnn.seed = mix(self.cnn.seed);
        c
    }
}

/// One subject's training targets for a track. `condition` carries the
/// per-frame posture class fed to a conditioned movement network.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub subject: &'a SubjectData,
    pub labels: &'a [Option<SoftLabel>],
    pub condition: Option<&'a [usize]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrackModel {
    Svm {
        sensors: SensorSet,
        columns: Vec<usize>,
        standardizer: Standardizer,
        model: EcocModel,
    },
    Cnn {
        sensors: SensorSet,
        network: Network,
    },
}

/// Feature columns of a sensor subset within the all-sensor matrix.
pub fn sensor_columns(sensors: SensorSet) -> Vec<usize> {
    sensors
        .channels()
        .into_iter()
        .flat_map(|k| k * NUM_FEATURES..(k + 1) * NUM_FEATURES)
        .collect()
}

fn project(x: &FeatureMatrix, rows: &[usize], columns: &[usize]) -> FeatureMatrix {
    let names = columns.iter().map(|&j| x.names[j].clone()).collect();
    let mut out = FeatureMatrix::new(names);
    let mut buf = Vec::with_capacity(columns.len());
    for &r in rows {
        let row = x.row(r);
        buf.clear();
        buf.extend(columns.iter().map(|&j| row[j]));
        out.push_row(&buf).expect("width matches");
    }
    out
}

/// Network input with channels of unselected sensors zeroed.
pub fn sequence_input(subject: &SubjectData, sensors: SensorSet, condition: Option<&[usize]>) -> SequenceInput {
    let mut input = SequenceInput::from_recording(&subject.recording, &subject.frames, condition.map(<[usize]>::to_vec));
    if !sensors.is_all() {
        let keep = sensors.channels();
        for k in (0..crate::data::NUM_CHANNELS).filter(|k| !keep.contains(k)) {
            input.signal[k * input.len..(k + 1) * input.len].fill(0.0);
        }
    }
    input
}

fn network_config(track: Track) -> Result<ModelConfig> {
    match track {
        Track::Posture => Ok(ModelConfig::posture(ClassSet::posture().len())),
        Track::Movement => Ok(ModelConfig::movement(ClassSet::movement().len(), ClassSet::posture().len())),
        Track::Meta => Err(Error::invalid("meta track is not classified")),
    }
}

/// Fits a track model on the labelled usable frames of `train`.
pub fn fit(cfg: &ClassifierConfig, track: Track, train: &[Example]) -> Result<TrackModel> {
    let classes = ClassSet::for_track(track).ok_or_else(|| Error::invalid("meta track is not classified"))?;
    match cfg.kind {
        ClassifierKind::Svm => {
            let columns = sensor_columns(cfg.sensors);
            let names = columns.iter().map(|&j| train[0].subject.features.names[j].clone()).collect();
            let mut x = FeatureMatrix::new(names);
            let mut y = Vec::new();
            for ex in train {
                let rows: Vec<usize> = ex
                    .subject
                    .feature_frames
                    .iter()
                    .enumerate()
                    .filter(|&(_, &t)| ex.labels[t].is_some())
                    .map(|(r, _)| r)
                    .collect();
                x.append(&project(&ex.subject.features, &rows, &columns))?;
                y.extend(rows.iter().map(|&r| ex.labels[ex.subject.feature_frames[r]].as_ref().unwrap().argmax()));
            }
            let standardizer = Standardizer::fit(&x)?;
            let model = ecoc_train(&standardizer.apply_matrix(&x)?, &y, &classes, &cfg.svm)?;
            Ok(TrackModel::Svm {
                sensors: cfg.sensors,
                columns,
                standardizer,
                model,
            })
        }
        ClassifierKind::Cnn => {
            let config = network_config(track)?;
            let conditioned = config.condition_dim > 0;
            let mut items = Vec::with_capacity(train.len());
            for ex in train {
                if conditioned && ex.condition.is_none() {
                    return Err(Error::invalid(format!("subject {}: movement training needs posture condition", ex.subject.id)));
                }
                let input = sequence_input(ex.subject, cfg.sensors, if conditioned { ex.condition } else { None });
                items.push(TrainItem::new(input, ex.labels, classes.len())?);
            }
            let mut network = Network::build(config, cfg.cnn.seed)?;
            let inputs: Vec<&SequenceInput> = items.iter().map(|i| &i.input).collect();
            network.fit_input_norm(&inputs);
            train_network(&mut network, &items, &cfg.cnn)?;
            Ok(TrackModel::Cnn {
                sensors: cfg.sensors,
                network,
            })
        }
    }
}

impl TrackModel {
    /// Class probabilities of every usable frame (`None` elsewhere).
    pub fn predict_proba(&self, subject: &SubjectData, condition: Option<&[usize]>) -> Result<Vec<Option<Vec<f64>>>> {
        let mut out = vec![None; subject.n_frames()];
        match self {
            TrackModel::Svm {
                columns,
                standardizer,
                model,
                ..
            } => {
                let all: Vec<usize> = (0..subject.feature_frames.len()).collect();
                let x = project(&subject.features, &all, columns);
                for (r, &t) in subject.feature_frames.iter().enumerate() {
                    out[t] = Some(model.predict_proba(&standardizer.apply(x.row(r))?)?);
                }
            }
            TrackModel::Cnn { sensors, network } => {
                let cond = if network.config.condition_dim > 0 {
                    Some(condition.ok_or_else(|| Error::invalid("conditioned network needs posture input"))?)
                } else {
                    None
                };
                let probs = network.predict(&sequence_input(subject, *sensors, cond))?;
                for (t, p) in probs.into_iter().enumerate() {
                    if subject.usable[t] {
                        out[t] = Some(p.0);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Argmax class of every usable frame.
    pub fn predict(&self, subject: &SubjectData, condition: Option<&[usize]>) -> Result<Vec<Option<usize>>> {
        Ok(self
            .predict_proba(subject, condition)?
            .into_iter()
            .map(|p| p.map(|p| crate::data::argmax(&p)))
            .collect())
    }

    /// Posture class of every frame including unusable ones, for
    /// conditioning a movement network at test time.
    pub fn predict_all_frames(&self, subject: &SubjectData) -> Result<Vec<usize>> {
        match self {
            TrackModel::Cnn { sensors, network } => Ok(network
                .predict(&sequence_input(subject, *sensors, None))?
                .iter()
                .map(SoftLabel::argmax)
                .collect()),
            TrackModel::Svm { .. } => Ok(fill_gaps(&self.predict(subject, None)?)),
        }
    }

    /// Stable hash of the fitted parameters, for leakage checks.
    pub fn digest(&self) -> u64 {
        let json = serde_json::to_string(self).expect("model serializes");
        fnv1a(json.as_bytes())
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Fills `None` frames with the nearest earlier label (or the first label
/// for a leading gap; 0 if there is none).
pub fn fill_gaps(labels: &[Option<usize>]) -> Vec<usize> {
    let first = labels.iter().flatten().next().copied().unwrap_or(0);
    let mut last = first;
    labels
        .iter()
        .map(|l| {
            if let Some(v) = l {
                last = *v;
            }
            last
        })
        .collect()
}

/// Per-frame posture condition derived from soft labels.
pub fn condition_from_labels(labels: &[Option<SoftLabel>]) -> Vec<usize> {
    fill_gaps(&labels.iter().map(|l| l.as_ref().map(SoftLabel::argmax)).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, SynthConfig};
    use crate::synth::Scenario;

    #[test]
    fn gaps_fill_forward() {
        assert_eq!(fill_gaps(&[None, Some(2), None, Some(1), None]), vec![2, 2, 2, 1, 1]);
        assert_eq!(fill_gaps(&[None, None]), vec![0, 0]);
    }

    #[test]
    fn single_sensor_uses_84_columns() {
        let cols = sensor_columns(SensorSet::from_sensors(&[crate::data::Sensor::RightLeg]).unwrap());
        assert_eq!(cols.len(), 84);
        assert_eq!(cols[0], 18 * NUM_FEATURES);
    }

    #[test]
    fn svm_learns_synthetic_posture() {
        let cfg = SynthConfig {
            scenario: Scenario {
                duration_s: 300.0,
                ..Scenario::default()
            },
            subjects: 6,
            ..SynthConfig::default()
        };
        let ds = Dataset::synthetic(&cfg).unwrap();
        let labels: Vec<Vec<Option<SoftLabel>>> = ds.subjects.iter().map(|s| s.posture.priors.clone()).collect();
        let train: Vec<Example> = (0..5)
            .map(|i| Example {
                subject: &ds.subjects[i],
                labels: &labels[i],
                condition: None,
            })
            .collect();
        let model = fit(&ClassifierConfig::default(), Track::Posture, &train).unwrap();
        let test = &ds.subjects[5];
        let pred = model.predict(test, None).unwrap();
        let (mut hit, mut n) = (0, 0);
        for t in test.posture.evaluable(false) {
            n += 1;
            hit += (pred[t] == test.posture.majority[t]) as usize;
        }
        assert!(hit as f64 / n as f64 > 0.9, "{hit}/{n}");
    }
}
