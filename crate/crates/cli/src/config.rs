//! Resolved run configuration: defaults, then flags, then the config file.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use infant_motion::classify::{ClassifierConfig, ClassifierKind};
use infant_motion::data::{SensorSet, DEFAULT_HOP, DEFAULT_WINDOW};
use infant_motion::eval::{default_configs, LosoConfig, TrackSelection};
use infant_motion::iar::{IarConfig, ZeroIterations};
use infant_motion::nn::TrainConfig;
use infant_motion::svm::SvmParams;

use crate::PipelineArgs;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ClassifierArg {
    Svm,
    Cnn,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TrackArg {
    Posture,
    Movement,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IarSettings {
    pub enabled: bool,
    pub iterations: usize,
    /// `error` or `identity` when `iterations` is 0.
    pub zero_iterations: ZeroIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmSettings {
    pub lambda: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnnSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// Everything that determines a run's results. Output location and thread
/// count are deliberately excluded: they do not change the results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub classifier: ClassifierKind,
    pub track: TrackSelection,
    pub iar: IarSettings,
    pub sensors: String,
    pub seed: u64,
    pub window_len: usize,
    pub hop: usize,
    pub svm: SvmSettings,
    pub cnn: CnnSettings,
    pub ablation_configs: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let svm = SvmParams::default();
        let cnn = TrainConfig::default();
        let iar = IarConfig::default();
        RunConfig {
            data: None,
            classifier: ClassifierKind::Cnn,
            track: TrackSelection::Both,
            iar: IarSettings {
                enabled: true,
                iterations: iar.iterations,
                zero_iterations: iar.zero_iterations,
            },
            sensors: "all".into(),
            seed: 0,
            window_len: DEFAULT_WINDOW,
            hop: DEFAULT_HOP,
            svm: SvmSettings {
                lambda: svm.lambda,
                epochs: svm.epochs,
            },
            cnn: CnnSettings {
                learning_rate: cnn.learning_rate,
                epochs: cnn.epochs,
                beta1: cnn.beta1,
                beta2: cnn.beta2,
                eps: cnn.eps,
            },
            ablation_configs: default_configs().iter().map(|c| c.label()).collect(),
        }
    }
}

/// Recursively overlays `patch` onto `base`.
fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

impl RunConfig {
    pub fn resolve(a: &PipelineArgs) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(d) = &a.data {
            cfg.data = Some(d.clone());
        }
        if let Some(c) = a.classifier {
            cfg.classifier = match c {
                ClassifierArg::Svm => ClassifierKind::Svm,
                ClassifierArg::Cnn => ClassifierKind::Cnn,
            };
        }
        if let Some(t) = a.track {
            cfg.track = match t {
                TrackArg::Posture => TrackSelection::Posture,
                TrackArg::Movement => TrackSelection::Movement,
                TrackArg::Both => TrackSelection::Both,
            };
        }
        if let Some(i) = a.iar {
            cfg.iar.enabled = i == OnOff::On;
        }
        if let Some(n) = a.iterations {
            cfg.iar.iterations = n;
        }
        if let Some(s) = &a.sensors {
            cfg.sensors = s.clone();
        }
        if let Some(s) = a.seed {
            cfg.seed = s;
        }
        if let Some(e) = a.epochs {
            cfg.cnn.epochs = e;
        }
        if let Some(path) = &a.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let patch: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
            let mut value = serde_json::to_value(&cfg)?;
            merge(&mut value, patch);
            cfg = serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))?;
        }
        cfg.sensor_set()?;
        Ok(cfg)
    }

    pub fn sensor_set(&self) -> Result<SensorSet> {
        self.sensors.parse().with_context(|| format!("bad sensor subset `{}`", self.sensors))
    }

    pub fn ablation_sets(&self) -> Result<Vec<SensorSet>> {
        self.ablation_configs
            .iter()
            .map(|c| c.parse().with_context(|| format!("bad sensor subset `{c}`")))
            .collect()
    }

    pub fn classifier_config(&self) -> Result<ClassifierConfig> {
        Ok(ClassifierConfig {
            kind: self.classifier,
            svm: SvmParams {
                lambda: self.svm.lambda,
                epochs: self.svm.epochs,
                seed: self.seed,
            },
            cnn: TrainConfig {
                learning_rate: self.cnn.learning_rate,
                epochs: self.cnn.epochs,
                seed: self.seed,
                beta1: self.cnn.beta1,
                beta2: self.cnn.beta2,
                eps: self.cnn.eps,
            },
            sensors: self.sensor_set()?,
        })
    }

    pub fn iar_config(&self) -> Option<IarConfig> {
        self.iar.enabled.then_some(IarConfig {
            iterations: self.iar.iterations,
            zero_iterations: self.iar.zero_iterations,
        })
    }

    pub fn loso_config(&self) -> Result<LosoConfig> {
        Ok(LosoConfig {
            classifier: self.classifier_config()?,
            tracks: self.track,
            iar: self.iar_config(),
        })
    }
}
