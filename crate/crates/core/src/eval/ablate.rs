//! Sensor-configuration ablation: one LOSO run per sensor subset.

use serde::{Deserialize, Serialize};

use crate::data::{Sensor, SensorSet, Track};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::loso::{loso_run, LosoConfig, Subset};
use crate::features::NUM_FEATURES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub sensors: String,
    pub baseline: bool,
    pub feature_dim: usize,
    /// (track, subset, pooled UAR).
    pub uar: Vec<(Track, Subset, f64)>,
}

impl AblationRow {
    pub fn uar(&self, track: Track, subset: Subset) -> Option<f64> {
        self.uar.iter().find(|(t, s, _)| *t == track && *s == subset).map(|r| r.2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub config: LosoConfig,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn baseline(&self) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.baseline)
    }
}

/// Single arm, single leg, both arms, both legs, one arm with one leg,
/// and all four sensors.
pub fn default_configs() -> Vec<SensorSet> {
    use Sensor::*;
    [
        vec![LeftArm],
        vec![LeftLeg],
        vec![LeftArm, RightArm],
        vec![LeftLeg, RightLeg],
        vec![LeftArm, LeftLeg],
        Sensor::ALL.to_vec(),
    ]
    .iter()
    .map(|s| SensorSet::from_sensors(s).expect("nonempty"))
    .collect()
}

pub fn ablate(dataset: &Dataset, configs: &[SensorSet], base: &LosoConfig) -> Result<AblationTable> {
    if configs.is_empty() {
        return Err(Error::invalid("ablation needs at least one sensor configuration"));
    }
    if let Some(c) = configs.iter().find(|c| c.is_empty()) {
        return Err(Error::invalid(format!("empty sensor configuration {c:?}")));
    }
    let mut rows = Vec::with_capacity(configs.len());
    for &sensors in configs {
        let mut cfg = base.clone();
        cfg.classifier.sensors = sensors;
        let report = loso_run(dataset, &cfg)?;
        let uar = report
            .tracks
            .iter()
            .flat_map(|t| Subset::BOTH.map(|s| (t.track, s, t.subset(s).pooled.uar)))
            .collect();
        log::info!("ablation {} done", sensors.label());
        rows.push(AblationRow {
            sensors: sensors.label(),
            baseline: sensors.is_all(),
            feature_dim: sensors.len() * 6 * NUM_FEATURES,
            uar,
        });
    }
    Ok(AblationTable {
        config: base.clone(),
        rows,
    })
}
