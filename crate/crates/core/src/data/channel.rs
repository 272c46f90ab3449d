//! Fixed channel layout of the four limb sensors.
//!
//! Channels are ordered sensor-major, modality-middle, axis-minor:
//! `left_arm_acc_x, left_arm_acc_y, left_arm_acc_z, left_arm_gyro_x, ...,
//! right_leg_gyro_z`. Column `k` of a [`Recording`](super::Recording) always
//! holds `ChannelId::from_index(k)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_SENSORS: usize = 4;
pub const CHANNELS_PER_SENSOR: usize = 6;
pub const NUM_CHANNELS: usize = NUM_SENSORS * CHANNELS_PER_SENSOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sensor {
    LeftArm,
    RightArm,
    LeftLeg,
    RightLeg,
}

impl Sensor {
    pub const ALL: [Sensor; NUM_SENSORS] = [
        Sensor::LeftArm,
        Sensor::RightArm,
        Sensor::LeftLeg,
        Sensor::RightLeg,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Sensor::LeftArm => "left_arm",
            Sensor::RightArm => "right_arm",
            Sensor::LeftLeg => "left_leg",
            Sensor::RightLeg => "right_leg",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Sensor::LeftArm => "la",
            Sensor::RightArm => "ra",
            Sensor::LeftLeg => "ll",
            Sensor::RightLeg => "rl",
        }
    }

    pub fn is_arm(self) -> bool {
        matches!(self, Sensor::LeftArm | Sensor::RightArm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    Accel,
    Gyro,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::Accel => "acc",
            Modality::Gyro => "gyro",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChannelId {
    pub sensor: Sensor,
    pub modality: Modality,
    pub axis: Axis,
}

impl ChannelId {
    pub fn new(sensor: Sensor, modality: Modality, axis: Axis) -> Self {
        ChannelId {
            sensor,
            modality,
            axis,
        }
    }

    pub fn index(self) -> usize {
        self.sensor as usize * CHANNELS_PER_SENSOR + self.modality as usize * 3 + self.axis as usize
    }

    pub fn from_index(k: usize) -> Self {
        assert!(k < NUM_CHANNELS, "channel index {k} out of range");
        let sensor = Sensor::ALL[k / CHANNELS_PER_SENSOR];
        let modality = if (k % CHANNELS_PER_SENSOR) < 3 {
            Modality::Accel
        } else {
            Modality::Gyro
        };
        let axis = Axis::ALL[k % 3];
        ChannelId::new(sensor, modality, axis)
    }

    /// All 24 channels in column order.
    pub fn all() -> impl Iterator<Item = ChannelId> {
        (0..NUM_CHANNELS).map(ChannelId::from_index)
    }

    /// Column header, e.g. `left_leg_gyro_z`.
    pub fn column_name(self) -> String {
        format!(
            "{}_{}_{}",
            self.sensor.name(),
            self.modality.name(),
            self.axis.name()
        )
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.column_name())
    }
}

/// A subset of the four sensors, used for sensor-configuration ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SensorSet(u8);

impl SensorSet {
    pub const fn all() -> Self {
        SensorSet(0b1111)
    }

    pub fn from_sensors(sensors: &[Sensor]) -> Result<Self> {
        if sensors.is_empty() {
            return Err(Error::invalid("empty sensor configuration"));
        }
        Ok(SensorSet(
            sensors.iter().fold(0u8, |acc, s| acc | (1 << s.index())),
        ))
    }

    pub fn contains(self, s: Sensor) -> bool {
        self.0 & (1 << s.index()) != 0
    }

    pub fn sensors(self) -> Vec<Sensor> {
        Sensor::ALL.into_iter().filter(|&s| self.contains(s)).collect()
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_all(self) -> bool {
        self.0 == 0b1111
    }

    /// Channel indices of the configured sensors, in column order.
    pub fn channels(self) -> Vec<usize> {
        ChannelId::all()
            .filter(|c| self.contains(c.sensor))
            .map(ChannelId::index)
            .collect()
    }

    /// Short label such as `la+rl` or `all`.
    pub fn label(self) -> String {
        if self.is_all() {
            return "all".to_string();
        }
        self.sensors()
            .iter()
            .map(|s| s.short())
            .collect::<Vec<_>>()
            .join("+")
    }
}

impl Default for SensorSet {
    fn default() -> Self {
        SensorSet::all()
    }
}

impl fmt::Display for SensorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for SensorSet {
    type Err = Error;

    /// Accepts `all` or a `,`/`+` separated list of `la`, `ra`, `ll`, `rl`
    /// (or the long names such as `left_arm`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(SensorSet::all());
        }
        let mut sensors = Vec::new();
        for part in s.split([',', '+']).map(str::trim).filter(|p| !p.is_empty()) {
            let part = part.to_ascii_lowercase();
            let sensor = Sensor::ALL
                .into_iter()
                .find(|x| x.short() == part || x.name() == part)
                .ok_or_else(|| Error::invalid(format!("unknown sensor `{part}`")))?;
            sensors.push(sensor);
        }
        SensorSet::from_sensors(&sensors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_four_distinct_channels_in_fixed_order() {
        let ids: Vec<_> = ChannelId::all().collect();
        assert_eq!(ids.len(), 24);
        for (k, id) in ids.iter().enumerate() {
            assert_eq!(id.index(), k);
        }
        let mut names: Vec<_> = ids.iter().map(|c| c.column_name()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 24);
        assert_eq!(ids[0].column_name(), "left_arm_acc_x");
        assert_eq!(ids[5].column_name(), "left_arm_gyro_z");
        assert_eq!(ids[23].column_name(), "right_leg_gyro_z");
    }

    #[test]
    fn sensor_set_parsing() {
        assert!("all".parse::<SensorSet>().unwrap().is_all());
        let s: SensorSet = "la,rl".parse().unwrap();
        assert_eq!(s.sensors(), vec![Sensor::LeftArm, Sensor::RightLeg]);
        assert_eq!(s.channels().len(), 12);
        assert_eq!(s.label(), "la+rl");
        assert!("".parse::<SensorSet>().is_err());
        assert!("elbow".parse::<SensorSet>().is_err());
    }
}
