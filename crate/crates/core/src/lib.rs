//! Posture and movement classification from four limb-worn inertial
//! sensors: windowed features, a linear ECOC baseline, a sensor-fusion
//! dilated convolutional network, iterative annotation refinement, and a
//! leave-one-subject-out evaluation harness with a synthetic data generator.

pub mod classify;
pub mod data;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod iar;
pub mod nn;
pub mod report;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
