//! Minimal reverse-mode differentiation and the sensor-fusion network.

pub mod gradcheck;
pub mod graph;
pub mod network;
pub mod tensor;
pub mod train;

pub use gradcheck::{check_network, check_network_with, check_op, GradCheckOptions, GradCheckReport};
pub use graph::{FrameSpec, Graph, Var};
pub use network::{Activation, InputNorm, ModelConfig, Network, SequenceInput};
pub use tensor::Tensor;
pub use train::{dataset_loss, train_network, TrainConfig, TrainItem};
