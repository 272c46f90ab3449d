//! Sensor-fusion network over frame sequences.
//!
//! Per frame, a shared *sensor module* is applied to each of the four
//! sensors' `6 × window` blocks: an accelerometer path and a gyroscope path
//! (`3 × kw` kernels over their three rows) and a shared path whose kernel
//! spans all six rows. Each path is rectified and averaged over time. The
//! 4 × 3 path outputs are fused by a dense layer into a frame embedding, an
//! optional one-hot posture condition is appended, and a stack of residual
//! dilated 1-D convolutions runs over the whole frame sequence before a
//! softmax head.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{NUM_CHANNELS, SoftLabel};
use crate::data::channel::{CHANNELS_PER_SENSOR, NUM_SENSORS};
use crate::error::{Error, Result};
use crate::nn::graph::{softmax_rows, FrameSpec, Graph, Var};
use crate::nn::tensor::Tensor;

pub const CHECKPOINT_FORMAT: &str = "sensor-fusion-net";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    /// No nonlinearity; used to check the differentiation core on a purely
    /// linear network.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_classes: usize,
    /// 0 for the posture network, the posture class count for the
    /// movement network.
    pub condition_dim: usize,
    pub window_len: usize,
    pub path_filters: usize,
    pub kernel_width: usize,
    /// Kernel height of the accelerometer-only and gyroscope-only paths.
    pub modality_kernel_height: usize,
    /// Kernel height of the shared path; 6 spans both modalities.
    pub shared_kernel_height: usize,
    pub fusion_width: usize,
    pub temporal_kernel: usize,
    pub dilations: Vec<usize>,
    pub activation: Activation,
}

impl ModelConfig {
    pub fn posture(n_classes: usize) -> Self {
        ModelConfig {
            n_classes,
            condition_dim: 0,
            window_len: 120,
            path_filters: 8,
            kernel_width: 5,
            modality_kernel_height: 3,
            shared_kernel_height: 6,
            fusion_width: 64,
            temporal_kernel: 3,
            dilations: vec![1, 2, 4, 8],
            activation: Activation::Relu,
        }
    }

    pub fn movement(n_classes: usize, posture_classes: usize) -> Self {
        ModelConfig {
            condition_dim: posture_classes,
            ..Self::posture(n_classes)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |layer: &str, msg: String| {
            Err(Error::Shape {
                layer: layer.into(),
                msg,
            })
        };
        if self.n_classes < 2 {
            return bad("head", format!("{} classes", self.n_classes));
        }
        if self.condition_dim != 0 && self.condition_dim != crate::data::annotation::POSTURE_CLASSES.len() {
            return bad(
                "temporal.in",
                format!("condition_dim {} must be 0 or the posture class count", self.condition_dim),
            );
        }
        if self.path_filters == 0 || self.fusion_width == 0 {
            return bad("sensor", "zero width".into());
        }
        if self.kernel_width == 0 || self.kernel_width > self.window_len {
            return bad(
                "sensor.acc",
                format!("kernel width {} vs window {}", self.kernel_width, self.window_len),
            );
        }
        if self.modality_kernel_height == 0 || self.modality_kernel_height > 3 {
            return bad(
                "sensor.acc",
                format!("kernel height {} over 3 rows", self.modality_kernel_height),
            );
        }
        if self.shared_kernel_height == 0 || self.shared_kernel_height > CHANNELS_PER_SENSOR {
            return bad(
                "sensor.shared",
                format!("kernel height {} over 6 rows", self.shared_kernel_height),
            );
        }
        if self.temporal_kernel.is_multiple_of(2) {
            return bad("temporal", format!("kernel {} must be odd", self.temporal_kernel));
        }
        if self.dilations.is_empty()
            || !self.dilations.iter().all(|d| d.is_power_of_two())
            || !self.dilations.windows(2).all(|w| w[0] < w[1])
        {
            return bad(
                "temporal",
                format!("dilations {:?} must be strictly increasing powers of two", self.dilations),
            );
        }
        Ok(())
    }

    /// Frames on each side plus one: `1 + Σ (kernel - 1) · dilation`.
    pub fn receptive_field(&self) -> usize {
        1 + self
            .dilations
            .iter()
            .map(|d| (self.temporal_kernel - 1) * d)
            .sum::<usize>()
    }

    pub fn temporal_input_width(&self) -> usize {
        self.fusion_width + self.condition_dim
    }

    /// Width of the per-sensor feature block (three paths).
    pub fn sensor_feature_width(&self) -> usize {
        3 * self.path_filters
    }

    /// Shapes of every parameter tensor, by name.
    pub fn param_shapes(&self) -> BTreeMap<String, Vec<usize>> {
        let f = self.path_filters;
        let kw = self.kernel_width;
        let w = self.fusion_width;
        let mut m = BTreeMap::new();
        m.insert("sensor.acc.w".into(), vec![f, self.modality_kernel_height, kw]);
        m.insert("sensor.acc.b".into(), vec![f]);
        m.insert("sensor.gyro.w".into(), vec![f, self.modality_kernel_height, kw]);
        m.insert("sensor.gyro.b".into(), vec![f]);
        m.insert("sensor.shared.w".into(), vec![f, self.shared_kernel_height, kw]);
        m.insert("sensor.shared.b".into(), vec![f]);
        m.insert("fusion.w".into(), vec![NUM_SENSORS * self.sensor_feature_width(), w]);
        m.insert("fusion.b".into(), vec![w]);
        m.insert("temporal.in.w".into(), vec![self.temporal_input_width(), w]);
        m.insert("temporal.in.b".into(), vec![w]);
        for i in 0..self.dilations.len() {
            m.insert(format!("temporal.block{i}.w"), vec![self.temporal_kernel, w, w]);
            m.insert(format!("temporal.block{i}.b"), vec![w]);
        }
        m.insert("head.w".into(), vec![w, self.n_classes]);
        m.insert("head.b".into(), vec![self.n_classes]);
        m
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> usize {
        let f = self.path_filters;
        let kw = self.kernel_width;
        let w = self.fusion_width;
        let modality = 2 * (f * self.modality_kernel_height * kw + f);
        let shared = f * self.shared_kernel_height * kw + f;
        let fusion = NUM_SENSORS * 3 * f * w + w;
        let input = self.temporal_input_width() * w + w;
        let blocks = self.dilations.len() * (self.temporal_kernel * w * w + w);
        let head = w * self.n_classes + self.n_classes;
        modality + shared + fusion + input + blocks + head
    }
}

/// Per-row normalization of the `6 × window` sensor blocks (shared by all
/// four sensors), fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputNorm {
    pub mean: [f64; CHANNELS_PER_SENSOR],
    pub std: [f64; CHANNELS_PER_SENSOR],
}

impl Default for InputNorm {
    fn default() -> Self {
        InputNorm {
            mean: [0.0; CHANNELS_PER_SENSOR],
            std: [1.0; CHANNELS_PER_SENSOR],
        }
    }
}

/// Raw signal of one recording plus the frame windows to classify.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceInput {
    /// `24 × len`, channel-major in the fixed channel order.
    pub signal: Vec<f64>,
    pub len: usize,
    pub starts: Vec<usize>,
    pub window_len: usize,
    /// Per-frame posture class for the movement network.
    pub condition: Option<Vec<usize>>,
}

impl SequenceInput {
    pub fn from_recording(
        recording: &crate::data::Recording,
        frames: &crate::data::FrameIndex,
        condition: Option<Vec<usize>>,
    ) -> Self {
        let len = recording.len();
        let mut signal = Vec::with_capacity(NUM_CHANNELS * len);
        for k in 0..NUM_CHANNELS {
            signal.extend_from_slice(recording.channel(k));
        }
        SequenceInput {
            signal,
            len,
            starts: frames.starts.clone(),
            window_len: frames.window_len,
            condition,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.starts.len()
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        &self.signal[k * self.len..(k + 1) * self.len]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub seed: u64,
    pub norm: InputNorm,
    pub params: BTreeMap<String, Tensor>,
}

/// Graph handles of one forward pass.
pub struct Forward {
    pub logits: Var,
    pub sensor_features: Var,
    pub params: BTreeMap<String, Var>,
}

impl Network {
    /// Instantiates the network with seeded initial weights.
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = BTreeMap::new();
        for (name, shape) in config.param_shapes() {
            let n: usize = shape.iter().product();
            let data = if name.ends_with(".b") {
                vec![0.0; n]
            } else {
                let fan_in: usize = match shape.len() {
                    3 if name.starts_with("sensor") => shape[1] * shape[2],
                    3 => shape[0] * shape[1],
                    _ => shape[0],
                };
                // Rectified layers get He scaling, the rest unit-variance scaling.
                let gain = if name.starts_with("sensor") || name.starts_with("fusion") {
                    6.0
                } else if name.starts_with("temporal.block") {
                    1.5
                } else {
                    3.0
                };
                let a = (gain / fan_in as f64).sqrt();
                (0..n).map(|_| rng.random_range(-a..a)).collect()
            };
            params.insert(name, Tensor::new(shape, data)?);
        }
        Ok(Network {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config,
            seed,
            norm: InputNorm::default(),
            params,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    /// Sets the head weights and bias to zero.
    pub fn zero_head(&mut self) {
        for name in ["head.w", "head.b"] {
            if let Some(t) = self.params.get_mut(name) {
                t.data.fill(0.0);
            }
        }
    }

    /// Fits the input normalization to the given sequences (finite samples only).
    pub fn fit_input_norm(&mut self, inputs: &[&SequenceInput]) {
        let mut sum = [0.0; CHANNELS_PER_SENSOR];
        let mut sum2 = [0.0; CHANNELS_PER_SENSOR];
        let mut count = [0usize; CHANNELS_PER_SENSOR];
        for inp in inputs {
            for k in 0..NUM_CHANNELS {
                let row = k % CHANNELS_PER_SENSOR;
                for &v in inp.channel(k).iter().filter(|v| v.is_finite()) {
                    sum[row] += v;
                    sum2[row] += v * v;
                    count[row] += 1;
                }
            }
        }
        for r in 0..CHANNELS_PER_SENSOR {
            if count[r] == 0 {
                continue;
            }
            let n = count[r] as f64;
            let mean = sum[r] / n;
            let var = (sum2[r] / n - mean * mean).max(0.0);
            self.norm.mean[r] = mean;
            self.norm.std[r] = if var > 1e-12 { var.sqrt() } else { 1.0 };
        }
    }

    fn normalized_input(&self, input: &SequenceInput) -> Tensor {
        let data = (0..NUM_CHANNELS)
            .flat_map(|k| {
                let row = k % CHANNELS_PER_SENSOR;
                let (m, s) = (self.norm.mean[row], self.norm.std[row]);
                input
                    .channel(k)
                    .iter()
                    .map(move |&v| if v.is_finite() { (v - m) / s } else { 0.0 })
            })
            .collect();
        Tensor {
            shape: vec![NUM_SENSORS, CHANNELS_PER_SENSOR, input.len],
            data,
            grad: None,
        }
    }

    fn act(&self, g: &mut Graph, x: Var) -> Var {
        match self.config.activation {
            Activation::Relu => g.relu(x),
            Activation::Identity => x,
        }
    }

    /// Records the forward pass of one sequence on `g`.
    pub fn forward_graph(&self, g: &mut Graph, input: &SequenceInput) -> Result<Forward> {
        let cfg = &self.config;
        if input.window_len != cfg.window_len {
            return Err(Error::Shape {
                layer: "input".into(),
                msg: format!("window {} but network expects {}", input.window_len, cfg.window_len),
            });
        }
        let n_frames = input.n_frames();
        if n_frames == 0 {
            return Err(Error::Empty("sequence has no frames".into()));
        }
        if input.signal.len() != NUM_CHANNELS * input.len {
            return Err(Error::Shape {
                layer: "input".into(),
                msg: format!("{} samples for length {}", input.signal.len(), input.len),
            });
        }
        match (&input.condition, cfg.condition_dim) {
            (None, 0) => {}
            (Some(c), d) if d > 0 => {
                if c.len() != n_frames || c.iter().any(|&k| k >= d) {
                    return Err(Error::Shape {
                        layer: "temporal.in".into(),
                        msg: "condition length or class out of range".into(),
                    });
                }
            }
            (None, _) => return Err(Error::invalid("movement network needs a posture condition")),
            (Some(_), _) => {
                return Err(Error::invalid("posture network does not take a condition"))
            }
        }
        let mut pv = BTreeMap::new();
        for (name, t) in &self.params {
            pv.insert(name.clone(), g.param(t.clone()));
        }
        let p = |n: &str| pv[n];

        let x = g.input(self.normalized_input(input));
        let relu = cfg.activation == Activation::Relu;
        let mut paths = Vec::with_capacity(3);
        for (name, row_start, rows) in [
            ("sensor.acc", 0, 3),
            ("sensor.gyro", 3, 3),
            ("sensor.shared", 0, CHANNELS_PER_SENSOR),
        ] {
            let spec = FrameSpec {
                row_start,
                rows,
                starts: input.starts.clone(),
                window: cfg.window_len,
                relu,
            };
            paths.push(g.frame_conv(x, p(&format!("{name}.w")), p(&format!("{name}.b")), spec)?);
        }
        let sensor_features = g.concat(&paths)?;
        let per_frame = g.reshape(
            sensor_features,
            vec![n_frames, NUM_SENSORS * cfg.sensor_feature_width()],
        )?;
        let fused = g.dense(per_frame, p("fusion.w"), p("fusion.b"))?;
        let fused = self.act(g, fused);
        let temporal_in = match &input.condition {
            Some(c) => {
                let mut onehot = vec![0.0; n_frames * cfg.condition_dim];
                for (i, &k) in c.iter().enumerate() {
                    onehot[i * cfg.condition_dim + k] = 1.0;
                }
                let cv = g.input(Tensor::new(vec![n_frames, cfg.condition_dim], onehot)?);
                g.concat(&[fused, cv])?
            }
            None => fused,
        };
        let mut h = g.dense(temporal_in, p("temporal.in.w"), p("temporal.in.b"))?;
        for (i, &d) in cfg.dilations.iter().enumerate() {
            let c = g.conv1d(
                h,
                p(&format!("temporal.block{i}.w")),
                p(&format!("temporal.block{i}.b")),
                d,
            )?;
            let a = self.act(g, c);
            h = g.add(h, a)?;
        }
        let logits = g.dense(h, p("head.w"), p("head.b"))?;
        Ok(Forward {
            logits,
            sensor_features,
            params: pv,
        })
    }

    /// Per-frame class probabilities.
    pub fn predict(&self, input: &SequenceInput) -> Result<Vec<SoftLabel>> {
        if input.n_frames() == 0 {
            return Ok(Vec::new());
        }
        let mut g = Graph::new();
        let fwd = self.forward_graph(&mut g, input)?;
        Ok(softmax_rows(&g.value(fwd.logits).data, self.config.n_classes)
            .into_iter()
            .map(SoftLabel)
            .collect())
    }

    /// Sensor-module outputs, `[n_frames * 4, 3 * filters]`, before fusion.
    pub fn sensor_features(&self, input: &SequenceInput) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let fwd = self.forward_graph(&mut g, input)?;
        Ok(g.value(fwd.sensor_features).data.clone())
    }

    /// Soft-target cross-entropy of one sequence; `weights` masks frames.
    pub fn loss_graph(
        &self,
        g: &mut Graph,
        input: &SequenceInput,
        targets: &[f64],
        weights: &[f64],
    ) -> Result<(Var, Forward)> {
        let fwd = self.forward_graph(g, input)?;
        let loss = g.softmax_cross_entropy(fwd.logits, targets, weights)?;
        Ok((loss, fwd))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let net: Network = serde_json::from_str(s)?;
        if net.format != CHECKPOINT_FORMAT || net.version != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint {} v{}",
                net.format, net.version
            )));
        }
        net.config.validate()?;
        for (name, shape) in net.config.param_shapes() {
            match net.params.get(&name) {
                Some(t) if t.shape == shape && t.data.len() == shape.iter().product::<usize>() => {}
                _ => {
                    return Err(Error::Shape {
                        layer: name,
                        msg: "missing or misshapen parameter in checkpoint".into(),
                    })
                }
            }
        }
        Ok(net)
    }
}

/// Posture and movement outputs of one recording, aligned to its frames.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecordingPrediction {
    pub posture: Vec<usize>,
    pub movement: Vec<usize>,
    pub posture_probs: Vec<SoftLabel>,
    pub movement_probs: Vec<SoftLabel>,
}

/// Runs the posture network, then the movement network conditioned on the
/// posture argmax of every frame.
pub fn predict_recording(
    posture_net: &Network,
    movement_net: &Network,
    recording: &crate::data::Recording,
    frames: &crate::data::FrameIndex,
) -> Result<RecordingPrediction> {
    let (pw, mw) = (posture_net.config.window_len, movement_net.config.window_len);
    if pw != mw || frames.window_len != pw {
        return Err(Error::Shape {
            layer: "input".into(),
            msg: format!("window mismatch: posture {pw}, movement {mw}, frames {}", frames.window_len),
        });
    }
    if movement_net.config.condition_dim != posture_net.config.n_classes {
        return Err(Error::Shape {
            layer: "temporal.in".into(),
            msg: "movement condition width differs from posture class count".into(),
        });
    }
    if frames.is_empty() {
        return Ok(RecordingPrediction::default());
    }
    let mut input = SequenceInput::from_recording(recording, frames, None);
    let posture_probs = posture_net.predict(&input)?;
    let posture: Vec<usize> = posture_probs.iter().map(SoftLabel::argmax).collect();
    input.condition = Some(posture.clone());
    let movement_probs = movement_net.predict(&input)?;
    let movement = movement_probs.iter().map(SoftLabel::argmax).collect();
    Ok(RecordingPrediction {
        posture,
        movement,
        posture_probs,
        movement_probs,
    })
}
