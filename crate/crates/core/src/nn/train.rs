use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::SoftLabel;
use crate::error::{Error, Result};
use crate::nn::graph::Graph;
use crate::nn::network::{Network, SequenceInput};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 30,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One recording's frame sequence with soft targets; frames with weight 0
/// (unusable or unlabeled) are ignored by the loss.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub input: SequenceInput,
    /// `n_frames × n_classes`, row-major.
    pub targets: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TrainItem {
    /// Builds targets from per-frame soft labels; `None` frames get weight 0.
    pub fn new(input: SequenceInput, labels: &[Option<SoftLabel>], n_classes: usize) -> Result<Self> {
        if labels.len() != input.n_frames() {
            return Err(Error::DimensionMismatch {
                expected: input.n_frames(),
                got: labels.len(),
            });
        }
        let mut targets = vec![0.0; labels.len() * n_classes];
        let mut weights = vec![0.0; labels.len()];
        for (i, l) in labels.iter().enumerate() {
            if let Some(l) = l {
                if l.0.len() != n_classes {
                    return Err(Error::DimensionMismatch {
                        expected: n_classes,
                        got: l.0.len(),
                    });
                }
                targets[i * n_classes..(i + 1) * n_classes].copy_from_slice(&l.0);
                weights[i] = 1.0;
            }
        }
        Ok(TrainItem {
            input,
            targets,
            weights,
        })
    }

    pub fn labeled_frames(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }
}

struct Adam {
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
    t: i32,
}

impl Adam {
    fn new(net: &Network) -> Self {
        let zeros: BTreeMap<String, Vec<f64>> = net
            .params
            .iter()
            .map(|(k, t)| (k.clone(), vec![0.0; t.len()]))
            .collect();
        Adam {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, net: &mut Network, grads: &BTreeMap<String, Vec<f64>>, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for (name, g) in grads {
            let p = net.params.get_mut(name).expect("parameter registered");
            let m = self.m.get_mut(name).expect("state registered");
            let v = self.v.get_mut(name).expect("state registered");
            for i in 0..g.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p.data[i] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.eps);
            }
        }
    }
}

/// Loss and parameter gradients of one item.
pub fn loss_and_grads(net: &Network, item: &TrainItem) -> Result<(f64, BTreeMap<String, Vec<f64>>)> {
    let mut g = Graph::new();
    let (loss, fwd) = net.loss_graph(&mut g, &item.input, &item.targets, &item.weights)?;
    g.backward(loss)?;
    let value = g.value(loss).data[0];
    let grads = fwd
        .params
        .iter()
        .map(|(name, &v)| {
            let grad = g
                .grad(v)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; net.params[name].len()]);
            (name.clone(), grad)
        })
        .collect();
    Ok((value, grads))
}

/// Weighted mean loss over the labeled frames of all items.
pub fn dataset_loss(net: &Network, items: &[TrainItem]) -> Result<f64> {
    let mut total = 0.0;
    let mut weight = 0.0;
    for item in items {
        let w: f64 = item.weights.iter().sum();
        if w == 0.0 {
            continue;
        }
        let mut g = Graph::new();
        let (loss, _) = net.loss_graph(&mut g, &item.input, &item.targets, &item.weights)?;
        total += g.value(loss).data[0] * w;
        weight += w;
    }
    Ok(if weight > 0.0 { total / weight } else { 0.0 })
}

/// Trains with Adam, one sequence per step in a seeded order per epoch.
/// Returns the frame-weighted mean training loss of every epoch.
pub fn train_network(net: &mut Network, items: &[TrainItem], cfg: &TrainConfig) -> Result<Vec<f64>> {
    let usable: Vec<usize> = (0..items.len())
        .filter(|&i| items[i].labeled_frames() > 0)
        .collect();
    if usable.is_empty() {
        return Err(Error::Empty("no labeled frames to train on".into()));
    }
    let mut adam = Adam::new(net);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order = usable;
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut weight = 0.0;
        for &i in &order {
            let (loss, grads) = loss_and_grads(net, &items[i])?;
            if !loss.is_finite() {
                return Err(Error::invalid(format!("non-finite loss in epoch {epoch}")));
            }
            let w: f64 = items[i].weights.iter().sum();
            total += loss * w;
            weight += w;
            adam.step(net, &grads, cfg);
        }
        let mean = total / weight;
        log::debug!("epoch {epoch}: loss {mean:.5}");
        trace.push(mean);
    }
    Ok(trace)
}
