//! Finite-difference verification of analytic gradients.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::graph::{Graph, Var};
use crate::nn::network::Network;
use crate::nn::tensor::Tensor;
use crate::nn::train::{loss_and_grads, TrainItem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Entries checked per parameter group; `None` checks all of them.
    pub max_per_group: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            max_per_group: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub name: String,
    /// `max |analytic - numeric| / max(|analytic|∞, |numeric|∞)` over the
    /// checked entries.
    pub relative_error: f64,
    pub checked: usize,
    /// Entries whose perturbation moved a ReLU across its kink.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub groups: Vec<GroupReport>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.groups
            .iter()
            .map(|g| g.relative_error)
            .fold(0.0, f64::max)
    }

    pub fn checked(&self) -> usize {
        self.groups.iter().map(|g| g.checked).sum()
    }
}

/// Normwise relative error between two gradient vectors; 0 if both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max);
    let scale = analytic
        .iter()
        .chain(numeric)
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn sample_indices(n: usize, max: Option<usize>) -> Vec<usize> {
    match max {
        Some(m) if m < n => (0..m).map(|i| i * n / m + (n / m) / 2).collect(),
        _ => (0..n).collect(),
    }
}

fn loss_with_signature(net: &Network, item: &TrainItem) -> Result<(f64, u64)> {
    let mut g = Graph::new();
    let (loss, _) = net.loss_graph(&mut g, &item.input, &item.targets, &item.weights)?;
    Ok((g.value(loss).data[0], g.relu_signature()))
}

/// Compares backpropagated gradients of the network loss on `item` with
/// central differences.
pub fn check_network(net: &Network, item: &TrainItem, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    check_network_with(net, item, opts, |_, _| {})
}

/// As [`check_network`], but `corrupt` may modify each analytic gradient
/// before comparison (used to confirm the check can fail).
pub fn check_network_with(
    net: &Network,
    item: &TrainItem,
    opts: &GradCheckOptions,
    corrupt: impl Fn(&str, &mut [f64]),
) -> Result<GradCheckReport> {
    let (_, mut grads) = loss_and_grads(net, item)?;
    let (_, base_sig) = loss_with_signature(net, item)?;
    let mut probe = net.clone();
    let mut groups = Vec::new();
    for (name, grad) in grads.iter_mut() {
        corrupt(name, grad);
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        let mut skipped = 0;
        for i in sample_indices(grad.len(), opts.max_per_group) {
            let orig = probe.params[name].data[i];
            probe.params.get_mut(name).unwrap().data[i] = orig + opts.step;
            let (lp, sp) = loss_with_signature(&probe, item)?;
            probe.params.get_mut(name).unwrap().data[i] = orig - opts.step;
            let (lm, sm) = loss_with_signature(&probe, item)?;
            probe.params.get_mut(name).unwrap().data[i] = orig;
            if sp != base_sig || sm != base_sig {
                skipped += 1;
                continue;
            }
            analytic.push(grad[i]);
            numeric.push((lp - lm) / (2.0 * opts.step));
        }
        groups.push(GroupReport {
            name: name.clone(),
            relative_error: relative_error(&analytic, &numeric),
            checked: analytic.len(),
            skipped,
        });
    }
    Ok(GradCheckReport { groups })
}

/// Checks the gradients of a scalar function built by `build` with respect
/// to each of `inputs`. Returns one normwise relative error per input.
pub fn check_op(
    inputs: &[Tensor],
    step: f64,
    build: impl Fn(&mut Graph, &[Var]) -> Result<Var>,
) -> Result<Vec<f64>> {
    let eval = |ts: &[Tensor]| -> Result<(f64, u64, Vec<Vec<f64>>)> {
        let mut g = Graph::new();
        let vars: Vec<Var> = ts.iter().map(|t| g.param(t.clone())).collect();
        let out = build(&mut g, &vars)?;
        let value = g.value(out).data[0];
        let sig = g.relu_signature();
        g.backward(out)?;
        let grads = vars
            .iter()
            .zip(ts)
            .map(|(&v, t)| g.grad(v).map(<[f64]>::to_vec).unwrap_or(vec![0.0; t.len()]))
            .collect();
        Ok((value, sig, grads))
    };
    let (_, sig, grads) = eval(inputs)?;
    let mut probe = inputs.to_vec();
    let mut errors = Vec::with_capacity(inputs.len());
    for (k, grad) in grads.iter().enumerate() {
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for (i, &a) in grad.iter().enumerate() {
            let orig = probe[k].data[i];
            probe[k].data[i] = orig + step;
            let (lp, sp, _) = eval(&probe)?;
            probe[k].data[i] = orig - step;
            let (lm, sm, _) = eval(&probe)?;
            probe[k].data[i] = orig;
            if sp != sig || sm != sig {
                continue;
            }
            analytic.push(a);
            numeric.push((lp - lm) / (2.0 * step));
        }
        errors.push(relative_error(&analytic, &numeric));
    }
    Ok(errors)
}
