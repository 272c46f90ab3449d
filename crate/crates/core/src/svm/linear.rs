use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            lambda: 1e-4,
            epochs: 20,
            seed: 0,
        }
    }
}

/// Binary linear max-margin classifier `sign(w·x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl LinearModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }

    /// +1 or -1; a zero margin counts as +1.
    pub fn decide(&self, x: &[f64]) -> i8 {
        if self.margin(x) >= 0.0 {
            1
        } else {
            -1
        }
    }

    /// A learner that always returns `b` (used for pairs without data).
    pub fn constant(dim: usize, b: f64, params: &SvmParams) -> Self {
        LinearModel {
            w: vec![0.0; dim],
            b,
            lambda: params.lambda,
            epochs: 0,
            seed: params.seed,
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Regularized hinge objective `λ/2 (|w|² + b²) + mean(max(0, 1 - y(w·x + b)))`.
///
/// The bias is treated as the weight of a constant feature and is
/// regularized with the rest.
pub fn hinge_objective(model: &LinearModel, rows: &[&[f64]], y: &[f64], lambda: f64) -> f64 {
    let reg = 0.5 * lambda * (dot(&model.w, &model.w) + model.b * model.b);
    let loss: f64 = rows
        .iter()
        .zip(y)
        .map(|(x, &yi)| (1.0 - yi * model.margin(x)).max(0.0))
        .sum();
    reg + loss / rows.len() as f64
}

/// Order of rows that depends only on their content, so that training does
/// not depend on how the caller ordered the data.
fn canonical_order(rows: &[&[f64]], y: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.sort_by(|&a, &b| {
        y[a].total_cmp(&y[b]).then_with(|| {
            rows[a]
                .iter()
                .zip(rows[b])
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    idx
}

fn flush(sum: &mut [f64], pending: &mut f64, v: &[f64]) {
    if *pending != 0.0 {
        for (s, vj) in sum.iter_mut().zip(v) {
            *s += *pending * vj;
        }
        *pending = 0.0;
    }
}

/// Mean of the averaged iterates, or the current iterate before averaging starts.
fn average(sum: &[f64], pending: f64, v: &[f64], scale: f64, averaged: u64) -> Vec<f64> {
    if averaged == 0 {
        return v.iter().map(|x| scale * x).collect();
    }
    let inv = 1.0 / averaged as f64;
    sum.iter().zip(v).map(|(s, x)| (s + pending * x) * inv).collect()
}

/// Trains on ±1 labels with epoch-shuffled subgradient steps of size
/// `1/(λt)`, projection onto the ball of radius `1/√λ`, and averaging of
/// the iterates after the first epoch. Returns the averaged model and the
/// objective of the average after every epoch.
pub fn train_linear_svm(
    rows: &[&[f64]],
    y: &[f64],
    params: &SvmParams,
) -> Result<(LinearModel, Vec<f64>)> {
    let mut trace = Vec::with_capacity(params.epochs);
    let model = solve(rows, y, params, Some(&mut trace))?;
    Ok((model, trace))
}

/// [`train_linear_svm`] without the per-epoch objective trace.
pub fn fit_linear_svm(rows: &[&[f64]], y: &[f64], params: &SvmParams) -> Result<LinearModel> {
    solve(rows, y, params, None)
}

fn solve(rows: &[&[f64]], y: &[f64], params: &SvmParams, mut trace: Option<&mut Vec<f64>>) -> Result<LinearModel> {
    if rows.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            got: y.len(),
        });
    }
    if rows.len() < 2 || !y.iter().any(|&v| v > 0.0) || !y.iter().any(|&v| v < 0.0) {
        return Err(Error::DegenerateBinaryTask(format!(
            "{} rows, need both +1 and -1 labels",
            rows.len()
        )));
    }
    if !params.lambda.is_finite() || params.lambda <= 0.0 {
        return Err(Error::invalid("lambda must be positive"));
    }
    let d = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: r.len(),
        });
    }

    let lambda = params.lambda;
    let radius2 = 1.0 / lambda;
    let sq: Vec<f64> = rows.iter().map(|r| dot(r, r) + 1.0).collect();
    // The iterate is `scale * v` (bias stored last in `v`), so shrinking and
    // projection are O(1). The running sum of iterates is kept lazily: `pending`
    // accumulates the scales of steps during which `v` did not change.
    let mut v = vec![0.0; d + 1];
    let mut scale = 1.0;
    let mut vn2 = 0.0;
    let mut sum = vec![0.0; d + 1];
    let mut pending = 0.0;
    let mut order = canonical_order(rows, y);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut t: u64 = 0;
    // Averaging starts after the first epoch so the large early steps of the
    // 1/(λt) schedule do not dominate the average.
    let mut averaged: u64 = 0;
    let averaging = |epoch: usize| epoch > 0 || params.epochs == 1;

    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let x = rows[i];
            let yi = y[i];
            let eta = 1.0 / (lambda * t as f64);
            let shrink = 1.0 - 1.0 / t as f64;
            let vx = dot(&v[..d], x) + v[d];
            let margin = yi * scale * vx;
            if shrink == 0.0 {
                flush(&mut sum, &mut pending, &v);
                v.iter_mut().for_each(|e| *e = 0.0);
                vn2 = 0.0;
                scale = 1.0;
            } else {
                scale *= shrink;
            }
            if margin < 1.0 {
                flush(&mut sum, &mut pending, &v);
                let c = eta * yi / scale;
                for (vj, xj) in v[..d].iter_mut().zip(x) {
                    *vj += c * xj;
                }
                v[d] += c;
                // vx is stale after a reset, where v was zero.
                let vx = if vn2 == 0.0 { 0.0 } else { vx };
                vn2 += 2.0 * c * vx + c * c * sq[i];
            }
            let norm2 = scale * scale * vn2;
            if norm2 > radius2 {
                scale *= (radius2 / norm2).sqrt();
            }
            if scale < 1e-9 {
                flush(&mut sum, &mut pending, &v);
                v.iter_mut().for_each(|e| *e *= scale);
                vn2 = dot(&v, &v);
                scale = 1.0;
            }
            if averaging(epoch) {
                averaged += 1;
                pending += scale;
            }
        }
        vn2 = dot(&v, &v);
        let Some(trace) = trace.as_deref_mut() else {
            continue;
        };
        let avg = average(&sum, pending, &v, scale, averaged);
        let snapshot = LinearModel {
            w: avg[..d].to_vec(),
            b: avg[d],
            lambda,
            epochs: params.epochs,
            seed: params.seed,
        };
        trace.push(hinge_objective(&snapshot, rows, y, lambda));
    }
    let avg = average(&sum, pending, &v, scale, averaged);
    Ok(LinearModel {
        w: avg[..d].to_vec(),
        b: avg[d],
        lambda,
        epochs: params.epochs,
        seed: params.seed,
    })
}
