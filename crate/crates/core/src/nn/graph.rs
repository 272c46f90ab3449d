//! Tensor-level reverse-mode differentiation.
//!
//! A [`Graph`] records operations as they are applied; [`Graph::backward`]
//! walks the record in reverse and accumulates gradients for every node that
//! depends on a trainable leaf. Shapes:
//!
//! | op         | inputs                                   | output          |
//! |------------|------------------------------------------|-----------------|
//! | `frame_conv` | x `[S,H,T]`, w `[F,KH,KW]`, b `[F]`    | `[N·S,F]`       |
//! | `conv1d`   | x `[T,Cin]`, w `[K,Cin,Cout]`, b `[Cout]`| `[T,Cout]`      |
//! | `dense`    | x `[N,Din]`, w `[Din,Dout]`, b `[Dout]`  | `[N,Dout]`      |
//! | `concat`   | `[N,d_i]`...                             | `[N,Σd_i]`      |
//!
//! `frame_conv` is a valid (unpadded) 2-D cross-correlation over a band of
//! rows of each slab, optionally rectified, and averaged over each of `N`
//! frame windows along the time axis. Overlapping frames share the
//! convolution of their common samples. `conv1d` is a dilated, centred
//! convolution with zero padding so the sequence length is kept.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Row band and frame windows of a [`Graph::frame_conv`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpec {
    pub row_start: usize,
    pub rows: usize,
    /// Frame start offsets along the time axis.
    pub starts: Vec<usize>,
    pub window: usize,
    pub relu: bool,
}

#[derive(Debug)]
enum Op {
    Leaf,
    FrameConv {
        x: Var,
        w: Var,
        b: Var,
        spec: FrameSpec,
        /// Pre-activation sign per conv output when rectified, `[S,F,OH,P]`.
        mask: Vec<bool>,
    },
    Relu { x: Var },
    Concat { xs: Vec<Var> },
    Reshape { x: Var },
    Dense { x: Var, w: Var, b: Var },
    Conv1d { x: Var, w: Var, b: Var, dilation: usize },
    Add { a: Var, b: Var },
    SoftmaxCe { logits: Var, targets: Vec<f64>, weights: Vec<f64>, probs: Vec<f64>, total: f64 },
    WeightedSum { x: Var, weights: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

fn shape_err(layer: &str, msg: impl Into<String>) -> Error {
    Error::Shape {
        layer: layer.into(),
        msg: msg.into(),
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Constant input; no gradient is tracked.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Trainable leaf; its gradient is available after [`Graph::backward`].
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Convolves rows `row_start..row_start + rows` of every `[H,T]` slab
    /// with each `[KH,KW]` filter, rectifies if requested, and averages the
    /// outputs that fall inside each frame window. Row `k * S + s` of the
    /// result holds frame `k` of slab `s`.
    pub fn frame_conv(&mut self, x: Var, w: Var, b: Var, spec: FrameSpec) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 3 || ws.len() != 3 || bs != [ws[0]] {
            return Err(shape_err("frame_conv", format!("x {xs:?}, w {ws:?}, b {bs:?}")));
        }
        let (ns, h, t_len) = (xs[0], xs[1], xs[2]);
        let (f, kh, kw) = (ws[0], ws[1], ws[2]);
        if spec.rows == 0 || spec.row_start + spec.rows > h || kh > spec.rows || kw > spec.window {
            return Err(shape_err(
                "frame_conv",
                format!(
                    "kernel {kh}x{kw} on rows {}..{} of {h}, window {}",
                    spec.row_start,
                    spec.row_start + spec.rows,
                    spec.window
                ),
            ));
        }
        let Some(&last) = spec.starts.iter().max() else {
            return Err(shape_err("frame_conv", "no frames"));
        };
        if last + spec.window > t_len {
            return Err(shape_err(
                "frame_conv",
                format!("frame at {last} overruns length {t_len}"),
            ));
        }
        let oh = spec.rows - kh + 1;
        let ow = spec.window - kw + 1;
        let p = last + ow;
        let scale = 1.0 / (oh * ow) as f64;
        let nf = spec.starts.len();
        let xd = &self.value(x).data;
        let wdta = &self.value(w).data;
        let bias = &self.value(b).data;
        let mut y = vec![0.0; nf * ns * f];
        let mut mask = if spec.relu { vec![false; ns * f * oh * p] } else { Vec::new() };
        let mut buf = vec![0.0; oh * p];
        for s in 0..ns {
            let slab = &xd[s * h * t_len..(s + 1) * h * t_len];
            for fi in 0..f {
                let wf = &wdta[fi * kh * kw..(fi + 1) * kh * kw];
                for r in 0..oh {
                    let row0 = spec.row_start + r;
                    conv_row(
                        &mut buf[r * p..(r + 1) * p],
                        &slab[row0 * t_len..(row0 + kh) * t_len],
                        t_len,
                        wf,
                        kw,
                        bias[fi],
                    );
                }
                if spec.relu {
                    let m = &mut mask[(s * f + fi) * oh * p..(s * f + fi + 1) * oh * p];
                    for (v, mk) in buf.iter_mut().zip(m) {
                        *mk = *v > 0.0;
                        if !*mk {
                            *v = 0.0;
                        }
                    }
                }
                for (k, &st) in spec.starts.iter().enumerate() {
                    let sum: f64 = (0..oh)
                        .map(|r| buf[r * p + st..r * p + st + ow].iter().sum::<f64>())
                        .sum();
                    y[(k * ns + s) * f + fi] = sum * scale;
                }
            }
        }
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(
            Tensor::new(vec![nf * ns, f], y)?,
            Op::FrameConv { x, w, b, spec, mask },
            rg,
        ))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let t = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|&a| a.max(0.0)).collect(),
            grad: None,
        };
        let rg = self.rg(x);
        self.push(t, Op::Relu { x }, rg)
    }

    /// Concatenates 2-D tensors along the last dimension.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        let n = self.shape(xs[0])[0];
        let mut widths = Vec::with_capacity(xs.len());
        for &v in xs {
            let s = self.shape(v);
            if s.len() != 2 || s[0] != n {
                return Err(shape_err("concat", format!("part {s:?} with {n} rows")));
            }
            widths.push(s[1]);
        }
        let total: usize = widths.iter().sum();
        let mut y = Vec::with_capacity(n * total);
        for r in 0..n {
            for (&v, &wd) in xs.iter().zip(&widths) {
                y.extend_from_slice(&self.value(v).data[r * wd..(r + 1) * wd]);
            }
        }
        let rg = xs.iter().any(|&v| self.rg(v));
        Ok(self.push(Tensor::new(vec![n, total], y)?, Op::Concat { xs: xs.to_vec() }, rg))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let n: usize = shape.iter().product();
        if n != self.value(x).len() {
            return Err(shape_err(
                "reshape",
                format!("{:?} -> {shape:?}", self.shape(x)),
            ));
        }
        let data = self.value(x).data.clone();
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(shape, data)?, Op::Reshape { x }, rg))
    }

    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] || bs != [ws[1]] {
            return Err(shape_err("dense", format!("x {xs:?}, w {ws:?}, b {bs:?}")));
        }
        let (n, din, dout) = (xs[0], ws[0], ws[1]);
        let xd = &self.value(x).data;
        let wdta = &self.value(w).data;
        let bias = &self.value(b).data;
        let mut y = vec![0.0; n * dout];
        for r in 0..n {
            let out = &mut y[r * dout..(r + 1) * dout];
            out.copy_from_slice(bias);
            for i in 0..din {
                let xv = xd[r * din + i];
                if xv == 0.0 {
                    continue;
                }
                for (o, wv) in out.iter_mut().zip(&wdta[i * dout..(i + 1) * dout]) {
                    *o += xv * wv;
                }
            }
        }
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(Tensor::new(vec![n, dout], y)?, Op::Dense { x, w, b }, rg))
    }

    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, dilation: usize) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2 || ws.len() != 3 || xs[1] != ws[1] || bs != [ws[2]] || ws[0] % 2 == 0 {
            return Err(shape_err(
                "conv1d",
                format!("x {xs:?}, w {ws:?}, b {bs:?} (kernel must be odd)"),
            ));
        }
        if dilation == 0 {
            return Err(shape_err("conv1d", "dilation 0"));
        }
        let (t_len, cin) = (xs[0], xs[1]);
        let (k, cout) = (ws[0], ws[2]);
        let xd = &self.value(x).data;
        let wdta = &self.value(w).data;
        let bias = &self.value(b).data;
        let mut y = vec![0.0; t_len * cout];
        for t in 0..t_len {
            let out = &mut y[t * cout..(t + 1) * cout];
            out.copy_from_slice(bias);
            for ki in 0..k {
                let Some(s) = tap(t, ki, k, dilation, t_len) else { continue };
                let xrow = &xd[s * cin..(s + 1) * cin];
                for (ci, &xv) in xrow.iter().enumerate() {
                    let wrow = &wdta[(ki * cin + ci) * cout..(ki * cin + ci + 1) * cout];
                    for (o, wv) in out.iter_mut().zip(wrow) {
                        *o += xv * wv;
                    }
                }
            }
        }
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(
            Tensor::new(vec![t_len, cout], y)?,
            Op::Conv1d { x, w, b, dilation },
            rg,
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(
                "add",
                format!("{:?} + {:?}", self.shape(a), self.shape(b)),
            ));
        }
        let y: Vec<f64> = self
            .value(a)
            .data
            .iter()
            .zip(&self.value(b).data)
            .map(|(p, q)| p + q)
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(shape, y)?, Op::Add { a, b }, rg))
    }

    /// Weighted mean over rows of the cross-entropy between soft `targets`
    /// and `softmax(logits)`. Rows with zero weight do not contribute; if all
    /// weights are zero the loss is 0.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[f64], weights: &[f64]) -> Result<Var> {
        let ls = self.shape(logits);
        if ls.len() != 2 || targets.len() != ls[0] * ls[1] || weights.len() != ls[0] {
            return Err(shape_err(
                "softmax_cross_entropy",
                format!(
                    "logits {ls:?}, {} targets, {} weights",
                    targets.len(),
                    weights.len()
                ),
            ));
        }
        let (n, c) = (ls[0], ls[1]);
        let z = &self.value(logits).data;
        let mut probs = vec![0.0; n * c];
        let mut loss = 0.0;
        let total: f64 = weights.iter().sum();
        for r in 0..n {
            let row = &z[r * c..(r + 1) * c];
            let lse = log_sum_exp(row);
            for j in 0..c {
                probs[r * c + j] = (row[j] - lse).exp();
            }
            if weights[r] != 0.0 {
                let ce: f64 = (0..c)
                    .filter(|&j| targets[r * c + j] != 0.0)
                    .map(|j| -targets[r * c + j] * (row[j] - lse))
                    .sum();
                loss += weights[r] * ce;
            }
        }
        let value = if total > 0.0 { loss / total } else { 0.0 };
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(value),
            Op::SoftmaxCe {
                logits,
                targets: targets.to_vec(),
                weights: weights.to_vec(),
                probs,
                total,
            },
            rg,
        ))
    }

    /// `Σ x_i * weights_i`, used to reduce arbitrary outputs to a scalar.
    pub fn weighted_sum(&mut self, x: Var, weights: &[f64]) -> Result<Var> {
        if weights.len() != self.value(x).len() {
            return Err(shape_err("weighted_sum", "weight count"));
        }
        let s: f64 = self.value(x).data.iter().zip(weights).map(|(a, b)| a * b).sum();
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::scalar(s),
            Op::WeightedSum {
                x,
                weights: weights.to_vec(),
            },
            rg,
        ))
    }

    /// Hash of the sign pattern of every ReLU input; changes when any unit
    /// crosses its kink.
    pub fn relu_signature(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for node in &self.nodes {
            let signs: Box<dyn Iterator<Item = bool>> = match &node.op {
                Op::Relu { x } => Box::new(self.nodes[x.0].value.data.iter().map(|&v| v > 0.0)),
                Op::FrameConv { mask, .. } => Box::new(mask.iter().copied()),
                _ => continue,
            };
            for positive in signs {
                h ^= positive as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }

    /// Back-propagates from the scalar `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(shape_err("backward", "loss must be a scalar"));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if self.nodes[i].requires_grad {
                self.backprop_node(i, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn backprop_node(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::FrameConv { x, w, b, spec, mask } => {
                let (ns, h, t_len) = {
                    let xs = self.shape(*x);
                    (xs[0], xs[1], xs[2])
                };
                let (f, kh, kw) = {
                    let ws = self.shape(*w);
                    (ws[0], ws[1], ws[2])
                };
                let oh = spec.rows - kh + 1;
                let ow = spec.window - kw + 1;
                let p = spec.starts.iter().max().unwrap() + ow;
                let scale = 1.0 / (oh * ow) as f64;
                let xd = &self.value(*x).data;
                let wdta = &self.value(*w).data;
                let mut gc = vec![0.0; oh * p];
                let mut db = vec![0.0; f];
                let mut dw = vec![0.0; f * kh * kw];
                let mut dx = if self.rg(*x) { vec![0.0; ns * h * t_len] } else { Vec::new() };
                for s in 0..ns {
                    let slab = &xd[s * h * t_len..(s + 1) * h * t_len];
                    for fi in 0..f {
                        gc.fill(0.0);
                        for (k, &st) in spec.starts.iter().enumerate() {
                            let gv = g[(k * ns + s) * f + fi] * scale;
                            for r in 0..oh {
                                for v in &mut gc[r * p + st..r * p + st + ow] {
                                    *v += gv;
                                }
                            }
                        }
                        if spec.relu {
                            let m = &mask[(s * f + fi) * oh * p..(s * f + fi + 1) * oh * p];
                            for (v, &mk) in gc.iter_mut().zip(m) {
                                if !mk {
                                    *v = 0.0;
                                }
                            }
                        }
                        db[fi] += gc.iter().sum::<f64>();
                        for r in 0..oh {
                            let grow = &gc[r * p..(r + 1) * p];
                            for i in 0..kh {
                                let row = spec.row_start + r + i;
                                let xrow = &slab[row * t_len..(row + 1) * t_len];
                                for j in 0..kw {
                                    dw[(fi * kh + i) * kw + j] += dot(grow, &xrow[j..j + p]);
                                }
                                if !dx.is_empty() {
                                    let off = s * h * t_len + row * t_len;
                                    for j in 0..kw {
                                        let wv = wdta[(fi * kh + i) * kw + j];
                                        for (d, gv) in dx[off + j..off + j + p].iter_mut().zip(grow) {
                                            *d += wv * gv;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                for (v, d) in [(*b, db), (*w, dw), (*x, dx)] {
                    if self.rg(v) {
                        for (a, c) in slot(grads, v, d.len()).iter_mut().zip(&d) {
                            *a += c;
                        }
                    }
                }
            }
            Op::Relu { x } => {
                if !self.rg(*x) {
                    return;
                }
                let xd = &self.value(*x).data;
                let dx = slot(grads, *x, xd.len());
                for ((d, gv), xv) in dx.iter_mut().zip(g).zip(xd) {
                    if *xv > 0.0 {
                        *d += gv;
                    }
                }
            }
            Op::Concat { xs } => {
                let n = node.value.shape[0];
                let total = node.value.shape[1];
                let mut off = 0;
                for &v in xs {
                    let wd = self.shape(v)[1];
                    if self.rg(v) {
                        let dv = slot(grads, v, n * wd);
                        for r in 0..n {
                            for (d, gv) in dv[r * wd..(r + 1) * wd]
                                .iter_mut()
                                .zip(&g[r * total + off..r * total + off + wd])
                            {
                                *d += gv;
                            }
                        }
                    }
                    off += wd;
                }
            }
            Op::Reshape { x } => {
                if self.rg(*x) {
                    let dx = slot(grads, *x, g.len());
                    for (d, gv) in dx.iter_mut().zip(g) {
                        *d += gv;
                    }
                }
            }
            Op::Dense { x, w, b } => {
                let (n, din) = (self.shape(*x)[0], self.shape(*x)[1]);
                let dout = self.shape(*w)[1];
                let xd = &self.value(*x).data;
                if self.rg(*b) {
                    let db = slot(grads, *b, dout);
                    for row in g.chunks(dout) {
                        for (d, gv) in db.iter_mut().zip(row) {
                            *d += gv;
                        }
                    }
                }
                if self.rg(*w) {
                    let dw = slot(grads, *w, din * dout);
                    for r in 0..n {
                        let grow = &g[r * dout..(r + 1) * dout];
                        for i2 in 0..din {
                            let xv = xd[r * din + i2];
                            if xv == 0.0 {
                                continue;
                            }
                            for (d, gv) in dw[i2 * dout..(i2 + 1) * dout].iter_mut().zip(grow) {
                                *d += xv * gv;
                            }
                        }
                    }
                }
                if self.rg(*x) {
                    let wdta = &self.value(*w).data;
                    let dx = slot(grads, *x, n * din);
                    for r in 0..n {
                        let grow = &g[r * dout..(r + 1) * dout];
                        for i2 in 0..din {
                            dx[r * din + i2] += dot(&wdta[i2 * dout..(i2 + 1) * dout], grow);
                        }
                    }
                }
            }
            Op::Conv1d { x, w, b, dilation } => {
                let (t_len, cin) = (self.shape(*x)[0], self.shape(*x)[1]);
                let (k, cout) = (self.shape(*w)[0], self.shape(*w)[2]);
                let xd = &self.value(*x).data;
                if self.rg(*b) {
                    let db = slot(grads, *b, cout);
                    for row in g.chunks(cout) {
                        for (d, gv) in db.iter_mut().zip(row) {
                            *d += gv;
                        }
                    }
                }
                if self.rg(*w) {
                    let dw = slot(grads, *w, k * cin * cout);
                    for t in 0..t_len {
                        let grow = &g[t * cout..(t + 1) * cout];
                        for ki in 0..k {
                            let Some(s) = tap(t, ki, k, *dilation, t_len) else { continue };
                            for ci in 0..cin {
                                let xv = xd[s * cin + ci];
                                if xv == 0.0 {
                                    continue;
                                }
                                let off = (ki * cin + ci) * cout;
                                for (d, gv) in dw[off..off + cout].iter_mut().zip(grow) {
                                    *d += xv * gv;
                                }
                            }
                        }
                    }
                }
                if self.rg(*x) {
                    let wdta = &self.value(*w).data;
                    let dx = slot(grads, *x, t_len * cin);
                    for t in 0..t_len {
                        let grow = &g[t * cout..(t + 1) * cout];
                        for ki in 0..k {
                            let Some(s) = tap(t, ki, k, *dilation, t_len) else { continue };
                            for ci in 0..cin {
                                let off = (ki * cin + ci) * cout;
                                dx[s * cin + ci] += dot(&wdta[off..off + cout], grow);
                            }
                        }
                    }
                }
            }
            Op::Add { a, b } => {
                for v in [*a, *b] {
                    if self.rg(v) {
                        let dv = slot(grads, v, g.len());
                        for (d, gv) in dv.iter_mut().zip(g) {
                            *d += gv;
                        }
                    }
                }
            }
            Op::SoftmaxCe {
                logits,
                targets,
                weights,
                probs,
                total,
            } => {
                if !self.rg(*logits) || *total <= 0.0 {
                    return;
                }
                let c = self.shape(*logits)[1];
                let dz = slot(grads, *logits, probs.len());
                for (r, &wt) in weights.iter().enumerate() {
                    if wt == 0.0 {
                        continue;
                    }
                    let q = &targets[r * c..(r + 1) * c];
                    let mass: f64 = q.iter().sum();
                    let scale = g[0] * wt / total;
                    for j in 0..c {
                        dz[r * c + j] += scale * (probs[r * c + j] * mass - q[j]);
                    }
                }
            }
            Op::WeightedSum { x, weights } => {
                if self.rg(*x) {
                    let dx = slot(grads, *x, weights.len());
                    for (d, wv) in dx.iter_mut().zip(weights) {
                        *d += g[0] * wv;
                    }
                }
            }
        }
    }
}

/// Input index feeding output `t` through kernel tap `ki`, if inside the sequence.
#[inline]
fn tap(t: usize, ki: usize, k: usize, dilation: usize, len: usize) -> Option<usize> {
    let offset = (ki as isize - (k as isize - 1) / 2) * dilation as isize;
    let s = t as isize + offset;
    (s >= 0 && (s as usize) < len).then_some(s as usize)
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, n: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; n])
}

#[inline]
/// One output row of a valid 2-D correlation: `out[t] = bias + Σ w[i][j] x[i][t + j]`
/// over the `kh = w.len() / kw` input rows in `x` (row stride `stride`).
fn conv_row(out: &mut [f64], x: &[f64], stride: usize, w: &[f64], kw: usize, bias: f64) {
    const B: usize = 8;
    let ow = out.len();
    let kh = w.len() / kw;
    let mut t = 0;
    while t + B <= ow {
        let mut acc = [bias; B];
        for i in 0..kh {
            let xrow = &x[i * stride..(i + 1) * stride];
            for j in 0..kw {
                let wv = w[i * kw + j];
                let xs: &[f64; B] = xrow[t + j..t + j + B].try_into().unwrap();
                for u in 0..B {
                    acc[u] += wv * xs[u];
                }
            }
        }
        out[t..t + B].copy_from_slice(&acc);
        t += B;
    }
    for (tt, o) in out.iter_mut().enumerate().skip(t) {
        let mut acc = bias;
        for i in 0..kh {
            for j in 0..kw {
                acc += w[i * kw + j] * x[i * stride + tt + j];
            }
        }
        *o = acc;
    }
}

/// Dot product with independent partial sums so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    const L: usize = 8;
    let n = a.len().min(b.len());
    let mut acc = [0.0; L];
    let mut i = 0;
    while i + L <= n {
        let x: &[f64; L] = a[i..i + L].try_into().unwrap();
        let y: &[f64; L] = b[i..i + L].try_into().unwrap();
        for k in 0..L {
            acc[k] += x[k] * y[k];
        }
        i += L;
    }
    let mut tail = 0.0;
    while i < n {
        tail += a[i] * b[i];
        i += 1;
    }
    acc.iter().sum::<f64>() + tail
}

pub fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Row-wise softmax of a `[N, C]` buffer.
pub fn softmax_rows(z: &[f64], c: usize) -> Vec<Vec<f64>> {
    z.chunks(c)
        .map(|row| {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        })
        .collect()
}
