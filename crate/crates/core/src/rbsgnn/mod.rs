//! RBS-GNN: `g(sum_j f(C_j))` over the weakly connected components of a
//! sampled ball union.
//!
//! `f` runs `L` linear message-passing layers
//! `h_l(u) = W_l * sum_{v in N(u)} h_{l-1}(v) + b_l` and reads out
//! `sum_l sum_u h_l(u)`; `g` is a two-layer ReLU perceptron behind a fixed
//! affine standardization of its input. The rooted variant feeds `g` the
//! concatenation of the root component's embedding and the sum over the
//! other components.
//!
//! Every multiset sum is taken in sorted order (lexicographic `total_cmp`),
//! so outputs are bitwise invariant under vertex relabeling and component
//! reordering.

mod checkpoint;
mod train;

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::sampler::{BallUnion, ComponentSet};
use crate::seed;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use train::{
    evaluate, evaluate_prepared, fit_standardization, prepare, train, EvalConfig, EvalReport,
    LabeledSample, Prepared, Source, TrainConfig, TrainOutcome,
};

/// Per-vertex input encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputMode {
    /// The constant 1.
    ConstantOne,
    /// One-hot bucket of the vertex degree inside the sampled union. Bucket
    /// `i` holds degrees `d` with exactly `i` boundaries `<= d`.
    DegreeBuckets(Vec<usize>),
    /// The vertex feature rows carried by the union.
    Features(usize),
}

impl InputMode {
    pub fn dim(&self) -> usize {
        match self {
            InputMode::ConstantOne => 1,
            InputMode::DegreeBuckets(b) => b.len() + 1,
            InputMode::Features(d) => *d,
        }
    }

    /// Input rows of every local vertex.
    pub fn encode(&self, u: &BallUnion) -> Result<Vec<Vec<f64>>> {
        let m = u.m();
        match self {
            InputMode::ConstantOne => Ok(vec![vec![1.0]; m]),
            InputMode::DegreeBuckets(bounds) => Ok((0..m)
                .map(|v| {
                    let d = (0..m).filter(|&w| u.has_edge(v, w)).count();
                    let mut row = vec![0.0; bounds.len() + 1];
                    row[bounds.partition_point(|&b| b <= d)] = 1.0;
                    row
                })
                .collect()),
            InputMode::Features(d) => {
                if u.feature_dim() != Some(*d) {
                    return Err(Error::Dimension(format!(
                        "union features {:?}, model expects {d}",
                        u.feature_dim()
                    )));
                }
                Ok((0..m).map(|v| u.feature_row(v).unwrap().to_vec()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub d_in: usize,
    pub hidden: usize,
    /// Number of message-passing layers `L`.
    pub layers: usize,
    pub g_hidden: usize,
    pub outputs: usize,
    pub rooted: bool,
}

impl ModelDims {
    pub fn g_in(&self) -> usize {
        if self.rooted {
            2 * self.hidden
        } else {
            self.hidden
        }
    }
}

/// Offsets of every tensor inside the flat parameter vector.
#[derive(Debug, Clone)]
struct Layout {
    f_w: Vec<usize>,
    f_b: Vec<usize>,
    g_w1: usize,
    g_b1: usize,
    g_w2: usize,
    g_b2: usize,
    len: usize,
}

impl Layout {
    fn new(d: &ModelDims) -> Layout {
        let mut off = 0;
        let mut take = |n: usize| {
            let o = off;
            off += n;
            o
        };
        let (mut f_w, mut f_b) = (Vec::new(), Vec::new());
        for l in 0..d.layers {
            let fan_in = if l == 0 { d.d_in } else { d.hidden };
            f_w.push(take(d.hidden * fan_in));
            f_b.push(take(d.hidden));
        }
        let g_w1 = take(d.g_hidden * d.g_in());
        let g_b1 = take(d.g_hidden);
        let g_w2 = take(d.outputs * d.g_hidden);
        let g_b2 = take(d.outputs);
        Layout {
            f_w,
            f_b,
            g_w1,
            g_b1,
            g_w2,
            g_b2,
            len: off,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub input: InputMode,
    /// All trainable weights and biases, row-major, layer by layer.
    pub theta: Vec<f64>,
    /// Fixed standardization of `g`'s input: `(x - shift) * scale`.
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases, identity standardization.
    pub fn init(dims: ModelDims, input: InputMode, seed: u64) -> Result<ModelParams> {
        if dims.d_in != input.dim() {
            return Err(Error::Dimension(format!(
                "d_in {} but input mode has {}",
                dims.d_in,
                input.dim()
            )));
        }
        if dims.hidden == 0 || dims.layers == 0 || dims.g_hidden == 0 || dims.outputs == 0 {
            return invalid_arg("model widths and depth must be positive");
        }
        let layout = Layout::new(&dims);
        let mut theta = vec![0.0; layout.len];
        let mut rng = seed::rng(seed);
        let mut fill = |theta: &mut Vec<f64>, off: usize, rows: usize, cols: usize| {
            let a = (6.0 / (rows + cols) as f64).sqrt();
            for x in &mut theta[off..off + rows * cols] {
                *x = rng.random_range(-a..a);
            }
        };
        for l in 0..dims.layers {
            let fan_in = if l == 0 { dims.d_in } else { dims.hidden };
            fill(&mut theta, layout.f_w[l], dims.hidden, fan_in);
        }
        fill(&mut theta, layout.g_w1, dims.g_hidden, dims.g_in());
        fill(&mut theta, layout.g_w2, dims.outputs, dims.g_hidden);
        Ok(ModelParams {
            dims,
            input,
            theta,
            shift: vec![0.0; dims.g_in()],
            scale: vec![1.0; dims.g_in()],
        })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    fn layout(&self) -> Layout {
        Layout::new(&self.dims)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let d = &self.dims;
        if self.theta.len() != Layout::new(d).len
            || self.shift.len() != d.g_in()
            || self.scale.len() != d.g_in()
        {
            return Err(Error::Dimension(
                "parameter vector does not match dims".into(),
            ));
        }
        if d.d_in != self.input.dim() {
            return Err(Error::Dimension("input mode does not match d_in".into()));
        }
        if self
            .theta
            .iter()
            .chain(&self.shift)
            .chain(&self.scale)
            .any(|x| !x.is_finite())
        {
            return Err(Error::InvalidState("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Zero the last layer of `g`, making every output equal to its bias.
    pub fn zero_readout(&mut self) {
        let l = self.layout();
        for x in &mut self.theta[l.g_w2..l.len] {
            *x = 0.0;
        }
    }
}

fn cmp_rows(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Sum of a multiset of rows in sorted order.
fn sorted_sum(mut rows: Vec<&[f64]>, dim: usize) -> Vec<f64> {
    rows.sort_by(|a, b| cmp_rows(a, b));
    let mut out = vec![0.0; dim];
    for r in rows {
        for (o, x) in out.iter_mut().zip(r) {
            *o += x;
        }
    }
    out
}

/// `y = W x + b` for `W` stored row-major at `w`.
fn affine(theta: &[f64], w: usize, b: usize, rows: usize, x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    (0..rows)
        .map(|i| {
            let row = &theta[w + i * cols..w + (i + 1) * cols];
            theta[b + i] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>()
        })
        .collect()
}

/// `W^T y` for `W` of shape `rows x cols` at `w`.
fn affine_t(theta: &[f64], w: usize, rows: usize, cols: usize, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for (i, &yi) in y.iter().enumerate().take(rows) {
        let row = &theta[w + i * cols..w + (i + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * yi;
        }
    }
    out
}

/// Accumulate `y x^T` into the gradient of `W` at `w`.
fn outer_acc(grad: &mut [f64], w: usize, y: &[f64], x: &[f64]) {
    let cols = x.len();
    for (i, &yi) in y.iter().enumerate() {
        if yi == 0.0 {
            continue;
        }
        for (j, &xj) in x.iter().enumerate() {
            grad[w + i * cols + j] += yi * xj;
        }
    }
}

/// Activations of `f` on one component.
struct ComponentTrace {
    /// Component-local out-neighbors.
    out: Vec<Vec<usize>>,
    /// Component-local in-neighbors.
    inn: Vec<Vec<usize>>,
    /// Aggregated messages `a[l][i]` feeding layer `l + 1`.
    a: Vec<Vec<Vec<f64>>>,
    f: Vec<f64>,
}

fn component_forward(
    p: &ModelParams,
    layout: &Layout,
    x: &[Vec<f64>],
    u: &BallUnion,
    members: &[usize],
) -> ComponentTrace {
    let d = &p.dims;
    let mc = members.len();
    let out: Vec<Vec<usize>> = members
        .iter()
        .map(|&a| (0..mc).filter(|&j| u.has_edge(a, members[j])).collect())
        .collect();
    let mut inn = vec![Vec::new(); mc];
    for (i, nb) in out.iter().enumerate() {
        for &j in nb {
            inn[j].push(i);
        }
    }
    let mut h = vec![members.iter().map(|&v| x[v].clone()).collect::<Vec<_>>()];
    let mut a = Vec::with_capacity(d.layers);
    for l in 0..d.layers {
        let width = if l == 0 { d.d_in } else { d.hidden };
        let prev = &h[l];
        let agg: Vec<Vec<f64>> = out
            .iter()
            .map(|nb| sorted_sum(nb.iter().map(|&j| prev[j].as_slice()).collect(), width))
            .collect();
        let next: Vec<Vec<f64>> = agg
            .iter()
            .map(|m| affine(&p.theta, layout.f_w[l], layout.f_b[l], d.hidden, m))
            .collect();
        a.push(agg);
        h.push(next);
    }
    let mut f = vec![0.0; d.hidden];
    for layer in &h[1..] {
        let s = sorted_sum(layer.iter().map(|r| r.as_slice()).collect(), d.hidden);
        for (o, x) in f.iter_mut().zip(&s) {
            *o += x;
        }
    }
    ComponentTrace { out, inn, a, f }
}

/// Backpropagate `df` (gradient w.r.t. `f(C)`) through one component.
fn component_backward(
    p: &ModelParams,
    layout: &Layout,
    t: &ComponentTrace,
    df: &[f64],
    grad: &mut [f64],
) {
    let d = &p.dims;
    let mc = t.out.len();
    // gradient w.r.t. h[l], starting from the top layer
    let mut gh: Vec<Vec<f64>> = vec![df.to_vec(); mc];
    for l in (0..d.layers).rev() {
        let width = if l == 0 { d.d_in } else { d.hidden };
        for i in 0..mc {
            outer_acc(grad, layout.f_w[l], &gh[i], &t.a[l][i]);
            for (g, x) in grad[layout.f_b[l]..layout.f_b[l] + d.hidden]
                .iter_mut()
                .zip(&gh[i])
            {
                *g += x;
            }
        }
        if l == 0 {
            break;
        }
        // d a[l][w] = W_l^T gh[w]; h[l-1][v] feeds a[l][w] for v in out(w)
        let ga: Vec<Vec<f64>> = gh
            .iter()
            .map(|g| affine_t(&p.theta, layout.f_w[l], d.hidden, width, g))
            .collect();
        gh = (0..mc)
            .map(|v| {
                let mut g = df.to_vec();
                for &w in &t.inn[v] {
                    for (o, x) in g.iter_mut().zip(&ga[w]) {
                        *o += x;
                    }
                }
                g
            })
            .collect();
    }
}

/// Everything the backward pass needs.
struct Trace {
    comps: Vec<ComponentTrace>,
    /// Component feeding the root half of `g`'s input (rooted variant).
    root: Option<usize>,
    z: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
    logits: Vec<f64>,
}

fn forward_trace(p: &ModelParams, u: &BallUnion, c: &ComponentSet) -> Result<Trace> {
    p.validate()?;
    let d = &p.dims;
    let layout = p.layout();
    let x = p.input.encode(u)?;
    if x.iter().any(|r| r.len() != d.d_in) {
        return Err(Error::Dimension("input rows do not match d_in".into()));
    }
    let comps: Vec<ComponentTrace> = c
        .components
        .iter()
        .map(|members| component_forward(p, &layout, &x, u, members))
        .collect();
    let (root, s) = if d.rooted {
        let r = c.root_component.ok_or_else(|| {
            Error::InvalidState("rooted model needs a designated root component".into())
        })?;
        let rest = sorted_sum(
            comps
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != r)
                .map(|(_, t)| t.f.as_slice())
                .collect(),
            d.hidden,
        );
        let mut s = comps[r].f.clone();
        s.extend(rest);
        (Some(r), s)
    } else {
        (
            None,
            sorted_sum(comps.iter().map(|t| t.f.as_slice()).collect(), d.hidden),
        )
    };
    let z: Vec<f64> = s
        .iter()
        .zip(&p.shift)
        .zip(&p.scale)
        .map(|((x, m), k)| (x - m) * k)
        .collect();
    let pre = affine(&p.theta, layout.g_w1, layout.g_b1, d.g_hidden, &z);
    let act: Vec<f64> = pre.iter().map(|&x| x.max(0.0)).collect();
    let logits = affine(&p.theta, layout.g_w2, layout.g_b2, d.outputs, &act);
    Ok(Trace {
        comps,
        root,
        z,
        pre,
        act,
        logits,
    })
}

fn backward(p: &ModelParams, t: &Trace, dlogits: &[f64], grad: &mut [f64]) {
    let d = &p.dims;
    let layout = p.layout();
    outer_acc(grad, layout.g_w2, dlogits, &t.act);
    for (g, x) in grad[layout.g_b2..layout.g_b2 + d.outputs]
        .iter_mut()
        .zip(dlogits)
    {
        *g += x;
    }
    let dact = affine_t(&p.theta, layout.g_w2, d.outputs, d.g_hidden, dlogits);
    let dpre: Vec<f64> = dact
        .iter()
        .zip(&t.pre)
        .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
        .collect();
    outer_acc(grad, layout.g_w1, &dpre, &t.z);
    for (g, x) in grad[layout.g_b1..layout.g_b1 + d.g_hidden]
        .iter_mut()
        .zip(&dpre)
    {
        *g += x;
    }
    let dz = affine_t(&p.theta, layout.g_w1, d.g_hidden, d.g_in(), &dpre);
    let ds: Vec<f64> = dz.iter().zip(&p.scale).map(|(g, k)| g * k).collect();
    for (j, comp) in t.comps.iter().enumerate() {
        let df = match t.root {
            Some(r) if r == j => &ds[..d.hidden],
            Some(_) => &ds[d.hidden..],
            None => &ds[..],
        };
        component_backward(p, &layout, comp, df, grad);
    }
}

/// Input of `g` before standardization: `sum_j f(C_j)`, or the rooted
/// concatenation.
pub fn embedding(p: &ModelParams, u: &BallUnion, c: &ComponentSet) -> Result<Vec<f64>> {
    let t = forward_trace(p, u, c)?;
    Ok(t.z
        .iter()
        .zip(&p.shift)
        .zip(&p.scale)
        .map(|((z, m), k)| z / k + m)
        .collect())
}

/// Output of an unrooted model.
pub fn forward(p: &ModelParams, u: &BallUnion, c: &ComponentSet) -> Result<Vec<f64>> {
    if p.dims.rooted {
        return invalid_arg("model is rooted; use forward_rooted");
    }
    Ok(forward_trace(p, u, c)?.logits)
}

/// Output of a rooted model: `g(f(C_0), sum_{j != 0} f(C_j))` with `C_0` the
/// root component.
pub fn forward_rooted(p: &ModelParams, u: &BallUnion, c: &ComponentSet) -> Result<Vec<f64>> {
    if !p.dims.rooted {
        return invalid_arg("model is unrooted; use forward");
    }
    Ok(forward_trace(p, u, c)?.logits)
}

/// Supervision target of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Class(usize),
    Value(f64),
}

/// Per-sample loss and gradient w.r.t. the logits.
fn loss_head(logits: &[f64], target: Target) -> Result<(f64, Vec<f64>)> {
    match target {
        Target::Class(y) => {
            if y >= logits.len() {
                return invalid_arg(format!(
                    "label {y} out of range for {} classes",
                    logits.len()
                ));
            }
            let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|&l| (l - mx).exp()).sum();
            let lse = mx + z.ln();
            let mut g: Vec<f64> = logits.iter().map(|&l| (l - lse).exp()).collect();
            g[y] -= 1.0;
            Ok((lse - logits[y], g))
        }
        Target::Value(v) => {
            if logits.len() != 1 {
                return invalid_arg("regression needs a single output");
            }
            let e = logits[0] - v;
            Ok((e * e, vec![2.0 * e]))
        }
    }
}

/// Mean loss over the batch plus `0.5 * weight_decay * |theta|^2`, and its
/// exact gradient.
pub fn loss_and_grad(
    p: &ModelParams,
    batch: &[Prepared],
    weight_decay: f64,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return invalid_arg("empty batch");
    }
    let mut grad = vec![0.0; p.len()];
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for s in batch {
        let t = forward_trace(p, &s.union, &s.components)?;
        let (l, mut dl) = loss_head(&t.logits, s.target)?;
        loss += l * scale;
        for x in &mut dl {
            *x *= scale;
        }
        backward(p, &t, &dl, &mut grad);
    }
    if weight_decay != 0.0 {
        loss += 0.5 * weight_decay * p.theta.iter().map(|x| x * x).sum::<f64>();
        for (g, x) in grad.iter_mut().zip(&p.theta) {
            *g += weight_decay * x;
        }
    }
    Ok((loss, grad))
}

/// Index of the largest output; ties go to the smallest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
