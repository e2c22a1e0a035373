use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax, embedding, forward_trace, loss_and_grad, ModelParams, Target};
use crate::error::{invalid_arg, Error, Result};
use crate::graph::{Graph, VertexId};
use crate::oracle::{OracleSession, QueryCounts};
use crate::sampler::{
    rooted_union_sample_with, union_sample_with, weakly_connected_components, BallParams,
    BallUnion, ComponentSet, PairQueries,
};
use crate::seed;

/// Where a training input comes from.
#[derive(Debug, Clone)]
pub enum Source<'g> {
    /// A fixed, pre-sampled union.
    Union(BallUnion),
    /// A graph; a fresh union is sampled whenever the sample is used.
    Graph(&'g Graph),
    /// A graph and a root vertex, for the rooted variant.
    Rooted(&'g Graph, VertexId),
}

#[derive(Debug, Clone)]
pub struct LabeledSample<'g> {
    pub source: Source<'g>,
    pub target: Target,
}

/// A sampled union with its components, ready for the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub union: BallUnion,
    pub components: ComponentSet,
    pub target: Target,
}

impl Prepared {
    pub fn new(union: BallUnion, target: Target) -> Prepared {
        let components = weakly_connected_components(&union);
        Prepared {
            union,
            components,
            target,
        }
    }
}

/// Materialize a sample, drawing on `(seed, stream)` when it needs sampling.
pub fn prepare(
    s: &LabeledSample<'_>,
    params: BallParams,
    seed: u64,
    stream: u64,
) -> Result<Prepared> {
    let union = match &s.source {
        Source::Union(u) => u.clone(),
        Source::Graph(g) => {
            let mut o = OracleSession::substream(g, seed, stream);
            union_sample_with(&mut o, params, PairQueries::DistinctVertices)?
        }
        Source::Rooted(g, root) => {
            let mut o = OracleSession::substream(g, seed, stream);
            rooted_union_sample_with(&mut o, *root, params, PairQueries::DistinctVertices)?
        }
    };
    Ok(Prepared::new(union, s.target))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Multiply the learning rate by `lr_gamma` every `lr_step` epochs.
    pub lr_step: usize,
    pub lr_gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Ball parameters for samples drawn from graphs.
    pub sampler: BallParams,
    /// Fit `g`'s input standardization on the training set before training.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 1e-3,
            lr_step: 50,
            lr_gamma: 0.5,
            epochs: 100,
            batch_size: 32,
            seed: 0,
            sampler: BallParams::new(3, 5, 2),
            standardize: true,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        let rates_ok =
            self.learning_rate >= 0.0 && self.learning_rate.is_finite() && self.weight_decay >= 0.0;
        if !rates_ok || !(0.0..1.0).contains(&self.momentum) {
            return invalid_arg(
                "learning rate and weight decay must be non-negative, momentum in [0, 1)",
            );
        }
        if !(self.lr_gamma > 0.0 && self.lr_gamma <= 1.0) || self.lr_step == 0 {
            return invalid_arg("lr schedule needs step >= 1 and gamma in (0, 1]");
        }
        if self.batch_size == 0 {
            return invalid_arg("batch size must be positive");
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_gamma.powi((epoch / self.lr_step) as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Mean regularized batch loss per epoch.
    pub losses: Vec<f64>,
}

/// Set `g`'s input standardization to the mean and inverse standard
/// deviation of the embeddings of `data` under `p`.
pub fn fit_standardization(p: &mut ModelParams, data: &[Prepared]) -> Result<()> {
    if data.is_empty() {
        return invalid_arg("cannot standardize on no data");
    }
    p.shift.iter_mut().for_each(|x| *x = 0.0);
    p.scale.iter_mut().for_each(|x| *x = 1.0);
    let emb = data
        .iter()
        .map(|s| embedding(p, &s.union, &s.components))
        .collect::<Result<Vec<_>>>()?;
    let n = emb.len() as f64;
    for j in 0..p.shift.len() {
        let mean = emb.iter().map(|e| e[j]).sum::<f64>() / n;
        let var = emb.iter().map(|e| (e[j] - mean).powi(2)).sum::<f64>() / n;
        p.shift[j] = mean;
        p.scale[j] = if var.sqrt() > 1e-12 {
            1.0 / var.sqrt()
        } else {
            1.0
        };
    }
    Ok(())
}

fn stream(seed: u64, tags: &[u64]) -> u64 {
    seed::derive(seed, tags)
}

/// Minibatch SGD with momentum (`v = mu v + g`, `theta -= lr v`), weight
/// decay inside the gradient, and a stepped learning rate. Samples drawn
/// from graphs are resampled every epoch.
pub fn train(
    p0: &ModelParams,
    data: &[LabeledSample<'_>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    p0.validate()?;
    if data.is_empty() {
        return invalid_arg("no training data");
    }
    let mut p = p0.clone();
    if cfg.standardize {
        let initial = data
            .iter()
            .enumerate()
            .map(|(i, s)| prepare(s, cfg.sampler, cfg.seed, stream(cfg.seed, &[2, i as u64])))
            .collect::<Result<Vec<_>>>()?;
        fit_standardization(&mut p, &initial)?;
    }
    let mut velocity = vec![0.0; p.len()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut seed::rng(stream(cfg.seed, &[0, epoch as u64])));
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = chunk
                .iter()
                .map(|&i| {
                    prepare(
                        &data[i],
                        cfg.sampler,
                        cfg.seed,
                        stream(cfg.seed, &[1, epoch as u64, i as u64]),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let (loss, grad) = loss_and_grad(&p, &batch, cfg.weight_decay)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            for ((t, v), g) in p.theta.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v + g;
                *t -= lr * *v;
            }
            total += loss;
            batches += 1;
        }
        let mean = total / batches as f64;
        if !mean.is_finite() || p.theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        losses.push(mean);
    }
    Ok(TrainOutcome { params: p, losses })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub sampler: BallParams,
    pub votes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub predictions: Vec<usize>,
    /// Oracle queries spent on each graph.
    pub queries: Vec<QueryCounts>,
}

fn majority(votes: &[usize], classes: usize) -> usize {
    let mut counts = vec![0usize; classes];
    for &v in votes {
        counts[v] += 1;
    }
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

fn report(
    predictions: Vec<usize>,
    labels: &[usize],
    classes: usize,
    queries: Vec<QueryCounts>,
) -> EvalReport {
    let mut confusion = vec![vec![0u64; classes]; classes];
    let mut correct = 0;
    for (&p, &y) in predictions.iter().zip(labels) {
        confusion[y][p] += 1;
        correct += usize::from(p == y);
    }
    EvalReport {
        accuracy: correct as f64 / labels.len().max(1) as f64,
        confusion,
        predictions,
        queries,
    }
}

/// Graph classification by majority over `votes` independent
/// sample-and-forward passes. Unions are identified over all layer-entry
/// pairs, so the query count per graph is a function of the sampler
/// parameters and `votes` on graphs without isolated vertices.
pub fn evaluate(p: &ModelParams, data: &[(&Graph, usize)], cfg: &EvalConfig) -> Result<EvalReport> {
    p.validate()?;
    if cfg.votes == 0 {
        return invalid_arg("need at least one vote");
    }
    if p.dims.rooted {
        return invalid_arg("graph classification needs an unrooted model");
    }
    let classes = p.dims.outputs;
    if let Some((_, y)) = data.iter().find(|(_, y)| *y >= classes) {
        return invalid_arg(format!("label {y} out of range"));
    }
    let per_graph = data
        .par_iter()
        .enumerate()
        .map(|(i, (g, _))| {
            let graph_seed = stream(cfg.seed, &[i as u64]);
            let mut queries = QueryCounts::default();
            let mut votes = Vec::with_capacity(cfg.votes);
            for v in 0..cfg.votes {
                let mut s = OracleSession::substream(g, graph_seed, v as u64);
                let u = union_sample_with(&mut s, cfg.sampler, PairQueries::AllEntries)?;
                queries += s.query_count();
                let c = weakly_connected_components(&u);
                votes.push(argmax(&forward_trace(p, &u, &c)?.logits));
            }
            Ok((majority(&votes, classes), queries))
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = data.iter().map(|(_, y)| *y).collect();
    let (pred, queries) = per_graph.into_iter().unzip();
    Ok(report(pred, &labels, classes, queries))
}

/// Accuracy on fixed unions, one forward pass each.
pub fn evaluate_prepared(p: &ModelParams, data: &[Prepared]) -> Result<EvalReport> {
    let classes = p.dims.outputs;
    let mut labels = Vec::with_capacity(data.len());
    let mut pred = Vec::with_capacity(data.len());
    for s in data {
        let Target::Class(y) = s.target else {
            return invalid_arg("accuracy needs class targets");
        };
        if y >= classes {
            return invalid_arg(format!("label {y} out of range"));
        }
        labels.push(y);
        pred.push(argmax(&forward_trace(p, &s.union, &s.components)?.logits));
    }
    Ok(report(pred, &labels, classes, Vec::new()))
}
