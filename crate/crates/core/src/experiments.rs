//! Desk-scale experiments producing JSON reports.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::estimators::connectivity_demo;
use crate::exact::{exact_global_clustering, exact_max_degree};
use crate::generators::{add_random_edges, gen_config_regular, gen_er, gen_graphon, GraphonSpec};
use crate::graph::Graph;
use crate::metric::{mc_slack, sampling_distance, wasserstein, DistanceConfig};
use crate::oracle::QueryCounts;
use crate::rbsgnn::{
    evaluate, train, EvalConfig, InputMode, LabeledSample, ModelDims, ModelParams, Source, Target,
    TrainConfig,
};
use crate::sampler::BallParams;
use crate::seed;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// A reported number with the seed and sample count that produced it.
/// Aggregates over seeds have no seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
}

impl Metric {
    pub fn run(name: impl Into<String>, value: f64, seed: u64, samples: u64) -> Self {
        Metric {
            name: name.into(),
            value,
            seed: Some(seed),
            samples: Some(samples),
        }
    }

    pub fn aggregate(name: impl Into<String>, value: f64, samples: u64) -> Self {
        Metric {
            name: name.into(),
            value,
            seed: None,
            samples: Some(samples),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub seed: Option<u64>,
    pub claimed_bound: f64,
    pub observed: f64,
    pub pass: bool,
}

impl BoundCheck {
    /// `observed <= bound`.
    pub fn at_most(name: impl Into<String>, seed: Option<u64>, bound: f64, observed: f64) -> Self {
        BoundCheck {
            name: name.into(),
            seed,
            claimed_bound: bound,
            observed,
            pass: observed <= bound,
        }
    }

    /// `observed >= bound`.
    pub fn at_least(name: impl Into<String>, seed: Option<u64>, bound: f64, observed: f64) -> Self {
        BoundCheck {
            pass: observed >= bound,
            ..BoundCheck::at_most(name, seed, bound, observed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: String,
    pub parameters: serde_json::Value,
    pub seeds: Vec<u64>,
    pub metrics: Vec<Metric>,
    pub bound_checks: Vec<BoundCheck>,
    /// Oracle queries per run, in run order.
    pub queries: Vec<QueryCounts>,
    /// Structured extras such as confusion matrices.
    pub details: serde_json::Value,
}

impl ExperimentReport {
    pub fn new(experiment: &str, parameters: serde_json::Value, seeds: Vec<u64>) -> Self {
        ExperimentReport {
            schema_version: REPORT_SCHEMA_VERSION,
            experiment: experiment.to_string(),
            parameters,
            seeds,
            metrics: Vec::new(),
            bound_checks: Vec::new(),
            queries: Vec::new(),
            details: serde_json::Value::Null,
        }
    }

    pub fn passed(&self) -> bool {
        self.bound_checks.iter().all(|c| c.pass)
    }

    pub fn metric(&self, name: &str, seed: Option<u64>) -> Option<f64> {
        self.metrics
            .iter()
            .find(|m| m.name == name && m.seed == seed)
            .map(|m| m.value)
    }
}

/// Model shape shared by the training experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub hidden: usize,
    pub layers: usize,
    pub g_hidden: usize,
    pub input: InputMode,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            hidden: 16,
            layers: 2,
            g_hidden: 32,
            input: InputMode::DegreeBuckets(vec![1, 2, 3, 4, 6, 8, 12, 16]),
        }
    }
}

impl ModelSpec {
    pub fn init(&self, outputs: usize, seed: u64) -> Result<ModelParams> {
        let dims = ModelDims {
            d_in: self.input.dim(),
            hidden: self.hidden,
            layers: self.layers,
            g_hidden: self.g_hidden,
            outputs,
            rooted: false,
        };
        ModelParams::init(dims, self.input.clone(), seed)
    }
}

/// Binary classification of two Erdos-Renyi densities over a range of sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTaskConfig {
    pub p: [f64; 2],
    pub n_range: (usize, usize),
    pub train: usize,
    pub test: usize,
    pub votes: usize,
    pub model: ModelSpec,
    pub training: TrainConfig,
    pub seed: u64,
}

impl Default for DensityTaskConfig {
    fn default() -> Self {
        DensityTaskConfig {
            p: [0.05, 0.15],
            n_range: (50, 150),
            train: 500,
            test: 200,
            votes: 5,
            model: ModelSpec::default(),
            training: TrainConfig {
                epochs: 30,
                ..TrainConfig::default()
            },
            seed: 0,
        }
    }
}

/// Labeled graphs with alternating classes.
fn density_graphs(
    cfg: &DensityTaskConfig,
    count: usize,
    stream: u64,
) -> Result<Vec<(Graph, usize)>> {
    let (lo, hi) = cfg.n_range;
    let mut rng = seed::stream_rng(cfg.seed, stream);
    (0..count)
        .map(|i| {
            let label = i % 2;
            let n = rng.random_range(lo..=hi);
            Ok((gen_er(n, cfg.p[label], rng.random())?, label))
        })
        .collect()
}

pub fn density_task(cfg: &DensityTaskConfig) -> Result<ExperimentReport> {
    if cfg.n_range.0 > cfg.n_range.1 || cfg.n_range.0 == 0 || cfg.train == 0 || cfg.test == 0 {
        return invalid_arg("need a non-empty size range and non-empty splits");
    }
    let train_set = density_graphs(cfg, cfg.train, 0)?;
    let test_set = density_graphs(cfg, cfg.test, 1)?;
    let samples: Vec<LabeledSample> = train_set
        .iter()
        .map(|(g, y)| LabeledSample {
            source: Source::Graph(g),
            target: Target::Class(*y),
        })
        .collect();
    let training = TrainConfig {
        seed: cfg.seed,
        ..cfg.training.clone()
    };
    let p0 = cfg.model.init(2, seed::derive(cfg.seed, &[3]))?;
    let out = train(&p0, &samples, &training)?;
    let eval = EvalConfig {
        sampler: training.sampler,
        votes: cfg.votes,
        seed: seed::derive(cfg.seed, &[4]),
    };
    let pairs: Vec<(&Graph, usize)> = test_set.iter().map(|(g, y)| (g, *y)).collect();
    let r = evaluate(&out.params, &pairs, &eval)?;
    let mut report =
        ExperimentReport::new("density-task", serde_json::to_value(cfg)?, vec![cfg.seed]);
    report.metrics.push(Metric::run(
        "test_accuracy",
        r.accuracy,
        cfg.seed,
        cfg.test as u64,
    ));
    report.metrics.push(Metric::run(
        "final_train_loss",
        *out.losses.last().unwrap_or(&f64::NAN),
        cfg.seed,
        cfg.train as u64,
    ));
    report.queries = r.queries;
    Ok(report)
}

/// Random graph families with a per-graph parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SizeFamily {
    /// Configuration-model regular graphs; each graph draws its degree
    /// uniformly from `degrees` (inclusive).
    ConfigRegular { degrees: (usize, usize) },
    /// Two equal-block graphons with cross-block probability `p_out`. The
    /// within-block probability of each graph is uniform on `p_in`, or with
    /// `levels = L` the `i`-th graph takes the `(i mod L)`-th of `L` evenly
    /// spaced values spanning `p_in`.
    Graphon {
        p_in: (f64, f64),
        p_out: f64,
        levels: Option<usize>,
    },
}

impl SizeFamily {
    /// The `index`-th graph of a split.
    pub fn sample(&self, n: usize, index: usize, rng: &mut impl Rng) -> Result<Graph> {
        match *self {
            SizeFamily::ConfigRegular { degrees: (lo, hi) } => {
                if lo > hi || hi >= n {
                    return invalid_arg(format!("degree range ({lo}, {hi}) invalid for n = {n}"));
                }
                let mut d = rng.random_range(lo..=hi);
                if (n * d) % 2 == 1 {
                    d = if d < hi { d + 1 } else { d - 1 };
                }
                gen_config_regular(n, d, rng.random())
            }
            SizeFamily::Graphon {
                p_in: (lo, hi),
                p_out,
                levels,
            } => {
                if !(lo <= hi) || levels == Some(0) {
                    return invalid_arg("empty p_in range or zero levels");
                }
                let t = match levels {
                    Some(1) => 0.0,
                    Some(l) => (index % l) as f64 / (l - 1) as f64,
                    None => rng.random::<f64>(),
                };
                let p = lo + (hi - lo) * t;
                gen_graphon(&GraphonSpec::two_block(p, p_out)?, n, rng.random())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizeTarget {
    GlobalClustering,
    MaxDegree,
}

impl SizeTarget {
    pub fn of(self, g: &Graph) -> Result<f64> {
        match self {
            SizeTarget::GlobalClustering => exact_global_clustering(g),
            SizeTarget::MaxDegree => Ok(exact_max_degree(g)? as f64),
        }
    }
}

/// Empirical Wasserstein distance settings for the size experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WassersteinSpec {
    /// Graphs taken from each side.
    pub cap: usize,
    pub r_max: usize,
    pub samples: usize,
}

impl Default for WassersteinSpec {
    fn default() -> Self {
        WassersteinSpec {
            cap: 32,
            r_max: 2,
            samples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeGenConfig {
    pub family: SizeFamily,
    pub target: SizeTarget,
    pub small: (usize, usize),
    pub large: (usize, usize),
    pub classes: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub votes: usize,
    pub model: ModelSpec,
    pub training: TrainConfig,
    pub wasserstein: WassersteinSpec,
    /// Report a bound check `test accuracy >= min_test_accuracy`.
    pub min_test_accuracy: Option<f64>,
    /// Report a bound check `|validation - test accuracy| <= max_gap`.
    pub max_gap: Option<f64>,
    pub seed: u64,
}

impl Default for SizeGenConfig {
    fn default() -> Self {
        SizeGenConfig {
            family: SizeFamily::Graphon {
                p_in: (0.05, 0.95),
                p_out: 0.05,
                levels: Some(5),
            },
            target: SizeTarget::GlobalClustering,
            small: (30, 60),
            large: (300, 600),
            classes: 5,
            train: 500,
            validation: 200,
            test: 100,
            votes: 101,
            model: ModelSpec::default(),
            // Few vertex draws per union keep repeated vertices rare on the
            // small graphs; many votes make up for the small unions.
            training: TrainConfig {
                sampler: BallParams::new(5, 1, 1),
                ..TrainConfig::default()
            },
            wasserstein: WassersteinSpec::default(),
            min_test_accuracy: None,
            max_gap: None,
            seed: 0,
        }
    }
}

/// Boundaries at the `j / classes` quantiles of `values`.
pub fn quantile_boundaries(values: &[f64], classes: usize) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    (1..classes)
        .map(|j| v[(j * v.len() / classes).min(v.len() - 1)])
        .collect()
}

/// Number of boundaries at or below `x`.
pub fn bin_of(boundaries: &[f64], x: f64) -> usize {
    boundaries.partition_point(|&b| b <= x)
}

fn sized_graphs(
    cfg: &SizeGenConfig,
    range: (usize, usize),
    count: usize,
    stream: u64,
) -> Result<Vec<Graph>> {
    let mut rng = seed::stream_rng(cfg.seed, stream);
    (0..count)
        .map(|i| {
            let n = rng.random_range(range.0..=range.1);
            cfg.family.sample(n, i, &mut rng)
        })
        .collect()
}

/// Train on small graphs, validate on held-out small graphs, test on large
/// graphs. Labels are quantile bins of the exact target statistic, with
/// boundaries fitted on the pooled sample of all three splits.
pub fn size_generalization(cfg: &SizeGenConfig) -> Result<ExperimentReport> {
    let (s, l) = (cfg.small, cfg.large);
    if s.0 == 0 || s.0 > s.1 || l.0 > l.1 {
        return invalid_arg("size ranges must be non-empty");
    }
    if s != l && s.1 >= l.0 {
        return invalid_arg(
            "small and large ranges must be identical or disjoint with small below large",
        );
    }
    if cfg.classes < 2 || cfg.train == 0 || cfg.validation == 0 || cfg.test == 0 {
        return invalid_arg("need at least two classes and non-empty splits");
    }
    let train_g = sized_graphs(cfg, s, cfg.train, 0)?;
    let val_g = sized_graphs(cfg, s, cfg.validation, 1)?;
    let test_g = sized_graphs(cfg, l, cfg.test, 2)?;
    let stat = |gs: &[Graph]| {
        gs.iter()
            .map(|g| cfg.target.of(g))
            .collect::<Result<Vec<_>>>()
    };
    let (train_x, val_x, test_x) = (stat(&train_g)?, stat(&val_g)?, stat(&test_g)?);
    let pooled: Vec<f64> = train_x
        .iter()
        .chain(&val_x)
        .chain(&test_x)
        .copied()
        .collect();
    let boundaries = quantile_boundaries(&pooled, cfg.classes);
    let mut class_counts = vec![0u64; cfg.classes];
    for &x in &pooled {
        class_counts[bin_of(&boundaries, x)] += 1;
    }
    if class_counts.iter().filter(|&&c| c > 0).count() < 2 {
        return invalid_arg(format!("degenerate labels: class counts {class_counts:?}"));
    }
    let label = |xs: &[f64]| {
        xs.iter()
            .map(|&x| bin_of(&boundaries, x))
            .collect::<Vec<_>>()
    };
    let (train_y, val_y, test_y) = (label(&train_x), label(&val_x), label(&test_x));

    let samples: Vec<LabeledSample> = train_g
        .iter()
        .zip(&train_y)
        .map(|(g, &y)| LabeledSample {
            source: Source::Graph(g),
            target: Target::Class(y),
        })
        .collect();
    let training = TrainConfig {
        seed: cfg.seed,
        ..cfg.training.clone()
    };
    let p0 = cfg.model.init(cfg.classes, seed::derive(cfg.seed, &[3]))?;
    let out = train(&p0, &samples, &training)?;
    let eval = |gs: &[Graph], ys: &[usize], stream: u64| {
        let pairs: Vec<(&Graph, usize)> = gs.iter().zip(ys.iter().copied()).collect();
        let ec = EvalConfig {
            sampler: training.sampler,
            votes: cfg.votes,
            seed: seed::derive(cfg.seed, &[stream]),
        };
        evaluate(&out.params, &pairs, &ec)
    };
    let val = eval(&val_g, &val_y, 4)?;
    let test = eval(&test_g, &test_y, 5)?;

    let w = cfg.wasserstein;
    let dist = DistanceConfig::new(w.r_max, w.samples);
    let wa = &train_g[..train_g.len().min(w.cap)];
    let wb = &test_g[..test_g.len().min(w.cap)];
    let wd = wasserstein(wa, wb, &dist, seed::derive(cfg.seed, &[6]), w.cap)?;

    let mut report = ExperimentReport::new("sizegen", serde_json::to_value(cfg)?, vec![cfg.seed]);
    let seed = cfg.seed;
    report.metrics.push(Metric::run(
        "validation_accuracy",
        val.accuracy,
        seed,
        cfg.validation as u64,
    ));
    report.metrics.push(Metric::run(
        "test_accuracy",
        test.accuracy,
        seed,
        cfg.test as u64,
    ));
    report.metrics.push(Metric::run(
        "final_train_loss",
        *out.losses.last().unwrap_or(&f64::NAN),
        seed,
        cfg.train as u64,
    ));
    report.metrics.push(Metric::run(
        "wasserstein_small_large",
        wd.value,
        seed,
        w.samples as u64,
    ));
    for (j, b) in boundaries.iter().enumerate() {
        report.metrics.push(Metric::run(
            format!("boundary_{j}"),
            *b,
            seed,
            pooled.len() as u64,
        ));
    }
    for (j, c) in class_counts.iter().enumerate() {
        report.metrics.push(Metric::run(
            format!("class_{j}_count"),
            *c as f64,
            seed,
            pooled.len() as u64,
        ));
    }
    if let Some(min) = cfg.min_test_accuracy {
        report.bound_checks.push(BoundCheck::at_least(
            "test_accuracy",
            Some(seed),
            min,
            test.accuracy,
        ));
    }
    if let Some(gap) = cfg.max_gap {
        let observed = (val.accuracy - test.accuracy).abs();
        report.bound_checks.push(BoundCheck::at_most(
            "validation_test_gap",
            Some(seed),
            gap,
            observed,
        ));
    }
    report.details = serde_json::json!({
        "validation_confusion": val.confusion,
        "test_confusion": test.confusion,
    });
    report.queries = test.queries;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    /// Edges added, as a fraction of the vertex count.
    pub delta: f64,
    pub r_max: usize,
    pub samples: usize,
    pub seeds: Vec<u64>,
}

/// Deterministic bound on the truncated distance implied by the per-level
/// bound `2 r^r delta`: levels up to `s` use `2 s^s delta`, the rest count 1,
/// minimized over `s`.
pub fn perturbation_distance_bound(delta: f64, r_max: usize) -> f64 {
    (0..=r_max)
        .map(|s| {
            let head: f64 = (1..=s).map(|r| 0.5f64.powi(r as i32)).sum();
            let tail: f64 = (s + 1..=r_max).map(|r| 0.5f64.powi(r as i32)).sum();
            2.0 * (s as f64).powi(s as i32) * delta * head + tail
        })
        .fold(f64::INFINITY, f64::min)
}

/// Add `floor(delta n)` random new edges and compare profiles before and
/// after, level by level.
pub fn perturb(g: &Graph, cfg: &PerturbConfig) -> Result<ExperimentReport> {
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return invalid_arg(format!("delta {} outside (0, 1)", cfg.delta));
    }
    if cfg.seeds.is_empty() {
        return invalid_arg("need at least one seed");
    }
    let added = (cfg.delta * g.n() as f64).floor() as usize;
    let dist = DistanceConfig::new(cfg.r_max, cfg.samples);
    let eps = mc_slack(cfg.samples);
    let m = cfg.samples as u64;
    let mut report =
        ExperimentReport::new("perturb", serde_json::to_value(cfg)?, cfg.seeds.clone());
    report.details = serde_json::json!({ "vertices": g.n(), "edges_added": added });
    for &s in &cfg.seeds {
        let h = add_random_edges(g, added, seed::derive(s, &[0]))?;
        let d = sampling_distance(g, &h, &dist, s)?;
        for (i, &tv) in d.per_level_tv.iter().enumerate() {
            let r = i + 1;
            report
                .metrics
                .push(Metric::run(format!("tv_level_{r}"), tv, s, m));
            let bound = 2.0 * (r as f64).powi(r as i32) * cfg.delta + eps;
            report.bound_checks.push(BoundCheck::at_most(
                format!("tv_level_{r}"),
                Some(s),
                bound,
                tv,
            ));
        }
        report.metrics.push(Metric::run("distance", d.value, s, m));
        let bound = perturbation_distance_bound(cfg.delta, cfg.r_max) + eps;
        report
            .bound_checks
            .push(BoundCheck::at_most("distance", Some(s), bound, d.value));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityConfig {
    pub cliques: Vec<usize>,
    pub r_max: usize,
    pub samples: usize,
    pub seeds: Vec<u64>,
    /// Report a bound check on the seed-averaged distance at the last size.
    pub max_last_distance: Option<f64>,
}

/// Bridged against unbridged two-clique graphs over growing clique sizes.
/// Checks that the connectivity gap stays 1 while the seed-averaged
/// distance strictly decreases.
pub fn connectivity(cfg: &ConnectivityConfig) -> Result<ExperimentReport> {
    if cfg.cliques.is_empty() || cfg.seeds.is_empty() {
        return invalid_arg("need at least one clique size and one seed");
    }
    let dist = DistanceConfig::new(cfg.r_max, cfg.samples);
    let m = cfg.samples as u64;
    let mut report = ExperimentReport::new(
        "connectivity",
        serde_json::to_value(cfg)?,
        cfg.seeds.clone(),
    );
    let mut means = Vec::with_capacity(cfg.cliques.len());
    for &n in &cfg.cliques {
        let mut sum = 0.0;
        for &s in &cfg.seeds {
            let r = connectivity_demo(n, &dist, s)?;
            report.metrics.push(Metric::run(
                format!("distance_n{n}"),
                r.distance.value,
                s,
                m,
            ));
            report.bound_checks.push(BoundCheck::at_least(
                format!("parameter_gap_n{n}"),
                Some(s),
                1.0,
                r.parameter_gap,
            ));
            sum += r.distance.value;
        }
        let mean = sum / cfg.seeds.len() as f64;
        report
            .metrics
            .push(Metric::aggregate(format!("mean_distance_n{n}"), mean, m));
        means.push(mean);
    }
    for (w, pair) in means.windows(2).zip(cfg.cliques.windows(2)) {
        report.bound_checks.push(BoundCheck {
            name: format!("decreasing_n{}_n{}", pair[0], pair[1]),
            seed: None,
            claimed_bound: w[0],
            observed: w[1],
            pass: w[1] < w[0],
        });
    }
    if let (Some(max), Some(&last)) = (cfg.max_last_distance, means.last()) {
        report
            .bound_checks
            .push(BoundCheck::at_most("last_mean_distance", None, max, last));
    }
    Ok(report)
}
