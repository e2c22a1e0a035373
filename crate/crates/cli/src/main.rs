use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use rbs_core::canonical::CanonOptions;
use rbs_core::estimators::{local_clustering, triangle_density, DEFAULT_REDRAW_CAP};
use rbs_core::exact::{exact_local_clustering, exact_triangle_statistic};
use rbs_core::experiments::{
    connectivity, density_task, perturb, size_generalization, ConnectivityConfig,
    DensityTaskConfig, ExperimentReport, ModelSpec, PerturbConfig, SizeFamily, SizeGenConfig,
    SizeTarget,
};
use rbs_core::generators::{
    complete, cycle, gen_config_regular, gen_er, gen_graphon, gen_two_cliques, path, star,
    GraphonSpec,
};
use rbs_core::graph::load_edge_list;
use rbs_core::metric::{
    estimate_profile, sampling_distance, wasserstein, DistanceConfig, ProfileConfig,
};
use rbs_core::oracle::OracleSession;
use rbs_core::rbsgnn::{
    evaluate, load_checkpoint, save_checkpoint, train, EvalConfig, InputMode, LabeledSample,
    Source, Target, TrainConfig,
};
use rbs_core::sampler::{rooted_union_sample, union_sample, BallParams};
use rbs_core::{Error, Graph, VertexId};

const SCHEMA_VERSION: u32 = 1;

/// Constant-time graph sampling, sampling distances and RBS-GNN models.
#[derive(Parser, Debug)]
#[command(name = "rbs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic graph as an edge list.
    Gen(GenArgs),
    /// Draw one ball union from a graph.
    Sample(SampleArgs),
    /// Estimate the profile of a graph at one level.
    Profile(ProfileArgs),
    /// Estimate the sampling distance between two graphs.
    Distance(DistanceArgs),
    /// Wasserstein distance between two graph families.
    Wasserstein(WassersteinArgs),
    /// Constant-time estimators.
    Estimate(EstimateArgs),
    /// Train a model on a labeled dataset manifest.
    Train(TrainArgs),
    /// Evaluate a model on a labeled dataset manifest.
    Eval(EvalArgs),
    /// Compare a graph with a randomly perturbed copy.
    Perturb(PerturbArgs),
    /// Train on small graphs and test on large ones.
    Sizegen(SizegenArgs),
    /// Bridged against unbridged two-clique graphs.
    Connectivity(ConnectivityArgs),
    /// Classify two Erdos-Renyi densities over a size range.
    DensityTask(DensityTaskArgs),
}

#[derive(Args, Debug, Clone)]
struct SeedArg {
    #[arg(long, env = "RBS_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Clone)]
struct GraphArg {
    /// Edge-list file.
    #[arg(long)]
    graph: PathBuf,
    /// Treat edges as directed arcs.
    #[arg(long)]
    directed: bool,
    /// Optional vertex feature file, one row per vertex.
    #[arg(long)]
    features: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Copy)]
struct BallArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 5)]
    b: usize,
    #[arg(long, default_value_t = 2)]
    r: usize,
}

impl BallArgs {
    fn params(self) -> BallParams {
        BallParams::new(self.k, self.b, self.r)
    }
}

#[derive(Args, Debug, Clone)]
struct GenArgs {
    #[command(subcommand)]
    family: GenFamily,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, env = "RBS_SEED", default_value_t = 0, global = true)]
    seed: u64,
}

#[derive(Subcommand, Debug, Clone)]
enum GenFamily {
    Er {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
    },
    Regular {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
    },
    /// Two equal-block graphon.
    Graphon {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p_in: f64,
        #[arg(long)]
        p_out: f64,
    },
    TwoCliques {
        #[arg(long)]
        clique: usize,
        #[arg(long)]
        bridged: bool,
    },
    Complete {
        #[arg(long)]
        n: usize,
    },
    Path {
        #[arg(long)]
        n: usize,
    },
    Cycle {
        #[arg(long)]
        n: usize,
    },
    Star {
        #[arg(long)]
        leaves: usize,
    },
}

#[derive(Args, Debug, Clone)]
struct SampleArgs {
    #[command(flatten)]
    graph: GraphArg,
    #[command(flatten)]
    ball: BallArgs,
    /// Sample a rooted union around this vertex index.
    #[arg(long)]
    root: Option<u32>,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args, Debug, Clone)]
struct CanonArgs {
    /// Forget which vertices are roots.
    #[arg(long)]
    unrooted: bool,
    #[arg(long, default_value_t = rbs_core::canonical::DEFAULT_FEATURE_STEP)]
    feature_step: f64,
}

impl CanonArgs {
    fn options(&self) -> CanonOptions {
        let base = if self.unrooted {
            CanonOptions::unrooted()
        } else {
            CanonOptions::default()
        };
        CanonOptions {
            feature_step: self.feature_step,
            ..base
        }
    }
}

#[derive(Args, Debug, Clone)]
struct ProfileArgs {
    #[command(flatten)]
    graph: GraphArg,
    /// Level; `k`, `b` and the radius default to it.
    #[arg(long)]
    r: usize,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[command(flatten)]
    canon: CanonArgs,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args, Debug, Clone)]
struct DistanceArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    directed: bool,
    #[arg(long, default_value_t = 3)]
    rmax: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[command(flatten)]
    canon: CanonArgs,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args, Debug, Clone)]
struct WassersteinArgs {
    /// Edge-list files of the first family.
    #[arg(long, num_args = 1.., required = true)]
    a: Vec<PathBuf>,
    /// Edge-list files of the second family.
    #[arg(long, num_args = 1.., required = true)]
    b: Vec<PathBuf>,
    #[arg(long)]
    directed: bool,
    #[arg(long, default_value_t = 3)]
    rmax: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = rbs_core::metric::DEFAULT_SUPPORT_CAP)]
    cap: usize,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args, Debug, Clone)]
struct EstimateArgs {
    #[arg(value_enum)]
    statistic: Statistic,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Neighbor-pair redraws per clustering trial.
    #[arg(long, default_value_t = DEFAULT_REDRAW_CAP)]
    redraw_cap: usize,
    /// Stop with an error after this many oracle queries.
    #[arg(long)]
    budget: Option<u64>,
    /// Also compute the exact value with full graph access.
    #[arg(long)]
    exact: bool,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Statistic {
    Triangle,
    Clustering,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 32)]
    g_hidden: usize,
    /// Degree bucket boundaries, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 6, 8, 12, 16])]
    buckets: Vec<usize>,
    /// Use the constant input 1 instead of degree buckets.
    #[arg(long)]
    constant_input: bool,
}

impl ModelArgs {
    fn spec(&self) -> ModelSpec {
        ModelSpec {
            hidden: self.hidden,
            layers: self.layers,
            g_hidden: self.g_hidden,
            input: if self.constant_input {
                InputMode::ConstantOne
            } else {
                InputMode::DegreeBuckets(self.buckets.clone())
            },
        }
    }
}

#[derive(Args, Debug, Clone)]
struct OptimArgs {
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 1e-3)]
    weight_decay: f64,
    #[arg(long, default_value_t = 50)]
    lr_step: usize,
    #[arg(long, default_value_t = 0.5)]
    lr_gamma: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long)]
    no_standardize: bool,
}

impl OptimArgs {
    fn config(&self, sampler: BallParams, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            lr_step: self.lr_step,
            lr_gamma: self.lr_gamma,
            epochs: self.epochs,
            batch_size: self.batch,
            seed,
            sampler,
            standardize: !self.no_standardize,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct TrainArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    ball: BallArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    optim: OptimArgs,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args, Debug, Clone)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    ball: BallArgs,
    #[arg(long, default_value_t = 5)]
    votes: usize,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args, Debug, Clone)]
struct PerturbArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 3)]
    rmax: usize,
    #[arg(long, default_value_t = 5000)]
    samples: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2])]
    seeds: Vec<u64>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FamilyArg {
    ConfigRegular,
    Graphon,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum TargetArg {
    GlobalClustering,
    MaxDegree,
}

#[derive(Args, Debug, Clone)]
struct SizegenArgs {
    #[arg(long, value_enum, default_value_t = FamilyArg::Graphon)]
    family: FamilyArg,
    #[arg(long, value_enum, default_value_t = TargetArg::GlobalClustering)]
    target: TargetArg,
    /// Smallest and largest vertex count of the training graphs.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [30, 60])]
    small: Vec<usize>,
    /// Smallest and largest vertex count of the test graphs.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [300, 600])]
    large: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    classes: usize,
    #[arg(long, default_value_t = 500)]
    train: usize,
    #[arg(long, default_value_t = 200)]
    validation: usize,
    #[arg(long, default_value_t = 100)]
    test: usize,
    #[arg(long, default_value_t = 101)]
    votes: usize,
    /// Within-block edge probability range of the graphon family.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.05, 0.95])]
    p_in: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    p_out: f64,
    /// Distinct within-block probabilities; 0 draws them uniformly.
    #[arg(long, default_value_t = 5)]
    levels: usize,
    /// Degree range of the configuration-model family.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [3, 12])]
    degrees: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    b: usize,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    optim: OptimArgs,
    /// Graphs per side in the Wasserstein comparison.
    #[arg(long, default_value_t = 32)]
    w_cap: usize,
    #[arg(long, default_value_t = 2)]
    w_rmax: usize,
    #[arg(long, default_value_t = 200)]
    w_samples: usize,
    /// Fail (exit 3) when test accuracy falls below this.
    #[arg(long)]
    min_accuracy: Option<f64>,
    /// Fail (exit 3) when validation and test accuracy differ by more.
    #[arg(long)]
    max_gap: Option<f64>,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args, Debug, Clone)]
struct ConnectivityArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [20, 80, 320])]
    cliques: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    rmax: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5])]
    seeds: Vec<u64>,
    /// Fail (exit 3) when the averaged distance at the last size exceeds this.
    #[arg(long)]
    max_last_distance: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct DensityTaskArgs {
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.05, 0.15])]
    p: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [50, 150])]
    n: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    train: usize,
    #[arg(long, default_value_t = 200)]
    test: usize,
    #[arg(long, default_value_t = 5)]
    votes: usize,
    #[command(flatten)]
    ball: BallArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    optim: OptimArgs,
    /// Fail (exit 3) when test accuracy falls below this.
    #[arg(long)]
    min_accuracy: Option<f64>,
    #[command(flatten)]
    seed: SeedArg,
}

/// One labeled graph of a dataset manifest. Relative paths are resolved
/// against the manifest's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestEntry {
    path: PathBuf,
    label: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    #[serde(default)]
    directed: bool,
    graphs: Vec<ManifestEntry>,
}

#[derive(Debug)]
enum Failure {
    Runtime(Error),
    Bounds,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn emit(command: &str, result: impl Serialize) -> CmdResult {
    let out = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "result": result,
    });
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{}", serde_json::to_string_pretty(&out)?) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit_report(command: &str, report: &ExperimentReport) -> CmdResult {
    emit(command, report)?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Bounds)
    }
}

fn load(path: &Path, directed: bool, features: Option<&Path>) -> Result<Graph, Error> {
    Ok(load_edge_list(path, directed, features)?.0)
}

fn load_manifest(path: &Path) -> Result<(Vec<Graph>, Vec<usize>), Failure> {
    let m: Manifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut graphs = Vec::with_capacity(m.graphs.len());
    let mut labels = Vec::with_capacity(m.graphs.len());
    for e in &m.graphs {
        graphs.push(load(&dir.join(&e.path), m.directed, None)?);
        labels.push(e.label);
    }
    if graphs.is_empty() {
        return Err(Error::InvalidArgument("empty dataset manifest".into()).into());
    }
    Ok((graphs, labels))
}

fn cmd_gen(a: &GenArgs) -> CmdResult {
    let seed = a.seed;
    let g = match a.family {
        GenFamily::Er { n, p } => gen_er(n, p, seed)?,
        GenFamily::Regular { n, d } => gen_config_regular(n, d, seed)?,
        GenFamily::Graphon { n, p_in, p_out } => {
            gen_graphon(&GraphonSpec::two_block(p_in, p_out)?, n, seed)?
        }
        GenFamily::TwoCliques { clique, bridged } => gen_two_cliques(clique, bridged)?,
        GenFamily::Complete { n } => complete(n),
        GenFamily::Path { n } => path(n),
        GenFamily::Cycle { n } => cycle(n),
        GenFamily::Star { leaves } => star(leaves),
    };
    let Some(out) = &a.out else {
        return Err(Error::InvalidArgument("--out is required".into()).into());
    };
    g.write_edge_list(out)?;
    emit(
        "gen",
        serde_json::json!({ "vertices": g.n(), "edges": g.edge_count(), "seed": seed }),
    )
}

fn cmd_sample(a: &SampleArgs) -> CmdResult {
    let g = load(
        &a.graph.graph,
        a.graph.directed,
        a.graph.features.as_deref(),
    )?;
    let mut s = OracleSession::new(&g, a.seed.seed);
    let u = match a.root {
        Some(v) => rooted_union_sample(&mut s, VertexId(v), a.ball.params())?,
        None => union_sample(&mut s, a.ball.params())?,
    };
    emit(
        "sample",
        serde_json::json!({ "union": u.to_json(), "queries": s.query_count(), "seed": a.seed.seed }),
    )
}

fn cmd_profile(a: &ProfileArgs) -> CmdResult {
    let g = load(
        &a.graph.graph,
        a.graph.directed,
        a.graph.features.as_deref(),
    )?;
    let params = BallParams::new(a.k.unwrap_or(a.r), a.b.unwrap_or(a.r), a.r);
    let cfg = ProfileConfig {
        canon: a.canon.options(),
        ..ProfileConfig::level(a.r, a.samples).with_params(params)
    };
    let p = estimate_profile(&g, &cfg, a.seed.seed)?;
    emit(
        "profile",
        serde_json::json!({ "profile": p.to_json(), "seed": a.seed.seed }),
    )
}

fn cmd_distance(a: &DistanceArgs) -> CmdResult {
    let g = load(&a.a, a.directed, None)?;
    let h = load(&a.b, a.directed, None)?;
    let cfg = DistanceConfig {
        canon: a.canon.options(),
        ..DistanceConfig::new(a.rmax, a.samples)
    };
    let d = sampling_distance(&g, &h, &cfg, a.seed.seed)?;
    emit(
        "distance",
        serde_json::json!({ "distance": d, "seed": a.seed.seed }),
    )
}

fn cmd_wasserstein(a: &WassersteinArgs) -> CmdResult {
    let side = |paths: &[PathBuf]| {
        paths
            .iter()
            .map(|p| load(p, a.directed, None))
            .collect::<Result<Vec<_>, _>>()
    };
    let (ga, gb) = (side(&a.a)?, side(&a.b)?);
    let w = wasserstein(
        &ga,
        &gb,
        &DistanceConfig::new(a.rmax, a.samples),
        a.seed.seed,
        a.cap,
    )?;
    emit(
        "wasserstein",
        serde_json::json!({
            "value": w.value,
            "cost": w.cost,
            "flows": w.plan.flows,
            "samples": a.samples,
            "seed": a.seed.seed,
        }),
    )
}

fn cmd_estimate(a: &EstimateArgs) -> CmdResult {
    let g = load(&a.graph, false, None)?;
    let mut s = OracleSession::new(&g, a.seed.seed);
    if let Some(budget) = a.budget {
        s = s.with_budget(budget);
    }
    let (name, e, exact) = match a.statistic {
        Statistic::Triangle => (
            "triangle",
            triangle_density(&mut s, a.trials)?,
            a.exact.then(|| exact_triangle_statistic(&g)).transpose()?,
        ),
        Statistic::Clustering => (
            "clustering",
            local_clustering(&mut s, a.trials, a.redraw_cap)?,
            a.exact.then(|| exact_local_clustering(&g)).transpose()?,
        ),
    };
    emit(
        "estimate",
        serde_json::json!({ "statistic": name, "estimate": e, "exact": exact, "seed": a.seed.seed }),
    )
}

fn cmd_train(a: &TrainArgs) -> CmdResult {
    let (graphs, labels) = load_manifest(&a.data)?;
    let classes = labels.iter().max().map_or(0, |m| m + 1).max(2);
    let data: Vec<LabeledSample> = graphs
        .iter()
        .zip(&labels)
        .map(|(g, &y)| LabeledSample {
            source: Source::Graph(g),
            target: Target::Class(y),
        })
        .collect();
    let cfg = a.optim.config(a.ball.params(), a.seed.seed);
    let p0 = a.model.spec().init(classes, a.seed.seed)?;
    let out = train(&p0, &data, &cfg)?;
    save_checkpoint(&out.params, &a.out)?;
    emit(
        "train",
        serde_json::json!({
            "classes": classes,
            "graphs": graphs.len(),
            "parameters": out.params.len(),
            "losses": out.losses,
            "config": cfg,
            "seed": a.seed.seed,
        }),
    )
}

fn cmd_eval(a: &EvalArgs) -> CmdResult {
    let p = load_checkpoint(&a.model)?;
    let (graphs, labels) = load_manifest(&a.data)?;
    let pairs: Vec<(&Graph, usize)> = graphs.iter().zip(labels).collect();
    let cfg = EvalConfig {
        sampler: a.ball.params(),
        votes: a.votes,
        seed: a.seed.seed,
    };
    let r = evaluate(&p, &pairs, &cfg)?;
    emit(
        "eval",
        serde_json::json!({ "report": r, "seed": a.seed.seed }),
    )
}

fn cmd_perturb(a: &PerturbArgs) -> CmdResult {
    let g = load(&a.graph, false, None)?;
    let cfg = PerturbConfig {
        delta: a.delta,
        r_max: a.rmax,
        samples: a.samples,
        seeds: a.seeds.clone(),
    };
    emit_report("perturb", &perturb(&g, &cfg)?)
}

fn cmd_sizegen(a: &SizegenArgs) -> CmdResult {
    let family = match a.family {
        FamilyArg::Graphon => SizeFamily::Graphon {
            p_in: (a.p_in[0], a.p_in[1]),
            p_out: a.p_out,
            levels: (a.levels > 0).then_some(a.levels),
        },
        FamilyArg::ConfigRegular => SizeFamily::ConfigRegular {
            degrees: (a.degrees[0], a.degrees[1]),
        },
    };
    let sampler = BallParams::new(a.k, a.b, a.r);
    let cfg = SizeGenConfig {
        family,
        target: match a.target {
            TargetArg::GlobalClustering => SizeTarget::GlobalClustering,
            TargetArg::MaxDegree => SizeTarget::MaxDegree,
        },
        small: (a.small[0], a.small[1]),
        large: (a.large[0], a.large[1]),
        classes: a.classes,
        train: a.train,
        validation: a.validation,
        test: a.test,
        votes: a.votes,
        model: a.model.spec(),
        training: a.optim.config(sampler, a.seed.seed),
        wasserstein: rbs_core::experiments::WassersteinSpec {
            cap: a.w_cap,
            r_max: a.w_rmax,
            samples: a.w_samples,
        },
        min_test_accuracy: a.min_accuracy,
        max_gap: a.max_gap,
        seed: a.seed.seed,
    };
    emit_report("sizegen", &size_generalization(&cfg)?)
}

fn cmd_connectivity(a: &ConnectivityArgs) -> CmdResult {
    let cfg = ConnectivityConfig {
        cliques: a.cliques.clone(),
        r_max: a.rmax,
        samples: a.samples,
        seeds: a.seeds.clone(),
        max_last_distance: a.max_last_distance,
    };
    emit_report("connectivity", &connectivity(&cfg)?)
}

fn cmd_density_task(a: &DensityTaskArgs) -> CmdResult {
    let cfg = DensityTaskConfig {
        p: [a.p[0], a.p[1]],
        n_range: (a.n[0], a.n[1]),
        train: a.train,
        test: a.test,
        votes: a.votes,
        model: a.model.spec(),
        training: a.optim.config(a.ball.params(), a.seed.seed),
        seed: a.seed.seed,
    };
    let mut report = density_task(&cfg)?;
    if let Some(min) = a.min_accuracy {
        let acc = report
            .metric("test_accuracy", Some(a.seed.seed))
            .unwrap_or(f64::NAN);
        report
            .bound_checks
            .push(rbs_core::experiments::BoundCheck::at_least(
                "test_accuracy",
                Some(a.seed.seed),
                min,
                acc,
            ));
    }
    emit_report("density-task", &report)
}

fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Profile(a) => cmd_profile(a),
        Command::Distance(a) => cmd_distance(a),
        Command::Wasserstein(a) => cmd_wasserstein(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Perturb(a) => cmd_perturb(a),
        Command::Sizegen(a) => cmd_sizegen(a),
        Command::Connectivity(a) => cmd_connectivity(a),
        Command::DensityTask(a) => cmd_density_task(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Bounds) => {
            eprintln!("error: one or more bound checks failed");
            ExitCode::from(3)
        }
        Err(Failure::Runtime(Error::InvalidArgument(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
