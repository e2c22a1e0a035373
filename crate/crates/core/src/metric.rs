//! Empirical profiles, total variation, the truncated sampling distance and
//! the Wasserstein distance between finite families of graphs.
//!
//! Draw `i` of a profile at level `r` runs on ChaCha substream `i` of
//! `derive(seed, [r])`, whatever the graph. Two profiles built with the same
//! seed therefore use common random numbers. This leaves each histogram an
//! ordinary empirical distribution and keeps the plug-in TV biased upwards
//! (by convexity), but removes most of the sampling noise when the two graphs
//! share vertex ids.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonical::{canonicalize, CanonOptions, CanonicalCode, RootMode};
use crate::error::{invalid_arg, Error, Result};
use crate::graph::Graph;
use crate::oracle::{OracleSession, QueryCounts};
use crate::sampler::{union_sample, BallParams};
use crate::seed;
use crate::transport::{uniform_transport, TransportPlan};

pub const PROFILE_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_R_MAX: usize = 3;
pub const DEFAULT_SUPPORT_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileConfig {
    pub level: usize,
    pub params: BallParams,
    pub samples: usize,
    pub canon: CanonOptions,
}

impl ProfileConfig {
    /// Level-`r` profile with `k = b = radius = r`.
    pub fn level(r: usize, samples: usize) -> Self {
        ProfileConfig {
            level: r,
            params: BallParams::level(r),
            samples,
            canon: CanonOptions::default(),
        }
    }

    pub fn with_params(mut self, params: BallParams) -> Self {
        self.params = params;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.level == 0 {
            return invalid_arg("profile level must be at least 1");
        }
        if self.samples == 0 {
            return invalid_arg("profile needs at least one sample");
        }
        Ok(())
    }
}

/// Histogram of canonical classes of `samples` independent ball unions.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    config: ProfileConfig,
    histogram: HashMap<CanonicalCode, u64>,
    queries: QueryCounts,
}

impl Profile {
    pub fn config(&self) -> &ProfileConfig {
        &self.config
    }

    pub fn level(&self) -> usize {
        self.config.level
    }

    pub fn samples(&self) -> u64 {
        self.config.samples as u64
    }

    pub fn count(&self, code: &CanonicalCode) -> u64 {
        self.histogram.get(code).copied().unwrap_or(0)
    }

    pub fn frequency(&self, code: &CanonicalCode) -> f64 {
        self.count(code) as f64 / self.samples() as f64
    }

    pub fn class_count(&self) -> usize {
        self.histogram.len()
    }

    pub fn histogram(&self) -> &HashMap<CanonicalCode, u64> {
        &self.histogram
    }

    /// Oracle queries spent building the profile.
    pub fn queries(&self) -> QueryCounts {
        self.queries
    }

    /// Entries by decreasing count, ties by certificate.
    pub fn sorted_entries(&self) -> Vec<(&CanonicalCode, u64)> {
        let mut v: Vec<_> = self.histogram.iter().map(|(c, &n)| (c, n)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    pub fn to_json(&self) -> ProfileJson {
        ProfileJson {
            schema_version: PROFILE_SCHEMA_VERSION,
            level: self.config.level,
            params: self.config.params,
            samples: self.config.samples,
            root_mode: self.config.canon.root_mode,
            feature_step: self.config.canon.feature_step,
            queries: self.queries,
            classes: self
                .sorted_entries()
                .into_iter()
                .map(|(c, count)| ClassJson {
                    vertices: c.vertex_count(),
                    count,
                    frequency: count as f64 / self.samples() as f64,
                    digest: format!("{:032x}", c.digest()),
                    certificate: c.to_hex(),
                })
                .collect(),
        }
    }

    pub fn from_json(j: &ProfileJson) -> Result<Profile> {
        if j.schema_version != PROFILE_SCHEMA_VERSION {
            return invalid_arg(format!("unsupported profile schema {}", j.schema_version));
        }
        let mut histogram = HashMap::new();
        for c in &j.classes {
            let code = CanonicalCode::from_hex(&c.certificate)?;
            if code.root_mode() != j.root_mode {
                return invalid_arg("class root mode differs from profile");
            }
            *histogram.entry(code).or_insert(0) += c.count;
        }
        if histogram.values().sum::<u64>() != j.samples as u64 {
            return invalid_arg("class counts do not sum to the sample count");
        }
        let canon = CanonOptions {
            root_mode: j.root_mode,
            feature_step: j.feature_step,
            ..CanonOptions::default()
        };
        Ok(Profile {
            config: ProfileConfig {
                level: j.level,
                params: j.params,
                samples: j.samples,
                canon,
            },
            histogram,
            queries: j.queries,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassJson {
    pub vertices: usize,
    pub count: u64,
    pub frequency: f64,
    pub digest: String,
    pub certificate: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileJson {
    pub schema_version: u32,
    pub level: usize,
    pub params: BallParams,
    pub samples: usize,
    pub root_mode: RootMode,
    pub feature_step: f64,
    pub queries: QueryCounts,
    pub classes: Vec<ClassJson>,
}

/// Seed of the level-`r` profile inside a distance computation.
pub fn level_seed(seed: u64, r: usize) -> u64 {
    seed::derive(seed, &[r as u64])
}

/// Empirical profile of `g`: draw `i` uses substream `i` of `seed`.
pub fn estimate_profile(g: &Graph, cfg: &ProfileConfig, seed: u64) -> Result<Profile> {
    cfg.validate()?;
    let draw = |i: u64| -> Result<(CanonicalCode, QueryCounts)> {
        let mut s = OracleSession::substream(g, seed, i);
        let u = union_sample(&mut s, cfg.params)?;
        let code = canonicalize(&u, &cfg.canon).map_err(|e| match e {
            Error::Timeout { budget, .. } => Error::Timeout {
                budget,
                seed: Some(seed),
                stream: Some(i),
            },
            other => other,
        })?;
        Ok((code, s.query_count()))
    };
    type Acc = (HashMap<CanonicalCode, u64>, QueryCounts);
    let (histogram, queries) = (0..cfg.samples as u64)
        .into_par_iter()
        .map(draw)
        .try_fold(
            || (HashMap::new(), QueryCounts::default()),
            |mut acc: Acc, r| {
                let (code, q) = r?;
                *acc.0.entry(code).or_insert(0) += 1;
                acc.1 += q;
                Ok::<Acc, Error>(acc)
            },
        )
        .try_reduce(
            || (HashMap::new(), QueryCounts::default()),
            |mut a, b| {
                for (code, n) in b.0 {
                    *a.0.entry(code).or_insert(0) += n;
                }
                a.1 += b.1;
                Ok(a)
            },
        )?;
    Ok(Profile {
        config: *cfg,
        histogram,
        queries,
    })
}

/// Plug-in total variation between two empirical profiles.
pub fn tv_distance(p: &Profile, q: &Profile) -> Result<f64> {
    let (a, b) = (&p.config, &q.config);
    if a.level != b.level
        || a.params != b.params
        || a.canon.root_mode != b.canon.root_mode
        || a.canon.feature_step != b.canon.feature_step
    {
        return invalid_arg("profiles were built with different parameters");
    }
    let (mp, mq) = (p.samples() as f64, q.samples() as f64);
    // sorted so the floating-point sum does not depend on hash order
    let codes: BTreeSet<&CanonicalCode> = p.histogram.keys().chain(q.histogram.keys()).collect();
    let sum: f64 = codes
        .into_iter()
        .map(|c| (p.count(c) as f64 / mp - q.count(c) as f64 / mq).abs())
        .sum();
    Ok((0.5 * sum).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceConfig {
    pub r_max: usize,
    pub samples: usize,
    pub canon: CanonOptions,
}

impl DistanceConfig {
    pub fn new(r_max: usize, samples: usize) -> Self {
        DistanceConfig {
            r_max,
            samples,
            canon: CanonOptions::default(),
        }
    }

    fn profile(&self, r: usize) -> ProfileConfig {
        ProfileConfig {
            canon: self.canon,
            ..ProfileConfig::level(r, self.samples)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.r_max == 0 {
            return invalid_arg("r_max must be at least 1");
        }
        if self.samples == 0 {
            return invalid_arg("need at least one sample per level");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub value: f64,
    pub r_max: usize,
    /// `per_level_tv[r - 1]` is the TV at level `r`.
    pub per_level_tv: Vec<f64>,
    pub tail_bound: f64,
    pub samples: usize,
}

impl DistanceEstimate {
    fn from_levels(per_level_tv: Vec<f64>, samples: usize) -> Self {
        let value = per_level_tv
            .iter()
            .enumerate()
            .map(|(i, tv)| tv / f64::powi(2.0, i as i32 + 1))
            .sum();
        DistanceEstimate {
            value,
            r_max: per_level_tv.len(),
            tail_bound: f64::powi(2.0, -(per_level_tv.len() as i32)),
            per_level_tv,
            samples,
        }
    }
}

/// Monte Carlo slack `1/sqrt(M)` allowed on top of deterministic bounds
/// checked against empirical distances.
pub fn mc_slack(samples: usize) -> f64 {
    1.0 / (samples as f64).sqrt()
}

/// Profiles of one graph at levels `1..=r_max`.
pub fn level_profiles(g: &Graph, cfg: &DistanceConfig, seed: u64) -> Result<Vec<Profile>> {
    cfg.validate()?;
    (1..=cfg.r_max)
        .map(|r| estimate_profile(g, &cfg.profile(r), level_seed(seed, r)))
        .collect()
}

/// Truncated sampling distance between two lists of level profiles.
pub fn distance_from_profiles(a: &[Profile], b: &[Profile]) -> Result<DistanceEstimate> {
    if a.len() != b.len() || a.is_empty() {
        return invalid_arg("profile lists must be non-empty and of equal length");
    }
    let tvs = a
        .iter()
        .zip(b)
        .map(|(p, q)| tv_distance(p, q))
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceEstimate::from_levels(tvs, a[0].config.samples))
}

/// Empirical sampling distance `sum_r 2^-r TV(z_r(g), z_r(h))`, truncated at
/// `r_max`.
pub fn sampling_distance(
    g: &Graph,
    h: &Graph,
    cfg: &DistanceConfig,
    seed: u64,
) -> Result<DistanceEstimate> {
    let a = level_profiles(g, cfg, seed)?;
    let b = level_profiles(h, cfg, seed)?;
    distance_from_profiles(&a, &b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WassersteinResult {
    pub value: f64,
    /// Pairwise truncated sampling distances.
    pub cost: Vec<Vec<f64>>,
    pub plan: TransportPlan,
}

/// Wasserstein distance between the uniform measures on `a` and `b` with the
/// sampling distance as ground cost.
pub fn wasserstein(
    a: &[Graph],
    b: &[Graph],
    cfg: &DistanceConfig,
    seed: u64,
    cap: usize,
) -> Result<WassersteinResult> {
    for side in [a.len(), b.len()] {
        if side > cap {
            return Err(Error::TooLarge { size: side, cap });
        }
        if side == 0 {
            return invalid_arg("empty graph family");
        }
    }
    let pa = a
        .iter()
        .map(|g| level_profiles(g, cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    let pb = b
        .iter()
        .map(|g| level_profiles(g, cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    let cost = pa
        .iter()
        .map(|x| {
            pb.iter()
                .map(|y| distance_from_profiles(x, y).map(|d| d.value))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let plan = uniform_transport(&cost)?;
    Ok(WassersteinResult {
        value: plan.cost,
        cost,
        plan,
    })
}
