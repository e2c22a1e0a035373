//! Constant-time estimators in the random neighborhood model.

use std::collections::HashMap;

use serde::Serialize;

use crate::canonical::{canonicalize, CanonOptions, CanonicalCode};
use crate::error::{invalid_arg, Result};
use crate::exact::is_connected;
use crate::generators::gen_two_cliques;
use crate::metric::{sampling_distance, DistanceConfig, DistanceEstimate};
use crate::oracle::{OracleSession, QueryCounts};
use crate::sampler::{union_sample, BallParams, BallUnion};

pub const DEFAULT_REDRAW_CAP: usize = 16;

/// Mean of `trials` bounded per-trial outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub trials: usize,
    pub queries: QueryCounts,
    /// Standard error of the mean from the sample variance.
    pub stderr_estimate: f64,
}

impl Estimate {
    fn from_sums(sum: f64, sum_sq: f64, trials: usize, queries: QueryCounts) -> Self {
        let t = trials as f64;
        let mean = sum / t;
        let var = if trials > 1 {
            ((sum_sq - t * mean * mean) / (t - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            estimate: mean,
            trials,
            queries,
            stderr_estimate: (var / t).sqrt(),
        }
    }
}

fn require_undirected(s: &OracleSession<'_>, trials: usize) -> Result<()> {
    if trials == 0 {
        return invalid_arg("need at least one trial");
    }
    if s.is_directed() {
        return invalid_arg("estimator is defined for undirected graphs only");
    }
    Ok(())
}

/// Three-vertex triangle sampler. Each trial draws `u`, `v`, `q` uniformly
/// with replacement and always asks all three adjacencies, so exactly
/// `3T` vertex and `3T` adjacency queries are issued.
pub fn triangle_density(s: &mut OracleSession<'_>, trials: usize) -> Result<Estimate> {
    require_undirected(s, trials)?;
    let start = s.query_count();
    let mut hits = 0u64;
    for _ in 0..trials {
        let u = s.sample_vertex()?;
        let v = s.sample_vertex()?;
        let q = s.sample_vertex()?;
        let uv = s.is_adjacent(u, v)?;
        let uq = s.is_adjacent(u, q)?;
        let qv = s.is_adjacent(q, v)?;
        hits += u64::from(uv & uq & qv);
    }
    let h = hits as f64;
    Ok(Estimate::from_sums(
        h,
        h,
        trials,
        delta(s.query_count(), start),
    ))
}

fn delta(now: QueryCounts, start: QueryCounts) -> QueryCounts {
    QueryCounts {
        sample_vertex: now.sample_vertex - start.sample_vertex,
        sample_neighbor: now.sample_neighbor - start.sample_neighbor,
        is_adjacent: now.is_adjacent - start.is_adjacent,
    }
}

/// Average local clustering. Per trial: a uniform vertex `v`, then pairs of
/// neighbor draws until they are distinct, at most `1 + redraw_cap` pairs.
/// An empty draw means `v` is isolated and ends the trial. Trials without
/// two distinct neighbors score 0.
pub fn local_clustering(
    s: &mut OracleSession<'_>,
    trials: usize,
    redraw_cap: usize,
) -> Result<Estimate> {
    require_undirected(s, trials)?;
    let start = s.query_count();
    let mut hits = 0u64;
    for _ in 0..trials {
        let v = s.sample_vertex()?;
        for _ in 0..=redraw_cap {
            let (Some(a), Some(b)) = (s.sample_neighbor(v)?, s.sample_neighbor(v)?) else {
                break;
            };
            if a != b {
                hits += u64::from(s.is_adjacent(a, b)?);
                break;
            }
        }
    }
    let h = hits as f64;
    Ok(Estimate::from_sums(
        h,
        h,
        trials,
        delta(s.query_count(), start),
    ))
}

/// Lookup table from isomorphism classes of sampled unions to values.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalEstimatorTable {
    pub params: BallParams,
    pub canon: CanonOptions,
    entries: HashMap<CanonicalCode, f64>,
    pub default_value: f64,
}

impl CanonicalEstimatorTable {
    pub fn new(params: BallParams, canon: CanonOptions, default_value: f64) -> Self {
        CanonicalEstimatorTable {
            params,
            canon,
            entries: HashMap::new(),
            default_value,
        }
    }

    /// Set the value of the class of `u`.
    pub fn insert_union(&mut self, u: &BallUnion, value: f64) -> Result<CanonicalCode> {
        let code = canonicalize(u, &self.canon)?;
        self.insert(code.clone(), value)?;
        Ok(code)
    }

    pub fn insert(&mut self, code: CanonicalCode, value: f64) -> Result<()> {
        if code.root_mode() != self.canon.root_mode {
            return invalid_arg("code root mode differs from the table's");
        }
        self.entries.insert(code, value);
        Ok(())
    }

    pub fn get(&self, code: &CanonicalCode) -> f64 {
        self.entries
            .get(code)
            .copied()
            .unwrap_or(self.default_value)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One draw of a canonical estimator: sample a union with the table's
/// parameters and look up its class.
pub fn canonical_estimate(
    s: &mut OracleSession<'_>,
    table: &CanonicalEstimatorTable,
) -> Result<f64> {
    let u = union_sample(s, table.params)?;
    let code = canonicalize(&u, &table.canon)?;
    Ok(table.get(&code))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectivityReport {
    pub clique: usize,
    pub connected_bridged: bool,
    pub connected_unbridged: bool,
    /// Difference of the connectivity indicator.
    pub parameter_gap: f64,
    pub distance: DistanceEstimate,
}

/// Two disjoint `N`-cliques with and without a bridge: the connectivity
/// indicator differs by 1 while the sampling distance shrinks with `N`.
pub fn connectivity_demo(
    clique: usize,
    cfg: &DistanceConfig,
    seed: u64,
) -> Result<ConnectivityReport> {
    if clique < 2 {
        return invalid_arg("clique size must be at least 2");
    }
    let bridged = gen_two_cliques(clique, true)?;
    let unbridged = gen_two_cliques(clique, false)?;
    let (a, b) = (is_connected(&bridged), is_connected(&unbridged));
    Ok(ConnectivityReport {
        clique,
        connected_bridged: a,
        connected_unbridged: b,
        parameter_gap: (f64::from(u8::from(a)) - f64::from(u8::from(b))).abs(),
        distance: sampling_distance(&bridged, &unbridged, cfg, seed)?,
    })
}
