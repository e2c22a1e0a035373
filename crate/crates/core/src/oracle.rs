//! The random neighborhood model.
//!
//! An [`OracleSession`] is the only way the sampler and the estimators see a
//! graph: uniform vertex sampling, uniform out-neighbor sampling and
//! adjacency tests. Every call is counted, and an optional budget caps the
//! total number of calls.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::seed;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCounts {
    pub sample_vertex: u64,
    pub sample_neighbor: u64,
    pub is_adjacent: u64,
}

impl QueryCounts {
    pub fn total(&self) -> u64 {
        self.sample_vertex + self.sample_neighbor + self.is_adjacent
    }
}

impl std::ops::AddAssign for QueryCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.sample_vertex += rhs.sample_vertex;
        self.sample_neighbor += rhs.sample_neighbor;
        self.is_adjacent += rhs.is_adjacent;
    }
}

/// Seeded, counted access to one graph. Single owner; run many sessions over
/// a shared `&Graph` for parallel work.
pub struct OracleSession<'g> {
    graph: &'g Graph,
    rng: ChaCha8Rng,
    counts: QueryCounts,
    budget: Option<u64>,
    seed: u64,
    stream: u64,
}

impl<'g> OracleSession<'g> {
    pub fn new(graph: &'g Graph, seed: u64) -> Self {
        Self::substream(graph, seed, 0)
    }

    /// Session on ChaCha substream `stream` of `seed`; distinct streams are
    /// independent.
    pub fn substream(graph: &'g Graph, seed: u64, stream: u64) -> Self {
        OracleSession {
            graph,
            rng: seed::stream_rng(seed, stream),
            counts: QueryCounts::default(),
            budget: None,
            seed,
            stream,
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn is_directed(&self) -> bool {
        self.graph.is_directed()
    }

    /// Validity check for externally supplied vertices (rooted sampling).
    pub(crate) fn is_vertex(&self, v: VertexId) -> bool {
        v.index() < self.graph.n()
    }

    /// Feature dimension of the underlying graph, if it carries features.
    pub fn feature_dim(&self) -> Option<usize> {
        self.graph.features().map(|f| f.dim())
    }

    /// Feature row of an obtained vertex. Features travel with the vertex, so
    /// reading them is not a query.
    pub fn features_of(&self, u: VertexId) -> Option<&'g [f64]> {
        self.graph.features().map(|f| f.row(u.index()))
    }

    fn charge(&mut self) -> Result<()> {
        if let Some(b) = self.budget {
            if self.counts.total() >= b {
                return Err(Error::BudgetExceeded { budget: b });
            }
        }
        Ok(())
    }

    /// Uniform random vertex.
    pub fn sample_vertex(&mut self) -> Result<VertexId> {
        if self.graph.n() == 0 {
            return Err(Error::InvalidState(
                "cannot sample from an empty graph".into(),
            ));
        }
        self.charge()?;
        self.counts.sample_vertex += 1;
        Ok(VertexId(self.rng.random_range(0..self.graph.n() as u32)))
    }

    /// Uniform random out-neighbor of `u`, or `None` when `u` has none.
    pub fn sample_neighbor(&mut self, u: VertexId) -> Result<Option<VertexId>> {
        self.charge()?;
        self.counts.sample_neighbor += 1;
        let nb = self.graph.out_neighbors(u.index());
        if nb.is_empty() {
            return Ok(None);
        }
        Ok(Some(VertexId(nb[self.rng.random_range(0..nb.len())])))
    }

    /// Whether the arc `u -> v` exists; `is_adjacent(u, u)` is false.
    pub fn is_adjacent(&mut self, u: VertexId, v: VertexId) -> Result<bool> {
        self.charge()?;
        self.counts.is_adjacent += 1;
        Ok(self.graph.has_edge(u.index(), v.index()))
    }

    pub fn query_count(&self) -> QueryCounts {
        self.counts
    }
}
