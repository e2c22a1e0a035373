//! Immutable CSR graph storage and edge-list I/O.
//!
//! Undirected graphs are stored as symmetric digraphs, so the same adjacency
//! code serves both. Self-loops and parallel edges are never stored.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};

/// Dense vertex index in `[0, n)` of its owning graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub u32);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for VertexId {
    fn from(i: usize) -> Self {
        VertexId(i as u32)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Row-major `n x dim` matrix of vertex features, entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    dim: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return invalid_arg("feature dimension must be positive");
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Dimension(format!(
                "{} feature values are not a multiple of dimension {dim}",
                data.len()
            )));
        }
        if let Some(x) = data.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return invalid_arg(format!("feature value {x} outside [0, 1]"));
        }
        Ok(Features { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Counts of input edges that were discarded while building a graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    directed: bool,
    out_offsets: Vec<usize>,
    out_targets: Vec<u32>,
    in_offsets: Vec<usize>,
    in_targets: Vec<u32>,
    features: Option<Features>,
}

fn build_csr(n: usize, arcs: &[(u32, u32)]) -> (Vec<usize>, Vec<u32>) {
    // `arcs` sorted by (source, target)
    let mut offsets = vec![0usize; n + 1];
    for &(u, _) in arcs {
        offsets[u as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let targets = arcs.iter().map(|&(_, v)| v).collect();
    (offsets, targets)
}

impl Graph {
    /// Build a graph on `n` vertices. Self-loops and duplicates are dropped
    /// and counted; for undirected graphs `(u, v)` and `(v, u)` are the same
    /// edge.
    pub fn from_edges<I>(n: usize, directed: bool, edges: I) -> Result<(Graph, BuildStats)>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n > u32::MAX as usize {
            return invalid_arg("vertex count exceeds u32 range");
        }
        let mut stats = BuildStats::default();
        let mut arcs: Vec<(u32, u32)> = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return invalid_arg(format!("edge ({u}, {v}) out of range for n = {n}"));
            }
            if u == v {
                stats.self_loops_dropped += 1;
                continue;
            }
            let (a, b) = if directed || u < v { (u, v) } else { (v, u) };
            arcs.push((a as u32, b as u32));
        }
        arcs.sort_unstable();
        let before = arcs.len();
        arcs.dedup();
        stats.duplicates_dropped = before - arcs.len();
        if !directed {
            let rev: Vec<(u32, u32)> = arcs.iter().map(|&(a, b)| (b, a)).collect();
            arcs.extend(rev);
            arcs.sort_unstable();
        }
        Ok((Self::from_sorted_arcs(n, directed, arcs), stats))
    }

    fn from_sorted_arcs(n: usize, directed: bool, arcs: Vec<(u32, u32)>) -> Graph {
        let (out_offsets, out_targets) = build_csr(n, &arcs);
        let (in_offsets, in_targets) = if directed {
            let mut rev: Vec<(u32, u32)> = arcs.iter().map(|&(a, b)| (b, a)).collect();
            rev.sort_unstable();
            build_csr(n, &rev)
        } else {
            (out_offsets.clone(), out_targets.clone())
        };
        Graph {
            n,
            directed,
            out_offsets,
            out_targets,
            in_offsets,
            in_targets,
            features: None,
        }
    }

    pub fn empty(n: usize, directed: bool) -> Graph {
        Self::from_sorted_arcs(n, directed, Vec::new())
    }

    /// Attach a feature matrix with one row per vertex.
    pub fn with_features(mut self, features: Features) -> Result<Graph> {
        if features.rows() != self.n {
            return Err(Error::Dimension(format!(
                "{} feature rows for {} vertices",
                features.rows(),
                self.n
            )));
        }
        self.features = Some(features);
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Number of stored arcs; each undirected edge counts twice.
    pub fn arc_count(&self) -> usize {
        self.out_targets.len()
    }

    /// Number of edges: arcs for digraphs, unordered pairs otherwise.
    pub fn edge_count(&self) -> usize {
        if self.directed {
            self.arc_count()
        } else {
            self.arc_count() / 2
        }
    }

    #[inline]
    pub fn out_neighbors(&self, u: usize) -> &[u32] {
        &self.out_targets[self.out_offsets[u]..self.out_offsets[u + 1]]
    }

    #[inline]
    pub fn in_neighbors(&self, u: usize) -> &[u32] {
        &self.in_targets[self.in_offsets[u]..self.in_offsets[u + 1]]
    }

    #[inline]
    pub fn out_degree(&self, u: usize) -> usize {
        self.out_offsets[u + 1] - self.out_offsets[u]
    }

    /// Whether the arc `u -> v` exists. Always false for `u == v`.
    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.out_neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    pub fn features(&self) -> Option<&Features> {
        self.features.as_ref()
    }

    /// Edges in ascending order; undirected edges are reported once as `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.out_neighbors(u)
                .iter()
                .map(move |&v| (u, v as usize))
                .filter(move |&(u, v)| self.directed || u < v)
        })
    }

    /// Relabel vertices: vertex `u` becomes `perm[u]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(Error::Dimension(format!(
                "permutation of length {} for {} vertices",
                perm.len(),
                self.n
            )));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut seen[p], true) {
                return invalid_arg("not a permutation");
            }
        }
        let (mut g, _) = Graph::from_edges(
            self.n,
            self.directed,
            self.edges().map(|(u, v)| (perm[u], perm[v])),
        )?;
        if let Some(f) = &self.features {
            let mut data = vec![0.0; f.data.len()];
            for (u, &p) in perm.iter().enumerate() {
                data[p * f.dim..(p + 1) * f.dim].copy_from_slice(f.row(u));
            }
            g.features = Some(Features { dim: f.dim, data });
        }
        Ok(g)
    }

    /// A copy of this graph with extra edges. Existing edges and loops among
    /// `extra` are dropped and counted.
    pub fn with_added_edges(&self, extra: &[(usize, usize)]) -> Result<(Graph, BuildStats)> {
        let (mut g, stats) = Graph::from_edges(
            self.n,
            self.directed,
            self.edges().chain(extra.iter().copied()),
        )?;
        g.features = self.features.clone();
        Ok((g, stats))
    }

    /// Write as an edge list. Isolated vertices are written as single-id lines
    /// so that the vertex count survives a round trip.
    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(
            w,
            "# {} graph: {} vertices, {} edges",
            if self.directed {
                "directed"
            } else {
                "undirected"
            },
            self.n,
            self.edge_count()
        )?;
        for u in 0..self.n {
            if self.out_degree(u) == 0 && self.in_neighbors(u).is_empty() {
                writeln!(w, "{u}")?;
            }
        }
        for (u, v) in self.edges() {
            writeln!(w, "{u} {v}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_features(&self, path: impl AsRef<Path>) -> Result<()> {
        let Some(f) = &self.features else {
            return invalid_arg("graph has no features");
        };
        let mut w = BufWriter::new(File::create(path)?);
        for i in 0..f.rows() {
            let row: Vec<String> = f.row(i).iter().map(|x| format!("{x}")).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Outcome of [`load_edge_list`].
#[derive(Debug, Clone, Serialize)]
pub struct LoadReport {
    pub vertices: usize,
    pub edges: usize,
    #[serde(flatten)]
    pub dropped: BuildStats,
    /// Original id of each dense vertex index.
    #[serde(skip)]
    pub original_ids: Vec<u64>,
}

/// Read a whitespace-separated `u v` edge list. `#` starts a comment, and a
/// line holding a single id declares a (possibly isolated) vertex. Ids are
/// compacted to `[0, n)` in ascending numeric order.
pub fn load_edge_list(
    path: impl AsRef<Path>,
    directed: bool,
    features_path: Option<&Path>,
) -> Result<(Graph, LoadReport)> {
    let reader = BufReader::new(File::open(path)?);
    let mut ids: BTreeMap<u64, usize> = BTreeMap::new();
    let mut raw: Vec<(u64, u64)> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parse = |tok: &str| {
            tok.parse::<u64>().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("invalid vertex id {tok:?}"),
            })
        };
        let toks: Vec<&str> = content.split_whitespace().collect();
        match toks.as_slice() {
            [u] => {
                ids.insert(parse(u)?, 0);
            }
            [u, v] => {
                let (u, v) = (parse(u)?, parse(v)?);
                ids.insert(u, 0);
                ids.insert(v, 0);
                raw.push((u, v));
            }
            _ => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected \"u v\", found {content:?}"),
                })
            }
        }
    }
    let original_ids: Vec<u64> = ids.keys().copied().collect();
    for (i, slot) in ids.values_mut().enumerate() {
        *slot = i;
    }
    let n = original_ids.len();
    let (mut g, stats) = Graph::from_edges(n, directed, raw.iter().map(|(u, v)| (ids[u], ids[v])))?;
    if let Some(fp) = features_path {
        g = g.with_features(load_features(fp)?)?;
    }
    let report = LoadReport {
        vertices: n,
        edges: g.edge_count(),
        dropped: stats,
        original_ids,
    };
    Ok((g, report))
}

/// One row of space-separated reals in `[0, 1]` per vertex.
pub fn load_features(path: impl AsRef<Path>) -> Result<Features> {
    let reader = BufReader::new(File::open(path)?);
    let mut dim = None;
    let mut data = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let row = content
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("invalid feature value {t:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::Dimension(format!(
                    "line {}: {} values, expected {d}",
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        data.extend(row);
    }
    Features::new(dim.unwrap_or(1), data)
}
