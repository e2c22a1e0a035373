//! Random ball sampling.
//!
//! A ball is grown from a root by `r` rounds of neighbor sampling: every entry
//! of the previous layer (duplicates included) draws `b` neighbors with
//! replacement. The union of several balls is then identified with
//! adjacency queries over every ordered pair of distinct sampled vertices and
//! decomposed into weakly connected components.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::graph::VertexId;
use crate::oracle::OracleSession;

/// Ball count `k`, branching factor `b` and radius `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BallParams {
    pub k: usize,
    pub b: usize,
    pub r: usize,
}

impl BallParams {
    pub fn new(k: usize, b: usize, r: usize) -> Self {
        BallParams { k, b, r }
    }

    /// Parameters of the level-`r` profile: `k = b = r`.
    pub fn level(r: usize) -> Self {
        BallParams { k: r, b: r, r }
    }

    /// Upper bound on the number of layer entries of one ball,
    /// `1 + b + ... + b^r`.
    pub fn max_ball_size(&self) -> usize {
        (0..=self.r).map(|i| self.b.pow(i as u32)).sum()
    }

    /// Upper bound on the size of a `balls`-ball union.
    pub fn max_union_size(&self, balls: usize) -> usize {
        balls * self.max_ball_size()
    }

    fn validate(&self) -> Result<()> {
        if self.b == 0 {
            return invalid_arg("branching factor must be at least 1");
        }
        Ok(())
    }
}

/// The induced subgraph on the union of sampled balls, with local indices
/// `[0, m)` assigned in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct BallUnion {
    params: BallParams,
    roots: Vec<VertexId>,
    vertices: Vec<VertexId>,
    adjacency: Vec<bool>,
    feature_dim: Option<usize>,
    features: Vec<f64>,
    layers: Vec<Vec<Vec<VertexId>>>,
    designated_root: Option<usize>,
}

impl BallUnion {
    /// Build a union directly from local data, bypassing any oracle. Vertex
    /// `i` gets original id `i`. `roots` are local indices, one per ball.
    pub fn from_local(
        m: usize,
        edges: &[(usize, usize)],
        roots: &[usize],
        features: Option<(usize, Vec<f64>)>,
    ) -> Result<BallUnion> {
        let mut adjacency = vec![false; m * m];
        for &(u, v) in edges {
            if u >= m || v >= m {
                return invalid_arg(format!("edge ({u}, {v}) out of range"));
            }
            if u != v {
                adjacency[u * m + v] = true;
            }
        }
        if roots.iter().any(|&r| r >= m) {
            return invalid_arg("root out of range");
        }
        let (feature_dim, features) = match features {
            Some((d, data)) if data.len() == d * m => (Some(d), data),
            Some(_) => return Err(crate::Error::Dimension("feature rows != m".into())),
            None => (None, Vec::new()),
        };
        Ok(BallUnion {
            params: BallParams::new(roots.len(), 1, 0),
            roots: roots.iter().map(|&r| VertexId::from(r)).collect(),
            vertices: (0..m).map(VertexId::from).collect(),
            adjacency,
            feature_dim,
            features,
            layers: roots
                .iter()
                .map(|&r| vec![vec![VertexId::from(r)]])
                .collect(),
            designated_root: None,
        })
    }

    /// Same as [`BallUnion::from_local`] with undirected edges.
    pub fn from_local_undirected(
        m: usize,
        edges: &[(usize, usize)],
        roots: &[usize],
    ) -> Result<BallUnion> {
        let sym: Vec<(usize, usize)> = edges.iter().flat_map(|&(u, v)| [(u, v), (v, u)]).collect();
        Self::from_local(m, &sym, roots, None)
    }

    /// Mark local vertex `v` as the designated root of the rooted variant.
    pub fn with_designated_root(mut self, v: usize) -> Result<BallUnion> {
        if v >= self.m() {
            return invalid_arg("designated root out of range");
        }
        self.designated_root = Some(v);
        Ok(self)
    }

    pub fn params(&self) -> BallParams {
        self.params
    }

    /// Number of distinct sampled vertices.
    pub fn m(&self) -> usize {
        self.vertices.len()
    }

    /// Original ids of the ball roots, in ball order.
    pub fn roots(&self) -> &[VertexId] {
        &self.roots
    }

    /// Local indices of the ball roots, in ball order.
    pub fn root_locals(&self) -> Vec<usize> {
        self.roots
            .iter()
            .map(|r| self.local_of(*r).expect("root is sampled"))
            .collect()
    }

    pub fn local_of(&self, v: VertexId) -> Option<usize> {
        self.vertices.iter().position(|&x| x == v)
    }

    /// Original ids, indexed by local index.
    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u * self.m() + v]
    }

    pub fn out_neighbors(&self, u: usize) -> Vec<usize> {
        let m = self.m();
        (0..m).filter(|&v| self.adjacency[u * m + v]).collect()
    }

    pub fn in_neighbors(&self, u: usize) -> Vec<usize> {
        let m = self.m();
        (0..m).filter(|&v| self.adjacency[v * m + u]).collect()
    }

    /// Local arcs `(u, v)`.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        let m = self.m();
        (0..m)
            .flat_map(|u| (0..m).map(move |v| (u, v)))
            .filter(|&(u, v)| self.adjacency[u * m + v])
            .collect()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.feature_dim
    }

    pub fn feature_row(&self, u: usize) -> Option<&[f64]> {
        self.feature_dim.map(|d| &self.features[u * d..(u + 1) * d])
    }

    /// Per ball, the layer multisets of original ids.
    pub fn layers(&self) -> &[Vec<Vec<VertexId>>] {
        &self.layers
    }

    pub fn designated_root(&self) -> Option<usize> {
        self.designated_root
    }

    /// Relabel local indices: vertex `i` moves to position `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<BallUnion> {
        let m = self.m();
        if perm.len() != m {
            return invalid_arg("permutation length differs from m");
        }
        let mut seen = vec![false; m];
        for &p in perm {
            if p >= m || std::mem::replace(&mut seen[p], true) {
                return invalid_arg("not a permutation");
            }
        }
        let mut vertices = vec![VertexId(0); m];
        let mut adjacency = vec![false; m * m];
        let mut features = vec![0.0; self.features.len()];
        for u in 0..m {
            vertices[perm[u]] = self.vertices[u];
            for v in 0..m {
                adjacency[perm[u] * m + perm[v]] = self.adjacency[u * m + v];
            }
            if let Some(d) = self.feature_dim {
                features[perm[u] * d..(perm[u] + 1) * d]
                    .copy_from_slice(&self.features[u * d..(u + 1) * d]);
            }
        }
        Ok(BallUnion {
            params: self.params,
            roots: self.roots.clone(),
            vertices,
            adjacency,
            feature_dim: self.feature_dim,
            features,
            layers: self.layers.clone(),
            designated_root: self.designated_root.map(|r| perm[r]),
        })
    }

    /// Serializable view with local edges.
    pub fn to_json(&self) -> BallUnionJson {
        BallUnionJson {
            params: self.params,
            m: self.m(),
            roots: self.roots.iter().map(|r| r.0).collect(),
            root_locals: self.root_locals(),
            designated_root: self.designated_root,
            vertices: self.vertices.iter().map(|r| r.0).collect(),
            edges: self.arcs(),
            layers: self
                .layers
                .iter()
                .map(|ball| {
                    ball.iter()
                        .map(|l| l.iter().map(|v| v.0).collect())
                        .collect()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallUnionJson {
    pub params: BallParams,
    pub m: usize,
    pub roots: Vec<u32>,
    pub root_locals: Vec<usize>,
    pub designated_root: Option<usize>,
    pub vertices: Vec<u32>,
    pub edges: Vec<(usize, usize)>,
    pub layers: Vec<Vec<Vec<u32>>>,
}

fn sample_layers(
    s: &mut OracleSession<'_>,
    root: Option<VertexId>,
    b: usize,
    r: usize,
) -> Result<Vec<Vec<VertexId>>> {
    let root = match root {
        Some(v) => v,
        None => s.sample_vertex()?,
    };
    let mut layers = Vec::with_capacity(r + 1);
    layers.push(vec![root]);
    for i in 1..=r {
        let mut next = Vec::with_capacity(layers[i - 1].len() * b);
        for j in 0..layers[i - 1].len() {
            let u = layers[i - 1][j];
            for _ in 0..b {
                if let Some(w) = s.sample_neighbor(u)? {
                    next.push(w);
                }
            }
        }
        layers.push(next);
    }
    Ok(layers)
}

/// Which pairs the induced subgraph is identified over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairQueries {
    /// Ordered pairs of distinct sampled vertices: `m(m-1)` queries.
    #[default]
    DistinctVertices,
    /// Ordered pairs of distinct layer entries, duplicates included:
    /// `E(E-1)` queries for `E` entries. The union is the same, but the
    /// count no longer depends on collisions between draws, so it is a
    /// function of `(k, b, r)` alone on graphs without isolated vertices.
    AllEntries,
}

fn assemble(
    s: &mut OracleSession<'_>,
    params: BallParams,
    balls: Vec<Vec<Vec<VertexId>>>,
    designated: bool,
    pairs: PairQueries,
) -> Result<BallUnion> {
    let mut index: HashMap<VertexId, usize> = HashMap::new();
    let mut vertices = Vec::new();
    for v in balls.iter().flatten().flatten() {
        index.entry(*v).or_insert_with(|| {
            vertices.push(*v);
            vertices.len() - 1
        });
    }
    let m = vertices.len();
    let mut adjacency = vec![false; m * m];
    match pairs {
        PairQueries::DistinctVertices => {
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        adjacency[i * m + j] = s.is_adjacent(vertices[i], vertices[j])?;
                    }
                }
            }
        }
        PairQueries::AllEntries => {
            let entries: Vec<usize> = balls.iter().flatten().flatten().map(|v| index[v]).collect();
            for (x, &i) in entries.iter().enumerate() {
                for (y, &j) in entries.iter().enumerate() {
                    if x != y {
                        let a = s.is_adjacent(vertices[i], vertices[j])?;
                        if i != j {
                            adjacency[i * m + j] = a;
                        }
                    }
                }
            }
        }
    }
    let feature_dim = s.feature_dim();
    let features = match feature_dim {
        Some(_) => vertices
            .iter()
            .flat_map(|&v| {
                s.features_of(v)
                    .expect("graph has features")
                    .iter()
                    .copied()
            })
            .collect(),
        None => Vec::new(),
    };
    let roots: Vec<VertexId> = balls.iter().map(|ball| ball[0][0]).collect();
    let designated_root = designated.then_some(0);
    Ok(BallUnion {
        params,
        roots,
        vertices,
        adjacency,
        feature_dim,
        features,
        layers: balls,
        designated_root,
    })
}

/// One random ball of branching `b` and radius `r`.
pub fn random_ball_sample(s: &mut OracleSession<'_>, b: usize, r: usize) -> Result<BallUnion> {
    union_sample(s, BallParams::new(1, b, r))
}

/// Union of `k` independent random balls.
pub fn union_sample(s: &mut OracleSession<'_>, params: BallParams) -> Result<BallUnion> {
    union_sample_with(s, params, PairQueries::DistinctVertices)
}

/// [`union_sample`] with a choice of identification pairs.
pub fn union_sample_with(
    s: &mut OracleSession<'_>,
    params: BallParams,
    pairs: PairQueries,
) -> Result<BallUnion> {
    params.validate()?;
    if params.k == 0 {
        return invalid_arg("ball count must be at least 1");
    }
    let balls = (0..params.k)
        .map(|_| sample_layers(s, None, params.b, params.r))
        .collect::<Result<Vec<_>>>()?;
    assemble(s, params, balls, false, pairs)
}

/// Rooted variant: a ball centered at `root` plus `k` random balls. The root
/// ball comes first in ball order, but the `k` random balls are drawn first,
/// so they coincide with `union_sample` on the same seed.
pub fn rooted_union_sample(
    s: &mut OracleSession<'_>,
    root: VertexId,
    params: BallParams,
) -> Result<BallUnion> {
    rooted_union_sample_with(s, root, params, PairQueries::DistinctVertices)
}

/// [`rooted_union_sample`] with a choice of identification pairs.
pub fn rooted_union_sample_with(
    s: &mut OracleSession<'_>,
    root: VertexId,
    params: BallParams,
    pairs: PairQueries,
) -> Result<BallUnion> {
    params.validate()?;
    if !s.is_vertex(root) {
        return invalid_arg(format!("root {root} is not a vertex"));
    }
    let mut balls = (0..params.k)
        .map(|_| sample_layers(s, None, params.b, params.r))
        .collect::<Result<Vec<_>>>()?;
    balls.insert(0, sample_layers(s, Some(root), params.b, params.r)?);
    assemble(s, params, balls, true, pairs)
}

/// Weakly connected components of a union.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentSet {
    /// Sorted local indices per component, ordered by smallest member.
    pub components: Vec<Vec<usize>>,
    /// Component holding the designated root, if there is one.
    pub root_component: Option<usize>,
}

impl ComponentSet {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

pub fn weakly_connected_components(u: &BallUnion) -> ComponentSet {
    let m = u.m();
    let mut comp = vec![usize::MAX; m];
    let mut components = Vec::new();
    for start in 0..m {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut head = 0;
        while head < members.len() {
            let x = members[head];
            head += 1;
            for y in 0..m {
                if comp[y] == usize::MAX && (u.has_edge(x, y) || u.has_edge(y, x)) {
                    comp[y] = id;
                    members.push(y);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    let root_component = u.designated_root().map(|r| comp[r]);
    ComponentSet {
        components,
        root_component,
    }
}
