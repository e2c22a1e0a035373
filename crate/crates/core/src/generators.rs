//! Synthetic graph generators. All are bitwise reproducible for a fixed seed.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::graph::Graph;
use crate::seed;

/// Erdős–Rényi `G(n, p)`: every unordered pair is an edge independently with
/// probability `p`.
///
/// Uses geometric skipping over the pair sequence, so the cost is linear in
/// the number of vertices plus edges.
pub fn gen_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return invalid_arg(format!("edge probability {p} outside [0, 1]"));
    }
    let mut edges = Vec::new();
    if p >= 1.0 {
        for v in 1..n {
            edges.extend((0..v).map(|w| (v, w)));
        }
    } else if p > 0.0 {
        let mut rng = seed::rng(seed);
        let log_q = (1.0 - p).ln();
        let (mut v, mut w): (usize, i64) = (1, -1);
        while v < n {
            let r: f64 = rng.random();
            let skip = ((1.0 - r).ln() / log_q).floor();
            w += 1 + if skip.is_finite() {
                skip.min(1e15) as i64
            } else {
                i64::MAX / 4
            };
            while v < n && w >= v as i64 {
                w -= v as i64;
                v += 1;
            }
            if v < n {
                edges.push((v, w as usize));
            }
        }
    }
    Ok(Graph::from_edges(n, false, edges)?.0)
}

/// Configuration model for `d`-regular graphs: `d` half-edges per vertex are
/// paired uniformly at random, then loops and parallel edges are deleted,
/// leaving a near-regular simple graph.
pub fn gen_config_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    if (n * d) % 2 == 1 {
        return invalid_arg(format!("n * d = {} is odd", n * d));
    }
    if d >= n {
        return invalid_arg(format!("degree {d} must be below vertex count {n}"));
    }
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    stubs.shuffle(&mut seed::rng(seed));
    let edges = stubs.chunks_exact(2).map(|c| (c[0], c[1]));
    Ok(Graph::from_edges(n, false, edges)?.0)
}

/// Piecewise-constant graphon on an `m x m` grid of edge probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphonSpec {
    grid: Vec<Vec<f64>>,
}

impl GraphonSpec {
    pub fn new(grid: Vec<Vec<f64>>) -> Result<Self> {
        let m = grid.len();
        if m == 0 {
            return invalid_arg("graphon grid is empty");
        }
        for (i, row) in grid.iter().enumerate() {
            if row.len() != m {
                return invalid_arg("graphon grid must be square");
            }
            for (j, &x) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&x) {
                    return invalid_arg(format!("grid entry {x} outside [0, 1]"));
                }
                if x != grid[j][i] {
                    return invalid_arg("graphon grid must be symmetric");
                }
            }
        }
        Ok(GraphonSpec { grid })
    }

    pub fn constant(p: f64) -> Result<Self> {
        Self::new(vec![vec![p]])
    }

    /// Two equal blocks with within-block probability `p_in` and cross-block
    /// probability `p_out`.
    pub fn two_block(p_in: f64, p_out: f64) -> Result<Self> {
        Self::new(vec![vec![p_in, p_out], vec![p_out, p_in]])
    }

    pub fn blocks(&self) -> usize {
        self.grid.len()
    }

    /// Block containing latent position `x` in `[0, 1]`.
    pub fn block_of(&self, x: f64) -> usize {
        ((x * self.blocks() as f64) as usize).min(self.blocks() - 1)
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.grid[self.block_of(x)][self.block_of(y)]
    }
}

/// Sample a graph from a graphon, returning the latent positions as well.
pub fn gen_graphon_latent(spec: &GraphonSpec, n: usize, seed: u64) -> Result<(Graph, Vec<f64>)> {
    let mut rng = seed::rng(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < spec.value(xs[i], xs[j]) {
                edges.push((i, j));
            }
        }
    }
    Ok((Graph::from_edges(n, false, edges)?.0, xs))
}

pub fn gen_graphon(spec: &GraphonSpec, n: usize, seed: u64) -> Result<Graph> {
    Ok(gen_graphon_latent(spec, n, seed)?.0)
}

/// Two disjoint cliques `K_N` on `[0, N)` and `[N, 2N)`; when `bridged`, the
/// extra edge `(N - 1, N)` joins them.
pub fn gen_two_cliques(clique: usize, bridged: bool) -> Result<Graph> {
    if clique < 2 {
        return invalid_arg("clique size must be at least 2");
    }
    let mut edges = Vec::with_capacity(clique * (clique - 1) + 1);
    for base in [0, clique] {
        for u in 0..clique {
            for v in u + 1..clique {
                edges.push((base + u, base + v));
            }
        }
    }
    if bridged {
        edges.push((clique - 1, clique));
    }
    Ok(Graph::from_edges(2 * clique, false, edges)?.0)
}

pub fn complete(n: usize) -> Graph {
    let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
    Graph::from_edges(n, false, edges).expect("valid edges").0
}

/// Path on `n` vertices `0 - 1 - ... - (n-1)`.
pub fn path(n: usize) -> Graph {
    Graph::from_edges(n, false, (1..n).map(|v| (v - 1, v)))
        .expect("valid edges")
        .0
}

pub fn cycle(n: usize) -> Graph {
    Graph::from_edges(n, false, (0..n).map(|v| (v, (v + 1) % n)))
        .expect("valid edges")
        .0
}

/// Star with center 0 and `leaves` leaves.
pub fn star(leaves: usize) -> Graph {
    Graph::from_edges(leaves + 1, false, (1..=leaves).map(|v| (0, v)))
        .expect("valid edges")
        .0
}

/// Add `count` uniformly random new edges (no loops, no existing edges, no
/// repeats), by rejection sampling over vertex pairs.
pub fn add_random_edges(g: &Graph, count: usize, seed: u64) -> Result<Graph> {
    let n = g.n();
    let pairs = if g.is_directed() {
        n * n.saturating_sub(1)
    } else {
        n * n.saturating_sub(1) / 2
    };
    if count > pairs - g.edge_count() {
        return invalid_arg(format!("cannot add {count} new edges"));
    }
    let mut rng = seed::rng(seed);
    let mut chosen: HashSet<(usize, usize)> = HashSet::with_capacity(count);
    let mut added = Vec::with_capacity(count);
    while added.len() < count {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v || g.has_edge(u, v) {
            continue;
        }
        let key = if g.is_directed() || u < v {
            (u, v)
        } else {
            (v, u)
        };
        if chosen.insert(key) {
            added.push(key);
        }
    }
    Ok(g.with_added_edges(&added)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_extremes() {
        assert_eq!(gen_er(10, 0.0, 3).unwrap().edge_count(), 0);
        assert_eq!(gen_er(10, 1.0, 3).unwrap().edge_count(), 45);
        assert!(gen_er(10, 1.5, 3).is_err());
    }

    #[test]
    fn er_mean_degree_concentrates() {
        // Binomial(999, 0.01) mean degree 9.99; the average over 1000
        // vertices is far tighter than [8, 12].
        for s in 0..5 {
            let g = gen_er(1000, 0.01, s).unwrap();
            let mean = 2.0 * g.edge_count() as f64 / 1000.0;
            assert!((8.0..=12.0).contains(&mean), "mean degree {mean}");
        }
    }

    #[test]
    fn er_pair_frequency_is_uniform() {
        // Every pair of a 6-vertex graph should appear w.p. 0.3.
        let mut hits = [[0u32; 6]; 6];
        let trials = 4000;
        for s in 0..trials {
            for (u, v) in gen_er(6, 0.3, s).unwrap().edges() {
                hits[u][v] += 1;
            }
        }
        let sd = (0.3f64 * 0.7 / trials as f64).sqrt();
        for u in 0..6 {
            for v in u + 1..6 {
                let f = hits[u][v] as f64 / trials as f64;
                assert!((f - 0.3).abs() < 4.0 * sd, "pair ({u},{v}) freq {f}");
            }
        }
    }

    #[test]
    fn config_regular_small_and_errors() {
        let g = gen_config_regular(4, 2, 1).unwrap();
        assert_eq!(g.n(), 4);
        assert!((0..4).all(|v| g.out_degree(v) <= 2));
        assert!(gen_config_regular(3, 3, 1).is_err());
        assert!(gen_config_regular(5, 3, 1).is_err());
    }

    #[test]
    fn config_regular_is_nearly_regular() {
        for s in 0..3 {
            let g = gen_config_regular(1000, 3, s).unwrap();
            let exact = (0..1000).filter(|&v| g.out_degree(v) == 3).count();
            assert!(exact >= 990, "{exact} vertices of degree 3");
        }
    }

    #[test]
    fn graphon_blocks_without_cross_edges() {
        let spec = GraphonSpec::two_block(0.5, 0.0).unwrap();
        let (g, xs) = gen_graphon_latent(&spec, 200, 9).unwrap();
        assert!(g.edge_count() > 0);
        for (u, v) in g.edges() {
            assert_eq!(spec.block_of(xs[u]), spec.block_of(xs[v]));
        }
    }

    #[test]
    fn graphon_cross_block_fraction() {
        let spec = GraphonSpec::two_block(0.3, 0.05).unwrap();
        let (g, xs) = gen_graphon_latent(&spec, 400, 4).unwrap();
        let side: Vec<usize> = xs.iter().map(|&x| spec.block_of(x)).collect();
        let a = side.iter().filter(|&&s| s == 0).count();
        let cross_pairs = (a * (400 - a)) as f64;
        let cross_edges = g.edges().filter(|&(u, v)| side[u] != side[v]).count() as f64;
        let sd = (cross_pairs * 0.05 * 0.95).sqrt();
        assert!((cross_edges - 0.05 * cross_pairs).abs() <= 3.0 * sd);
    }

    #[test]
    fn constant_graphon_matches_er_density() {
        let spec = GraphonSpec::constant(0.2).unwrap();
        let mut a = 0usize;
        let mut b = 0usize;
        for s in 0..20 {
            a += gen_graphon(&spec, 60, s).unwrap().edge_count();
            b += gen_er(60, 0.2, s + 1000).unwrap().edge_count();
        }
        // 20 * 1770 pairs each; sd of the difference is about 2 * sqrt(5664)
        let diff = a as f64 - b as f64;
        assert!(diff.abs() < 4.0 * (2.0 * 20.0 * 1770.0 * 0.16f64).sqrt());
    }

    #[test]
    fn graphon_spec_validation() {
        assert!(GraphonSpec::new(vec![vec![0.1, 0.2], vec![0.3, 0.1]]).is_err());
        assert!(GraphonSpec::new(vec![vec![0.1, 0.2]]).is_err());
        assert!(GraphonSpec::new(vec![vec![1.2]]).is_err());
    }

    #[test]
    fn two_cliques_counts() {
        let g = gen_two_cliques(2, false).unwrap();
        assert_eq!((g.n(), g.edge_count()), (4, 2));
        assert_eq!(gen_two_cliques(6, true).unwrap().edge_count(), 31);
        let a = gen_two_cliques(50, false).unwrap().edge_count();
        let b = gen_two_cliques(50, true).unwrap().edge_count();
        assert_eq!(b - a, 1);
        assert!(gen_two_cliques(1, true).is_err());
    }

    #[test]
    fn generators_are_reproducible() {
        assert_eq!(
            gen_er(300, 0.05, 11).unwrap(),
            gen_er(300, 0.05, 11).unwrap()
        );
        assert_eq!(
            gen_config_regular(100, 4, 2).unwrap(),
            gen_config_regular(100, 4, 2).unwrap()
        );
        let spec = GraphonSpec::two_block(0.4, 0.1).unwrap();
        assert_eq!(
            gen_graphon(&spec, 80, 5).unwrap(),
            gen_graphon(&spec, 80, 5).unwrap()
        );
    }

    #[test]
    fn added_edges_are_new() {
        let g = gen_er(100, 0.05, 1).unwrap();
        let h = add_random_edges(&g, 20, 2).unwrap();
        assert_eq!(h.edge_count(), g.edge_count() + 20);
        assert!(g.edges().all(|(u, v)| h.has_edge(u, v)));
        assert!(add_random_edges(&complete(4), 1, 0).is_err());
    }
}
