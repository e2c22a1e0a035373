//! Exact graph statistics with full graph access. These are the reference
//! values that the constant-time estimators are validated against, and the
//! label functions of the experiments.

use crate::error::{invalid_arg, Result};
use crate::graph::Graph;

fn require_undirected(g: &Graph) -> Result<()> {
    if g.is_directed() {
        return invalid_arg("statistic is defined for undirected graphs only");
    }
    Ok(())
}

/// Number of triangles, each counted once.
pub fn triangle_count(g: &Graph) -> Result<u64> {
    require_undirected(g)?;
    let mut count = 0u64;
    for u in 0..g.n() {
        let nu = g.out_neighbors(u);
        for &v in nu.iter().filter(|&&v| v as usize > u) {
            // |N(u) ∩ N(v)| restricted to w > v, by sorted merge
            let nv = g.out_neighbors(v as usize);
            let (mut i, mut j) = (0, 0);
            while i < nu.len() && j < nv.len() {
                match nu[i].cmp(&nv[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        if nu[i] > v {
                            count += 1;
                        }
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
    }
    Ok(count)
}

/// Expected value of one trial of the three-vertex triangle sampler: the
/// probability that three independent uniform vertices (with replacement)
/// are pairwise adjacent, `6 * triangles / n^3`.
pub fn exact_triangle_statistic(g: &Graph) -> Result<f64> {
    let t = triangle_count(g)?;
    if g.n() == 0 {
        return Ok(0.0);
    }
    let n = g.n() as f64;
    Ok(6.0 * t as f64 / (n * n * n))
}

/// Local clustering coefficient of every vertex; degree < 2 gives 0.
pub fn local_clustering_coefficients(g: &Graph) -> Result<Vec<f64>> {
    require_undirected(g)?;
    Ok((0..g.n())
        .map(|v| {
            let nb = g.out_neighbors(v);
            let d = nb.len();
            if d < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    if g.has_edge(a as usize, b as usize) {
                        links += 1;
                    }
                }
            }
            links as f64 / (d * (d - 1) / 2) as f64
        })
        .collect())
}

/// Average local clustering coefficient.
pub fn exact_local_clustering(g: &Graph) -> Result<f64> {
    let c = local_clustering_coefficients(g)?;
    if c.is_empty() {
        return Ok(0.0);
    }
    Ok(c.iter().sum::<f64>() / c.len() as f64)
}

/// Global clustering (transitivity): `3 * triangles / connected triples`.
pub fn exact_global_clustering(g: &Graph) -> Result<f64> {
    let t = triangle_count(g)?;
    let triples: u64 = (0..g.n())
        .map(|v| {
            let d = g.out_degree(v) as u64;
            d * d.saturating_sub(1) / 2
        })
        .sum();
    if triples == 0 {
        return Ok(0.0);
    }
    Ok(3.0 * t as f64 / triples as f64)
}

pub fn exact_max_degree(g: &Graph) -> Result<usize> {
    require_undirected(g)?;
    Ok((0..g.n()).map(|v| g.out_degree(v)).max().unwrap_or(0))
}

/// Whether the graph is (weakly) connected. The empty graph counts as
/// connected.
pub fn is_connected(g: &Graph) -> bool {
    if g.n() == 0 {
        return true;
    }
    let mut seen = vec![false; g.n()];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut reached = 1;
    while let Some(u) = stack.pop() {
        for &v in g.out_neighbors(u).iter().chain(g.in_neighbors(u)) {
            let v = v as usize;
            if !seen[v] {
                seen[v] = true;
                reached += 1;
                stack.push(v);
            }
        }
    }
    reached == g.n()
}
