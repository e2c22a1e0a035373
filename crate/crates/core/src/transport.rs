//! Exact optimal transport between two uniform discrete measures.
//!
//! Equal supports reduce to an assignment problem (Birkhoff), solved with the
//! Hungarian algorithm. Otherwise masses are scaled to integers by
//! `L = lcm(|a|, |b|)` and the transportation problem is solved as a
//! min-cost flow by successive shortest paths.

use crate::error::{invalid_arg, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// Optimal expected cost.
    pub cost: f64,
    /// `(i, j, mass)` triples with positive mass; masses sum to 1.
    pub flows: Vec<(usize, usize, f64)>,
}

fn validate(cost: &[Vec<f64>]) -> Result<(usize, usize)> {
    let n = cost.len();
    if n == 0 {
        return invalid_arg("empty source support");
    }
    let m = cost[0].len();
    if m == 0 {
        return invalid_arg("empty target support");
    }
    if cost.iter().any(|row| row.len() != m) {
        return Err(crate::Error::Dimension("ragged cost matrix".into()));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return invalid_arg("non-finite cost");
    }
    Ok((n, m))
}

/// Minimum-cost perfect assignment of a square matrix: `(total, assignment)`
/// with `assignment[i]` the column of row `i`.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<(f64, Vec<usize>)> {
    let (n, m) = validate(cost)?;
    if n != m {
        return invalid_arg("assignment needs a square matrix");
    }
    // 1-based potentials formulation
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| cost[i][assignment[i]]).sum();
    Ok((total, assignment))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

struct Edge {
    to: usize,
    cap: usize,
    cost: f64,
}

/// Optimal transport between the uniform measures on the rows and on the
/// columns of `cost`.
pub fn uniform_transport(cost: &[Vec<f64>]) -> Result<TransportPlan> {
    let (n, m) = validate(cost)?;
    if n == m {
        let (total, assignment) = hungarian(cost)?;
        return Ok(TransportPlan {
            cost: total / n as f64,
            flows: assignment
                .iter()
                .enumerate()
                .map(|(i, &j)| (i, j, 1.0 / n as f64))
                .collect(),
        });
    }
    let l = n / gcd(n, m) * m;
    let (supply, demand) = (l / n, l / m);
    // nodes: source, rows, columns, sink
    let (src, sink) = (0, n + m + 1);
    let mut edges: Vec<Edge> = Vec::new();
    let mut graph: Vec<Vec<usize>> = vec![Vec::new(); n + m + 2];
    let mut add = |edges: &mut Vec<Edge>, a: usize, b: usize, cap: usize, c: f64| {
        graph[a].push(edges.len());
        edges.push(Edge {
            to: b,
            cap,
            cost: c,
        });
        graph[b].push(edges.len());
        edges.push(Edge {
            to: a,
            cap: 0,
            cost: -c,
        });
    };
    for i in 0..n {
        add(&mut edges, src, 1 + i, supply, 0.0);
        for j in 0..m {
            add(&mut edges, 1 + i, 1 + n + j, l, cost[i][j]);
        }
    }
    for j in 0..m {
        add(&mut edges, 1 + n + j, sink, demand, 0.0);
    }

    let nodes = n + m + 2;
    let mut sent = 0;
    let mut total = 0.0;
    while sent < l {
        // Bellman-Ford over the residual graph
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev = vec![usize::MAX; nodes];
        dist[src] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for a in 0..nodes {
                if dist[a].is_infinite() {
                    continue;
                }
                for &e in &graph[a] {
                    let ed = &edges[e];
                    if ed.cap > 0 && dist[a] + ed.cost < dist[ed.to] - 1e-12 {
                        dist[ed.to] = dist[a] + ed.cost;
                        prev[ed.to] = e;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink].is_infinite() {
            return Err(crate::Error::InvalidState(
                "transport network disconnected".into(),
            ));
        }
        let mut push = l - sent;
        let mut x = sink;
        while x != src {
            let e = prev[x];
            push = push.min(edges[e].cap);
            x = edges[e ^ 1].to;
        }
        let mut x = sink;
        while x != src {
            let e = prev[x];
            edges[e].cap -= push;
            edges[e ^ 1].cap += push;
            total += push as f64 * edges[e].cost;
            x = edges[e ^ 1].to;
        }
        sent += push;
    }
    let mut flows = Vec::new();
    for i in 0..n {
        for &e in &graph[1 + i] {
            let to = edges[e].to;
            // forward row -> column edges sit at even indices
            if e % 2 == 0 && (1 + n..1 + n + m).contains(&to) {
                let used = l - edges[e].cap;
                if used > 0 {
                    flows.push((i, to - 1 - n, used as f64 / l as f64));
                }
            }
        }
    }
    Ok(TransportPlan {
        cost: total / l as f64,
        flows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_free() {
        let c = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let plan = uniform_transport(&c).unwrap();
        assert_eq!(plan.cost, 0.0);
        assert_eq!(plan.flows, vec![(0, 0, 0.5), (1, 1, 0.5)]);
    }

    #[test]
    fn single_pair() {
        let plan = uniform_transport(&[vec![0.37]]).unwrap();
        assert_eq!(plan.cost, 0.37);
    }

    #[test]
    fn one_to_many_averages() {
        let c = vec![vec![1.0, 2.0, 6.0]];
        let plan = uniform_transport(&c).unwrap();
        assert!((plan.cost - 3.0).abs() < 1e-12);
        let c = vec![vec![1.0], vec![2.0], vec![6.0]];
        assert!((uniform_transport(&c).unwrap().cost - 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_by_four_hand_checked() {
        // row 0 is close to columns 0,1; row 1 to columns 2,3
        let c = vec![vec![0.0, 0.0, 1.0, 1.0], vec![1.0, 1.0, 0.0, 0.5]];
        let plan = uniform_transport(&c).unwrap();
        assert!((plan.cost - 0.125).abs() < 1e-12);
        let mass: f64 = plan.flows.iter().map(|f| f.2).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(uniform_transport(&[]).is_err());
        assert!(uniform_transport(&[vec![1.0], vec![]]).is_err());
        assert!(uniform_transport(&[vec![f64::NAN]]).is_err());
        assert!(hungarian(&[vec![1.0, 2.0]]).is_err());
    }
}
