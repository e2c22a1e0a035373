use proptest::prelude::*;
use rbs_core::canonical::CanonOptions;
use rbs_core::estimators::{
    canonical_estimate, local_clustering, triangle_density, CanonicalEstimatorTable,
    DEFAULT_REDRAW_CAP,
};
use rbs_core::exact::exact_triangle_statistic;
use rbs_core::generators::{complete, cycle, gen_er, star};
use rbs_core::oracle::OracleSession;
use rbs_core::sampler::{union_sample, BallParams, BallUnion};
use rbs_core::Graph;

/// Mean of the triangle trial over all `n^3` ordered triples.
fn triple_mean(g: &Graph) -> f64 {
    let n = g.n();
    let mut hits = 0u64;
    for u in 0..n {
        for v in 0..n {
            for q in 0..n {
                hits += u64::from(g.has_edge(u, v) && g.has_edge(u, q) && g.has_edge(q, v));
            }
        }
    }
    hits as f64 / (n * n * n) as f64
}

/// Exact mean of one clustering trial. From a vertex of degree `d`, a pair
/// of draws is distinct with probability `1 - 1/d`, so some pair succeeds
/// within `cap + 1` attempts with probability `1 - d^-(cap+1)`; the
/// successful pair is uniform over ordered pairs of distinct neighbors.
fn clustering_trial_mean(g: &Graph, cap: usize) -> f64 {
    let n = g.n();
    let mut total = 0.0;
    for v in 0..n {
        let nb = g.out_neighbors(v);
        let d = nb.len();
        if d < 2 {
            continue;
        }
        let mut closed = 0;
        for &a in nb {
            for &b in nb {
                if a != b && g.has_edge(a as usize, b as usize) {
                    closed += 1;
                }
            }
        }
        let success = 1.0 - (d as f64).powi(-(cap as i32 + 1));
        total += success * closed as f64 / (d * (d - 1)) as f64;
    }
    total / n as f64
}

fn k3_with_pendant() -> Graph {
    Graph::from_edges(4, false, [(0, 1), (1, 2), (0, 2), (0, 3)])
        .unwrap()
        .0
}

#[test]
fn triangle_on_k3_matches_triple_enumeration() {
    let g = complete(3);
    assert!((triple_mean(&g) - 2.0 / 9.0).abs() < 1e-15);
    let e = triangle_density(&mut OracleSession::new(&g, 1), 100_000).unwrap();
    assert!((e.estimate - 2.0 / 9.0).abs() <= 0.012, "{}", e.estimate);
}

#[test]
fn triangle_on_er_tracks_the_exact_statistic() {
    let g = gen_er(300, 0.1, 21).unwrap();
    let exact = exact_triangle_statistic(&g).unwrap();
    let e = triangle_density(&mut OracleSession::new(&g, 2), 200_000).unwrap();
    assert!(
        (e.estimate - exact).abs() <= 0.01,
        "{} vs {exact}",
        e.estimate
    );
    assert!(e.stderr_estimate > 0.0 && e.stderr_estimate < 0.002);
}

#[test]
fn triangle_spread_across_seeds_matches_bernoulli() {
    let g = gen_er(40, 0.4, 3).unwrap();
    let p = exact_triangle_statistic(&g).unwrap();
    let trials = 2_000;
    let xs: Vec<f64> = (0..100)
        .map(|seed| {
            triangle_density(&mut OracleSession::new(&g, seed), trials)
                .unwrap()
                .estimate
        })
        .collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
    let expected = (p * (1.0 - p) / trials as f64).sqrt();
    assert!(
        sd / expected > 1.0 / 1.5 && sd / expected < 1.5,
        "sd {sd} vs {expected}"
    );
}

#[test]
fn estimator_query_counts_depend_only_on_trials() {
    let graphs = [complete(3), cycle(10), gen_er(10_000, 0.001, 4).unwrap()];
    let trials = 500;
    for g in &graphs {
        let mut s = OracleSession::new(g, 7);
        let q = triangle_density(&mut s, trials).unwrap().queries;
        assert_eq!(
            (q.sample_vertex, q.sample_neighbor, q.is_adjacent),
            (1500, 0, 1500)
        );
        for cap in [0, 3, DEFAULT_REDRAW_CAP] {
            let q = local_clustering(&mut s, trials, cap).unwrap().queries;
            assert_eq!(q.sample_vertex, trials as u64);
            assert!(q.sample_neighbor <= (2 * (cap + 1) * trials) as u64);
            assert!(q.is_adjacent <= trials as u64);
        }
    }
}

#[test]
fn clustering_extremes_are_exact() {
    let k3 = complete(3);
    assert_eq!(
        local_clustering(&mut OracleSession::new(&k3, 1), 5_000, DEFAULT_REDRAW_CAP)
            .unwrap()
            .estimate,
        1.0
    );
    let s4 = star(4);
    assert_eq!(
        local_clustering(&mut OracleSession::new(&s4, 1), 5_000, DEFAULT_REDRAW_CAP)
            .unwrap()
            .estimate,
        0.0
    );
}

#[test]
fn clustering_on_pendant_triangle_matches_outcome_enumeration() {
    let g = k3_with_pendant();
    // hand value for cap = 0: (1/4) * ((2/3)(1/3) + 2 * (1/2))
    assert!((clustering_trial_mean(&g, 0) - (2.0 / 9.0 + 1.0) / 4.0).abs() < 1e-15);
    let trials = 100_000;
    for cap in [0, 1, DEFAULT_REDRAW_CAP] {
        let exact = clustering_trial_mean(&g, cap);
        let e = local_clustering(&mut OracleSession::new(&g, cap as u64), trials, cap).unwrap();
        let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!(
            (e.estimate - exact).abs() <= 3.0 * sigma,
            "cap {cap}: {} vs {exact}",
            e.estimate
        );
    }
}

#[test]
fn clustering_on_random_graphs_matches_outcome_enumeration() {
    let trials = 50_000;
    for seed in 0..5 {
        let g = gen_er(9, 0.5, seed).unwrap();
        let exact = clustering_trial_mean(&g, 2);
        let e = local_clustering(&mut OracleSession::new(&g, seed), trials, 2).unwrap();
        let sigma = (exact * (1.0 - exact) / trials as f64).sqrt().max(1e-9);
        assert!(
            (e.estimate - exact).abs() <= 4.0 * sigma,
            "seed {seed}: {} vs {exact}",
            e.estimate
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn triangle_trial_is_unbiased_on_small_graphs(n in 1usize..=8, p in 0.0f64..1.0, seed: u64) {
        let g = gen_er(n, p, seed).unwrap();
        prop_assert!((triple_mean(&g) - exact_triangle_statistic(&g).unwrap()).abs() < 1e-12);
    }
}

fn two_class_table() -> CanonicalEstimatorTable {
    let mut t =
        CanonicalEstimatorTable::new(BallParams::new(1, 2, 2), CanonOptions::default(), -1.0);
    t.insert_union(
        &BallUnion::from_local_undirected(1, &[], &[0]).unwrap(),
        0.0,
    )
    .unwrap();
    t.insert_union(
        &BallUnion::from_local_undirected(2, &[(0, 1)], &[0]).unwrap(),
        1.0,
    )
    .unwrap();
    t
}

#[test]
fn canonical_estimator_averages_to_the_class_mix() {
    let g = Graph::from_edges(4, false, [(2, 3)]).unwrap().0;
    let t = two_class_table();
    let calls = 20_000;
    let mut s = OracleSession::new(&g, 12);
    let mut sum = 0.0;
    for _ in 0..calls {
        let x = canonical_estimate(&mut s, &t).unwrap();
        assert!(x == 0.0 || x == 1.0);
        sum += x;
    }
    let mean = sum / calls as f64;
    assert!(
        (mean - 0.5).abs() <= 3.0 * 0.5 / (calls as f64).sqrt(),
        "{mean}"
    );
}

#[test]
fn canonical_estimator_defaults_and_vertex_count_labels() {
    let g = complete(2);
    let empty =
        CanonicalEstimatorTable::new(BallParams::new(2, 2, 2), CanonOptions::default(), 7.0);
    let mut s = OracleSession::new(&g, 1);
    assert!((0..50).all(|_| canonical_estimate(&mut s, &empty).unwrap() == 7.0));

    let params = BallParams::new(2, 1, 1);
    let mut by_size = CanonicalEstimatorTable::new(params, CanonOptions::default(), -1.0);
    for seed in 0..20 {
        let u = union_sample(&mut OracleSession::new(&g, seed), params).unwrap();
        by_size.insert_union(&u, u.m() as f64).unwrap();
    }
    assert!((0..200).all(|_| canonical_estimate(&mut s, &by_size).unwrap() == 2.0));
}
