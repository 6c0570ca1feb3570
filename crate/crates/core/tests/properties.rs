use approx::assert_abs_diff_eq;
use mvgehd::cluster::kmeans_fit;
use mvgehd::embed::{combined_laplacian, residual_p, reweight_q, view_laplacian};
use mvgehd::graph::random_walk_matrix;
use mvgehd::linalg::{frobenius_norm, l21_norm, orthogonality_error, smallest_eigenpairs, trace_form};
use mvgehd::*;
use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn symmetric(n: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-5.0f64..5.0, n * n).prop_map(move |v| {
        let m = Array2::from_shape_vec((n, n), v).unwrap();
        (&m + &m.t()) * 0.5
    })
}

fn affinity(n: usize) -> impl Strategy<Value = Array2<f64>> {
    // a ring keeps every node connected
    prop::collection::vec(0.0f64..1.0, n * n).prop_map(move |v| {
        let mut a = Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { v[i.min(j) * n + i.max(j)] });
        for i in 0..n {
            let j = (i + 1) % n;
            if i != j {
                a[[i, j]] += 0.5;
                a[[j, i]] = a[[i, j]];
            }
        }
        a
    })
}

fn sized<S: Strategy>(lo: usize, hi: usize, f: impl Fn(usize) -> S) -> impl Strategy<Value = S::Value> {
    (lo..=hi).prop_flat_map(f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenpairs_match_independent_decomposition(m in sized(1, 20, symmetric)) {
        let n = m.nrows();
        let r = smallest_eigenpairs(m.view(), n).unwrap();
        let oracle = DMatrix::from_fn(n, n, |i, j| m[[i, j]]);
        let mut expected: Vec<f64> = oracle.symmetric_eigenvalues().iter().copied().collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in r.eigenvalues.iter().zip(&expected) {
            prop_assert!((got - want).abs() < 1e-9);
        }
        prop_assert!(r.eigenvalues.windows(2).into_iter().all(|w| w[0] <= w[1]));
        prop_assert!(orthogonality_error(r.eigenvectors.view()) < 1e-10);
        for (j, &lambda) in r.eigenvalues.iter().enumerate() {
            let v = r.eigenvectors.column(j);
            let res = (&m.dot(&v) - &(&v * lambda)).fold(0.0f64, |a, &b| a.max(b.abs()));
            prop_assert!(res < 1e-9);
        }
    }

    #[test]
    fn random_walk_rows_are_stochastic(a in sized(2, 15, affinity)) {
        let w = random_walk_matrix(&AffinityMatrix::new(a).unwrap(), IsolatedPolicy::Error).unwrap();
        for row in w.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reweighting_matches_formula(p in prop::collection::vec(-3.0f64..3.0, 12)) {
        let p = Array2::from_shape_vec((4, 3), p).unwrap();
        let q = reweight_q(p.view(), 1e-4).unwrap();
        for (j, row) in p.rows().into_iter().enumerate() {
            let direct = 1.0 / (2.0 * (row.dot(&row) + 1e-4).sqrt());
            prop_assert!((q[j] - direct).abs() < 1e-15 * direct.max(1.0));
            prop_assert!(q[j] > 0.0 && q[j] <= 50.0);
        }
    }

    #[test]
    fn view_laplacian_is_psd(a in sized(3, 12, affinity), seed in 0u64..1000) {
        let n = a.nrows();
        let view = AffinityMatrix::new(a).unwrap();
        let q = Array1::from_shape_fn(n, |i| 0.1 + ((seed as usize + i * 7) % 11) as f64 / 10.0);
        let l = view_laplacian(&view, q.view(), IsolatedPolicy::Error).unwrap();
        prop_assert!(l.iter().zip(l.t().iter()).all(|(x, y)| (x - y).abs() < 1e-12));
        let min = smallest_eigenpairs(l.view(), 1).unwrap().eigenvalues[0];
        prop_assert!(min >= -1e-10);
        let ones = Array2::from_elem((n, 1), 1.0);
        let p = residual_p(ones.view(), &view, IsolatedPolicy::Error).unwrap();
        prop_assert!(p.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn combined_laplacian_is_entrywise_sum(ls in prop::collection::vec(symmetric(4), 3), w in prop::collection::vec(0.01f64..2.0, 3)) {
        let got = combined_laplacian(&ls, &ViewWeights::new(w.clone()).unwrap()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want: f64 = (0..3).map(|v| w[v] * ls[v][[i, j]]).sum();
                prop_assert!((got[[i, j]] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn solve_is_monotone_and_orthonormal(a in sized(8, 20, affinity), b in sized(8, 20, affinity), k in 1usize..4) {
        let n = a.nrows().min(b.nrows());
        let crop = |m: &Array2<f64>| AffinityMatrix::new(m.slice(ndarray::s![..n, ..n]).to_owned());
        // cropping can isolate a node, so fall back to self-loops
        let g = MultiViewGraph::new(vec![crop(&a).unwrap(), crop(&b).unwrap()], None).unwrap();
        let config = EmbedConfig { isolated_policy: IsolatedPolicy::SelfLoop, ..EmbedConfig::new(k) };
        let s = solve(&g, &config).unwrap();
        prop_assert!(s.trace.max_increase() <= 1e-8);
        prop_assert!(s.trace.orthogonality.iter().all(|&e| e <= 1e-8));
        prop_assert_eq!(s.embedding.matrix().dim(), (n, k));
    }

    #[test]
    fn kmeans_history_never_rises(pts in prop::collection::vec(-10.0f64..10.0, 40), k in 1usize..6, seed in 0u64..100) {
        let pts = Array2::from_shape_vec((20, 2), pts).unwrap();
        let fit = kmeans_fit(pts.view(), k, &KMeansConfig::with_seed(seed)).unwrap();
        prop_assert!(fit.history.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        prop_assert!(fit.assignment.labels.iter().all(|&l| l < k));
        let mut sizes = vec![0; k];
        fit.assignment.labels.iter().for_each(|&l| sizes[l] += 1);
        prop_assert!(sizes.iter().all(|&s| s > 0));
    }

    #[test]
    fn metrics_are_bounded_and_label_invariant(
        pred in prop::collection::vec(0usize..4, 12),
        truth in prop::collection::vec(0usize..4, 12),
    ) {
        let p = ClusterAssignment::new(pred.clone(), 4).unwrap();
        let t = ClusterAssignment::new(truth, 4).unwrap();
        let acc = accuracy(&p, &t).unwrap();
        let v = nmi(&p, &t).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc) && (0.0..=1.0).contains(&v));
        prop_assert!((v - nmi(&t, &p).unwrap()).abs() < 1e-12);
        let relabeled = ClusterAssignment::new(pred.iter().map(|&l| (l + 1) % 4).collect(), 4).unwrap();
        prop_assert_eq!(accuracy(&relabeled, &t).unwrap(), acc);
        prop_assert!((nmi(&relabeled, &t).unwrap() - v).abs() < 1e-12);
        prop_assert_eq!(accuracy(&p, &p).unwrap(), 1.0);
    }

    #[test]
    fn hungarian_matches_enumeration(c in prop::collection::vec(-5.0f64..5.0, 16)) {
        let cost = Array2::from_shape_vec((4, 4), c).unwrap();
        let (a, total) = hungarian(cost.view()).unwrap();
        let mut best = f64::INFINITY;
        for p in permutations(4) {
            best = best.min(p.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum());
        }
        prop_assert!((total - best).abs() < 1e-12);
        let mut seen = a.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, vec![0, 1, 2, 3]);
    }

    #[test]
    fn betweenness_is_scale_free(a in sized(3, 8, affinity)) {
        let view = AffinityMatrix::new(a).unwrap();
        let base = betweenness(&view);
        prop_assert_eq!(betweenness(&view.scaled(2.0).unwrap()), base.clone());
        for (x, y) in betweenness(&view.scaled(10.0).unwrap()).iter().zip(&base) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn hub_removal_keeps_invariants(a in sized(4, 12, affinity), h in 0usize..4) {
        let g = MultiViewGraph::single(AffinityMatrix::new(a).unwrap());
        let out = remove_hub_edges(&g, &[h]).unwrap();
        let m = out.views()[0].as_array();
        prop_assert!(AffinityMatrix::new(m.clone()).is_ok());
        prop_assert!(m.row(h).iter().all(|&x| x == 0.0) && m.column(h).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn similarity_is_symmetric_with_zero_diagonal(seed in 0u64..500) {
        let spec = PlantedSpec { n: 12, clusters: 2, hubs: 1, seed, ..PlantedSpec::default() };
        let (graphs, _) = generate_cohort::<f64>(&spec, &spec, 2, 2).unwrap();
        let e: Vec<Embedding64> = graphs.iter().map(|g| solve(g, &EmbedConfig::new(2)).unwrap().embedding).collect();
        let s = pairwise_similarity(&e).unwrap();
        for i in 0..4 {
            prop_assert_eq!(s[[i, i]], 0.0);
            for j in 0..4 {
                prop_assert_eq!(s[[i, j]], s[[j, i]]);
                prop_assert!(s[[i, j]] <= 0.0);
            }
        }
    }

    #[test]
    fn generated_graphs_are_valid(seed in 0u64..1000, hubs in 0usize..4, clusters in 2usize..5) {
        let spec = PlantedSpec { n: 30, clusters, hubs, seed, ..PlantedSpec::default() };
        let (g, t) = generate_multiview::<f64>(&spec).unwrap();
        prop_assert_eq!(t.hub_set.len(), hubs);
        prop_assert!(t.labels.iter().all(|&l| l < clusters));
        for v in g.views() {
            prop_assert!(AffinityMatrix::new(v.as_array().clone()).is_ok());
            prop_assert!(v.as_array().iter().all(|&x| (0.0..=1.0).contains(&x)));
            // every hub has strong links into at least two modules
            for &h in &t.hub_set {
                let mut modules: Vec<usize> = t.non_hubs().into_iter()
                    .filter(|&j| v.as_array()[[h, j]] > 0.5)
                    .map(|j| t.labels[j])
                    .collect();
                modules.sort_unstable();
                modules.dedup();
                prop_assert!(modules.len() >= 2);
            }
        }
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 0..k {
        for rest in permutations(k - 1) {
            let mut p = vec![first];
            p.extend(rest.into_iter().map(|r| if r >= first { r + 1 } else { r }));
            out.push(p);
        }
    }
    out
}

#[test]
fn norm_and_trace_oracles() {
    let m = ndarray::array![[3.0, 4.0], [0.0, 0.0], [1.0, 0.0]];
    assert_abs_diff_eq!(l21_norm(m.view()), 6.0, epsilon = 1e-15);
    assert_abs_diff_eq!(frobenius_norm(m.view()), 26f64.sqrt(), epsilon = 1e-15);
    let l = ndarray::array![[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]];
    let direct: f64 = (0..2).map(|c| m.column(c).dot(&l.dot(&m.column(c)))).sum();
    assert_abs_diff_eq!(trace_form(m.view(), l.view()).unwrap(), direct, epsilon = 1e-12);
}
