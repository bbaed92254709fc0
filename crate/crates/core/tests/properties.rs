use proptest::prelude::*;

use diglacian_core::container::{read_dense, write_dense};
use diglacian_core::data::{format_sparse, parse_sparse};
use diglacian_core::features::build_combinatorial;
use diglacian_core::graph::is_strongly_connected;
use diglacian_core::markov::{
    commute_times, diglacian, drop_count, fundamental_matrix_dense, fundamental_matrix_sparse, hitting_times,
    sparsify_commute, PowerIterationOptions,
};
use diglacian_core::{CommuteModel, CsrMatrix, DenseMatrix, DiGraph, DiglacianOps, FeatureMatrix, PfprChain};

#[derive(Debug, Clone)]
struct Instance {
    n: usize,
    edges: Vec<(usize, usize)>,
    features: Vec<Vec<f64>>,
    k: usize,
    seed: u64,
}

fn instance(max_n: usize) -> impl Strategy<Value = Instance> {
    (3..=max_n).prop_flat_map(|n| {
        let edges = prop::collection::vec((0..n, 0..n), 0..3 * n);
        // An all-zero feature matrix has no mean direction and is rejected upstream.
        let features = prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 4), n)
            .prop_filter("some nonzero feature", |rows| rows.iter().flatten().any(|&v| v != 0.0));
        (Just(n), edges, features, prop::sample::select(vec![2usize, 4]), any::<u64>())
            .prop_map(|(n, edges, features, k, seed)| Instance { n, edges, features, k, seed })
    })
}

fn chain(inst: &Instance) -> PfprChain {
    let (g, _) = DiGraph::from_edges(inst.n, &inst.edges).unwrap();
    let x = FeatureMatrix::from_rows(&inst.features).unwrap();
    let comb = build_combinatorial(&g, &x, inst.k, inst.seed).unwrap();
    assert!(is_strongly_connected(&comb.augmented));
    PfprChain::from_combinatorial(&comb, PowerIterationOptions::precise()).unwrap()
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn dense_matrix(max_dim: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL, r * c)
            .prop_map(move |v| DenseMatrix::from_row_slice(r, c, &v))
    })
}

fn sparse_matrix(max_dim: usize) -> impl Strategy<Value = CsrMatrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
        prop::collection::vec((0..r, 0..c, -10.0f64..10.0), 0..3 * r * c)
            .prop_map(move |t| CsrMatrix::from_triplets(r, c, &t, diglacian_core::sparse::Duplicates::Sum).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn chain_is_stochastic_with_positive_stationary(inst in instance(24)) {
        let c = chain(&inst);
        for (i, s) in c.transition.row_sums().iter().enumerate() {
            prop_assert!((s - 1.0).abs() < 1e-12, "row {} sums to {}", i, s);
        }
        prop_assert!(c.transition.values().iter().all(|&v| v >= 0.0));
        prop_assert!(c.stationary.iter().all(|&p| p > 0.0));
        prop_assert!((c.stationary.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(c.stationarity_residual() < 1e-12);
        for i in 0..c.n() {
            prop_assert!(c.transition.get(i, i) > 0.0, "no self-loop at {}", i);
        }
    }

    #[test]
    fn operators_are_symmetric_and_complementary(inst in instance(24)) {
        let c = chain(&inst);
        let ops = DiglacianOps::new(&c).unwrap();
        prop_assert_eq!(ops.normalized.symmetry_residual(), 0.0);
        prop_assert_eq!(ops.propagation.symmetry_residual(), 0.0);
        let sum = ops.normalized.linear_combination(1.0, &ops.propagation, 1.0).unwrap().to_dense();
        let inv = c.degrees.inverse();
        for i in 0..c.n() {
            for j in 0..c.n() {
                let expected = if i == j { 2.0 * inv[i] } else { 0.0 };
                prop_assert!((sum[(i, j)] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fundamental_matrix_annihilators(inst in instance(20)) {
        let c = chain(&inst);
        let z = fundamental_matrix_dense(&c).unwrap();
        let n = c.n();
        let row_sums = (0..n).map(|i| z.row(i).sum());
        prop_assert!(max_abs(row_sums) < 1e-9);
        let weighted = (0..n).map(|j| (0..n).map(|i| c.stationary[i] * z[(i, j)]).sum::<f64>());
        prop_assert!(max_abs(weighted) < 1e-9);
    }

    #[test]
    fn sparse_fundamental_matches_dense(inst in instance(40)) {
        let c = chain(&inst);
        let dense = fundamental_matrix_dense(&c).unwrap();
        let (sparse, report) = fundamental_matrix_sparse(&c, &diglacian(&c).unwrap(), None).unwrap();
        prop_assert_eq!(report.retained, c.n() - 1);
        let err = (&sparse - &dense).amax();
        prop_assert!(err < 1e-8, "max |Z_sparse - Z_dense| = {:e}", err);
    }

    #[test]
    fn hitting_and_commute_times_are_well_formed(inst in instance(20)) {
        let c = chain(&inst);
        let z = fundamental_matrix_dense(&c).unwrap();
        let h = hitting_times(&z, &c.stationary).unwrap();
        let ct = commute_times(&h);
        let n = c.n();
        for i in 0..n {
            prop_assert_eq!(h[(i, i)], 0.0);
            prop_assert_eq!(ct[(i, i)], 0.0);
            for j in 0..n {
                if i != j {
                    // Leaving i takes at least one step.
                    prop_assert!(h[(i, j)] >= 1.0 - 1e-9, "H[{},{}] = {}", i, j, h[(i, j)]);
                    prop_assert_eq!(ct[(i, j)], ct[(j, i)]);
                }
            }
        }
        // Return time to j is 1/π_j: 1 + Σ_k P_jk H_kj.
        for j in 0..n {
            let ret = 1.0 + c.transition.row(j).map(|(k, p)| p * h[(k, j)]).sum::<f64>();
            prop_assert!((ret * c.stationary[j] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn sparsified_rows_keep_the_smallest_entries(inst in instance(20), mu in 0.05f64..0.7) {
        let c = chain(&inst);
        let n = c.n();
        let keep = n - 1 - drop_count(n, mu);
        let model = CommuteModel::from_fundamental(fundamental_matrix_dense(&c).unwrap(), &c.stationary, mu);
        if keep == 0 {
            prop_assert!(model.is_err());
            return Ok(());
        }
        let model = model.unwrap();
        for i in 0..n {
            prop_assert_eq!(model.sparsified.row_nnz(i), keep);
            prop_assert_eq!(model.sparsified.get(i, i), 0.0);
            let kept_max = model.sparsified.row(i).map(|(_, v)| v).fold(f64::MIN, f64::max);
            let kept: Vec<usize> = model.sparsified.row(i).map(|(j, _)| j).collect();
            for j in (0..n).filter(|&j| j != i && !kept.contains(&j)) {
                prop_assert!(model.commute[(i, j)] >= kept_max);
            }
            let s: f64 = model.propagation.row(i).map(|(_, v)| v).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn drop_count_never_empties_a_row(n in 1usize..500, mu in 0.0f64..1.0) {
        let d = drop_count(n, mu);
        prop_assert!(d < n.max(1));
        prop_assert!(d <= (mu * n as f64).floor() as usize);
    }

    #[test]
    fn sparsify_rejects_mu_outside_unit_interval(mu in prop_oneof![-5.0f64..=0.0, 1.0f64..5.0]) {
        let c = DenseMatrix::from_element(3, 3, 1.0);
        prop_assert!(sparsify_commute(&c, mu).is_err());
    }

    #[test]
    fn container_round_trip_is_bitwise(m in dense_matrix(12)) {
        let mut buf = Vec::new();
        write_dense(&mut buf, &m).unwrap();
        prop_assert_eq!(&buf[..4], b"DGL1");
        let back = read_dense(buf.as_slice()).unwrap();
        prop_assert_eq!(back.shape(), m.shape());
        prop_assert!(back.iter().zip(m.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn truncated_container_is_rejected(m in dense_matrix(6), cut in 1usize..8) {
        let mut buf = Vec::new();
        write_dense(&mut buf, &m).unwrap();
        buf.truncate(buf.len().saturating_sub(cut));
        prop_assert!(read_dense(buf.as_slice()).is_err());
    }

    #[test]
    fn sparse_text_round_trip(m in sparse_matrix(10)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        std::fs::write(&path, format_sparse(&m)).unwrap();
        let back = parse_sparse(&path).unwrap();
        prop_assert_eq!(back.shape(), m.shape());
        prop_assert_eq!(back.to_dense(), m.to_dense());
    }

    #[test]
    fn sparse_dense_product_matches_dense(a in sparse_matrix(12), cols in 1usize..11, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let b = DenseMatrix::from_fn(a.n_cols(), cols, |_, _| rng.random_range(-1.0..1.0));
        let got = a.mul_dense(&b);
        let want = a.to_dense() * &b;
        prop_assert!((got - want).amax() < 1e-12);
    }

    #[test]
    fn transpose_is_an_involution(m in sparse_matrix(10)) {
        prop_assert_eq!(m.transpose().transpose(), m.clone());
        prop_assert_eq!(m.transpose().to_dense(), m.to_dense().transpose());
    }
}
