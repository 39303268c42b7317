//! Property tests for the library's structural invariants.

use ndarray::{arr1, Array2};
use proptest::prelude::*;

use sanrank_core::eval::f1_macro;
use sanrank_core::importance::{ImportanceVector, Method};
use sanrank_core::ranking::{fuji_at_cutoff, simpson_auc, FujiCurve};
use sanrank_core::san::softmax;
use sanrank_core::tabular::{standardize, stratified_kfold, Dataset};

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("f{i}")).collect()
}

fn ranking(scores: Vec<f64>, method: Method) -> ImportanceVector {
    let n = scores.len();
    ImportanceVector::new(scores, method, names(n)).unwrap()
}

/// Two equal-length non-negative score vectors and a valid cutoff.
fn ranking_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, usize)> {
    (2usize..16).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0..1.0f64, n),
            prop::collection::vec(0.0..1.0f64, n),
            1..=n,
        )
    })
}

/// Strictly increasing integer grid with an even interval count, so composite
/// Simpson covers it without the trapezoid tail.
fn even_interval_grid() -> impl Strategy<Value = Vec<usize>> {
    (1usize..8, prop::collection::vec(1usize..9, 2..10)).prop_map(|(start, deltas)| {
        let n = deltas.len() | 1; // odd point count
        let mut grid = vec![start];
        for &d in deltas.iter().take(n - 1) {
            grid.push(grid.last().unwrap() + d);
        }
        grid
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_lands_on_the_simplex(v in prop::collection::vec(-50.0..50.0f64, 1..12)) {
        let out = softmax(arr1(&v).view());
        prop_assert!(out.iter().all(|&p| p > 0.0));
        prop_assert!((out.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_shift_invariance(
        v in prop::collection::vec(-30.0..30.0f64, 1..12),
        shift in -500.0..500.0f64,
    ) {
        let a = softmax(arr1(&v).view());
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let b = softmax(arr1(&shifted).view());
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn fuji_is_bounded_symmetric_and_reflexive((sa, sb, n) in ranking_pair()) {
        let a = ranking(sa, Method::Attention);
        let b = ranking(sb, Method::Relieff);
        let ab = fuji_at_cutoff(&a, &b, n).unwrap();
        let ba = fuji_at_cutoff(&b, &a, n).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(fuji_at_cutoff(&a, &a, n).unwrap(), 1.0);
    }

    #[test]
    fn fuji_ignores_positive_rescaling((sa, sb, n) in ranking_pair(), scale in 1e-3..1e3f64) {
        let a = ranking(sa.clone(), Method::Attention);
        let b = ranking(sb, Method::Relieff);
        let scaled = ranking(sa.iter().map(|s| s * scale).collect(), Method::Attention);
        let plain = fuji_at_cutoff(&a, &b, n).unwrap();
        let rescaled = fuji_at_cutoff(&scaled, &b, n).unwrap();
        prop_assert!((plain - rescaled).abs() < 1e-12);
    }

    #[test]
    fn simpson_integrates_quadratics_exactly(
        grid in even_interval_grid(),
        a in -5.0..5.0f64,
        b in -5.0..5.0f64,
        c in -5.0..5.0f64,
    ) {
        let values: Vec<f64> = grid
            .iter()
            .map(|&x| {
                let x = x as f64;
                a * x * x + b * x + c
            })
            .collect();
        let curve = FujiCurve {
            cutoffs: grid.clone(),
            values,
            ranking_a_method: "a".into(),
            ranking_b_method: "b".into(),
        };
        let got = simpson_auc(&curve).unwrap();
        let (x0, x1) = (grid[0] as f64, *grid.last().unwrap() as f64);
        let anti = |x: f64| a * x * x * x / 3.0 + b * x * x / 2.0 + c * x;
        let expect = (anti(x1) - anti(x0)) / (x1 - x0);
        prop_assert!((got - expect).abs() <= 1e-9 * (1.0 + expect.abs()), "{got} vs {expect}");
    }

    #[test]
    fn standardize_is_idempotent_for_random_data(
        rows in 2usize..12,
        cols in 1usize..6,
        seed in 0u64..1000,
    ) {
        // Deterministic pseudo-random fill; avoids generating huge matrices.
        let mut features = Array2::zeros((rows, cols));
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15) | 1;
        for v in features.iter_mut() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *v = ((state >> 11) as f64 / (1u64 << 53) as f64) * 10.0 - 5.0;
        }
        let labels: Vec<usize> = (0..rows).map(|i| i % 2).collect();
        let data = Dataset::new(
            features,
            labels,
            (0..cols).map(|j| format!("f{j}")).collect(),
            vec!["a".into(), "b".into()],
            None,
        ).unwrap();
        let (once, _) = standardize(&data);
        let (twice, _) = standardize(&once);
        for (x, y) in once.features().iter().zip(twice.features().iter()) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn stratified_folds_stay_within_one_of_proportional(
        counts in prop::collection::vec(4usize..30, 2..5),
        n_folds in 2usize..5,
        seed in 0u64..1000,
    ) {
        prop_assume!(counts.iter().all(|&c| c >= n_folds));
        let total: usize = counts.iter().sum();
        let mut labels = Vec::with_capacity(total);
        for (c, &count) in counts.iter().enumerate() {
            labels.extend(std::iter::repeat_n(c, count));
        }
        let features = Array2::from_shape_fn((total, 2), |(i, j)| (i * 2 + j) as f64);
        let data = Dataset::new(
            features,
            labels,
            vec!["x".into(), "y".into()],
            (0..counts.len()).map(|c| format!("c{c}")).collect(),
            None,
        ).unwrap();
        let plan = stratified_kfold(&data, n_folds, seed).unwrap();
        for fold in 0..n_folds {
            let test = plan.test_indices(fold);
            for (c, &count) in counts.iter().enumerate() {
                let got = test.iter().filter(|&&i| data.labels()[i] == c).count() as f64;
                let exact = count as f64 / n_folds as f64;
                prop_assert!((got - exact).abs() <= 1.0);
            }
        }
        // Every fold id in use.
        for fold in 0..n_folds {
            prop_assert!(plan.assignments.iter().any(|&f| f == fold));
        }
    }

    #[test]
    fn importance_csv_preserves_scores_exactly(
        scores in prop::collection::vec(0.0..1e6f64, 1..24),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let iv = ranking(scores, Method::MutualInfo);
        iv.write_csv(&path).unwrap();
        let back = ImportanceVector::read_csv(&path, Method::MutualInfo).unwrap();
        // Rows come back rank-ordered; match by feature name.
        for (name, score) in back.feature_names.iter().zip(&back.scores) {
            let idx: usize = name[1..].parse().unwrap();
            prop_assert_eq!(*score, iv.scores[idx]);
        }
    }

    #[test]
    fn f1_macro_is_one_exactly_on_perfect_predictions(
        truth in prop::collection::vec(0usize..4, 1..40),
    ) {
        prop_assume!(truth.contains(&0) || truth.iter().max() == Some(&0));
        let f = f1_macro(&truth, &truth).unwrap();
        let n_classes = truth.iter().max().unwrap() + 1;
        let present: std::collections::HashSet<usize> = truth.iter().cloned().collect();
        // Perfect predictions: every present class scores 1, gaps score 0.
        let expect = present.len() as f64 / n_classes as f64;
        prop_assert!((f - expect).abs() < 1e-12);
    }
}
