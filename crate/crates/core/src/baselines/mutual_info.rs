//! Plug-in mutual information with equal-frequency binning.

use crate::error::{Error, Result};
use crate::importance::{ImportanceVector, Method};
use crate::tabular::Dataset;

/// Assigns each value to one of up to `n_bins` equal-frequency bins. Equal
/// values always share a bin (ties collapsed), so bins may end up uneven or
/// fewer than requested.
fn equal_frequency_bins(values: &[f64], n_bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .expect("finite values")
            .then(a.cmp(&b))
    });
    let mut bins = vec![0usize; n];
    let mut prev_value = f64::NAN;
    let mut prev_bin = 0usize;
    for (rank, &i) in order.iter().enumerate() {
        let raw = rank * n_bins / n;
        let bin = if values[i] == prev_value {
            prev_bin
        } else {
            raw
        };
        bins[i] = bin;
        prev_value = values[i];
        prev_bin = bin;
    }
    bins
}

/// Mutual information `I(feature_binned; label)` in bits for every feature.
/// Deterministic; scores are non-negative by construction.
pub fn mutual_information(data: &Dataset, n_bins: usize) -> Result<ImportanceVector> {
    if n_bins < 2 {
        return Err(Error::InvalidParameter(format!(
            "n_bins must be at least 2, got {n_bins}"
        )));
    }
    let n = data.n_instances();
    let n_classes = data.n_classes();
    let labels = data.labels();
    let class_counts = data.class_counts();

    let mut scores = Vec::with_capacity(data.n_features());
    for j in 0..data.n_features() {
        let col: Vec<f64> = data.features().column(j).to_vec();
        let bins = equal_frequency_bins(&col, n_bins);

        let mut joint = vec![vec![0usize; n_classes]; n_bins];
        let mut bin_counts = vec![0usize; n_bins];
        for (i, &b) in bins.iter().enumerate() {
            joint[b][labels[i]] += 1;
            bin_counts[b] += 1;
        }

        let nf = n as f64;
        let mut mi = 0.0;
        for (b, row) in joint.iter().enumerate() {
            if bin_counts[b] == 0 {
                continue;
            }
            for (c, &count) in row.iter().enumerate() {
                if count == 0 {
                    continue;
                }
                let p_joint = count as f64 / nf;
                let ratio = (count as f64 * nf) / (bin_counts[b] as f64 * class_counts[c] as f64);
                mi += p_joint * ratio.log2();
            }
        }
        scores.push(mi.max(0.0));
    }
    ImportanceVector::new(scores, Method::MutualInfo, data.feature_names().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::make_classification;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn label_copy_dataset(n: usize) -> Dataset {
        let mut x = Array2::zeros((n, 2));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label = i % 2;
            y.push(label);
            x[[i, 0]] = label as f64;
            x[[i, 1]] = 3.5; // constant
        }
        Dataset::new(
            x,
            y,
            vec!["copy".into(), "const".into()],
            vec!["a".into(), "b".into()],
            None,
        )
        .unwrap()
    }

    /// Entropy route: I(X;Y) = H(X) + H(Y) - H(X,Y), written independently of
    /// the production sum-over-cells formula.
    fn mi_via_entropies(bins: &[usize], labels: &[usize]) -> f64 {
        fn entropy<T: std::hash::Hash + Eq + Copy>(items: &[T]) -> f64 {
            let mut counts = std::collections::HashMap::new();
            for &it in items {
                *counts.entry(it).or_insert(0usize) += 1;
            }
            let n = items.len() as f64;
            counts
                .values()
                .map(|&c| {
                    let p = c as f64 / n;
                    -p * p.log2()
                })
                .sum()
        }
        let joint: Vec<(usize, usize)> = bins.iter().cloned().zip(labels.iter().cloned()).collect();
        entropy(bins) + entropy(labels) - entropy(&joint)
    }

    #[test]
    fn label_copy_feature_scores_one_bit() {
        let data = label_copy_dataset(100);
        let iv = mutual_information(&data, 10).unwrap();
        assert_abs_diff_eq!(iv.scores[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn constant_feature_scores_zero() {
        let data = label_copy_dataset(50);
        let iv = mutual_information(&data, 10).unwrap();
        assert_eq!(iv.scores[1], 0.0);
    }

    #[test]
    fn independent_noise_scores_near_zero() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 1000;
            let mut x = Array2::zeros((n, 1));
            let mut y = Vec::with_capacity(n);
            for i in 0..n {
                y.push(i % 2);
                x[[i, 0]] = rng.random_range(-1.0..1.0);
            }
            let data = Dataset::new(
                x,
                y,
                vec!["noise".into()],
                vec!["a".into(), "b".into()],
                None,
            )
            .unwrap();
            let iv = mutual_information(&data, 10).unwrap();
            assert!(iv.scores[0] < 0.05, "seed {seed}: {}", iv.scores[0]);
        }
    }

    #[test]
    fn agrees_with_entropy_route() {
        let data = make_classification(200, 5, 3, 17).unwrap();
        let iv = mutual_information(&data, 8).unwrap();
        for j in 0..5 {
            let col: Vec<f64> = data.features().column(j).to_vec();
            let bins = equal_frequency_bins(&col, 8);
            let expect = mi_via_entropies(&bins, data.labels());
            assert_abs_diff_eq!(iv.scores[j], expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn instance_permutation_leaves_scores_unchanged() {
        let data = make_classification(60, 4, 2, 23).unwrap();
        let mut perm: Vec<usize> = (0..60).collect();
        perm.reverse();
        perm.swap(5, 40);
        let shuffled = data.subset(&perm).unwrap();
        let a = mutual_information(&data, 6).unwrap();
        let b = mutual_information(&shuffled, 6).unwrap();
        assert_eq!(a.scores, b.scores);
    }

    #[test]
    fn duplicated_columns_get_identical_scores() {
        let base = make_classification(80, 2, 1, 31).unwrap();
        let mut x = Array2::zeros((80, 3));
        for i in 0..80 {
            x[[i, 0]] = base.features()[[i, 0]];
            x[[i, 1]] = base.features()[[i, 1]];
            x[[i, 2]] = base.features()[[i, 0]];
        }
        let data = Dataset::new(
            x,
            base.labels().to_vec(),
            vec!["a".into(), "b".into(), "a_copy".into()],
            base.class_names().to_vec(),
            None,
        )
        .unwrap();
        let iv = mutual_information(&data, 10).unwrap();
        assert_eq!(iv.scores[0], iv.scores[2]);
    }

    #[test]
    fn tie_collapsing_keeps_equal_values_in_one_bin() {
        let values = vec![1.0, 1.0, 1.0, 1.0, 2.0, 3.0];
        let bins = equal_frequency_bins(&values, 3);
        assert_eq!(bins[0], bins[3]);
        assert!(bins[4] > bins[0]);
    }

    #[test]
    fn rejects_one_bin() {
        let data = label_copy_dataset(10);
        assert!(mutual_information(&data, 1).is_err());
    }
}
