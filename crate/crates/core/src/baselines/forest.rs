//! CART-style random forest: Gini splitting on bootstrap samples, with
//! impurity-decrease feature importance aggregated per tree.

use ndarray::ArrayView1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::importance::{ImportanceVector, Method};
use crate::tabular::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MaxFeatures {
    /// `max(1, floor(sqrt(n_features)))` candidates per split.
    Sqrt,
    Fixed(usize),
}

impl MaxFeatures {
    fn resolve(self, n_features: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((n_features as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::Fixed(m) => m.clamp(1, n_features),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_features_per_split: MaxFeatures,
    pub min_leaf_size: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_features_per_split: MaxFeatures::Sqrt,
            min_leaf_size: 1,
            seed: 0,
        }
    }
}

enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

struct Tree {
    nodes: Vec<Node>,
    /// Children are pushed before their parent, so the root is the last node.
    root: usize,
}

impl Tree {
    fn predict(&self, x: ArrayView1<'_, f64>) -> usize {
        let mut id = self.root;
        loop {
            match &self.nodes[id] {
                Node::Leaf { class } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    id = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

fn gini(counts: &[usize], total: usize) -> f64 {
    let n = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * p
        })
        .sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &count) in counts.iter().enumerate() {
        if count > counts[best] {
            best = c;
        }
    }
    best
}

struct TreeBuilder<'a> {
    data: &'a Dataset,
    rng: ChaCha8Rng,
    mtry: usize,
    min_leaf: usize,
    /// Bootstrap sample size, the weight base for importance contributions.
    total: f64,
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

impl TreeBuilder<'_> {
    fn class_counts(&self, indices: &[usize]) -> Vec<usize> {
        let mut counts = vec![0usize; self.data.n_classes()];
        for &i in indices {
            counts[self.data.labels()[i]] += 1;
        }
        counts
    }

    fn build(&mut self, indices: &[usize]) -> usize {
        let counts = self.class_counts(indices);
        let n = indices.len();
        let parent_gini = gini(&counts, n);
        let splittable = n >= 2 * self.min_leaf && parent_gini > 0.0;

        let best = if splittable {
            self.best_split(indices, &counts, parent_gini)
        } else {
            None
        };
        match best {
            None => {
                self.nodes.push(Node::Leaf {
                    class: majority(&counts),
                });
                self.nodes.len() - 1
            }
            Some((delta, feature, threshold)) => {
                self.importance[feature] += (n as f64 / self.total) * delta;
                let (mut left_idx, mut right_idx) = (Vec::new(), Vec::new());
                for &i in indices {
                    if self.data.features()[[i, feature]] <= threshold {
                        left_idx.push(i);
                    } else {
                        right_idx.push(i);
                    }
                }
                let left = self.build(&left_idx);
                let right = self.build(&right_idx);
                self.nodes.push(Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                });
                self.nodes.len() - 1
            }
        }
    }

    /// Highest impurity decrease over the sampled candidate features; ties go
    /// to the lower feature index, then the lower threshold.
    fn best_split(
        &mut self,
        indices: &[usize],
        counts: &[usize],
        parent_gini: f64,
    ) -> Option<(f64, usize, f64)> {
        let d = self.data.n_features();
        let mut candidates = rand::seq::index::sample(&mut self.rng, d, self.mtry).into_vec();
        candidates.sort_unstable();

        let n = indices.len();
        let mut best: Option<(f64, usize, f64)> = None;
        for &f in &candidates {
            let mut vals: Vec<(f64, usize)> = indices
                .iter()
                .map(|&i| (self.data.features()[[i, f]], self.data.labels()[i]))
                .collect();
            vals.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));

            let mut left_counts = vec![0usize; counts.len()];
            for p in 0..n - 1 {
                left_counts[vals[p].1] += 1;
                if vals[p + 1].0 <= vals[p].0 {
                    continue; // not a boundary between distinct values
                }
                let n_left = p + 1;
                let n_right = n - n_left;
                if n_left < self.min_leaf || n_right < self.min_leaf {
                    continue;
                }
                let gl = {
                    let mut g = 1.0;
                    for &c in &left_counts {
                        let p = c as f64 / n_left as f64;
                        g -= p * p;
                    }
                    g
                };
                let gr = {
                    let mut g = 1.0;
                    for (cls, &c) in counts.iter().enumerate() {
                        let p = (c - left_counts[cls]) as f64 / n_right as f64;
                        g -= p * p;
                    }
                    g
                };
                let delta = parent_gini
                    - (n_left as f64 / n as f64) * gl
                    - (n_right as f64 / n as f64) * gr;
                if delta <= 1e-12 {
                    continue;
                }
                let lo = vals[p].0;
                let hi = vals[p + 1].0;
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                let better = match best {
                    None => true,
                    Some((bd, _, _)) => delta > bd,
                };
                if better {
                    best = Some((delta, f, threshold));
                }
            }
        }
        best
    }
}

struct Forest {
    trees: Vec<Tree>,
    /// Mean impurity decrease per feature across trees.
    importances: Vec<f64>,
}

fn tree_seed(master: u64, tree: usize) -> u64 {
    master ^ (tree as u64 + 1).wrapping_mul(0xd1b5_4a32_d192_ed03)
}

fn fit_forest(data: &Dataset, params: &ForestParams) -> Result<Forest> {
    if params.n_trees == 0 {
        return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
    }
    if params.min_leaf_size == 0 {
        return Err(Error::InvalidParameter(
            "min_leaf_size must be at least 1".into(),
        ));
    }
    let n = data.n_instances();
    let d = data.n_features();
    let mtry = params.max_features_per_split.resolve(d);

    let mut trees = Vec::with_capacity(params.n_trees);
    let mut importances = vec![0.0f64; d];
    for t in 0..params.n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(params.seed, t));
        let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let mut builder = TreeBuilder {
            data,
            rng,
            mtry,
            min_leaf: params.min_leaf_size,
            total: n as f64,
            nodes: Vec::new(),
            importance: vec![0.0; d],
        };
        let root = builder.build(&bootstrap);
        for (acc, v) in importances.iter_mut().zip(&builder.importance) {
            *acc += v;
        }
        trees.push(Tree {
            nodes: builder.nodes,
            root,
        });
    }
    for v in &mut importances {
        *v /= params.n_trees as f64;
    }
    Ok(Forest { trees, importances })
}

/// Total Gini impurity decrease attributed to each feature, weighted by node
/// sample fraction and averaged over trees.
pub fn random_forest_importance(data: &Dataset, params: &ForestParams) -> Result<ImportanceVector> {
    let forest = fit_forest(data, params)?;
    ImportanceVector::new(
        forest.importances,
        Method::RandomForest,
        data.feature_names().to_vec(),
    )
}

/// Fits a forest on `data` and labels every `test` instance by majority vote,
/// ties to the lowest class index.
pub fn predict_forest(data: &Dataset, params: &ForestParams, test: &Dataset) -> Result<Vec<usize>> {
    if test.n_features() != data.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "forest trained on {} features, test data has {}",
            data.n_features(),
            test.n_features()
        )));
    }
    let forest = fit_forest(data, params)?;
    let mut out = Vec::with_capacity(test.n_instances());
    for i in 0..test.n_instances() {
        let x = test.instance(i);
        let mut votes = vec![0usize; data.n_classes()];
        for tree in &forest.trees {
            votes[tree.predict(x)] += 1;
        }
        out.push(majority(&votes));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn label_feature_data(n: usize, noise_cols: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, 1 + noise_cols));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label = i % 2;
            y.push(label);
            x[[i, 0]] = label as f64;
            for j in 0..noise_cols {
                x[[i, 1 + j]] = rng.random_range(-1.0..1.0);
            }
        }
        let names = (0..=noise_cols).map(|j| format!("f{j}")).collect();
        Dataset::new(x, y, names, vec!["a".into(), "b".into()], None).unwrap()
    }

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, 2));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label = i % 2;
            let c = if label == 1 { 3.0 } else { -3.0 };
            x[[i, 0]] = c + rng.random_range(-1.0..1.0);
            x[[i, 1]] = c + rng.random_range(-1.0..1.0);
            y.push(label);
        }
        Dataset::new(
            x,
            y,
            vec!["a".into(), "b".into()],
            vec!["n".into(), "p".into()],
            None,
        )
        .unwrap()
    }

    #[test]
    fn label_feature_dominates_importance() {
        let data = label_feature_data(60, 4, 2);
        let params = ForestParams {
            n_trees: 50,
            ..ForestParams::default()
        };
        let iv = random_forest_importance(&data, &params).unwrap();
        assert_eq!(iv.ranked_indices()[0], 0);
        let runner_up = iv.scores[1..].iter().cloned().fold(0.0, f64::max);
        assert!(iv.scores[0] > runner_up, "{} vs {runner_up}", iv.scores[0]);
    }

    #[test]
    fn constant_feature_gets_zero_score() {
        let mut x = Array2::zeros((20, 1));
        for i in 0..20 {
            x[[i, 0]] = 7.0;
        }
        let y: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let data = Dataset::new(
            x,
            y,
            vec!["const".into()],
            vec!["a".into(), "b".into()],
            None,
        )
        .unwrap();
        let iv = random_forest_importance(&data, &ForestParams::default()).unwrap();
        assert_eq!(iv.scores, vec![0.0]);
    }

    #[test]
    fn importance_is_deterministic_per_seed() {
        let data = label_feature_data(40, 3, 4);
        let params = ForestParams {
            n_trees: 20,
            seed: 11,
            ..ForestParams::default()
        };
        let a = random_forest_importance(&data, &params).unwrap();
        let b = random_forest_importance(&data, &params).unwrap();
        assert_eq!(a.scores, b.scores);
        let c = random_forest_importance(&data, &ForestParams { seed: 12, ..params }).unwrap();
        assert_ne!(a.scores, c.scores);
    }

    #[test]
    fn single_tree_forest_predicts_like_its_tree() {
        let data = blobs(50, 6);
        let params = ForestParams {
            n_trees: 1,
            seed: 3,
            ..ForestParams::default()
        };
        let forest = fit_forest(&data, &params).unwrap();
        let votes = predict_forest(&data, &params, &data).unwrap();
        for i in 0..data.n_instances() {
            assert_eq!(votes[i], forest.trees[0].predict(data.instance(i)));
        }
    }

    #[test]
    fn separable_blobs_reach_high_accuracy() {
        let data = blobs(80, 9);
        let params = ForestParams {
            n_trees: 30,
            ..ForestParams::default()
        };
        let preds = predict_forest(&data, &params, &data).unwrap();
        let acc = preds
            .iter()
            .zip(data.labels())
            .filter(|(p, y)| p == y)
            .count() as f64
            / 80.0;
        assert!(acc > 0.95, "accuracy {acc}");
    }

    #[test]
    fn pure_node_becomes_a_leaf() {
        let data = blobs(30, 1);
        let one_class: Vec<usize> = (0..30).filter(|i| i % 2 == 0).collect();
        let mut builder = TreeBuilder {
            data: &data,
            rng: ChaCha8Rng::seed_from_u64(0),
            mtry: 2,
            min_leaf: 1,
            total: one_class.len() as f64,
            nodes: Vec::new(),
            importance: vec![0.0; 2],
        };
        let root = builder.build(&one_class);
        assert_eq!(builder.nodes.len(), 1);
        match builder.nodes[root] {
            Node::Leaf { class } => assert_eq!(class, 0),
            _ => panic!("expected a leaf"),
        }
        assert!(builder.importance.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let train = blobs(20, 2);
        let test = label_feature_data(10, 3, 2);
        assert!(predict_forest(&train, &ForestParams::default(), &test).is_err());
    }

    #[test]
    fn duplicated_columns_share_importance_in_expectation() {
        let mut first = Vec::new();
        let mut copy = Vec::new();
        for seed in 0..20u64 {
            let base = label_feature_data(50, 1, seed + 100);
            let mut x = Array2::zeros((50, 3));
            for i in 0..50 {
                x[[i, 0]] = base.features()[[i, 0]];
                x[[i, 1]] = base.features()[[i, 1]];
                x[[i, 2]] = base.features()[[i, 0]];
            }
            let data = Dataset::new(
                x,
                base.labels().to_vec(),
                vec!["f".into(), "noise".into(), "f_copy".into()],
                base.class_names().to_vec(),
                None,
            )
            .unwrap();
            let iv = random_forest_importance(
                &data,
                &ForestParams {
                    n_trees: 100,
                    seed,
                    ..ForestParams::default()
                },
            )
            .unwrap();
            first.push(iv.scores[0]);
            copy.push(iv.scores[2]);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let diff_of_means = (mean(&first) - mean(&copy)).abs();
        let mean_score = (mean(&first) + mean(&copy)) / 2.0;
        assert!(
            diff_of_means < 0.10 * mean_score,
            "means differ by {diff_of_means} vs mean score {mean_score}"
        );
    }
}
