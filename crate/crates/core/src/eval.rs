//! Ranking-quality evaluation: a deterministic logistic-regression scorer,
//! macro-F1, top-n sweeps under a shared stratified fold plan, and the
//! synthetic attention-difference experiment.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::baselines::{
    mutual_information, random_forest_importance, relieff, ForestParams, ReliefFParams,
};
use crate::error::{Error, Result};
use crate::importance::{write_file, ImportanceVector, Method};
use crate::san::{
    importance_global, importance_global_rws, importance_instance, importance_instance_clean,
    train, SanConfig,
};
use crate::tabular::{
    apply_standardization, make_classification, standardize, stratified_kfold, Dataset, FoldPlan,
};

/// Multinomial logistic regression with an L2 penalty on the weights
/// (bias unpenalized).
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    /// `n_classes x n_selected_features`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub regularization_c: f64,
}

impl LogRegModel {
    pub fn predict(&self, features: ArrayView2<'_, f64>) -> Vec<usize> {
        let logits = features.dot(&self.weights.t()) + &self.bias;
        logits
            .outer_iter()
            .map(|row| {
                let mut best = 0;
                for (c, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

/// Mean cross-entropy plus `1/(2 c n) * ||W||^2`.
fn lr_objective(
    weights: &Array2<f64>,
    bias: &Array1<f64>,
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    c: f64,
) -> f64 {
    let n = labels.len() as f64;
    let logits = features.dot(&weights.t()) + bias;
    let mut loss = 0.0;
    for (row, &y) in logits.outer_iter().zip(labels) {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let log_sum: f64 = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
        loss += log_sum - row[y];
    }
    let penalty: f64 = weights.iter().map(|w| w * w).sum::<f64>() / (2.0 * c * n);
    loss / n + penalty
}

fn lr_gradient(
    weights: &Array2<f64>,
    bias: &Array1<f64>,
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    c: f64,
) -> (Array2<f64>, Array1<f64>) {
    let n = labels.len() as f64;
    let logits = features.dot(&weights.t()) + bias;
    // p - onehot(y), row by row.
    let mut delta = Array2::zeros(logits.dim());
    for (i, (row, &y)) in logits.outer_iter().zip(labels).enumerate() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        for (cidx, e) in exps.iter().enumerate() {
            delta[[i, cidx]] = e / sum;
        }
        delta[[i, y]] -= 1.0;
    }
    let mut grad_w = delta.t().dot(&features) / n;
    grad_w += &(weights / (c * n));
    let grad_b = delta.sum_axis(Axis(0)) / n;
    (grad_w, grad_b)
}

/// Fits by deterministic full-batch gradient descent with Armijo backtracking;
/// the objective never increases across accepted steps. Stops when the
/// gradient norm drops below `tolerance` or after `max_iters` iterations.
pub fn train_logreg(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    c: f64,
    max_iters: usize,
    tolerance: f64,
) -> Result<LogRegModel> {
    if labels.len() != features.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows but {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if c.is_nan() || c <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "regularization c must be positive, got {c}"
        )));
    }
    let n_classes = labels.iter().max().unwrap() + 1;
    if n_classes < 2 {
        return Err(Error::TooFewClasses(n_classes));
    }

    let d = features.ncols();
    let mut weights = Array2::zeros((n_classes, d));
    let mut bias = Array1::zeros(n_classes);
    let mut objective = lr_objective(&weights, &bias, features, labels, c);
    if !objective.is_finite() {
        return Err(Error::NonFiniteObjective { iter: 0 });
    }

    let mut step = 1.0f64;
    for iter in 0..max_iters {
        let (gw, gb) = lr_gradient(&weights, &bias, features, labels, c);
        let grad_norm2: f64 =
            gw.iter().map(|g| g * g).sum::<f64>() + gb.iter().map(|g| g * g).sum::<f64>();
        if !grad_norm2.is_finite() {
            return Err(Error::NonFiniteObjective { iter });
        }
        if grad_norm2.sqrt() < tolerance {
            break;
        }

        // Backtracking line search, warm-started from the last accepted step.
        let mut t = (step * 2.0).min(1e3);
        let mut accepted = false;
        for _ in 0..60 {
            let try_w = &weights - &(&gw * t);
            let try_b = &bias - &(&gb * t);
            let try_obj = lr_objective(&try_w, &try_b, features, labels, c);
            if try_obj <= objective - 1e-4 * t * grad_norm2 {
                weights = try_w;
                bias = try_b;
                objective = try_obj;
                step = t;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break; // no descent direction progress left at float precision
        }
    }
    Ok(LogRegModel {
        weights,
        bias,
        regularization_c: c,
    })
}

/// Macro F1 over the class universe `0..n_classes`; classes absent from both
/// vectors contribute 0.
pub fn f1_macro_with_classes(predictions: &[usize], truth: &[usize], n_classes: usize) -> f64 {
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&p, &t) in predictions.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let mut sum = 0.0;
    for cidx in 0..n_classes {
        let precision_den = tp[cidx] + fp[cidx];
        let recall_den = tp[cidx] + fn_[cidx];
        if precision_den == 0 || recall_den == 0 {
            continue; // empty class contributes 0
        }
        let precision = tp[cidx] as f64 / precision_den as f64;
        let recall = tp[cidx] as f64 / recall_den as f64;
        if precision + recall > 0.0 {
            sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    sum / n_classes as f64
}

/// Macro F1 with the class universe inferred as `0..=max` observed label.
pub fn f1_macro(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} truth labels",
            predictions.len(),
            truth.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let max = predictions.iter().chain(truth).max().unwrap();
    Ok(f1_macro_with_classes(predictions, truth, max + 1))
}

/// A ranking procedure plus its parameters, ready to fit on a training fold.
#[derive(Debug, Clone)]
pub enum RankerSpec {
    San {
        config: SanConfig,
        variant: AttentionVariant,
    },
    ReliefF(ReliefFParams),
    MutualInfo {
        n_bins: usize,
    },
    RandomForest(ForestParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionVariant {
    Instance,
    InstanceClean,
    Global,
    GlobalRws,
}

impl RankerSpec {
    pub fn method(&self) -> Method {
        match self {
            RankerSpec::San { variant, .. } => match variant {
                AttentionVariant::Instance => Method::Attention,
                AttentionVariant::InstanceClean => Method::AttentionPositive,
                AttentionVariant::Global => Method::AttentionGlobal,
                AttentionVariant::GlobalRws => Method::AttentionGlobalRws,
            },
            RankerSpec::ReliefF(_) => Method::Relieff,
            RankerSpec::MutualInfo { .. } => Method::MutualInfo,
            RankerSpec::RandomForest(_) => Method::RandomForest,
        }
    }

    /// Fits the ranker on `data` as given (no resplitting, no preprocessing).
    pub fn fit(&self, data: &Dataset) -> Result<ImportanceVector> {
        match self {
            RankerSpec::San { config, variant } => {
                let model = train(data, config)?;
                match variant {
                    AttentionVariant::Instance => importance_instance(&model, data),
                    AttentionVariant::InstanceClean => importance_instance_clean(&model, data),
                    AttentionVariant::Global => importance_global(&model, data.feature_names()),
                    AttentionVariant::GlobalRws => {
                        importance_global_rws(&model, data.feature_names())
                    }
                }
            }
            RankerSpec::ReliefF(params) => relieff(data, params),
            RankerSpec::MutualInfo { n_bins } => mutual_information(data, *n_bins),
            RankerSpec::RandomForest(params) => random_forest_importance(data, params),
        }
    }
}

/// Options shared by every fold x cutoff cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub standardize: bool,
    pub logreg_c: f64,
    pub logreg_max_iters: usize,
    pub logreg_tolerance: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            standardize: true,
            logreg_c: 1.0,
            logreg_max_iters: 200,
            logreg_tolerance: 1e-6,
        }
    }
}

/// Relative classification performance over top-n cutoffs.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalCurve {
    pub cutoffs: Vec<usize>,
    /// Fold-mean F1 at each cutoff divided by the fold-mean all-features F1.
    pub relative_f1: Vec<f64>,
    pub method: String,
    /// `per_fold_raw[fold][cutoff_index]`, raw macro F1.
    pub per_fold_raw: Vec<Vec<f64>>,
}

impl EvalCurve {
    /// `cutoff,relative_f1,fold_0,...` rows under a comment header.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = format!("# eval curve: {}\n", self.method);
        out.push_str("cutoff,relative_f1");
        for fold in 0..self.per_fold_raw.len() {
            out.push_str(&format!(",fold_{fold}"));
        }
        out.push('\n');
        for (i, (c, r)) in self.cutoffs.iter().zip(&self.relative_f1).enumerate() {
            out.push_str(&format!("{c},{r}"));
            for fold in &self.per_fold_raw {
                out.push_str(&format!(",{}", fold[i]));
            }
            out.push('\n');
        }
        write_file(path, out.as_bytes())
    }
}

/// Fits the ranking exactly as a sweep fold does: subset to the training
/// portion, optionally standardize, then fit the ranker. Nothing from outside
/// `train_indices` is visible to the ranker.
pub fn fit_fold_ranking(
    data: &Dataset,
    train_indices: &[usize],
    spec: &RankerSpec,
    standardize_first: bool,
) -> Result<ImportanceVector> {
    let train = data.subset(train_indices)?;
    let fitted = if standardize_first {
        standardize(&train).0
    } else {
        train
    };
    spec.fit(&fitted)
}

fn validate_sweep_grid(grid: &[usize], n_features: usize) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty cutoff grid".into()));
    }
    for pair in grid.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidGrid(format!(
                "grid not strictly increasing at {} -> {}",
                pair[0], pair[1]
            )));
        }
    }
    if grid[0] == 0 || grid[grid.len() - 1] > n_features {
        return Err(Error::InvalidGrid(format!(
            "cutoffs must lie in [1, {n_features}]"
        )));
    }
    Ok(())
}

/// Per fold: fit standardization and the ranker on the training portion only,
/// then train one logistic regression per cutoff on the top-n features (set
/// semantics, columns in ascending index order) and score macro F1 on the test
/// portion. The baseline runs the identical protocol with all features.
pub fn topn_sweep(
    data: &Dataset,
    spec: &RankerSpec,
    grid: &[usize],
    folds: &FoldPlan,
    options: &SweepOptions,
) -> Result<EvalCurve> {
    validate_sweep_grid(grid, data.n_features())?;
    if folds.assignments.len() != data.n_instances() {
        return Err(Error::DimensionMismatch(format!(
            "fold plan for {} instances applied to {}",
            folds.assignments.len(),
            data.n_instances()
        )));
    }

    let n_classes = data.n_classes();
    let mut per_fold_raw: Vec<Vec<f64>> = Vec::with_capacity(folds.n_folds);
    let mut baseline: Vec<f64> = Vec::with_capacity(folds.n_folds);

    for fold in 0..folds.n_folds {
        let train_idx = folds.train_indices(fold);
        let test_idx = folds.test_indices(fold);
        let train_sub = data.subset(&train_idx)?;
        let test_sub = data.subset(&test_idx)?;
        let (train_p, test_p) = if options.standardize {
            let (train_std, params) = standardize(&train_sub);
            let test_std = apply_standardization(&test_sub, &params)?;
            (train_std, test_std)
        } else {
            (train_sub, test_sub)
        };

        let ranking = fit_fold_ranking(data, &train_idx, spec, options.standardize)?;

        let fit_and_score = |selected: &[usize]| -> Result<f64> {
            let x_train = train_p.features().select(Axis(1), selected);
            let x_test = test_p.features().select(Axis(1), selected);
            let model = train_logreg(
                x_train.view(),
                train_p.labels(),
                options.logreg_c,
                options.logreg_max_iters,
                options.logreg_tolerance,
            )?;
            let preds = model.predict(x_test.view());
            Ok(f1_macro_with_classes(&preds, test_p.labels(), n_classes))
        };

        let all: Vec<usize> = (0..data.n_features()).collect();
        baseline.push(fit_and_score(&all)?);

        let mut row = Vec::with_capacity(grid.len());
        for &n in grid {
            let mut selected = ranking.top_n(n);
            selected.sort_unstable();
            row.push(fit_and_score(&selected)?);
        }
        per_fold_raw.push(row);
    }

    let n_folds = folds.n_folds as f64;
    let baseline_mean: f64 = baseline.iter().sum::<f64>() / n_folds;
    if baseline_mean == 0.0 {
        return Err(Error::InvalidDataset(
            "all-features baseline F1 is zero; relative curve undefined".into(),
        ));
    }
    let relative_f1: Vec<f64> = (0..grid.len())
        .map(|i| {
            let mean: f64 = per_fold_raw.iter().map(|row| row[i]).sum::<f64>() / n_folds;
            mean / baseline_mean
        })
        .collect();

    Ok(EvalCurve {
        cutoffs: grid.to_vec(),
        relative_f1,
        method: spec.method().to_string(),
        per_fold_raw,
    })
}

/// Outcome of the synthetic attention-difference experiment.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AttnDiffReport {
    /// Mean attention over correctly predicted test instances of class 1;
    /// empty when no qualifying fold contributed such instances.
    pub mean_attention_positive: Vec<f64>,
    /// Same for class 0.
    pub mean_attention_negative: Vec<f64>,
    /// Folds whose test accuracy exceeded 0.5.
    pub folds_used: usize,
    /// Attention mass on ground-truth relevant features.
    pub relevant_mass_positive: f64,
    pub relevant_mass_negative: f64,
}

fn rep_seed(master: u64, rep: usize) -> u64 {
    master ^ (rep as u64 + 1).wrapping_mul(0xbf58_476d_1ce4_e5b9)
}

fn fold_model_seed(master: u64, rep: usize, fold: usize, folds: usize) -> u64 {
    master ^ ((rep * folds + fold) as u64 + 1).wrapping_mul(0x94d0_49bb_1331_11eb)
}

/// Trains one SAN per repetition x fold on synthetic data with a known
/// relevant/irrelevant feature split. Folds with test accuracy above 0.5
/// contribute the attention vectors of their correctly predicted test
/// instances, accumulated per true class. Deterministic per `seed`.
#[allow(clippy::too_many_arguments)]
pub fn attention_difference_experiment(
    n_samples: usize,
    n_features: usize,
    n_informative: usize,
    repetitions: usize,
    folds: usize,
    config: &SanConfig,
    seed: u64,
) -> Result<AttnDiffReport> {
    if repetitions == 0 {
        return Err(Error::InvalidParameter(
            "repetitions must be at least 1".into(),
        ));
    }
    let data = make_classification(n_samples, n_features, n_informative, seed)?;
    let mask = data
        .relevance_mask()
        .expect("synthetic data always carries a mask")
        .to_vec();

    let mut pos_sum = vec![0.0f64; n_features];
    let mut neg_sum = vec![0.0f64; n_features];
    let mut pos_count = 0usize;
    let mut neg_count = 0usize;
    let mut folds_used = 0usize;

    for rep in 0..repetitions {
        let plan = stratified_kfold(&data, folds, rep_seed(seed, rep))?;
        for fold in 0..folds {
            let train_idx = plan.train_indices(fold);
            let test_idx = plan.test_indices(fold);
            let train_sub = data.subset(&train_idx)?;
            let test_sub = data.subset(&test_idx)?;
            let (train_std, params) = standardize(&train_sub);
            let test_std = apply_standardization(&test_sub, &params)?;

            let fold_config = SanConfig {
                seed: fold_model_seed(seed, rep, fold, folds),
                ..config.clone()
            };
            let model = train(&train_std, &fold_config)?;

            let mut correct = Vec::new();
            for i in 0..test_std.n_instances() {
                let pred = model.predict(test_std.instance(i))?;
                if pred == test_std.labels()[i] {
                    correct.push(i);
                }
            }
            let accuracy = correct.len() as f64 / test_std.n_instances() as f64;
            if accuracy > 0.5 {
                folds_used += 1;
                for &i in &correct {
                    let attention = model.attention_vector(test_std.instance(i))?;
                    if test_std.labels()[i] == 1 {
                        for (acc, v) in pos_sum.iter_mut().zip(attention.iter()) {
                            *acc += v;
                        }
                        pos_count += 1;
                    } else {
                        for (acc, v) in neg_sum.iter_mut().zip(attention.iter()) {
                            *acc += v;
                        }
                        neg_count += 1;
                    }
                }
            }
        }
    }

    let finish = |sum: Vec<f64>, count: usize| -> Vec<f64> {
        if count == 0 {
            Vec::new()
        } else {
            sum.into_iter().map(|v| v / count as f64).collect()
        }
    };
    let mean_attention_positive = finish(pos_sum, pos_count);
    let mean_attention_negative = finish(neg_sum, neg_count);
    let mass = |mean: &[f64]| -> f64 {
        mean.iter()
            .zip(&mask)
            .filter(|(_, &rel)| rel)
            .map(|(v, _)| v)
            .sum()
    };
    Ok(AttnDiffReport {
        relevant_mass_positive: mass(&mean_attention_positive),
        relevant_mass_negative: mass(&mean_attention_negative),
        mean_attention_positive,
        mean_attention_negative,
        folds_used,
    })
}
