//! The four attention-based importance extractors.
//!
//! Two are instance-level aggregations over a dataset, two read the trained
//! weight matrices directly and need no data at all.

use ndarray::Array1;

use super::{softmax, SanModel};
use crate::error::{Error, Result};
use crate::importance::{ImportanceVector, Method};
use crate::tabular::Dataset;

fn check_names(model: &SanModel, names: &[String]) -> Result<()> {
    if names.len() != model.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature names for a {}-feature model",
            names.len(),
            model.n_features()
        )));
    }
    Ok(())
}

/// Mean attention vector over all instances (method `attention`).
/// Sums to 1: every attention vector lies on the simplex.
pub fn importance_instance(model: &SanModel, data: &Dataset) -> Result<ImportanceVector> {
    check_names(model, data.feature_names())?;
    let n = data.n_instances();
    let mut acc = Array1::zeros(model.n_features());
    for i in 0..n {
        acc += &model.attention_vector(data.instance(i))?;
    }
    acc /= n as f64;
    ImportanceVector::new(
        acc.to_vec(),
        Method::Attention,
        data.feature_names().to_vec(),
    )
}

/// Mean attention restricted to correctly predicted instances, still divided
/// by the full instance count (method `attentionPositive`). The scores
/// therefore sum to the model's accuracy on `data`.
pub fn importance_instance_clean(model: &SanModel, data: &Dataset) -> Result<ImportanceVector> {
    check_names(model, data.feature_names())?;
    let n = data.n_instances();
    let mut acc = Array1::zeros(model.n_features());
    for i in 0..n {
        let x = data.instance(i);
        if model.predict(x)? == data.labels()[i] {
            acc += &model.attention_vector(x)?;
        }
    }
    acc /= n as f64;
    ImportanceVector::new(
        acc.to_vec(),
        Method::AttentionPositive,
        data.feature_names().to_vec(),
    )
}

/// Softmax of each head's weight-matrix diagonal, averaged over heads
/// (method `attentionGlobal`). Needs no data.
pub fn importance_global(model: &SanModel, feature_names: &[String]) -> Result<ImportanceVector> {
    check_names(model, feature_names)?;
    let mut acc = Array1::zeros(model.n_features());
    for w in &model.attention_weights {
        let diag = w.diag().to_owned();
        acc += &softmax(diag.view());
    }
    acc /= model.n_heads() as f64;
    ImportanceVector::new(
        acc.to_vec(),
        Method::AttentionGlobal,
        feature_names.to_vec(),
    )
}

/// Row-wise softmax variant (method `attentionGlobalRWS`): softmax every row
/// of each head's weight matrix, keep the main diagonal, average over heads.
/// Entries lie in (0,1) but need not sum to 1.
pub fn importance_global_rws(
    model: &SanModel,
    feature_names: &[String],
) -> Result<ImportanceVector> {
    check_names(model, feature_names)?;
    let f = model.n_features();
    let mut acc = Array1::zeros(f);
    for w in &model.attention_weights {
        for (r, row) in w.outer_iter().enumerate() {
            acc[r] += softmax(row)[r];
        }
    }
    acc /= model.n_heads() as f64;
    ImportanceVector::new(
        acc.to_vec(),
        Method::AttentionGlobalRws,
        feature_names.to_vec(),
    )
}

/// Fraction of instances whose argmax prediction matches the label.
pub fn accuracy(model: &SanModel, data: &Dataset) -> Result<f64> {
    let mut correct = 0usize;
    for i in 0..data.n_instances() {
        if model.predict(data.instance(i))? == data.labels()[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.n_instances() as f64)
}
