//! Dataset ingestion, preprocessing, fold planning and synthetic data.

use std::collections::HashSet;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::importance::write_file;

/// Numeric feature matrix with integer class labels.
///
/// Immutable after construction; all invariants (finite entries, dense label
/// range, unique feature names) are checked once in [`Dataset::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
    relevance_mask: Option<Vec<bool>>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
        relevance_mask: Option<Vec<bool>>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} rows but {} labels",
                labels.len()
            )));
        }
        if feature_names.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "{d} feature columns but {} feature names",
                feature_names.len()
            )));
        }
        if let Some(mask) = &relevance_mask {
            if mask.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "{d} features but relevance mask of length {}",
                    mask.len()
                )));
            }
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(
                "feature matrix contains NaN or infinite entries".into(),
            ));
        }
        let n_classes = class_names.len();
        if n_classes < 2 {
            return Err(Error::TooFewClasses(n_classes));
        }
        if n < 2 {
            return Err(Error::TooFewInstances(n));
        }
        let mut seen = vec![false; n_classes];
        for &y in &labels {
            if y >= n_classes {
                return Err(Error::InvalidDataset(format!(
                    "label {y} out of range for {n_classes} classes"
                )));
            }
            seen[y] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidDataset(format!(
                "class {:?} has no instances",
                class_names[missing]
            )));
        }
        let unique: HashSet<&String> = feature_names.iter().collect();
        if unique.len() != feature_names.len() {
            return Err(Error::InvalidDataset("duplicate feature names".into()));
        }
        Ok(Dataset {
            features,
            labels,
            feature_names,
            class_names,
            relevance_mask,
        })
    }

    pub fn n_instances(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn relevance_mask(&self) -> Option<&[bool]> {
        self.relevance_mask.as_deref()
    }

    pub fn instance(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Restricts the dataset to the given instances (in the given order).
    /// The class set is kept, so every class must still be present.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut features = Array2::zeros((indices.len(), self.n_features()));
        let mut labels = Vec::with_capacity(indices.len());
        for (row, &i) in indices.iter().enumerate() {
            if i >= self.n_instances() {
                return Err(Error::InvalidParameter(format!(
                    "instance index {i} out of range"
                )));
            }
            features.row_mut(row).assign(&self.features.row(i));
            labels.push(self.labels[i]);
        }
        Dataset::new(
            features,
            labels,
            self.feature_names.clone(),
            self.class_names.clone(),
            self.relevance_mask.clone(),
        )
    }
}

/// Column means and sample standard deviations fitted on one dataset.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StandardizationParams {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
}

/// Centers and scales every feature to zero mean and unit sample variance.
/// Constant features (std = 0) map to all-zero columns.
pub fn standardize(data: &Dataset) -> (Dataset, StandardizationParams) {
    let n = data.n_instances();
    let d = data.n_features();
    let mut means = vec![0.0; d];
    let mut stds = vec![0.0; d];
    for j in 0..d {
        let col = data.features.column(j);
        let mean = col.sum() / n as f64;
        means[j] = mean;
        if n > 1 {
            let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
            stds[j] = (ss / (n - 1) as f64).sqrt();
        }
    }
    let params = StandardizationParams {
        means,
        std_devs: stds,
    };
    let out = apply_standardization(data, &params).expect("dimensions match by construction");
    (out, params)
}

/// Applies previously fitted parameters; features with std 0 are zeroed.
pub fn apply_standardization(data: &Dataset, params: &StandardizationParams) -> Result<Dataset> {
    let d = data.n_features();
    if params.means.len() != d || params.std_devs.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "params for {} features applied to {d}-feature data",
            params.means.len()
        )));
    }
    let mut features = data.features.clone();
    for j in 0..d {
        let mean = params.means[j];
        let std = params.std_devs[j];
        for v in features.column_mut(j) {
            *v = if std > 0.0 { (*v - mean) / std } else { 0.0 };
        }
    }
    Dataset::new(
        features,
        data.labels.clone(),
        data.feature_names.clone(),
        data.class_names.clone(),
        data.relevance_mask.clone(),
    )
}

/// Stratified fold assignment for every instance of one dataset.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

/// Plans `n_folds` stratified folds: per fold, each class count is within 1 of
/// exact proportionality. Deterministic for a fixed `(data, n_folds, seed)`.
pub fn stratified_kfold(data: &Dataset, n_folds: usize, seed: u64) -> Result<FoldPlan> {
    if n_folds < 2 {
        return Err(Error::InvalidParameter(format!(
            "n_folds must be at least 2, got {n_folds}"
        )));
    }
    let counts = data.class_counts();
    for (c, &count) in counts.iter().enumerate() {
        if count < n_folds {
            return Err(Error::ClassTooSmall {
                class: data.class_names[c].clone(),
                count,
                required: n_folds,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0usize; data.n_instances()];
    for c in 0..data.n_classes() {
        let mut members: Vec<usize> = (0..data.n_instances())
            .filter(|&i| data.labels[i] == c)
            .collect();
        members.shuffle(&mut rng);
        // Rotate the dealing start per class so remainder instances do not all
        // pile onto fold 0.
        let start = c % n_folds;
        for (j, &i) in members.iter().enumerate() {
            assignments[i] = (start + j) % n_folds;
        }
    }
    Ok(FoldPlan {
        n_folds,
        assignments,
        seed,
    })
}

/// Generates a balanced binary problem: `n_informative` features get a
/// class-dependent mean shift of magnitude 1.0, the rest are standard normal
/// noise. The relevance mask records the informative positions.
pub fn make_classification(
    n_samples: usize,
    n_features: usize,
    n_informative: usize,
    seed: u64,
) -> Result<Dataset> {
    if n_samples < 4 {
        return Err(Error::InvalidParameter(format!(
            "n_samples must be at least 4, got {n_samples}"
        )));
    }
    if n_features == 0 || n_informative == 0 || n_informative > n_features {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= n_informative <= n_features, got {n_informative} of {n_features}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let informative = rand::seq::index::sample(&mut rng, n_features, n_informative).into_vec();
    let mut mask = vec![false; n_features];
    for &j in &informative {
        mask[j] = true;
    }
    let mut features = Array2::zeros((n_samples, n_features));
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let y = i % 2;
        labels.push(y);
        let shift = if y == 1 { 0.5 } else { -0.5 };
        for j in 0..n_features {
            let z: f64 = rng.sample(StandardNormal);
            features[[i, j]] = if mask[j] { z + shift } else { z };
        }
    }
    Dataset::new(
        features,
        labels,
        (0..n_features).map(|j| format!("f{j}")).collect(),
        vec!["0".into(), "1".into()],
        Some(mask),
    )
}

/// Selects the target column of a CSV file by name or position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetColumn {
    Name(String),
    Index(usize),
}

impl FromStr for TargetColumn {
    type Err = std::convert::Infallible;

    /// Any string is a valid selector: a name match is tried first, then the
    /// string is read as a 0-based column index.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(TargetColumn::Name(s.to_string()))
    }
}

impl std::fmt::Display for TargetColumn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TargetColumn::Name(n) => f.write_str(n),
            TargetColumn::Index(i) => write!(f, "#{i}"),
        }
    }
}

impl TargetColumn {
    fn resolve(&self, header: &[String]) -> Option<usize> {
        match self {
            TargetColumn::Index(i) => (*i < header.len()).then_some(*i),
            TargetColumn::Name(name) => {
                header
                    .iter()
                    .position(|h| h == name)
                    .or_else(|| match name.parse::<usize>() {
                        Ok(i) if i < header.len() => Some(i),
                        _ => None,
                    })
            }
        }
    }

    fn describe(&self) -> String {
        match self {
            TargetColumn::Name(n) => n.clone(),
            TargetColumn::Index(i) => format!("#{i}"),
        }
    }
}

/// Loads a comma-separated UTF-8 file with a header row. Every non-target cell
/// must parse as a finite number; target cells are categorical tokens encoded
/// by first appearance.
pub fn load_csv(path: &Path, target: &TargetColumn) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header_line) = lines.next().ok_or_else(|| Error::Csv {
        path: path.into(),
        line: 1,
        column: "header".into(),
        message: "file is empty".into(),
    })?;
    let header: Vec<String> = header_line
        .trim_end_matches('\r')
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let target_idx = target
        .resolve(&header)
        .ok_or_else(|| Error::MissingTargetColumn(target.describe()))?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != target_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(Error::Csv {
                path: path.into(),
                line: lineno + 1,
                column: "row".into(),
                message: format!("expected {} cells, got {}", header.len(), cells.len()),
            });
        }
        let mut row = Vec::with_capacity(header.len() - 1);
        for (j, cell) in cells.iter().enumerate() {
            if j == target_idx {
                let token = cell.to_string();
                let class = match class_names.iter().position(|c| *c == token) {
                    Some(c) => c,
                    None => {
                        class_names.push(token);
                        class_names.len() - 1
                    }
                };
                labels.push(class);
            } else {
                let value: f64 = cell.parse().map_err(|_| Error::Csv {
                    path: path.into(),
                    line: lineno + 1,
                    column: header[j].clone(),
                    message: format!("cannot parse {cell:?} as a number"),
                })?;
                if !value.is_finite() {
                    return Err(Error::Csv {
                        path: path.into(),
                        line: lineno + 1,
                        column: header[j].clone(),
                        message: format!("non-finite value {cell:?}"),
                    });
                }
                row.push(value);
            }
        }
        rows.push(row);
    }

    if rows.len() < 2 {
        return Err(Error::TooFewInstances(rows.len()));
    }
    if class_names.len() < 2 {
        return Err(Error::TooFewClasses(class_names.len()));
    }
    let n = rows.len();
    let d = feature_names.len();
    let mut features = Array2::zeros((n, d));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            features[[i, j]] = v;
        }
    }
    Dataset::new(features, labels, feature_names, class_names, None)
}

/// Writes the dataset back to CSV with the target as the last column. Values
/// use the shortest representation that parses back to the same float, so
/// `load_csv(write_csv(d)) == d`.
pub fn write_csv(data: &Dataset, path: &Path, target_name: &str) -> Result<()> {
    let mut out = String::new();
    for name in data.feature_names() {
        out.push_str(name);
        out.push(',');
    }
    out.push_str(target_name);
    out.push('\n');
    for i in 0..data.n_instances() {
        for v in data.features.row(i) {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&data.class_names[data.labels[i]]);
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Single-column 0/1 CSV with header `relevant`, one row per feature.
pub fn write_relevance_mask(mask: &[bool], path: &Path) -> Result<()> {
    let mut out = String::from("relevant\n");
    for &m in mask {
        out.push_str(if m { "1\n" } else { "0\n" });
    }
    write_file(path, out.as_bytes())
}

pub fn read_relevance_mask(path: &Path) -> Result<Vec<bool>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut mask = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if lineno == 0 {
            if line != "relevant" {
                return Err(Error::Csv {
                    path: path.into(),
                    line: 1,
                    column: "header".into(),
                    message: format!("expected `relevant`, got {line:?}"),
                });
            }
            continue;
        }
        match line {
            "0" => mask.push(false),
            "1" => mask.push(true),
            "" => continue,
            other => {
                return Err(Error::Csv {
                    path: path.into(),
                    line: lineno + 1,
                    column: "relevant".into(),
                    message: format!("expected 0 or 1, got {other:?}"),
                })
            }
        }
    }
    Ok(mask)
}
