//! Pairwise ranking similarity: fuzzy Jaccard (FUJI) curves over top-n
//! cutoffs, crisp Jaccard reference curves, and Simpson-rule area aggregation.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::importance::{write_file, ImportanceVector};

/// Similarity values over a grid of top-n cutoffs for one pair of rankings.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FujiCurve {
    pub cutoffs: Vec<usize>,
    pub values: Vec<f64>,
    pub ranking_a_method: String,
    pub ranking_b_method: String,
}

impl FujiCurve {
    /// `cutoff,value` rows under a comment header naming both methods.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = format!(
            "# fuji curve: {} vs {}\ncutoff,value\n",
            self.ranking_a_method, self.ranking_b_method
        );
        for (c, v) in self.cutoffs.iter().zip(&self.values) {
            out.push_str(&format!("{c},{v}\n"));
        }
        write_file(path, out.as_bytes())
    }
}

/// Symmetric matrix of Simpson-rule FUJI areas for a set of rankings.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimilarityMatrix {
    pub methods: Vec<String>,
    pub areas: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("method");
        for m in &self.methods {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for (i, m) in self.methods.iter().enumerate() {
            out.push_str(m);
            for v in &self.areas[i] {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        write_file(path, out.as_bytes())
    }

    pub fn read_csv(path: &Path) -> Result<SimilarityMatrix> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Csv {
            path: path.into(),
            line: 1,
            column: "header".into(),
            message: "empty matrix file".into(),
        })?;
        let methods: Vec<String> = header.split(',').skip(1).map(|s| s.to_string()).collect();
        let mut areas = Vec::new();
        for (row, line) in lines.enumerate() {
            let mut cells = line.split(',');
            cells.next(); // row label
            let values: std::result::Result<Vec<f64>, _> =
                cells.map(|c| c.parse::<f64>()).collect();
            let values = values.map_err(|_| Error::Csv {
                path: path.into(),
                line: row + 2,
                column: "area".into(),
                message: "cannot parse area value".into(),
            })?;
            if values.len() != methods.len() {
                return Err(Error::Csv {
                    path: path.into(),
                    line: row + 2,
                    column: "row".into(),
                    message: format!("expected {} values, got {}", methods.len(), values.len()),
                });
            }
            areas.push(values);
        }
        if areas.len() != methods.len() {
            return Err(Error::Csv {
                path: path.into(),
                line: areas.len() + 1,
                column: "matrix".into(),
                message: "matrix is not square".into(),
            });
        }
        Ok(SimilarityMatrix { methods, areas })
    }

    /// Elementwise mean of several matrices over the same method set, e.g. one
    /// per dataset.
    pub fn mean_of(matrices: &[SimilarityMatrix]) -> Result<SimilarityMatrix> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidParameter("need at least one matrix to average".into()))?;
        for m in matrices {
            if m.methods != first.methods {
                return Err(Error::FeatureMismatch(format!(
                    "method sets differ: {:?} vs {:?}",
                    first.methods, m.methods
                )));
            }
        }
        let k = first.methods.len();
        let mut areas = vec![vec![0.0; k]; k];
        for m in matrices {
            for i in 0..k {
                for j in 0..k {
                    areas[i][j] += m.areas[i][j];
                }
            }
        }
        for row in &mut areas {
            for v in row.iter_mut() {
                *v /= matrices.len() as f64;
            }
        }
        Ok(SimilarityMatrix {
            methods: first.methods.clone(),
            areas,
        })
    }
}

/// Checks both rankings cover the same feature set and returns, for each
/// position in `a`, the matching score position in `b`.
fn align(a: &ImportanceVector, b: &ImportanceVector) -> Result<Vec<usize>> {
    if a.n_features() != b.n_features() {
        return Err(Error::FeatureMismatch(format!(
            "{} vs {} features",
            a.n_features(),
            b.n_features()
        )));
    }
    let lookup: HashMap<&str, usize> = b
        .feature_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    a.feature_names
        .iter()
        .map(|n| {
            lookup.get(n.as_str()).copied().ok_or_else(|| {
                Error::FeatureMismatch(format!("feature {n:?} missing from the second ranking"))
            })
        })
        .collect()
}

/// Fuzzy top-n membership: `min(1, score/theta)` where `theta` is the n-th
/// largest score. Degenerates to crisp membership when `theta` is 0.
fn memberships(scores: &[f64], n: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite scores"));
    let theta = sorted[n - 1];
    if theta > 0.0 {
        scores.iter().map(|&s| (s / theta).min(1.0)).collect()
    } else {
        // Crisp fallback: exactly the top-n positions by (score desc, index asc).
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&x, &y| {
            scores[y]
                .partial_cmp(&scores[x])
                .expect("finite scores")
                .then(x.cmp(&y))
        });
        let mut mu = vec![0.0; scores.len()];
        for &i in idx.iter().take(n) {
            mu[i] = 1.0;
        }
        mu
    }
}

fn validate_cutoff(n: usize, n_features: usize) -> Result<()> {
    if n == 0 || n > n_features {
        return Err(Error::InvalidGrid(format!(
            "cutoff {n} outside [1, {n_features}]"
        )));
    }
    Ok(())
}

/// Fuzzy Jaccard similarity of the two rankings' top-n sets: the ratio of
/// summed min-memberships to summed max-memberships. Scale-free in either
/// ranking's scores.
pub fn fuji_at_cutoff(a: &ImportanceVector, b: &ImportanceVector, n: usize) -> Result<f64> {
    let map = align(a, b)?;
    validate_cutoff(n, a.n_features())?;
    let mu_a = memberships(&a.scores, n);
    let mu_b_raw = memberships(&b.scores, n);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &j) in map.iter().enumerate() {
        let (x, y) = (mu_a[i], mu_b_raw[j]);
        num += x.min(y);
        den += x.max(y);
    }
    Ok(num / den)
}

fn validate_grid(grid: &[usize], n_features: usize) -> Result<()> {
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
    validate_cutoff(grid[0], n_features)?;
    validate_cutoff(grid[grid.len() - 1], n_features)
}

/// Every integer up to `min(n_features, 100)`, then logarithmically spaced
/// points out to `n_features`.
pub fn default_cutoff_grid(n_features: usize) -> Vec<usize> {
    let dense_end = n_features.min(100);
    let mut grid: Vec<usize> = (1..=dense_end).collect();
    if n_features > dense_end {
        let steps = 24usize;
        let lo = (dense_end as f64).ln();
        let hi = (n_features as f64).ln();
        for s in 1..=steps {
            let v = (lo + (hi - lo) * s as f64 / steps as f64).exp().round() as usize;
            let v = v.clamp(dense_end + 1, n_features);
            if *grid.last().unwrap() < v {
                grid.push(v);
            }
        }
        if *grid.last().unwrap() != n_features {
            grid.push(n_features);
        }
    }
    grid
}

pub fn fuji_curve(a: &ImportanceVector, b: &ImportanceVector, grid: &[usize]) -> Result<FujiCurve> {
    validate_grid(grid, a.n_features())?;
    let values = grid
        .iter()
        .map(|&n| fuji_at_cutoff(a, b, n))
        .collect::<Result<Vec<f64>>>()?;
    Ok(FujiCurve {
        cutoffs: grid.to_vec(),
        values,
        ranking_a_method: a.method.to_string(),
        ranking_b_method: b.method.to_string(),
    })
}

/// Set-based Jaccard index of the crisp top-n sets per cutoff.
pub fn crisp_jaccard_curve(
    a: &ImportanceVector,
    b: &ImportanceVector,
    grid: &[usize],
) -> Result<FujiCurve> {
    let map = align(a, b)?;
    validate_grid(grid, a.n_features())?;
    let order_a = a.ranked_indices();
    // b's ranking expressed in a's index space.
    let mut inverse = vec![0usize; map.len()];
    for (i, &j) in map.iter().enumerate() {
        inverse[j] = i;
    }
    let order_b: Vec<usize> = b.ranked_indices().into_iter().map(|j| inverse[j]).collect();

    let mut values = Vec::with_capacity(grid.len());
    for &n in grid {
        let set_a: std::collections::HashSet<usize> = order_a.iter().take(n).cloned().collect();
        let set_b: std::collections::HashSet<usize> = order_b.iter().take(n).cloned().collect();
        let inter = set_a.intersection(&set_b).count() as f64;
        let union = set_a.union(&set_b).count() as f64;
        values.push(inter / union);
    }
    Ok(FujiCurve {
        cutoffs: grid.to_vec(),
        values,
        ranking_a_method: a.method.to_string(),
        ranking_b_method: b.method.to_string(),
    })
}

/// Composite Simpson's rule over consecutive point triples (quadratic fit per
/// triple, valid on non-uniform grids); a trailing odd interval falls back to
/// the trapezoid rule. The area is normalized by the cutoff span, so a
/// constant-1 curve integrates to exactly 1.
pub fn simpson_auc(curve: &FujiCurve) -> Result<f64> {
    let x: Vec<f64> = curve.cutoffs.iter().map(|&c| c as f64).collect();
    let y = &curve.values;
    if x.len() < 2 {
        return Err(Error::InvalidGrid(
            "need at least 2 curve points to integrate".into(),
        ));
    }
    let mut area = 0.0;
    let mut i = 0;
    while i + 2 < x.len() {
        // Quadratic through (x[i], x[i+1], x[i+2]).
        let h0 = x[i + 1] - x[i];
        let h1 = x[i + 2] - x[i + 1];
        let span = h0 + h1;
        area += span / 6.0
            * ((2.0 - h1 / h0) * y[i]
                + (span * span / (h0 * h1)) * y[i + 1]
                + (2.0 - h0 / h1) * y[i + 2]);
        i += 2;
    }
    if i + 1 < x.len() {
        area += (x[i + 1] - x[i]) * (y[i] + y[i + 1]) / 2.0;
    }
    Ok(area / (x[x.len() - 1] - x[0]))
}

/// Pairwise Simpson areas of FUJI curves for every method pair. The diagonal
/// is 1 and the matrix is exactly symmetric.
pub fn similarity_matrix(
    rankings: &[ImportanceVector],
    grid: &[usize],
) -> Result<SimilarityMatrix> {
    if rankings.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least 2 rankings to compare".into(),
        ));
    }
    let k = rankings.len();
    let mut areas = vec![vec![0.0; k]; k];
    for i in 0..k {
        areas[i][i] = 1.0;
        for j in i + 1..k {
            let curve = fuji_curve(&rankings[i], &rankings[j], grid)?;
            // Quadratic overshoot on very uneven grids could leave [0,1].
            let v = simpson_auc(&curve)?.clamp(0.0, 1.0);
            areas[i][j] = v;
            areas[j][i] = v;
        }
    }
    Ok(SimilarityMatrix {
        methods: rankings.iter().map(|r| r.method.to_string()).collect(),
        areas,
    })
}
