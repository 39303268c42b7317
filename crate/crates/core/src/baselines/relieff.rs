//! Multi-class ReliefF.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::importance::{ImportanceVector, Method};
use crate::tabular::Dataset;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReliefFParams {
    pub n_neighbors: usize,
    /// Number of reference instances; `None` uses every instance.
    pub sample_size: Option<usize>,
    pub seed: u64,
}

impl Default for ReliefFParams {
    fn default() -> Self {
        ReliefFParams {
            n_neighbors: 10,
            sample_size: None,
            seed: 0,
        }
    }
}

/// Weights features by how well they separate each reference instance from its
/// nearest misses relative to its nearest hits. Neighbors are found with the
/// Euclidean distance over all features; per-feature differences are
/// normalized by the feature's observed range. The final weights are shifted
/// by their minimum so every score is non-negative; the shift is recorded in
/// `metadata["shift_offset"]`.
pub fn relieff(data: &Dataset, params: &ReliefFParams) -> Result<ImportanceVector> {
    if params.n_neighbors == 0 {
        return Err(Error::InvalidParameter(
            "n_neighbors must be at least 1".into(),
        ));
    }
    let n = data.n_instances();
    let d = data.n_features();
    let counts = data.class_counts();
    if let Some(small) = counts.iter().position(|&c| c < 2) {
        return Err(Error::ClassTooSmall {
            class: data.class_names()[small].clone(),
            count: counts[small],
            required: 2,
        });
    }

    // Per-class effective neighbor counts; shrunk when a class is too small.
    let k = params.n_neighbors;
    let mut k_hit = vec![0usize; counts.len()];
    let mut k_miss = vec![0usize; counts.len()];
    for (c, &count) in counts.iter().enumerate() {
        k_hit[c] = k.min(count - 1);
        k_miss[c] = k.min(count);
        if count < k + 1 {
            log::warn!(
                "relieff: class {:?} has {} members; using {} neighbors for it",
                data.class_names()[c],
                count,
                count - 1
            );
        }
    }

    let features = data.features();
    let labels = data.labels();
    let mut ranges = vec![0.0f64; d];
    for j in 0..d {
        let col = features.column(j);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in col {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        ranges[j] = hi - lo;
    }
    let diff = |f: usize, a: usize, b: usize| -> f64 {
        if ranges[f] > 0.0 {
            (features[[a, f]] - features[[b, f]]).abs() / ranges[f]
        } else {
            0.0
        }
    };

    let references: Vec<usize> = match params.sample_size {
        Some(m) if m < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            let mut sample = rand::seq::index::sample(&mut rng, n, m).into_vec();
            sample.sort_unstable();
            sample
        }
        _ => (0..n).collect(),
    };
    let m = references.len() as f64;

    let priors: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let mut weights = vec![0.0f64; d];

    for &i in &references {
        let ci = labels[i];
        // Distances to everything else, sorted per class by (distance, index).
        let mut by_class: Vec<Vec<(f64, usize)>> = vec![Vec::new(); counts.len()];
        for j in 0..n {
            if j == i {
                continue;
            }
            let mut dist2 = 0.0;
            for f in 0..d {
                let delta = features[[i, f]] - features[[j, f]];
                dist2 += delta * delta;
            }
            by_class[labels[j]].push((dist2, j));
        }
        for list in &mut by_class {
            list.sort_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .expect("finite distances")
                    .then(a.1.cmp(&b.1))
            });
        }

        let kh = k_hit[ci];
        for &(_, hit) in by_class[ci].iter().take(kh) {
            for (f, w) in weights.iter_mut().enumerate() {
                *w -= diff(f, i, hit) / (m * kh as f64);
            }
        }
        for (c, list) in by_class.iter().enumerate() {
            if c == ci {
                continue;
            }
            let km = k_miss[c];
            let prior_factor = priors[c] / (1.0 - priors[ci]);
            for &(_, miss) in list.iter().take(km) {
                for (f, w) in weights.iter_mut().enumerate() {
                    *w += prior_factor * diff(f, i, miss) / (m * km as f64);
                }
            }
        }
    }

    let min_w = weights.iter().cloned().fold(f64::INFINITY, f64::min);
    let scores: Vec<f64> = weights.iter().map(|w| w - min_w).collect();
    let mut iv = ImportanceVector::new(scores, Method::Relieff, data.feature_names().to_vec())?;
    iv.metadata
        .insert("shift_offset".into(), format!("{min_w}"));
    Ok(iv)
}
