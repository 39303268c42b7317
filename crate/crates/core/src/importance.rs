//! Per-feature importance scores and their CSV form.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Identity of the procedure that produced a ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Method {
    #[serde(rename = "attention")]
    Attention,
    #[serde(rename = "attentionPositive")]
    AttentionPositive,
    #[serde(rename = "attentionGlobal")]
    AttentionGlobal,
    #[serde(rename = "attentionGlobalRWS")]
    AttentionGlobalRws,
    #[serde(rename = "relieff")]
    Relieff,
    #[serde(rename = "mutual_info")]
    MutualInfo,
    #[serde(rename = "random_forest")]
    RandomForest,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Attention,
        Method::AttentionPositive,
        Method::AttentionGlobal,
        Method::AttentionGlobalRws,
        Method::Relieff,
        Method::MutualInfo,
        Method::RandomForest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Attention => "attention",
            Method::AttentionPositive => "attentionPositive",
            Method::AttentionGlobal => "attentionGlobal",
            Method::AttentionGlobalRws => "attentionGlobalRWS",
            Method::Relieff => "relieff",
            Method::MutualInfo => "mutual_info",
            Method::RandomForest => "random_forest",
        }
    }

    /// True for the four extractors that need a trained attention model.
    pub fn is_attention(self) -> bool {
        matches!(
            self,
            Method::Attention
                | Method::AttentionPositive
                | Method::AttentionGlobal
                | Method::AttentionGlobalRws
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attention" => Ok(Method::Attention),
            // "attentionClean" is the historical label for the same extractor.
            "attentionPositive" | "attentionClean" => Ok(Method::AttentionPositive),
            "attentionGlobal" => Ok(Method::AttentionGlobal),
            "attentionGlobalRWS" => Ok(Method::AttentionGlobalRws),
            "relieff" => Ok(Method::Relieff),
            "mutual_info" => Ok(Method::MutualInfo),
            "random_forest" => Ok(Method::RandomForest),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

/// Non-negative per-feature scores produced by one ranker.
///
/// `scores[i]` belongs to `feature_names[i]`; the vector keeps the dataset's
/// original feature order. Ranking order is derived on demand.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ImportanceVector {
    pub scores: Vec<f64>,
    pub method: Method,
    pub feature_names: Vec<String>,
    /// Free-form extras a ranker wants to surface (e.g. ReliefF's shift offset).
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl ImportanceVector {
    pub fn new(scores: Vec<f64>, method: Method, feature_names: Vec<String>) -> Result<Self> {
        if scores.len() != feature_names.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} scores for {} feature names",
                scores.len(),
                feature_names.len()
            )));
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "importance scores must be finite and non-negative, got {bad}"
            )));
        }
        Ok(ImportanceVector {
            scores,
            method,
            feature_names,
            metadata: BTreeMap::new(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.scores.len()
    }

    /// Feature indices sorted by descending score, ties by ascending index.
    pub fn ranked_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| {
            self.scores[b]
                .partial_cmp(&self.scores[a])
                .expect("scores are finite")
                .then(a.cmp(&b))
        });
        idx
    }

    /// The top-`n` feature indices under [`Self::ranked_indices`] order.
    pub fn top_n(&self, n: usize) -> Vec<usize> {
        let mut top = self.ranked_indices();
        top.truncate(n);
        top
    }

    /// Writes `feature,score,rank` rows sorted by descending score
    /// (ties by ascending feature index). Rank is 1-based.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("feature,score,rank\n");
        for (rank, &i) in self.ranked_indices().iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.feature_names[i],
                self.scores[i],
                rank + 1
            ));
        }
        write_file(path, out.as_bytes())
    }

    /// Reads a file produced by [`Self::write_csv`]. The method tag is not part
    /// of the CSV, so the caller supplies it (e.g. from a sidecar).
    pub fn read_csv(path: &Path, method: Method) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut names = Vec::new();
        let mut scores = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if lineno == 0 {
                if line.trim() != "feature,score,rank" {
                    return Err(Error::Csv {
                        path: path.into(),
                        line: 1,
                        column: "header".into(),
                        message: format!("expected `feature,score,rank`, got {line:?}"),
                    });
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::Csv {
                    path: path.into(),
                    line: lineno + 1,
                    column: "row".into(),
                    message: format!("expected 3 fields, got {}", parts.len()),
                });
            }
            let score: f64 = parts[1].parse().map_err(|_| Error::Csv {
                path: path.into(),
                line: lineno + 1,
                column: "score".into(),
                message: format!("cannot parse {:?} as a number", parts[1]),
            })?;
            names.push(parts[0].to_string());
            scores.push(score);
        }
        ImportanceVector::new(scores, method, names)
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
