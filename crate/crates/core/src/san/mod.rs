//! Self-attention network for tabular data.
//!
//! The first layer keeps a bijection with the input features: each attention
//! head holds an `|F| x |F|` weight matrix whose softmax-activated output gates
//! the input elementwise. Two dense layers (SELU, then softmax) follow. Feature
//! importances are read off the attention layer by [`importance_instance`],
//! [`importance_instance_clean`], [`importance_global`] and
//! [`importance_global_rws`].

mod extract;
mod train;

pub use extract::{
    accuracy, importance_global, importance_global_rws, importance_instance,
    importance_instance_clean,
};
pub use train::{loss_and_gradients, train, SanGradients};

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Hyperparameters for one training run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SanConfig {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub n_heads: usize,
    pub selu_lambda: f64,
    pub selu_alpha: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
}

impl Default for SanConfig {
    fn default() -> Self {
        SanConfig {
            hidden_dim: 128,
            epochs: 32,
            batch_size: 5,
            learning_rate: 0.001,
            dropout_rate: 0.20,
            n_heads: 1,
            selu_lambda: 1.05070098,
            selu_alpha: 1.67326324,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl SanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.n_heads == 0 {
            return bad("n_heads must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!(
                "dropout_rate must be in [0,1), got {}",
                self.dropout_rate
            ));
        }
        if self.selu_lambda <= 0.0 || self.selu_alpha <= 0.0 {
            return bad("SELU constants must be positive".into());
        }
        if self.adam_beta1 <= 0.0
            || self.adam_beta1 >= 1.0
            || self.adam_beta2 <= 0.0
            || self.adam_beta2 >= 1.0
            || self.adam_epsilon <= 0.0
        {
            return bad("Adam constants out of range".into());
        }
        Ok(())
    }
}

/// Numerically stable softmax; invariant under adding a constant to all inputs.
pub fn softmax(v: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = v.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut out = v.mapv(|x| (x - max).exp());
    let sum = out.sum();
    out.mapv_inplace(|x| x / sum);
    out
}

/// Scaled exponential linear unit.
pub fn selu(x: f64, lambda: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        lambda * x
    } else {
        lambda * alpha * (x.exp() - 1.0)
    }
}

fn selu_deriv(x: f64, lambda: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        lambda
    } else {
        lambda * alpha * x.exp()
    }
}

/// All parameters of one trained (or freshly initialized) network.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SanModel {
    /// One `|F| x |F|` matrix per head.
    pub attention_weights: Vec<Array2<f64>>,
    /// One length-`|F|` bias per head.
    pub attention_biases: Vec<Array1<f64>>,
    /// Dense layer `hidden_dim x |F|`.
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// Output layer `n_classes x hidden_dim`.
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub config: SanConfig,
}

pub(crate) struct ForwardCache {
    /// Per-head softmax attention for the instance.
    pub attentions: Vec<Array1<f64>>,
    pub omega: Array1<f64>,
    pub h_pre: Array1<f64>,
    pub h_dropped: Array1<f64>,
    /// Element i was kept with inverted scale `drop_scale[i]`; `None` when
    /// dropout is inactive.
    pub drop_scale: Option<Array1<f64>>,
    pub probs: Array1<f64>,
}

impl SanModel {
    /// Seed-deterministic initialization: weights uniform in
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, attention biases zero.
    pub fn init(n_features: usize, n_classes: usize, config: &SanConfig) -> Result<SanModel> {
        config.validate()?;
        if n_features == 0 {
            return Err(Error::InvalidParameter(
                "n_features must be positive".into(),
            ));
        }
        if n_classes < 2 {
            return Err(Error::TooFewClasses(n_classes));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let in_scale = 1.0 / (n_features as f64).sqrt();
        let hid_scale = 1.0 / (config.hidden_dim as f64).sqrt();
        let attention_weights = (0..config.n_heads)
            .map(|_| rand_matrix(n_features, n_features, in_scale, &mut rng))
            .collect();
        let attention_biases = vec![Array1::zeros(n_features); config.n_heads];
        let w1 = rand_matrix(config.hidden_dim, n_features, in_scale, &mut rng);
        let b1 = rand_vector(config.hidden_dim, in_scale, &mut rng);
        let w2 = rand_matrix(n_classes, config.hidden_dim, hid_scale, &mut rng);
        let b2 = rand_vector(n_classes, hid_scale, &mut rng);
        Ok(SanModel {
            attention_weights,
            attention_biases,
            w1,
            b1,
            w2,
            b2,
            config: config.clone(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.w1.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.w2.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn n_heads(&self) -> usize {
        self.attention_weights.len()
    }

    /// Total number of trainable scalars:
    /// `k|F|^2 + k|F| + hidden*|F| + hidden + |C|*hidden + |C|`.
    pub fn param_count(&self) -> usize {
        let f = self.n_features();
        let k = self.n_heads();
        k * f * f + k * f + self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn is_finite(&self) -> bool {
        self.attention_weights
            .iter()
            .all(|w| w.iter().all(|v| v.is_finite()))
            && self
                .attention_biases
                .iter()
                .all(|b| b.iter().all(|v| v.is_finite()))
            && self.w1.iter().all(|v| v.is_finite())
            && self.b1.iter().all(|v| v.is_finite())
            && self.w2.iter().all(|v| v.is_finite())
            && self.b2.iter().all(|v| v.is_finite())
    }

    fn check_input(&self, x: ArrayView1<'_, f64>) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch(format!(
                "input of length {} for a {}-feature model",
                x.len(),
                self.n_features()
            )));
        }
        Ok(())
    }

    /// Head-averaged `softmax(W^k x + b^k)`; sums to 1 for any input.
    pub fn attention_vector(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check_input(x)?;
        let mut acc = Array1::zeros(self.n_features());
        for (w, b) in self.attention_weights.iter().zip(&self.attention_biases) {
            let z = w.dot(&x) + b;
            acc += &softmax(z.view());
        }
        Ok(acc / self.n_heads() as f64)
    }

    /// Attention layer output: the input gated elementwise by each head's
    /// softmax attention, averaged over heads.
    pub fn omega(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check_input(x)?;
        let mut acc = Array1::zeros(self.n_features());
        for (w, b) in self.attention_weights.iter().zip(&self.attention_biases) {
            let z = w.dot(&x) + b;
            acc += &(&x * &softmax(z.view()));
        }
        Ok(acc / self.n_heads() as f64)
    }

    /// Full pass. Returns class probabilities and the attention vector.
    /// With `train_mode` the hidden activation gets inverted-scaling dropout;
    /// inference never touches the random stream.
    pub fn forward<R: Rng>(
        &self,
        x: ArrayView1<'_, f64>,
        train_mode: bool,
        rng: &mut R,
    ) -> Result<(Array1<f64>, Array1<f64>)> {
        let cache = self.forward_cached(x, train_mode, rng)?;
        let mut attention = Array1::zeros(self.n_features());
        for a in &cache.attentions {
            attention += a;
        }
        attention /= self.n_heads() as f64;
        Ok((cache.probs, attention))
    }

    pub(crate) fn forward_cached<R: Rng>(
        &self,
        x: ArrayView1<'_, f64>,
        train_mode: bool,
        rng: &mut R,
    ) -> Result<ForwardCache> {
        self.check_input(x)?;
        let k = self.n_heads();
        let mut attentions = Vec::with_capacity(k);
        let mut omega = Array1::zeros(self.n_features());
        for (w, b) in self.attention_weights.iter().zip(&self.attention_biases) {
            let z = w.dot(&x) + b;
            let a = softmax(z.view());
            omega += &(&x * &a);
            attentions.push(a);
        }
        omega /= k as f64;

        let h_pre = self.w1.dot(&omega) + &self.b1;
        let lambda = self.config.selu_lambda;
        let alpha = self.config.selu_alpha;
        let h = h_pre.mapv(|v| selu(v, lambda, alpha));

        let rate = self.config.dropout_rate;
        let (h_dropped, drop_scale) = if train_mode && rate > 0.0 {
            let keep = 1.0 - rate;
            let scale = Array1::from_shape_fn(h.len(), |_| {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            });
            (&h * &scale, Some(scale))
        } else {
            (h, None)
        };

        let logits = self.w2.dot(&h_dropped) + &self.b2;
        let probs = softmax(logits.view());
        Ok(ForwardCache {
            attentions,
            omega,
            h_pre,
            h_dropped,
            drop_scale,
            probs,
        })
    }

    /// Argmax class under inference, ties broken by lowest class index.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(0); // untouched in inference
        let (probs, _) = self.forward(x, false, &mut rng)?;
        Ok(argmax(probs.view()))
    }

    /// Serializes config, dimensions and all tensors to a single JSON file.
    /// Loading reproduces outputs bit-exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self).map_err(|e| Error::ModelFormat {
            path: path.into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<SanModel> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let model: SanModel =
            serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| {
                Error::ModelFormat {
                    path: path.into(),
                    message: e.to_string(),
                }
            })?;
        model.validate_shape(path)?;
        Ok(model)
    }

    fn validate_shape(&self, path: &Path) -> Result<()> {
        let f = self.n_features();
        let k = self.config.n_heads;
        let ok = self.attention_weights.len() == k
            && self.attention_biases.len() == k
            && self.attention_weights.iter().all(|w| w.dim() == (f, f))
            && self.attention_biases.iter().all(|b| b.len() == f)
            && self.w1.dim() == (self.config.hidden_dim, f)
            && self.b1.len() == self.config.hidden_dim
            && self.w2.ncols() == self.config.hidden_dim
            && self.b2.len() == self.w2.nrows()
            && self.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::ModelFormat {
                path: path.into(),
                message: "inconsistent tensor dimensions".into(),
            })
        }
    }
}

pub(crate) fn argmax(v: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &p) in v.iter().enumerate() {
        if p > v[best] {
            best = i;
        }
    }
    best
}

fn rand_matrix<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Array2<f64> {
    let mut m = Array2::zeros((rows, cols));
    for v in m.iter_mut() {
        *v = rng.random_range(-scale..scale);
    }
    m
}

fn rand_vector<R: Rng>(len: usize, scale: f64, rng: &mut R) -> Array1<f64> {
    let mut v = Array1::zeros(len);
    for x in v.iter_mut() {
        *x = rng.random_range(-scale..scale);
    }
    v
}
