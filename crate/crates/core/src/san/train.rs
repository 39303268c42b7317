//! Manual backpropagation and Adam training loop.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{selu_deriv, SanConfig, SanModel};
use crate::error::{Error, Result};
use crate::tabular::Dataset;

/// Gradients with the same shapes as the model tensors.
#[derive(Debug, Clone)]
pub struct SanGradients {
    pub attention_weights: Vec<Array2<f64>>,
    pub attention_biases: Vec<Array1<f64>>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl SanGradients {
    fn zeros_like(model: &SanModel) -> Self {
        SanGradients {
            attention_weights: model
                .attention_weights
                .iter()
                .map(|w| Array2::zeros(w.dim()))
                .collect(),
            attention_biases: model
                .attention_biases
                .iter()
                .map(|b| Array1::zeros(b.len()))
                .collect(),
            w1: Array2::zeros(model.w1.dim()),
            b1: Array1::zeros(model.b1.len()),
            w2: Array2::zeros(model.w2.dim()),
            b2: Array1::zeros(model.b2.len()),
        }
    }

    fn scale(&mut self, s: f64) {
        for w in &mut self.attention_weights {
            w.mapv_inplace(|v| v * s);
        }
        for b in &mut self.attention_biases {
            b.mapv_inplace(|v| v * s);
        }
        self.w1.mapv_inplace(|v| v * s);
        self.b1.mapv_inplace(|v| v * s);
        self.w2.mapv_inplace(|v| v * s);
        self.b2.mapv_inplace(|v| v * s);
    }
}

/// Walks model parameters and their gradients in one fixed order.
fn zip_params(model: &mut SanModel, grads: &SanGradients, mut f: impl FnMut(&mut f64, f64)) {
    for (w, g) in model
        .attention_weights
        .iter_mut()
        .zip(&grads.attention_weights)
    {
        for (p, &gv) in w.iter_mut().zip(g.iter()) {
            f(p, gv);
        }
    }
    for (b, g) in model
        .attention_biases
        .iter_mut()
        .zip(&grads.attention_biases)
    {
        for (p, &gv) in b.iter_mut().zip(g.iter()) {
            f(p, gv);
        }
    }
    for (p, &gv) in model.w1.iter_mut().zip(grads.w1.iter()) {
        f(p, gv);
    }
    for (p, &gv) in model.b1.iter_mut().zip(grads.b1.iter()) {
        f(p, gv);
    }
    for (p, &gv) in model.w2.iter_mut().zip(grads.w2.iter()) {
        f(p, gv);
    }
    for (p, &gv) in model.b2.iter_mut().zip(grads.b2.iter()) {
        f(p, gv);
    }
}

/// `g += scale * d x^T`, accumulating an outer product row by row.
fn add_scaled_outer(g: &mut Array2<f64>, d: &Array1<f64>, x: ArrayView1<'_, f64>, scale: f64) {
    for (mut row, &di) in g.outer_iter_mut().zip(d.iter()) {
        row.scaled_add(di * scale, &x);
    }
}

/// Mean cross-entropy over the batch and its gradient w.r.t. every parameter,
/// computed by backpropagation through the output softmax, dropout, SELU and
/// the Hadamard-softmax attention layer.
pub fn loss_and_gradients<R: Rng>(
    model: &SanModel,
    batch_x: ArrayView2<'_, f64>,
    batch_y: &[usize],
    rng: &mut R,
) -> Result<(f64, SanGradients)> {
    let n = batch_x.nrows();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if batch_y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} rows but {} labels",
            batch_y.len()
        )));
    }
    if batch_x.ncols() != model.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "batch with {} features for a {}-feature model",
            batch_x.ncols(),
            model.n_features()
        )));
    }
    if let Some(&bad) = batch_y.iter().find(|&&y| y >= model.n_classes()) {
        return Err(Error::InvalidParameter(format!(
            "label {bad} out of range for {} classes",
            model.n_classes()
        )));
    }

    let k = model.n_heads();
    let mut grads = SanGradients::zeros_like(model);
    let mut loss = 0.0;

    for (x, &y) in batch_x.outer_iter().zip(batch_y) {
        let cache = model.forward_cached(x, true, rng)?;
        loss += -cache.probs[y].ln();

        // Output softmax + cross-entropy.
        let mut dlogits = cache.probs.clone();
        dlogits[y] -= 1.0;

        add_scaled_outer(&mut grads.w2, &dlogits, cache.h_dropped.view(), 1.0);
        grads.b2 += &dlogits;

        let dh_dropped = model.w2.t().dot(&dlogits);
        let dh = match &cache.drop_scale {
            Some(scale) => &dh_dropped * scale,
            None => dh_dropped,
        };

        let lambda = model.config.selu_lambda;
        let alpha = model.config.selu_alpha;
        let mut dh_pre = dh;
        for (d, &pre) in dh_pre.iter_mut().zip(cache.h_pre.iter()) {
            *d *= selu_deriv(pre, lambda, alpha);
        }

        add_scaled_outer(&mut grads.w1, &dh_pre, cache.omega.view(), 1.0);
        grads.b1 += &dh_pre;

        let domega = model.w1.t().dot(&dh_pre);
        let dhead = &domega / k as f64;

        for (head, attention) in cache.attentions.iter().enumerate() {
            // Through the Hadamard product, then the softmax Jacobian.
            let da = &dhead * &x;
            let dot = attention.dot(&da);
            let dz = attention * &(da - dot);
            add_scaled_outer(&mut grads.attention_weights[head], &dz, x, 1.0);
            grads.attention_biases[head] += &dz;
        }
    }

    let inv = 1.0 / n as f64;
    grads.scale(inv);
    Ok((loss * inv, grads))
}

struct AdamState {
    m: SanGradients,
    v: SanGradients,
    t: u64,
}

impl AdamState {
    fn new(model: &SanModel) -> Self {
        AdamState {
            m: SanGradients::zeros_like(model),
            v: SanGradients::zeros_like(model),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut SanModel, grads: &SanGradients, cfg: &SanConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        let bc1 = 1.0 - b1.powf(self.t as f64);
        let bc2 = 1.0 - b2.powf(self.t as f64);
        let lr = cfg.learning_rate;
        let eps = cfg.adam_epsilon;

        // Moment tensors walk in the same fixed order as the parameters.
        let mut m_flat: Vec<&mut f64> = Vec::new();
        collect_mut(&mut self.m, &mut m_flat);
        let mut v_flat: Vec<&mut f64> = Vec::new();
        collect_mut(&mut self.v, &mut v_flat);

        let mut i = 0;
        zip_params(model, grads, |p, g| {
            let m = &mut *m_flat[i];
            let v = &mut *v_flat[i];
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
            i += 1;
        });
    }
}

fn collect_mut<'a>(g: &'a mut SanGradients, out: &mut Vec<&'a mut f64>) {
    for w in &mut g.attention_weights {
        out.extend(w.iter_mut());
    }
    for b in &mut g.attention_biases {
        out.extend(b.iter_mut());
    }
    out.extend(g.w1.iter_mut());
    out.extend(g.b1.iter_mut());
    out.extend(g.w2.iter_mut());
    out.extend(g.b2.iter_mut());
}

fn epoch_seed(master: u64, epoch: usize) -> u64 {
    master ^ (epoch as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Trains a fresh model: seed-deterministic initialization, `epochs` passes of
/// shuffled minibatches (final short batch included), Adam updates. A pure
/// function of `(data, config)`.
pub fn train(data: &Dataset, config: &SanConfig) -> Result<SanModel> {
    config.validate()?;
    let n = data.n_instances();
    if n < config.batch_size {
        return Err(Error::InvalidParameter(format!(
            "batch_size {} exceeds the {n} available instances",
            config.batch_size
        )));
    }
    let mut model = SanModel::init(data.n_features(), data.n_classes(), config)?;
    let mut adam = AdamState::new(&model);
    let features = data.features();
    let labels = data.labels();

    for epoch in 0..config.epochs {
        // Reseeded per epoch from the master seed; the same stream then feeds
        // the epoch's dropout masks.
        let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(config.seed, epoch));
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);

        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut bx = Array2::zeros((chunk.len(), data.n_features()));
            let mut by = Vec::with_capacity(chunk.len());
            for (row, &i) in chunk.iter().enumerate() {
                bx.row_mut(row).assign(&features.row(i));
                by.push(labels[i]);
            }
            let (loss, grads) = loss_and_gradients(&model, bx.view(), &by, &mut rng)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteTraining {
                    epoch,
                    batch: batch_idx,
                });
            }
            adam.step(&mut model, &grads, config);
            if !model.is_finite() {
                return Err(Error::NonFiniteTraining {
                    epoch,
                    batch: batch_idx,
                });
            }
        }
    }
    Ok(model)
}
