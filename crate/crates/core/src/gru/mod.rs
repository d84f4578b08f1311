//! GRU next-repository model.
//!
//! A user's recent repositories are mapped through `r' = sigmoid(W_in r)` and
//! folded by the recurrence
//!
//! ```text
//! z  = sigmoid(W_z [u, r'])
//! g  = sigmoid(W_r [u, r'])
//! u~ = tanh(W_u [g .* u, r'])
//! u' = z .* u + (1 - z) .* u~
//! ```
//!
//! starting from `u = 0`. Candidate `i` scores `u . sigmoid(W_in r_i)`, and
//! probabilities are a softmax over the candidate set. None of the matrices
//! carry a bias.

mod features;
mod recommend;
mod train;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayViewMut2};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sdne::sigmoid;

pub use features::{fuse_features, minmax_scale, CountScaler, FeatureTable, MinMax};
pub use recommend::{recommend_top_n, GruRecommender};
pub use train::{backward_and_step, sample_negatives, train, GruTrainLog, SampledRecord, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct GruModel {
    /// `d_u x d_in`
    pub w_in: Array2<f64>,
    /// `d_u x 2 d_u`
    pub w_z: Array2<f64>,
    /// `d_u x 2 d_u`
    pub w_r: Array2<f64>,
    /// `d_u x 2 d_u`
    pub w_u: Array2<f64>,
}

/// Gradients share the model's shape.
pub type GruGradients = GruModel;

pub const PARAMETER_NAMES: [&str; 4] = ["w_in", "w_z", "w_r", "w_u"];

impl GruModel {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        GruModel {
            w_in: Array2::zeros((hidden, input_dim)),
            w_z: Array2::zeros((hidden, 2 * hidden)),
            w_r: Array2::zeros((hidden, 2 * hidden)),
            w_u: Array2::zeros((hidden, 2 * hidden)),
        }
    }

    /// Uniform in `+-sqrt(6 / (fan_in + fan_out))` per matrix.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut uniform = |rows: usize, cols: usize| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..=limit))
        };
        GruModel {
            w_in: uniform(hidden, input_dim),
            w_z: uniform(hidden, 2 * hidden),
            w_r: uniform(hidden, 2 * hidden),
            w_u: uniform(hidden, 2 * hidden),
        }
    }

    /// Checks the shape chain and returns `(d_in, d_u)`.
    pub fn validate(&self) -> Result<(usize, usize)> {
        let d = self.w_in.nrows();
        for (name, m) in [("w_z", &self.w_z), ("w_r", &self.w_r), ("w_u", &self.w_u)] {
            if m.dim() != (d, 2 * d) {
                return Err(Error::Shape(format!("{name} is {:?}, expected ({d}, {})", m.dim(), 2 * d)));
            }
        }
        Ok((self.w_in.ncols(), d))
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_in.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_in.ncols()
    }

    pub fn params(&self) -> [&Array2<f64>; 4] {
        [&self.w_in, &self.w_z, &self.w_r, &self.w_u]
    }

    pub fn params_mut(&mut self) -> [&mut Array2<f64>; 4] {
        [&mut self.w_in, &mut self.w_z, &mut self.w_r, &mut self.w_u]
    }

    pub fn num_parameters(&self) -> usize {
        self.params().iter().map(|m| m.len()).sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.params().iter().flat_map(|m| m.iter()).map(|x| x * x).sum()
    }

    /// `self += a * other`
    pub fn scaled_add(&mut self, a: f64, other: &GruModel) {
        for (m, o) in self.params_mut().into_iter().zip(other.params()) {
            m.scaled_add(a, o);
        }
    }

    pub fn first_non_finite(&self) -> Option<&'static str> {
        PARAMETER_NAMES
            .iter()
            .zip(self.params())
            .find(|(_, m)| !m.iter().all(|x| x.is_finite()))
            .map(|(n, _)| *n)
    }

    /// `sigmoid(W_in x)`
    pub fn transform(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.w_in.dot(&x).mapv(sigmoid)
    }

    /// Transformed vectors of every row of `features`, `n x d_u`.
    pub fn transform_all(&self, features: &Array2<f64>) -> Array2<f64> {
        features.dot(&self.w_in.t()).mapv(sigmoid)
    }
}

/// `w[:, ..d] . left + w[:, d..] . right`
fn split_dot(w: &Array2<f64>, left: ArrayView1<f64>, right: ArrayView1<f64>) -> Array1<f64> {
    let d = left.len();
    w.slice(s![.., ..d]).dot(&left) + w.slice(s![.., d..]).dot(&right)
}

/// `m += a b^T` for the column block starting at `offset`.
fn add_outer(mut m: ArrayViewMut2<f64>, a: &Array1<f64>, b: ArrayView1<f64>) {
    for (mut row, &ai) in m.outer_iter_mut().zip(a) {
        if ai != 0.0 {
            row.scaled_add(ai, &b);
        }
    }
}

/// Hidden state after one step plus the gate values that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct GruState {
    pub hidden: Array1<f64>,
    pub update_gate: Array1<f64>,
    pub reset_gate: Array1<f64>,
    pub candidate: Array1<f64>,
}

#[derive(Debug, Clone)]
struct StepCache {
    transformed: Array1<f64>,
    prev: Array1<f64>,
    state: GruState,
}

fn step_transformed(model: &GruModel, prev: &Array1<f64>, transformed: Array1<f64>) -> StepCache {
    let z = split_dot(&model.w_z, prev.view(), transformed.view()).mapv(sigmoid);
    let g = split_dot(&model.w_r, prev.view(), transformed.view()).mapv(sigmoid);
    let gated = &g * prev;
    let cand = split_dot(&model.w_u, gated.view(), transformed.view()).mapv(f64::tanh);
    let hidden = &z * prev + &(1.0 - &z) * &cand;
    StepCache {
        transformed,
        prev: prev.clone(),
        state: GruState { hidden, update_gate: z, reset_gate: g, candidate: cand },
    }
}

/// One recurrence step from `hidden` on the raw feature vector `input`.
pub fn gru_step(model: &GruModel, hidden: ArrayView1<f64>, input: ArrayView1<f64>) -> Result<GruState> {
    let (d_in, d_u) = model.validate()?;
    if input.len() != d_in || hidden.len() != d_u {
        return Err(Error::Shape(format!(
            "step expects hidden {d_u} / input {d_in}, got {} / {}",
            hidden.len(),
            input.len()
        )));
    }
    let cache = step_transformed(model, &hidden.to_owned(), model.transform(input));
    if !cache.state.hidden.iter().all(|x| x.is_finite()) {
        return Err(Error::Diverged("non-finite hidden state".into()));
    }
    Ok(cache.state)
}

fn unroll(model: &GruModel, window: &[ArrayView1<f64>]) -> Vec<StepCache> {
    let mut caches: Vec<StepCache> = Vec::with_capacity(window.len());
    let mut h = Array1::zeros(model.hidden_dim());
    for x in window {
        let cache = step_transformed(model, &h, model.transform(*x));
        h = cache.state.hidden.clone();
        caches.push(cache);
    }
    caches
}

/// Final hidden state after folding the window (oldest first) from zero.
pub fn user_representation(model: &GruModel, window: &[ArrayView1<f64>]) -> Result<Array1<f64>> {
    if window.is_empty() {
        return Err(Error::Validation("empty window".into()));
    }
    let (d_in, _) = model.validate()?;
    if let Some(x) = window.iter().find(|x| x.len() != d_in) {
        return Err(Error::Shape(format!("window vector of length {}, expected {d_in}", x.len())));
    }
    Ok(unroll(model, window).pop().expect("non-empty").state.hidden)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln()
}

/// Logits `u . sigmoid(W_in r_i)` of each candidate.
pub fn candidate_logits(model: &GruModel, user: ArrayView1<f64>, candidates: &[ArrayView1<f64>]) -> Vec<f64> {
    candidates.iter().map(|c| model.transform(*c).dot(&user)).collect()
}

/// Softmax over the candidate set of the logits.
pub fn score_candidates(model: &GruModel, user: ArrayView1<f64>, candidates: &[ArrayView1<f64>]) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::Validation("no candidates".into()));
    }
    Ok(softmax(&candidate_logits(model, user, candidates)))
}

/// Cross-entropy of one record (label is candidate 0), accumulating the
/// gradient into `grads` when given.
fn record_loss(model: &GruModel, features: &FeatureTable, rec: &SampledRecord, grads: Option<&mut GruGradients>) -> f64 {
    let window: Vec<ArrayView1<f64>> = rec.window.iter().map(|&r| features.row(r)).collect();
    let caches = unroll(model, &window);
    let d = model.hidden_dim();
    let user = caches.last().map_or_else(|| Array1::zeros(d), |c| c.state.hidden.clone());

    let cand_ids: Vec<usize> = std::iter::once(rec.label).chain(rec.negatives.iter().copied()).collect();
    let transformed: Vec<Array1<f64>> = cand_ids.iter().map(|&r| model.transform(features.row(r))).collect();
    let logits: Vec<f64> = transformed.iter().map(|c| c.dot(&user)).collect();
    let loss = log_sum_exp(&logits) - logits[0];

    let Some(grads) = grads else {
        return loss;
    };

    let probs = softmax(&logits);
    let mut dh = Array1::zeros(d);
    for (j, (c, &p)) in transformed.iter().zip(&probs).enumerate() {
        let dlogit = p - if j == 0 { 1.0 } else { 0.0 };
        if dlogit == 0.0 {
            continue;
        }
        dh.scaled_add(dlogit, c);
        let dpre = c.mapv(|v| v * (1.0 - v)) * (dlogit * &user);
        add_outer(grads.w_in.view_mut(), &dpre, features.row(cand_ids[j]));
    }

    for (cache, &r) in caches.iter().zip(&rec.window).rev() {
        let GruState { update_gate: z, reset_gate: g, candidate: cand, .. } = &cache.state;
        let prev = &cache.prev;
        let a = &cache.transformed;

        let dz = &dh * &(prev - cand);
        let dcand = &dh * &(1.0 - z);
        let mut dprev = &dh * z;

        let dpre_u = dcand * &cand.mapv(|v| 1.0 - v * v);
        let gated = g * prev;
        add_outer(grads.w_u.slice_mut(s![.., ..d]), &dpre_u, gated.view());
        add_outer(grads.w_u.slice_mut(s![.., d..]), &dpre_u, a.view());
        let dcat = model.w_u.t().dot(&dpre_u);
        let dgated = dcat.slice(s![..d]);
        let mut da = dcat.slice(s![d..]).to_owned();
        let dg = &dgated * prev;
        dprev += &(&dgated * g);

        let dpre_z = dz * &z.mapv(|v| v * (1.0 - v));
        add_outer(grads.w_z.slice_mut(s![.., ..d]), &dpre_z, prev.view());
        add_outer(grads.w_z.slice_mut(s![.., d..]), &dpre_z, a.view());
        let dcat = model.w_z.t().dot(&dpre_z);
        dprev += &dcat.slice(s![..d]);
        da += &dcat.slice(s![d..]);

        let dpre_r = dg * &g.mapv(|v| v * (1.0 - v));
        add_outer(grads.w_r.slice_mut(s![.., ..d]), &dpre_r, prev.view());
        add_outer(grads.w_r.slice_mut(s![.., d..]), &dpre_r, a.view());
        let dcat = model.w_r.t().dot(&dpre_r);
        dprev += &dcat.slice(s![..d]);
        da += &dcat.slice(s![d..]);

        let dpre_a = da * &a.mapv(|v| v * (1.0 - v));
        add_outer(grads.w_in.view_mut(), &dpre_a, features.row(r));

        dh = dprev;
    }
    loss
}

fn check_records(model: &GruModel, features: &FeatureTable, records: &[SampledRecord]) -> Result<()> {
    let (d_in, _) = model.validate()?;
    if features.dim() != d_in {
        return Err(Error::Shape(format!("features have {} columns, model expects {d_in}", features.dim())));
    }
    let n = features.num_repos();
    for rec in records {
        if rec.window.is_empty() {
            return Err(Error::Validation("record with empty window".into()));
        }
        if rec.window.iter().chain(&rec.negatives).chain([&rec.label]).any(|&r| r >= n) {
            return Err(Error::Validation("record references an unknown repository".into()));
        }
    }
    Ok(())
}

/// `-sum_records log p(label) + lambda |theta|^2`, with the softmax taken
/// over each record's label and negatives.
pub fn training_loss(model: &GruModel, features: &FeatureTable, records: &[SampledRecord], lambda: f64) -> Result<f64> {
    check_records(model, features, records)?;
    let ce: f64 = records.iter().map(|r| record_loss(model, features, r, None)).sum();
    Ok(ce + lambda * model.squared_norm())
}

/// Records per parallel work unit. Fixed so the reduction order, and with
/// it every bit of the result, does not depend on the thread count.
const GRAD_CHUNK: usize = 8;

/// [`training_loss`] and its exact gradient (backpropagation through the
/// candidate path, the unrolled recurrence and `W_in`).
pub fn loss_gradients(
    model: &GruModel,
    features: &FeatureTable,
    records: &[SampledRecord],
    lambda: f64,
) -> Result<(f64, GruGradients)> {
    check_records(model, features, records)?;
    let (d_in, d_u) = model.validate()?;
    let partials: Vec<(f64, GruGradients)> = records
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut g = GruModel::zeros(d_in, d_u);
            let loss = chunk.iter().map(|r| record_loss(model, features, r, Some(&mut g))).sum();
            (loss, g)
        })
        .collect();
    let mut grads = GruModel::zeros(d_in, d_u);
    let mut loss = 0.0;
    for (l, g) in &partials {
        loss += l;
        grads.scaled_add(1.0, g);
    }
    if lambda != 0.0 {
        loss += lambda * model.squared_norm();
        grads.scaled_add(2.0 * lambda, model);
    }
    if let Some(param) = grads.first_non_finite() {
        return Err(Error::NonFiniteGradient { param: param.to_string() });
    }
    Ok((loss, grads))
}
