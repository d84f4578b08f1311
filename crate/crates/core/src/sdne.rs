//! Deep autoencoder embedding of the similarity graph.
//!
//! Each vertex's similarity row is encoded through `K` sigmoid layers to a
//! `d_r`-dimensional code and decoded back through the mirrored stack. The
//! objective is
//!
//! ```text
//! L_mix = sum_{r,q} s_rq * |y_r - y_q|^2  +  alpha * sum_r |(s_hat_r - s_r) .* b_r|^2
//! ```
//!
//! with `b_rq = beta` where `s_rq > 0` and 1 elsewhere. Training is plain
//! minibatch SGD with analytic gradients.
//!
//! The first encoder layer consumes rows in sparse form, which keeps a step
//! proportional to the number of stored edges rather than `|R|^2`.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdneConfig {
    /// `[|R|, h_1, ..., d_r]`; the encoder depth is `layer_sizes.len() - 1`.
    pub layer_sizes: Vec<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Coefficient of an optional `|theta|^2` penalty; 0 disables it.
    pub weight_decay: f64,
}

impl SdneConfig {
    /// Default hyper-parameters for a graph with `n` vertices:
    /// one hidden layer of 512 units and 140-dimensional codes.
    pub fn for_vertices(n: usize) -> Self {
        SdneConfig {
            layer_sizes: vec![n, 512, 140],
            alpha: 1.0,
            beta: 5.0,
            learning_rate: 0.01,
            epochs: 50,
            batch_size: 64,
            seed: 0,
            weight_decay: 0.0,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap_or(&0)
    }

    pub fn validate(&self, vertices: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.layer_sizes.len() < 2 {
            return bad("layer_sizes needs at least an input and an output size".into());
        }
        if self.layer_sizes[0] != vertices {
            return bad(format!(
                "first layer size {} does not match the {vertices} graph vertices",
                self.layer_sizes[0]
            ));
        }
        if self.layer_sizes.contains(&0) {
            return bad("layer sizes must be positive".into());
        }
        if !(self.alpha > 0.0) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.beta > 1.0) {
            return bad(format!("beta must exceed 1, got {}", self.beta));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("invalid learning rate {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay must be non-negative".into());
        }
        Ok(())
    }
}

/// Fully connected sigmoid layer, `y = sigmoid(W x + b)` with `W` stored
/// `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense { weight: Array2::zeros((outputs, inputs)), bias: Array1::zeros(outputs) }
    }

    fn xavier(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((outputs, inputs), || rng.random_range(-limit..=limit));
        Dense { weight, bias: Array1::zeros(outputs) }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weight.t());
        z += &self.bias;
        z.mapv_inplace(sigmoid);
        z
    }

    /// Forward pass for sparse input rows.
    fn forward_sparse(&self, rows: &[&[(usize, f64)]]) -> Array2<f64> {
        let wt = self.weight.t();
        let mut z = Array2::zeros((rows.len(), self.outputs()));
        for (mut zi, row) in z.outer_iter_mut().zip(rows) {
            zi.assign(&self.bias);
            for &(q, w) in row.iter() {
                zi.scaled_add(w, &wt.row(q));
            }
        }
        z.mapv_inplace(sigmoid);
        z
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Encoder and mirrored decoder stacks.
///
/// Gradients are returned in the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SdneModel {
    pub encoder: Vec<Dense>,
    pub decoder: Vec<Dense>,
}

pub type SdneGradients = SdneModel;

impl SdneModel {
    pub fn zeros(layer_sizes: &[usize]) -> Self {
        Self::build(layer_sizes, Dense::zeros)
    }

    /// Xavier-uniform weights and zero biases.
    pub fn init(layer_sizes: &[usize], rng: &mut impl Rng) -> Self {
        Self::build(layer_sizes, |i, o| Dense::xavier(i, o, rng))
    }

    fn build(layer_sizes: &[usize], mut make: impl FnMut(usize, usize) -> Dense) -> Self {
        let encoder = layer_sizes.windows(2).map(|w| make(w[0], w[1])).collect();
        let decoder = layer_sizes.windows(2).rev().map(|w| make(w[1], w[0])).collect();
        SdneModel { encoder, decoder }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.encoder[0].inputs()];
        sizes.extend(self.encoder.iter().map(Dense::outputs));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].inputs()
    }

    pub fn embedding_dim(&self) -> usize {
        self.encoder.last().map_or(0, Dense::outputs)
    }

    /// `(name, layer)` for every layer, encoder first.
    pub fn named_layers(&self) -> impl Iterator<Item = (String, &Dense)> {
        let enc = self.encoder.iter().enumerate().map(|(k, l)| (format!("encoder.{k}"), l));
        let dec = self.decoder.iter().enumerate().map(|(k, l)| (format!("decoder.{k}"), l));
        enc.chain(dec)
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.encoder.iter_mut().chain(self.decoder.iter_mut())
    }

    /// `self += a * other`
    pub fn scaled_add(&mut self, a: f64, other: &SdneModel) {
        for (l, o) in self.layers_mut().zip(other.encoder.iter().chain(&other.decoder)) {
            l.weight.scaled_add(a, &o.weight);
            l.bias.scaled_add(a, &o.bias);
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.named_layers()
            .map(|(_, l)| l.weight.iter().chain(&l.bias).map(|x| x * x).sum::<f64>())
            .sum()
    }

    pub fn num_parameters(&self) -> usize {
        self.named_layers().map(|(_, l)| l.weight.len() + l.bias.len()).sum()
    }

    /// Name of the first parameter tensor holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<String> {
        self.named_layers().find_map(|(name, l)| {
            if !l.weight.iter().all(|x| x.is_finite()) {
                Some(format!("{name}.weight"))
            } else if !l.bias.iter().all(|x| x.is_finite()) {
                Some(format!("{name}.bias"))
            } else {
                None
            }
        })
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::Shape(format!("expected a row of length {}, got {len}", self.input_dim())));
        }
        Ok(())
    }

    /// Encoder activations of every layer of a batch of sparse rows.
    fn encode_sparse(&self, rows: &[&[(usize, f64)]]) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.encoder.len());
        acts.push(self.encoder[0].forward_sparse(rows));
        for layer in &self.encoder[1..] {
            let next = layer.forward(acts.last().unwrap());
            acts.push(next);
        }
        acts
    }

    /// Decoder activations; the last one is the reconstruction.
    fn decode_batch(&self, codes: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(self.decoder.len());
        for layer in &self.decoder {
            let input = acts.last().unwrap_or(codes);
            let next = layer.forward(input);
            acts.push(next);
        }
        acts
    }
}

/// Hidden activations `y^(1..K)` for one similarity row.
pub fn encode(model: &SdneModel, row: &[f64]) -> Result<Vec<Array1<f64>>> {
    model.check_input(row.len())?;
    let sparse: Vec<(usize, f64)> =
        row.iter().enumerate().filter(|(_, &w)| w != 0.0).map(|(q, &w)| (q, w)).collect();
    Ok(model
        .encode_sparse(&[sparse.as_slice()])
        .into_iter()
        .map(|a| a.row(0).to_owned())
        .collect())
}

/// Reconstruction of a similarity row from its code `y^(K)`.
pub fn decode(model: &SdneModel, code: &[f64]) -> Result<Array1<f64>> {
    if code.len() != model.embedding_dim() {
        return Err(Error::Shape(format!(
            "expected a code of length {}, got {}",
            model.embedding_dim(),
            code.len()
        )));
    }
    let x = Array2::from_shape_vec((1, code.len()), code.to_vec()).expect("1 x d");
    Ok(model.decode_batch(&x).pop().expect("non-empty decoder").row(0).to_owned())
}

/// Codes `y^(K)` of every vertex, one row per vertex.
pub fn embed_all(model: &SdneModel, graph: &SimilarityGraph) -> Array2<f64> {
    let n = graph.num_vertices();
    let mut out = Array2::zeros((n, model.embedding_dim()));
    const CHUNK: usize = 256;
    for start in (0..n).step_by(CHUNK) {
        let end = (start + CHUNK).min(n);
        let rows: Vec<&[(usize, f64)]> = (start..end).map(|r| graph.row(r)).collect();
        let acts = model.encode_sparse(&rows);
        out.slice_mut(s![start..end, ..]).assign(acts.last().unwrap());
    }
    out
}

/// `sum_{r,q} s_rq |y_r - y_q|^2` over ordered pairs (each edge counts twice).
pub fn loss_first_order(graph: &SimilarityGraph, embeddings: &Array2<f64>) -> f64 {
    (0..graph.num_vertices())
        .map(|r| {
            graph
                .row(r)
                .iter()
                .map(|&(q, w)| w * squared_distance(embeddings.row(r), embeddings.row(q)))
                .sum::<f64>()
        })
        .sum()
}

fn squared_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `sum_r |(s_hat_r - s_r) .* b_r|^2` with `b = beta` on non-zero targets.
pub fn loss_second_order(rows: &Array2<f64>, reconstructions: &Array2<f64>, beta: f64) -> Result<f64> {
    if rows.dim() != reconstructions.dim() {
        return Err(Error::Shape(format!(
            "rows {:?} vs reconstructions {:?}",
            rows.dim(),
            reconstructions.dim()
        )));
    }
    Ok(rows
        .iter()
        .zip(reconstructions)
        .map(|(&s, &sh)| {
            let b = if s == 0.0 { 1.0 } else { beta };
            ((sh - s) * b).powi(2)
        })
        .sum())
}

/// `L_1st + alpha * L_2nd` over every vertex (no weight decay).
pub fn loss_total(graph: &SimilarityGraph, model: &SdneModel, alpha: f64, beta: f64) -> Result<f64> {
    model.check_input(graph.num_vertices())?;
    let all: Vec<usize> = (0..graph.num_vertices()).collect();
    Ok(batch_objective(graph, model, &all, alpha, beta, 0.0))
}

/// Objective restricted to a batch: for every batch entry `r`,
/// `sum_q s_rq |y_r - y_q|^2 + alpha * |(s_hat_r - s_r) .* b_r|^2`, plus
/// `weight_decay * |theta|^2`. With the whole vertex set as the batch this
/// is [`loss_total`].
pub fn batch_objective(
    graph: &SimilarityGraph,
    model: &SdneModel,
    batch: &[usize],
    alpha: f64,
    beta: f64,
    weight_decay: f64,
) -> f64 {
    forward_backward(graph, model, batch, alpha, beta, weight_decay, false).0
}

/// Loss and exact gradients of [`batch_objective`].
pub fn backward(
    graph: &SimilarityGraph,
    model: &SdneModel,
    batch: &[usize],
    alpha: f64,
    beta: f64,
    weight_decay: f64,
) -> Result<(f64, SdneGradients)> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    model.check_input(graph.num_vertices())?;
    let (loss, grads) = forward_backward(graph, model, batch, alpha, beta, weight_decay, true);
    let grads = grads.expect("gradients requested");
    if let Some(param) = grads.first_non_finite() {
        return Err(Error::NonFiniteGradient { param });
    }
    Ok((loss, grads))
}

fn forward_backward(
    graph: &SimilarityGraph,
    model: &SdneModel,
    batch: &[usize],
    alpha: f64,
    beta: f64,
    weight_decay: f64,
    want_grads: bool,
) -> (f64, Option<SdneGradients>) {
    let n = graph.num_vertices();
    let nb = batch.len();

    // Batch entries first (duplicates kept), then neighbours outside the batch.
    let mut vertices: Vec<usize> = batch.to_vec();
    let mut position = vec![usize::MAX; n];
    for (i, &v) in batch.iter().enumerate() {
        if position[v] == usize::MAX {
            position[v] = i;
        }
    }
    for &r in batch {
        for &(q, _) in graph.row(r) {
            if position[q] == usize::MAX {
                position[q] = vertices.len();
                vertices.push(q);
            }
        }
    }
    let rows: Vec<&[(usize, f64)]> = vertices.iter().map(|&v| graph.row(v)).collect();

    let enc = model.encode_sparse(&rows);
    let codes = enc.last().unwrap();
    let batch_codes = codes.slice(s![..nb, ..]).to_owned();
    let dec = model.decode_batch(&batch_codes);
    let recon = dec.last().unwrap();

    // second-order term
    let mut d_recon = Array2::zeros(recon.dim());
    let mut loss_2nd = 0.0;
    for (i, &r) in batch.iter().enumerate() {
        let target = graph.row_dense(r);
        for (q, &s) in target.iter().enumerate() {
            let b = if s == 0.0 { 1.0 } else { beta };
            let diff = (recon[[i, q]] - s) * b;
            loss_2nd += diff * diff;
            d_recon[[i, q]] = alpha * 2.0 * diff * b;
        }
    }

    // first-order term
    let mut d_codes = Array2::zeros(codes.dim());
    let mut loss_1st = 0.0;
    for (i, &r) in batch.iter().enumerate() {
        for &(q, w) in graph.row(r) {
            let j = position[q];
            let diff = &codes.row(i) - &codes.row(j);
            loss_1st += w * diff.dot(&diff);
            if want_grads {
                d_codes.row_mut(i).scaled_add(2.0 * w, &diff);
                d_codes.row_mut(j).scaled_add(-2.0 * w, &diff);
            }
        }
    }

    let loss = loss_1st + alpha * loss_2nd + weight_decay * model.squared_norm();
    if !want_grads {
        return (loss, None);
    }

    let mut grads = SdneModel::zeros(&model.layer_sizes());

    // decoder
    let mut delta = d_recon;
    for k in (0..model.decoder.len()).rev() {
        let input = if k == 0 { &batch_codes } else { &dec[k - 1] };
        delta = dense_backward(&model.decoder[k], &dec[k], input, delta, &mut grads.decoder[k], true)
            .expect("input gradient requested");
    }
    d_codes.slice_mut(s![..nb, ..]).scaled_add(1.0, &delta);

    // encoder
    let mut delta = d_codes;
    for k in (1..model.encoder.len()).rev() {
        delta = dense_backward(&model.encoder[k], &enc[k], &enc[k - 1], delta, &mut grads.encoder[k], true)
            .expect("input gradient requested");
    }
    // first layer: sparse input, no input gradient
    let dz = sigmoid_delta(&enc[0], delta);
    let g0 = &mut grads.encoder[0];
    for (dz_i, row) in dz.outer_iter().zip(&rows) {
        for &(q, w) in row.iter() {
            g0.weight.column_mut(q).scaled_add(w, &dz_i);
        }
    }
    g0.bias += &dz.sum_axis(Axis(0));

    if weight_decay > 0.0 {
        grads.scaled_add(2.0 * weight_decay, model);
    }
    (loss, Some(grads))
}

fn sigmoid_delta(out: &Array2<f64>, mut d_out: Array2<f64>) -> Array2<f64> {
    d_out.zip_mut_with(out, |d, &a| *d *= a * (1.0 - a));
    d_out
}

/// Accumulates parameter gradients of one sigmoid layer and returns the
/// gradient with respect to its input.
fn dense_backward(
    layer: &Dense,
    out: &Array2<f64>,
    input: &Array2<f64>,
    d_out: Array2<f64>,
    grad: &mut Dense,
    want_input: bool,
) -> Option<Array2<f64>> {
    let dz = sigmoid_delta(out, d_out);
    grad.weight += &dz.t().dot(input);
    grad.bias += &dz.sum_axis(Axis(0));
    want_input.then(|| dz.dot(&layer.weight))
}

/// Per-epoch record of the training objective.
#[derive(Debug, Clone, PartialEq)]
pub struct SdneTrainLog {
    /// Sum of batch objectives over each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Minibatch SGD on the mixed objective.
///
/// Each step moves against the batch gradient divided by the batch size.
/// Returns the trained model and the codes of every vertex.
pub fn train(graph: &SimilarityGraph, config: &SdneConfig) -> Result<(SdneModel, Array2<f64>, SdneTrainLog)> {
    config.validate(graph.num_vertices())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = SdneModel::init(&config.layer_sizes, &mut rng);
    let mut order: Vec<usize> = (0..graph.num_vertices()).collect();
    let mut log = SdneTrainLog { epoch_losses: Vec::with_capacity(config.epochs) };

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (loss, grads) =
                backward(graph, &model, batch, config.alpha, config.beta, config.weight_decay)?;
            if !loss.is_finite() {
                return Err(Error::Diverged(format!("loss became {loss} in epoch {epoch}")));
            }
            epoch_loss += loss;
            model.scaled_add(-config.learning_rate / batch.len() as f64, &grads);
        }
        log::debug!("sdne epoch {epoch}: loss {epoch_loss:.6}");
        log.epoch_losses.push(epoch_loss);
    }
    if let Some(param) = model.first_non_finite() {
        return Err(Error::Diverged(format!("parameter {param} is not finite")));
    }
    let embeddings = embed_all(&model, graph);
    Ok((model, embeddings, log))
}
