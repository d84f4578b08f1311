use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{loss_gradients, FeatureTable, GruModel};
use crate::corpus::{TrainingRecord, WindowMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Window length `L`.
    pub window: usize,
    pub window_mode: WindowMode,
    pub negatives: usize,
    /// L2 coefficient.
    pub lambda: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// User embedding size `d_u`.
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            window: 4,
            window_mode: WindowMode::Fixed,
            negatives: 10,
            lambda: 1e-4,
            learning_rate: 0.009,
            max_epochs: 100,
            batch_size: 128,
            hidden: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be at least 1");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return bad("learning rate must be a non-negative number");
        }
        if self.batch_size == 0 || self.hidden == 0 {
            return bad("batch_size and hidden must be positive");
        }
        Ok(())
    }
}

/// A training record together with its sampled negatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledRecord {
    pub window: Vec<usize>,
    pub label: usize,
    pub negatives: Vec<usize>,
}

/// `k` distinct repositories of a catalog of `catalog` (indices
/// `0..catalog`), drawn uniformly among those other than `label`.
pub fn sample_negatives(label: usize, catalog: usize, k: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if catalog <= k || label >= catalog {
        return Err(Error::CatalogTooSmall { catalog, requested: k });
    }
    Ok(index::sample(rng, catalog - 1, k)
        .into_iter()
        .map(|i| if i >= label { i + 1 } else { i })
        .collect())
}

/// One SGD step on a batch: `theta -= lr * (grad_ce / |batch| + 2 lambda theta)`.
pub fn backward_and_step(
    model: &mut GruModel,
    features: &FeatureTable,
    batch: &[SampledRecord],
    config: &TrainConfig,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Validation("empty batch".into()));
    }
    let (ce, grads) = loss_gradients(model, features, batch, 0.0)?;
    if !ce.is_finite() {
        return Err(Error::Diverged(format!("cross-entropy became {ce}")));
    }
    let lr = config.learning_rate;
    let decay = 1.0 - lr * 2.0 * config.lambda;
    for m in model.params_mut() {
        m.mapv_inplace(|t| t * decay);
    }
    model.scaled_add(-lr / batch.len() as f64, &grads);
    if let Some(param) = model.first_non_finite() {
        return Err(Error::Diverged(format!("parameter {param} became non-finite")));
    }
    Ok(ce)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruTrainLog {
    /// Mean cross-entropy per record in each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Trains a fresh model with SGD, resampling negatives every epoch.
///
/// `on_epoch` runs after each epoch with the epoch index and current model,
/// e.g. to track validation metrics.
pub fn train(
    features: &FeatureTable,
    records: &[TrainingRecord],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &GruModel) -> Result<()>,
) -> Result<(GruModel, GruTrainLog)> {
    config.validate()?;
    let catalog = features.num_repos();
    if catalog <= config.negatives {
        return Err(Error::CatalogTooSmall { catalog, requested: config.negatives });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = GruModel::init(features.dim(), config.hidden, &mut rng);
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut log = GruTrainLog { epoch_losses: Vec::with_capacity(config.max_epochs) };

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = chunk
                .iter()
                .map(|&i| {
                    let rec = &records[i];
                    Ok(SampledRecord {
                        window: rec.window.clone(),
                        label: rec.label,
                        negatives: sample_negatives(rec.label, catalog, config.negatives, &mut rng)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            total += backward_and_step(&mut model, features, &batch, config)?;
        }
        let mean = if records.is_empty() { 0.0 } else { total / records.len() as f64 };
        log::debug!("gru epoch {epoch}: mean cross-entropy {mean:.6}");
        log.epoch_losses.push(mean);
        on_epoch(epoch, &model)?;
    }
    Ok((model, log))
}
