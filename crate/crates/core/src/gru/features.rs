use ndarray::{concatenate, Array1, Array2, ArrayView1, Axis};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// `(x - min) / (max - min)`; a constant column maps to all zeros.
pub fn minmax_scale(values: &[f64]) -> Vec<f64> {
    let scaler = MinMax::fit(values.iter().copied());
    values.iter().map(|&v| scaler.apply(v)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Self {
        let (min, max) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        MinMax { min, max }
    }

    /// Scaled value, clamped to `[0, 1]` for inputs outside the fitted range.
    pub fn apply(&self, v: f64) -> f64 {
        let span = self.max - self.min;
        if !(span > 0.0) {
            return 0.0;
        }
        ((v - self.min) / span).clamp(0.0, 1.0)
    }
}

/// Min-max statistics of watches, stars and forks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountScaler {
    pub columns: [MinMax; 3],
}

impl CountScaler {
    /// Fits on the repositories selected by `fit_on` (the training split).
    pub fn fit(corpus: &Corpus, fit_on: impl IntoIterator<Item = usize>) -> Self {
        let idx: Vec<usize> = fit_on.into_iter().collect();
        let columns = [0, 1, 2].map(|c| MinMax::fit(idx.iter().map(|&r| corpus.repo(r).counts()[c] as f64)));
        CountScaler { columns }
    }

    pub fn scale(&self, counts: [u64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|c| self.columns[c].apply(counts[c] as f64))
    }
}

/// `[embedding, scaled counts]`.
pub fn fuse_features(embedding: ArrayView1<f64>, scaled_counts: &[f64]) -> Result<Array1<f64>> {
    if scaled_counts.len() != 3 {
        return Err(Error::Shape(format!("expected 3 scaled counts, got {}", scaled_counts.len())));
    }
    Ok(concatenate![Axis(0), embedding, ArrayView1::from(scaled_counts)])
}

/// One fused feature vector per repository, rows in repository index order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub vectors: Array2<f64>,
}

impl FeatureTable {
    pub fn build(embeddings: &Array2<f64>, corpus: &Corpus, scaler: &CountScaler) -> Result<Self> {
        if embeddings.nrows() != corpus.num_repos() {
            return Err(Error::Shape(format!(
                "{} embeddings for {} repositories",
                embeddings.nrows(),
                corpus.num_repos()
            )));
        }
        let d = embeddings.ncols() + 3;
        let mut vectors = Array2::zeros((corpus.num_repos(), d));
        for (r, mut row) in vectors.outer_iter_mut().enumerate() {
            let counts = scaler.scale(corpus.repo(r).counts());
            row.assign(&fuse_features(embeddings.row(r), &counts)?);
        }
        Ok(FeatureTable { vectors })
    }

    pub fn num_repos(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn row(&self, r: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(r)
    }
}
