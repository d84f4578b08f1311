use ndarray::{Array1, Array2, ArrayView1};

use super::{user_representation, FeatureTable, GruModel};
use crate::corpus::TrainingRecord;
use crate::error::{Error, Result};
use crate::eval::Recommender;

/// Ranks the full catalog with a trained model. Transformed candidate
/// vectors are computed once up front.
#[derive(Debug, Clone)]
pub struct GruRecommender<'a> {
    model: &'a GruModel,
    features: &'a FeatureTable,
    transformed: Array2<f64>,
}

impl<'a> GruRecommender<'a> {
    pub fn new(model: &'a GruModel, features: &'a FeatureTable) -> Result<Self> {
        let (d_in, _) = model.validate()?;
        if d_in != features.dim() {
            return Err(Error::Shape(format!("model expects {d_in} features, table has {}", features.dim())));
        }
        Ok(GruRecommender { model, features, transformed: model.transform_all(&features.vectors) })
    }

    pub fn user_vector(&self, window: &[usize]) -> Result<Array1<f64>> {
        if let Some(&r) = window.iter().find(|&&r| r >= self.features.num_repos()) {
            return Err(Error::Validation(format!("repository index {r} out of range")));
        }
        let rows: Vec<ArrayView1<f64>> = window.iter().map(|&r| self.features.row(r)).collect();
        user_representation(self.model, &rows)
    }

    /// Logit of every repository for a window.
    pub fn scores_for_window(&self, window: &[usize]) -> Result<Vec<f64>> {
        let u = self.user_vector(window)?;
        Ok(self.transformed.dot(&u).to_vec())
    }
}

impl Recommender for GruRecommender<'_> {
    fn num_items(&self) -> usize {
        self.features.num_repos()
    }

    fn scores(&self, record: &TrainingRecord) -> Vec<f64> {
        self.scores_for_window(&record.window).expect("validated window")
    }
}

/// Top `n` repositories for a window as `(index, logit)`, best first, ties
/// broken by lower index.
pub fn recommend_top_n(
    model: &GruModel,
    features: &FeatureTable,
    window: &[usize],
    n: usize,
) -> Result<Vec<(usize, f64)>> {
    let scores = GruRecommender::new(model, features)?.scores_for_window(window)?;
    Ok(top_n(&scores, n))
}

pub(crate) fn top_n(scores: &[f64], n: usize) -> Vec<(usize, f64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.into_iter().take(n).map(|i| (i, scores[i])).collect()
}
