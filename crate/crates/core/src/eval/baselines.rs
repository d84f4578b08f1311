use std::collections::BTreeMap;

use super::Recommender;
use crate::corpus::{Corpus, TrainingRecord};

/// Scores every repository by its number of training interactions.
#[derive(Debug, Clone, PartialEq)]
pub struct PopRecommender {
    counts: Vec<f64>,
}

impl PopRecommender {
    pub fn fit(train: &Corpus) -> Self {
        let mut counts = vec![0.0; train.num_repos()];
        for user in train.users() {
            for i in &user.interactions {
                counts[i.repo] += 1.0;
            }
        }
        PopRecommender { counts }
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    /// Full catalog ranked by popularity, ties by repository id.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.counts.len()).collect();
        order.sort_by(|&a, &b| self.counts[b].total_cmp(&self.counts[a]).then(a.cmp(&b)));
        order
    }
}

impl Recommender for PopRecommender {
    fn num_items(&self) -> usize {
        self.counts.len()
    }

    fn scores(&self, _record: &TrainingRecord) -> Vec<f64> {
        self.counts.clone()
    }
}

/// Item-based nearest neighbours over the binary user x repository matrix.
///
/// `sim(i, j) = |U_i & U_j| / sqrt(|U_i| |U_j|)` for `i != j` (the diagonal
/// is left out), and a candidate scores the sum of its similarities to the
/// distinct repositories in the user's training history.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemKnnRecommender {
    /// Sparse rows of the similarity matrix.
    similar: Vec<Vec<(usize, f64)>>,
    histories: Vec<Vec<usize>>,
}

impl ItemKnnRecommender {
    pub fn fit(train: &Corpus) -> Self {
        let n = train.num_repos();
        let histories: Vec<Vec<usize>> = train
            .users()
            .iter()
            .map(|u| {
                let mut h: Vec<usize> = u.interactions.iter().map(|i| i.repo).collect();
                h.sort_unstable();
                h.dedup();
                h
            })
            .collect();
        let mut degree = vec![0usize; n];
        let mut common: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); n];
        for h in &histories {
            for &i in h {
                degree[i] += 1;
                for &j in h {
                    if i != j {
                        *common[i].entry(j).or_insert(0) += 1;
                    }
                }
            }
        }
        let similar = common
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.into_iter()
                    .map(|(j, c)| (j, c as f64 / ((degree[i] * degree[j]) as f64).sqrt()))
                    .collect()
            })
            .collect();
        ItemKnnRecommender { similar, histories }
    }

    pub fn similarity(&self, i: usize, j: usize) -> f64 {
        self.similar[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map(|p| self.similar[i][p].1)
            .unwrap_or(0.0)
    }

    /// Scores for an explicit history.
    pub fn scores_for_history(&self, history: &[usize]) -> Vec<f64> {
        let mut scores = vec![0.0; self.similar.len()];
        for &h in history {
            // sim is symmetric, so row h lists every candidate similar to h
            for &(c, s) in &self.similar[h] {
                scores[c] += s;
            }
        }
        scores
    }
}

impl Recommender for ItemKnnRecommender {
    fn num_items(&self) -> usize {
        self.similar.len()
    }

    fn scores(&self, record: &TrainingRecord) -> Vec<f64> {
        match self.histories.get(record.user) {
            Some(h) if !h.is_empty() => self.scores_for_history(h),
            _ => {
                let mut h = record.window.clone();
                h.sort_unstable();
                h.dedup();
                self.scores_for_history(&h)
            }
        }
    }
}
