//! Offline evaluation protocol.

mod baselines;
mod metrics;
mod sparsify;
mod split;

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::TrainingRecord;
use crate::error::{Error, Result};

pub use baselines::{ItemKnnRecommender, PopRecommender};
pub use metrics::{hit_rate, ndcg, reciprocal_rank};
pub use sparsify::{max_deletable, sparsify, SparsifyOutcome, SparsityLevel, SparsitySpec};
pub use split::{chronological_split, Split, SplitPart, SplitSpec, UserSplit};

/// Cut-offs reported by default.
pub const DEFAULT_CUTOFFS: [usize; 4] = [5, 10, 15, 20];

/// Anything that scores the whole catalog for a record.
pub trait Recommender: Sync {
    fn num_items(&self) -> usize;
    /// One score per catalog item; higher is better.
    fn scores(&self, record: &TrainingRecord) -> Vec<f64>;
}

impl<R: Recommender + ?Sized> Recommender for &R {
    fn num_items(&self) -> usize {
        (**self).num_items()
    }

    fn scores(&self, record: &TrainingRecord) -> Vec<f64> {
        (**self).scores(record)
    }
}

/// Masks the repositories of each record's window (except the label) to
/// negative infinity.
pub struct ExcludeSeen<R>(pub R);

impl<R: Recommender> Recommender for ExcludeSeen<R> {
    fn num_items(&self) -> usize {
        self.0.num_items()
    }

    fn scores(&self, record: &TrainingRecord) -> Vec<f64> {
        let mut s = self.0.scores(record);
        for &r in &record.window {
            if r != record.label {
                s[r] = f64::NEG_INFINITY;
            }
        }
        s
    }
}

/// 1-based rank of `item`: one plus the number of items scored higher, or
/// scored equal with a lower index.
pub fn rank_of(scores: &[f64], item: usize) -> usize {
    let target = scores[item];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(i, &s)| s > target || (s == target && i < item))
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Mean over records.
    #[default]
    Micro,
    /// Mean over users of their per-record means.
    Macro,
}

/// Metric values in percent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub hr: f64,
    pub mrr: f64,
    pub ndcg: f64,
}

impl Metrics {
    fn of_rank(rank: usize, n: usize) -> Self {
        Metrics {
            hr: hit_rate(Some(rank), n),
            mrr: reciprocal_rank(Some(rank), n),
            ndcg: ndcg(Some(rank), n),
        }
    }

    fn add(&mut self, o: &Metrics) {
        self.hr += o.hr;
        self.mrr += o.mrr;
        self.ndcg += o.ndcg;
    }

    fn scale(&mut self, k: f64) {
        self.hr *= k;
        self.mrr *= k;
        self.ndcg *= k;
    }

    /// Rounded to 3 decimals.
    pub fn rounded(&self) -> Self {
        let r = |x: f64| (x * 1000.0).round() / 1000.0;
        Metrics { hr: r(self.hr), mrr: r(self.mrr), ndcg: r(self.ndcg) }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub metrics: BTreeMap<usize, Metrics>,
    pub records: usize,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl MetricsReport {
    pub fn at(&self, n: usize) -> Option<&Metrics> {
        self.metrics.get(&n)
    }

    pub fn with_metadata(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }
}

/// Ranks the label of every record and averages the metrics for each cut-off.
pub fn ranks<R: Recommender>(rec: &R, records: &[TrainingRecord]) -> Result<Vec<usize>> {
    let n = rec.num_items();
    if let Some(r) = records.iter().find(|r| r.label >= n) {
        return Err(Error::Validation(format!("label {} outside a catalog of {n}", r.label)));
    }
    Ok(records.par_iter().map(|r| rank_of(&rec.scores(r), r.label)).collect())
}

/// Averages top-N metrics over `records` for each cut-off in `cutoffs`.
pub fn evaluate<R: Recommender>(
    rec: &R,
    records: &[TrainingRecord],
    cutoffs: &[usize],
    averaging: Averaging,
) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::Validation("no records to evaluate".into()));
    }
    if cutoffs.contains(&0) {
        return Err(Error::Config("cut-offs must be at least 1".into()));
    }
    let ranks = ranks(rec, records)?;
    let mut metrics = BTreeMap::new();
    for &n in cutoffs {
        let mut total = Metrics::default();
        match averaging {
            Averaging::Micro => {
                for &r in &ranks {
                    total.add(&Metrics::of_rank(r, n));
                }
                total.scale(100.0 / ranks.len() as f64);
            }
            Averaging::Macro => {
                let mut per_user: BTreeMap<usize, (Metrics, usize)> = BTreeMap::new();
                for (rec, &r) in records.iter().zip(&ranks) {
                    let e = per_user.entry(rec.user).or_default();
                    e.0.add(&Metrics::of_rank(r, n));
                    e.1 += 1;
                }
                for (mut m, c) in per_user.values().copied() {
                    m.scale(1.0 / c as f64);
                    total.add(&m);
                }
                total.scale(100.0 / per_user.len() as f64);
            }
        }
        metrics.insert(n, total);
    }
    Ok(MetricsReport { metrics, records: records.len(), metadata: BTreeMap::new() })
}

/// Drops records whose label already appears in the window.
pub fn without_repeats(records: &[TrainingRecord]) -> Vec<TrainingRecord> {
    records
        .iter()
        .filter(|r| !r.window.iter().collect::<HashSet<_>>().contains(&r.label))
        .cloned()
        .collect()
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    if values.is_empty() {
        return MeanStd::default();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std }
}

/// Per-cut-off mean and standard deviation over several reports (one per seed).
pub fn aggregate_reports(reports: &[MetricsReport]) -> BTreeMap<usize, [MeanStd; 3]> {
    let mut out = BTreeMap::new();
    let Some(first) = reports.first() else { return out };
    for &n in first.metrics.keys() {
        let pick = |f: fn(&Metrics) -> f64| -> Vec<f64> {
            reports.iter().filter_map(|r| r.at(n)).map(f).collect()
        };
        out.insert(n, [mean_std(&pick(|m| m.hr)), mean_std(&pick(|m| m.mrr)), mean_std(&pick(|m| m.ndcg))]);
    }
    out
}
