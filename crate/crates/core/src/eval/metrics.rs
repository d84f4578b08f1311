//! Single-relevant-item top-N metrics. Ranks are 1-based; `None` means the
//! item was not ranked at all.

pub fn hit_rate(rank: Option<usize>, n: usize) -> f64 {
    match rank {
        Some(r) if r <= n => 1.0,
        _ => 0.0,
    }
}

pub fn reciprocal_rank(rank: Option<usize>, n: usize) -> f64 {
    match rank {
        Some(r) if r <= n => 1.0 / r as f64,
        _ => 0.0,
    }
}

/// With one relevant item the ideal DCG is 1, so NDCG is the item's gain.
pub fn ndcg(rank: Option<usize>, n: usize) -> f64 {
    match rank {
        Some(r) if r <= n => 1.0 / ((r + 1) as f64).log2(),
        _ => 0.0,
    }
}
