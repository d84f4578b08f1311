//! Exhaustive check of sparsification on corpora of at most 12 interactions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqrec_core::eval::{sparsify, SparsityLevel, SparsitySpec};

use super::criteria::corpus_from_sequences;

const MIN_USER: usize = 3;

/// Constraint oracle on a list of `(user, repo)` interactions.
fn valid(pairs: &[(usize, usize)], users: usize, repos: usize) -> bool {
    let mut per_user = vec![0; users];
    let mut pair_seen = std::collections::BTreeSet::new();
    let mut per_repo = vec![0; repos];
    for &(u, r) in pairs {
        per_user[u] += 1;
        if pair_seen.insert((u, r)) {
            per_repo[r] += 1;
        }
    }
    per_user.iter().all(|&c| c >= MIN_USER) && per_repo.iter().all(|&c| c >= 1)
}

fn toy(rng: &mut impl Rng) -> (Vec<Vec<usize>>, usize) {
    loop {
        let users = rng.random_range(1..=3);
        let repos = rng.random_range(2..=5);
        let seqs: Vec<Vec<usize>> =
            (0..users).map(|_| (0..rng.random_range(3..=5)).map(|_| rng.random_range(0..repos)).collect()).collect();
        let total: usize = seqs.iter().map(Vec::len).sum();
        let mut used: Vec<usize> = seqs.iter().flatten().copied().collect();
        used.sort_unstable();
        used.dedup();
        if total <= 12 && used.len() == repos {
            return (seqs, repos);
        }
    }
}

pub fn sparsify_exhaustive() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for case in 0..40 {
        let (seqs, repos) = toy(&mut rng);
        let users = seqs.len();
        let pairs: Vec<(usize, usize)> =
            seqs.iter().enumerate().flat_map(|(u, s)| s.iter().map(move |&r| (u, r))).collect();
        let n = pairs.len();

        // every subset: validity is closed under removing deletions, so any
        // order of a valid deletion set keeps the constraints at every step
        let keep_valid: Vec<bool> = (0u32..1 << n)
            .map(|mask| {
                let kept: Vec<_> = (0..n).filter(|k| mask & (1 << k) != 0).map(|k| pairs[k]).collect();
                valid(&kept, users, repos)
            })
            .collect();
        for mask in 0u32..1 << n {
            if !keep_valid[mask as usize] {
                continue;
            }
            for k in 0..n {
                let more = mask | (1 << k);
                if !keep_valid[more as usize] {
                    return Err(format!("case {case}: adding interaction {k} back broke the constraints"));
                }
            }
        }
        let best = (0u32..1 << n).filter(|&m| keep_valid[m as usize]).map(|m| n - m.count_ones() as usize).max();

        let corpus = corpus_from_sequences(repos, &seqs);
        for level in [SparsityLevel::None, SparsityLevel::Half, SparsityLevel::All] {
            for seed in 0..16 {
                let out = sparsify(&corpus, &SparsitySpec { level, seed, ..SparsitySpec::default() })
                    .map_err(|e| e.to_string())?;
                let kept: Vec<(usize, usize)> = out
                    .corpus
                    .users()
                    .iter()
                    .enumerate()
                    .flat_map(|(u, user)| user.interactions.iter().map(move |i| (u, i.repo)))
                    .collect();
                if !valid(&kept, users, repos) {
                    return Err(format!("case {case}: constraints violated after sparsify"));
                }
                if out.deleted > best.unwrap_or(0) {
                    return Err(format!("case {case}: deleted {} > feasible {}", out.deleted, best.unwrap_or(0)));
                }
                if out.deleted < out.target {
                    // stopped early: no single further deletion may be possible
                    for k in 0..kept.len() {
                        let mut fewer = kept.clone();
                        fewer.remove(k);
                        if valid(&fewer, users, repos) {
                            return Err(format!("case {case}: stopped at {} of {} with a deletable interaction left", out.deleted, out.target));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}
