//! Synthetic graphs and corpora with known structure.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, InteractionRecord, RepoRecord, Repository};
use crate::graph::SimilarityGraph;

/// Two disjoint cliques of `size` vertices each with unit weights. Returns
/// the graph and each vertex's cluster (vertices `0..size` are cluster 0).
pub fn planted_cliques(size: usize) -> (SimilarityGraph, Vec<usize>) {
    let mut edges = Vec::new();
    for c in 0..2 {
        for p in c * size..(c + 1) * size {
            for q in p + 1..(c + 1) * size {
                edges.push((p, q, 1.0));
            }
        }
    }
    let labels = (0..2 * size).map(|v| v / size).collect();
    (SimilarityGraph::from_edges(2 * size, edges, 0.5).expect("valid edges"), labels)
}

pub fn repo_id(i: usize) -> String {
    format!("owner/repo{i:03}")
}

pub fn user_id(u: usize) -> String {
    format!("user{u:04}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSpec {
    pub users: usize,
    pub repos: usize,
    pub length: usize,
    /// Probability that a step ignores the table and picks uniformly.
    pub noise: f64,
    pub seed: u64,
}

impl Default for TransitionSpec {
    fn default() -> Self {
        TransitionSpec { users: 200, repos: 20, length: 30, noise: 0.05, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionCorpus {
    pub corpus: Corpus,
    /// `table[i]` is the repository that follows `i` without noise.
    pub table: Vec<usize>,
}

/// Users walk a fixed first-order transition table; each step is replaced
/// by a uniform draw with probability `noise`.
///
/// Repository `i` carries topics `tag{i}` and `tag{i+1}` (mod the catalog),
/// so the topic graph is a ring and every repository has a distinct row.
/// Counts are random and carry no signal.
pub fn transition_corpus(spec: &TransitionSpec) -> TransitionCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.repos;
    // a random cyclic permutation, so no repository maps to itself
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let mut table = vec![0; n];
    for k in 0..n {
        table[order[k]] = order[(k + 1) % n];
    }

    let repos: Vec<Repository> = (0..n)
        .map(|i| {
            Repository::from_record(RepoRecord {
                id: repo_id(i),
                topics: vec![format!("tag{i:03}"), format!("tag{:03}", (i + 1) % n)],
                description: String::new(),
                readme: String::new(),
                language: None,
                watches: rng.random_range(0..100),
                stars: rng.random_range(0..100),
                forks: rng.random_range(0..100),
            })
        })
        .collect();
    let mut interactions = Vec::with_capacity(spec.users * spec.length);
    for u in 0..spec.users {
        let mut cur = rng.random_range(0..n);
        for t in 0..spec.length {
            if t > 0 {
                cur = if rng.random_bool(spec.noise) { rng.random_range(0..n) } else { table[cur] };
            }
            interactions.push(InteractionRecord { user_id: user_id(u), repo_id: repo_id(cur), timestamp: t as i64 });
        }
    }
    let corpus = Corpus::from_parts(repos, (0..spec.users).map(user_id).collect(), interactions)
        .expect("generated corpus is consistent");
    TransitionCorpus { corpus, table }
}

/// Small random corpus: repositories draw topics from a vocabulary of
/// `topics` labels, users draw `1..=max_len` interactions.
pub fn random_corpus(rng: &mut impl Rng, repos: usize, users: usize, max_len: usize, topics: usize) -> Corpus {
    let vocab: Vec<String> = (0..topics.max(1)).map(|t| format!("topic{t:03}")).collect();
    let repo_list: Vec<Repository> = (0..repos)
        .map(|i| {
            let k = rng.random_range(0..=vocab.len().min(4));
            let chosen: Vec<String> = vocab.choose_multiple(rng, k).cloned().collect();
            Repository::from_record(RepoRecord {
                id: repo_id(i),
                topics: chosen,
                description: String::new(),
                readme: String::new(),
                language: None,
                watches: rng.random_range(0..1000),
                stars: rng.random_range(0..1000),
                forks: rng.random_range(0..1000),
            })
        })
        .collect();
    let mut interactions = Vec::new();
    for u in 0..users {
        let len = rng.random_range(1..=max_len.max(1));
        let mut t = 0i64;
        for _ in 0..len {
            t += rng.random_range(0..3);
            interactions.push(InteractionRecord {
                user_id: user_id(u),
                repo_id: repo_id(rng.random_range(0..repos)),
                timestamp: t,
            });
        }
    }
    Corpus::from_parts(repo_list, (0..users).map(user_id).collect(), interactions).expect("consistent corpus")
}
