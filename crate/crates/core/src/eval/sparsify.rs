use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SparsityLevel {
    #[default]
    None,
    Half,
    All,
}

impl SparsityLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            SparsityLevel::None => "none",
            SparsityLevel::Half => "half",
            SparsityLevel::All => "all",
        }
    }

    /// Deletions requested out of `budget`.
    pub fn target(self, budget: usize) -> usize {
        match self {
            SparsityLevel::None => 0,
            SparsityLevel::Half => budget / 2,
            SparsityLevel::All => budget,
        }
    }
}

impl fmt::Display for SparsityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SparsityLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(SparsityLevel::None),
            "half" => Ok(SparsityLevel::Half),
            "all" => Ok(SparsityLevel::All),
            other => Err(Error::Config(format!("unknown sparsity level {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsitySpec {
    pub level: SparsityLevel,
    /// Deletable-interaction budget; `None` uses [`max_deletable`].
    pub budget: Option<usize>,
    pub min_user_repos: usize,
    pub min_repo_users: usize,
    pub seed: u64,
}

impl Default for SparsitySpec {
    fn default() -> Self {
        SparsitySpec { level: SparsityLevel::None, budget: None, min_user_repos: 3, min_repo_users: 1, seed: 0 }
    }
}

/// Upper bound on deletions allowed by the per-user minimum.
pub fn max_deletable(corpus: &Corpus, spec: &SparsitySpec) -> usize {
    corpus
        .users()
        .iter()
        .map(|u| u.interactions.len().saturating_sub(spec.min_user_repos))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsifyOutcome {
    pub corpus: Corpus,
    pub target: usize,
    pub deleted: usize,
    pub density_before: f64,
    pub density_after: f64,
}

/// Tracks per-user and per-repository counts so each candidate deletion can
/// be checked against the constraints in O(1).
struct Constraints {
    user_count: Vec<usize>,
    repo_users: Vec<usize>,
    pair_count: HashMap<(usize, usize), usize>,
    min_user: usize,
    min_repo: usize,
}

impl Constraints {
    fn new(corpus: &Corpus, spec: &SparsitySpec) -> Self {
        let mut pair_count = HashMap::new();
        let mut repo_users = vec![0; corpus.num_repos()];
        for (u, user) in corpus.users().iter().enumerate() {
            for i in &user.interactions {
                let c = pair_count.entry((u, i.repo)).or_insert(0);
                if *c == 0 {
                    repo_users[i.repo] += 1;
                }
                *c += 1;
            }
        }
        Constraints {
            user_count: corpus.users().iter().map(|u| u.interactions.len()).collect(),
            repo_users,
            pair_count,
            min_user: spec.min_user_repos,
            min_repo: spec.min_repo_users,
        }
    }

    fn satisfied(&self) -> bool {
        self.user_count.iter().all(|&c| c >= self.min_user) && self.repo_users.iter().all(|&c| c >= self.min_repo)
    }

    fn deletable(&self, user: usize, repo: usize) -> bool {
        self.user_count[user] > self.min_user
            && (self.pair_count[&(user, repo)] > 1 || self.repo_users[repo] > self.min_repo)
    }

    fn delete(&mut self, user: usize, repo: usize) {
        self.user_count[user] -= 1;
        let c = self.pair_count.get_mut(&(user, repo)).expect("existing pair");
        *c -= 1;
        if *c == 0 {
            self.repo_users[repo] -= 1;
        }
    }
}

/// Deletes uniformly random deletable interactions until the level's share
/// of the budget is reached or nothing else can go.
///
/// Counts only decrease, so an interaction that is not deletable now never
/// becomes deletable later; rejected candidates are dropped from the pool,
/// which keeps every draw uniform over the currently deletable ones.
pub fn sparsify(corpus: &Corpus, spec: &SparsitySpec) -> Result<SparsifyOutcome> {
    let mut state = Constraints::new(corpus, spec);
    if !state.satisfied() {
        return Err(Error::Validation(format!(
            "corpus violates the sparsity constraints (>= {} repositories per user, >= {} users per repository)",
            spec.min_user_repos, spec.min_repo_users
        )));
    }
    let budget = spec.budget.unwrap_or_else(|| max_deletable(corpus, spec));
    let target = spec.level.target(budget);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pool: Vec<(usize, usize)> = corpus
        .users()
        .iter()
        .enumerate()
        .flat_map(|(u, user)| (0..user.interactions.len()).map(move |k| (u, k)))
        .collect();
    let mut deleted_flags: Vec<Vec<bool>> =
        corpus.users().iter().map(|u| vec![false; u.interactions.len()]).collect();
    let mut deleted = 0;
    while deleted < target && !pool.is_empty() {
        let pick = rng.random_range(0..pool.len());
        let (u, k) = pool.swap_remove(pick);
        let repo = corpus.users()[u].interactions[k].repo;
        if state.deletable(u, repo) {
            state.delete(u, repo);
            deleted_flags[u][k] = true;
            deleted += 1;
            debug_assert!(state.satisfied());
        }
    }
    if deleted < target {
        warn!("sparsify reached {deleted} of {target} deletions; no deletable interaction remains");
    }
    let sparse = corpus.retain(|_| true, |_| true, |u, k| !deleted_flags[u][k]);
    Ok(SparsifyOutcome {
        density_before: corpus.density(),
        density_after: sparse.density(),
        corpus: sparse,
        target,
        deleted,
    })
}
