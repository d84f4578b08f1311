use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOptions {
    /// Users need at least this many interactions.
    pub min_user_repos: usize,
    /// Repositories need at least this many distinct users.
    pub min_repo_users: usize,
    /// Apply the user filter and then the repository filter once, instead of
    /// iterating both to a fixed point.
    pub single_pass: bool,
}

impl Default for FilterOptions {
    fn default() -> Self {
        FilterOptions { min_user_repos: 6, min_repo_users: 5, single_pass: false }
    }
}

/// Drops sparse users and repositories.
///
/// Removing a repository can push a user below its threshold and vice
/// versa, so by default both filters alternate until nothing changes.
pub fn filter_corpus(corpus: &Corpus, opts: &FilterOptions) -> Result<Corpus> {
    if opts.min_user_repos == 0 || opts.min_repo_users == 0 {
        return Err(Error::Config("filter thresholds must be at least 1".into()));
    }
    let mut current = corpus.clone();
    loop {
        let users_before = current.num_users();
        let repos_before = current.num_repos();

        current = drop_users(&current, opts.min_user_repos);
        current = drop_repos(&current, opts.min_repo_users);

        if current.num_users() == 0 || current.num_repos() == 0 || current.num_interactions() == 0
        {
            return Err(Error::FilterTooAggressive);
        }
        let stable = current.num_users() == users_before && current.num_repos() == repos_before;
        if opts.single_pass || stable {
            // single pass may leave users emptied by the repo filter
            if opts.single_pass {
                current = drop_users(&current, 1);
            }
            return Ok(current);
        }
    }
}

fn drop_users(c: &Corpus, min_interactions: usize) -> Corpus {
    c.retain(|_| true, |u| c.users()[u].interactions.len() >= min_interactions, |_, _| true)
}

fn drop_repos(c: &Corpus, min_users: usize) -> Corpus {
    let mut users_of = vec![HashSet::new(); c.num_repos()];
    for (u, user) in c.users().iter().enumerate() {
        for i in &user.interactions {
            users_of[i.repo].insert(u);
        }
    }
    c.retain(|r| users_of[r].len() >= min_users, |_| true, |_, _| true)
}
