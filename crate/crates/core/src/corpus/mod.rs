//! User–repository interaction corpus.
//!
//! Repositories and users are stored sorted by id, so a repository's index
//! order coincides with the lexicographic order of its id. Every tie-break
//! in the crate relies on that.

mod filter;
mod io;
mod records;
mod topics;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::normalize_topic;

pub use filter::{filter_corpus, FilterOptions};
pub use io::{load_corpus, write_corpus, CorpusPaths};
pub use records::{build_training_records, records_for_sequence, TrainingRecord, WindowMode};
pub use topics::{complete_all_topics, complete_topics, TopicVocabulary};

/// A repository as it appears in `repos.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoRecord {
    pub id: String,
    #[serde(default)]
    pub topics: Vec<String>,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub readme: String,
    #[serde(default)]
    pub language: Option<String>,
    #[serde(default)]
    pub watches: u64,
    #[serde(default)]
    pub stars: u64,
    #[serde(default)]
    pub forks: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Repository {
    pub id: String,
    /// Normalized explicit topics.
    pub explicit_topics: BTreeSet<String>,
    pub description: String,
    pub readme: String,
    /// Normalized language label.
    pub language: Option<String>,
    pub watches: u64,
    pub stars: u64,
    pub forks: u64,
    record: RepoRecord,
}

impl Repository {
    pub fn from_record(record: RepoRecord) -> Self {
        let explicit_topics = record.topics.iter().filter_map(|t| normalize_topic(t)).collect();
        let language = record.language.as_deref().and_then(normalize_topic);
        Repository {
            id: record.id.clone(),
            explicit_topics,
            description: record.description.clone(),
            readme: record.readme.clone(),
            language,
            watches: record.watches,
            stars: record.stars,
            forks: record.forks,
            record,
        }
    }

    /// The record this repository was built from, with its original labels.
    pub fn record(&self) -> &RepoRecord {
        &self.record
    }

    pub fn counts(&self) -> [u64; 3] {
        [self.watches, self.stars, self.forks]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interaction {
    /// Index into [`Corpus::repos`].
    pub repo: usize,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct User {
    pub id: String,
    /// Sorted by timestamp, ties by repository id.
    pub interactions: Vec<Interaction>,
}

impl User {
    pub fn sequence(&self) -> Vec<usize> {
        self.interactions.iter().map(|i| i.repo).collect()
    }
}

/// A raw interaction keyed by ids, as found in `interactions.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user_id: String,
    pub repo_id: String,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    repos: Vec<Repository>,
    users: Vec<User>,
    repo_index: HashMap<String, usize>,
    user_index: HashMap<String, usize>,
}

impl Corpus {
    /// Assembles a corpus, resolving every interaction against the
    /// repositories and users given.
    ///
    /// Duplicate repository or user ids and dangling references are
    /// validation errors. Users without interactions are kept; filtering
    /// removes them.
    pub fn from_parts(
        repos: Vec<Repository>,
        user_ids: Vec<String>,
        interactions: Vec<InteractionRecord>,
    ) -> Result<Self> {
        let mut repos = repos;
        repos.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = repos.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::Validation(format!("duplicate repository id {:?}", w[0].id)));
        }
        let repo_index: HashMap<String, usize> =
            repos.iter().enumerate().map(|(i, r)| (r.id.clone(), i)).collect();

        let mut user_ids = user_ids;
        user_ids.sort();
        if let Some(w) = user_ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("duplicate user id {:?}", w[0])));
        }
        let user_index: HashMap<String, usize> =
            user_ids.iter().enumerate().map(|(i, u)| (u.clone(), i)).collect();
        let mut users: Vec<User> = user_ids
            .into_iter()
            .map(|id| User { id, interactions: Vec::new() })
            .collect();

        for rec in interactions {
            let &repo = repo_index.get(&rec.repo_id).ok_or_else(|| {
                Error::Validation(format!(
                    "interaction of user {:?} references unknown repository {:?}",
                    rec.user_id, rec.repo_id
                ))
            })?;
            let &user = user_index.get(&rec.user_id).ok_or_else(|| {
                Error::Validation(format!("interaction references unknown user {:?}", rec.user_id))
            })?;
            users[user].interactions.push(Interaction { repo, timestamp: rec.timestamp });
        }
        for user in &mut users {
            // repo index order == repo id order
            user.interactions.sort_by_key(|i| (i.timestamp, i.repo));
        }
        Ok(Corpus { repos, users, repo_index, user_index })
    }

    pub fn repos(&self) -> &[Repository] {
        &self.repos
    }

    pub fn users(&self) -> &[User] {
        &self.users
    }

    pub fn repo(&self, idx: usize) -> &Repository {
        &self.repos[idx]
    }

    pub fn repo_idx(&self, id: &str) -> Option<usize> {
        self.repo_index.get(id).copied()
    }

    pub fn user_idx(&self, id: &str) -> Option<usize> {
        self.user_index.get(id).copied()
    }

    pub fn num_repos(&self) -> usize {
        self.repos.len()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_interactions(&self) -> usize {
        self.users.iter().map(|u| u.interactions.len()).sum()
    }

    /// Fraction of filled cells of the user × repository matrix.
    pub fn density(&self) -> f64 {
        let cells = self.num_users() as f64 * self.num_repos() as f64;
        if cells == 0.0 {
            0.0
        } else {
            self.num_interactions() as f64 / cells
        }
    }

    /// All interactions as id-keyed records, in user then time order.
    pub fn interaction_records(&self) -> Vec<InteractionRecord> {
        self.users
            .iter()
            .flat_map(|u| {
                u.interactions.iter().map(move |i| InteractionRecord {
                    user_id: u.id.clone(),
                    repo_id: self.repos[i.repo].id.clone(),
                    timestamp: i.timestamp,
                })
            })
            .collect()
    }

    /// Builds a new corpus keeping only the listed interactions of each user
    /// (`keep[u][k]` for the k-th interaction of user u) and the repositories
    /// and users selected by the predicates.
    pub(crate) fn retain(
        &self,
        keep_repo: impl Fn(usize) -> bool,
        keep_user: impl Fn(usize) -> bool,
        keep_interaction: impl Fn(usize, usize) -> bool,
    ) -> Corpus {
        let repos: Vec<Repository> = self
            .repos
            .iter()
            .enumerate()
            .filter(|(i, _)| keep_repo(*i))
            .map(|(_, r)| r.clone())
            .collect();
        let mut user_ids = Vec::new();
        let mut interactions = Vec::new();
        for (u, user) in self.users.iter().enumerate() {
            if !keep_user(u) {
                continue;
            }
            user_ids.push(user.id.clone());
            for (k, inter) in user.interactions.iter().enumerate() {
                if keep_repo(inter.repo) && keep_interaction(u, k) {
                    interactions.push(InteractionRecord {
                        user_id: user.id.clone(),
                        repo_id: self.repos[inter.repo].id.clone(),
                        timestamp: inter.timestamp,
                    });
                }
            }
        }
        Corpus::from_parts(repos, user_ids, interactions)
            .expect("subset of a valid corpus is valid")
    }
}
