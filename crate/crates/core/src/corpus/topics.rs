use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use super::{Corpus, Repository};
use crate::text::normalize_text;

/// The ordered set of normalized topics over which topic vectors are built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicVocabulary {
    topics: Vec<String>,
    index: HashMap<String, usize>,
    max_tokens: usize,
}

impl TopicVocabulary {
    pub fn from_topics<I, S>(topics: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = topics.into_iter().map(Into::into).collect();
        let topics: Vec<String> = set.into_iter().collect();
        let index = topics.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let max_tokens = topics.iter().map(|t| t.split('-').count()).max().unwrap_or(0);
        TopicVocabulary { topics, index, max_tokens }
    }

    /// Explicit topics of every repository plus every language label,
    /// frozen before any completion happens.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        Self::from_topics(corpus.repos().iter().flat_map(|r| {
            r.explicit_topics.iter().cloned().chain(r.language.iter().cloned())
        }))
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn topics(&self) -> &[String] {
        &self.topics
    }

    pub fn position(&self, topic: &str) -> Option<usize> {
        self.index.get(topic).copied()
    }

    fn matches_in(&self, tokens: &[String], out: &mut BTreeSet<String>) {
        let mut key = String::new();
        for start in 0..tokens.len() {
            key.clear();
            for (n, tok) in tokens[start..].iter().take(self.max_tokens).enumerate() {
                if n > 0 {
                    key.push('-');
                }
                key.push_str(tok);
                if let Some(&pos) = self.index.get(key.as_str()) {
                    out.insert(self.topics[pos].clone());
                }
            }
        }
    }
}

/// Explicit topics, plus every vocabulary topic whose token sequence occurs
/// contiguously in the normalized description or README, plus the language.
pub fn complete_topics(repo: &Repository, vocab: &TopicVocabulary) -> BTreeSet<String> {
    let mut topics = repo.explicit_topics.clone();
    vocab.matches_in(&normalize_text(&repo.description), &mut topics);
    vocab.matches_in(&normalize_text(&repo.readme), &mut topics);
    if let Some(lang) = &repo.language {
        topics.insert(lang.clone());
    }
    topics
}

pub fn complete_all_topics(corpus: &Corpus, vocab: &TopicVocabulary) -> Vec<BTreeSet<String>> {
    corpus.repos().par_iter().map(|r| complete_topics(r, vocab)).collect()
}
