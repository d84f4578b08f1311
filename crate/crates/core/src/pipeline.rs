//! Glue between the stages: corpus to graph, embeddings to GRU features.

use ndarray::Array2;

use crate::corpus::{complete_all_topics, Corpus, TopicVocabulary};
use crate::error::Result;
use crate::graph::{build_graph, build_topic_vectors, SimilarityGraph};
use crate::gru::{CountScaler, FeatureTable};

/// Completes every repository's topics against the corpus vocabulary and
/// builds the thresholded similarity graph.
pub fn topic_graph(corpus: &Corpus, epsilon: f64) -> Result<SimilarityGraph> {
    let vocab = TopicVocabulary::from_corpus(corpus);
    let completed = complete_all_topics(corpus, &vocab);
    build_graph(&build_topic_vectors(&completed, &vocab), epsilon)
}

/// Fuses embeddings with min-max scaled counts, the scaler fitted on
/// `fit_on` (typically the repositories seen in training).
pub fn repository_features(
    corpus: &Corpus,
    embeddings: &Array2<f64>,
    fit_on: impl IntoIterator<Item = usize>,
) -> Result<FeatureTable> {
    let scaler = CountScaler::fit(corpus, fit_on);
    FeatureTable::build(embeddings, corpus, &scaler)
}
