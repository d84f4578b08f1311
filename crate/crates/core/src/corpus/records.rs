use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::Corpus;

/// One supervised example: the repositories a user touched right before
/// `step`, and the repository touched at `step`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingRecord {
    pub user: usize,
    /// Repository indices, oldest first.
    pub window: Vec<usize>,
    pub label: usize,
    /// Position of the label in the user's sequence (0-based).
    pub step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowMode {
    /// Exactly `L` prior interactions; shorter histories yield no record.
    #[default]
    Fixed,
    /// Every prior interaction.
    FullHistory,
    /// The last `L` prior interactions, or all of them when fewer exist.
    Clamped,
}

/// Records for the labels at positions `labels` of `sequence`.
///
/// Windows may reach before `labels.start`; only the label positions are
/// restricted. Position 0 never produces a record (no history).
pub fn records_for_sequence(
    user: usize,
    sequence: &[usize],
    labels: Range<usize>,
    window: usize,
    mode: WindowMode,
) -> Vec<TrainingRecord> {
    assert!(window >= 1, "window length must be at least 1");
    let end = labels.end.min(sequence.len());
    (labels.start.max(1)..end)
        .filter_map(|t| {
            let from = match mode {
                WindowMode::Fixed if t < window => return None,
                WindowMode::Fixed | WindowMode::Clamped => t.saturating_sub(window),
                WindowMode::FullHistory => 0,
            };
            Some(TrainingRecord {
                user,
                window: sequence[from..t].to_vec(),
                label: sequence[t],
                step: t,
            })
        })
        .collect()
}

/// Records over every user and every label position of the corpus.
pub fn build_training_records(
    corpus: &Corpus,
    window: usize,
    mode: WindowMode,
) -> Vec<TrainingRecord> {
    corpus
        .users()
        .iter()
        .enumerate()
        .flat_map(|(u, user)| {
            let seq = user.sequence();
            records_for_sequence(u, &seq, 0..seq.len(), window, mode)
        })
        .collect()
}
