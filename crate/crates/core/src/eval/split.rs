use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{records_for_sequence, Corpus, TrainingRecord, WindowMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub valid_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.8, valid_fraction: 0.1, test_fraction: 0.1 }
    }
}

/// Slack for fractions like `0.1 * 30` that land a hair off an integer.
const ROUNDING_SLACK: f64 = 1e-9;

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train_fraction, self.valid_fraction, self.test_fraction];
        if f.iter().any(|x| !(*x >= 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions {f:?} must be non-negative and sum to 1")));
        }
        Ok(())
    }

    /// `(train, valid, test)` sizes for a sequence of `n` interactions:
    /// floor for train (at least 1), ceiling for valid, the rest for test.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let nf = n as f64;
        let train = ((self.train_fraction * nf + ROUNDING_SLACK).floor() as usize).clamp(1.min(n), n);
        let valid = ((self.valid_fraction * nf - ROUNDING_SLACK).ceil().max(0.0) as usize).min(n - train);
        (train, valid, n - train - valid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitPart {
    Train,
    Valid,
    Test,
}

impl SplitPart {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitPart::Train => "train",
            SplitPart::Valid => "valid",
            SplitPart::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserSplit {
    pub user: usize,
    pub train_end: usize,
    pub valid_end: usize,
    pub len: usize,
}

impl UserSplit {
    pub fn range(&self, part: SplitPart) -> Range<usize> {
        match part {
            SplitPart::Train => 0..self.train_end,
            SplitPart::Valid => self.train_end..self.valid_end,
            SplitPart::Test => self.valid_end..self.len,
        }
    }

    pub fn test_empty(&self) -> bool {
        self.valid_end == self.len
    }
}

/// Per-user chronological partition of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub users: Vec<UserSplit>,
    /// Users left out for having fewer than 3 interactions.
    pub excluded: Vec<usize>,
}

/// Splits each user's sequence into a leading train part, then valid, then
/// test. Users with fewer than 3 interactions are excluded.
pub fn chronological_split(corpus: &Corpus, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut users = Vec::new();
    let mut excluded = Vec::new();
    for (u, user) in corpus.users().iter().enumerate() {
        let n = user.interactions.len();
        if n < 3 {
            warn!("user {} has {n} interactions; excluded from the split", user.id);
            excluded.push(u);
            continue;
        }
        let (train, valid, _) = spec.sizes(n);
        users.push(UserSplit { user: u, train_end: train, valid_end: train + valid, len: n });
    }
    Ok(Split { users, excluded })
}

impl Split {
    /// Records whose label lies in `part`. Windows may reach back into
    /// earlier parts; training windows never reach past the train part.
    pub fn records(&self, corpus: &Corpus, part: SplitPart, window: usize, mode: WindowMode) -> Vec<TrainingRecord> {
        self.users
            .iter()
            .flat_map(|us| {
                let seq = corpus.users()[us.user].sequence();
                let visible = if part == SplitPart::Train { &seq[..us.train_end] } else { &seq[..] };
                records_for_sequence(us.user, visible, us.range(part), window, mode)
            })
            .collect()
    }

    /// The corpus restricted to the interactions of `part` (all repositories
    /// and users kept, so indices are unchanged).
    pub fn part_corpus(&self, corpus: &Corpus, part: SplitPart) -> Corpus {
        let mut ranges = vec![0..0; corpus.num_users()];
        for us in &self.users {
            ranges[us.user] = us.range(part);
        }
        corpus.retain(|_| true, |_| true, |u, k| ranges[u].contains(&k))
    }

    /// Repositories with at least one interaction in `part`, ascending.
    pub fn repos_in(&self, corpus: &Corpus, part: SplitPart) -> Vec<usize> {
        let mut seen = vec![false; corpus.num_repos()];
        for us in &self.users {
            for i in &corpus.users()[us.user].interactions[us.range(part)] {
                seen[i.repo] = true;
            }
        }
        (0..seen.len()).filter(|&r| seen[r]).collect()
    }

    /// Writes `splits.tsv`: user id, repository id, timestamp, part.
    pub fn write_tsv(&self, corpus: &Corpus, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(w, "user_id\trepo_id\ttimestamp\tsplit")?;
            for us in &self.users {
                let user = &corpus.users()[us.user];
                for part in [SplitPart::Train, SplitPart::Valid, SplitPart::Test] {
                    for i in &user.interactions[us.range(part)] {
                        writeln!(w, "{}\t{}\t{}\t{}", user.id, corpus.repo(i.repo).id, i.timestamp, part.as_str())?;
                    }
                }
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}
