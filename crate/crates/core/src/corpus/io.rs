use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Corpus, InteractionRecord, RepoRecord, Repository};
use crate::error::{Error, Result};

/// Locations of the three JSON Lines files making up a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusPaths {
    pub repos: PathBuf,
    pub users: PathBuf,
    pub interactions: PathBuf,
}

impl CorpusPaths {
    /// `repos.jsonl`, `users.jsonl` and `interactions.jsonl` inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        CorpusPaths {
            repos: dir.join("repos.jsonl"),
            users: dir.join("users.jsonl"),
            interactions: dir.join("interactions.jsonl"),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct UserRecord {
    id: String,
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(&item).expect("corpus records serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads and cross-validates a corpus.
pub fn load_corpus(paths: &CorpusPaths) -> Result<Corpus> {
    let repos: Vec<RepoRecord> = read_jsonl(&paths.repos)?;
    let users: Vec<UserRecord> = read_jsonl(&paths.users)?;
    let interactions: Vec<InteractionRecord> = read_jsonl(&paths.interactions)?;
    if interactions.is_empty() {
        return Err(Error::NoInteractions);
    }
    Corpus::from_parts(
        repos.into_iter().map(Repository::from_record).collect(),
        users.into_iter().map(|u| u.id).collect(),
        interactions,
    )
}

/// Writes `corpus` as the three JSON Lines files inside `dir`.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<CorpusPaths> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = CorpusPaths::in_dir(dir);
    write_jsonl(&paths.repos, corpus.repos().iter().map(|r| r.record()))?;
    write_jsonl(&paths.users, corpus.users().iter().map(|u| UserRecord { id: u.id.clone() }))?;
    write_jsonl(&paths.interactions, corpus.interaction_records())?;
    Ok(paths)
}
