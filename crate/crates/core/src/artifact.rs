//! Config hashes, per-stage seeds and the embeddings file.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of a stage config chained onto the hash of the stage's inputs, so a
/// change anywhere upstream changes every downstream hash.
pub fn config_hash(upstream: &str, stage: &str, config: &impl Serialize) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    let mut h = Sha256::new();
    h.update(upstream.as_bytes());
    h.update([0]);
    h.update(stage.as_bytes());
    h.update([0]);
    h.update(json.as_bytes());
    hex(&h.finalize()[..8])
}

/// Digest of the contents of `paths`, in order.
pub fn content_hash(paths: &[&Path]) -> Result<String> {
    let mut h = Sha256::new();
    for p in paths {
        let bytes = std::fs::read(p).map_err(|e| Error::io(*p, e))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex(&h.finalize()[..8]))
}

/// Seed for one stage, derived from the root seed.
pub fn derive_seed(root: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(stage.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Fails when an input artifact was produced under a different config.
pub fn check_hash(artifact: &str, expected: &str, found: Option<&str>) -> Result<()> {
    match found {
        Some(f) if f == expected => Ok(()),
        other => Err(Error::HashMismatch {
            artifact: artifact.to_string(),
            expected: expected.to_string(),
            found: other.unwrap_or("<none>").to_string(),
        }),
    }
}

/// Writes `embeddings.tsv`: `# key\tvalue` header lines, then one row per
/// repository with its id and values in shortest round-trip form.
pub fn write_embeddings(
    path: &Path,
    repo_ids: &[String],
    embeddings: &Array2<f64>,
    header: &[(&str, String)],
) -> Result<()> {
    if repo_ids.len() != embeddings.nrows() {
        return Err(Error::Shape(format!("{} ids for {} embedding rows", repo_ids.len(), embeddings.nrows())));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "# dim\t{}", embeddings.ncols())?;
        for (k, v) in header {
            writeln!(w, "# {k}\t{v}")?;
        }
        for (id, row) in repo_ids.iter().zip(embeddings.outer_iter()) {
            write!(w, "{id}")?;
            for x in row {
                write!(w, "\t{x:?}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    /// Rows in the order of the `repo_ids` passed to [`read_embeddings`].
    pub embeddings: Array2<f64>,
    pub header: Vec<(String, String)>,
}

impl EmbeddingFile {
    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Reads `embeddings.tsv`; every id in `repo_ids` must appear exactly once.
pub fn read_embeddings(path: &Path, repo_ids: &[String]) -> Result<EmbeddingFile> {
    let index: HashMap<&str, usize> = repo_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let mut header = Vec::new();
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; repo_ids.len()];
    let mut dim: Option<usize> = None;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let no = lineno + 1;
        if let Some(rest) = line.strip_prefix("# ") {
            let (k, v) = rest.split_once('\t').unwrap_or((rest, ""));
            header.push((k.to_string(), v.to_string()));
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let id = cols.next().unwrap_or_default();
        let r = *index.get(id).ok_or_else(|| parse_err(no, format!("unknown repository {id:?}")))?;
        let values = cols
            .map(|c| c.parse::<f64>().map_err(|e| parse_err(no, format!("bad value: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        match dim {
            Some(d) if d != values.len() => {
                return Err(parse_err(no, format!("expected {d} values, found {}", values.len())))
            }
            _ => dim = Some(values.len()),
        }
        if rows[r].replace(values).is_some() {
            return Err(parse_err(no, format!("duplicate repository {id:?}")));
        }
    }
    if let Some(missing) = rows.iter().position(Option::is_none) {
        return Err(Error::Validation(format!(
            "{}: no embedding for repository {:?}",
            path.display(),
            repo_ids[missing]
        )));
    }
    let d = dim.unwrap_or(0);
    let flat: Vec<f64> = rows.into_iter().flatten().flatten().collect();
    let embeddings = Array2::from_shape_vec((repo_ids.len(), d), flat).expect("rows checked");
    Ok(EmbeddingFile { embeddings, header })
}
