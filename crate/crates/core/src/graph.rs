//! Context-induced repository graph: topic indicator vectors, pairwise
//! cosine similarity, and the edge-keeping threshold.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::TopicVocabulary;
use crate::error::{Error, Result};

/// Binary topic indicator of one repository, stored as the sorted positions
/// of its set bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicVector {
    pub repo: usize,
    len: usize,
    ones: Vec<usize>,
}

impl TopicVector {
    /// Builds a vector of length `len` with the given positions set.
    ///
    /// # Panics
    /// If a position is out of range.
    pub fn from_positions(repo: usize, len: usize, positions: impl IntoIterator<Item = usize>) -> Self {
        let ones: BTreeSet<usize> = positions.into_iter().collect();
        assert!(ones.iter().all(|&p| p < len), "topic position out of range");
        TopicVector { repo, len, ones: ones.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn ones(&self) -> &[usize] {
        &self.ones
    }

    pub fn is_zero(&self) -> bool {
        self.ones.is_empty()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.len];
        for &p in &self.ones {
            v[p] = 1.0;
        }
        v
    }
}

/// Topic vectors of every repository from its completed topic set.
/// Topics outside the vocabulary are ignored.
pub fn build_topic_vectors(completed: &[BTreeSet<String>], vocab: &TopicVocabulary) -> Vec<TopicVector> {
    completed
        .iter()
        .enumerate()
        .map(|(repo, topics)| {
            let v = TopicVector::from_positions(
                repo,
                vocab.len(),
                topics.iter().filter_map(|t| vocab.position(t)),
            );
            if v.is_zero() {
                warn!("repository #{repo} has no topics; it will be an isolated vertex");
            }
            v
        })
        .collect()
}

/// Cosine similarity of two binary vectors; 0 when either is all-zero.
pub fn cosine_similarity(a: &TopicVector, b: &TopicVector) -> f64 {
    let common = sorted_intersection_len(&a.ones, &b.ones);
    cosine_from_counts(common, a.ones.len(), b.ones.len())
}

fn cosine_from_counts(common: usize, na: usize, nb: usize) -> f64 {
    if na == 0 || nb == 0 {
        return 0.0;
    }
    common as f64 / ((na * nb) as f64).sqrt()
}

fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Cosine similarity of two real vectors; 0 when either has zero norm.
pub fn cosine_dense(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Keeps `s` as an edge weight only off the diagonal and at or above `epsilon`.
pub fn apply_threshold(s: f64, p: usize, q: usize, epsilon: f64) -> f64 {
    if p == q || s < epsilon {
        0.0
    } else {
        s
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("epsilon must lie in (0, 1), got {epsilon}")))
    }
}

/// Symmetric, zero-diagonal similarity matrix stored as sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    n: usize,
    /// Row r: `(q, s_rq)` sorted by q.
    rows: Vec<Vec<(usize, f64)>>,
    epsilon: f64,
}

impl SimilarityGraph {
    /// Builds a graph from an explicit undirected edge list. Used for
    /// synthetic graphs and when reading `graph.tsv`.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>, epsilon: f64) -> Result<Self> {
        let mut rows = vec![Vec::new(); n];
        for (p, q, w) in edges {
            if p >= n || q >= n || p == q {
                return Err(Error::Validation(format!("invalid edge ({p}, {q})")));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::Validation(format!("edge ({p}, {q}) has weight {w} outside (0, 1]")));
            }
            rows[p].push((q, w));
            rows[q].push((p, w));
        }
        for row in &mut rows {
            row.sort_by_key(|&(q, _)| q);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Validation("duplicate edge".into()));
            }
        }
        Ok(SimilarityGraph { n, rows, epsilon })
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.rows[r]
    }

    pub fn row_dense(&self, r: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        for &(q, w) in &self.rows[r] {
            v[q] = w;
        }
        v
    }

    pub fn weight(&self, p: usize, q: usize) -> f64 {
        self.rows[p]
            .binary_search_by_key(&q, |&(j, _)| j)
            .map(|i| self.rows[p][i].1)
            .unwrap_or(0.0)
    }

    pub fn stored_entries(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn num_edges(&self) -> usize {
        self.stored_entries() / 2
    }

    /// Undirected edges `(p, q, w)` with `p < q`, ordered by `(p, q)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(p, row)| row.iter().filter(move |(q, _)| *q > p).map(move |&(q, w)| (p, q, w)))
    }
}

/// All-pairs thresholded cosine similarity.
///
/// Rows are computed independently (in parallel) by accumulating shared-topic
/// counts through an inverted index, so only pairs with a common topic are
/// visited.
pub fn build_graph(vectors: &[TopicVector], epsilon: f64) -> Result<SimilarityGraph> {
    check_epsilon(epsilon)?;
    let n = vectors.len();
    if let Some(v) = vectors.first() {
        if vectors.iter().any(|w| w.len() != v.len()) {
            return Err(Error::Shape("topic vectors over different vocabularies".into()));
        }
    }
    let dim = vectors.first().map_or(0, |v| v.len());
    let mut postings = vec![Vec::new(); dim];
    for (r, v) in vectors.iter().enumerate() {
        for &t in &v.ones {
            postings[t].push(r);
        }
    }
    let rows = (0..n)
        .into_par_iter()
        .map(|p| {
            let mut common = vec![0usize; n];
            for &t in &vectors[p].ones {
                for &q in &postings[t] {
                    common[q] += 1;
                }
            }
            let na = vectors[p].ones.len();
            common
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c > 0)
                .filter_map(|(q, &c)| {
                    let s = cosine_from_counts(c, na, vectors[q].ones.len());
                    let w = apply_threshold(s, p, q, epsilon);
                    (w > 0.0).then_some((q, w))
                })
                .collect()
        })
        .collect();
    Ok(SimilarityGraph { n, rows, epsilon })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub vertices: usize,
    pub edges: usize,
    /// Edges over the number of vertex pairs.
    pub density: f64,
    pub isolated: usize,
}

pub fn graph_stats(graph: &SimilarityGraph) -> GraphStats {
    let n = graph.num_vertices();
    let edges = graph.num_edges();
    let pairs = n * n.saturating_sub(1) / 2;
    GraphStats {
        vertices: n,
        edges,
        density: if pairs == 0 { 0.0 } else { edges as f64 / pairs as f64 },
        isolated: graph.rows.iter().filter(|r| r.is_empty()).count(),
    }
}

/// Writes `graph.tsv`: one `p_id  q_id  weight` line per undirected edge,
/// `p < q` by index, weights with 6 decimals. Header lines start with `#`.
pub fn write_graph_tsv(graph: &SimilarityGraph, repo_ids: &[String], header: &[(&str, String)], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "# vertices\t{}", graph.num_vertices())?;
        writeln!(w, "# epsilon\t{}", graph.epsilon())?;
        for (k, v) in header {
            writeln!(w, "# {k}\t{v}")?;
        }
        for (p, q, wt) in graph.edges() {
            writeln!(w, "{}\t{}\t{:.6}", repo_ids[p], repo_ids[q], wt)?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Graph read back from `graph.tsv`, with its `# key value` header lines.
#[derive(Debug, Clone)]
pub struct GraphFile {
    pub graph: SimilarityGraph,
    pub header: Vec<(String, String)>,
}

impl GraphFile {
    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Reads `graph.tsv`, resolving ids through `repo_ids` (index order).
pub fn read_graph_tsv(path: &Path, repo_ids: &[String]) -> Result<GraphFile> {
    let index: std::collections::HashMap<&str, usize> =
        repo_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = Vec::new();
    let mut edges = Vec::new();
    let parse_err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if let Some(rest) = line.strip_prefix("# ") {
            let (k, v) = rest.split_once('\t').unwrap_or((rest, ""));
            header.push((k.to_string(), v.to_string()));
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(parse_err(lineno + 1, "expected 3 columns".into()));
        }
        let lookup = |id: &str| {
            index.get(id).copied().ok_or_else(|| parse_err(lineno + 1, format!("unknown repository {id:?}")))
        };
        let w: f64 = cols[2].parse().map_err(|e| parse_err(lineno + 1, format!("bad weight: {e}")))?;
        edges.push((lookup(cols[0])?, lookup(cols[1])?, w));
    }
    let get = |k: &str| header.iter().find(|(hk, _)| hk == k).map(|(_, v)| v.clone());
    let n: usize = get("vertices").and_then(|v| v.parse().ok()).unwrap_or(repo_ids.len());
    if n != repo_ids.len() {
        return Err(Error::Validation(format!(
            "{} has {n} vertices but the corpus has {} repositories",
            path.display(),
            repo_ids.len()
        )));
    }
    let epsilon: f64 = get("epsilon").and_then(|v| v.parse().ok()).unwrap_or(0.0);
    let graph = SimilarityGraph::from_edges(n, edges, epsilon)?;
    Ok(GraphFile { graph, header })
}
