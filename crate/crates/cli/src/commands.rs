//! One function per subcommand. Artifacts live under the level directory;
//! `metrics.json` collects every level under `out`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::info;
use serde::{Deserialize, Serialize};

use seqrec_core::artifact::{check_hash, config_hash, content_hash, derive_seed, read_embeddings, write_embeddings};
use seqrec_core::checkpoint::{gru_checkpoint, gru_from_checkpoint, sdne_checkpoint, Checkpoint};
use seqrec_core::corpus::{filter_corpus, load_corpus, write_corpus, Corpus, CorpusPaths};
use seqrec_core::eval::{
    chronological_split, evaluate, sparsify, ExcludeSeen, ItemKnnRecommender, Metrics, MetricsReport,
    PopRecommender, Recommender, SparsityLevel, Split, SplitPart,
};
use seqrec_core::graph::{graph_stats, read_graph_tsv, write_graph_tsv};
use seqrec_core::gru::{self, recommend_top_n, FeatureTable, GruModel, GruRecommender, TrainConfig};
use seqrec_core::pipeline::{repository_features, topic_graph};
use seqrec_core::sdne::{self, SdneConfig};

use crate::config::RunConfig;
use crate::Invalid;

const MANIFEST: &str = "manifest.json";
const GRAPH: &str = "graph.tsv";
const EMBEDDINGS: &str = "embeddings.tsv";
const SDNE_CKPT: &str = "sdne.ckpt";
const GRU_CKPT: &str = "gru.ckpt";
const SPLITS: &str = "splits.tsv";
const TRAIN_LOG: &str = "train_log.tsv";
const METRICS: &str = "metrics.json";

/// Summary written next to every materialized corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub users: usize,
    pub repos: usize,
    pub interactions: usize,
    pub density: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

impl Manifest {
    fn of(corpus: &Corpus, config_hash: String) -> Self {
        Manifest {
            config_hash,
            users: corpus.num_users(),
            repos: corpus.num_repos(),
            interactions: corpus.num_interactions(),
            density: corpus.density(),
            extra: BTreeMap::new(),
        }
    }

    fn print(&self) {
        println!("users\t{}", self.users);
        println!("repos\t{}", self.repos);
        println!("interactions\t{}", self.interactions);
        println!("sparsity\t{:.3}%", 100.0 * self.density);
    }
}

fn require(path: &Path, producer: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Invalid(format!("missing {}; run `seqrec {producer}` first", path.display())).into())
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| Invalid(format!("{}: {e}", path.display())).into())
}

/// Hashes and seeds of every stage, derived from the config alone plus the
/// hash recorded for the selected corpus.
struct Chain {
    corpus: String,
    graph: String,
    sdne_config: SdneConfig,
    sdne: String,
    gru_config: TrainConfig,
    rec: String,
}

impl Chain {
    fn new(cfg: &RunConfig, manifest: &Manifest) -> Self {
        let corpus = manifest.config_hash.clone();
        let graph = config_hash(&corpus, "build-graph", &cfg.graph);
        let sdne_config = cfg.sdne.config(manifest.repos, derive_seed(cfg.seed, "train-sdne"));
        let sdne = config_hash(&graph, "train-sdne", &sdne_config);
        let gru_config = cfg.gru.config(derive_seed(cfg.seed, "train-rec"));
        let rec = config_hash(&sdne, "train-rec", &(&gru_config, &cfg.split, &cfg.eval));
        Chain { corpus, graph, sdne_config, sdne, gru_config, rec }
    }
}

/// Corpus of the selected level with its manifest.
struct Stage {
    dir: PathBuf,
    corpus: Corpus,
    manifest: Manifest,
    chain: Chain,
}

impl Stage {
    fn open(cfg: &RunConfig) -> Result<Self> {
        let dir = cfg.level_dir();
        let corpus_dir = dir.join("corpus");
        let producer = match cfg.sparsity.level {
            SparsityLevel::None => "ingest",
            _ => "sparsify",
        };
        require(&corpus_dir.join(MANIFEST), producer)?;
        let manifest: Manifest = read_json(&corpus_dir.join(MANIFEST))?;
        let corpus = load_corpus(&CorpusPaths::in_dir(&corpus_dir))?;
        if corpus.num_repos() != manifest.repos || corpus.num_interactions() != manifest.interactions {
            return Err(Invalid(format!("{} does not match the corpus beside it", corpus_dir.join(MANIFEST).display())).into());
        }
        let chain = Chain::new(cfg, &manifest);
        Ok(Stage { dir, corpus, manifest, chain })
    }

    fn repo_ids(&self) -> Vec<String> {
        self.corpus.repos().iter().map(|r| r.id.clone()).collect()
    }

    fn embeddings(&self) -> Result<ndarray::Array2<f64>> {
        let path = self.dir.join(EMBEDDINGS);
        require(&path, "train-sdne")?;
        let file = read_embeddings(&path, &self.repo_ids())?;
        check_hash(EMBEDDINGS, &self.chain.sdne, file.header_value("config_hash"))?;
        Ok(file.embeddings)
    }

    fn split(&self, cfg: &RunConfig) -> Result<Split> {
        Ok(chronological_split(&self.corpus, &cfg.split.spec())?)
    }

    fn features(&self, split: &Split) -> Result<FeatureTable> {
        let emb = self.embeddings()?;
        Ok(repository_features(&self.corpus, &emb, split.repos_in(&self.corpus, SplitPart::Train))?)
    }

    fn gru_model(&self) -> Result<GruModel> {
        let path = self.dir.join(GRU_CKPT);
        require(&path, "train-rec")?;
        let ckpt = Checkpoint::load(&path)?;
        check_hash(GRU_CKPT, &self.chain.rec, ckpt.meta_value("config_hash"))?;
        Ok(gru_from_checkpoint(&ckpt)?)
    }
}

pub fn ingest(cfg: &RunConfig) -> Result<()> {
    let paths = cfg.corpus.paths();
    for p in [&paths.repos, &paths.users, &paths.interactions] {
        if !p.is_file() {
            return Err(Invalid(format!("corpus file {} does not exist", p.display())).into());
        }
    }
    let raw = load_corpus(&paths)?;
    let corpus = filter_corpus(&raw, &cfg.filter.options())?;
    let source = content_hash(&[&paths.repos, &paths.users, &paths.interactions])?;
    let mut manifest = Manifest::of(&corpus, config_hash(&source, "ingest", &cfg.filter));
    manifest.extra.insert("raw_interactions".into(), raw.num_interactions().to_string());
    let dir = cfg.out.join("corpus");
    write_corpus(&corpus, &dir)?;
    write_json(&dir.join(MANIFEST), &manifest)?;
    info!("wrote {}", dir.display());
    manifest.print();
    Ok(())
}

pub fn sparsify_cmd(cfg: &RunConfig) -> Result<()> {
    if cfg.sparsity.level == SparsityLevel::None {
        println!("level none leaves the corpus unchanged");
        return Ok(());
    }
    let base = RunConfig { sparsity: Default::default(), ..cfg.clone() };
    let stage = Stage::open(&base)?;
    let spec = cfg.sparsity.spec(derive_seed(cfg.seed, "sparsify"));
    let out = sparsify(&stage.corpus, &spec)?;
    let mut manifest = Manifest::of(&out.corpus, config_hash(&stage.chain.corpus, "sparsify", &spec));
    manifest.extra.insert("level".into(), spec.level.to_string());
    manifest.extra.insert("target".into(), out.target.to_string());
    manifest.extra.insert("deleted".into(), out.deleted.to_string());
    let dir = cfg.level_dir().join("corpus");
    write_corpus(&out.corpus, &dir)?;
    write_json(&dir.join(MANIFEST), &manifest)?;
    println!("level\t{}", spec.level);
    println!("target\t{}", out.target);
    println!("deleted\t{}", out.deleted);
    println!("density_before\t{:.6}", out.density_before);
    println!("density_after\t{:.6}", out.density_after);
    Ok(())
}

pub fn build_graph(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::open(cfg)?;
    let graph = topic_graph(&stage.corpus, cfg.graph.epsilon)?;
    let path = stage.dir.join(GRAPH);
    write_graph_tsv(&graph, &stage.repo_ids(), &[("config_hash", stage.chain.graph.clone())], &path)?;
    let s = graph_stats(&graph);
    println!("vertices\t{}", s.vertices);
    println!("edges\t{}", s.edges);
    println!("density\t{:.6}", s.density);
    println!("isolated\t{}", s.isolated);
    Ok(())
}

pub fn train_sdne(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::open(cfg)?;
    let path = stage.dir.join(GRAPH);
    require(&path, "build-graph")?;
    let ids = stage.repo_ids();
    let file = read_graph_tsv(&path, &ids)?;
    check_hash(GRAPH, &stage.chain.graph, file.header_value("config_hash"))?;
    let sc = &stage.chain.sdne_config;
    sc.validate(file.graph.num_vertices())?;
    let (model, emb, log) = sdne::train(&file.graph, sc)?;
    let hash = stage.chain.sdne.clone();
    write_embeddings(&stage.dir.join(EMBEDDINGS), &ids, &emb, &[("config_hash", hash.clone())])?;
    sdne_checkpoint(&model).with_meta("config_hash", &hash).save(&stage.dir.join(SDNE_CKPT))?;
    println!("dim\t{}", emb.ncols());
    if let Some(l) = log.epoch_losses.last() {
        println!("final_loss\t{l:.6}");
    }
    Ok(())
}

pub fn train_rec(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::open(cfg)?;
    let split = stage.split(cfg)?;
    split.write_tsv(&stage.corpus, &stage.dir.join(SPLITS))?;
    let features = stage.features(&split)?;
    let tc = &stage.chain.gru_config;
    let train = split.records(&stage.corpus, SplitPart::Train, tc.window, tc.window_mode);
    if train.is_empty() {
        return Err(Invalid("no training records; shorten the window or use a larger corpus".into()).into());
    }
    let valid = split.records(&stage.corpus, SplitPart::Valid, tc.window, cfg.eval.window_mode);
    let mut per_epoch: Vec<Option<MetricsReport>> = Vec::new();
    let (model, log) = gru::train(&features, &train, tc, |epoch, m| {
        let report = if cfg.eval.validate_each_epoch && !valid.is_empty() {
            let rec = GruRecommender::new(m, &features)?;
            let r = evaluate(&rec, &valid, &cfg.eval.cutoffs, cfg.eval.averaging)?;
            info!("epoch {epoch}: validation {:?}", r.metrics);
            Some(r)
        } else {
            None
        };
        per_epoch.push(report);
        Ok(())
    })?;
    gru_checkpoint(&model).with_meta("config_hash", &stage.chain.rec).save(&stage.dir.join(GRU_CKPT))?;
    write_train_log(&stage.dir.join(TRAIN_LOG), &cfg.eval.cutoffs, &log.epoch_losses, &per_epoch)?;
    println!("train_records\t{}", train.len());
    println!("valid_records\t{}", valid.len());
    if let Some(l) = log.epoch_losses.last() {
        println!("final_loss\t{l:.6}");
    }
    Ok(())
}

fn write_train_log(path: &Path, cutoffs: &[usize], losses: &[f64], reports: &[Option<MetricsReport>]) -> Result<()> {
    let mut out = String::from("epoch\tloss");
    for n in cutoffs {
        out += &format!("\thr@{n}\tmrr@{n}\tndcg@{n}");
    }
    out.push('\n');
    for (e, (loss, rep)) in losses.iter().zip(reports).enumerate() {
        out += &format!("{e}\t{loss:.6}");
        for n in cutoffs {
            match rep.as_ref().and_then(|r| r.at(*n)) {
                Some(m) => out += &format!("\t{:.3}\t{:.3}\t{:.3}", m.hr, m.mrr, m.ndcg),
                None => out += "\t\t\t",
            }
        }
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

type Table = BTreeMap<usize, Metrics>;

/// Contents of `metrics.json`: level, then cut-off, then the three metrics
/// in percent.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct MetricsFile {
    pub levels: BTreeMap<String, Table>,
    pub baselines: BTreeMap<String, BTreeMap<String, Table>>,
    pub metadata: BTreeMap<String, BTreeMap<String, String>>,
}

fn rounded(report: &MetricsReport) -> Table {
    report.metrics.iter().map(|(n, m)| (*n, m.rounded())).collect()
}

fn run_eval<R: Recommender>(rec: R, records: &[seqrec_core::corpus::TrainingRecord], cfg: &RunConfig) -> Result<MetricsReport> {
    let r = if cfg.eval.exclude_seen {
        evaluate(&ExcludeSeen(rec), records, &cfg.eval.cutoffs, cfg.eval.averaging)?
    } else {
        evaluate(&rec, records, &cfg.eval.cutoffs, cfg.eval.averaging)?
    };
    Ok(r)
}

pub fn evaluate_cmd(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::open(cfg)?;
    let split = stage.split(cfg)?;
    let features = stage.features(&split)?;
    let model = stage.gru_model()?;
    let test = split.records(&stage.corpus, SplitPart::Test, cfg.gru.window, cfg.eval.window_mode);
    if test.is_empty() {
        return Err(Invalid("no test records".into()).into());
    }
    let train_part = split.part_corpus(&stage.corpus, SplitPart::Train);
    let gru = run_eval(GruRecommender::new(&model, &features)?, &test, cfg)?;
    let pop = run_eval(PopRecommender::fit(&train_part), &test, cfg)?;
    let knn = run_eval(ItemKnnRecommender::fit(&train_part), &test, cfg)?;

    let path = cfg.out.join(METRICS);
    let mut file: MetricsFile = if path.exists() { read_json(&path)? } else { MetricsFile::default() };
    let level = cfg.sparsity.level.to_string();
    file.levels.insert(level.clone(), rounded(&gru));
    file.baselines.entry("pop".into()).or_default().insert(level.clone(), rounded(&pop));
    file.baselines.entry("itemknn".into()).or_default().insert(level.clone(), rounded(&knn));
    let meta = BTreeMap::from([
        ("config_hash".to_string(), config_hash(&stage.chain.rec, "evaluate", &cfg.eval)),
        ("model_hash".to_string(), stage.chain.rec.clone()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("records".to_string(), gru.records.to_string()),
        ("averaging".to_string(), format!("{:?}", cfg.eval.averaging).to_lowercase()),
        ("interactions".to_string(), stage.manifest.interactions.to_string()),
    ]);
    file.metadata.insert(level.clone(), meta);
    write_json(&path, &file)?;

    println!("model\tN\thr\tmrr\tndcg");
    for (name, rep) in [("gru", &gru), ("pop", &pop), ("itemknn", &knn)] {
        for (n, m) in rounded(rep) {
            println!("{name}\t{n}\t{:.3}\t{:.3}\t{:.3}", m.hr, m.mrr, m.ndcg);
        }
    }
    Ok(())
}

pub fn recommend(cfg: &RunConfig, user_id: &str, top_n: usize) -> Result<()> {
    if top_n == 0 {
        return Err(Invalid("--top-n must be at least 1".into()).into());
    }
    let stage = Stage::open(cfg)?;
    let u = stage
        .corpus
        .user_idx(user_id)
        .ok_or_else(|| Invalid(format!("unknown user {user_id:?}")))?;
    let split = stage.split(cfg)?;
    let features = stage.features(&split)?;
    let model = stage.gru_model()?;
    let seq = stage.corpus.users()[u].sequence();
    let window = &seq[seq.len().saturating_sub(cfg.gru.window)..];
    let top = recommend_top_n(&model, &features, window, top_n)?;
    for (rank, (r, score)) in top.iter().enumerate() {
        println!("{user_id}\t{}\t{}\t{score:.6}", rank + 1, stage.corpus.repo(*r).id);
    }
    Ok(())
}
