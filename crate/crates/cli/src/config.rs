//! Run configuration: built-in defaults, then the TOML file, then flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use seqrec_core::corpus::{CorpusPaths, FilterOptions, WindowMode};
use seqrec_core::eval::{Averaging, SparsityLevel, SparsitySpec, SplitSpec, DEFAULT_CUTOFFS};
use seqrec_core::gru::TrainConfig;
use seqrec_core::sdne::SdneConfig;

use crate::Invalid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every stage derives its own.
    pub seed: u64,
    /// Output directory for all artifacts.
    pub out: PathBuf,
    pub corpus: CorpusSection,
    pub filter: FilterSection,
    pub graph: GraphSection,
    pub sdne: SdneSection,
    pub gru: GruSection,
    pub split: SplitSection,
    pub sparsity: SparsitySection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("run"),
            corpus: CorpusSection::default(),
            filter: FilterSection::default(),
            graph: GraphSection::default(),
            sdne: SdneSection::default(),
            gru: GruSection::default(),
            split: SplitSection::default(),
            sparsity: SparsitySection::default(),
            eval: EvalSection::default(),
        }
    }
}

/// Input corpus: `dir` holds `repos.jsonl`, `users.jsonl` and
/// `interactions.jsonl` unless a file is given explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub dir: PathBuf,
    pub repos: Option<PathBuf>,
    pub users: Option<PathBuf>,
    pub interactions: Option<PathBuf>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection { dir: PathBuf::from("data"), repos: None, users: None, interactions: None }
    }
}

impl CorpusSection {
    pub fn paths(&self) -> CorpusPaths {
        let base = CorpusPaths::in_dir(&self.dir);
        CorpusPaths {
            repos: self.repos.clone().unwrap_or(base.repos),
            users: self.users.clone().unwrap_or(base.users),
            interactions: self.interactions.clone().unwrap_or(base.interactions),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub min_user_repos: usize,
    pub min_repo_users: usize,
    pub single_pass: bool,
}

impl Default for FilterSection {
    fn default() -> Self {
        let f = FilterOptions::default();
        FilterSection { min_user_repos: f.min_user_repos, min_repo_users: f.min_repo_users, single_pass: f.single_pass }
    }
}

impl FilterSection {
    pub fn options(&self) -> FilterOptions {
        FilterOptions {
            min_user_repos: self.min_user_repos,
            min_repo_users: self.min_repo_users,
            single_pass: self.single_pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub epsilon: f64,
}

impl Default for GraphSection {
    fn default() -> Self {
        GraphSection { epsilon: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdneSection {
    /// Hidden encoder widths between the input and the code.
    pub hidden: Vec<usize>,
    /// Embedding size `d_r`.
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
}

impl Default for SdneSection {
    fn default() -> Self {
        let d = SdneConfig::for_vertices(0);
        SdneSection {
            hidden: d.layer_sizes[1..d.layer_sizes.len() - 1].to_vec(),
            dim: d.embedding_dim(),
            alpha: d.alpha,
            beta: d.beta,
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            batch_size: d.batch_size,
            weight_decay: d.weight_decay,
        }
    }
}

impl SdneSection {
    pub fn config(&self, vertices: usize, seed: u64) -> SdneConfig {
        let mut layer_sizes = vec![vertices];
        layer_sizes.extend(&self.hidden);
        layer_sizes.push(self.dim);
        SdneConfig {
            layer_sizes,
            alpha: self.alpha,
            beta: self.beta,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GruSection {
    pub window: usize,
    pub window_mode: WindowMode,
    pub negatives: usize,
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// User embedding size `d_u`.
    pub hidden: usize,
}

impl Default for GruSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        GruSection {
            window: d.window,
            window_mode: d.window_mode,
            negatives: d.negatives,
            lambda: d.lambda,
            learning_rate: d.learning_rate,
            epochs: d.max_epochs,
            batch_size: d.batch_size,
            hidden: d.hidden,
        }
    }
}

impl GruSection {
    pub fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            window: self.window,
            window_mode: self.window_mode,
            negatives: self.negatives,
            lambda: self.lambda,
            learning_rate: self.learning_rate,
            max_epochs: self.epochs,
            batch_size: self.batch_size,
            hidden: self.hidden,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        let s = SplitSpec::default();
        SplitSection { train: s.train_fraction, valid: s.valid_fraction, test: s.test_fraction }
    }
}

impl SplitSection {
    pub fn spec(&self) -> SplitSpec {
        SplitSpec { train_fraction: self.train, valid_fraction: self.valid, test_fraction: self.test }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparsitySection {
    pub level: SparsityLevel,
    pub min_user_repos: usize,
    pub min_repo_users: usize,
}

impl Default for SparsitySection {
    fn default() -> Self {
        let s = SparsitySpec::default();
        SparsitySection { level: s.level, min_user_repos: s.min_user_repos, min_repo_users: s.min_repo_users }
    }
}

impl SparsitySection {
    pub fn spec(&self, seed: u64) -> SparsitySpec {
        SparsitySpec {
            level: self.level,
            budget: None,
            min_user_repos: self.min_user_repos,
            min_repo_users: self.min_repo_users,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub cutoffs: Vec<usize>,
    /// Window rule for validation and test records.
    pub window_mode: WindowMode,
    pub averaging: Averaging,
    /// Mask repositories already in the window (other than the label).
    pub exclude_seen: bool,
    /// Evaluate on the validation records after every training epoch.
    pub validate_each_epoch: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            cutoffs: DEFAULT_CUTOFFS.to_vec(),
            window_mode: WindowMode::Clamped,
            averaging: Averaging::Micro,
            exclude_seen: false,
            validate_each_epoch: true,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub level: Option<SparsityLevel>,
    pub epsilon: Option<f64>,
    pub window: Option<usize>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, Invalid> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Invalid(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| Invalid(format!("config {}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(o) = &overrides.out {
            cfg.out = o.clone();
        }
        if let Some(l) = overrides.level {
            cfg.sparsity.level = l;
        }
        if let Some(e) = overrides.epsilon {
            cfg.graph.epsilon = e;
        }
        if let Some(w) = overrides.window {
            cfg.gru.window = w;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Invalid> {
        let e = self.graph.epsilon;
        if !(0.0..=1.0).contains(&e) {
            return Err(Invalid(format!("epsilon must lie in [0, 1], got {e}")));
        }
        if self.eval.cutoffs.is_empty() || self.eval.cutoffs.contains(&0) {
            return Err(Invalid("eval.cutoffs must be a non-empty list of positive integers".into()));
        }
        if self.sdne.dim == 0 || self.sdne.hidden.contains(&0) {
            return Err(Invalid("sdne layer sizes must be positive".into()));
        }
        self.gru.config(0).validate().map_err(|e| Invalid(e.to_string()))?;
        self.split.spec().validate().map_err(|e| Invalid(e.to_string()))?;
        Ok(())
    }

    /// Directory holding the corpus and artifacts of the selected sparsity
    /// level; `none` uses `out` itself.
    pub fn level_dir(&self) -> PathBuf {
        match self.sparsity.level {
            SparsityLevel::None => self.out.clone(),
            level => self.out.join("levels").join(level.as_str()),
        }
    }
}
