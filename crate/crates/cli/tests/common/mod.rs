#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seqrec_core::corpus::write_corpus;
use seqrec_core::synthetic::{transition_corpus, TransitionSpec};

pub const CONFIG: &str = r#"
seed = 5
out = "@OUT@"

[corpus]
dir = "@DATA@"

[filter]
min_user_repos = 3
min_repo_users = 1

[sdne]
hidden = [16]
dim = 8
learning_rate = 0.5
epochs = 150
batch_size = 10

[gru]
hidden = 16
learning_rate = 2.0
epochs = 6
batch_size = 32
negatives = 5
"#;

pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    /// Synthetic corpus in `data/`, the test config in `run.toml`, artifacts
    /// under `out/`.
    pub fn new() -> Self {
        Self::with_config(CONFIG)
    }

    pub fn with_config(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let tc = transition_corpus(&TransitionSpec { users: 40, repos: 20, length: 20, ..Default::default() });
        write_corpus(&tc.corpus, &dir.path().join("data")).unwrap();
        let text = config
            .replace("@OUT@", dir.path().join("out").to_str().unwrap())
            .replace("@DATA@", dir.path().join("data").to_str().unwrap());
        std::fs::write(dir.path().join("run.toml"), text).unwrap();
        Workspace { dir }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn out(&self) -> PathBuf {
        self.path().join("out")
    }

    pub fn config(&self) -> PathBuf {
        self.path().join("run.toml")
    }

    pub fn run(&self, args: &[&str]) -> Output {
        let cfg = self.config();
        let mut full = vec!["--config", cfg.to_str().unwrap()];
        full.extend_from_slice(args);
        seqrec(&full)
    }

    pub fn ok(&self, args: &[&str]) -> String {
        let o = self.run(args);
        assert_eq!(o.status.code(), Some(0), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    }

    pub fn pipeline(&self, extra: &[&str]) {
        for cmd in ["ingest", "build-graph", "train-sdne", "train-rec", "evaluate"] {
            let mut args = vec![cmd];
            args.extend_from_slice(extra);
            self.ok(&args);
        }
    }
}

pub fn seqrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqrec")).args(args).output().unwrap()
}

pub fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}
