//! Runs the `attrmine` binary against the bundled toy data.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const TOY_CONFIG: &str = r#"
[topics]
n_topics = 6
iters = 100

[selection]
budget = 40.0

[neural]
hidden = [24]
extra_hidden = 24
epochs = 20
learning_rate = 0.01

[synth]
train_per_class = 12
heldout_per_class = 6
test_per_class = 10

[eval]
ndcg_k = 3
"#;

pub const PIPELINE: &[&[&str]] = &[
    &["ingest"],
    &["embed"],
    &["lda"],
    &["rank-topics"],
    &["select"],
    &["init-assoc"],
    &["synth-features"],
    &["train-joint"],
    &["threshold"],
    &["train-attr"],
    &["predict"],
    &["zsl"],
    &["eval-zsl"],
    &["eval-ndcg"],
    &["eval-saliency"],
    &["sweep-length", "--grid", "10,50,100"],
];

pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().expect("tempdir");
        std::fs::write(dir.path().join("config.toml"), config).expect("write config");
        Self { dir }
    }

    pub fn toy() -> Self {
        Self::new(TOY_CONFIG)
    }

    pub fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    pub fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_attrmine"))
            .current_dir(self.dir.path())
            .arg("--config")
            .arg("config.toml")
            .args(args)
            .env("RUST_LOG", "error")
            .output()
            .expect("spawn attrmine")
    }

    pub fn run_ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed with {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
        out
    }

    pub fn run_pipeline(&self) {
        for step in PIPELINE {
            self.run_ok(step);
        }
    }
}

/// Relative path → bytes for every file below `root`.
pub fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).expect("read_dir") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).expect("prefix").to_path_buf();
                out.push((rel, std::fs::read(&path).expect("read")));
            }
        }
    }
    out.sort();
    out
}
