//! Step context: locates inputs, verifies upstream artifacts and writes
//! outputs with their provenance sidecars.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use attrmine_core::corpus::{read_raw_jsonl, RawDocument};
use attrmine_core::neural::FeatureSet;
use attrmine_core::{Error, Result, StopWords};

use crate::cli::Split;
use crate::config::PipelineConfig;
use crate::provenance::{self, Provenance};

pub const TOY_SEEN: &str = include_str!("../data/toy_seen.jsonl");
pub const TOY_UNSEEN: &str = include_str!("../data/toy_unseen.jsonl");
pub const TOY_RELEVANCE: &str = include_str!("../data/toy_relevance.csv");
pub const TOY_ANNOTATIONS: &str = include_str!("../data/toy_annotations.csv");

pub struct Pipeline {
    pub cfg: PipelineConfig,
    pub out: PathBuf,
}

/// One run of one subcommand.
pub struct Step<'a> {
    pub cfg: &'a PipelineConfig,
    out: &'a Path,
    name: &'static str,
    seed: Option<u64>,
    args: BTreeMap<String, String>,
    inputs: BTreeMap<String, String>,
}

impl Pipeline {
    pub fn step(&self, name: &'static str, seed: Option<u64>) -> Step<'_> {
        Step { cfg: &self.cfg, out: &self.out, name, seed, args: BTreeMap::new(), inputs: BTreeMap::new() }
    }
}

impl Step<'_> {
    pub fn arg(&mut self, key: &str, value: impl ToString) {
        self.args.insert(key.to_string(), value.to_string());
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// An artifact of an earlier step; its checksum must match its sidecar.
    pub fn upstream(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.path(name);
        let digest = provenance::verify(&path)?;
        self.inputs.insert(name.to_string(), digest);
        Ok(path)
    }

    pub fn external(&mut self, path: &Path) -> Result<PathBuf> {
        if !path.exists() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{} not found", path.display()),
            )));
        }
        self.inputs.insert(path.display().to_string(), provenance::sha256_path(path)?);
        Ok(path.to_path_buf())
    }

    pub fn bundled(&mut self, name: &str, text: &'static str) -> &'static str {
        self.inputs.insert(format!("bundled:{name}"), provenance::sha256_bytes(text.as_bytes()));
        text
    }

    pub fn upstream_text(&mut self, name: &str) -> Result<String> {
        let path = self.upstream(name)?;
        Ok(std::fs::read_to_string(path)?)
    }

    pub fn using_toy_corpus(&self) -> bool {
        self.cfg.paths.corpus.is_none()
    }

    pub fn seen_corpus(&mut self) -> Result<Vec<RawDocument>> {
        match self.cfg.paths.corpus.clone() {
            Some(p) => attrmine_core::corpus::load_raw_corpus(&self.external(&p)?),
            None => read_raw_jsonl(self.bundled("toy_seen.jsonl", TOY_SEEN).as_bytes(), "toy_seen.jsonl"),
        }
    }

    /// Unseen-class articles as (class_id, text).
    pub fn unseen_articles(&mut self) -> Result<Vec<(String, String)>> {
        let docs = match self.cfg.paths.unseen_articles.clone() {
            Some(p) => attrmine_core::corpus::load_raw_corpus(&self.external(&p)?)?,
            None if self.using_toy_corpus() => {
                read_raw_jsonl(self.bundled("toy_unseen.jsonl", TOY_UNSEEN).as_bytes(), "toy_unseen.jsonl")?
            }
            None => return Err(missing("paths.unseen_articles")),
        };
        Ok(docs.into_iter().map(|d| (d.class_id, d.text)).collect())
    }

    pub fn stop_words(&mut self) -> Result<StopWords> {
        match self.cfg.paths.stop_words.clone() {
            Some(p) => StopWords::from_file(&self.external(&p)?),
            None => Ok(StopWords::english()),
        }
    }

    /// External text input with a bundled toy fallback.
    pub fn text_input(&mut self, configured: Option<&PathBuf>, key: &str, toy: (&str, &'static str)) -> Result<String> {
        match configured {
            Some(p) => Ok(std::fs::read_to_string(self.external(p)?)?),
            None if self.using_toy_corpus() => Ok(self.bundled(toy.0, toy.1).to_string()),
            None => Err(missing(key)),
        }
    }

    pub fn features(&mut self, split: Split) -> Result<FeatureSet> {
        let configured = match split {
            Split::Train => &self.cfg.paths.features_train,
            Split::Heldout => &self.cfg.paths.features_heldout,
            Split::Test => &self.cfg.paths.features_test,
        };
        match configured.clone() {
            Some(p) => FeatureSet::load(&self.external(&p)?),
            None => FeatureSet::load(&self.upstream(&features_name(split))?),
        }
    }

    fn provenance(&self, artifact: &str, sha256: String) -> Provenance {
        Provenance {
            step: self.name.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            artifact: artifact.to_string(),
            sha256,
            seed: self.seed,
            args: self.args.clone(),
            inputs: self.inputs.clone(),
            config: self.cfg.clone(),
        }
    }

    /// Writes `bytes` to `name` in the output directory plus its sidecar.
    pub fn emit(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        std::fs::create_dir_all(self.out)?;
        let path = self.path(name);
        std::fs::write(&path, bytes)?;
        provenance::write_sidecar(&path, &self.provenance(name, provenance::sha256_bytes(bytes)))?;
        log::info!("{}: wrote {}", self.name, path.display());
        Ok(path)
    }

    /// Serializes through `write` and emits the result.
    pub fn emit_with(&self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<PathBuf> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.emit(name, &buf)
    }

    /// Directory artifact, replaced as a whole.
    pub fn emit_dir(&self, name: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<PathBuf> {
        std::fs::create_dir_all(self.out)?;
        let path = self.path(name);
        if path.exists() {
            std::fs::remove_dir_all(&path)?;
        }
        std::fs::create_dir_all(&path)?;
        write(&path)?;
        let digest = provenance::sha256_path(&path)?;
        provenance::write_sidecar(&path, &self.provenance(name, digest))?;
        log::info!("{}: wrote {}", self.name, path.display());
        Ok(path)
    }
}

pub fn features_name(split: Split) -> String {
    format!("features_{}.csv", split.name())
}

fn missing(key: &str) -> Error {
    Error::InvalidArgument(format!("{key} must be set when a custom corpus is used"))
}
