use std::path::{Path, PathBuf};

use attrmine_core::corpus::{DEFAULT_LIMIT, DEFAULT_MAX_DF_RATIO, DEFAULT_MIN_DF};
use attrmine_core::neural::{DEFAULT_LEARNING_RATE, DEFAULT_TAU, DEFAULT_WEIGHT_DECAY};
use attrmine_core::selection::{DEFAULT_BUDGET, DEFAULT_GAMMA, DEFAULT_LAMBDA};
use attrmine_core::topics::{default_alpha, DEFAULT_BETA, DEFAULT_ITERS, DEFAULT_RHO, DEFAULT_TOPICS};
use attrmine_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Pipeline configuration. Every section and key is optional; unknown keys
/// are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub corpus: CorpusConfig,
    pub topics: TopicsConfig,
    pub selection: SelectionConfig,
    pub assoc: AssocConfig,
    pub neural: NeuralConfig,
    pub zeroshot: ZeroshotConfig,
    pub eval: EvalConfig,
    pub synth: SynthConfig,
}

/// External inputs. Unset corpus paths fall back to the bundled toy data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub unseen_articles: Option<PathBuf>,
    pub stop_words: Option<PathBuf>,
    pub features_train: Option<PathBuf>,
    pub features_heldout: Option<PathBuf>,
    pub features_test: Option<PathBuf>,
    pub relevance: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub limit: usize,
    pub min_df: usize,
    pub max_df_ratio: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self { limit: DEFAULT_LIMIT, min_df: DEFAULT_MIN_DF, max_df_ratio: DEFAULT_MAX_DF_RATIO }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicsConfig {
    pub n_topics: usize,
    /// Defaults to 50 / n_topics.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iters: usize,
    pub rho: f64,
    pub seed: u64,
}

impl Default for TopicsConfig {
    fn default() -> Self {
        Self { n_topics: DEFAULT_TOPICS, alpha: None, beta: DEFAULT_BETA, iters: DEFAULT_ITERS, rho: DEFAULT_RHO, seed: 0 }
    }
}

impl TopicsConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or_else(|| default_alpha(self.n_topics))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub budget: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { lambda: DEFAULT_LAMBDA, gamma: DEFAULT_GAMMA, budget: DEFAULT_BUDGET }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Binary,
    Continuous,
}

impl From<Mode> for attrmine_core::AssociationMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Binary => attrmine_core::AssociationMode::Binary,
            Mode::Continuous => attrmine_core::AssociationMode::Continuous,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssocConfig {
    /// Article length limit for unseen classes; defaults to `corpus.limit`.
    pub article_limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub hidden: Vec<usize>,
    pub extra_hidden: usize,
    pub warm_start: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub calibrate_beta1: bool,
    pub calibrate_beta2: bool,
    pub tau: f64,
    pub seed: u64,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        Self {
            learning_rate: DEFAULT_LEARNING_RATE,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            batch_size: 32,
            epochs: 50,
            hidden: vec![64],
            extra_hidden: 64,
            warm_start: true,
            beta1: 1.0,
            beta2: 1.0,
            calibrate_beta1: true,
            calibrate_beta2: true,
            tau: DEFAULT_TAU,
            seed: 0,
        }
    }
}

impl NeuralConfig {
    pub fn train_config(&self) -> attrmine_core::TrainConfig {
        attrmine_core::TrainConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            epsilon: 1e-8,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Normalizer {
    Reference,
    Batch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Candidates {
    Seen,
    Unseen,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroshotConfig {
    pub mode: Mode,
    pub normalizer: Normalizer,
    pub top_k: usize,
    pub candidates: Candidates,
    pub sweep_grid: Vec<usize>,
}

impl Default for ZeroshotConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Binary,
            normalizer: Normalizer::Reference,
            top_k: 5,
            candidates: Candidates::Unseen,
            sweep_grid: (1..=10).map(|i| i * 100).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub ndcg_k: usize,
    pub accuracy_k: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { ndcg_k: 5, accuracy_k: vec![1, 5] }
    }
}

/// Synthetic image features drawn from class association signatures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_features: usize,
    pub noise: f64,
    pub train_per_class: usize,
    pub heldout_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { n_features: 32, noise: 0.3, train_per_class: 30, heldout_per_class: 10, test_per_class: 20, seed: 0 }
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidArgument(msg)
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = toml::from_str(&text).map_err(|e| invalid(format!("{}: {}", path.display(), e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replaces every per-step seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.topics.seed = seed;
        self.neural.seed = seed;
        self.synth.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(invalid(msg.to_string())) };
        check(self.corpus.limit >= 1, "corpus.limit must be >= 1")?;
        check(self.corpus.min_df >= 1, "corpus.min_df must be >= 1")?;
        check(self.corpus.max_df_ratio > 0.0 && self.corpus.max_df_ratio <= 1.0, "corpus.max_df_ratio must lie in (0, 1]")?;
        check(self.topics.n_topics >= 2, "topics.n_topics must be >= 2")?;
        check(self.topics.alpha() > 0.0, "topics.alpha must be positive")?;
        check(self.topics.beta > 0.0, "topics.beta must be positive")?;
        check(self.topics.iters >= 1, "topics.iters must be >= 1")?;
        check(self.topics.rho > 0.0 && self.topics.rho < 1.0, "topics.rho must lie in (0, 1)")?;
        check(self.selection.lambda >= 0.0, "selection.lambda must be >= 0")?;
        check(self.selection.gamma >= 0.0, "selection.gamma must be >= 0")?;
        check(self.selection.budget > 0.0, "selection.budget must be positive")?;
        check(self.assoc.article_limit != Some(0), "assoc.article_limit must be >= 1")?;
        check(!self.neural.hidden.contains(&0), "neural.hidden widths must be positive")?;
        check(self.neural.extra_hidden >= 1, "neural.extra_hidden must be >= 1")?;
        check(self.neural.beta1 >= 0.0 && self.neural.beta2 >= 0.0, "neural.beta1/beta2 must be >= 0")?;
        check(!self.neural.tau.is_nan(), "neural.tau must be a number")?;
        self.neural.train_config().validate()?;
        check(self.zeroshot.top_k >= 1, "zeroshot.top_k must be >= 1")?;
        check(!self.zeroshot.sweep_grid.contains(&0), "zeroshot.sweep_grid lengths must be >= 1")?;
        check(self.eval.ndcg_k >= 1, "eval.ndcg_k must be >= 1")?;
        check(!self.eval.accuracy_k.is_empty() && !self.eval.accuracy_k.contains(&0), "eval.accuracy_k must list values >= 1")?;
        check(self.synth.n_features >= 1, "synth.n_features must be >= 1")?;
        check(self.synth.noise >= 0.0, "synth.noise must be >= 0")?;
        check(
            self.synth.train_per_class >= 1 && self.synth.heldout_per_class >= 1 && self.synth.test_per_class >= 1,
            "synth sample counts must be >= 1",
        )?;
        Ok(())
    }
}
