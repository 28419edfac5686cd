use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Candidates, Mode, Normalizer, PipelineConfig};

#[derive(Debug, Parser)]
#[command(name = "attrmine", version, about = "Attribute vocabulary discovery and zero-shot classification pipeline")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every per-step seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Preprocess the raw corpus into documents.jsonl.
    Ingest(IngestArgs),
    /// Build dictionary.csv and the tf·idf embedding.csv.
    Embed(EmbedArgs),
    /// Fit the topic model into topics/.
    Lda(LdaArgs),
    /// Score topic significance into topic_ranking.csv.
    RankTopics(RankArgs),
    /// Select the attribute vocabulary into selection.csv.
    Select(SelectArgs),
    /// Build the signed and continuous prior associations.
    InitAssoc,
    /// Draw synthetic image features from the class associations.
    SynthFeatures(SynthArgs),
    /// Train the joint class and association model into joint.ckpt.
    TrainJoint(TrainJointArgs),
    /// Threshold the learned associations into assoc_thresholded.csv.
    Threshold(ThresholdArgs),
    /// Train the attribute predictor into attr.ckpt.
    TrainAttr(TrainAttrArgs),
    /// Write attribute scores (and AP/AUC when labels are known) for a feature split.
    Predict(PredictArgs),
    /// Zero-shot classification of the test features into predictions.csv.
    Zsl(ZslArgs),
    /// nDCG of the class embedding against graded class relevance.
    EvalNdcg(NdcgArgs),
    /// Relevance, junk and saliency of the selected vocabulary.
    EvalSaliency(SaliencyArgs),
    /// Top-k accuracy of predictions.csv.
    EvalZsl,
    /// Zero-shot accuracy as a function of unseen article length.
    SweepLength(SweepArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Tokens kept per document after stop-word removal.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub min_df: Option<usize>,
    #[arg(long)]
    pub max_df_ratio: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LdaArgs {
    #[arg(long)]
    pub topics: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub rho: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n_features: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainJointArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Fixed attribute-loss weight; disables its calibration.
    #[arg(long)]
    pub beta1: Option<f64>,
    /// Fixed prior weight; disables its calibration.
    #[arg(long)]
    pub beta2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainAttrArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Heldout,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Heldout => "heldout",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_enum, default_value = "heldout")]
    pub split: Split,
}

#[derive(Debug, Args, Default)]
pub struct ZslArgs {
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, value_enum)]
    pub normalizer: Option<Normalizer>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long, value_enum)]
    pub candidates: Option<Candidates>,
    /// Tokens kept per unseen-class article.
    #[arg(long)]
    pub article_limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct NdcgArgs {
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SaliencyArgs {
    #[arg(long)]
    pub annotations: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated article lengths.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    #[command(flatten)]
    pub zsl: ZslArgs,
}

impl Command {
    /// Folds the subcommand flags into the config.
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        match self {
            Command::Ingest(a) => {
                if a.corpus.is_some() {
                    cfg.paths.corpus = a.corpus.clone();
                }
                set(&mut cfg.corpus.limit, &a.limit);
            }
            Command::Embed(a) => {
                set(&mut cfg.corpus.min_df, &a.min_df);
                set(&mut cfg.corpus.max_df_ratio, &a.max_df_ratio);
            }
            Command::Lda(a) => {
                set(&mut cfg.topics.n_topics, &a.topics);
                if a.alpha.is_some() {
                    cfg.topics.alpha = a.alpha;
                }
                set(&mut cfg.topics.beta, &a.beta);
                set(&mut cfg.topics.iters, &a.iters);
            }
            Command::RankTopics(a) => set(&mut cfg.topics.rho, &a.rho),
            Command::Select(a) => {
                set(&mut cfg.selection.lambda, &a.lambda);
                set(&mut cfg.selection.gamma, &a.gamma);
                set(&mut cfg.selection.budget, &a.budget);
                set(&mut cfg.topics.rho, &a.rho);
            }
            Command::SynthFeatures(a) => {
                set(&mut cfg.synth.n_features, &a.n_features);
                set(&mut cfg.synth.noise, &a.noise);
            }
            Command::TrainJoint(a) => {
                set(&mut cfg.neural.epochs, &a.epochs);
                set(&mut cfg.neural.learning_rate, &a.learning_rate);
                if let Some(b) = a.beta1 {
                    cfg.neural.beta1 = b;
                    cfg.neural.calibrate_beta1 = false;
                }
                if let Some(b) = a.beta2 {
                    cfg.neural.beta2 = b;
                    cfg.neural.calibrate_beta2 = false;
                }
            }
            Command::Threshold(a) => set(&mut cfg.neural.tau, &a.tau),
            Command::TrainAttr(a) => {
                set(&mut cfg.neural.epochs, &a.epochs);
                set(&mut cfg.neural.learning_rate, &a.learning_rate);
            }
            Command::Zsl(a) => a.apply(cfg),
            Command::SweepLength(a) => {
                a.zsl.apply(cfg);
                set(&mut cfg.zeroshot.sweep_grid, &a.grid);
            }
            Command::EvalNdcg(a) => set(&mut cfg.eval.ndcg_k, &a.k),
            Command::EvalSaliency(a) => {
                if a.annotations.is_some() {
                    cfg.paths.annotations = a.annotations.clone();
                }
            }
            Command::InitAssoc | Command::Predict(_) | Command::EvalZsl => {}
        }
    }
}

impl ZslArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(m) = self.mode {
            cfg.zeroshot.mode = m;
        }
        if let Some(n) = self.normalizer {
            cfg.zeroshot.normalizer = n;
        }
        if let Some(k) = self.top_k {
            cfg.zeroshot.top_k = k;
        }
        if let Some(c) = self.candidates {
            cfg.zeroshot.candidates = c;
        }
        if self.article_limit.is_some() {
            cfg.assoc.article_limit = self.article_limit;
        }
    }
}
