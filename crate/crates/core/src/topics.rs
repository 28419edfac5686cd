//! LDA by collapsed Gibbs sampling, and topic significance ranking against
//! the two junk-topic prototypes (uniform over words, uniform over
//! documents).

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dictionary, Document};
use crate::error::{Error, Result};
use crate::fmt::exact;
use crate::table::{read_labelled_matrix, write_labelled_matrix};

pub const DEFAULT_TOPICS: usize = 200;
pub const DEFAULT_BETA: f64 = 0.01;
pub const DEFAULT_ITERS: usize = 1000;
pub const DEFAULT_RHO: f64 = 0.10;

pub fn default_alpha(n_topics: usize) -> f64 {
    50.0 / n_topics as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaParams {
    pub n_topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iters: usize,
    pub seed: u64,
}

impl LdaParams {
    pub fn new(n_topics: usize, seed: u64) -> Self {
        Self { n_topics, alpha: default_alpha(n_topics), beta: DEFAULT_BETA, iters: DEFAULT_ITERS, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.n_topics < 2 {
            return Err(Error::InvalidArgument("need at least two topics".into()));
        }
        if self.iters < 1 {
            return Err(Error::InvalidArgument("need at least one Gibbs sweep".into()));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::InvalidArgument("Dirichlet hyperparameters must be positive".into()));
        }
        Ok(())
    }
}

/// A fitted, immutable topic model.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    /// topics × words, p(word | topic).
    pub phi: Array2<f64>,
    /// documents × topics, p(topic | document).
    pub theta: Array2<f64>,
    /// Smoothed corpus token share of each topic.
    pub topic_prior: Vec<f64>,
    pub doc_ids: Vec<String>,
    pub doc_lengths: Vec<usize>,
    pub params: LdaParams,
    pub dictionary_checksum: String,
}

impl TopicModel {
    pub fn n_topics(&self) -> usize {
        self.phi.nrows()
    }

    pub fn n_words(&self) -> usize {
        self.phi.ncols()
    }

    pub fn n_docs(&self) -> usize {
        self.theta.nrows()
    }

    /// Assembles a model from already-normalized parts, checking shapes.
    pub fn from_parts(
        phi: Array2<f64>,
        theta: Array2<f64>,
        topic_prior: Vec<f64>,
        doc_lengths: Vec<usize>,
        params: LdaParams,
    ) -> Result<Self> {
        let k = phi.nrows();
        if theta.ncols() != k || topic_prior.len() != k || doc_lengths.len() != theta.nrows() {
            return Err(Error::Dimension(format!(
                "phi has {k} topics, theta is {}x{}, prior has {}, {} document lengths",
                theta.nrows(),
                theta.ncols(),
                topic_prior.len(),
                doc_lengths.len()
            )));
        }
        if phi.iter().chain(theta.iter()).chain(&topic_prior).any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("topic distributions must be strictly positive".into()));
        }
        let doc_ids = (0..theta.nrows()).map(|d| format!("d{d}")).collect();
        Ok(Self { phi, theta, topic_prior, doc_ids, doc_lengths, params, dictionary_checksum: String::new() })
    }

    /// Writes `phi.csv`, `theta.csv` and `meta.txt` into `dir`.
    pub fn save(&self, dir: &Path, words: &[String]) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let topic_labels: Vec<String> = (0..self.n_topics()).map(|k| k.to_string()).collect();
        write_labelled_matrix(
            std::fs::File::create(dir.join("phi.csv"))?,
            "topic_id",
            &topic_labels,
            words,
            &self.phi,
            exact,
        )?;
        write_labelled_matrix(
            std::fs::File::create(dir.join("theta.csv"))?,
            "document_id",
            &self.doc_ids,
            &topic_labels,
            &self.theta,
            exact,
        )?;
        let mut meta = std::fs::File::create(dir.join("meta.txt"))?;
        self.write_meta(&mut meta)?;
        Ok(())
    }

    fn write_meta<W: Write>(&self, out: &mut W) -> Result<()> {
        let p = &self.params;
        writeln!(out, "n_topics {}", p.n_topics)?;
        writeln!(out, "alpha {}", exact(p.alpha))?;
        writeln!(out, "beta {}", exact(p.beta))?;
        writeln!(out, "iters {}", p.iters)?;
        writeln!(out, "seed {}", p.seed)?;
        writeln!(out, "dictionary_checksum {}", self.dictionary_checksum)?;
        let lens: Vec<String> = self.doc_lengths.iter().map(usize::to_string).collect();
        writeln!(out, "doc_lengths {}", lens.join(" "))?;
        let prior: Vec<String> = self.topic_prior.iter().map(|&v| exact(v)).collect();
        writeln!(out, "topic_prior {}", prior.join(" "))?;
        Ok(())
    }

    /// Loads a model saved by [`TopicModel::save`]; returns it together with
    /// the word labels of `phi.csv`.
    pub fn load(dir: &Path) -> Result<(Self, Vec<String>)> {
        let (_, words, phi) =
            read_labelled_matrix(std::fs::File::open(dir.join("phi.csv"))?, "topic_id")?;
        let (doc_ids, _, theta) =
            read_labelled_matrix(std::fs::File::open(dir.join("theta.csv"))?, "document_id")?;
        let meta = std::fs::read_to_string(dir.join("meta.txt"))?;
        let field = |key: &str| -> Result<&str> {
            meta.lines()
                .find_map(|l| {
                    let (k, v) = l.split_once(' ').unwrap_or((l, ""));
                    (k == key).then_some(v)
                })
                .ok_or_else(|| Error::Format(format!("meta.txt lacks {key}")))
        };
        let num = |key: &str| -> Result<f64> {
            field(key)?.parse().map_err(|_| Error::Format(format!("meta.txt: bad {key}")))
        };
        let int = |key: &str| -> Result<u64> {
            field(key)?.parse().map_err(|_| Error::Format(format!("meta.txt: bad {key}")))
        };
        let params = LdaParams {
            n_topics: int("n_topics")? as usize,
            alpha: num("alpha")?,
            beta: num("beta")?,
            iters: int("iters")? as usize,
            seed: int("seed")?,
        };
        let doc_lengths = field("doc_lengths")?
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| Error::Format("meta.txt: bad doc_lengths".into())))
            .collect::<Result<Vec<usize>>>()?;
        let topic_prior = field("topic_prior")?
            .split_whitespace()
            .map(crate::table::parse_f64)
            .collect::<Result<Vec<f64>>>()?;
        let mut model = Self::from_parts(phi, theta, topic_prior, doc_lengths, params)?;
        if model.n_topics() != model.params.n_topics {
            return Err(Error::Dimension("phi.csv row count differs from n_topics".into()));
        }
        model.doc_ids = doc_ids;
        model.dictionary_checksum = field("dictionary_checksum")?.to_string();
        Ok((model, words))
    }
}

/// Fits LDA with collapsed Gibbs sampling.
///
/// Out-of-dictionary tokens are ignored. Documents left empty keep a uniform
/// topic mixture. The same inputs and seed give bit-identical output.
pub fn fit_lda(docs: &[Document], dict: &Dictionary, params: &LdaParams) -> Result<TopicModel> {
    params.validate()?;
    let k = params.n_topics;
    let n_words = dict.len();
    let corpus: Vec<Vec<usize>> = docs
        .iter()
        .map(|d| d.tokens.iter().filter_map(|t| dict.index_of(t)).collect())
        .collect();
    let total: usize = corpus.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::InvalidArgument("corpus has no in-dictionary tokens".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut doc_topic = vec![vec![0u32; k]; corpus.len()];
    let mut topic_word = vec![vec![0u32; n_words]; k];
    let mut topic_total = vec![0u32; k];
    let mut assignments: Vec<Vec<usize>> = Vec::with_capacity(corpus.len());
    for (d, doc) in corpus.iter().enumerate() {
        let z: Vec<usize> = doc.iter().map(|_| rng.random_range(0..k)).collect();
        for (&w, &t) in doc.iter().zip(&z) {
            doc_topic[d][t] += 1;
            topic_word[t][w] += 1;
            topic_total[t] += 1;
        }
        assignments.push(z);
    }

    let beta_sum = params.beta * n_words as f64;
    let mut weights = vec![0.0f64; k];
    for _ in 0..params.iters {
        for (d, doc) in corpus.iter().enumerate() {
            for (pos, &w) in doc.iter().enumerate() {
                let old = assignments[d][pos];
                doc_topic[d][old] -= 1;
                topic_word[old][w] -= 1;
                topic_total[old] -= 1;

                let mut acc = 0.0;
                for t in 0..k {
                    acc += (doc_topic[d][t] as f64 + params.alpha)
                        * (topic_word[t][w] as f64 + params.beta)
                        / (topic_total[t] as f64 + beta_sum);
                    weights[t] = acc;
                }
                let u = rng.random::<f64>() * acc;
                let new = weights.iter().position(|&c| u < c).unwrap_or(k - 1);

                assignments[d][pos] = new;
                doc_topic[d][new] += 1;
                topic_word[new][w] += 1;
                topic_total[new] += 1;
            }
        }
    }

    let phi = Array2::from_shape_fn((k, n_words), |(t, w)| {
        (topic_word[t][w] as f64 + params.beta) / (topic_total[t] as f64 + beta_sum)
    });
    let alpha_sum = params.alpha * k as f64;
    let theta = Array2::from_shape_fn((corpus.len(), k), |(d, t)| {
        (doc_topic[d][t] as f64 + params.alpha) / (corpus[d].len() as f64 + alpha_sum)
    });
    let topic_prior = topic_total
        .iter()
        .map(|&n| (n as f64 + params.alpha) / (total as f64 + alpha_sum))
        .collect();
    Ok(TopicModel {
        phi,
        theta,
        topic_prior,
        doc_ids: docs.iter().map(|d| d.class_id.clone()).collect(),
        doc_lengths: corpus.iter().map(Vec::len).collect(),
        params: params.clone(),
        dictionary_checksum: dict.checksum(),
    })
}

/// p(topic | word) by Bayes inversion with the corpus topic shares as prior.
pub fn word_topic_posterior(model: &TopicModel, word: usize) -> Vec<f64> {
    let joint: Vec<f64> =
        (0..model.n_topics()).map(|t| model.phi[[t, word]] * model.topic_prior[t]).collect();
    let z: f64 = joint.iter().sum();
    joint.into_iter().map(|j| j / z).collect()
}

/// Index of the most probable topic for `word`, ties to the lowest index.
pub fn dominant_topic(posterior: &[f64]) -> usize {
    let mut best = 0;
    for (t, &p) in posterior.iter().enumerate() {
        if p > posterior[best] {
            best = t;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicRanking {
    pub significance: Vec<f64>,
    /// Ascending topic indices of the `ceil(rho·K)` least significant topics.
    pub insignificant: Vec<usize>,
}

impl TopicRanking {
    pub fn is_insignificant(&self, topic: usize) -> bool {
        self.insignificant.binary_search(&topic).is_ok()
    }

    /// `topic_id,significance,is_insignificant`
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "topic_id,significance,is_insignificant")?;
        for (t, s) in self.significance.iter().enumerate() {
            writeln!(out, "{t},{},{}", exact(*s), self.is_insignificant(t))?;
        }
        Ok(())
    }
}

/// KL divergence of `p` from the uniform distribution over `p.len()` items.
fn kl_from_uniform<I: IntoIterator<Item = f64>>(p: I, n: usize) -> f64 {
    let n = n as f64;
    let kl: f64 = p.into_iter().filter(|&x| x > 0.0).map(|x| x * (x * n).ln()).sum();
    kl.max(0.0)
}

/// Scores each topic by its KL divergence from uniform-over-words plus the KL
/// divergence of its document distribution from uniform-over-documents, and
/// flags the `ceil(rho·K)` lowest as insignificant (ties to lower index).
pub fn rank_topics(model: &TopicModel, rho: f64) -> Result<TopicRanking> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!("rho {rho} not in (0, 1)")));
    }
    let k = model.n_topics();
    let n_docs = model.n_docs();
    let significance: Vec<f64> = (0..k)
        .map(|t| {
            let word_kl = kl_from_uniform(model.phi.row(t).iter().copied(), model.n_words());
            let mass: Vec<f64> = (0..n_docs)
                .map(|d| model.theta[[d, t]] * model.doc_lengths[d] as f64)
                .collect();
            let z: f64 = mass.iter().sum();
            let doc_kl = if z > 0.0 {
                kl_from_uniform(mass.iter().map(|m| m / z), n_docs)
            } else {
                0.0
            };
            word_kl + doc_kl
        })
        .collect();
    let count = ((rho * k as f64) - 1e-9).ceil() as usize;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| significance[a].total_cmp(&significance[b]).then(a.cmp(&b)));
    let mut insignificant: Vec<usize> = order[..count.min(k)].to_vec();
    insignificant.sort_unstable();
    Ok(TopicRanking { significance, insignificant })
}
