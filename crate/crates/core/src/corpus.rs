//! Text ingestion: cleaning, stemming, the class-level dictionary and the
//! tf·idf class embedding.
//!
//! Every class may own several documents. Document frequency counts a class
//! once no matter how many of its documents contain a word, and the class
//! embedding is the mean of its per-document tf·idf vectors.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::table::{csv_err, read_labelled_matrix, write_labelled_matrix};

pub const DEFAULT_LIMIT: usize = 500;
pub const DEFAULT_MIN_DF: usize = 2;
pub const DEFAULT_MAX_DF_RATIO: f64 = 0.8;

const BUNDLED_STOP_WORDS: &str = include_str!("stopwords.txt");

#[derive(Debug, Clone, Default)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    /// The small English list shipped with the crate.
    pub fn english() -> Self {
        Self::parse(BUNDLED_STOP_WORDS)
    }

    pub fn none() -> Self {
        Self(HashSet::new())
    }

    /// One word per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim().to_ascii_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        )
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub class_id: String,
    pub tokens: Vec<String>,
}

/// Lowercases, strips everything but ASCII letters, drops stop words, keeps
/// the first `limit` surviving tokens and Porter-stems them.
///
/// Apostrophes are deleted so that possessives stay attached to their word;
/// any other non-letter separates tokens.
pub fn preprocess_tokens(raw_text: &str, limit: usize, stop_words: &StopWords) -> Vec<String> {
    let cleaned: String = raw_text
        .chars()
        .filter(|c| !matches!(c, '\'' | '\u{2019}'))
        .map(|c| if c.is_ascii_alphabetic() { c.to_ascii_lowercase() } else { ' ' })
        .collect();
    cleaned
        .split_whitespace()
        .filter(|t| !stop_words.contains(t))
        .take(limit)
        .map(porter_stemmer::stem)
        .filter(|t| !t.is_empty())
        .collect()
}

pub fn preprocess(
    class_id: &str,
    raw_text: &str,
    limit: usize,
    stop_words: &StopWords,
) -> Result<Document> {
    if limit == 0 {
        return Err(Error::InvalidArgument("truncation limit must be positive".into()));
    }
    Ok(Document {
        class_id: class_id.to_string(),
        tokens: preprocess_tokens(raw_text, limit, stop_words),
    })
}

/// A document as read from disk, before preprocessing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub class_id: String,
    pub text: String,
}

/// Reads either a directory of `<class_id>__<doc_index>.txt` files or a
/// JSON-lines file of `{"class_id", "text"}` objects.
pub fn load_raw_corpus(path: &Path) -> Result<Vec<RawDocument>> {
    if path.is_dir() {
        load_corpus_dir(path)
    } else {
        load_corpus_jsonl(path)
    }
}

fn load_corpus_dir(dir: &Path) -> Result<Vec<RawDocument>> {
    let mut entries = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Format(format!("non UTF-8 file name {}", path.display())))?;
        let (class_id, index) = stem.rsplit_once("__").ok_or_else(|| {
            Error::Format(format!("{}: expected <class_id>__<doc_index>.txt", path.display()))
        })?;
        let index: u64 = index
            .parse()
            .map_err(|_| Error::Format(format!("{}: bad document index", path.display())))?;
        validate_class_id(class_id)?;
        entries.push((class_id.to_string(), index, path));
    }
    entries.sort();
    entries
        .into_iter()
        .map(|(class_id, _, path)| {
            Ok(RawDocument { class_id, text: std::fs::read_to_string(&path)? })
        })
        .collect()
}

fn load_corpus_jsonl(path: &Path) -> Result<Vec<RawDocument>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_raw_jsonl(file, &path.display().to_string())
}

/// Parses JSON-lines `{"class_id", "text"}` records; `source` names the input
/// in error messages.
pub fn read_raw_jsonl<R: BufRead>(input: R, source: &str) -> Result<Vec<RawDocument>> {
    let mut docs = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: RawDocument =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("{source}:{}: {e}", lineno + 1)))?;
        validate_class_id(&doc.class_id)?;
        docs.push(doc);
    }
    Ok(docs)
}

fn validate_class_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains([',', '"', '\n', '\r']) {
        return Err(Error::Format(format!("class id {id:?} is empty or contains CSV metacharacters")));
    }
    Ok(())
}

pub fn write_documents<W: Write>(docs: &[Document], mut out: W) -> Result<()> {
    for doc in docs {
        serde_json::to_writer(&mut out, doc).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_documents<R: BufRead>(input: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        docs.push(serde_json::from_str(&line).map_err(|e| Error::Format(e.to_string()))?);
    }
    Ok(docs)
}

/// Groups documents by class id, classes in lexicographic order.
pub fn group_by_class(docs: &[Document]) -> BTreeMap<&str, Vec<&Document>> {
    let mut grouped: BTreeMap<&str, Vec<&Document>> = BTreeMap::new();
    for doc in docs {
        grouped.entry(doc.class_id.as_str()).or_default().push(doc);
    }
    grouped
}

/// Concatenates the tokens of each class, in class order and then in the
/// order the documents were given.
pub fn merge_by_class(docs: &[Document]) -> Vec<Document> {
    group_by_class(docs)
        .into_iter()
        .map(|(class_id, group)| Document {
            class_id: class_id.to_string(),
            tokens: group.iter().flat_map(|d| d.tokens.iter().cloned()).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    words: Vec<String>,
    df: Vec<usize>,
    n_classes: usize,
    index: HashMap<String, usize>,
}

impl Dictionary {
    pub fn new(words: Vec<String>, df: Vec<usize>, n_classes: usize) -> Result<Self> {
        if words.len() != df.len() {
            return Err(Error::Dimension(format!(
                "{} words but {} document frequencies",
                words.len(),
                df.len()
            )));
        }
        if words.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format("dictionary words must be sorted and unique".into()));
        }
        if let Some(i) = df.iter().position(|&d| d == 0 || d > n_classes) {
            return Err(Error::InvalidArgument(format!(
                "word {:?} has document frequency {} outside 1..={n_classes}",
                words[i], df[i]
            )));
        }
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(Self { words, df, n_classes, index })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn df(&self) -> &[usize] {
        &self.df
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// `ln(J / df)`, frozen at dictionary construction time.
    pub fn idf(&self, word: usize) -> f64 {
        (self.n_classes as f64 / self.df[word] as f64).ln()
    }

    /// Per-word counts of the in-dictionary tokens of `tokens`.
    pub fn counts(&self, tokens: &[String]) -> Vec<usize> {
        let mut counts = vec![0usize; self.len()];
        for t in tokens {
            if let Some(i) = self.index_of(t) {
                counts[i] += 1;
            }
        }
        counts
    }

    /// Max-normalized tf times idf for a single token stream.
    pub fn tfidf(&self, tokens: &[String]) -> Vec<f64> {
        let counts = self.counts(tokens);
        let max = counts.iter().copied().max().unwrap_or(0);
        if max == 0 {
            return vec![0.0; self.len()];
        }
        counts
            .iter()
            .enumerate()
            .map(|(i, &c)| if c == 0 { 0.0 } else { c as f64 / max as f64 * self.idf(i) })
            .collect()
    }

    /// SHA-256 over the words, document frequencies and class count.
    pub fn checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.n_classes.to_le_bytes());
        for (w, d) in self.words.iter().zip(&self.df) {
            h.update(w.as_bytes());
            h.update([0]);
            h.update(d.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["word", "df"]).map_err(csv_err)?;
        for (word, df) in self.words.iter().zip(&self.df) {
            w.write_record([word.as_str(), &df.to_string()]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// The CSV does not carry the class count, so the caller supplies it.
    pub fn read_csv<R: std::io::Read>(input: R, n_classes: usize) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut words = Vec::new();
        let mut df = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != 2 {
                return Err(Error::Format("dictionary rows must be word,df".into()));
            }
            words.push(rec[0].to_string());
            df.push(rec[1].parse().map_err(|_| Error::Format(format!("bad df {:?}", &rec[1])))?);
        }
        Self::new(words, df, n_classes)
    }
}

/// Keeps words that occur in at least `min_df` classes and at most
/// `max_df_ratio · J` classes.
pub fn build_dictionary(docs: &[Document], min_df: usize, max_df_ratio: f64) -> Result<Dictionary> {
    if min_df < 1 {
        return Err(Error::InvalidArgument("min_df must be at least 1".into()));
    }
    if !(max_df_ratio > 0.0 && max_df_ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!("max_df_ratio {max_df_ratio} not in (0, 1]")));
    }
    if docs.is_empty() {
        return Err(Error::InvalidArgument("cannot build a dictionary from zero documents".into()));
    }
    let classes = group_by_class(docs);
    let n_classes = classes.len();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for group in classes.values() {
        let seen: BTreeSet<&str> =
            group.iter().flat_map(|d| d.tokens.iter().map(String::as_str)).collect();
        for w in seen {
            *df.entry(w).or_default() += 1;
        }
    }
    let max_df = max_df_ratio * n_classes as f64;
    let (words, df): (Vec<String>, Vec<usize>) = df
        .into_iter()
        .filter(|&(_, d)| d >= min_df && d as f64 <= max_df)
        .map(|(w, d)| (w.to_string(), d))
        .unzip();
    Dictionary::new(words, df, n_classes)
}

/// Classes × words tf·idf matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassEmbedding {
    pub matrix: Array2<f64>,
    pub class_ids: Vec<String>,
    pub words: Vec<String>,
}

impl ClassEmbedding {
    pub fn new(matrix: Array2<f64>, class_ids: Vec<String>, words: Vec<String>) -> Result<Self> {
        if matrix.nrows() != class_ids.len() || matrix.ncols() != words.len() {
            return Err(Error::Dimension(format!(
                "embedding is {}x{} but has {} class and {} word labels",
                matrix.nrows(),
                matrix.ncols(),
                class_ids.len(),
                words.len()
            )));
        }
        if matrix.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("embedding entries must be finite and >= 0".into()));
        }
        Ok(Self { matrix, class_ids, words })
    }

    pub fn n_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    pub fn word_index(&self, word: &str) -> Option<usize> {
        self.words.iter().position(|w| w == word)
    }

    pub fn class_index(&self, class_id: &str) -> Option<usize> {
        self.class_ids.iter().position(|c| c == class_id)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_labelled_matrix(out, "class_id", &self.class_ids, &self.words, &self.matrix, sig9)
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let (class_ids, words, matrix) = read_labelled_matrix(input, "class_id")?;
        Self::new(matrix, class_ids, words)
    }
}

/// Builds the class embedding. Classes come out in lexicographic order of
/// their ids; a class with several documents gets the mean of their vectors.
///
/// A zero document frequency cannot reach this point: `Dictionary::new`
/// rejects it.
pub fn embed(docs: &[Document], dict: &Dictionary) -> Result<ClassEmbedding> {
    let classes = group_by_class(docs);
    let mut matrix = Array2::<f64>::zeros((classes.len(), dict.len()));
    let mut class_ids = Vec::with_capacity(classes.len());
    for (row, (class_id, mut group)) in classes.into_iter().enumerate() {
        // Fixed summation order keeps the mean independent of input order.
        group.sort_by(|a, b| a.tokens.cmp(&b.tokens));
        let n = group.len() as f64;
        let mut acc = vec![0.0; dict.len()];
        for doc in group {
            for (a, v) in acc.iter_mut().zip(dict.tfidf(&doc.tokens)) {
                *a += v;
            }
        }
        for (dst, a) in matrix.row_mut(row).iter_mut().zip(acc) {
            *dst = a / n;
        }
        class_ids.push(class_id.to_string());
    }
    ClassEmbedding::new(matrix, class_ids, dict.words().to_vec())
}
