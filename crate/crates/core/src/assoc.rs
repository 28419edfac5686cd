//! Class–attribute association matrices: the signed text prior derived from
//! the tf·idf embedding, and rows for unseen classes estimated from their
//! own articles against the frozen training dictionary.

use std::io::Write;

use ndarray::Array2;

use crate::corpus::{preprocess_tokens, ClassEmbedding, Dictionary, StopWords};
use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::table::{read_labelled_matrix, write_labelled_matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssociationMode {
    /// Entries in {−1, +1}.
    Binary,
    /// Nonnegative weights (raw tf·idf).
    Continuous,
}

impl std::str::FromStr for AssociationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Self::Binary),
            "continuous" => Ok(Self::Continuous),
            other => Err(Error::InvalidArgument(format!("unknown association mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMatrix {
    /// classes × attributes.
    pub values: Array2<f64>,
    pub mode: AssociationMode,
    pub class_ids: Vec<String>,
    pub attributes: Vec<String>,
}

impl AssociationMatrix {
    pub fn new(
        values: Array2<f64>,
        mode: AssociationMode,
        class_ids: Vec<String>,
        attributes: Vec<String>,
    ) -> Result<Self> {
        if values.nrows() != class_ids.len() || values.ncols() != attributes.len() {
            return Err(Error::Dimension(format!(
                "association values are {}x{} for {} classes and {} attributes",
                values.nrows(),
                values.ncols(),
                class_ids.len(),
                attributes.len()
            )));
        }
        let ok = match mode {
            AssociationMode::Binary => values.iter().all(|&v| v == 1.0 || v == -1.0),
            AssociationMode::Continuous => values.iter().all(|&v| v >= 0.0 && v.is_finite()),
        };
        if !ok {
            return Err(Error::InvalidArgument(format!("entries do not fit {mode:?} mode")));
        }
        Ok(Self { values, mode, class_ids, attributes })
    }

    pub fn n_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    /// Whether class `c` has attribute `j` switched on.
    pub fn is_active(&self, c: usize, j: usize) -> bool {
        self.values[[c, j]] > 0.0
    }

    /// Classes without a single positive (or nonzero) attribute.
    pub fn degenerate_classes(&self) -> Vec<usize> {
        (0..self.n_classes()).filter(|&c| !(0..self.n_attributes()).any(|j| self.is_active(c, j))).collect()
    }

    pub fn warn_degenerate(&self) {
        for c in self.degenerate_classes() {
            log::warn!("class {:?} has no active attribute", self.class_ids[c]);
        }
    }

    /// Stacks `other` below `self`; both must share mode and attributes.
    pub fn concat(&self, other: &AssociationMatrix) -> Result<AssociationMatrix> {
        if self.mode != other.mode || self.attributes != other.attributes {
            return Err(Error::Dimension("association matrices differ in mode or attributes".into()));
        }
        let values = ndarray::concatenate(ndarray::Axis(0), &[self.values.view(), other.values.view()])
            .map_err(|e| Error::Dimension(e.to_string()))?;
        let mut class_ids = self.class_ids.clone();
        class_ids.extend(other.class_ids.iter().cloned());
        Self::new(values, self.mode, class_ids, self.attributes.clone())
    }

    /// Header `class_id,<attr1>,...`; signed entries as integers, continuous
    /// ones with nine significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let fmt = match self.mode {
            AssociationMode::Binary => |v: f64| format!("{}", v as i64),
            AssociationMode::Continuous => sig9,
        };
        write_labelled_matrix(out, "class_id", &self.class_ids, &self.attributes, &self.values, fmt)
    }

    pub fn read_csv<R: std::io::Read>(input: R, mode: AssociationMode) -> Result<Self> {
        let (class_ids, attributes, values) = read_labelled_matrix(input, "class_id")?;
        Self::new(values, mode, class_ids, attributes)
    }
}

fn vocabulary_columns(vocabulary: &[String], lookup: impl Fn(&str) -> Option<usize>) -> Result<Vec<usize>> {
    vocabulary
        .iter()
        .map(|w| lookup(w).ok_or_else(|| Error::InvalidArgument(format!("vocabulary word {w:?} not in dictionary"))))
        .collect()
}

/// `m_cj = +1` where the class embedding is positive, `−1` elsewhere,
/// restricted to the vocabulary columns.
pub fn initial_associations(embedding: &ClassEmbedding, vocabulary: &[String]) -> Result<AssociationMatrix> {
    let cols = vocabulary_columns(vocabulary, |w| embedding.word_index(w))?;
    let values = Array2::from_shape_fn((embedding.n_classes(), cols.len()), |(c, j)| {
        if embedding.matrix[[c, cols[j]]] > 0.0 { 1.0 } else { -1.0 }
    });
    let m = AssociationMatrix::new(values, AssociationMode::Binary, embedding.class_ids.clone(), vocabulary.to_vec())?;
    m.warn_degenerate();
    Ok(m)
}

/// Raw tf·idf weights of the vocabulary columns.
pub fn continuous_associations(embedding: &ClassEmbedding, vocabulary: &[String]) -> Result<AssociationMatrix> {
    let cols = vocabulary_columns(vocabulary, |w| embedding.word_index(w))?;
    let values = Array2::from_shape_fn((embedding.n_classes(), cols.len()), |(c, j)| embedding.matrix[[c, cols[j]]]);
    let m = AssociationMatrix::new(values, AssociationMode::Continuous, embedding.class_ids.clone(), vocabulary.to_vec())?;
    m.warn_degenerate();
    Ok(m)
}

/// Preprocessing settings applied to unseen-class articles.
#[derive(Debug, Clone)]
pub struct ArticleOptions<'a> {
    pub length_limit: usize,
    pub stop_words: &'a StopWords,
}

/// Association row of one unseen-class article. The idf comes from the
/// training dictionary and is not updated by the article.
pub fn unseen_associations(
    article: &str,
    dict: &Dictionary,
    vocabulary: &[String],
    options: &ArticleOptions<'_>,
    mode: AssociationMode,
) -> Result<Vec<f64>> {
    if options.length_limit == 0 {
        return Err(Error::InvalidArgument("length limit must be positive".into()));
    }
    let cols = vocabulary_columns(vocabulary, |w| dict.index_of(w))?;
    let tokens = preprocess_tokens(article, options.length_limit, options.stop_words);
    let row = dict.tfidf(&tokens);
    let weights: Vec<f64> = cols.iter().map(|&c| row[c]).collect();
    if !vocabulary.iter().any(|w| tokens.contains(w)) {
        return Err(Error::Empty("no vocabulary word occurs in the article".into()));
    }
    Ok(match mode {
        AssociationMode::Continuous => weights,
        AssociationMode::Binary => weights.iter().map(|&v| if v > 0.0 { 1.0 } else { -1.0 }).collect(),
    })
}

/// Builds association rows for a set of unseen classes. Classes with several
/// articles get the mean of their continuous rows (signed afterwards in
/// binary mode). Classes come out in lexicographic order.
pub fn unseen_association_matrix(
    articles: &[(String, String)],
    dict: &Dictionary,
    vocabulary: &[String],
    options: &ArticleOptions<'_>,
    mode: AssociationMode,
) -> Result<AssociationMatrix> {
    let mut grouped: std::collections::BTreeMap<&str, Vec<&str>> = Default::default();
    for (class_id, text) in articles {
        grouped.entry(class_id.as_str()).or_default().push(text.as_str());
    }
    let mut values = Array2::<f64>::zeros((grouped.len(), vocabulary.len()));
    let mut class_ids = Vec::with_capacity(grouped.len());
    for (r, (class_id, texts)) in grouped.into_iter().enumerate() {
        let mut acc = vec![0.0; vocabulary.len()];
        let mut any = false;
        for text in &texts {
            match unseen_associations(text, dict, vocabulary, options, AssociationMode::Continuous) {
                Ok(row) => {
                    any = true;
                    acc.iter_mut().zip(row).for_each(|(a, v)| *a += v);
                }
                Err(Error::Empty(_)) => {}
                Err(e) => return Err(e),
            }
        }
        if !any {
            log::warn!("unseen class {class_id:?} shares no vocabulary word with its articles");
        }
        let n = texts.len() as f64;
        for (dst, a) in values.row_mut(r).iter_mut().zip(acc) {
            *dst = match mode {
                AssociationMode::Continuous => a / n,
                AssociationMode::Binary => if a > 0.0 { 1.0 } else { -1.0 },
            };
        }
        class_ids.push(class_id.to_string());
    }
    let m = AssociationMatrix::new(values, mode, class_ids, vocabulary.to_vec())?;
    m.warn_degenerate();
    Ok(m)
}
