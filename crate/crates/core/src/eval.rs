//! Evaluation: nDCG of class rankings in attribute-embedding space,
//! vocabulary saliency from human annotations, top-k accuracy and
//! per-attribute AP/AUC.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};

use crate::error::{ensure_dims, Error, Result};
use crate::table::{csv_err, read_labelled_matrix};

/// Graded relevance between classes, externally supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMatrix {
    pub class_ids: Vec<String>,
    pub values: Array2<f64>,
}

impl RelevanceMatrix {
    pub fn new(class_ids: Vec<String>, values: Array2<f64>) -> Result<Self> {
        let n = class_ids.len();
        ensure_dims(values.dim() == (n, n), || format!("relevance matrix is {:?} for {n} classes", values.dim()))?;
        for i in 0..n {
            for j in 0..n {
                let v = values[[i, j]];
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidArgument(format!("relevance ({i}, {j}) = {v} is not a nonnegative grade")));
                }
                if v != values[[j, i]] {
                    return Err(Error::InvalidArgument(format!("relevance is not symmetric at ({i}, {j})")));
                }
                if v > values[[i, i]] {
                    return Err(Error::InvalidArgument(format!("row {i} has an entry above its diagonal")));
                }
            }
        }
        Ok(Self { class_ids, values })
    }

    /// Square CSV with header `class_id,<c1>,...`; row and column order must agree.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let (rows, cols, values) = read_labelled_matrix(input, "class_id")?;
        if rows != cols {
            return Err(Error::Format("relevance rows and columns list different classes".into()));
        }
        Self::new(rows, values)
    }

    /// Reordered to `order`, which must be a subset of the known classes.
    pub fn restrict(&self, order: &[String]) -> Result<Self> {
        let idx: Vec<usize> = order
            .iter()
            .map(|c| {
                self.class_ids
                    .iter()
                    .position(|k| k == c)
                    .ok_or_else(|| Error::Dimension(format!("class {c:?} has no relevance grades")))
            })
            .collect::<Result<_>>()?;
        let values = Array2::from_shape_fn((idx.len(), idx.len()), |(i, j)| self.values[[idx[i], idx[j]]]);
        Ok(Self { class_ids: order.to_vec(), values })
    }
}

fn dcg(grades: impl Iterator<Item = f64>) -> f64 {
    grades.enumerate().map(|(i, r)| (2f64.powf(r) - 1.0) / ((i + 2) as f64).log2()).sum()
}

/// nDCG@k of the grades in produced order against the best ordering of
/// `candidates`. An all-zero ideal gain counts as a perfect ranking.
pub fn ndcg_from_grades(produced: &[f64], candidates: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > produced.len() || k > candidates.len() {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds the {} candidates", candidates.len())));
    }
    let mut ideal = candidates.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(ideal.into_iter().take(k));
    if idcg == 0.0 {
        return Ok(1.0);
    }
    Ok(dcg(produced.iter().copied().take(k)) / idcg)
}

pub fn cosine_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let (na, nb) = (a.dot(&a).sqrt(), b.dot(&b).sqrt());
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - a.dot(&b) / (na * nb)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NdcgReport {
    pub per_class: Vec<f64>,
    pub mean: f64,
}

/// For every query class, the other classes ranked by ascending cosine
/// distance (ties by index) and scored against `relevance`.
pub fn ndcg_at_k(embedding: &Array2<f64>, relevance: &RelevanceMatrix, k: usize) -> Result<NdcgReport> {
    let n = embedding.nrows();
    ensure_dims(relevance.values.nrows() == n, || {
        format!("{n} embedded classes but {} graded classes", relevance.values.nrows())
    })?;
    if k == 0 || k + 1 > n {
        return Err(Error::InvalidArgument(format!("k = {k} needs between 1 and {} candidates", n.saturating_sub(1))));
    }
    let mut per_class = Vec::with_capacity(n);
    for q in 0..n {
        let mut others: Vec<(usize, f64)> =
            (0..n).filter(|&c| c != q).map(|c| (c, cosine_distance(embedding.row(q), embedding.row(c)))).collect();
        others.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let produced: Vec<f64> = others.iter().map(|&(c, _)| relevance.values[[q, c]]).collect();
        let candidates: Vec<f64> = (0..n).filter(|&c| c != q).map(|c| relevance.values[[q, c]]).collect();
        per_class.push(ndcg_from_grades(&produced, &candidates, k)?);
    }
    let mean = per_class.iter().sum::<f64>() / n as f64;
    Ok(NdcgReport { per_class, mean })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
    Unknown,
    Junk,
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(Label::Positive),
            "negative" => Ok(Label::Negative),
            "unknown" => Ok(Label::Unknown),
            "junk" => Ok(Label::Junk),
            other => Err(Error::Format(format!("unknown annotation label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub word: String,
    pub class_id: String,
    pub annotator_id: String,
    pub label: Label,
}

/// CSV `word,class_id,annotator_id,label`.
pub fn read_annotations<R: Read>(input: R) -> Result<Vec<Annotation>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != ["word", "class_id", "annotator_id", "label"] {
        return Err(Error::Format("annotation header must be word,class_id,annotator_id,label".into()));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(Annotation {
                word: rec[0].to_string(),
                class_id: rec[1].to_string(),
                annotator_id: rec[2].to_string(),
                label: rec[3].parse()?,
            })
        })
        .collect()
}

/// `(p(+|w), p(J|w))` per annotated word, marginalized over classes and annotators.
pub fn label_marginals(annotations: &[Annotation]) -> BTreeMap<&str, (f64, f64)> {
    let mut counts: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for a in annotations {
        let e = counts.entry(a.word.as_str()).or_default();
        e.0 += 1;
        e.1 += usize::from(a.label == Label::Positive);
        e.2 += usize::from(a.label == Label::Junk);
    }
    counts.into_iter().map(|(w, (n, p, j))| (w, (p as f64 / n as f64, j as f64 / n as f64))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaliencyReport {
    pub relevance: f64,
    pub junk: f64,
    pub saliency: f64,
}

/// Share of the annotated positive (and junk) mass captured by `selected`,
/// combined as `0.5·(relevance + 1 − junk)`. A zero total mass gives a
/// share of 0.
pub fn saliency_scores(annotations: &[Annotation], selected: &[String]) -> Result<SaliencyReport> {
    let marginals = label_marginals(annotations);
    let chosen: BTreeSet<&str> = selected.iter().map(String::as_str).filter(|w| marginals.contains_key(w)).collect();
    if chosen.is_empty() {
        return Err(Error::Empty("no selected word is annotated".into()));
    }
    let (tot_pos, tot_junk) = marginals.values().fold((0.0, 0.0), |acc, &(p, j)| (acc.0 + p, acc.1 + j));
    let (sel_pos, sel_junk) =
        chosen.iter().map(|w| marginals[w]).fold((0.0, 0.0), |acc, (p, j)| (acc.0 + p, acc.1 + j));
    let share = |s: f64, t: f64| if t > 0.0 { s / t } else { 0.0 };
    let relevance = share(sel_pos, tot_pos);
    let junk = share(sel_junk, tot_junk);
    Ok(SaliencyReport { relevance, junk, saliency: 0.5 * (relevance + 1.0 - junk) })
}

/// Fraction of samples whose true class is among the first `k` ranked.
pub fn accuracy_topk(rankings: &[Vec<usize>], truth: &[usize], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    ensure_dims(rankings.len() == truth.len(), || format!("{} rankings for {} labels", rankings.len(), truth.len()))?;
    if truth.is_empty() {
        return Err(Error::Empty("no samples to score".into()));
    }
    let hits = rankings.iter().zip(truth).filter(|(r, t)| r.iter().take(k).any(|c| c == *t)).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApAuc {
    pub ap: f64,
    pub auc: f64,
}

/// Step-curve average precision, samples ranked by descending score with
/// ties by sample index.
pub fn average_precision(scores: ArrayView1<f64>, labels: ArrayView1<bool>) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let (mut hits, mut sum) = (0usize, 0.0);
    for (i, &s) in order.iter().enumerate() {
        if labels[s] {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / hits as f64
}

/// Rank-sum AUC with midranks for tied scores.
pub fn auc(scores: ArrayView1<f64>, labels: ArrayView1<bool>) -> f64 {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &s in &order[i..=j] {
            ranks[s] = mid;
        }
        i = j + 1;
    }
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = n as f64 - pos;
    let rank_sum: f64 = (0..n).filter(|&s| labels[s]).map(|s| ranks[s]).sum();
    (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg)
}

/// AP and AUC per attribute column; `None` where a column lacks positives or negatives.
pub fn attribute_ap_auc(scores: &Array2<f64>, labels: &Array2<bool>) -> Result<Vec<Option<ApAuc>>> {
    ensure_dims(scores.dim() == labels.dim(), || format!("scores {:?} vs labels {:?}", scores.dim(), labels.dim()))?;
    Ok((0..scores.ncols())
        .map(|j| {
            let (s, l) = (scores.column(j), labels.column(j));
            let pos = l.iter().filter(|&&v| v).count();
            if pos == 0 || pos == l.len() {
                log::warn!("attribute {j} lacks positive or negative samples; skipped");
                return None;
            }
            Some(ApAuc { ap: average_precision(s, l), auc: auc(s, l) })
        })
        .collect())
}
