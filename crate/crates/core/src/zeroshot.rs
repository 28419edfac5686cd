//! Summation-form direct attribute prediction over normalized attribute
//! scores, for seen, unseen or pooled candidate classes.

use std::io::Write;

use ndarray::{Array2, ArrayView1, Axis};

use crate::assoc::{AssociationMatrix, AssociationMode};
use crate::error::{ensure_dims, Error, Result};
use crate::fmt::sig9;
use crate::neural::{predict_attributes, DenseNetwork};
use crate::table::csv_err;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizerSource {
    /// Held-out seen-class data.
    Reference,
    /// The test batch itself.
    Batch,
}

impl std::str::FromStr for NormalizerSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(Self::Reference),
            "batch" => Ok(Self::Batch),
            other => Err(Error::InvalidArgument(format!("unknown normalizer source {other:?}"))),
        }
    }
}

/// Per-attribute standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreNormalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Attributes with zero variance on the fitting set; their std is 1.
    pub flagged: Vec<usize>,
    pub source: NormalizerSource,
}

/// Mean and sample standard deviation of every column.
pub fn fit_normalizer(scores: &Array2<f64>, source: NormalizerSource) -> Result<ScoreNormalizer> {
    let n = scores.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("a normalizer needs at least 2 samples, got {n}")));
    }
    let mut mean = Vec::with_capacity(scores.ncols());
    let mut std = Vec::with_capacity(scores.ncols());
    let mut flagged = Vec::new();
    for (j, col) in scores.axis_iter(Axis(1)).enumerate() {
        let m = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
        let s = var.sqrt();
        if !s.is_finite() {
            return Err(Error::NonFinite(format!("attribute {j} has non-finite scores")));
        }
        mean.push(m);
        if s > 0.0 {
            std.push(s);
        } else {
            log::warn!("attribute {j} has zero variance on the normalizer set");
            flagged.push(j);
            std.push(1.0);
        }
    }
    Ok(ScoreNormalizer { mean, std, flagged, source })
}

impl ScoreNormalizer {
    pub fn n_attributes(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, scores: &Array2<f64>) -> Result<Array2<f64>> {
        ensure_dims(scores.ncols() == self.n_attributes(), || {
            format!("scores have {} attributes, normalizer {}", scores.ncols(), self.n_attributes())
        })?;
        let mut out = scores.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }
}

/// Class scores for one sample. Binary mode averages the normalized scores of
/// the class's active attributes; continuous mode weights them by the
/// association values. Classes with nothing active score −∞.
pub fn dap_score(norm_scores: ArrayView1<f64>, assoc: &AssociationMatrix) -> Vec<f64> {
    assoc
        .values
        .rows()
        .into_iter()
        .map(|row| {
            let (mut num, mut den) = (0.0, 0.0);
            for (&v, &s) in row.iter().zip(norm_scores.iter()) {
                let w = match assoc.mode {
                    AssociationMode::Binary if v > 0.0 => 1.0,
                    AssociationMode::Binary => 0.0,
                    AssociationMode::Continuous => v,
                };
                if w > 0.0 {
                    num += w * s;
                    den += w;
                }
            }
            if den > 0.0 {
                num / den
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// `(class index, score)` pairs in descending score order, ties by class
/// index, truncated to `top_k`.
pub fn rank_classes(scores: &[f64], top_k: usize) -> Vec<(usize, f64)> {
    let mut order: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    order.truncate(top_k);
    order
}

fn check_consistency(n_attr: usize, normalizer: &ScoreNormalizer, assoc: &AssociationMatrix, top_k: usize) -> Result<()> {
    ensure_dims(normalizer.n_attributes() == n_attr && assoc.n_attributes() == n_attr, || {
        format!(
            "attribute counts disagree: predictor {n_attr}, normalizer {}, associations {}",
            normalizer.n_attributes(),
            assoc.n_attributes()
        )
    })?;
    if top_k == 0 {
        return Err(Error::InvalidArgument("top_k must be positive".into()));
    }
    Ok(())
}

/// Normalize → score → rank, for precomputed attribute scores.
pub fn classify_scores(
    attribute_scores: &Array2<f64>,
    normalizer: &ScoreNormalizer,
    assoc: &AssociationMatrix,
    top_k: usize,
) -> Result<Vec<Vec<(usize, f64)>>> {
    check_consistency(attribute_scores.ncols(), normalizer, assoc, top_k)?;
    let norm = normalizer.normalize(attribute_scores)?;
    Ok(norm.rows().into_iter().map(|row| rank_classes(&dap_score(row, assoc), top_k)).collect())
}

/// Predict attributes with `network`, then [`classify_scores`].
pub fn classify(
    features: &Array2<f64>,
    network: &DenseNetwork,
    normalizer: &ScoreNormalizer,
    assoc: &AssociationMatrix,
    top_k: usize,
) -> Result<Vec<Vec<(usize, f64)>>> {
    check_consistency(network.n_outputs(), normalizer, assoc, top_k)?;
    classify_scores(&predict_attributes(network, features)?, normalizer, assoc, top_k)
}

/// Header `sample_id,rank,class_id,score`; ranks start at 1.
pub fn write_predictions<W: Write>(
    out: W,
    sample_ids: &[String],
    rankings: &[Vec<(usize, f64)>],
    class_ids: &[String],
) -> Result<()> {
    ensure_dims(sample_ids.len() == rankings.len(), || {
        format!("{} sample ids for {} rankings", sample_ids.len(), rankings.len())
    })?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample_id", "rank", "class_id", "score"]).map_err(csv_err)?;
    for (id, ranking) in sample_ids.iter().zip(rankings) {
        for (r, &(c, s)) in ranking.iter().enumerate() {
            let score = if s == f64::NEG_INFINITY { "-inf".to_string() } else { sig9(s) };
            w.write_record([id.as_str(), &(r + 1).to_string(), class_ids[c].as_str(), &score]).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}
