//! Synthetic data with known ground truth: planted-topic corpora and
//! attribute worlds in which each class has a signed attribute signature and
//! features are a noisy linear image of that signature.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::assoc::{AssociationMatrix, AssociationMode};
use crate::corpus::Document;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    /// One document per pseudo-class `d000`, `d001`, ...
    pub docs: Vec<Document>,
    /// True topic–word distributions; the background topic, if any, is last.
    pub topics: Array2<f64>,
    /// Word strings in column order (lexicographically sorted).
    pub words: Vec<String>,
    pub background: Option<usize>,
}

/// The `n_words` vocabulary is cut into `n_topics` contiguous blocks; each
/// planted topic owns one block with weights falling off as 1/(r+1). Every document draws 80% of its mass from
/// one topic and spreads the rest over the others; with `background`, a
/// uniform-over-all-words topic takes a quarter of every document.
pub fn planted_corpus(
    n_topics: usize,
    n_words: usize,
    n_docs: usize,
    doc_len: usize,
    background: bool,
    seed: u64,
) -> PlantedCorpus {
    let words: Vec<String> = (0..n_words).map(|w| format!("w{w:04}")).collect();
    let n_rows = n_topics + usize::from(background);
    let mut topics = Array2::zeros((n_rows, n_words));
    for k in 0..n_topics {
        let (lo, hi) = (k * n_words / n_topics, (k + 1) * n_words / n_topics);
        let z: f64 = (0..hi - lo).map(|r| 1.0 / (r + 1) as f64).sum();
        for r in 0..hi - lo {
            topics[[k, lo + r]] = 1.0 / ((r + 1) as f64 * z);
        }
    }
    if background {
        topics.row_mut(n_topics).fill(1.0 / n_words as f64);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let docs = (0..n_docs)
        .map(|d| {
            let main = rng.random_range(0..n_topics);
            let mut theta = vec![0.0; n_rows];
            let rest = if n_topics > 1 { 0.2 / (n_topics - 1) as f64 } else { 0.0 };
            for (k, t) in theta.iter_mut().enumerate().take(n_topics) {
                *t = if k == main { 0.8 } else { rest };
            }
            if n_topics == 1 {
                theta[0] = 1.0;
            }
            if background {
                for t in theta.iter_mut().take(n_topics) {
                    *t *= 0.75;
                }
                theta[n_topics] = 0.25;
            }
            let tokens = (0..doc_len)
                .map(|_| {
                    let k = draw(&theta, &mut rng);
                    words[draw(topics.row(k).as_slice().expect("contiguous"), &mut rng)].clone()
                })
                .collect();
            Document { class_id: format!("d{d:03}"), tokens }
        })
        .collect();
    PlantedCorpus { docs, topics, words, background: background.then_some(n_topics) }
}

fn draw(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Classes with signed attribute signatures and a shared linear feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeWorld {
    /// classes × attributes, entries ±1.
    pub signatures: Array2<f64>,
    /// attributes × features.
    pub mixing: Array2<f64>,
    pub noise: f64,
}

impl AttributeWorld {
    /// Distinct random signatures, each with at least one positive attribute.
    pub fn new(n_classes: usize, n_attributes: usize, n_features: usize, noise: f64, seed: u64) -> Result<Self> {
        if n_attributes == 0 || n_classes == 0 {
            return Err(Error::InvalidArgument("need at least one class and one attribute".into()));
        }
        if (n_attributes as u32) < usize::BITS && n_classes >= (1usize << n_attributes) {
            return Err(Error::InvalidArgument(format!(
                "{n_classes} distinct signatures do not fit in {n_attributes} attributes"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_classes);
        while rows.len() < n_classes {
            let row: Vec<f64> = (0..n_attributes).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            if row.contains(&1.0) && !rows.contains(&row) {
                rows.push(row);
            }
        }
        let signatures = Array2::from_shape_vec((n_classes, n_attributes), rows.concat()).expect("shape");
        Self::from_signatures(signatures, n_features, noise, seed.wrapping_add(1))
    }

    pub fn from_signatures(signatures: Array2<f64>, n_features: usize, noise: f64, seed: u64) -> Result<Self> {
        if signatures.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidArgument("signatures must be ±1".into()));
        }
        if n_features == 0 || !(noise >= 0.0) {
            return Err(Error::InvalidArgument("need positive feature width and nonnegative noise".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (signatures.ncols() as f64).sqrt();
        let mixing = Array2::from_shape_fn((signatures.ncols(), n_features), |_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            scale * e
        });
        Ok(Self { signatures, mixing, noise })
    }

    pub fn n_classes(&self) -> usize {
        self.signatures.nrows()
    }

    /// One feature row per label: signature · mixing plus Gaussian noise.
    pub fn sample(&self, labels: &[usize], rng: &mut impl Rng) -> Array2<f64> {
        let mut x = Array2::zeros((labels.len(), self.mixing.ncols()));
        for (i, &c) in labels.iter().enumerate() {
            let clean = self.signatures.row(c).dot(&self.mixing);
            for (j, v) in clean.iter().enumerate() {
                let e: f64 = StandardNormal.sample(rng);
                x[[i, j]] = v + self.noise * e;
            }
        }
        x
    }

    /// Signed association matrix for the listed classes, ids `c000`, ...
    pub fn associations(&self, classes: &[usize]) -> AssociationMatrix {
        let values = self.signatures.select(ndarray::Axis(0), classes);
        AssociationMatrix {
            values,
            mode: AssociationMode::Binary,
            class_ids: classes.iter().map(|c| format!("c{c:03}")).collect(),
            attributes: (0..self.signatures.ncols()).map(|j| format!("a{j:03}")).collect(),
        }
    }
}

/// `per_class` copies of each listed class, shuffled.
pub fn balanced_labels(n_classes: usize, per_class: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n_classes).flat_map(|c| std::iter::repeat_n(c, per_class)).collect();
    labels.shuffle(rng);
    labels
}

/// Copy of a signed matrix with `round(fraction · n)` entries negated.
pub fn flip_signs(values: &Array2<f64>, fraction: f64, rng: &mut impl Rng) -> Array2<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.shuffle(rng);
    let n = (fraction * values.len() as f64).round() as usize;
    let mut out = values.clone();
    let cols = values.ncols();
    for &i in idx.iter().take(n) {
        out[[i / cols, i % cols]] *= -1.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_topics_are_distributions() {
        let c = planted_corpus(3, 30, 20, 50, true, 1);
        assert_eq!(c.topics.dim(), (4, 30));
        for row in c.topics.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        assert_eq!(c.background, Some(3));
        assert_eq!(c.docs.len(), 20);
        assert!(c.docs.iter().all(|d| d.tokens.len() == 50));
        let mut sorted = c.words.clone();
        sorted.sort();
        assert_eq!(sorted, c.words);
    }

    #[test]
    fn world_signatures_distinct_and_seeded() {
        let w = AttributeWorld::new(12, 8, 10, 0.1, 5).unwrap();
        for i in 0..12 {
            assert!(w.signatures.row(i).iter().any(|&v| v == 1.0));
            for j in 0..i {
                assert_ne!(w.signatures.row(i), w.signatures.row(j));
            }
        }
        assert_eq!(w, AttributeWorld::new(12, 8, 10, 0.1, 5).unwrap());
        assert!(AttributeWorld::new(5, 2, 3, 0.1, 0).is_err());
    }

    #[test]
    fn noiseless_samples_equal_projection() {
        let w = AttributeWorld::new(3, 4, 5, 0.0, 2).unwrap();
        let x = w.sample(&[2, 0], &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(x.row(0), w.signatures.row(2).dot(&w.mixing));
    }

    #[test]
    fn flips_exact_count() {
        let v = Array2::from_elem((4, 5), 1.0);
        let f = flip_signs(&v, 0.1, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(f.iter().filter(|&&x| x == -1.0).count(), 2);
    }
}
