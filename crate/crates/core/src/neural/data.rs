use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, Axis};

use super::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::table::{csv_err, parse_f64};

/// Per-sample feature vectors with sample and class identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub sample_ids: Vec<String>,
    pub class_ids: Vec<String>,
    /// samples × features.
    pub features: Array2<f64>,
}

impl FeatureSet {
    pub fn new(sample_ids: Vec<String>, class_ids: Vec<String>, features: Array2<f64>) -> Result<Self> {
        if sample_ids.len() != features.nrows() || class_ids.len() != features.nrows() {
            return Err(Error::Dimension(format!(
                "{} sample ids and {} class ids for {} feature rows",
                sample_ids.len(),
                class_ids.len(),
                features.nrows()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix has non-finite entries".into()));
        }
        Ok(Self { sample_ids, class_ids, features })
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    /// Distinct class ids in lexicographic order.
    pub fn classes(&self) -> Vec<String> {
        self.class_ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Index of each sample's class within `order`.
    pub fn class_indices(&self, order: &[String]) -> Result<Vec<usize>> {
        self.class_ids
            .iter()
            .map(|c| {
                order
                    .iter()
                    .position(|o| o == c)
                    .ok_or_else(|| Error::Dimension(format!("class {c:?} missing from the association matrix")))
            })
            .collect()
    }

    /// Samples whose class satisfies `keep`, in original order.
    pub fn filter(&self, keep: impl Fn(&str) -> bool) -> FeatureSet {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(&self.class_ids[i])).collect();
        FeatureSet {
            sample_ids: idx.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            class_ids: idx.iter().map(|&i| self.class_ids[i].clone()).collect(),
            features: self.features.select(Axis(0), &idx),
        }
    }

    /// Header `sample_id,class_id,f1,...,fF`; values written to round-trip exactly.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["sample_id".to_string(), "class_id".to_string()];
        header.extend((1..=self.features.ncols()).map(|j| format!("f{j}")));
        w.write_record(&header).map_err(csv_err)?;
        for (i, row) in self.features.rows().into_iter().enumerate() {
            let mut rec = vec![self.sample_ids[i].clone(), self.class_ids[i].clone()];
            rec.extend(row.iter().map(|v| format!("{v}")));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(csv_err)?.clone();
        if header.len() < 3 || &header[0] != "sample_id" || &header[1] != "class_id" {
            return Err(Error::Format("feature CSV must start with sample_id,class_id and have features".into()));
        }
        let width = header.len() - 2;
        let (mut samples, mut classes, mut data) = (Vec::new(), Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != header.len() {
                return Err(Error::Format(format!("feature row {} has {} fields", samples.len() + 1, rec.len())));
            }
            samples.push(rec[0].to_string());
            classes.push(rec[1].to_string());
            for v in rec.iter().skip(2) {
                data.push(parse_f64(v)?);
            }
        }
        let features = Array2::from_shape_vec((samples.len(), width), data).map_err(|e| Error::Format(e.to_string()))?;
        Self::new(samples, classes, features)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new("features", 0);
        for (s, k) in self.sample_ids.iter().zip(&self.class_ids) {
            c.labels.push(("sample".into(), format!("{s}\t{k}")));
        }
        c.tensors.push(("features".into(), self.features.clone()));
        c
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        if c.kind != "features" {
            return Err(Error::Format(format!("expected a features file, found {}", c.kind)));
        }
        let (mut samples, mut classes) = (Vec::new(), Vec::new());
        for entry in c.labels("sample") {
            let (s, k) = entry.split_once('\t').ok_or_else(|| Error::Format(format!("bad sample label {entry:?}")))?;
            samples.push(s.to_string());
            classes.push(k.to_string());
        }
        Self::new(samples, classes, c.tensor("features")?.clone())
    }

    /// Reads either format, recognising the binary one by its header line.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        if bytes.starts_with(b"attrmine-checkpoint") {
            Self::from_checkpoint(&Checkpoint::read(bytes.as_slice())?)
        } else {
            Self::read_csv(bytes.as_slice())
        }
    }
}
