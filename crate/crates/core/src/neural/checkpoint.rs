use std::io::{BufRead, BufReader, Read, Write};

use ndarray::{Array1, Array2};

use super::joint::JointModel;
use super::network::{Activation, DenseNetwork, Layer};
use crate::assoc::{AssociationMatrix, AssociationMode};
use crate::error::{Error, Result};

const MAGIC: &str = "attrmine-checkpoint 1";

/// Named matrices behind a line-oriented text header, payload in
/// little-endian f64, row-major, in header order.
///
/// ```text
/// attrmine-checkpoint 1
/// kind dense
/// seed 42
/// meta layer0.activation rectifier
/// label class zebra
/// tensor layer0.weight 20 32
/// end
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub seed: u64,
    pub meta: Vec<(String, String)>,
    pub labels: Vec<(String, String)>,
    pub tensors: Vec<(String, Array2<f64>)>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn single_line(s: &str) -> Result<&str> {
    if s.contains(['\n', '\r']) || s.is_empty() {
        return Err(Error::InvalidArgument(format!("checkpoint field {s:?} must be a non-empty single line")));
    }
    Ok(s)
}

fn single_token(s: &str) -> Result<&str> {
    if single_line(s)?.contains(char::is_whitespace) {
        return Err(Error::InvalidArgument(format!("checkpoint key {s:?} must not contain whitespace")));
    }
    Ok(s)
}

impl Checkpoint {
    pub fn new(kind: &str, seed: u64) -> Self {
        Self { kind: kind.to_string(), seed, meta: Vec::new(), labels: Vec::new(), tensors: Vec::new() }
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| bad(format!("checkpoint lacks meta entry {key:?}")))
    }

    pub fn labels(&self, group: &str) -> Vec<&str> {
        self.labels.iter().filter(|(g, _)| g == group).map(|(_, v)| v.as_str()).collect()
    }

    pub fn tensor(&self, name: &str) -> Result<&Array2<f64>> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| bad(format!("checkpoint lacks tensor {name:?}")))
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = format!("{MAGIC}\nkind {}\nseed {}\n", single_token(&self.kind)?, self.seed);
        for (k, v) in &self.meta {
            header += &format!("meta {} {}\n", single_token(k)?, single_line(v)?);
        }
        for (g, v) in &self.labels {
            header += &format!("label {} {}\n", single_token(g)?, single_line(v)?);
        }
        for (name, t) in &self.tensors {
            header += &format!("tensor {} {} {}\n", single_token(name)?, t.nrows(), t.ncols());
        }
        header += "end\n";
        out.write_all(header.as_bytes())?;
        for (_, t) in &self.tensors {
            for v in t.iter() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut line = String::new();
        let mut next_line = |reader: &mut BufReader<R>| -> Result<String> {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                return Err(bad("checkpoint header ends before `end`"));
            }
            Ok(line.trim_end_matches('\n').to_string())
        };
        if next_line(&mut reader)? != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let kind = next_line(&mut reader)?
            .strip_prefix("kind ")
            .ok_or_else(|| bad("expected `kind` line"))?
            .to_string();
        let seed = next_line(&mut reader)?
            .strip_prefix("seed ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("expected `seed` line"))?;
        let mut ckpt = Checkpoint::new(&kind, seed);
        let mut shapes = Vec::new();
        loop {
            let l = next_line(&mut reader)?;
            if l == "end" {
                break;
            }
            let (tag, rest) = l.split_once(' ').ok_or_else(|| bad(format!("bad header line {l:?}")))?;
            match tag {
                "meta" | "label" => {
                    let (k, v) = rest.split_once(' ').ok_or_else(|| bad(format!("bad header line {l:?}")))?;
                    let entry = (k.to_string(), v.to_string());
                    if tag == "meta" {
                        ckpt.meta.push(entry);
                    } else {
                        ckpt.labels.push(entry);
                    }
                }
                "tensor" => {
                    let parts: Vec<&str> = rest.split(' ').collect();
                    let dims = match parts.as_slice() {
                        [name, r, c] => r.parse::<usize>().ok().zip(c.parse::<usize>().ok()).map(|d| (name.to_string(), d)),
                        _ => None,
                    };
                    shapes.push(dims.ok_or_else(|| bad(format!("bad tensor line {l:?}")))?);
                }
                _ => return Err(bad(format!("unknown header line {l:?}"))),
            }
        }
        let mut buf = [0u8; 8];
        for (name, (r, c)) in shapes {
            let mut data = Vec::with_capacity(r * c);
            for _ in 0..r * c {
                reader.read_exact(&mut buf).map_err(|_| bad(format!("payload truncated in tensor {name:?}")))?;
                data.push(f64::from_le_bytes(buf));
            }
            let t = Array2::from_shape_vec((r, c), data).map_err(|e| bad(e.to_string()))?;
            ckpt.tensors.push((name, t));
        }
        if reader.read(&mut buf)? != 0 {
            return Err(bad("trailing bytes after checkpoint payload"));
        }
        Ok(ckpt)
    }

    fn push_network(&mut self, prefix: &str, net: &DenseNetwork) {
        self.meta.push((format!("{prefix}layers"), net.layers.len().to_string()));
        for (l, layer) in net.layers.iter().enumerate() {
            self.meta.push((format!("{prefix}layer{l}.activation"), layer.activation.name().into()));
            self.tensors.push((format!("{prefix}layer{l}.weight"), layer.weights.clone()));
            self.tensors.push((format!("{prefix}layer{l}.bias"), layer.bias.clone().insert_axis(ndarray::Axis(0))));
        }
    }

    fn take_network(&self, prefix: &str) -> Result<DenseNetwork> {
        let n: usize = self.meta(&format!("{prefix}layers"))?.parse().map_err(|_| bad("bad layer count"))?;
        let mut layers = Vec::with_capacity(n);
        for l in 0..n {
            let activation = Activation::parse(self.meta(&format!("{prefix}layer{l}.activation"))?)?;
            let weights = self.tensor(&format!("{prefix}layer{l}.weight"))?.clone();
            let bias = self.tensor(&format!("{prefix}layer{l}.bias"))?;
            if bias.nrows() != 1 {
                return Err(bad(format!("bias of layer {l} is not a row vector")));
            }
            layers.push(Layer { weights, bias: Array1::from_iter(bias.iter().copied()), activation });
        }
        DenseNetwork::from_layers(layers, self.seed)
    }

    fn check_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(bad(format!("expected a {kind} checkpoint, found {}", self.kind)));
        }
        Ok(())
    }

    pub fn from_network(net: &DenseNetwork) -> Self {
        let mut c = Checkpoint::new("dense", net.seed);
        c.push_network("", net);
        c
    }

    pub fn to_network(&self) -> Result<DenseNetwork> {
        self.check_kind("dense")?;
        self.take_network("")
    }

    pub fn from_joint(model: &JointModel) -> Result<Self> {
        let mut c = Checkpoint::new("joint", model.backbone.seed);
        c.push_network("backbone.", &model.backbone);
        c.meta.push(("beta1".into(), format!("{}", model.beta1)));
        c.meta.push(("beta2".into(), format!("{}", model.beta2)));
        for id in &model.prior.class_ids {
            c.labels.push(("class".into(), single_line(id)?.to_string()));
        }
        for a in &model.prior.attributes {
            c.labels.push(("attribute".into(), single_line(a)?.to_string()));
        }
        c.tensors.push(("assoc".into(), model.assoc.clone()));
        c.tensors.push(("prior".into(), model.prior.values.clone()));
        Ok(c)
    }

    pub fn to_joint(&self) -> Result<JointModel> {
        self.check_kind("joint")?;
        let backbone = self.take_network("backbone.")?;
        let beta = |k: &str| self.meta(k)?.parse::<f64>().map_err(|_| bad(format!("bad {k}")));
        let prior = AssociationMatrix::new(
            self.tensor("prior")?.clone(),
            AssociationMode::Binary,
            self.labels("class").into_iter().map(String::from).collect(),
            self.labels("attribute").into_iter().map(String::from).collect(),
        )?;
        JointModel::from_parts(backbone, self.tensor("assoc")?.clone(), prior, beta("beta1")?, beta("beta2")?)
    }
}
