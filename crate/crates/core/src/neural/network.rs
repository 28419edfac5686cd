use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Rectifier,
    Sigmoid,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Rectifier => "rectifier",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Activation::Identity),
            "rectifier" => Ok(Activation::Rectifier),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::Format(format!("unknown activation {other:?}"))),
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Rectifier => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Rectifier => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

/// Logistic function, kept strictly inside (0, 1).
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 { 1.0 / (1.0 + (-z).exp()) } else { z.exp() / (1.0 + z.exp()) };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// inputs × outputs.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    /// Glorot-uniform weights, zero bias.
    pub fn init(n_in: usize, n_out: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        Self {
            weights: Array2::from_shape_fn((n_in, n_out), |_| rng.random_range(-limit..=limit)),
            bias: Array1::zeros(n_out),
            activation,
        }
    }

    pub fn n_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_out(&self) -> usize {
        self.weights.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    pub layers: Vec<Layer>,
    pub seed: u64,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// `outputs[0]` is the input batch; `outputs[l + 1]` the output of layer `l`.
    pub outputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pub pre: Vec<Array2<f64>>,
}

impl Forward {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().expect("forward pass has an input")
    }

    pub fn logits(&self) -> &Array2<f64> {
        self.pre.last().expect("network has a layer")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseNetwork {
    /// `sizes` lists the input width followed by each layer's width.
    pub fn new(sizes: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::Dimension(format!(
                "{} sizes need {} activations, got {}",
                sizes.len(),
                sizes.len().saturating_sub(1),
                activations.len()
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidArgument("layer widths must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| Layer::init(w[0], w[1], act, &mut rng))
            .collect();
        Ok(Self { layers, seed })
    }

    pub fn from_layers(layers: Vec<Layer>, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Dimension("a network needs at least one layer".into()));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].n_out() != pair[1].n_in() {
                return Err(Error::Dimension(format!(
                    "layer {l} outputs {} but layer {} takes {}",
                    pair[0].n_out(),
                    l + 1,
                    pair[1].n_in()
                )));
            }
        }
        if layers.iter().any(|l| l.bias.len() != l.n_out()) {
            return Err(Error::Dimension("bias length differs from layer width".into()));
        }
        Ok(Self { layers, seed })
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().expect("non-empty").n_out()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<Forward> {
        if x.ncols() != self.n_inputs() {
            return Err(Error::Dimension(format!(
                "features have width {}, network expects {}",
                x.ncols(),
                self.n_inputs()
            )));
        }
        let mut outputs = vec![x.clone()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let z = outputs.last().unwrap().dot(&layer.weights) + &layer.bias;
            outputs.push(z.mapv(|v| layer.activation.apply(v)));
            pre.push(z);
        }
        Ok(Forward { outputs, pre })
    }

    /// Backpropagates `d_logits` (gradient of the loss with respect to the
    /// last layer's pre-activation). Returns per-layer gradients and the
    /// gradient with respect to the input batch.
    pub fn backward(&self, fwd: &Forward, d_logits: Array2<f64>) -> (Vec<LayerGrad>, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut dz = d_logits;
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &fwd.outputs[l];
            grads.push(LayerGrad { weights: input.t().dot(&dz), bias: dz.sum_axis(Axis(0)) });
            let mut d_input = dz.dot(&layer.weights.t());
            if l > 0 {
                let below = &self.layers[l - 1];
                d_input.zip_mut_with(&fwd.outputs[l], |d, &a| *d *= below.activation.derivative(a));
            }
            dz = d_input;
        }
        grads.reverse();
        (grads, dz)
    }
}

/// Mean binary cross-entropy over all entries, from logits.
pub fn bce_with_logits(logits: &Array2<f64>, targets: &Array2<f64>) -> f64 {
    let n = logits.len() as f64;
    logits
        .iter()
        .zip(targets.iter())
        .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
        .sum::<f64>()
        / n
}

/// Gradient of [`bce_with_logits`] with respect to the logits.
pub fn bce_grad(probs: &Array2<f64>, targets: &Array2<f64>) -> Array2<f64> {
    let n = probs.len() as f64;
    (probs - targets) / n
}

/// Row-wise softmax.
pub fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let z = row.sum();
        row.mapv_inplace(|v| v / z);
    }
    out
}

/// Mean softmax cross-entropy, from logits.
pub fn softmax_cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> f64 {
    let n = logits.nrows() as f64;
    logits
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(row, &y)| {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - row[y]
        })
        .sum::<f64>()
        / n
}
