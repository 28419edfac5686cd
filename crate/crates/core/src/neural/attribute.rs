use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::Moments;
use super::network::{bce_grad, bce_with_logits, Activation, DenseNetwork, Layer, LayerGrad};
use super::{check_loss, epoch_batches, training_rng, TrainConfig, TrainReport};
use crate::assoc::AssociationMatrix;
use crate::error::{ensure_dims, Error, Result};

/// Per-sample attribute labels: 1 where the sample's class has the attribute, 0 elsewhere.
pub fn attribute_targets(assoc: &AssociationMatrix, labels: &[usize]) -> Result<Array2<f64>> {
    let n_attr = assoc.n_attributes();
    let mut out = Array2::zeros((labels.len(), n_attr));
    for (i, &c) in labels.iter().enumerate() {
        if c >= assoc.n_classes() {
            return Err(Error::Dimension(format!("class label {c} out of range for {} classes", assoc.n_classes())));
        }
        for j in 0..n_attr {
            if assoc.is_active(c, j) {
                out[[i, j]] = 1.0;
            }
        }
    }
    Ok(out)
}

/// Attribute predictor derived from a joint backbone: the backbone's hidden
/// layers, one extra rectifier layer of width `extra_hidden`, and a fresh
/// sigmoid output. With `warm_start` the hidden layers keep the backbone's
/// weights; otherwise they are re-drawn.
pub fn attribute_network(backbone: &DenseNetwork, extra_hidden: usize, seed: u64, warm_start: bool) -> Result<DenseNetwork> {
    if extra_hidden == 0 {
        return Err(Error::InvalidArgument("extra hidden layer must have positive width".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden = &backbone.layers[..backbone.layers.len() - 1];
    let mut layers: Vec<Layer> = if warm_start {
        hidden.to_vec()
    } else {
        hidden.iter().map(|l| Layer::init(l.n_in(), l.n_out(), l.activation, &mut rng)).collect()
    };
    let width = layers.last().map_or(backbone.n_inputs(), Layer::n_out);
    layers.push(Layer::init(width, extra_hidden, Activation::Rectifier, &mut rng));
    layers.push(Layer::init(extra_hidden, backbone.n_outputs(), Activation::Sigmoid, &mut rng));
    DenseNetwork::from_layers(layers, seed)
}

fn check(network: &DenseNetwork, x: &Array2<f64>, targets: &Array2<f64>) -> Result<()> {
    ensure_dims(targets.dim() == (x.nrows(), network.n_outputs()), || {
        format!("attribute labels are {:?}, expected {:?}", targets.dim(), (x.nrows(), network.n_outputs()))
    })?;
    if x.nrows() == 0 {
        return Err(Error::Empty("no samples".into()));
    }
    Ok(())
}

/// Mean binary cross-entropy over samples × attributes.
pub fn attribute_loss(network: &DenseNetwork, x: &Array2<f64>, targets: &Array2<f64>) -> Result<f64> {
    check(network, x, targets)?;
    let fwd = network.forward(x)?;
    Ok(bce_with_logits(fwd.logits(), targets))
}

pub fn attribute_gradients(
    network: &DenseNetwork,
    x: &Array2<f64>,
    targets: &Array2<f64>,
) -> Result<(f64, Vec<LayerGrad>)> {
    check(network, x, targets)?;
    let fwd = network.forward(x)?;
    let loss = bce_with_logits(fwd.logits(), targets);
    let (grads, _) = network.backward(&fwd, bce_grad(fwd.output(), targets));
    Ok((loss, grads))
}

/// Mini-batch Adam on the attribute loss, weight decay on every layer.
pub fn train_attribute_model(
    network: &DenseNetwork,
    x: &Array2<f64>,
    targets: &Array2<f64>,
    config: &TrainConfig,
) -> Result<(DenseNetwork, TrainReport)> {
    config.validate()?;
    check(network, x, targets)?;
    if network.layers.last().map(|l| l.activation) != Some(Activation::Sigmoid) {
        return Err(Error::InvalidArgument("the attribute network must end in a sigmoid layer".into()));
    }
    let mut net = network.clone();
    let mut rng = training_rng(config);
    let hp = config.adam();
    let initial_loss = check_loss(attribute_loss(&net, x, targets)?, "before training")?;
    let mut moments: Vec<(Moments<_>, Moments<_>)> =
        net.layers.iter().map(|l| (Moments::zeros_like(&l.weights), Moments::zeros_like(&l.bias))).collect();
    let mut t = 0u64;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        for batch in epoch_batches(x.nrows(), config.batch_size, &mut rng) {
            let (loss, grads) = attribute_gradients(&net, &x.select(Axis(0), &batch), &targets.select(Axis(0), &batch))?;
            check_loss(loss, &format!("in epoch {epoch}"))?;
            t += 1;
            for ((layer, g), (mw, mb)) in net.layers.iter_mut().zip(&grads).zip(&mut moments) {
                mw.step(&hp, t, &mut layer.weights, &g.weights, true);
                mb.step(&hp, t, &mut layer.bias, &g.bias, true);
            }
            if !net.is_finite() {
                return Err(Error::NonFinite(format!("parameters diverged in epoch {epoch}")));
            }
        }
        let loss = check_loss(attribute_loss(&net, x, targets)?, &format!("after epoch {epoch}"))?;
        log::debug!("attribute epoch {epoch}: loss {loss}");
        epoch_losses.push(loss);
    }
    Ok((net, TrainReport { initial_loss, epoch_losses, beta1: None, beta2: None }))
}

/// Sigmoid attribute scores, samples × attributes, each in (0, 1).
pub fn predict_attributes(network: &DenseNetwork, x: &Array2<f64>) -> Result<Array2<f64>> {
    Ok(network.forward(x)?.outputs.pop().expect("forward pass has an output"))
}
