use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::Moments;
use super::attribute::attribute_targets;
use super::network::{bce_grad, bce_with_logits, softmax, softmax_cross_entropy, Activation, DenseNetwork, LayerGrad};
use super::{check_loss, epoch_batches, training_rng, TrainConfig, TrainReport};
use crate::assoc::{AssociationMatrix, AssociationMode};
use crate::error::{ensure_dims, Error, Result};

/// Backbone ending in a sigmoid attribute layer, followed by the bias-free
/// class × attribute layer `assoc` that is pulled towards `prior`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointModel {
    pub backbone: DenseNetwork,
    /// classes × attributes.
    pub assoc: Array2<f64>,
    pub prior: AssociationMatrix,
    pub beta1: f64,
    pub beta2: f64,
}

impl JointModel {
    /// Association layer drawn Glorot-uniform from `seed`.
    pub fn new(backbone: DenseNetwork, prior: AssociationMatrix, beta1: f64, beta2: f64, seed: u64) -> Result<Self> {
        let (c, a) = prior.values.dim();
        let limit = (6.0 / (a + c) as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let assoc = Array2::from_shape_fn((c, a), |_| rng.random_range(-limit..=limit));
        Self::from_parts(backbone, assoc, prior, beta1, beta2)
    }

    pub fn from_parts(
        backbone: DenseNetwork,
        assoc: Array2<f64>,
        prior: AssociationMatrix,
        beta1: f64,
        beta2: f64,
    ) -> Result<Self> {
        if prior.mode != AssociationMode::Binary {
            return Err(Error::InvalidArgument("the joint model needs a signed prior".into()));
        }
        ensure_dims(assoc.dim() == prior.values.dim(), || {
            format!("association layer {:?} differs from prior {:?}", assoc.dim(), prior.values.dim())
        })?;
        ensure_dims(backbone.n_outputs() == prior.n_attributes(), || {
            format!("backbone emits {} attributes, prior has {}", backbone.n_outputs(), prior.n_attributes())
        })?;
        if backbone.layers.last().map(|l| l.activation) != Some(Activation::Sigmoid) {
            return Err(Error::InvalidArgument("the backbone must end in a sigmoid layer".into()));
        }
        if !(beta1 >= 0.0 && beta2 >= 0.0) {
            return Err(Error::InvalidArgument("loss weights must be nonnegative".into()));
        }
        Ok(Self { backbone, assoc, prior, beta1, beta2 })
    }

    pub fn n_classes(&self) -> usize {
        self.assoc.nrows()
    }

    pub fn n_attributes(&self) -> usize {
        self.assoc.ncols()
    }

    /// Softmax class posteriors, samples × classes.
    pub fn class_probabilities(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let fwd = self.backbone.forward(x)?;
        Ok(softmax(&fwd.output().dot(&self.assoc.t())))
    }

    pub fn is_finite(&self) -> bool {
        self.backbone.is_finite() && self.assoc.iter().all(|v| v.is_finite())
    }

    /// Σ |M − M^l| entrywise.
    pub fn prior_distance(&self) -> f64 {
        self.assoc.iter().zip(self.prior.values.iter()).map(|(m, l)| (m - l).abs()).sum()
    }
}

/// The three raw loss terms and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub class: f64,
    pub attribute: f64,
    pub prior: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointGradients {
    pub backbone: Vec<LayerGrad>,
    pub assoc: Array2<f64>,
}

fn check_batch(model: &JointModel, x: &Array2<f64>, labels: &[usize], targets: &Array2<f64>) -> Result<()> {
    ensure_dims(x.nrows() == labels.len(), || format!("{} samples but {} labels", x.nrows(), labels.len()))?;
    ensure_dims(targets.dim() == (x.nrows(), model.n_attributes()), || {
        format!("attribute labels are {:?}, expected {:?}", targets.dim(), (x.nrows(), model.n_attributes()))
    })?;
    if x.nrows() == 0 {
        return Err(Error::Empty("no samples".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= model.n_classes()) {
        return Err(Error::Dimension(format!("class label {bad} out of range for {} classes", model.n_classes())));
    }
    Ok(())
}

/// `L_c + β1·L_a + β2·Σ|M − M^l|`.
pub fn joint_loss(model: &JointModel, x: &Array2<f64>, labels: &[usize], targets: &Array2<f64>) -> Result<LossTerms> {
    check_batch(model, x, labels, targets)?;
    let fwd = model.backbone.forward(x)?;
    let class = softmax_cross_entropy(&fwd.output().dot(&model.assoc.t()), labels);
    let attribute = bce_with_logits(fwd.logits(), targets);
    let prior = model.prior_distance();
    Ok(LossTerms { class, attribute, prior, total: class + model.beta1 * attribute + model.beta2 * prior })
}

/// Loss terms and the gradient of the total with respect to every parameter.
/// The L1 subgradient is 0 where `M = M^l`.
pub fn joint_gradients(
    model: &JointModel,
    x: &Array2<f64>,
    labels: &[usize],
    targets: &Array2<f64>,
) -> Result<(LossTerms, JointGradients)> {
    check_batch(model, x, labels, targets)?;
    let n = x.nrows() as f64;
    let fwd = model.backbone.forward(x)?;
    let a = fwd.output();
    let scores = a.dot(&model.assoc.t());
    let class = softmax_cross_entropy(&scores, labels);
    let attribute = bce_with_logits(fwd.logits(), targets);
    let prior = model.prior_distance();
    let total = class + model.beta1 * attribute + model.beta2 * prior;

    let mut d_scores = softmax(&scores);
    for (mut row, &y) in d_scores.rows_mut().into_iter().zip(labels) {
        row[y] -= 1.0;
    }
    d_scores /= n;
    let mut d_assoc = d_scores.t().dot(a);
    for ((g, m), l) in d_assoc.iter_mut().zip(model.assoc.iter()).zip(model.prior.values.iter()) {
        let d = m - l;
        if d != 0.0 {
            *g += model.beta2 * d.signum();
        }
    }
    let mut d_logits = d_scores.dot(&model.assoc);
    d_logits.zip_mut_with(a, |g, &p| *g *= p * (1.0 - p));
    d_logits.scaled_add(model.beta1, &bce_grad(a, targets));
    let (backbone, _) = model.backbone.backward(&fwd, d_logits);
    Ok((LossTerms { class, attribute, prior, total }, JointGradients { backbone, assoc: d_assoc }))
}

/// Which loss weights to set from the first training batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Calibration {
    pub beta1: bool,
    pub beta2: bool,
}

impl Calibration {
    pub const BOTH: Calibration = Calibration { beta1: true, beta2: true };
    pub const NONE: Calibration = Calibration { beta1: false, beta2: false };
}

/// Mini-batch Adam on the joint loss. Weight decay applies to the backbone
/// only; the association layer is held by the L1 prior.
pub fn train_joint(
    model: &JointModel,
    x: &Array2<f64>,
    labels: &[usize],
    config: &TrainConfig,
    calibration: Calibration,
) -> Result<(JointModel, TrainReport)> {
    config.validate()?;
    let targets = attribute_targets(&model.prior, labels)?;
    check_batch(model, x, labels, &targets)?;
    let mut model = model.clone();
    let mut rng = training_rng(config);
    let hp = config.adam();

    let mut batches = epoch_batches(x.nrows(), config.batch_size, &mut rng);
    if calibration.beta1 || calibration.beta2 {
        let first = &batches[0];
        let raw = joint_loss(&model, &x.select(Axis(0), first), &select(labels, first), &targets.select(Axis(0), first))?;
        if calibration.beta1 {
            if raw.attribute > 0.0 {
                model.beta1 = raw.class / raw.attribute;
            } else {
                log::warn!("attribute loss is zero on the first batch; keeping beta1 = {}", model.beta1);
            }
        }
        if calibration.beta2 {
            if raw.prior > 0.0 {
                model.beta2 = raw.class / raw.prior;
            } else {
                log::warn!("association layer equals the prior; keeping beta2 = {}", model.beta2);
            }
        }
        log::info!("calibrated beta1 = {}, beta2 = {}", model.beta1, model.beta2);
    }

    let initial_loss = check_loss(joint_loss(&model, x, labels, &targets)?.total, "before training")?;
    let mut layer_moments: Vec<(Moments<_>, Moments<_>)> =
        model.backbone.layers.iter().map(|l| (Moments::zeros_like(&l.weights), Moments::zeros_like(&l.bias))).collect();
    let mut assoc_moments = Moments::zeros_like(&model.assoc);
    let mut t = 0u64;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        if epoch > 0 {
            batches = epoch_batches(x.nrows(), config.batch_size, &mut rng);
        }
        for batch in &batches {
            let (terms, grads) =
                joint_gradients(&model, &x.select(Axis(0), batch), &select(labels, batch), &targets.select(Axis(0), batch))?;
            check_loss(terms.total, &format!("in epoch {epoch}"))?;
            t += 1;
            for ((layer, g), (mw, mb)) in model.backbone.layers.iter_mut().zip(&grads.backbone).zip(&mut layer_moments) {
                mw.step(&hp, t, &mut layer.weights, &g.weights, true);
                mb.step(&hp, t, &mut layer.bias, &g.bias, true);
            }
            assoc_moments.step(&hp, t, &mut model.assoc, &grads.assoc, false);
            if !model.is_finite() {
                return Err(Error::NonFinite(format!("parameters diverged in epoch {epoch}")));
            }
        }
        let loss = check_loss(joint_loss(&model, x, labels, &targets)?.total, &format!("after epoch {epoch}"))?;
        log::debug!("joint epoch {epoch}: loss {loss}");
        epoch_losses.push(loss);
    }
    let report = TrainReport {
        initial_loss,
        epoch_losses,
        beta1: Some(model.beta1),
        beta2: Some(model.beta2),
    };
    Ok((model, report))
}

pub(crate) fn select(labels: &[usize], idx: &[usize]) -> Vec<usize> {
    idx.iter().map(|&i| labels[i]).collect()
}

/// `+1` where `M > τ`, `−1` elsewhere.
pub fn threshold_associations(model: &JointModel, tau: f64) -> AssociationMatrix {
    AssociationMatrix {
        values: model.assoc.mapv(|m| if m > tau { 1.0 } else { -1.0 }),
        mode: AssociationMode::Binary,
        class_ids: model.prior.class_ids.clone(),
        attributes: model.prior.attributes.clone(),
    }
}
