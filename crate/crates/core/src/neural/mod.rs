//! Dense networks with manual backpropagation and Adam: the joint
//! class + attribute model anchored to the text prior, and the attribute
//! predictor trained on the thresholded associations.

mod adam;
mod attribute;
mod checkpoint;
mod data;
mod joint;
mod network;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use adam::{AdamParams, Moments};
pub use attribute::{
    attribute_gradients, attribute_loss, attribute_network, attribute_targets, predict_attributes,
    train_attribute_model,
};
pub use checkpoint::Checkpoint;
pub use data::FeatureSet;
pub use joint::{
    joint_gradients, joint_loss, threshold_associations, train_joint, Calibration, JointGradients, JointModel,
    LossTerms,
};
pub use network::{
    bce_grad, bce_with_logits, sigmoid, softmax, softmax_cross_entropy, Activation, DenseNetwork, Forward, Layer,
    LayerGrad,
};

pub const DEFAULT_LEARNING_RATE: f64 = 0.001;
pub const DEFAULT_WEIGHT_DECAY: f64 = 5e-4;
pub const DEFAULT_TAU: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: DEFAULT_LEARNING_RATE,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            epochs: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be nonnegative");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam moment decays must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamParams {
        AdamParams {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.epsilon,
            weight_decay: self.weight_decay,
        }
    }
}

/// Full-dataset losses recorded during training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub initial_loss: f64,
    /// Loss after each epoch.
    pub epoch_losses: Vec<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(self.initial_loss)
    }
}

pub(crate) fn check_loss(loss: f64, when: &str) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite(format!("training loss became {loss} {when}")))
    }
}

/// Shuffled mini-batches for one epoch.
pub(crate) fn epoch_batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

pub(crate) fn training_rng(config: &TrainConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(config.seed)
}
