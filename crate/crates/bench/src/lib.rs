//! Fixtures for the pipeline benchmarks.

use attrmine_core::assoc::AssociationMatrix;
use attrmine_core::selection::SelectionProblem;
use attrmine_core::synth::{balanced_labels, AttributeWorld};
use attrmine_core::{Activation, DenseNetwork, JointModel};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random sparse embedding over `n_classes × n_words` with `n_topics` topics
/// and costs in [1, 3).
pub fn selection_problem(n_classes: usize, n_words: usize, n_topics: usize, seed: u64) -> SelectionProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let embedding = Array2::from_shape_fn((n_classes, n_words), |_| {
        if rng.random_bool(0.7) {
            0.0
        } else {
            rng.random_range(0.0..2.0)
        }
    });
    let word_topics = (0..n_words).map(|_| (rng.random_range(0..n_topics), rng.random_range(0.0..0.05))).collect();
    let costs = (0..n_words).map(|_| rng.random_range(1.0..3.0)).collect();
    SelectionProblem::new(embedding, word_topics, n_topics, costs, 0.001).expect("connected class graph")
}

/// Features, labels and an untrained joint model for `n_classes` synthetic
/// classes with `per_class` samples each.
pub struct JointFixture {
    pub x: Array2<f64>,
    pub labels: Vec<usize>,
    pub model: JointModel,
}

pub fn joint_fixture(n_classes: usize, per_class: usize, seed: u64) -> JointFixture {
    let world = AttributeWorld::new(n_classes, 24, 32, 0.3, seed).expect("world");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = balanced_labels(n_classes, per_class, &mut rng);
    let x = world.sample(&labels, &mut rng);
    let prior: AssociationMatrix = world.associations(&(0..n_classes).collect::<Vec<_>>());
    let backbone = DenseNetwork::new(&[32, 64, 24], &[Activation::Rectifier, Activation::Sigmoid], seed).expect("network");
    let model = JointModel::new(backbone, prior, 1.0, 0.01, seed).expect("model");
    JointFixture { x, labels, model }
}
