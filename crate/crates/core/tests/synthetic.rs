//! Training and recovery checks on synthetic data with known generative structure.

use attrmine_core::corpus::build_dictionary;
use attrmine_core::eval::attribute_ap_auc;
use attrmine_core::neural::{
    attribute_network, attribute_targets, predict_attributes, threshold_associations, train_attribute_model,
    train_joint, Activation, Calibration, DenseNetwork, JointModel, TrainConfig,
};
use attrmine_core::synth::{balanced_labels, planted_corpus, AttributeWorld};
use attrmine_core::topics::{fit_lda, rank_topics, LdaParams};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn lda_recovers_planted_topics() {
    let corpus = planted_corpus(3, 100, 200, 100, false, 23);
    let dict = build_dictionary(&corpus.docs, 1, 1.0).unwrap();
    let params = LdaParams { n_topics: 3, alpha: 0.1, beta: 0.01, iters: 300, seed: 2 };
    let model = fit_lda(&corpus.docs, &dict, &params).unwrap();
    let best = permutations(3)
        .into_iter()
        .map(|p| (0..3).map(|k| cosine(&corpus.topics.row(k).to_vec(), &model.phi.row(p[k]).to_vec())).sum::<f64>() / 3.0)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(best > 0.8, "mean matched cosine {best}");
}

#[test]
fn lda_recovers_planted_topics_and_flags_background() {
    let corpus = planted_corpus(3, 100, 200, 100, true, 17);
    let dict = build_dictionary(&corpus.docs, 1, 1.0).unwrap();
    assert_eq!(dict.words(), corpus.words.as_slice());
    let params = LdaParams { n_topics: 4, alpha: 0.1, beta: 0.01, iters: 300, seed: 5 };
    let model = fit_lda(&corpus.docs, &dict, &params).unwrap();
    let truth: Vec<Vec<f64>> = corpus.topics.rows().into_iter().map(|r| r.to_vec()).collect();
    let learned: Vec<Vec<f64>> = model.phi.rows().into_iter().map(|r| r.to_vec()).collect();
    let (best, perm) = permutations(4)
        .into_iter()
        .map(|p| {
            let s: f64 = (0..3).map(|k| cosine(&truth[k], &learned[p[k]])).sum::<f64>() / 3.0;
            (s, p)
        })
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    assert!(best > 0.8, "mean matched cosine {best}");
    let background = perm[3];
    let ranking = rank_topics(&model, 0.25).unwrap();
    assert_eq!(ranking.insignificant, vec![background], "significance {:?}", ranking.significance);
}

struct Split {
    x: Array2<f64>,
    y: Vec<usize>,
}

fn world_data(world: &AttributeWorld, classes: usize, per_class: usize, seed: u64) -> Split {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = balanced_labels(classes, per_class, &mut rng);
    Split { x: world.sample(&y, &mut rng), y }
}

fn joint_model(world: &AttributeWorld, classes: usize, hidden: usize, seed: u64) -> JointModel {
    let prior = world.associations(&(0..classes).collect::<Vec<_>>());
    let backbone = DenseNetwork::new(
        &[world.mixing.ncols(), hidden, prior.n_attributes()],
        &[Activation::Rectifier, Activation::Sigmoid],
        seed,
    )
    .unwrap();
    JointModel::new(backbone, prior, 1.0, 0.0, seed + 1).unwrap()
}

fn accuracy(model: &JointModel, data: &Split) -> f64 {
    let p = model.class_probabilities(&data.x).unwrap();
    let hits = p
        .rows()
        .into_iter()
        .zip(&data.y)
        .filter(|(row, &y)| {
            let best = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            best == y
        })
        .count();
    hits as f64 / data.y.len() as f64
}

fn joint_config() -> TrainConfig {
    TrainConfig { learning_rate: 0.01, epochs: 40, batch_size: 32, seed: 9, ..Default::default() }
}

#[test]
fn joint_training_separates_classes() {
    let world = AttributeWorld::new(8, 12, 20, 0.3, 1).unwrap();
    let data = world_data(&world, 8, 40, 2);
    let model = joint_model(&world, 8, 32, 3);
    let (trained, report) = train_joint(&model, &data.x, &data.y, &joint_config(), Calibration::BOTH).unwrap();
    let acc = accuracy(&trained, &data);
    assert!(acc > 0.9, "training accuracy {acc}");
    assert!(report.final_loss() <= report.initial_loss);
}

fn sign_flip_fraction(model: &JointModel) -> f64 {
    let m_star = threshold_associations(model, 0.0);
    let flips = m_star.values.iter().zip(model.prior.values.iter()).filter(|(a, b)| a != b).count();
    flips as f64 / m_star.values.len() as f64
}

#[test]
fn larger_prior_weight_flips_fewer_signs() {
    let world = AttributeWorld::new(8, 12, 20, 0.3, 4).unwrap();
    let data = world_data(&world, 8, 40, 5);
    let base = joint_model(&world, 8, 32, 6);
    let cfg = joint_config();
    let mut fractions = Vec::new();
    for beta2 in [0.0, 0.01, 1.0, 100.0] {
        let mut m = base.clone();
        m.beta2 = beta2;
        let (trained, _) = train_joint(&m, &data.x, &data.y, &cfg, Calibration { beta1: true, beta2: false }).unwrap();
        fractions.push(sign_flip_fraction(&trained));
    }
    assert!(fractions.windows(2).all(|w| w[1] <= w[0]), "{fractions:?}");
    assert_eq!(*fractions.last().unwrap(), 0.0);
}

#[test]
fn attribute_model_separates_attributes() {
    let world = AttributeWorld::new(10, 12, 20, 0.3, 7).unwrap();
    let data = world_data(&world, 10, 30, 8);
    let assoc = world.associations(&(0..10).collect::<Vec<_>>());
    let targets = attribute_targets(&assoc, &data.y).unwrap();
    let backbone = DenseNetwork::new(&[20, 32, 12], &[Activation::Rectifier, Activation::Sigmoid], 1).unwrap();
    let net = attribute_network(&backbone, 32, 2, false).unwrap();
    let cfg = TrainConfig { learning_rate: 0.01, epochs: 60, batch_size: 32, seed: 3, ..Default::default() };
    let (trained, _) = train_attribute_model(&net, &data.x, &targets, &cfg).unwrap();
    let scores = predict_attributes(&trained, &data.x).unwrap();
    let labels = targets.mapv(|v| v > 0.5);
    for (j, r) in attribute_ap_auc(&scores, &labels).unwrap().into_iter().enumerate() {
        let r = r.unwrap();
        assert!(r.auc > 0.95, "attribute {j}: AUC {}", r.auc);
    }
}
