//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria listed in `EXPECTED_FAILURES` are known not to hold for the
//! implemented objective; the run fails if any other criterion fails or if
//! a listed one unexpectedly passes.

mod support;

use std::cell::RefCell;
use std::time::Instant;

use attrmine_core::assoc::{AssociationMatrix, AssociationMode};
use attrmine_core::corpus::build_dictionary;
use attrmine_core::eval::{
    accuracy_topk, auc, average_precision, ndcg_at_k, ndcg_from_grades, saliency_scores, Annotation, Label,
    RelevanceMatrix,
};
use attrmine_core::neural::{
    attribute_gradients, attribute_loss, attribute_network, attribute_targets, joint_gradients, joint_loss,
    predict_attributes, threshold_associations, train_attribute_model, train_joint, Activation, Calibration,
    DenseNetwork, JointModel, Layer, TrainConfig,
};
use attrmine_core::selection::{select_vocabulary, SelectionProblem};
use attrmine_core::synth::{balanced_labels, planted_corpus, AttributeWorld};
use attrmine_core::topics::{fit_lda, rank_topics, LdaParams, DEFAULT_RHO};
use attrmine_core::zeroshot::{classify, classify_scores, fit_normalizer};
use attrmine_core::NormalizerSource;
use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use support::cli::{snapshot, Workspace};
use support::oracles;

const EXPECTED_FAILURES: &[u32] = &[1];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------------------
// Selection instances

struct Instance {
    embedding: Array2<f64>,
    word_topics: Vec<(usize, f64)>,
    n_topics: usize,
    costs: Vec<f64>,
}

impl Instance {
    fn random(rng: &mut ChaCha8Rng, n_classes: usize, n_words: usize, n_topics: usize, max_cost: f64) -> Self {
        let embedding = loop {
            let e = Array2::from_shape_fn((n_classes, n_words), |_| {
                if rng.random::<f64>() < 0.4 {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            });
            // Every class must differ from some other class on some word.
            let distinct = (0..n_classes).all(|i| (0..n_classes).any(|j| j != i && e.row(i) != e.row(j)));
            if distinct {
                break e;
            }
        };
        let word_topics = (0..n_words).map(|_| (rng.random_range(0..n_topics), rng.random_range(0.01..0.5))).collect();
        let costs = (0..n_words).map(|_| rng.random_range(1.0..=max_cost)).collect();
        Self { embedding, word_topics, n_topics, costs }
    }

    fn problem(&self, lambda: f64) -> SelectionProblem {
        SelectionProblem::new(self.embedding.clone(), self.word_topics.clone(), self.n_topics, self.costs.clone(), lambda)
            .expect("valid instance")
    }

    fn oracle_objective(&self, lambda: f64, set: &[usize]) -> f64 {
        oracles::entropy_rate(&self.embedding, set) + lambda * oracles::diversity(&self.word_topics, self.n_topics, set)
    }
}

fn with(set: &[usize], w: usize) -> Vec<usize> {
    let mut s = set.to_vec();
    s.push(w);
    s
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let tol = 1e-9;
    let (mut triples, mut mono_dis, mut mono_div, mut sub_dis, mut sub_div, mut mismatch) = (0, 0, 0, 0, 0, 0);
    let mut worst_mono_dis: f64 = 0.0;
    for _ in 0..120 {
        let n = rng.random_range(2..=8);
        let m = rng.random_range(2..=30);
        let k = rng.random_range(2..=5);
        let inst = Instance::random(&mut rng, n, m, k, 1.0);
        let dis_problem = inst.problem(0.0);
        let f_dis = |set: &[usize]| {
            let core = dis_problem.objective_of(set).expect("objective");
            let oracle = oracles::entropy_rate(&inst.embedding, set);
            (core, (core - oracle).abs() > 1e-9)
        };
        let f_div = |set: &[usize]| oracles::diversity(&inst.word_topics, inst.n_topics, set);
        for _ in 0..20 {
            let mut words: Vec<usize> = (0..m).collect();
            words.shuffle(&mut rng);
            let b = rng.random_range(0..m);
            let a = rng.random_range(0..=b);
            let (set_a, set_b, w) = (&words[..a], &words[..b], words[b]);
            triples += 1;
            let (fa, ea) = f_dis(set_a);
            let (fb, eb) = f_dis(set_b);
            let (faw, eaw) = f_dis(&with(set_a, w));
            let (fbw, ebw) = f_dis(&with(set_b, w));
            mismatch += [ea, eb, eaw, ebw].iter().filter(|&&e| e).count();
            if faw < fa - tol {
                mono_dis += 1;
                worst_mono_dis = worst_mono_dis.max(fa - faw);
            }
            if faw - fa < fbw - fb - tol {
                sub_dis += 1;
            }
            let (ga, gb) = (f_div(set_a), f_div(set_b));
            let (gaw, gbw) = (f_div(&with(set_a, w)), f_div(&with(set_b, w)));
            if gaw < ga - tol {
                mono_div += 1;
            }
            if gaw - ga < gbw - gb - tol {
                sub_div += 1;
            }
        }
    }
    let pass = mono_dis + mono_div + sub_dis + sub_div + mismatch == 0;
    outcome(
        pass,
        format!(
            "120 instances, {triples} triples; violations: F_dis monotone {mono_dis} (worst drop {worst_mono_dis:.3e}), \
             F_dis submodular {sub_dis}, F_div monotone {mono_div}, F_div submodular {sub_div}; oracle mismatches {mismatch}"
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let bound = 0.5 * (1.0 - (-1.0f64).exp());
    let mut ratios = Vec::new();
    let mut max_words = 0;
    for i in 0..60 {
        let n = rng.random_range(2..=6);
        let m = rng.random_range(6..=15);
        let k = rng.random_range(2..=4);
        let inst = Instance::random(&mut rng, n, m, k, 2.5);
        let lambda = [0.001, 0.1, 1.0][i % 3];
        let budget = rng.random_range(2.0..6.99);
        let greedy = select_vocabulary(&inst.problem(lambda), budget).expect("greedy");
        let f_greedy = inst.oracle_objective(lambda, &greedy.selected);
        let (f_opt, opt) = oracles::brute_force_optimum(m, &inst.costs, budget, |s| inst.oracle_objective(lambda, s));
        max_words = max_words.max(opt.len()).max(greedy.len());
        ratios.push(if f_opt > 0.0 { f_greedy / f_opt } else { 1.0 });
    }
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    outcome(
        min >= bound && mean >= 0.95 && max_words <= 6,
        format!("60 instances, at most {max_words} words; min ratio {min:.4} (bound {bound:.4}), mean ratio {mean:.4}"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut gain_err, mut stat_err, mut states, mut gains): (f64, f64, usize, usize) = (0.0, 0.0, 0, 0);
    for _ in 0..60 {
        let n = rng.random_range(2..=8);
        let m = rng.random_range(2..=20);
        let inst = Instance::random(&mut rng, n, m, 3, 1.0);
        let problem = inst.problem(0.0);
        let mut state = problem.empty_state();
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut rng);
        for step in 0..=m {
            states += 1;
            let mu = state.graph.stationary();
            let p = state.graph.transition_matrix();
            let mu_p = Array1::from(mu.clone()).dot(&p);
            for j in 0..n {
                stat_err = stat_err.max((mu_p[j] - mu[j]).abs());
            }
            let before = oracles::entropy_rate(&inst.embedding, &state.selected);
            for w in (0..m).filter(|&w| !state.contains(w)) {
                let after = oracles::entropy_rate(&inst.embedding, &with(&state.selected, w));
                gain_err = gain_err.max((problem.dis_gain(&state, w) - (after - before)).abs());
                gains += 1;
            }
            if let Some(&w) = order.get(step) {
                problem.insert(&mut state, w);
            }
        }
    }
    outcome(
        gain_err <= 1e-9 && stat_err <= 1e-12,
        format!("{gains} gains on {states} states: max gain error {gain_err:.2e}, max |muP - mu| {stat_err:.2e}"),
    )
}

// ---------------------------------------------------------------------------
// Gradient checks

fn flatten(layers: &[Layer], extra: Option<&Array2<f64>>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for l in layers {
        out.extend(l.weights.iter());
        out.extend(l.bias.iter());
    }
    if let Some(m) = extra {
        out.extend(m.iter());
    }
    out
}

fn unflatten(layers: &mut [Layer], extra: Option<&mut Array2<f64>>, flat: &[f64]) {
    let mut it = flat.iter().copied();
    for l in layers {
        l.weights.iter_mut().for_each(|v| *v = it.next().unwrap());
        l.bias.iter_mut().for_each(|v| *v = it.next().unwrap());
    }
    if let Some(m) = extra {
        m.iter_mut().for_each(|v| *v = it.next().unwrap());
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(-scale..scale))
}

fn random_signs(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    loop {
        let m = Array2::from_shape_fn((r, c), |_| if rng.random::<bool>() { 1.0 } else { -1.0 });
        if m.rows().into_iter().all(|row| row.iter().any(|&v| v > 0.0)) {
            return m;
        }
    }
}

/// Fresh layers have zero biases, which puts every rectifier unit fed by
/// an all-zero row exactly on its kink.
fn randomize_biases(net: &mut DenseNetwork, rng: &mut ChaCha8Rng) {
    for l in &mut net.layers {
        l.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
}

fn criterion_4() -> Outcome {
    const H: f64 = 1e-6;
    const FLOOR: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut joint_err, mut attr_err): (f64, f64) = (0.0, 0.0);
    let configs = 24;
    for c in 0..configs {
        let n = rng.random_range(4..=8);
        let f = rng.random_range(3..=6);
        let h = rng.random_range(3..=6);
        let a = rng.random_range(3..=5);
        let k = rng.random_range(2..=4);
        let x = random_matrix(&mut rng, n, f, 1.5);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let mut backbone = DenseNetwork::new(&[f, h, a], &[Activation::Rectifier, Activation::Sigmoid], c).unwrap();
        randomize_biases(&mut backbone, &mut rng);

        let prior_values = random_signs(&mut rng, k, a);
        let prior = AssociationMatrix::new(
            prior_values.clone(),
            AssociationMode::Binary,
            (0..k).map(|i| format!("c{i}")).collect(),
            (0..a).map(|j| format!("a{j}")).collect(),
        )
        .unwrap();
        let mut model = JointModel::new(backbone.clone(), prior, rng.random_range(0.1..2.0), rng.random_range(0.1..2.0), c)
            .unwrap();
        // Keep every association entry well away from its L1 kink.
        model.assoc = prior_values.mapv(|p| {
            let off: f64 = 0.05 + 0.5 * rng.random::<f64>();
            p + if rng.random::<bool>() { off } else { -off }
        });
        let targets = attribute_targets(&model.prior, &labels).unwrap();
        let (_, grads) = joint_gradients(&model, &x, &labels, &targets).unwrap();
        let analytic: Vec<f64> = {
            let mut v: Vec<f64> = Vec::new();
            for g in &grads.backbone {
                v.extend(g.weights.iter());
                v.extend(g.bias.iter());
            }
            v.extend(grads.assoc.iter());
            v
        };
        let p0 = flatten(&model.backbone.layers, Some(&model.assoc));
        let numeric = oracles::numeric_gradient(&p0, H, |p| {
            let mut m = model.clone();
            unflatten(&mut m.backbone.layers, Some(&mut m.assoc), p);
            joint_loss(&m, &x, &labels, &targets).unwrap().total
        });
        joint_err = joint_err.max(oracles::max_relative_error(&analytic, &numeric, FLOOR));

        let mut net = attribute_network(&backbone, rng.random_range(2..=5), c + 1000, false).unwrap();
        randomize_biases(&mut net, &mut rng);
        let t = Array2::from_shape_fn((n, a), |_| if rng.random::<bool>() { 1.0 } else { 0.0 });
        let (_, grads) = attribute_gradients(&net, &x, &t).unwrap();
        let analytic: Vec<f64> = grads.iter().flat_map(|g| g.weights.iter().chain(g.bias.iter()).copied()).collect();
        let p0 = flatten(&net.layers, None);
        let numeric = oracles::numeric_gradient(&p0, H, |p| {
            let mut m = net.clone();
            unflatten(&mut m.layers, None, p);
            attribute_loss(&m, &x, &t).unwrap()
        });
        attr_err = attr_err.max(oracles::max_relative_error(&analytic, &numeric, FLOOR));
    }
    outcome(
        joint_err < 1e-5 && attr_err < 1e-5,
        format!("{configs} configurations: joint max rel. error {joint_err:.2e}, attribute {attr_err:.2e}"),
    )
}

// ---------------------------------------------------------------------------
// Synthetic attribute benchmark shared by criteria 5 and 7

const N_SEEN: usize = 40;
const N_UNSEEN: usize = 10;

struct Benchmark {
    world: AttributeWorld,
    x: Array2<f64>,
    y: Vec<usize>,
    base: JointModel,
    config: TrainConfig,
}

fn benchmark(seed: u64) -> Benchmark {
    let world = AttributeWorld::new(N_SEEN + N_UNSEEN, 24, 32, 0.3, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let y = balanced_labels(N_SEEN, 30, &mut rng);
    let x = world.sample(&y, &mut rng);
    let prior = world.associations(&(0..N_SEEN).collect::<Vec<_>>());
    let backbone = DenseNetwork::new(&[32, 64, 24], &[Activation::Rectifier, Activation::Sigmoid], seed).unwrap();
    let base = JointModel::new(backbone, prior, 1.0, 0.0, seed + 1).unwrap();
    let config = TrainConfig { learning_rate: 0.01, epochs: 60, batch_size: 32, seed, ..Default::default() };
    Benchmark { world, x, y, base, config }
}

fn positives_kept(model: &JointModel) -> f64 {
    let m_star = threshold_associations(model, 0.0);
    let (mut kept, mut total) = (0usize, 0usize);
    for (after, before) in m_star.values.iter().zip(model.prior.values.iter()) {
        if *before > 0.0 {
            total += 1;
            kept += usize::from(*after > 0.0);
        }
    }
    kept as f64 / total as f64
}

fn flip_fraction(model: &JointModel) -> f64 {
    let m_star = threshold_associations(model, 0.0);
    let flips = m_star.values.iter().zip(model.prior.values.iter()).filter(|(a, b)| a != b).count();
    flips as f64 / m_star.values.len() as f64
}

fn criterion_5() -> Outcome {
    let b = benchmark(1);
    let (calibrated, report) = train_joint(&b.base, &b.x, &b.y, &b.config, Calibration::BOTH).unwrap();
    let kept_cal = positives_kept(&calibrated);
    let beta2 = report.beta2.unwrap();
    let mut sweep = Vec::new();
    let mut kept_zero = f64::NAN;
    for beta2 in [0.0, 0.01, 1.0, 100.0] {
        let mut m = b.base.clone();
        m.beta2 = beta2;
        let (trained, _) = train_joint(&m, &b.x, &b.y, &b.config, Calibration { beta1: true, beta2: false }).unwrap();
        if beta2 == 0.0 {
            kept_zero = positives_kept(&trained);
        }
        sweep.push(flip_fraction(&trained));
    }
    let monotone = sweep.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        kept_cal >= 0.9 && kept_zero < kept_cal && monotone,
        format!(
            "calibrated beta2 {beta2:.4} keeps {kept_cal:.3} of positives, beta2 = 0 keeps {kept_zero:.3}; \
             flip fractions over {{0, 0.01, 1, 100}}: {sweep:.4?}"
        ),
    )
}

fn criterion_6() -> Outcome {
    let corpus = planted_corpus(3, 100, 200, 100, true, 17);
    let dict = build_dictionary(&corpus.docs, 1, 1.0).unwrap();
    let params = LdaParams { n_topics: 4, alpha: 0.1, beta: 0.01, iters: 300, seed: 5 };
    let model = fit_lda(&corpus.docs, &dict, &params).unwrap();
    let truth: Vec<Vec<f64>> = corpus.topics.rows().into_iter().map(|r| r.to_vec()).collect();
    let learned: Vec<Vec<f64>> = model.phi.rows().into_iter().map(|r| r.to_vec()).collect();
    let (best, perm) = oracles::permutations(4)
        .into_iter()
        .map(|p| ((0..3).map(|k| oracles::cosine(&truth[k], &learned[p[k]])).sum::<f64>() / 3.0, p))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    let background = perm[3];
    let bg_cos = oracles::cosine(&truth[3], &learned[background]);
    let ranking = rank_topics(&model, DEFAULT_RHO).unwrap();
    let flagged = ranking.insignificant.contains(&background);
    outcome(
        best > 0.8 && flagged,
        format!(
            "mean matched cosine {best:.4}; background topic {background} (cosine {bg_cos:.3}) in bottom-rho set {:?}: {flagged}",
            ranking.insignificant
        ),
    )
}

fn top1(rankings: &[Vec<(usize, f64)>], truth: &[usize]) -> f64 {
    let ranked: Vec<Vec<usize>> = rankings.iter().map(|r| r.iter().map(|&(c, _)| c).collect()).collect();
    accuracy_topk(&ranked, truth, 1).unwrap()
}

/// All 3-of-6 attribute subsets: every attribute is active in exactly half
/// of the classes, so normalized scores of active attributes coincide.
fn balanced_signatures() -> Array2<f64> {
    let mut rows = Vec::new();
    for mask in 0u32..64 {
        if mask.count_ones() == 3 {
            rows.extend((0..6).map(|j| if mask & (1 << j) != 0 { 1.0 } else { -1.0 }));
        }
    }
    Array2::from_shape_vec((20, 6), rows).unwrap()
}

fn criterion_7() -> Outcome {
    // Oracle predictor: attribute scores are the true class's signature.
    let sig = balanced_signatures();
    let assoc = AssociationMatrix::new(
        sig.clone(),
        AssociationMode::Binary,
        (0..20).map(|c| format!("c{c}")).collect(),
        (0..6).map(|j| format!("a{j}")).collect(),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let labels = balanced_labels(20, 5, &mut rng);
    let scores = Array2::from_shape_fn((labels.len(), 6), |(i, j)| if sig[[labels[i], j]] > 0.0 { 1.0 } else { 0.0 });
    let oracle_ref = {
        let reference = Array2::from_shape_fn((40, 6), |(i, j)| if sig[[i % 20, j]] > 0.0 { 1.0 } else { 0.0 });
        fit_normalizer(&reference, NormalizerSource::Reference).unwrap()
    };
    let oracle_bt = fit_normalizer(&scores, NormalizerSource::Batch).unwrap();
    let oracle_acc = [&oracle_ref, &oracle_bt]
        .map(|n| top1(&classify_scores(&scores, n, &assoc, 1).unwrap(), &labels))
        .into_iter()
        .fold(f64::INFINITY, f64::min);

    // Trained predictor on held-out unseen classes.
    let b = benchmark(1);
    let (joint, _) = train_joint(&b.base, &b.x, &b.y, &b.config, Calibration::BOTH).unwrap();
    let m_star = threshold_associations(&joint, 0.0);
    let targets = attribute_targets(&m_star, &b.y).unwrap();
    let net = attribute_network(&joint.backbone, 64, 3, true).unwrap();
    let (net, _) = train_attribute_model(&net, &b.x, &targets, &b.config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1 + 200);
    let uy = balanced_labels(N_UNSEEN, 20, &mut rng);
    let ux = b.world.sample(&uy.iter().map(|&u| u + N_SEEN).collect::<Vec<_>>(), &mut rng);
    // The unseen batch is drawn under a shifted feature distribution.
    let shift = Array1::from_shape_fn(32, |j| if j % 2 == 0 { 0.4 } else { -0.4 });
    let ux = &ux + &shift;
    let hy = balanced_labels(N_SEEN, 10, &mut rng);
    let hx = b.world.sample(&hy, &mut rng);
    let unseen_assoc = b.world.associations(&(N_SEEN..N_SEEN + N_UNSEEN).collect::<Vec<_>>());
    let reference = fit_normalizer(&predict_attributes(&net, &hx).unwrap(), NormalizerSource::Reference).unwrap();
    let batch = fit_normalizer(&predict_attributes(&net, &ux).unwrap(), NormalizerSource::Batch).unwrap();
    let acc_ref = top1(&classify(&ux, &net, &reference, &unseen_assoc, 1).unwrap(), &uy);
    let acc_bt = top1(&classify(&ux, &net, &batch, &unseen_assoc, 1).unwrap(), &uy);
    let chance = 1.0 / N_UNSEEN as f64;
    outcome(
        oracle_acc == 1.0 && acc_ref.min(acc_bt) >= 5.0 * chance && acc_bt >= acc_ref,
        format!(
            "oracle top-1 {oracle_acc:.3}; trained top-1 reference {acc_ref:.3}, batch {acc_bt:.3} (5x chance = {:.2})",
            5.0 * chance
        ),
    )
}

fn annotation(word: &str, annotator: &str, label: Label) -> Annotation {
    Annotation { word: word.into(), class_id: "c".into(), annotator_id: annotator.into(), label }
}

fn criterion_8() -> Outcome {
    let tol = 1e-9;
    let failures: RefCell<Vec<String>> = RefCell::new(Vec::new());
    let check = |name: &str, got: f64, want: f64| {
        if (got - want).abs() > tol || got.is_nan() {
            failures.borrow_mut().push(format!("{name}: got {got}, want {want}"));
        }
    };

    let hand = (1.0 + 7.0 / 3f64.log2()) / (7.0 + 1.0 / 3f64.log2());
    check("nDCG (1,3) vs oracle", ndcg_from_grades(&[1.0, 3.0], &[1.0, 3.0], 2).unwrap(), oracles::ndcg(&[1.0, 3.0], 2));
    check("nDCG (1,3) vs hand", ndcg_from_grades(&[1.0, 3.0], &[1.0, 3.0], 2).unwrap(), hand);
    if (hand - 0.7098).abs() > 5e-5 {
        failures.borrow_mut().push(format!("hand nDCG {hand} is not 0.7098"));
    }
    check("nDCG ideal", ndcg_from_grades(&[3.0, 2.0, 1.0, 0.0], &[0.0, 1.0, 3.0, 2.0], 3).unwrap(), 1.0);
    check("nDCG equal grades", ndcg_from_grades(&[2.0, 2.0, 2.0], &[2.0, 2.0, 2.0], 2).unwrap(), 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for _ in 0..50 {
        let grades: Vec<f64> = (0..8).map(|_| rng.random_range(0..4) as f64).collect();
        let mut candidates = grades.clone();
        candidates.shuffle(&mut rng);
        let k = rng.random_range(1..=8);
        if grades.iter().any(|&g| g > 0.0) {
            check("nDCG random vs oracle", ndcg_from_grades(&grades, &candidates, k).unwrap(), oracles::ndcg(&grades, k));
        }
    }
    // Points on a line: cosine distances rank neighbours by angle, and
    // grades that fall with angle make that ranking ideal.
    let angles: Vec<f64> = (0..6).map(|i| 0.25 * i as f64).collect();
    let emb = Array2::from_shape_fn((6, 2), |(i, j)| if j == 0 { angles[i].cos() } else { angles[i].sin() });
    let rel = Array2::from_shape_fn((6, 6), |(i, j)| 5.0 - (i as f64 - j as f64).abs());
    let rel = RelevanceMatrix::new((0..6).map(|i| format!("c{i}")).collect(), rel).unwrap();
    let report = ndcg_at_k(&emb, &rel, 1).unwrap();
    check("nDCG@1 ideal embedding", report.mean, 1.0);

    let s = [0.9, 0.8, 0.7, 0.6];
    let l = [true, false, true, false];
    let (sv, lv) = (ArrayView1::from(&s), ArrayView1::from(&l));
    check("AP hand", average_precision(sv, lv), 0.5 * (1.0 + 2.0 / 3.0));
    check("AP oracle", average_precision(sv, lv), oracles::average_precision(&s, &l));
    check("AUC hand", auc(sv, lv), 0.75);
    check("AP separated", average_precision(ArrayView1::from(&[0.9, 0.8, 0.1]), ArrayView1::from(&[true, true, false])), 1.0);
    check("AUC separated", auc(ArrayView1::from(&[0.9, 0.8, 0.1]), ArrayView1::from(&[true, true, false])), 1.0);
    for _ in 0..30 {
        let n = rng.random_range(4..60);
        let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(0..8) as f64) / 8.0).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        labels[0] = true;
        labels[1] = false;
        let (sv, lv) = (ArrayView1::from(&scores), ArrayView1::from(&labels));
        check("AUC ties vs pairwise", auc(sv, lv), oracles::pairwise_auc(&scores, &labels));
        let cubed: Vec<f64> = scores.iter().map(|s| 3.0 * s * s * s - 1.0).collect();
        check("AUC monotone transform", auc(ArrayView1::from(&cubed), lv), auc(sv, lv));
    }
    let n = 10_000;
    let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let labels: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let random_auc = auc(ArrayView1::from(&scores), ArrayView1::from(&labels));
    if (random_auc - 0.5).abs() > 0.02 {
        failures.borrow_mut().push(format!("random AUC {random_auc}"));
    }

    // Word a: + + J −, word b: + J J ?, word c: − ? only.
    use Label::*;
    let ann = vec![
        annotation("a", "1", Positive),
        annotation("a", "2", Positive),
        annotation("a", "3", Junk),
        annotation("a", "4", Negative),
        annotation("b", "1", Positive),
        annotation("b", "2", Junk),
        annotation("b", "3", Junk),
        annotation("b", "4", Unknown),
        annotation("c", "1", Negative),
        annotation("c", "2", Unknown),
    ];
    let sel = |ws: &[&str]| saliency_scores(&ann, &ws.iter().map(|w| w.to_string()).collect::<Vec<_>>()).unwrap();
    let r = sel(&["a"]);
    check("relevance {a}", r.relevance, 0.5 / 0.75);
    check("junk {a}", r.junk, 0.25 / 0.75);
    check("saliency {a}", r.saliency, 0.5 * (0.5 / 0.75 + 1.0 - 0.25 / 0.75));
    let all = sel(&["a", "b", "c"]);
    check("relevance all", all.relevance, 1.0);
    check("junk all", all.junk, 1.0);
    check("saliency all", all.saliency, 0.5);
    let none = sel(&["c"]);
    check("relevance {c}", none.relevance, 0.0);
    check("junk {c}", none.junk, 0.0);
    check("saliency {c}", none.saliency, 0.5);

    let rankings = vec![vec![0, 1], vec![2, 0], vec![1, 2], vec![2, 1]];
    check("accuracy@2", accuracy_topk(&rankings, &[1, 1, 2, 0], 2).unwrap(), 0.5);
    check("accuracy perfect", accuracy_topk(&rankings, &[0, 2, 1, 2], 1).unwrap(), 1.0);
    check("accuracy at rank k+1", accuracy_topk(&rankings, &[1, 0, 2, 1], 1).unwrap(), 0.0);

    let failures = failures.into_inner();
    let detail = if failures.is_empty() {
        "nDCG, AP, AUC, saliency and accuracy hand examples reproduced to 1e-9".to_string()
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn criterion_9() -> Outcome {
    let a = Workspace::toy();
    let b = Workspace::toy();
    a.run_pipeline();
    b.run_pipeline();
    let (sa, sb) = (snapshot(&a.out()), snapshot(&b.out()));
    let differing: Vec<String> = sa
        .iter()
        .zip(&sb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.display().to_string())
        .collect();
    let same_files = sa.iter().map(|x| &x.0).eq(sb.iter().map(|x| &x.0));
    outcome(
        same_files && differing.is_empty() && !sa.is_empty(),
        format!("{} artifacts from {} steps compared; differing: {differing:?}", sa.len(), support::cli::PIPELINE.len()),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 9] = [
        (1, "submodularity suite", criterion_1),
        (2, "greedy optimality", criterion_2),
        (3, "entropy-rate correctness", criterion_3),
        (4, "gradient checks", criterion_4),
        (5, "prior retention", criterion_5),
        (6, "LDA recovery", criterion_6),
        (7, "zero-shot sanity", criterion_7),
        (8, "metric oracles", criterion_8),
        (9, "determinism", criterion_9),
    ];
    let limits = [(1, 60.0), (2, 120.0)];
    let start = Instant::now();
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let mut result = run();
        let secs = t.elapsed().as_secs_f64();
        if let Some(&(_, limit)) = limits.iter().find(|(c, _)| *c == id) {
            if secs >= limit {
                result.pass = false;
                result.detail.push_str(&format!("; runtime {secs:.1}s exceeds {limit}s"));
            }
        }
        let expected_fail = EXPECTED_FAILURES.contains(&id);
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        let note = match (result.pass, expected_fail) {
            (false, true) => " [known failure]",
            (true, true) => " [unexpected pass]",
            _ => "",
        };
        println!("{verdict} criterion {id} ({name}): {} [{secs:.1}s]{note}", result.detail);
        if result.pass == expected_fail {
            unexpected.push(id);
        }
    }
    println!("acceptance suite finished in {:.1}s", start.elapsed().as_secs_f64());
    if !unexpected.is_empty() {
        println!("unexpected outcomes for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
