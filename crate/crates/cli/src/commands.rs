use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;

use attrmine_core::assoc::{continuous_associations, initial_associations, unseen_association_matrix, ArticleOptions};
use attrmine_core::corpus::{build_dictionary, embed, preprocess, read_documents, write_documents};
use attrmine_core::eval::{
    accuracy_topk, attribute_ap_auc, label_marginals, ndcg_at_k, read_annotations, saliency_scores, RelevanceMatrix,
};
use attrmine_core::fmt::sig9;
use attrmine_core::neural::{
    attribute_network, attribute_targets, predict_attributes, threshold_associations, train_attribute_model,
    train_joint, Calibration, Checkpoint, FeatureSet,
};
use attrmine_core::selection::{read_selected_words, select_vocabulary, SelectionProblem};
use attrmine_core::synth::{balanced_labels, AttributeWorld};
use attrmine_core::topics::{fit_lda, rank_topics, LdaParams};
use attrmine_core::zeroshot::{classify_scores, fit_normalizer, write_predictions};
use attrmine_core::{
    Activation, AssociationMatrix, AssociationMode, ClassEmbedding, DenseNetwork, Dictionary, Document, Error,
    JointModel, NormalizerSource, Result,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cli::{Command, Split};
use crate::config::{Candidates, Mode, Normalizer};
use crate::pipeline::{features_name, Pipeline, Step, TOY_ANNOTATIONS, TOY_RELEVANCE};

pub fn run(p: &Pipeline, command: &Command) -> Result<()> {
    match command {
        Command::Ingest(_) => ingest(p),
        Command::Embed(_) => embed_step(p),
        Command::Lda(_) => lda(p),
        Command::RankTopics(_) => rank(p),
        Command::Select(_) => select(p),
        Command::InitAssoc => init_assoc(p),
        Command::SynthFeatures(_) => synth_features(p),
        Command::TrainJoint(_) => train_joint_step(p),
        Command::Threshold(_) => threshold(p),
        Command::TrainAttr(_) => train_attr(p),
        Command::Predict(a) => predict(p, a.split),
        Command::Zsl(_) => zsl(p),
        Command::EvalNdcg(_) => eval_ndcg(p),
        Command::EvalSaliency(_) => eval_saliency(p),
        Command::EvalZsl => eval_zsl(p),
        Command::SweepLength(_) => sweep_length(p),
    }
}

fn ingest(p: &Pipeline) -> Result<()> {
    let mut s = p.step("ingest", None);
    let raw = s.seen_corpus()?;
    if raw.is_empty() {
        return Err(Error::Empty("corpus has no documents".into()));
    }
    let stop = s.stop_words()?;
    let docs = raw
        .iter()
        .map(|d| preprocess(&d.class_id, &d.text, s.cfg.corpus.limit, &stop))
        .collect::<Result<Vec<_>>>()?;
    for d in docs.iter().filter(|d| d.tokens.is_empty()) {
        log::warn!("a document of class {:?} is empty after preprocessing", d.class_id);
    }
    s.emit_with("documents.jsonl", |buf| write_documents(&docs, buf))?;
    Ok(())
}

fn load_documents(s: &mut Step) -> Result<Vec<Document>> {
    let text = s.upstream_text("documents.jsonl")?;
    read_documents(text.as_bytes())
}

fn n_classes(docs: &[Document]) -> usize {
    docs.iter().map(|d| d.class_id.as_str()).collect::<std::collections::BTreeSet<_>>().len()
}

fn load_dictionary(s: &mut Step, n_classes: usize) -> Result<Dictionary> {
    let text = s.upstream_text("dictionary.csv")?;
    Dictionary::read_csv(text.as_bytes(), n_classes)
}

fn load_embedding(s: &mut Step) -> Result<ClassEmbedding> {
    let text = s.upstream_text("embedding.csv")?;
    ClassEmbedding::read_csv(text.as_bytes())
}

fn load_selection(s: &mut Step) -> Result<Vec<String>> {
    let text = s.upstream_text("selection.csv")?;
    let words = read_selected_words(text.as_bytes())?;
    if words.is_empty() {
        return Err(Error::Empty("selection.csv lists no words".into()));
    }
    Ok(words)
}

fn load_assoc(s: &mut Step, name: &str, mode: AssociationMode) -> Result<AssociationMatrix> {
    let text = s.upstream_text(name)?;
    AssociationMatrix::read_csv(text.as_bytes(), mode)
}

fn load_checkpoint(s: &mut Step, name: &str) -> Result<Checkpoint> {
    let path = s.upstream(name)?;
    Checkpoint::read(std::io::BufReader::new(std::fs::File::open(path)?))
}

fn embed_step(p: &Pipeline) -> Result<()> {
    let mut s = p.step("embed", None);
    let docs = load_documents(&mut s)?;
    let dict = build_dictionary(&docs, s.cfg.corpus.min_df, s.cfg.corpus.max_df_ratio)?;
    let emb = embed(&docs, &dict)?;
    s.emit_with("dictionary.csv", |b| dict.write_csv(b))?;
    s.emit_with("embedding.csv", |b| emb.write_csv(b))?;
    Ok(())
}

fn lda(p: &Pipeline) -> Result<()> {
    let t = &p.cfg.topics;
    let mut s = p.step("lda", Some(t.seed));
    let docs = load_documents(&mut s)?;
    let dict = load_dictionary(&mut s, n_classes(&docs))?;
    let params = LdaParams { n_topics: t.n_topics, alpha: t.alpha(), beta: t.beta, iters: t.iters, seed: t.seed };
    let model = fit_lda(&docs, &dict, &params)?;
    s.emit_dir("topics", |dir| model.save(dir, dict.words()))?;
    Ok(())
}

fn load_topics(s: &mut Step) -> Result<(attrmine_core::TopicModel, Vec<String>)> {
    let dir = s.upstream("topics")?;
    attrmine_core::TopicModel::load(&dir)
}

fn rank(p: &Pipeline) -> Result<()> {
    let mut s = p.step("rank-topics", None);
    let (model, _) = load_topics(&mut s)?;
    let ranking = rank_topics(&model, s.cfg.topics.rho)?;
    s.emit_with("topic_ranking.csv", |b| ranking.write_csv(b))?;
    Ok(())
}

fn select(p: &Pipeline) -> Result<()> {
    let mut s = p.step("select", None);
    let emb = load_embedding(&mut s)?;
    let (model, words) = load_topics(&mut s)?;
    if words != emb.words {
        return Err(Error::Dimension("topic model and embedding were built over different dictionaries".into()));
    }
    let c = &s.cfg.selection;
    let ranking = rank_topics(&model, s.cfg.topics.rho)?;
    let problem = SelectionProblem::from_models(&emb, &model, &ranking, c.lambda, c.gamma)?;
    let state = select_vocabulary(&problem, c.budget)?;
    log::info!("selected {} words at cost {}", state.len(), state.spent_cost);
    s.emit_with("selection.csv", |b| state.write_csv(&emb.words, b))?;
    Ok(())
}

fn init_assoc(p: &Pipeline) -> Result<()> {
    let mut s = p.step("init-assoc", None);
    let emb = load_embedding(&mut s)?;
    let vocab = load_selection(&mut s)?;
    let binary = initial_associations(&emb, &vocab)?;
    let continuous = continuous_associations(&emb, &vocab)?;
    s.emit_with("prior.csv", |b| binary.write_csv(b))?;
    s.emit_with("prior_continuous.csv", |b| continuous.write_csv(b))?;
    Ok(())
}

fn article_limit(s: &Step) -> usize {
    s.cfg.assoc.article_limit.unwrap_or(s.cfg.corpus.limit)
}

/// Unseen-class association rows over the vocabulary of `vocab`.
fn unseen_matrix(s: &mut Step, vocab: &[String], mode: AssociationMode, limit: usize) -> Result<AssociationMatrix> {
    let docs = load_documents(s)?;
    let dict = load_dictionary(s, n_classes(&docs))?;
    let articles = s.unseen_articles()?;
    let stop = s.stop_words()?;
    let options = ArticleOptions { length_limit: limit, stop_words: &stop };
    unseen_association_matrix(&articles, &dict, vocab, &options, mode)
}

fn synth_features(p: &Pipeline) -> Result<()> {
    let c = p.cfg.synth.clone();
    let mut s = p.step("synth-features", Some(c.seed));
    let seen = load_assoc(&mut s, "prior.csv", AssociationMode::Binary)?;
    let limit = article_limit(&s);
    let unseen = unseen_matrix(&mut s, &seen.attributes, AssociationMode::Binary, limit)?;
    if let Some(dup) = unseen.class_ids.iter().find(|c| seen.class_ids.contains(c)) {
        return Err(Error::InvalidArgument(format!("class {dup:?} is both seen and unseen")));
    }
    let all = seen.concat(&unseen)?;
    let world = AttributeWorld::from_signatures(all.values.clone(), c.n_features, c.noise, c.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed.wrapping_add(1));
    let n_seen = seen.n_classes();
    let mut draw = |prefix: &str, offset: usize, n_classes: usize, per_class: usize| {
        let labels: Vec<usize> = balanced_labels(n_classes, per_class, &mut rng).into_iter().map(|l| l + offset).collect();
        let x = world.sample(&labels, &mut rng);
        let ids = (0..labels.len()).map(|i| format!("{prefix}{i:05}")).collect();
        let classes = labels.iter().map(|&l| all.class_ids[l].clone()).collect();
        FeatureSet::new(ids, classes, x)
    };
    let train = draw("train", 0, n_seen, c.train_per_class)?;
    let heldout = draw("heldout", 0, n_seen, c.heldout_per_class)?;
    let test = draw("test", n_seen, unseen.n_classes(), c.test_per_class)?;
    for (split, set) in [(Split::Train, &train), (Split::Heldout, &heldout), (Split::Test, &test)] {
        s.emit_with(&features_name(split), |b| set.write_csv(b))?;
    }
    Ok(())
}

fn train_joint_step(p: &Pipeline) -> Result<()> {
    let n = p.cfg.neural.clone();
    let mut s = p.step("train-joint", Some(n.seed));
    let prior = load_assoc(&mut s, "prior.csv", AssociationMode::Binary)?;
    let train = s.features(Split::Train)?;
    let labels = train.class_indices(&prior.class_ids)?;
    let mut sizes = vec![train.features.ncols()];
    sizes.extend(&n.hidden);
    sizes.push(prior.n_attributes());
    let mut activations = vec![Activation::Rectifier; n.hidden.len()];
    activations.push(Activation::Sigmoid);
    let backbone = DenseNetwork::new(&sizes, &activations, n.seed)?;
    let model = JointModel::new(backbone, prior, n.beta1, n.beta2, n.seed.wrapping_add(1))?;
    let calibration = Calibration { beta1: n.calibrate_beta1, beta2: n.calibrate_beta2 };
    let (trained, report) = train_joint(&model, &train.features, &labels, &n.train_config(), calibration)?;
    let ckpt = Checkpoint::from_joint(&trained)?;
    s.emit_with("joint.ckpt", |b| ckpt.write(b))?;
    s.emit_with("joint_report.csv", |b| {
        writeln!(b, "epoch,loss")?;
        writeln!(b, "0,{}", sig9(report.initial_loss))?;
        for (e, l) in report.epoch_losses.iter().enumerate() {
            writeln!(b, "{},{}", e + 1, sig9(*l))?;
        }
        Ok(())
    })?;
    Ok(())
}

fn threshold(p: &Pipeline) -> Result<()> {
    let mut s = p.step("threshold", None);
    let model = load_checkpoint(&mut s, "joint.ckpt")?.to_joint()?;
    let m_star = threshold_associations(&model, s.cfg.neural.tau);
    m_star.warn_degenerate();
    let flips = m_star.values.iter().zip(&model.prior.values).filter(|(a, b)| a != b).count();
    log::info!("{flips} of {} associations differ from the prior", m_star.values.len());
    s.emit_with("assoc_thresholded.csv", |b| m_star.write_csv(b))?;
    Ok(())
}

fn train_attr(p: &Pipeline) -> Result<()> {
    let n = p.cfg.neural.clone();
    let mut s = p.step("train-attr", Some(n.seed));
    let joint = load_checkpoint(&mut s, "joint.ckpt")?.to_joint()?;
    let m_star = load_assoc(&mut s, "assoc_thresholded.csv", AssociationMode::Binary)?;
    let train = s.features(Split::Train)?;
    let labels = train.class_indices(&m_star.class_ids)?;
    let targets = attribute_targets(&m_star, &labels)?;
    let net = attribute_network(&joint.backbone, n.extra_hidden, n.seed.wrapping_add(2), n.warm_start)?;
    let (trained, report) = train_attribute_model(&net, &train.features, &targets, &n.train_config())?;
    log::info!("attribute loss {} -> {}", report.initial_loss, report.final_loss());
    let mut ckpt = Checkpoint::from_network(&trained);
    ckpt.labels.extend(m_star.attributes.iter().map(|a| ("attribute".to_string(), a.clone())));
    s.emit_with("attr.ckpt", |b| ckpt.write(b))?;
    Ok(())
}

/// The attribute network and the attribute words it predicts.
fn load_attribute_model(s: &mut Step) -> Result<(DenseNetwork, Vec<String>)> {
    let ckpt = load_checkpoint(s, "attr.ckpt")?;
    let attributes: Vec<String> = ckpt.labels("attribute").iter().map(|a| a.to_string()).collect();
    let net = ckpt.to_network()?;
    if attributes.len() != net.n_outputs() {
        return Err(Error::Dimension(format!("{} attribute labels for {} outputs", attributes.len(), net.n_outputs())));
    }
    Ok((net, attributes))
}

fn predict(p: &Pipeline, split: Split) -> Result<()> {
    let mut s = p.step("predict", None);
    s.arg("split", split.name());
    let (net, attributes) = load_attribute_model(&mut s)?;
    let m_star = load_assoc(&mut s, "assoc_thresholded.csv", AssociationMode::Binary)?;
    let set = s.features(split)?;
    let scores = predict_attributes(&net, &set.features)?;
    let suffix = split.name();
    s.emit_with(&format!("attribute_scores_{suffix}.csv"), |b| {
        let mut header = String::from("sample_id,class_id");
        for a in &attributes {
            write!(header, ",{a}").unwrap();
        }
        writeln!(b, "{header}")?;
        for (i, row) in scores.rows().into_iter().enumerate() {
            write!(b, "{},{}", set.sample_ids[i], set.class_ids[i])?;
            for v in row {
                write!(b, ",{}", sig9(*v))?;
            }
            writeln!(b)?;
        }
        Ok(())
    })?;
    let Ok(labels) = set.class_indices(&m_star.class_ids) else {
        log::warn!("{suffix} split has classes without learned associations; skipping AP/AUC");
        return Ok(());
    };
    let truth = attribute_targets(&m_star, &labels)?.mapv(|v| v > 0.5);
    let metrics = attribute_ap_auc(&scores, &truth)?;
    s.emit_with(&format!("attribute_metrics_{suffix}.csv"), |b| {
        writeln!(b, "attribute,ap,auc")?;
        for (a, m) in attributes.iter().zip(&metrics) {
            match m {
                Some(m) => writeln!(b, "{a},{},{}", sig9(m.ap), sig9(m.auc))?,
                None => writeln!(b, "{a},,")?,
            }
        }
        Ok(())
    })?;
    Ok(())
}

struct ZslRun {
    sample_ids: Vec<String>,
    truth: Vec<Option<usize>>,
    class_ids: Vec<String>,
    rankings: Vec<Vec<(usize, f64)>>,
}

/// Seen-class candidates: the thresholded associations in binary mode, the
/// raw tf·idf prior in continuous mode.
fn seen_candidates(s: &mut Step, mode: Mode) -> Result<AssociationMatrix> {
    match mode {
        Mode::Binary => load_assoc(s, "assoc_thresholded.csv", AssociationMode::Binary),
        Mode::Continuous => load_assoc(s, "prior_continuous.csv", AssociationMode::Continuous),
    }
}

/// Shared body of `zsl` and `sweep-length`.
fn zsl_core(s: &mut Step, limit: usize) -> Result<ZslRun> {
    let z = s.cfg.zeroshot.clone();
    let (net, attributes) = load_attribute_model(s)?;
    let mode = AssociationMode::from(z.mode);
    let candidates = match z.candidates {
        Candidates::Seen => seen_candidates(s, z.mode)?,
        Candidates::Unseen => unseen_matrix(s, &attributes, mode, limit)?,
        Candidates::All => seen_candidates(s, z.mode)?.concat(&unseen_matrix(s, &attributes, mode, limit)?)?,
    };
    if candidates.attributes != attributes {
        return Err(Error::Dimension("candidate associations and attribute model use different vocabularies".into()));
    }
    let test = s.features(Split::Test)?;
    let test_scores = predict_attributes(&net, &test.features)?;
    let normalizer = match z.normalizer {
        Normalizer::Reference => {
            let heldout = s.features(Split::Heldout)?;
            fit_normalizer(&predict_attributes(&net, &heldout.features)?, NormalizerSource::Reference)?
        }
        Normalizer::Batch => fit_normalizer(&test_scores, NormalizerSource::Batch)?,
    };
    let top_k = z.top_k.min(candidates.n_classes());
    let rankings = classify_scores(&test_scores, &normalizer, &candidates, top_k)?;
    let truth = test.class_ids.iter().map(|c| candidates.class_ids.iter().position(|k| k == c)).collect();
    Ok(ZslRun { sample_ids: test.sample_ids, truth, class_ids: candidates.class_ids, rankings })
}

fn zsl(p: &Pipeline) -> Result<()> {
    let mut s = p.step("zsl", None);
    let limit = article_limit(&s);
    let run = zsl_core(&mut s, limit)?;
    s.emit_with("predictions.csv", |b| write_predictions(b, &run.sample_ids, &run.rankings, &run.class_ids))?;
    Ok(())
}

/// Top-k accuracy for each configured k; samples whose class is not a
/// candidate count as misses.
fn accuracies(ks: &[usize], rankings: &[Vec<usize>], truth: &[Option<usize>]) -> Result<Vec<f64>> {
    let truth: Vec<usize> = truth.iter().map(|t| t.unwrap_or(usize::MAX)).collect();
    ks.iter().map(|&k| accuracy_topk(rankings, &truth, k)).collect()
}

fn eval_zsl(p: &Pipeline) -> Result<()> {
    let mut s = p.step("eval-zsl", None);
    let text = s.upstream_text("predictions.csv")?;
    let test = s.features(Split::Test)?;
    let mut ranked: BTreeMap<String, Vec<(usize, String)>> = BTreeMap::new();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Format(format!("predictions.csv: {e}")))?;
        if rec.len() != 4 {
            return Err(Error::Format("predictions.csv rows must be sample_id,rank,class_id,score".into()));
        }
        let rank: usize = rec[1].parse().map_err(|_| Error::Format(format!("bad rank {:?}", &rec[1])))?;
        ranked.entry(rec[0].to_string()).or_default().push((rank, rec[2].to_string()));
    }
    let mut classes: Vec<String> = Vec::new();
    let mut intern = |c: &str| match classes.iter().position(|k| k == c) {
        Some(i) => i,
        None => {
            classes.push(c.to_string());
            classes.len() - 1
        }
    };
    let mut rankings = Vec::with_capacity(test.len());
    let mut truth = Vec::with_capacity(test.len());
    for (sid, cid) in test.sample_ids.iter().zip(&test.class_ids) {
        let mut row = ranked
            .remove(sid)
            .ok_or_else(|| Error::Dimension(format!("no prediction for test sample {sid:?}")))?;
        row.sort();
        rankings.push(row.iter().map(|(_, c)| intern(c)).collect::<Vec<_>>());
        truth.push(Some(intern(cid)));
    }
    if let Some(extra) = ranked.keys().next() {
        return Err(Error::Dimension(format!("prediction for unknown sample {extra:?}")));
    }
    let ks = s.cfg.eval.accuracy_k.clone();
    let acc = accuracies(&ks, &rankings, &truth)?;
    s.emit_with("zsl_report.csv", |b| {
        writeln!(b, "k,accuracy")?;
        for (k, a) in ks.iter().zip(&acc) {
            writeln!(b, "{k},{}", sig9(*a))?;
        }
        Ok(())
    })?;
    let mut summary = format!("zero-shot accuracy over {} test samples\n", truth.len());
    for (k, a) in ks.iter().zip(&acc) {
        writeln!(summary, "top-{k}: {:.4}", a).unwrap();
    }
    print!("{summary}");
    s.emit("zsl_report.txt", summary.as_bytes())?;
    Ok(())
}

fn sweep_length(p: &Pipeline) -> Result<()> {
    let mut s = p.step("sweep-length", None);
    let grid = s.cfg.zeroshot.sweep_grid.clone();
    let ks = s.cfg.eval.accuracy_k.clone();
    let mut rows = Vec::with_capacity(grid.len());
    for &limit in &grid {
        let run = zsl_core(&mut s, limit)?;
        let ranked: Vec<Vec<usize>> = run.rankings.iter().map(|r| r.iter().map(|&(c, _)| c).collect()).collect();
        rows.push((limit, accuracies(&ks, &ranked, &run.truth)?));
    }
    s.emit_with("sweep_length.csv", |b| {
        write!(b, "length")?;
        for k in &ks {
            write!(b, ",top_{k}")?;
        }
        writeln!(b)?;
        for (limit, acc) in &rows {
            write!(b, "{limit}")?;
            for a in acc {
                write!(b, ",{}", sig9(*a))?;
            }
            writeln!(b)?;
        }
        Ok(())
    })?;
    Ok(())
}

fn eval_ndcg(p: &Pipeline) -> Result<()> {
    let mut s = p.step("eval-ndcg", None);
    let emb = load_embedding(&mut s)?;
    let vocab = load_selection(&mut s)?;
    let configured = s.cfg.paths.relevance.clone();
    let text = s.text_input(configured.as_ref(), "paths.relevance", ("toy_relevance.csv", TOY_RELEVANCE))?;
    let relevance = RelevanceMatrix::read_csv(text.as_bytes())?.restrict(&emb.class_ids)?;
    let cols: Vec<usize> = vocab
        .iter()
        .map(|w| emb.word_index(w).ok_or_else(|| Error::Dimension(format!("selected word {w:?} not in embedding"))))
        .collect::<Result<_>>()?;
    let selected = emb.matrix.select(ndarray::Axis(1), &cols);
    let k = s.cfg.eval.ndcg_k;
    let sel = ndcg_at_k(&selected, &relevance, k)?;
    let full = ndcg_at_k(&emb.matrix, &relevance, k)?;
    s.emit_with("ndcg.csv", |b| {
        writeln!(b, "class_id,ndcg_selected,ndcg_full")?;
        for (i, c) in emb.class_ids.iter().enumerate() {
            writeln!(b, "{c},{},{}", sig9(sel.per_class[i]), sig9(full.per_class[i]))?;
        }
        Ok(())
    })?;
    let summary = format!(
        "nDCG@{k} over {} classes\nselected vocabulary ({} words): {:.4}\nfull dictionary ({} words): {:.4}\n",
        emb.n_classes(),
        vocab.len(),
        sel.mean,
        emb.n_words(),
        full.mean
    );
    print!("{summary}");
    s.emit("ndcg.txt", summary.as_bytes())?;
    Ok(())
}

fn eval_saliency(p: &Pipeline) -> Result<()> {
    let mut s = p.step("eval-saliency", None);
    let vocab = load_selection(&mut s)?;
    let configured = s.cfg.paths.annotations.clone();
    let text =
        s.text_input(configured.as_ref(), "paths.annotations", ("toy_annotations.csv", TOY_ANNOTATIONS))?;
    let annotations = read_annotations(text.as_bytes())?;
    let report = saliency_scores(&annotations, &vocab)?;
    let marginals = label_marginals(&annotations);
    s.emit_with("saliency.csv", |b| {
        writeln!(b, "word,p_positive,p_junk,selected")?;
        for (w, (pos, junk)) in &marginals {
            writeln!(b, "{w},{},{},{}", sig9(*pos), sig9(*junk), vocab.iter().any(|v| v == w))?;
        }
        Ok(())
    })?;
    let summary = format!(
        "relevance: {:.4}\njunk: {:.4}\nsaliency: {:.4}\n",
        report.relevance, report.junk, report.saliency
    );
    print!("{summary}");
    s.emit("saliency.txt", summary.as_bytes())?;
    Ok(())
}
