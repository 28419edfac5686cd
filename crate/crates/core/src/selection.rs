//! Vocabulary selection: maximize `F(S) = F_dis(S) + λ·F_div(S)` subject to
//! the saliency knapsack `C(S) ≤ b`.
//!
//! `F_dis` is the entropy rate of a random walk on the complete class graph.
//! Edge `(i, j)` carries `Σ_{w∈S} |v_i^w − v_j^w|`; the self loop of node `i`
//! carries the same sum over the words *not* in `S`, so the node weights
//! `g_i` (and with them the stationary distribution) do not depend on `S`.
//! `F_div` sums, over topics, the square root of the topic mass of the
//! selected words credited to their dominant topic. Word costs are
//! `1 + γ·Σ_{insignificant T} p(T|w)`.
//!
//! The optimizer is lazy greedy (stale upper bounds in a max-heap) run twice,
//! once on raw gain and once on gain per unit cost, keeping the better set.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use ndarray::{Array2, ArrayView1};

use crate::corpus::ClassEmbedding;
use crate::error::{Error, Result};
use crate::fmt::exact;
use crate::topics::{dominant_topic, word_topic_posterior, TopicModel, TopicRanking};

pub const DEFAULT_LAMBDA: f64 = 0.001;
pub const DEFAULT_GAMMA: f64 = 20.0;
pub const DEFAULT_BUDGET: f64 = 1200.0;

/// Class graph whose edge weights depend on the selected word set.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminationGraph {
    /// Σ over selected words of |v_i − v_j|; symmetric with zero diagonal.
    pub g_sel: Array2<f64>,
    /// Σ over all words of |v_i − v_j|.
    pub g_all: Array2<f64>,
    /// g_i = Σ_{j≠i} g_all[i][j].
    pub node_weight: Vec<f64>,
    pub total_weight: f64,
}

impl DiscriminationGraph {
    /// `embedding` is classes × words.
    pub fn new(embedding: &Array2<f64>) -> Self {
        let n = embedding.nrows();
        let mut g_all = Array2::<f64>::zeros((n, n));
        for col in embedding.columns() {
            add_pairwise(&mut g_all, col);
        }
        let node_weight: Vec<f64> = g_all.rows().into_iter().map(|r| r.sum()).collect();
        let total_weight = node_weight.iter().sum();
        Self { g_sel: Array2::zeros((n, n)), g_all, node_weight, total_weight }
    }

    pub fn n_nodes(&self) -> usize {
        self.node_weight.len()
    }

    /// Moves a word's pairwise differences from the self loops onto the edges.
    pub fn add_word(&mut self, column: ArrayView1<f64>) {
        add_pairwise(&mut self.g_sel, column);
    }

    fn check_connected(&self) -> Result<()> {
        match self.node_weight.iter().position(|&g| !(g > 0.0)) {
            Some(i) => Err(Error::Degenerate(format!(
                "class node {i} has zero total weight (identical to every other class)"
            ))),
            None => Ok(()),
        }
    }

    /// μ_i = g_i / g_T.
    pub fn stationary(&self) -> Vec<f64> {
        self.node_weight.iter().map(|g| g / self.total_weight).collect()
    }

    /// Row-stochastic transition matrix, self loops on the diagonal.
    pub fn transition_matrix(&self) -> Array2<f64> {
        let n = self.n_nodes();
        let mut p = Array2::zeros((n, n));
        for i in 0..n {
            let (off, self_loop) = row_transitions(self.g_sel.row(i), i, self.node_weight[i]);
            for j in 0..n {
                p[[i, j]] = if i == j { self_loop } else { off[j] };
            }
        }
        p
    }

    fn row_entropy(&self, i: usize) -> f64 {
        row_entropy(self.g_sel.row(i).iter().copied(), i, self.node_weight[i])
    }
}

fn add_pairwise(acc: &mut Array2<f64>, column: ArrayView1<f64>) {
    let n = column.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (column[i] - column[j]).abs();
            acc[[i, j]] += d;
            acc[[j, i]] += d;
        }
    }
}

fn row_transitions(row: ArrayView1<f64>, i: usize, g_i: f64) -> (Vec<f64>, f64) {
    let off: Vec<f64> = row.iter().enumerate().map(|(j, &g)| if j == i { 0.0 } else { g / g_i }).collect();
    let moved: f64 = row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, g)| g).sum();
    (off, ((g_i - moved) / g_i).max(0.0))
}

fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Entropy of the outgoing distribution of node `i`, given its edge weights
/// to the selected words (diagonal entry ignored).
fn row_entropy(row: impl Iterator<Item = f64>, i: usize, g_i: f64) -> f64 {
    let mut moved = 0.0;
    let mut h = 0.0;
    for (j, g) in row.enumerate() {
        if j != i {
            moved += g;
            h -= xlogx(g / g_i);
        }
    }
    h - xlogx(((g_i - moved) / g_i).max(0.0))
}

/// Entropy rate `−Σ_i μ_i Σ_j p_ij ln p_ij` (natural log, `0·ln 0 = 0`).
pub fn entropy_rate(graph: &DiscriminationGraph) -> Result<f64> {
    graph.check_connected()?;
    Ok((0..graph.n_nodes())
        .map(|i| graph.node_weight[i] / graph.total_weight * graph.row_entropy(i))
        .sum())
}

/// `Σ_k sqrt(topic_sums[k])`.
pub fn diversity(topic_sums: &[f64]) -> f64 {
    topic_sums.iter().map(|s| s.sqrt()).sum()
}

/// `1 + γ·Σ_{k ∈ insignificant} p(T_k | w)`.
pub fn word_cost(word: usize, model: &TopicModel, ranking: &TopicRanking, gamma: f64) -> f64 {
    let posterior = word_topic_posterior(model, word);
    1.0 + gamma * ranking.insignificant.iter().map(|&k| posterior[k]).sum::<f64>()
}

/// Everything the optimizer needs about the candidate words.
#[derive(Debug, Clone)]
pub struct SelectionProblem {
    /// classes × words embedding.
    pub embedding: Array2<f64>,
    /// Dominant topic and its `p(w|T)` for each word.
    pub word_topics: Vec<(usize, f64)>,
    pub n_topics: usize,
    pub costs: Vec<f64>,
    pub lambda: f64,
    graph: DiscriminationGraph,
}

impl SelectionProblem {
    pub fn new(
        embedding: Array2<f64>,
        word_topics: Vec<(usize, f64)>,
        n_topics: usize,
        costs: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        let n_words = embedding.ncols();
        if word_topics.len() != n_words || costs.len() != n_words {
            return Err(Error::Dimension(format!(
                "{n_words} embedding columns, {} topic entries, {} costs",
                word_topics.len(),
                costs.len()
            )));
        }
        if word_topics.iter().any(|&(t, s)| t >= n_topics || !(s >= 0.0)) {
            return Err(Error::InvalidArgument("word topic index out of range or negative mass".into()));
        }
        if costs.iter().any(|&c| !(c >= 1.0) || !c.is_finite()) {
            return Err(Error::InvalidArgument("word costs must be finite and >= 1".into()));
        }
        if !(lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("lambda {lambda} must be >= 0")));
        }
        let graph = DiscriminationGraph::new(&embedding);
        graph.check_connected()?;
        Ok(Self { embedding, word_topics, n_topics, costs, lambda, graph })
    }

    /// Builds the problem from the tf·idf embedding and a topic model fitted
    /// over the same dictionary.
    pub fn from_models(
        embedding: &ClassEmbedding,
        model: &TopicModel,
        ranking: &TopicRanking,
        lambda: f64,
        gamma: f64,
    ) -> Result<Self> {
        if model.n_words() != embedding.n_words() {
            return Err(Error::Dimension(format!(
                "embedding has {} words, topic model {}",
                embedding.n_words(),
                model.n_words()
            )));
        }
        if !(gamma >= 0.0) {
            return Err(Error::InvalidArgument(format!("gamma {gamma} must be >= 0")));
        }
        let mut word_topics = Vec::with_capacity(model.n_words());
        let mut costs = Vec::with_capacity(model.n_words());
        for w in 0..model.n_words() {
            let posterior = word_topic_posterior(model, w);
            let k = dominant_topic(&posterior);
            word_topics.push((k, model.phi[[k, w]]));
            costs.push(1.0 + gamma * ranking.insignificant.iter().map(|&t| posterior[t]).sum::<f64>());
        }
        Self::new(embedding.matrix.clone(), word_topics, model.n_topics(), costs, lambda)
    }

    pub fn n_words(&self) -> usize {
        self.embedding.ncols()
    }

    pub fn empty_state(&self) -> SelectionState {
        let graph = self.graph.clone();
        let row_entropy = (0..graph.n_nodes()).map(|i| graph.row_entropy(i)).collect();
        SelectionState {
            selected: Vec::new(),
            in_set: vec![false; self.n_words()],
            graph,
            row_entropy,
            topic_sums: vec![0.0; self.n_topics],
            spent_cost: 0.0,
            objective: 0.0,
            history: Vec::new(),
        }
    }

    /// Discrimination part of the marginal gain of `word`.
    pub fn dis_gain(&self, state: &SelectionState, word: usize) -> f64 {
        let column = self.embedding.column(word);
        let graph = &state.graph;
        let n = graph.n_nodes();
        (0..n)
            .map(|i| {
                let row = graph.g_sel.row(i);
                let updated = (0..n).map(|j| row[j] + (column[i] - column[j]).abs());
                let h = row_entropy(updated, i, graph.node_weight[i]);
                graph.node_weight[i] / graph.total_weight * (h - state.row_entropy[i])
            })
            .sum()
    }

    pub fn div_gain(&self, state: &SelectionState, word: usize) -> f64 {
        let (t, s) = self.word_topics[word];
        let before = state.topic_sums[t];
        (before + s).sqrt() - before.sqrt()
    }

    /// `F(S ∪ {word}) − F(S)` without touching `state`.
    pub fn marginal_gain(&self, state: &SelectionState, word: usize) -> f64 {
        self.dis_gain(state, word) + self.lambda * self.div_gain(state, word)
    }

    /// Adds `word`, updating the graph, topic sums, cost and objective.
    pub fn insert(&self, state: &mut SelectionState, word: usize) {
        debug_assert!(!state.in_set[word], "word {word} inserted twice");
        let gain = self.marginal_gain(state, word);
        state.graph.add_word(self.embedding.column(word));
        for i in 0..state.graph.n_nodes() {
            state.row_entropy[i] = state.graph.row_entropy(i);
        }
        let (t, s) = self.word_topics[word];
        state.topic_sums[t] += s;
        state.spent_cost += self.costs[word];
        state.objective += gain;
        state.in_set[word] = true;
        state.selected.push(word);
        state.history.push(SelectionStep {
            word,
            marginal_gain: gain,
            cost: self.costs[word],
            cumulative_cost: state.spent_cost,
            objective: state.objective,
        });
    }

    /// `F(words)` evaluated from an empty graph.
    pub fn objective_of(&self, words: &[usize]) -> Result<f64> {
        let mut graph = self.graph.clone();
        let mut topic_sums = vec![0.0; self.n_topics];
        for &w in words {
            graph.add_word(self.embedding.column(w));
            let (t, s) = self.word_topics[w];
            topic_sums[t] += s;
        }
        Ok(entropy_rate(&graph)? + self.lambda * diversity(&topic_sums))
    }

    pub fn cost_of(&self, words: &[usize]) -> f64 {
        words.iter().map(|&w| self.costs[w]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionStep {
    pub word: usize,
    pub marginal_gain: f64,
    pub cost: f64,
    pub cumulative_cost: f64,
    pub objective: f64,
}

/// Incremental state of the objective over the selected set.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionState {
    pub selected: Vec<usize>,
    in_set: Vec<bool>,
    pub graph: DiscriminationGraph,
    row_entropy: Vec<f64>,
    pub topic_sums: Vec<f64>,
    pub spent_cost: f64,
    pub objective: f64,
    pub history: Vec<SelectionStep>,
}

impl SelectionState {
    pub fn contains(&self, word: usize) -> bool {
        self.in_set[word]
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn f_dis(&self) -> Result<f64> {
        entropy_rate(&self.graph)
    }

    pub fn f_div(&self) -> f64 {
        diversity(&self.topic_sums)
    }

    /// `rank,word,marginal_gain,cost,cumulative_cost,objective_value`
    pub fn write_csv<W: Write>(&self, words: &[String], mut out: W) -> Result<()> {
        writeln!(out, "rank,word,marginal_gain,cost,cumulative_cost,objective_value")?;
        for (rank, step) in self.history.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                rank + 1,
                words[step.word],
                exact(step.marginal_gain),
                exact(step.cost),
                exact(step.cumulative_cost),
                exact(step.objective)
            )?;
        }
        Ok(())
    }
}

/// Parses the word column of a selection CSV, in rank order.
pub fn read_selected_words<R: std::io::Read>(input: R) -> Result<Vec<String>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(crate::table::csv_err)?.clone();
    let col = header
        .iter()
        .position(|h| h == "word")
        .ok_or_else(|| Error::Format("selection CSV lacks a word column".into()))?;
    r.records()
        .map(|rec| Ok(rec.map_err(crate::table::csv_err)?[col].to_string()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreedyKey {
    /// Rank candidates by raw marginal gain.
    Gain,
    /// Rank candidates by marginal gain per unit cost.
    GainPerCost,
}

impl GreedyKey {
    fn score(self, gain: f64, cost: f64) -> f64 {
        match self {
            GreedyKey::Gain => gain,
            GreedyKey::GainPerCost => gain / cost,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    key: f64,
    word: usize,
    /// Size of the selected set when `key` was computed.
    fresh_at: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap on key; lower word index wins ties.
        self.key.total_cmp(&other.key).then_with(|| other.word.cmp(&self.word))
    }
}

fn check_budget(problem: &SelectionProblem, budget: f64) -> Result<()> {
    if budget.is_nan() {
        return Err(Error::InvalidArgument("budget is NaN".into()));
    }
    let cheapest = problem.costs.iter().copied().fold(f64::INFINITY, f64::min);
    if problem.n_words() == 0 || budget < cheapest {
        return Err(Error::Empty(format!("budget {budget} is below the cheapest word cost {cheapest}")));
    }
    Ok(())
}

/// One lazy-greedy pass. Words are added while they fit in the remaining
/// budget and their gain is positive.
pub fn lazy_greedy(problem: &SelectionProblem, budget: f64, key: GreedyKey) -> SelectionState {
    let mut state = problem.empty_state();
    let mut heap: BinaryHeap<Candidate> = (0..problem.n_words())
        .filter(|&w| problem.costs[w] <= budget)
        .map(|w| Candidate {
            key: key.score(problem.marginal_gain(&state, w), problem.costs[w]),
            word: w,
            fresh_at: 0,
        })
        .collect();
    while let Some(top) = heap.pop() {
        let cost = problem.costs[top.word];
        if state.spent_cost + cost > budget {
            // Remaining budget only shrinks, so this word never fits again.
            continue;
        }
        if top.fresh_at == state.len() {
            if top.key <= 0.0 {
                break;
            }
            problem.insert(&mut state, top.word);
        } else {
            let gain = problem.marginal_gain(&state, top.word);
            heap.push(Candidate { key: key.score(gain, cost), word: top.word, fresh_at: state.len() });
        }
    }
    state
}

/// Plain greedy: re-evaluates every feasible candidate at every step.
pub fn naive_greedy(problem: &SelectionProblem, budget: f64, key: GreedyKey) -> SelectionState {
    let mut state = problem.empty_state();
    loop {
        let best = (0..problem.n_words())
            .filter(|&w| !state.contains(w) && state.spent_cost + problem.costs[w] <= budget)
            .map(|w| Candidate {
                key: key.score(problem.marginal_gain(&state, w), problem.costs[w]),
                word: w,
                fresh_at: state.len(),
            })
            .max();
        match best {
            Some(c) if c.key > 0.0 => problem.insert(&mut state, c.word),
            _ => return state,
        }
    }
}

/// Runs the gain pass and the gain-per-cost pass and keeps the set with the
/// larger objective (the gain pass on ties).
pub fn select_vocabulary(problem: &SelectionProblem, budget: f64) -> Result<SelectionState> {
    check_budget(problem, budget)?;
    let by_gain = lazy_greedy(problem, budget, GreedyKey::Gain);
    let by_ratio = lazy_greedy(problem, budget, GreedyKey::GainPerCost);
    Ok(if by_ratio.objective > by_gain.objective { by_ratio } else { by_gain })
}

/// [`select_vocabulary`] with naive greedy passes; same output, slower.
pub fn select_vocabulary_naive(problem: &SelectionProblem, budget: f64) -> Result<SelectionState> {
    check_budget(problem, budget)?;
    let by_gain = naive_greedy(problem, budget, GreedyKey::Gain);
    let by_ratio = naive_greedy(problem, budget, GreedyKey::GainPerCost);
    Ok(if by_ratio.objective > by_gain.objective { by_ratio } else { by_gain })
}
