//! Reference computations written directly from the defining formulas,
//! sharing no code with the library.

use ndarray::Array2;

/// Entropy rate of the walk on the class graph for word set `set`, built
/// edge by edge: off-diagonal weight Σ_{w∈S}|v_i−v_j|, self loop the same
/// sum over the complement, transition = weight / row total.
pub fn entropy_rate(v: &Array2<f64>, set: &[usize]) -> f64 {
    let (n, m) = v.dim();
    let in_set: Vec<bool> = (0..m).map(|w| set.contains(&w)).collect();
    let mut g = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for w in 0..m {
                let d = (v[[i, w]] - v[[j, w]]).abs();
                if in_set[w] {
                    g[[i, j]] += d;
                } else {
                    g[[i, i]] += d;
                }
            }
        }
    }
    let row_totals: Vec<f64> = (0..n).map(|i| g.row(i).sum()).collect();
    let total: f64 = row_totals.iter().sum();
    let mut h = 0.0;
    for i in 0..n {
        let mu = row_totals[i] / total;
        for j in 0..n {
            let p = g[[i, j]] / row_totals[i];
            if p > 0.0 {
                h -= mu * p * p.ln();
            }
        }
    }
    h
}

/// Σ_k sqrt(Σ_{w∈S, topic(w)=k} mass(w)).
pub fn diversity(word_topics: &[(usize, f64)], n_topics: usize, set: &[usize]) -> f64 {
    let mut sums = vec![0.0; n_topics];
    for &w in set {
        sums[word_topics[w].0] += word_topics[w].1;
    }
    sums.iter().map(|s: &f64| s.sqrt()).sum()
}

/// Best objective over every subset with total cost within `budget`.
pub fn brute_force_optimum(n_words: usize, costs: &[f64], budget: f64, f: impl Fn(&[usize]) -> f64) -> (f64, Vec<usize>) {
    let mut best = (0.0, Vec::new());
    for mask in 0u32..(1 << n_words) {
        let set: Vec<usize> = (0..n_words).filter(|&w| mask & (1 << w) != 0).collect();
        let cost: f64 = set.iter().map(|&w| costs[w]).sum();
        if cost > budget {
            continue;
        }
        let value = f(&set);
        if value > best.0 {
            best = (value, set);
        }
    }
    best
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn numeric_gradient(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a − n| / max(|a|, |n|, floor)`, maximized over coordinates.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn dcg(grades: &[f64], k: usize) -> f64 {
    grades.iter().take(k).enumerate().map(|(i, &r)| (2f64.powf(r) - 1.0) / ((i + 2) as f64).log2()).sum()
}

pub fn ndcg(produced: &[f64], k: usize) -> f64 {
    let mut ideal = produced.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    dcg(produced, k) / dcg(&ideal, k)
}

/// Step-curve AP: mean precision at the rank of each positive.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let positives = labels.iter().filter(|&&l| l).count() as f64;
    let mut hits = 0.0;
    let mut acc = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1.0;
            acc += hits / (rank + 1) as f64;
        }
    }
    acc / positives
}

/// Fraction of positive/negative pairs ordered correctly, ties counted half.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut good, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    good += 1.0;
                } else if scores[i] == scores[j] {
                    good += 0.5;
                }
            }
        }
    }
    good / pairs
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
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
