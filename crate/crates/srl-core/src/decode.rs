//! Constrained decoding of BIO role-tag sequences: a bigram transition
//! model estimated from training data, exact Viterbi search and a greedy
//! baseline.
//!
//! Invalid transitions (start -> I-X, O -> I-X, B-X/I-X -> I-Y for Y != X)
//! are structurally excluded; valid ones carry add-one-smoothed log
//! relative frequencies. Ties everywhere resolve to the lowest label
//! index, and the label inventory orders O before B-* before I-*, so
//! all-O wins under fully uniform scores.

use serde::{Deserialize, Serialize};

use crate::data::Sentence;
use crate::tensor::Array;

/// Is `to` a structurally valid successor of `from` (`None` = start)?
pub fn bio_transition_valid(from: Option<&str>, to: &str) -> bool {
    match to.strip_prefix("I-") {
        None => true,
        Some(label) => match from {
            None => false,
            Some(prev) => {
                prev.strip_prefix("B-") == Some(label) || prev.strip_prefix("I-") == Some(label)
            }
        },
    }
}

/// Log-weight bigram model over a fixed BIO label inventory, with the
/// structural mask stored as absent weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionModel {
    labels: Vec<String>,
    /// start -> label; `None` marks a structurally invalid transition.
    start: Vec<Option<f64>>,
    /// label -> end (always structurally valid).
    end: Vec<f64>,
    /// from x to, row-major; `None` marks a structurally invalid transition.
    weights: Vec<Option<f64>>,
}

impl TransitionModel {
    /// Estimate from the gold frames of a corpus. An empty corpus yields
    /// the smoothed-uniform model over valid transitions.
    pub fn from_corpus(corpus: &[Sentence], labels: &[String]) -> Self {
        let n = labels.len();
        let index = |tag: &str| labels.iter().position(|l| l == tag);

        let mut start_counts = vec![0usize; n];
        let mut end_counts = vec![0usize; n];
        let mut counts = vec![0usize; n * n];
        for sentence in corpus {
            for frame in &sentence.frames {
                let ids: Vec<usize> = frame.iter().filter_map(|t| index(t)).collect();
                if ids.len() != frame.len() || ids.is_empty() {
                    continue; // tags outside the inventory
                }
                start_counts[ids[0]] += 1;
                end_counts[*ids.last().expect("non-empty")] += 1;
                for w in ids.windows(2) {
                    counts[w[0] * n + w[1]] += 1;
                }
            }
        }

        // Add-one smoothing over the valid successors of each state.
        let smooth = |counts: &[usize], valid: &dyn Fn(usize) -> bool| -> Vec<Option<f64>> {
            let total: usize = (0..n).filter(|&j| valid(j)).map(|j| counts[j] + 1).sum();
            (0..n)
                .map(|j| {
                    valid(j).then(|| (((counts[j] + 1) as f64) / total as f64).ln())
                })
                .collect()
        };

        let start = smooth(&start_counts, &|j| {
            bio_transition_valid(None, &labels[j])
        });
        let mut weights = vec![None; n * n];
        for i in 0..n {
            let row = smooth(&counts[i * n..(i + 1) * n], &|j| {
                bio_transition_valid(Some(&labels[i]), &labels[j])
            });
            weights[i * n..(i + 1) * n].clone_from_slice(&row);
        }
        let end_total: usize = end_counts.iter().map(|&c| c + 1).sum();
        let end = end_counts
            .iter()
            .map(|&c| (((c + 1) as f64) / end_total as f64).ln())
            .collect();

        Self {
            labels: labels.to_vec(),
            start,
            end,
            weights,
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn start_weight(&self, to: usize) -> f64 {
        self.start[to].unwrap_or(f64::NEG_INFINITY)
    }

    pub fn end_weight(&self, from: usize) -> f64 {
        self.end[from]
    }

    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.weights[from * self.n_labels() + to].unwrap_or(f64::NEG_INFINITY)
    }

    /// Total score of a tag sequence under unary scores plus transitions;
    /// `-inf` for structurally invalid sequences.
    pub fn path_score(&self, tags: &[usize], unary: &Array) -> f64 {
        let mut score = self.start_weight(tags[0]) + unary.at2(0, tags[0]);
        for t in 1..tags.len() {
            score += self.weight(tags[t - 1], tags[t]) + unary.at2(t, tags[t]);
        }
        score + self.end_weight(tags[tags.len() - 1])
    }
}

/// Row-wise log-softmax, the unary scores fed to the decoders.
pub fn log_softmax_rows(logits: &Array) -> Array {
    let (m, n) = logits.dims2();
    let mut data = vec![0.0; m * n];
    for i in 0..m {
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
        for j in 0..n {
            data[i * n + j] = row[j] - lse;
        }
    }
    Array::new(logits.shape().to_vec(), data).expect("same shape")
}

/// Exact argmax over valid BIO sequences by dynamic programming.
/// Returns label indices into the transition model's inventory.
pub fn viterbi_decode(unary: &Array, tm: &TransitionModel) -> Vec<usize> {
    let (t_len, n) = unary.dims2();
    assert_eq!(n, tm.n_labels(), "unary width must match label inventory");

    let mut best = vec![f64::NEG_INFINITY; t_len * n];
    let mut back = vec![0usize; t_len * n];
    for l in 0..n {
        best[l] = tm.start_weight(l) + unary.at2(0, l);
    }
    for t in 1..t_len {
        for l in 0..n {
            let mut best_prev = f64::NEG_INFINITY;
            let mut best_from = 0;
            for f in 0..n {
                let candidate = best[(t - 1) * n + f] + tm.weight(f, l);
                // strict improvement keeps the lowest index on ties
                if candidate > best_prev {
                    best_prev = candidate;
                    best_from = f;
                }
            }
            best[t * n + l] = best_prev + unary.at2(t, l);
            back[t * n + l] = best_from;
        }
    }

    let mut last = 0;
    let mut last_score = f64::NEG_INFINITY;
    for l in 0..n {
        let s = best[(t_len - 1) * n + l] + tm.end_weight(l);
        if s > last_score {
            last_score = s;
            last = l;
        }
    }
    let mut path = vec![0usize; t_len];
    path[t_len - 1] = last;
    for t in (1..t_len).rev() {
        path[t - 1] = back[t * n + path[t]];
    }
    path
}

/// Position-wise argmax with structurally invalid labels masked given the
/// previous choice. Scores the same objective as the exact decoder but
/// commits locally, so its total path score never exceeds Viterbi's.
pub fn greedy_decode(unary: &Array, tm: &TransitionModel) -> Vec<usize> {
    let (t_len, n) = unary.dims2();
    assert_eq!(n, tm.n_labels(), "unary width must match label inventory");

    let mut path = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut best = f64::NEG_INFINITY;
        let mut best_l = 0;
        for l in 0..n {
            let trans = if t == 0 {
                tm.start_weight(l)
            } else {
                tm.weight(path[t - 1], l)
            };
            let s = trans + unary.at2(t, l);
            if s > best {
                best = s;
                best_l = l;
            }
        }
        path.push(best_l);
    }
    path
}

/// Map decoded indices back to tag strings.
pub fn tags_of(path: &[usize], tm: &TransitionModel) -> Vec<String> {
    path.iter().map(|&l| tm.labels()[l].clone()).collect()
}
