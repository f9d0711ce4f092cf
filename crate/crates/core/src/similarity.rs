//! String and bag-of-terms similarities.

use std::collections::BTreeMap;

use crate::table::tokenize;

/// Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - dist(a, b) / max(|a|, |b|)`; two empty strings are identical.
pub fn edit_sim(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

/// Sparse term-weight vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermVector(BTreeMap<String, f64>);

impl TermVector {
    /// Term-frequency vector of a text.
    pub fn tf(text: &str) -> Self {
        let mut v = TermVector::default();
        v.add_text(text);
        v
    }

    /// Binary (presence) vector over several texts.
    pub fn binary<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> Self {
        let mut m = BTreeMap::new();
        for t in texts {
            for term in tokenize(t) {
                m.insert(term, 1.0);
            }
        }
        TermVector(m)
    }

    pub fn add_text(&mut self, text: &str) {
        for term in tokenize(text) {
            *self.0.entry(term).or_insert(0.0) += 1.0;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn norm(&self) -> f64 {
        self.0.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Cosine similarity; 0 when either vector is empty.
    pub fn cosine(&self, other: &TermVector) -> f64 {
        let (small, large) = if self.0.len() <= other.0.len() {
            (self, other)
        } else {
            (other, self)
        };
        let dot: f64 = small
            .0
            .iter()
            .filter_map(|(t, w)| large.0.get(t).map(|x| w * x))
            .sum();
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            (dot / denom).clamp(0.0, 1.0)
        }
    }
}

/// Maximum-weight bipartite matching on a dense `rows × cols` matrix of
/// nonnegative weights. Returns the total weight and the matched
/// `(row, col)` pairs with positive weight.
pub fn max_weight_matching(weights: &[Vec<f64>]) -> (f64, Vec<(usize, usize)>) {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return (0.0, Vec::new());
    }
    let n = rows.max(cols);
    let max_w = weights
        .iter()
        .flatten()
        .copied()
        .fold(0.0_f64, f64::max);
    // Square min-cost problem; padding cells carry zero weight.
    let cost = |i: usize, j: usize| -> f64 {
        let w = if i < rows && j < cols { weights[i][j] } else { 0.0 };
        max_w - w
    };

    // Shortest augmenting path Hungarian method, 1-based with a virtual
    // column 0.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs = Vec::new();
    let mut total = 0.0;
    for j in 1..=n {
        let (i, j) = (p[j] - 1, j - 1);
        if i < rows && j < cols && weights[i][j] > 0.0 {
            total += weights[i][j];
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    (total, pairs)
}
