//! Heading label embeddings trained with skip-gram and negative sampling.
//!
//! Each table contributes one "sentence": its ordered list of heading
//! labels, every other label of the table serving as context. A label's
//! final vector is the sum of its input and output vectors, so labels that
//! co-occur directly end up close as well as labels that share contexts.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::table::Corpus;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingParams {
    pub dim: usize,
    pub epochs: usize,
    pub negative: usize,
    pub learning_rate: f64,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for EmbeddingParams {
    fn default() -> Self {
        EmbeddingParams {
            dim: 64,
            epochs: 15,
            negative: 5,
            learning_rate: 0.025,
            min_count: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelEmbeddings {
    dim: usize,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x > 30.0 {
        1.0
    } else if x < -30.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// Train embeddings on the heading lists of `corpus`.
pub fn train_label_embeddings(corpus: &Corpus, params: &EmbeddingParams) -> Result<LabelEmbeddings> {
    let sentences: Vec<&[String]> = corpus.tables().iter().map(|t| t.headings.as_slice()).collect();
    train_on_sentences(&sentences, params)
}

pub fn train_on_sentences(sentences: &[&[String]], params: &EmbeddingParams) -> Result<LabelEmbeddings> {
    if params.dim == 0 {
        return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in sentences {
        for label in s.iter() {
            *counts.entry(label.as_str()).or_insert(0) += 1;
        }
    }
    let mut vocab: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, n)| n >= params.min_count)
        .collect();
    vocab.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    if vocab.len() < 2 {
        return Err(Error::Training(format!(
            "{} heading label(s) reach the minimum count of {}; need at least 2",
            vocab.len(),
            params.min_count
        )));
    }
    let index: HashMap<String, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, (l, _))| (l.to_string(), i))
        .collect();

    let encoded: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|l| index.get(l).copied()).collect::<Vec<_>>())
        .filter(|s| s.len() >= 2)
        .collect();

    // Unigram^0.75 noise distribution.
    let mut cumulative = Vec::with_capacity(vocab.len());
    let mut acc = 0.0;
    for &(_, n) in &vocab {
        acc += (n as f64).powf(0.75);
        cumulative.push(acc);
    }

    let dim = params.dim;
    let v = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut input: Vec<f64> = (0..v * dim)
        .map(|_| (rng.gen::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut output = vec![0.0; v * dim];

    let pairs_per_epoch: usize = encoded.iter().map(|s| s.len() * (s.len() - 1)).sum();
    let total = (pairs_per_epoch * params.epochs).max(1) as f64;
    let mut seen = 0usize;
    let mut grad = vec![0.0; dim];
    let mut order: Vec<usize> = (0..encoded.len()).collect();

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &si in &order {
            let sentence = &encoded[si];
            for (i, &center) in sentence.iter().enumerate() {
                for (j, &context) in sentence.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let lr = params.learning_rate * (1.0 - seen as f64 / total).max(1e-4);
                    seen += 1;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let c_in = center * dim;
                    for k in 0..=params.negative {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let r = rng.gen::<f64>() * acc;
                            let t = cumulative.partition_point(|&x| x < r).min(v - 1);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let t_out = target * dim;
                        let dot: f64 = (0..dim).map(|d| input[c_in + d] * output[t_out + d]).sum();
                        let g = (label - sigmoid(dot)) * lr;
                        for d in 0..dim {
                            grad[d] += g * output[t_out + d];
                            output[t_out + d] += g * input[c_in + d];
                        }
                    }
                    for d in 0..dim {
                        input[c_in + d] += grad[d];
                    }
                }
            }
        }
    }

    let vectors = input.iter().zip(&output).map(|(a, b)| a + b).collect();
    Ok(LabelEmbeddings {
        dim,
        vocab: vocab.into_iter().map(|(l, _)| l.to_string()).collect(),
        index,
        vectors,
    })
}

impl LabelEmbeddings {
    pub fn from_vectors(dim: usize, entries: Vec<(String, Vec<f64>)>) -> Result<LabelEmbeddings> {
        let mut vocab = Vec::with_capacity(entries.len());
        let mut index = HashMap::new();
        let mut vectors = Vec::with_capacity(entries.len() * dim);
        for (label, vec) in entries {
            if vec.len() != dim || vec.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "vector for `{label}` must have {dim} finite components"
                )));
            }
            if index.contains_key(&label) {
                continue;
            }
            index.insert(label.clone(), vocab.len());
            vocab.push(label);
            vectors.extend(vec);
        }
        Ok(LabelEmbeddings {
            dim,
            vocab,
            index,
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn vector(&self, label: &str) -> Option<&[f64]> {
        let i = *self.index.get(label)?;
        Some(&self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    /// Raw cosine in `[-1, 1]`; `None` when either label is out of vocabulary.
    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        let (x, y) = (self.vector(a)?, self.vector(b)?);
        let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
        let nx = x.iter().map(|p| p * p).sum::<f64>().sqrt();
        let ny = y.iter().map(|p| p * p).sum::<f64>().sqrt();
        if nx == 0.0 || ny == 0.0 {
            return Some(0.0);
        }
        Some((dot / (nx * ny)).clamp(-1.0, 1.0))
    }

    /// Similarity weight in `[0, 1]`: cosine clamped at zero, zero for
    /// out-of-vocabulary labels.
    pub fn l2v_sim(&self, h_prime: &str, h: &str) -> f64 {
        if h_prime == h && self.index.contains_key(h) {
            return 1.0;
        }
        self.cosine(h_prime, h).map_or(0.0, |c| c.max(0.0))
    }

    /// Text vector format: a version line, `count dim`, then
    /// `label v1 … vdim` per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("# cellac-embeddings v1\n{} {}\n", self.vocab.len(), self.dim);
        for (i, label) in self.vocab.iter().enumerate() {
            out.push_str(label);
            for x in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        out
    }

    /// Parse the text vector format. Labels may contain spaces: the last
    /// `dim` fields of a line are the vector.
    pub fn from_text(text: &str) -> Result<LabelEmbeddings> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
        let (hl, header) = lines
            .next()
            .ok_or_else(|| Error::parse("embeddings", 1, "missing `count dim` header"))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        let dim: usize = match head.as_slice() {
            [_, d] => d
                .parse()
                .map_err(|_| Error::parse("embeddings", hl + 1, "bad dimension"))?,
            _ => return Err(Error::parse("embeddings", hl + 1, "expected `count dim` header")),
        };
        let mut entries = Vec::new();
        for (i, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() <= dim {
                return Err(Error::parse("embeddings", i + 1, "too few fields"));
            }
            let split = fields.len() - dim;
            let vec = fields[split..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::parse("embeddings", i + 1, "bad number"))?;
            entries.push((fields[..split].join(" "), vec));
        }
        Self::from_vectors(dim, entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<LabelEmbeddings> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentences(spec: &[&[&str]]) -> Vec<Vec<String>> {
        spec.iter()
            .map(|s| s.iter().map(|x| x.to_string()).collect())
            .collect()
    }

    fn params(seed: u64) -> EmbeddingParams {
        EmbeddingParams {
            dim: 16,
            epochs: 50,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn cooccurring_labels_end_up_closer() {
        let mut spec: Vec<&[&str]> = Vec::new();
        for _ in 0..30 {
            spec.push(&["a", "b"]);
            spec.push(&["c", "d"]);
        }
        let owned = sentences(&spec);
        let refs: Vec<&[String]> = owned.iter().map(Vec::as_slice).collect();
        for seed in 0..5 {
            let emb = train_on_sentences(&refs, &params(seed)).unwrap();
            assert_eq!(emb.dim(), 16);
            let ab = emb.cosine("a", "b").unwrap();
            let ac = emb.cosine("a", "c").unwrap();
            assert!(ab > ac, "seed {seed}: cos(a,b)={ab} cos(a,c)={ac}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let owned = sentences(&[&["x", "y", "z"], &["x", "y"], &["y", "z"]]);
        let refs: Vec<&[String]> = owned.iter().map(Vec::as_slice).collect();
        let a = train_on_sentences(&refs, &params(7)).unwrap();
        let b = train_on_sentences(&refs, &params(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_labels() {
        let owned = sentences(&[&["only"], &["only"], &["rare"]]);
        let refs: Vec<&[String]> = owned.iter().map(Vec::as_slice).collect();
        assert!(train_on_sentences(&refs, &params(0)).is_err());
    }

    #[test]
    fn similarity_contract() {
        let emb = LabelEmbeddings::from_vectors(
            2,
            vec![
                ("x".into(), vec![1.0, 0.0]),
                ("y".into(), vec![0.0, 1.0]),
                ("neg".into(), vec![-1.0, 0.0]),
            ],
        )
        .unwrap();
        assert_eq!(emb.l2v_sim("x", "x"), 1.0);
        assert_eq!(emb.l2v_sim("x", "y"), 0.0);
        assert_eq!(emb.l2v_sim("x", "neg"), 0.0);
        assert_eq!(emb.l2v_sim("x", "oov"), 0.0);
        assert!(LabelEmbeddings::from_vectors(2, vec![("bad".into(), vec![f64::NAN, 0.0])]).is_err());
    }

    #[test]
    fn text_round_trip_with_spaced_labels() {
        let emb = LabelEmbeddings::from_vectors(
            3,
            vec![
                ("time zone".into(), vec![0.1, -2.5, 1e-7]),
                ("name".into(), vec![1.0, 2.0, 3.0]),
            ],
        )
        .unwrap();
        let back = LabelEmbeddings::from_text(&emb.to_text()).unwrap();
        assert_eq!(back, emb);
        // plain word2vec text files load too
        let w2v = LabelEmbeddings::from_text("1 2\nfoo 0.5 0.25\n").unwrap();
        assert_eq!(w2v.vector("foo"), Some(&[0.5, 0.25][..]));
    }
}
