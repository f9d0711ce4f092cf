//! Heading-to-heading and heading-to-predicate co-occurrence statistics.
//!
//! `n(h', h)` counts, per entity, the table pairs whose columns labeled `h'`
//! and `h` hold equal values for that entity; one increment per
//! `(entity, row pair, column pair)`. `n(h, p)` counts corpus cells under `h`
//! whose value equals an object of predicate `p` for the row's entity. The
//! conditional probabilities `P(h'|h)` and `P(p|h)` are the counts
//! normalized over the conditioning heading.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kb::Kb;
use crate::table::Corpus;
use crate::types::{normalize, values_equal, NormalizedValue, ValueType};

type Counts = HashMap<String, HashMap<String, u64>>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HeadingStats {
    /// `h -> h' -> n(h', h)`
    h2h: Counts,
    h2h_totals: HashMap<String, u64>,
    /// `h -> p -> n(h, p)`
    h2p: Counts,
    h2p_totals: HashMap<String, u64>,
}

fn merge(mut a: Counts, b: Counts) -> Counts {
    for (h, inner) in b {
        let slot = a.entry(h).or_default();
        for (k, n) in inner {
            *slot.entry(k).or_insert(0) += n;
        }
    }
    a
}

fn totals(c: &Counts) -> HashMap<String, u64> {
    c.iter().map(|(h, inner)| (h.clone(), inner.values().sum())).collect()
}

fn bump(c: &mut Counts, outer: &str, inner: &str) {
    *c.entry(outer.to_string())
        .or_default()
        .entry(inner.to_string())
        .or_insert(0) += 1;
}

/// Normalize a KB object for comparison against a value of type `ty`.
pub fn normalize_object(object: &str, ty: ValueType) -> NormalizedValue {
    match ty {
        ValueType::Entity => NormalizedValue::entity(object),
        _ => normalize(object, ty),
    }
}

/// Count `n(h', h)` over the corpus.
pub fn count_h2h(corpus: &Corpus) -> Counts {
    let entities: Vec<&String> = corpus.index().by_entity.keys().collect();
    entities
        .par_iter()
        .fold(Counts::new, |mut acc, e| {
            let rows = corpus.entity_rows(e);
            for (i, a) in rows.iter().enumerate() {
                for b in &rows[i + 1..] {
                    if a.table == b.table {
                        continue;
                    }
                    let (ta, tb) = (corpus.table(a.table), corpus.table(b.table));
                    let (ra, rb) = (&ta.rows[a.row as usize], &tb.rows[b.row as usize]);
                    for (ca, cell_a) in ra.iter().enumerate() {
                        let Some(va) = cell_a.norm.as_ref().filter(|_| ca != ta.core_column) else {
                            continue;
                        };
                        for (cb, cell_b) in rb.iter().enumerate() {
                            let Some(vb) = cell_b.norm.as_ref().filter(|_| cb != tb.core_column) else {
                                continue;
                            };
                            if values_equal(va, vb) {
                                let (ha, hb) = (&ta.headings[ca], &tb.headings[cb]);
                                bump(&mut acc, hb, ha);
                                if ha != hb {
                                    bump(&mut acc, ha, hb);
                                }
                            }
                        }
                    }
                }
            }
            acc
        })
        .reduce(Counts::new, merge)
}

/// Count `n(h, p)` over the corpus and KB.
pub fn count_h2p(corpus: &Corpus, kb: &Kb) -> Counts {
    corpus
        .tables()
        .par_iter()
        .fold(Counts::new, |mut acc, table| {
            for row in &table.rows {
                let Some(e) = row[table.core_column].entity.as_deref() else {
                    continue;
                };
                let predicates = kb.predicates_of(e);
                if predicates.is_empty() {
                    continue;
                }
                for (c, cell) in row.iter().enumerate() {
                    let Some(v) = cell.norm.as_ref().filter(|_| c != table.core_column) else {
                        continue;
                    };
                    for p in &predicates {
                        let hit = kb
                            .lookup(e, p)
                            .into_iter()
                            .any(|o| values_equal(&normalize_object(o, v.ty), v));
                        if hit {
                            bump(&mut acc, &table.headings[c], p);
                        }
                    }
                }
            }
            acc
        })
        .reduce(Counts::new, merge)
}

impl HeadingStats {
    pub fn build(corpus: &Corpus, kb: &Kb) -> HeadingStats {
        Self::from_counts(count_h2h(corpus), count_h2p(corpus, kb))
    }

    pub fn from_counts(h2h: Counts, h2p: Counts) -> HeadingStats {
        HeadingStats {
            h2h_totals: totals(&h2h),
            h2p_totals: totals(&h2p),
            h2h,
            h2p,
        }
    }

    /// `n(h', h)`
    pub fn n_hh(&self, h_prime: &str, h: &str) -> u64 {
        self.h2h.get(h).and_then(|m| m.get(h_prime)).copied().unwrap_or(0)
    }

    /// `n(h, p)`
    pub fn n_hp(&self, h: &str, p: &str) -> u64 {
        self.h2p.get(h).and_then(|m| m.get(p)).copied().unwrap_or(0)
    }

    /// `P(h'|h)`; zero for unseen `h`.
    pub fn p_h2h(&self, h_prime: &str, h: &str) -> f64 {
        match self.h2h_totals.get(h) {
            Some(&t) if t > 0 => self.n_hh(h_prime, h) as f64 / t as f64,
            _ => 0.0,
        }
    }

    /// `P(p|h)`; zero for unseen `h`.
    pub fn p_p2h(&self, p: &str, h: &str) -> f64 {
        match self.h2p_totals.get(h) {
            Some(&t) if t > 0 => self.n_hp(h, p) as f64 / t as f64,
            _ => 0.0,
        }
    }

    /// Headings `h'` with `n(h', h) > 0`, sorted.
    pub fn related_headings(&self, h: &str) -> Vec<(&str, u64)> {
        sorted_entries(self.h2h.get(h))
    }

    /// Predicates `p` with `n(h, p) > 0`, sorted.
    pub fn matched_predicates(&self, h: &str) -> Vec<(&str, u64)> {
        sorted_entries(self.h2p.get(h))
    }

    pub fn h2h_total(&self, h: &str) -> u64 {
        self.h2h_totals.get(h).copied().unwrap_or(0)
    }

    pub fn h2p_total(&self, h: &str) -> u64 {
        self.h2p_totals.get(h).copied().unwrap_or(0)
    }

    pub fn h2h_counts(&self) -> &Counts {
        &self.h2h
    }

    pub fn h2p_counts(&self) -> &Counts {
        &self.h2p
    }

    /// `h'\th\tcount` lines.
    pub fn h2h_tsv(&self) -> String {
        to_tsv("# cellac-h2h v1", &self.h2h, |outer, inner| (inner, outer))
    }

    /// `h\tp\tcount` lines.
    pub fn h2p_tsv(&self) -> String {
        to_tsv("# cellac-h2p v1", &self.h2p, |outer, inner| (outer, inner))
    }

    pub fn from_tsv(h2h: &str, h2p: &str) -> Result<HeadingStats> {
        let hh = parse_tsv("h2h", h2h, |a, b| (b, a))?;
        let hp = parse_tsv("h2p", h2p, |a, b| (a, b))?;
        Ok(Self::from_counts(hh, hp))
    }

    pub fn save(&self, h2h_path: &Path, h2p_path: &Path) -> Result<()> {
        fs::write(h2h_path, self.h2h_tsv()).map_err(|e| Error::io(h2h_path, e))?;
        fs::write(h2p_path, self.h2p_tsv()).map_err(|e| Error::io(h2p_path, e))
    }

    pub fn load(h2h_path: &Path, h2p_path: &Path) -> Result<HeadingStats> {
        let a = fs::read_to_string(h2h_path).map_err(|e| Error::io(h2h_path, e))?;
        let b = fs::read_to_string(h2p_path).map_err(|e| Error::io(h2p_path, e))?;
        Self::from_tsv(&a, &b)
    }
}

fn sorted_entries(m: Option<&HashMap<String, u64>>) -> Vec<(&str, u64)> {
    let mut v: Vec<(&str, u64)> = m
        .map(|m| m.iter().map(|(k, &n)| (k.as_str(), n)).collect())
        .unwrap_or_default();
    v.sort_unstable();
    v
}

fn to_tsv<'a, F>(header: &str, counts: &'a Counts, order: F) -> String
where
    F: Fn(&'a str, &'a str) -> (&'a str, &'a str),
{
    let mut lines: Vec<(&str, &str, u64)> = counts
        .iter()
        .flat_map(|(outer, inner)| {
            inner.iter().map(|(k, &n)| {
                let (a, b) = order(outer, k);
                (a, b, n)
            })
        })
        .collect();
    lines.sort_unstable();
    let mut out = String::from(header);
    out.push('\n');
    for (a, b, n) in lines {
        let _ = writeln!(out, "{a}\t{b}\t{n}");
    }
    out
}

fn parse_tsv<F>(what: &str, text: &str, outer_inner: F) -> Result<Counts>
where
    F: for<'a> Fn(&'a str, &'a str) -> (&'a str, &'a str),
{
    let mut counts = Counts::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(Error::parse(what, i + 1, "expected 3 tab-separated fields"));
        };
        let n: u64 = n
            .trim()
            .parse()
            .map_err(|_| Error::parse(what, i + 1, format!("bad count `{n}`")))?;
        let (outer, inner) = outer_inner(a, b);
        *counts
            .entry(outer.to_string())
            .or_default()
            .entry(inner.to_string())
            .or_insert(0) += n;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(hh: &[(&str, &str, u64)], hp: &[(&str, &str, u64)]) -> HeadingStats {
        let mut a = Counts::new();
        for &(hp_, h, n) in hh {
            a.entry(h.into()).or_default().insert(hp_.into(), n);
        }
        let mut b = Counts::new();
        for &(h, p, n) in hp {
            b.entry(h.into()).or_default().insert(p.into(), n);
        }
        HeadingStats::from_counts(a, b)
    }

    #[test]
    fn h2h_probabilities() {
        let s = stats(&[("h", "h", 5)], &[]);
        assert_eq!(s.p_h2h("h", "h"), 1.0);
        let s = stats(&[("a", "h", 3), ("b", "h", 1)], &[]);
        assert_eq!(s.p_h2h("a", "h"), 0.75);
        assert_eq!(s.p_h2h("a", "unseen"), 0.0);
    }

    #[test]
    fn h2p_probabilities() {
        let s = stats(&[], &[("director", "dbp:director", 38587), ("director", "dbp:writer", 2348)]);
        let p = s.p_p2h("dbp:director", "director");
        assert!((p - 38587.0 / 40935.0).abs() < 1e-15);
        assert!((p - 0.9426).abs() < 1e-4);
        let single = stats(&[], &[("country", "dbp:country", 7)]);
        assert_eq!(single.p_p2h("dbp:country", "country"), 1.0);
        assert_eq!(single.p_p2h("dbp:country", "never"), 0.0);
    }

    #[test]
    fn tsv_round_trip() {
        let s = stats(
            &[("founded", "established", 2), ("established", "founded", 2), ("h", "h", 3)],
            &[("director", "dbp:director", 4)],
        );
        let back = HeadingStats::from_tsv(&s.h2h_tsv(), &s.h2p_tsv()).unwrap();
        assert_eq!(back, s);
        assert!(s.h2h_tsv().contains("founded\testablished\t2"));
        assert!(HeadingStats::from_tsv("a\tb\n", "").is_err());
    }
}
