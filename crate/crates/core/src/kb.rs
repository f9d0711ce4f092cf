//! Subject–predicate–object store with human-readable predicate labels.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

/// In-memory knowledge base, immutable once loaded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Kb {
    facts: HashMap<String, BTreeMap<String, BTreeSet<String>>>,
    labels: HashMap<String, String>,
    triples: usize,
    skipped: usize,
}

/// Label for a predicate that has none: its local name with camel case and
/// underscores split into lowercase words (`dbp:timeZone` → `time zone`).
pub fn default_label(predicate: &str) -> String {
    let local = predicate
        .rsplit(|c| c == ':' || c == '/' || c == '#')
        .next()
        .unwrap_or(predicate);
    let mut words: Vec<String> = Vec::new();
    let mut cur = String::new();
    let mut prev_lower = false;
    for ch in local.chars() {
        if ch == '_' || ch == '-' || ch.is_whitespace() {
            if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
            prev_lower = false;
            continue;
        }
        if ch.is_uppercase() && prev_lower && !cur.is_empty() {
            words.push(std::mem::take(&mut cur));
        }
        prev_lower = ch.is_lowercase() || ch.is_ascii_digit();
        cur.extend(ch.to_lowercase());
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    if words.is_empty() {
        predicate.to_lowercase()
    } else {
        words.join(" ")
    }
}

impl Kb {
    pub fn from_triples<I: IntoIterator<Item = Triple>>(triples: I) -> Kb {
        let mut kb = Kb::default();
        for t in triples {
            kb.insert(t);
        }
        kb
    }

    fn insert(&mut self, t: Triple) {
        let added = self
            .facts
            .entry(t.subject)
            .or_default()
            .entry(t.predicate)
            .or_default()
            .insert(t.object);
        if added {
            self.triples += 1;
        }
    }

    /// Add labels from `(predicate, label)` pairs; the first label seen for a
    /// predicate wins.
    pub fn with_labels<I, S>(mut self, labels: I) -> Kb
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        for (p, l) in labels {
            let l = l.into();
            if !l.trim().is_empty() {
                self.labels.entry(p.into()).or_insert(l);
            }
        }
        self
    }

    pub fn parse(triples: &str, labels: &str) -> Kb {
        Self::parse_filtered(triples, labels, |_| true)
    }

    /// Parse tab-separated triple and label files, keeping only triples
    /// whose subject passes `keep_subject`.
    pub fn parse_filtered<F: Fn(&str) -> bool>(triples: &str, labels: &str, keep_subject: F) -> Kb {
        let mut kb = Kb::default();
        for line in triples.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            match parts.as_slice() {
                [s, p, o] if !s.trim().is_empty() && !p.trim().is_empty() && !o.trim().is_empty() => {
                    if keep_subject(s.trim()) {
                        kb.insert(Triple {
                            subject: s.trim().to_string(),
                            predicate: p.trim().to_string(),
                            object: o.trim().to_string(),
                        });
                    }
                }
                _ => kb.skipped += 1,
            }
        }
        for line in labels.lines() {
            if line.trim().is_empty() {
                continue;
            }
            match line.split_once('\t') {
                Some((p, l)) if !p.trim().is_empty() && !l.trim().is_empty() => {
                    kb.labels
                        .entry(p.trim().to_string())
                        .or_insert_with(|| l.trim().to_string());
                }
                _ => kb.skipped += 1,
            }
        }
        kb
    }

    pub fn len(&self) -> usize {
        self.triples
    }

    pub fn is_empty(&self) -> bool {
        self.triples == 0
    }

    /// Malformed lines skipped while parsing.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn num_subjects(&self) -> usize {
        self.facts.len()
    }

    pub fn has_subject(&self, e: &str) -> bool {
        self.facts.contains_key(e)
    }

    /// Objects of `⟨e, p, ?⟩`, sorted.
    pub fn lookup(&self, e: &str, p: &str) -> Vec<&str> {
        self.facts
            .get(e)
            .and_then(|ps| ps.get(p))
            .map(|os| os.iter().map(String::as_str).collect())
            .unwrap_or_default()
    }

    /// Predicates with at least one triple for `e`, sorted.
    pub fn predicates_of(&self, e: &str) -> Vec<&str> {
        self.facts
            .get(e)
            .map(|ps| ps.keys().map(String::as_str).collect())
            .unwrap_or_default()
    }

    /// Human-readable label, falling back to [`default_label`].
    pub fn label(&self, p: &str) -> String {
        self.labels
            .get(p)
            .cloned()
            .unwrap_or_else(|| default_label(p))
    }

    /// Explicit `(predicate, label)` pairs, sorted.
    pub fn labels(&self) -> Vec<(&str, &str)> {
        let mut v: Vec<(&str, &str)> = self.labels.iter().map(|(p, l)| (p.as_str(), l.as_str())).collect();
        v.sort_unstable();
        v
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.facts.iter().flat_map(|(s, ps)| {
            ps.iter().flat_map(move |(p, os)| {
                os.iter().map(move |o| Triple {
                    subject: s.clone(),
                    predicate: p.clone(),
                    object: o.clone(),
                })
            })
        })
    }
}

pub fn load_kb(triples: &Path, labels: &Path) -> Result<Kb> {
    let t = fs::read_to_string(triples).map_err(|e| Error::io(triples, e))?;
    let l = fs::read_to_string(labels).map_err(|e| Error::io(labels, e))?;
    Ok(Kb::parse(&t, &l))
}
