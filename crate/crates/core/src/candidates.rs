//! Candidate value pools for a target cell, gathered from the table corpus
//! and the knowledge base, with provenance and the `Empty` sentinel.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use crate::kb::Kb;
use crate::similarity::edit_sim;
use crate::stats::HeadingStats;
use crate::table::{Corpus, Table};
use crate::types::{classify_cell, normalize, values_equal, NormalizedValue, ValueType};

/// Literal used for the sentinel in files and API payloads.
pub const EMPTY_KEY: &str = "EMPTY";

/// A target cell: entity `e` in table `T`, column labeled `h`.
#[derive(Debug, Clone, Copy)]
pub struct CellQuery<'a> {
    pub entity: &'a str,
    pub heading: &'a str,
    pub table: &'a Table,
}

impl CellQuery<'_> {
    /// Types detected for the target column, when the table has it.
    pub fn column_types(&self) -> Option<&BTreeSet<ValueType>> {
        self.table
            .column_index(self.heading)
            .map(|c| &self.table.column_types[c])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcEvidence {
    pub table: u32,
    pub table_id: String,
    /// Heading `h'` of the supporting column.
    pub heading: String,
    pub row: u32,
    pub col: u32,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KbEvidence {
    pub predicate: String,
    pub label: String,
    pub object: String,
    /// Admitted through `n(h, p) > 0` (as opposed to label similarity only).
    pub mapped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Candidate {
    Value(NormalizedValue),
    Empty,
}

impl Candidate {
    pub fn is_empty(&self) -> bool {
        matches!(self, Candidate::Empty)
    }

    /// Typed key (`type:canonical`) or `EMPTY`.
    pub fn key(&self) -> String {
        match self {
            Candidate::Value(v) => v.key(),
            Candidate::Empty => EMPTY_KEY.to_string(),
        }
    }

    pub fn from_key(key: &str) -> Option<Candidate> {
        if key == EMPTY_KEY {
            Some(Candidate::Empty)
        } else {
            NormalizedValue::from_key(key).map(Candidate::Value)
        }
    }

    pub fn matches(&self, other: &Candidate) -> bool {
        match (self, other) {
            (Candidate::Empty, Candidate::Empty) => true,
            (Candidate::Value(a), Candidate::Value(b)) => values_equal(a, b),
            _ => false,
        }
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Candidate::Value(v) => write!(f, "{}", v.canonical),
            Candidate::Empty => f.write_str(EMPTY_KEY),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateValue {
    pub value: Candidate,
    pub tc: Vec<TcEvidence>,
    pub kb: Vec<KbEvidence>,
}

impl CandidateValue {
    pub fn empty() -> CandidateValue {
        CandidateValue {
            value: Candidate::Empty,
            tc: Vec::new(),
            kb: Vec::new(),
        }
    }

    pub fn is_tc(&self) -> bool {
        !self.tc.is_empty()
    }

    pub fn is_kb(&self) -> bool {
        !self.kb.is_empty()
    }

    pub fn evidence_count(&self) -> usize {
        self.tc.len() + self.kb.len()
    }

    /// Human-facing text: the first raw form seen in the evidence.
    pub fn display(&self) -> String {
        if let Some(t) = self.tc.first() {
            return t.raw.clone();
        }
        if let Some(k) = self.kb.first() {
            if matches!(&self.value, Candidate::Value(v) if v.ty == ValueType::Entity) {
                return entity_label(&k.object);
            }
            return k.object.clone();
        }
        self.value.to_string()
    }

    /// Sorted corpus positions of the supporting tables.
    pub fn supporting_tables(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.tc.iter().map(|t| t.table).collect();
        set.into_iter().collect()
    }

    /// `tc:<table>:<h'>` and `kb:<predicate>` tokens, deduplicated.
    pub fn provenance(&self) -> String {
        let mut tokens: Vec<String> = Vec::new();
        for t in &self.tc {
            let tok = format!("tc:{}:{}", t.table_id, t.heading);
            if !tokens.contains(&tok) {
                tokens.push(tok);
            }
        }
        for k in &self.kb {
            let tok = format!("kb:{}", k.predicate);
            if !tokens.contains(&tok) {
                tokens.push(tok);
            }
        }
        tokens.join(";")
    }
}

/// Readable name of an entity id: its local name with underscores as
/// spaces (`dbr:New_York` → `New York`).
pub fn entity_label(id: &str) -> String {
    let local = id.rsplit(|c| c == ':' || c == '/').next().unwrap_or(id);
    let label = local.replace('_', " ");
    if label.trim().is_empty() {
        id.to_string()
    } else {
        label
    }
}

/// One candidate per non-empty cell of `e` under `h` or a related heading
/// `h'` (`n(h', h) > 0`), skipping the target table and core columns.
pub fn find_tc_candidates(q: &CellQuery, corpus: &Corpus, stats: &HeadingStats) -> Vec<CandidateValue> {
    let mut out = Vec::new();
    for r in corpus.entity_rows(q.entity) {
        let t = corpus.table(r.table);
        if t.id == q.table.id {
            continue;
        }
        let row = &t.rows[r.row as usize];
        for (c, h2) in t.headings.iter().enumerate() {
            if c == t.core_column || (h2 != q.heading && stats.n_hh(h2, q.heading) == 0) {
                continue;
            }
            let cell = &row[c];
            let Some(v) = &cell.norm else { continue };
            out.push(CandidateValue {
                value: Candidate::Value(v.clone()),
                tc: vec![TcEvidence {
                    table: r.table,
                    table_id: t.id.clone(),
                    heading: h2.clone(),
                    row: r.row,
                    col: c as u32,
                    raw: cell.raw.clone(),
                }],
                kb: Vec::new(),
            });
        }
    }
    out
}

/// Normalize a KB object for a target column: a single known column type
/// is imposed, otherwise the object is classified on its own.
pub fn normalize_kb_object(
    object: &str,
    heading: &str,
    column_types: Option<&BTreeSet<ValueType>>,
    kb: &Kb,
) -> Option<NormalizedValue> {
    let imposed = column_types
        .filter(|ts| ts.len() == 1)
        .and_then(|ts| ts.iter().next().copied())
        .filter(|&t| t != ValueType::Other);
    let ty = imposed.unwrap_or_else(|| classify_cell(object, heading, kb.has_subject(object)));
    match ty {
        ValueType::Entity => Some(NormalizedValue::entity(object)),
        ValueType::Other => None,
        t => Some(normalize(object, t)),
    }
}

/// Objects of predicates matched to `h` by `n(h, p) > 0` or by label edit
/// similarity `≥ tau_ed`.
pub fn find_kb_candidates(q: &CellQuery, kb: &Kb, stats: &HeadingStats, tau_ed: f64) -> Vec<CandidateValue> {
    let types = q.column_types();
    let mut out = Vec::new();
    for p in kb.predicates_of(q.entity) {
        let label = kb.label(p);
        let mapped = stats.n_hp(q.heading, p) > 0;
        if !mapped && edit_sim(&label, q.heading) < tau_ed {
            continue;
        }
        for o in kb.lookup(q.entity, p) {
            let Some(v) = normalize_kb_object(o, q.heading, types, kb) else {
                continue;
            };
            out.push(CandidateValue {
                value: Candidate::Value(v),
                tc: Vec::new(),
                kb: vec![KbEvidence {
                    predicate: p.to_string(),
                    label: label.clone(),
                    object: o.to_string(),
                    mapped,
                }],
            });
        }
    }
    out
}

fn canonical_order(a: &Candidate, b: &Candidate) -> Ordering {
    match (a, b) {
        (Candidate::Empty, Candidate::Empty) => Ordering::Equal,
        (Candidate::Empty, _) => Ordering::Greater,
        (_, Candidate::Empty) => Ordering::Less,
        (Candidate::Value(x), Candidate::Value(y)) => x.key().cmp(&y.key()),
    }
}

/// Merge candidates whose values are equal, keeping all evidence. The
/// result is ordered by canonical key.
pub fn merge_candidates(cands: Vec<CandidateValue>) -> Vec<CandidateValue> {
    let mut sorted = cands;
    sorted.sort_by(|a, b| canonical_order(&a.value, &b.value));
    let mut out: Vec<CandidateValue> = Vec::new();
    for c in sorted {
        match out.iter_mut().find(|o| o.value.matches(&c.value)) {
            Some(o) => {
                o.tc.extend(c.tc);
                o.kb.extend(c.kb);
            }
            None => out.push(c),
        }
    }
    out
}

/// Full pool: both sources merged, then `Empty` appended once.
pub fn build_pool(
    q: &CellQuery,
    corpus: &Corpus,
    kb: &Kb,
    stats: &HeadingStats,
    tau_ed: f64,
) -> Vec<CandidateValue> {
    let mut all = find_tc_candidates(q, corpus, stats);
    all.extend(find_kb_candidates(q, kb, stats, tau_ed));
    let mut pool = merge_candidates(all);
    pool.push(CandidateValue::empty());
    pool
}

/// Order used to break score ties: canonical key ascending, `Empty` last.
pub fn tie_break(a: &Candidate, b: &Candidate) -> Ordering {
    canonical_order(a, b)
}
