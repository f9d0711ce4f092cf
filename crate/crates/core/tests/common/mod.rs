//! Brute-force reference implementations and fixture generators shared by
//! the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cellac_core::kb::{Kb, Triple};
use cellac_core::stats::normalize_object;
use cellac_core::table::{CellRecord, Corpus, Table, TableRecord};
use cellac_core::types::values_equal;

/// Textbook Levenshtein table over chars.
pub fn levenshtein_dp(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

pub fn edit_sim_dp(a: &str, b: &str) -> f64 {
    let n = a.chars().count().max(b.chars().count());
    if n == 0 {
        1.0
    } else {
        1.0 - levenshtein_dp(a, b) as f64 / n as f64
    }
}

/// Best total weight over every partial matching, by enumerating the
/// assignment of each row to an unused column or to nothing.
pub fn exhaustive_matching(w: &[Vec<f64>]) -> f64 {
    fn go(w: &[Vec<f64>], i: usize, used: &mut Vec<bool>) -> f64 {
        if i == w.len() {
            return 0.0;
        }
        let mut best = go(w, i + 1, used);
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                best = best.max(w[i][j] + go(w, i + 1, used));
                used[j] = false;
            }
        }
        best
    }
    let cols = w.first().map_or(0, Vec::len);
    go(w, 0, &mut vec![false; cols])
}

pub type PairCounts = HashMap<(String, String), u64>;

/// `n(h', h)` keyed `(h', h)`: every entity, every unordered pair of distinct
/// tables, every pair of rows holding the entity, every pair of non-core
/// columns with equal non-empty values.
pub fn brute_h2h(corpus: &Corpus) -> PairCounts {
    let mut out = PairCounts::new();
    let tables = corpus.tables();
    for (i, ta) in tables.iter().enumerate() {
        for tb in &tables[i + 1..] {
            for ra in &ta.rows {
                for rb in &tb.rows {
                    let (Some(ea), Some(eb)) = (&ra[ta.core_column].entity, &rb[tb.core_column].entity) else {
                        continue;
                    };
                    if ea != eb {
                        continue;
                    }
                    for (ca, xa) in ra.iter().enumerate() {
                        for (cb, xb) in rb.iter().enumerate() {
                            if ca == ta.core_column || cb == tb.core_column {
                                continue;
                            }
                            let (Some(va), Some(vb)) = (&xa.norm, &xb.norm) else { continue };
                            if !values_equal(va, vb) {
                                continue;
                            }
                            let (ha, hb) = (ta.headings[ca].clone(), tb.headings[cb].clone());
                            *out.entry((ha.clone(), hb.clone())).or_default() += 1;
                            if ha != hb {
                                *out.entry((hb, ha)).or_default() += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// `n(h, p)` keyed `(h, p)`: every non-core cell, every predicate of the
/// row entity with at least one equal object.
pub fn brute_h2p(corpus: &Corpus, triples: &[Triple]) -> PairCounts {
    let mut out = PairCounts::new();
    for t in corpus.tables() {
        for row in &t.rows {
            let Some(e) = &row[t.core_column].entity else { continue };
            for (c, cell) in row.iter().enumerate() {
                if c == t.core_column {
                    continue;
                }
                let Some(v) = &cell.norm else { continue };
                let mut preds: Vec<&str> = triples
                    .iter()
                    .filter(|tr| &tr.subject == e && values_equal(&normalize_object(&tr.object, v.ty), v))
                    .map(|tr| tr.predicate.as_str())
                    .collect();
                preds.sort_unstable();
                preds.dedup();
                for p in preds {
                    *out.entry((t.headings[c].clone(), p.to_string())).or_default() += 1;
                }
            }
        }
    }
    out
}

const HEADINGS: &[&str] = &["year", "founded", "established", "population", "city", "notes"];

/// Small random corpus with linked core entities and colliding values,
/// plus a KB over the same entities.
pub fn random_world(seed: u64) -> (Corpus, Vec<Triple>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_entities = rng.gen_range(2..=10);
    let entities: Vec<String> = (0..n_entities).map(|i| format!("e{i}")).collect();
    let values = ["1901", "1902", "1903", "77", "78", "alpha", "beta", ""];
    let mut tables = Vec::new();
    for t in 0..rng.gen_range(2..=20) {
        let cols = rng.gen_range(1..=5);
        let mut headings = vec!["name".to_string()];
        let mut pool = HEADINGS.to_vec();
        pool.shuffle(&mut rng);
        headings.extend(pool[..cols].iter().map(|h| h.to_string()));
        let mut ents = entities.clone();
        ents.shuffle(&mut rng);
        ents.truncate(rng.gen_range(1..=n_entities));
        let rows = ents
            .iter()
            .map(|e| {
                let mut row = vec![CellRecord::entity(e.to_uppercase(), e.clone())];
                row.extend((0..cols).map(|_| CellRecord::text(*values.choose(&mut rng).unwrap())));
                row
            })
            .collect();
        tables.push(
            Table::from_record(TableRecord {
                id: format!("t{t}"),
                page_title: String::new(),
                caption: String::new(),
                headings,
                rows,
                meta: None,
            })
            .unwrap(),
        );
    }
    let predicates = ["p:year", "p:size", "p:label"];
    let triples = (0..rng.gen_range(0..=50))
        .map(|_| Triple {
            subject: entities.choose(&mut rng).unwrap().clone(),
            predicate: predicates.choose(&mut rng).unwrap().to_string(),
            object: values[..7].choose(&mut rng).unwrap().to_string(),
        })
        .collect();
    (Corpus::from_tables(tables), triples)
}

pub fn kb_of(triples: &[Triple]) -> Kb {
    Kb::from_triples(triples.iter().cloned())
}

/// Hand-labeled columns: `(heading, cells, expected type)`.
pub fn typing_fixture() -> Vec<(String, Vec<CellRecord>, String)> {
    #[derive(serde::Deserialize)]
    struct Row {
        heading: String,
        cells: Vec<CellRecord>,
        #[serde(rename = "type")]
        ty: String,
    }
    include_str!("../fixtures/column_types.jsonl")
        .lines()
        .map(|l| {
            let r: Row = serde_json::from_str(l).unwrap();
            (r.heading, r.cells, r.ty)
        })
        .collect()
}
