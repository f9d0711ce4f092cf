//! Concealed-cell test collections, run and qrels files, and NDCG scoring.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::candidates::{Candidate, CellQuery};
use crate::error::{Error, Result};
use crate::ranker::Ranked;
use crate::table::{Corpus, Table};
use crate::types::ValueType;

/// Binary-gain NDCG@k of `ranking` against the correct set `truth`.
pub fn ndcg_at_k(ranking: &[Candidate], truth: &[Candidate], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut distinct: Vec<&Candidate> = Vec::new();
    for t in truth {
        if !distinct.iter().any(|d| d.matches(t)) {
            distinct.push(t);
        }
    }
    if distinct.is_empty() {
        return Ok(0.0);
    }
    let mut credited = vec![false; distinct.len()];
    let mut dcg = 0.0;
    for (i, v) in ranking.iter().take(k).enumerate() {
        if let Some(j) = (0..distinct.len()).find(|&j| !credited[j] && distinct[j].matches(v)) {
            credited[j] = true;
            dcg += 1.0 / ((i + 2) as f64).log2();
        }
    }
    let ideal: f64 = (0..distinct.len().min(k)).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
    Ok(dcg / ideal)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TestCell {
    pub cell_id: String,
    pub table_id: String,
    pub row: usize,
    pub col: usize,
    pub entity: String,
    pub heading: String,
    pub column_type: ValueType,
    /// Original raw text; empty when the cell was blank.
    pub concealed: String,
    /// Typed key of the original value or `EMPTY`.
    pub truth: String,
}

impl TestCell {
    pub fn truth(&self) -> Candidate {
        Candidate::from_key(&self.truth).unwrap_or(Candidate::Empty)
    }
}

/// Test cells together with their source tables (held out of the corpus).
#[derive(Debug, Clone, Default)]
pub struct TestCollection {
    pub cells: Vec<TestCell>,
    pub tables: Vec<Table>,
}

impl TestCollection {
    pub fn table(&self, id: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.id == id)
    }

    /// The source table with the test cell blanked out.
    pub fn input_table(&self, cell: &TestCell) -> Result<Table> {
        let mut t = self
            .table(&cell.table_id)
            .ok_or_else(|| Error::UnknownCell(cell.cell_id.clone()))?
            .clone();
        if cell.row >= t.num_rows() || cell.col >= t.num_cols() {
            return Err(Error::UnknownCell(cell.cell_id.clone()));
        }
        t.set_cell(cell.row, cell.col, "", None);
        Ok(t)
    }

    /// Qrels built from the concealed values.
    pub fn qrels(&self) -> Qrels {
        Qrels(
            self.cells
                .iter()
                .map(|c| (c.cell_id.clone(), vec![c.truth()]))
                .collect(),
        )
    }

    pub fn cells_to_jsonl(&self) -> String {
        self.cells
            .iter()
            .map(|c| serde_json::to_string(c).expect("test cell serializes") + "\n")
            .collect()
    }

    pub fn parse_cells(text: &str) -> Result<Vec<TestCell>> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse("test cells", i + 1, e.to_string())))
            .collect()
    }
}

/// Input tables with the test cell concealed, paired with queries over them.
pub struct PreparedCells {
    pub tables: Vec<Table>,
    pub cells: Vec<TestCell>,
}

impl PreparedCells {
    pub fn new(collection: &TestCollection) -> Result<PreparedCells> {
        let tables = collection
            .cells
            .iter()
            .map(|c| collection.input_table(c))
            .collect::<Result<_>>()?;
        Ok(PreparedCells {
            tables,
            cells: collection.cells.clone(),
        })
    }

    pub fn query(&self, i: usize) -> CellQuery<'_> {
        let c = &self.cells[i];
        CellQuery {
            entity: &c.entity,
            heading: &c.heading,
            table: &self.tables[i],
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

pub const MIN_ROWS: usize = 5;
pub const MIN_COLS: usize = 3;
pub const MIN_HEADING_CHARS: usize = 4;
pub const MIN_AGREEMENT: f64 = 0.8;

fn qualifies(table: &Table, col: usize, ty: ValueType, cells: usize) -> bool {
    if col == table.core_column || table.headings[col].chars().count() < MIN_HEADING_CHARS {
        return false;
    }
    let typing = table.column_typing(col);
    if typing.types().len() != 1 || !typing.types().contains(&ty) || typing.agreement() < MIN_AGREEMENT {
        return false;
    }
    let linked = (0..table.num_rows()).filter(|&r| table.core_entity(r).is_some()).count();
    linked >= cells
}

/// Sample `per_type` columns of each main type (from distinct tables) and
/// `cells_per_column` cells in each. Returns the collection and the corpus
/// without the sampled tables.
pub fn build_test_collection(
    corpus: &Corpus,
    per_type: usize,
    cells_per_column: usize,
    seed: u64,
) -> Result<(TestCollection, Corpus)> {
    if per_type == 0 || cells_per_column == 0 {
        return Err(Error::InvalidArgument("per-type and per-column counts must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eligible: Vec<&Table> = corpus
        .tables()
        .iter()
        .filter(|t| t.num_rows() >= MIN_ROWS && t.num_cols() >= MIN_COLS)
        .collect();
    let mut used: HashSet<&str> = HashSet::new();
    let mut collection = TestCollection::default();
    for ty in ValueType::MAIN {
        let mut columns: Vec<(&Table, usize)> = eligible
            .iter()
            .filter(|t| !used.contains(t.id.as_str()))
            .flat_map(|t| (0..t.num_cols()).map(move |c| (*t, c)))
            .filter(|(t, c)| qualifies(t, *c, ty, cells_per_column))
            .collect();
        columns.shuffle(&mut rng);
        let mut picked: Vec<(&Table, usize)> = Vec::new();
        for (t, c) in columns {
            if picked.len() == per_type {
                break;
            }
            if picked.iter().all(|(p, _)| p.id != t.id) {
                picked.push((t, c));
            }
        }
        if picked.len() < per_type {
            return Err(Error::InsufficientColumns {
                ty,
                found: picked.len(),
                needed: per_type,
            });
        }
        for (t, c) in picked {
            used.insert(&t.id);
            let mut rows: Vec<usize> = (0..t.num_rows()).filter(|&r| t.core_entity(r).is_some()).collect();
            rows.shuffle(&mut rng);
            rows.truncate(cells_per_column);
            rows.sort_unstable();
            for r in rows {
                let cell = &t.rows[r][c];
                collection.cells.push(TestCell {
                    cell_id: format!("{}#r{}c{}", t.id, r, c),
                    table_id: t.id.clone(),
                    row: r,
                    col: c,
                    entity: t.core_entity(r).unwrap_or_default().to_string(),
                    heading: t.headings[c].clone(),
                    column_type: ty,
                    concealed: cell.raw.clone(),
                    truth: cell
                        .norm
                        .as_ref()
                        .map_or_else(|| Candidate::Empty.key(), |v| v.key()),
                });
            }
            collection.tables.push(t.clone());
        }
    }
    let held_out: HashSet<String> = used.iter().map(|s| s.to_string()).collect();
    Ok((collection, corpus.without(&held_out)))
}

/// Ground truth: cell id to correct values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels(pub BTreeMap<String, Vec<Candidate>>);

impl Qrels {
    pub fn get(&self, cell: &str) -> Option<&[Candidate]> {
        self.0.get(cell).map(Vec::as_slice)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (cell, values) in &self.0 {
            for v in values {
                let _ = writeln!(out, "{cell}\t{}\t1", v.key());
            }
        }
        out
    }

    /// Parse `cell_id\tvalue\trelevance` lines; zero-relevance lines are
    /// ignored.
    pub fn parse(text: &str) -> Result<Qrels> {
        let mut map: BTreeMap<String, Vec<Candidate>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            let [cell, value, rel] = parts.as_slice() else {
                return Err(Error::parse("qrels", i + 1, "expected 3 tab-separated fields"));
            };
            let rel: i32 = rel
                .trim()
                .parse()
                .map_err(|_| Error::parse("qrels", i + 1, format!("bad relevance `{rel}`")))?;
            let v = Candidate::from_key(value.trim())
                .ok_or_else(|| Error::parse("qrels", i + 1, format!("bad value `{value}`")))?;
            let slot = map.entry(cell.trim().to_string()).or_default();
            if rel > 0 && !slot.iter().any(|s| s.matches(&v)) {
                slot.push(v);
            }
        }
        map.retain(|_, v| !v.is_empty());
        Ok(Qrels(map))
    }

    /// Mean number of correct values per cell and fraction of cells whose
    /// truth includes `Empty`.
    pub fn summary(&self) -> (f64, f64) {
        let n = self.0.len().max(1) as f64;
        let values: usize = self.0.values().map(Vec::len).sum();
        let empty = self.0.values().filter(|v| v.iter().any(Candidate::is_empty)).count();
        (values as f64 / n, empty as f64 / n)
    }
}

/// One line of a run file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub rank: usize,
    pub value: Candidate,
    pub score: f64,
    pub provenance: String,
}

/// Rankings per cell id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Run(pub BTreeMap<String, Vec<RunEntry>>);

impl Run {
    pub fn insert(&mut self, cell: &str, ranked: &[Ranked]) {
        self.0.insert(
            cell.to_string(),
            ranked
                .iter()
                .map(|r| RunEntry {
                    rank: r.rank,
                    value: r.candidate.value.clone(),
                    score: r.score,
                    provenance: r.candidate.provenance(),
                })
                .collect(),
        );
    }

    pub fn values(&self, cell: &str) -> Vec<Candidate> {
        self.0
            .get(cell)
            .map(|es| es.iter().map(|e| e.value.clone()).collect())
            .unwrap_or_default()
    }

    /// `cell_id\trank\tvalue\tscore\tprovenance` lines; `-` marks missing
    /// provenance.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (cell, entries) in &self.0 {
            for e in entries {
                let prov = if e.provenance.is_empty() { "-" } else { &e.provenance };
                let _ = writeln!(out, "{cell}\t{}\t{}\t{}\t{prov}", e.rank, e.value.key(), e.score);
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Run> {
        let mut map: BTreeMap<String, Vec<RunEntry>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            let [cell, rank, value, score, prov] = parts.as_slice() else {
                return Err(Error::parse("run", i + 1, "expected 5 tab-separated fields"));
            };
            let rank: usize = rank
                .parse()
                .map_err(|_| Error::parse("run", i + 1, format!("bad rank `{rank}`")))?;
            let score: f64 = score
                .parse()
                .map_err(|_| Error::parse("run", i + 1, format!("bad score `{score}`")))?;
            let value =
                Candidate::from_key(value).ok_or_else(|| Error::parse("run", i + 1, format!("bad value `{value}`")))?;
            map.entry(cell.to_string()).or_default().push(RunEntry {
                rank,
                value,
                score,
                provenance: if *prov == "-" { String::new() } else { prov.to_string() },
            });
        }
        for entries in map.values_mut() {
            entries.sort_by_key(|e| e.rank);
        }
        Ok(Run(map))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConditionScores {
    pub cells: usize,
    pub ndcg5: f64,
    pub ndcg10: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub empty_excluded: ConditionScores,
    pub empty_included: ConditionScores,
}

impl Report {
    pub fn table(reports: &[Report]) -> String {
        let width = reports.iter().map(|r| r.name.len()).max().unwrap_or(4).max(6);
        let mut out = format!(
            "{:<width$}  {:>11} {:>11}  {:>11} {:>11}\n",
            "method", "excl@5", "excl@10", "incl@5", "incl@10"
        );
        for r in reports {
            let _ = writeln!(
                out,
                "{:<width$}  {:>11.4} {:>11.4}  {:>11.4} {:>11.4}",
                r.name, r.empty_excluded.ndcg5, r.empty_excluded.ndcg10, r.empty_included.ndcg5, r.empty_included.ndcg10
            );
        }
        out
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// NDCG@5/@10 for one cell under both `Empty` conditions; the excluded
/// score is `None` when the cell's only correct value is `Empty`.
pub fn cell_scores(ranking: &[Candidate], truth: &[Candidate]) -> Result<([f64; 2], Option<[f64; 2]>)> {
    let incl = [ndcg_at_k(ranking, truth, 5)?, ndcg_at_k(ranking, truth, 10)?];
    let truth_ne: Vec<Candidate> = truth.iter().filter(|t| !t.is_empty()).cloned().collect();
    if truth_ne.is_empty() {
        return Ok((incl, None));
    }
    let rank_ne: Vec<Candidate> = ranking.iter().filter(|v| !v.is_empty()).cloned().collect();
    let excl = [ndcg_at_k(&rank_ne, &truth_ne, 5)?, ndcg_at_k(&rank_ne, &truth_ne, 10)?];
    Ok((incl, Some(excl)))
}

/// Score a run against qrels. Every qrels cell is evaluated; cells missing
/// from the run score 0.
pub fn evaluate(name: &str, run: &Run, qrels: &Qrels) -> Result<Report> {
    if let Some(cell) = run.0.keys().find(|c| !qrels.0.contains_key(*c)) {
        return Err(Error::UnknownCell(cell.clone()));
    }
    let (mut i5, mut i10, mut e5, mut e10) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (cell, truth) in &qrels.0 {
        let (incl, excl) = cell_scores(&run.values(cell), truth)?;
        i5.push(incl[0]);
        i10.push(incl[1]);
        if let Some(x) = excl {
            e5.push(x[0]);
            e10.push(x[1]);
        }
    }
    Ok(Report {
        name: name.to_string(),
        empty_excluded: ConditionScores {
            cells: e5.len(),
            ndcg5: mean(&e5),
            ndcg10: mean(&e10),
        },
        empty_included: ConditionScores {
            cells: i5.len(),
            ndcg5: mean(&i5),
            ndcg10: mean(&i10),
        },
    })
}

/// Mean NDCG@10 restricted to cells whose truth contains `Empty`.
pub fn empty_cell_ndcg10(run: &Run, qrels: &Qrels) -> Result<f64> {
    let mut scores = Vec::new();
    for (cell, truth) in &qrels.0 {
        if truth.iter().any(Candidate::is_empty) {
            scores.push(ndcg_at_k(&run.values(cell), truth, 10)?);
        }
    }
    Ok(mean(&scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::NormalizedValue;

    fn v(s: &str) -> Candidate {
        Candidate::Value(NormalizedValue::text(ValueType::String, s))
    }

    #[test]
    fn ndcg_examples() {
        let truth = [v("a"), v("b")];
        assert_eq!(ndcg_at_k(&[v("a"), v("b"), v("c")], &truth, 5).unwrap(), 1.0);
        let one = ndcg_at_k(&[v("x"), v("a")], &[v("a")], 5).unwrap();
        assert!((one - 1.0 / 3f64.log2()).abs() < 1e-12);
        assert!((one - 0.63093).abs() < 1e-5);
        assert_eq!(ndcg_at_k(&[v("x"), v("y")], &[v("a")], 5).unwrap(), 0.0);
        assert!(ndcg_at_k(&[], &[v("a")], 0).is_err());
    }

    #[test]
    fn run_and_qrels_round_trip() {
        let qrels = Qrels::parse("c1\tstring:a\t1\nc1\tEMPTY\t1\nc2\tquantity:100 m\t1\nc3\tstring:z\t0\n").unwrap();
        assert_eq!(qrels.0.len(), 2);
        assert_eq!(Qrels::parse(&qrels.to_text()).unwrap(), qrels);
        let run = Run::parse("c1\t2\tEMPTY\t0.5\t-\nc1\t1\tstring:a\t0.9\ttc:t1:name;kb:p\n").unwrap();
        assert_eq!(run.values("c1"), vec![v("a"), Candidate::Empty]);
        assert_eq!(Run::parse(&run.to_text()).unwrap(), run);
        assert!(Run::parse("c1\tx\tEMPTY\t0\t-\n").is_err());
    }

    #[test]
    fn evaluation_conditions() {
        let qrels = Qrels::parse("c1\tstring:a\t1\nc2\tEMPTY\t1\n").unwrap();
        let run = Run::parse("c1\t1\tstring:a\t1\t-\nc2\t1\tEMPTY\t1\t-\n").unwrap();
        let r = evaluate("perfect", &run, &qrels).unwrap();
        assert_eq!(r.empty_included.ndcg10, 1.0);
        assert_eq!(r.empty_excluded.ndcg10, 1.0);
        assert_eq!(r.empty_excluded.cells, 1);
        let stray = Run::parse("zz\t1\tEMPTY\t1\t-\n").unwrap();
        assert!(matches!(evaluate("x", &stray, &qrels), Err(Error::UnknownCell(_))));
    }
}
