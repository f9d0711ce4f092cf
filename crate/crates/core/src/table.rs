//! Relational tables, corpus ingestion, and the corpus inverted indexes.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::types::{classify_cell, normalize, ColumnTyping, NormalizedValue, ValueType};

/// On-disk corpus record, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TableRecord {
    pub id: String,
    #[serde(default)]
    pub page_title: String,
    #[serde(default)]
    pub caption: String,
    pub headings: Vec<String>,
    pub rows: Vec<Vec<CellRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<PageMeta>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRecord {
    #[serde(default)]
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<String>,
}

impl CellRecord {
    pub fn text(text: impl Into<String>) -> Self {
        CellRecord {
            text: text.into(),
            entity: None,
        }
    }

    pub fn entity(text: impl Into<String>, entity: impl Into<String>) -> Self {
        CellRecord {
            text: text.into(),
            entity: Some(entity.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PageMeta {
    pub in_links: u64,
    pub out_links: u64,
    pub page_views: u64,
    pub tables_on_page: u64,
    pub table_chars: u64,
    pub page_chars: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub raw: String,
    pub entity: Option<String>,
    /// `None` for empty cells.
    pub norm: Option<NormalizedValue>,
}

impl Cell {
    pub fn is_empty(&self) -> bool {
        self.norm.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub id: String,
    pub page_title: String,
    pub caption: String,
    pub headings: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub core_column: usize,
    pub meta: PageMeta,
    pub column_types: Vec<BTreeSet<ValueType>>,
}

/// Heading labels are compared after NFC normalization, lowercasing and
/// whitespace collapsing.
pub fn normalize_heading(label: &str) -> String {
    let nfc: String = label.nfc().collect();
    nfc.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

impl Table {
    pub fn from_record(rec: TableRecord) -> Result<Table> {
        if rec.id.trim().is_empty() {
            return Err(Error::InvalidTable("empty table id".into()));
        }
        if rec.headings.is_empty() {
            return Err(Error::InvalidTable(format!("table {} has no headings", rec.id)));
        }
        let width = rec.headings.len();
        if let Some(i) = rec.rows.iter().position(|r| r.len() != width) {
            return Err(Error::InvalidTable(format!(
                "table {}: row {i} has {} cells, expected {width}",
                rec.id,
                rec.rows[i].len()
            )));
        }
        let headings: Vec<String> = rec.headings.iter().map(|h| normalize_heading(h)).collect();
        let mut rows: Vec<Vec<Cell>> = rec
            .rows
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|c| Cell {
                        raw: c.text,
                        entity: c.entity.filter(|e| !e.trim().is_empty()),
                        norm: None,
                    })
                    .collect()
            })
            .collect();

        let mut meta = rec.meta.unwrap_or_default();
        meta.tables_on_page = meta.tables_on_page.max(1);

        let column_types = (0..width)
            .map(|c| {
                ColumnTyping::from_cells(
                    rows.iter().map(|r| (r[c].raw.as_str(), r[c].entity.is_some())),
                    &headings[c],
                )
                .types()
            })
            .collect::<Vec<_>>();

        for row in rows.iter_mut() {
            for (c, cell) in row.iter_mut().enumerate() {
                cell.norm = normalize_cell(cell, &headings[c], &column_types[c]);
            }
        }

        let mut table = Table {
            id: rec.id,
            page_title: rec.page_title,
            caption: rec.caption,
            headings,
            rows,
            core_column: 0,
            meta,
            column_types,
        };
        table.core_column = detect_core_column(&table);
        Ok(table)
    }

    pub fn to_record(&self) -> TableRecord {
        TableRecord {
            id: self.id.clone(),
            page_title: self.page_title.clone(),
            caption: self.caption.clone(),
            headings: self.headings.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|c| CellRecord {
                            text: c.raw.clone(),
                            entity: c.entity.clone(),
                        })
                        .collect()
                })
                .collect(),
            meta: Some(self.meta),
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.headings.len()
    }

    pub fn column_index(&self, heading: &str) -> Option<usize> {
        let h = normalize_heading(heading);
        self.headings.iter().position(|x| *x == h)
    }

    /// Row whose core cell is linked to `entity`.
    pub fn row_of_entity(&self, entity: &str) -> Option<usize> {
        self.rows
            .iter()
            .position(|r| r[self.core_column].entity.as_deref() == Some(entity))
    }

    pub fn core_entity(&self, row: usize) -> Option<&str> {
        self.rows.get(row)?[self.core_column].entity.as_deref()
    }

    pub fn core_entities(&self) -> impl Iterator<Item = &str> {
        self.rows
            .iter()
            .filter_map(|r| r[self.core_column].entity.as_deref())
    }

    pub fn empty_cells(&self) -> usize {
        self.rows.iter().flatten().filter(|c| c.is_empty()).count()
    }

    /// Type agreement and votes for column `col`.
    pub fn column_typing(&self, col: usize) -> ColumnTyping {
        ColumnTyping::from_cells(
            self.rows
                .iter()
                .map(|r| (r[col].raw.as_str(), r[col].entity.is_some())),
            &self.headings[col],
        )
    }

    /// Replace the content of one cell and renormalize it.
    pub fn set_cell(&mut self, row: usize, col: usize, raw: &str, entity: Option<&str>) {
        let cell = &mut self.rows[row][col];
        cell.raw = raw.to_string();
        cell.entity = entity.filter(|e| !e.trim().is_empty()).map(str::to_string);
        cell.norm = normalize_cell(cell, &self.headings[col], &self.column_types[col]);
    }
}

/// Normalize a cell under its column's type. Columns with a single
/// non-entity type impose it; otherwise the cell's own class is used.
pub fn normalize_cell(
    cell: &Cell,
    heading: &str,
    column_types: &BTreeSet<ValueType>,
) -> Option<NormalizedValue> {
    if let Some(e) = &cell.entity {
        return Some(NormalizedValue::entity(e));
    }
    let own = classify_cell(&cell.raw, heading, false);
    if own == ValueType::Other {
        return None;
    }
    let ty = match column_types.iter().next() {
        Some(&t) if column_types.len() == 1 && t != ValueType::Entity && t != ValueType::Other => t,
        _ => own,
    };
    Some(normalize(&cell.raw, ty))
}

/// Fraction of rows whose cell in `col` is linked to an entity.
pub fn entity_rate(table: &Table, col: usize) -> Result<f64> {
    if col >= table.num_cols() {
        return Err(Error::ColumnOutOfRange {
            col,
            width: table.num_cols(),
        });
    }
    if table.rows.is_empty() {
        return Ok(0.0);
    }
    let linked = table.rows.iter().filter(|r| r[col].entity.is_some()).count();
    Ok(linked as f64 / table.rows.len() as f64)
}

/// The core column is the one of the two left-most columns with the highest
/// entity rate; ties go to the left.
pub fn detect_core_column(table: &Table) -> usize {
    if table.num_cols() < 2 {
        return 0;
    }
    let r0 = entity_rate(table, 0).unwrap_or(0.0);
    let r1 = entity_rate(table, 1).unwrap_or(0.0);
    if r1 > r0 {
        1
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowRef {
    pub table: u32,
    pub row: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColRef {
    pub table: u32,
    pub col: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellRef {
    pub table: u32,
    pub row: u32,
    pub col: u32,
}

/// Lowercased, whitespace-separated terms with surrounding punctuation
/// stripped.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusIndex {
    /// Core-column occurrences of each entity.
    pub by_entity: HashMap<String, Vec<RowRef>>,
    pub by_heading: HashMap<String, Vec<ColRef>>,
    /// Cells in rows whose core cell is linked to the entity.
    pub by_entity_heading: HashMap<(String, String), Vec<CellRef>>,
    /// Number of tables whose page title or caption contains the term.
    pub doc_freqs: HashMap<String, u32>,
    /// `(empty cells, all cells)` over the columns carrying each heading.
    pub heading_cells: HashMap<String, (u64, u64)>,
}

impl CorpusIndex {
    fn build(tables: &[Table]) -> CorpusIndex {
        let mut idx = CorpusIndex::default();
        for (t, table) in tables.iter().enumerate() {
            let t = t as u32;
            for (c, h) in table.headings.iter().enumerate() {
                idx.by_heading.entry(h.clone()).or_default().push(ColRef { table: t, col: c as u32 });
                let counts = idx.heading_cells.entry(h.clone()).or_default();
                counts.1 += table.rows.len() as u64;
                counts.0 += table.rows.iter().filter(|r| r[c].is_empty()).count() as u64;
            }
            for (r, row) in table.rows.iter().enumerate() {
                let Some(e) = &row[table.core_column].entity else {
                    continue;
                };
                let r = r as u32;
                idx.by_entity.entry(e.clone()).or_default().push(RowRef { table: t, row: r });
                for (c, h) in table.headings.iter().enumerate() {
                    idx.by_entity_heading
                        .entry((e.clone(), h.clone()))
                        .or_default()
                        .push(CellRef { table: t, row: r, col: c as u32 });
                }
            }
            let terms: HashSet<String> = tokenize(&table.page_title)
                .chain(tokenize(&table.caption))
                .collect();
            for term in terms {
                *idx.doc_freqs.entry(term).or_insert(0) += 1;
            }
        }
        idx
    }
}

/// An ingested, immutable table corpus.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    tables: Vec<Table>,
    by_id: HashMap<String, usize>,
    index: CorpusIndex,
    skipped: usize,
}

impl Corpus {
    /// Build a corpus from tables. Tables are kept in id order; later
    /// duplicates of an id are dropped and counted as skipped.
    pub fn from_tables(mut tables: Vec<Table>) -> Corpus {
        tables.sort_by(|a, b| a.id.cmp(&b.id));
        let before = tables.len();
        tables.dedup_by(|b, a| a.id == b.id);
        let skipped = before - tables.len();
        let by_id = tables.iter().enumerate().map(|(i, t)| (t.id.clone(), i)).collect();
        let index = CorpusIndex::build(&tables);
        Corpus {
            tables,
            by_id,
            index,
            skipped,
        }
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn table(&self, idx: u32) -> &Table {
        &self.tables[idx as usize]
    }

    pub fn get(&self, id: &str) -> Option<&Table> {
        self.by_id.get(id).map(|&i| &self.tables[i])
    }

    pub fn position(&self, id: &str) -> Option<u32> {
        self.by_id.get(id).map(|&i| i as u32)
    }

    pub fn index(&self) -> &CorpusIndex {
        &self.index
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn entity_rows(&self, entity: &str) -> &[RowRef] {
        self.index.by_entity.get(entity).map_or(&[], Vec::as_slice)
    }

    pub fn heading_columns(&self, heading: &str) -> &[ColRef] {
        self.index.by_heading.get(heading).map_or(&[], Vec::as_slice)
    }

    pub fn entity_heading_cells(&self, entity: &str, heading: &str) -> &[CellRef] {
        self.index
            .by_entity_heading
            .get(&(entity.to_string(), heading.to_string()))
            .map_or(&[], Vec::as_slice)
    }

    pub fn cell(&self, r: CellRef) -> &Cell {
        &self.tables[r.table as usize].rows[r.row as usize][r.col as usize]
    }

    /// Fraction of empty cells over all columns labeled `heading`.
    pub fn empty_rate(&self, heading: &str) -> f64 {
        match self.index.heading_cells.get(heading) {
            Some(&(empty, total)) if total > 0 => empty as f64 / total as f64,
            _ => 0.0,
        }
    }

    /// Sorted, deduplicated ids of tables with `entity` in the core column.
    pub fn tables_with_entity(&self, entity: &str) -> Vec<u32> {
        let mut ts: Vec<u32> = self.entity_rows(entity).iter().map(|r| r.table).collect();
        ts.dedup();
        ts
    }

    /// Keep tables whose core column has entity rate ≥ `min_rate`.
    pub fn relational_filter(&self, min_rate: f64) -> Corpus {
        let kept = self
            .tables
            .iter()
            .filter(|t| entity_rate(t, t.core_column).unwrap_or(0.0) >= min_rate)
            .cloned()
            .collect();
        Corpus::from_tables(kept)
    }

    /// A copy of the corpus without the given table ids.
    pub fn without(&self, ids: &HashSet<String>) -> Corpus {
        Corpus::from_tables(
            self.tables
                .iter()
                .filter(|t| !ids.contains(&t.id))
                .cloned()
                .collect(),
        )
    }

    pub fn parse_jsonl(text: &str) -> Corpus {
        let parsed: Vec<Option<Table>> = text
            .par_lines()
            .filter(|l| !l.trim().is_empty())
            .map(|line| {
                let rec: TableRecord = match serde_json::from_str(line) {
                    Ok(r) => r,
                    Err(e) => {
                        log::warn!("skipping corpus record: {e}");
                        return None;
                    }
                };
                match Table::from_record(rec) {
                    Ok(t) => Some(t),
                    Err(e) => {
                        log::warn!("skipping corpus record: {e}");
                        None
                    }
                }
            })
            .collect();
        let bad = parsed.iter().filter(|t| t.is_none()).count();
        let mut corpus = Corpus::from_tables(parsed.into_iter().flatten().collect());
        corpus.skipped += bad;
        corpus
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.tables {
            out.push_str(&serde_json::to_string(&t.to_record()).expect("records serialize"));
            out.push('\n');
        }
        out
    }
}

/// Load a newline-delimited corpus file. Malformed records are skipped and
/// counted; an unreadable file is an error.
pub fn ingest_corpus(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(Corpus::parse_jsonl(&text))
}
