//! Table-to-table similarity: the element-wise linear InfoGather model and
//! the feature-based TMatch forest.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::forest::{fit, FeatureSchema, FeatureVector, ForestModel, ForestParams};
use crate::similarity::{edit_sim, max_weight_matching, TermVector};
use crate::table::{tokenize, Corpus, Table};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchSettings {
    /// Weights of the data, column-values, page-title and heading elements.
    pub ig_weights: [f64; 4],
    /// Minimum edit similarity for an MSJE heading edge.
    pub msje_threshold: f64,
}

impl Default for MatchSettings {
    fn default() -> Self {
        MatchSettings {
            ig_weights: [0.25; 4],
            msje_threshold: 0.8,
        }
    }
}

/// Precomputed term vectors and entity set of one table.
#[derive(Debug, Clone)]
pub struct TableProfile<'a> {
    pub table: &'a Table,
    data: TermVector,
    title: TermVector,
    headings: TermVector,
    heading_terms: Vec<TermVector>,
    columns: Vec<TermVector>,
    entities: BTreeSet<&'a str>,
}

impl<'a> TableProfile<'a> {
    pub fn new(table: &'a Table) -> TableProfile<'a> {
        let mut data = TermVector::default();
        for row in &table.rows {
            for cell in row {
                data.add_text(&cell.raw);
            }
        }
        let columns = (0..table.num_cols())
            .map(|c| TermVector::binary(table.rows.iter().map(|r| r[c].raw.as_str())))
            .collect();
        TableProfile {
            table,
            data,
            title: TermVector::tf(&table.page_title),
            headings: TermVector::tf(&table.headings.join(" ")),
            heading_terms: table.headings.iter().map(|h| TermVector::tf(h)).collect(),
            columns,
            entities: table.core_entities().collect(),
        }
    }
}

fn column_text(table: &Table, cols: &[usize]) -> TermVector {
    let mut v = TermVector::default();
    for row in &table.rows {
        for &c in cols {
            v.add_text(&row[c].raw);
        }
    }
    v
}

fn non_core(table: &Table) -> Vec<usize> {
    (0..table.num_cols()).filter(|&c| c != table.core_column).collect()
}

/// Columns of `table` aligned to `target`: the column labeled `target` on the
/// input side, the non-core column whose label is closest to it on the
/// candidate side. Without a target every non-core column counts.
fn aligned_columns(table: &Table, target: Option<&str>, exact: bool) -> Vec<usize> {
    let Some(h) = target else {
        return non_core(table);
    };
    if exact {
        if let Some(c) = table.column_index(h) {
            return vec![c];
        }
        return non_core(table);
    }
    let best = non_core(table).into_iter().max_by(|&a, &b| {
        edit_sim(&table.headings[a], h)
            .total_cmp(&edit_sim(&table.headings[b], h))
            .then(b.cmp(&a))
    });
    best.into_iter().collect()
}

/// Cosines of the four InfoGather elements: table data, column values,
/// page title, heading labels.
pub fn infogather_similarities(t: &TableProfile, t2: &TableProfile, target: Option<&str>) -> [f64; 4] {
    let col_a = column_text(t.table, &aligned_columns(t.table, target, true));
    let col_b = column_text(t2.table, &aligned_columns(t2.table, target, false));
    [
        t.data.cosine(&t2.data),
        col_a.cosine(&col_b),
        t.title.cosine(&t2.title),
        t.headings.cosine(&t2.headings),
    ]
}

pub fn infogather_score(t: &Table, t2: &Table, target: Option<&str>, weights: &[f64; 4]) -> f64 {
    let sims = infogather_similarities(&TableProfile::new(t), &TableProfile::new(t2), target);
    sims.iter().zip(weights).map(|(s, w)| s * w).sum()
}

/// Maximum-weight matching between heading lists where an edge exists when
/// edit similarity reaches `threshold`, normalized by the longer list.
pub fn msje_heading_score(a: &[String], b: &[String], threshold: f64) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    let w: Vec<Vec<f64>> = a
        .iter()
        .map(|x| {
            b.iter()
                .map(|y| {
                    let s = edit_sim(x, y);
                    if s >= threshold {
                        s
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    (max_weight_matching(&w).0 / longest as f64).clamp(0.0, 1.0)
}

/// Matching over heading term-vector cosines, normalized by the smaller
/// heading count.
pub fn related_heading_sim(t: &TableProfile, t2: &TableProfile) -> f64 {
    let fewest = t.heading_terms.len().min(t2.heading_terms.len());
    if fewest == 0 {
        return 0.0;
    }
    let w: Vec<Vec<f64>> = t
        .heading_terms
        .iter()
        .map(|x| t2.heading_terms.iter().map(|y| x.cosine(y)).collect())
        .collect();
    (max_weight_matching(&w).0 / fewest as f64).clamp(0.0, 1.0)
}

fn directed_data_sim(a: &[TermVector], b: &[TermVector]) -> Option<f64> {
    let scored: Vec<f64> = a
        .iter()
        .filter(|v| !v.is_empty())
        .map(|v| b.iter().map(|w| v.cosine(w)).fold(0.0, f64::max))
        .collect();
    if scored.is_empty() {
        None
    } else {
        Some(scored.iter().sum::<f64>() / scored.len() as f64)
    }
}

/// Best-match cosine of binary column term vectors averaged over input
/// columns, taken in both directions and averaged.
pub fn related_data_sim(t: &TableProfile, t2: &TableProfile) -> f64 {
    match (
        directed_data_sim(&t.columns, &t2.columns),
        directed_data_sim(&t2.columns, &t.columns),
    ) {
        (Some(x), Some(y)) => (x + y) / 2.0,
        _ => 0.0,
    }
}

/// Jaccard overlap of the corpus tables containing each entity.
pub fn entity_cooccurrence(corpus: &Corpus, a: &str, b: &str) -> f64 {
    if a == b {
        return 1.0;
    }
    let (ta, tb) = (corpus.tables_with_entity(a), corpus.tables_with_entity(b));
    let (mut i, mut j, mut both) = (0, 0, 0usize);
    while i < ta.len() && j < tb.len() {
        match ta[i].cmp(&tb[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                both += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let either = ta.len() + tb.len() - both;
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

fn directed_relatedness(corpus: &Corpus, a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let total: f64 = a
        .iter()
        .map(|e| {
            if b.contains(e) {
                1.0
            } else {
                b.iter().map(|e2| entity_cooccurrence(corpus, e, e2)).fold(0.0, f64::max)
            }
        })
        .sum();
    total / a.len() as f64
}

/// `(schema_benefit, entity_overlap, entity_relatedness)`.
pub fn complement_scores(t: &TableProfile, t2: &TableProfile, corpus: &Corpus) -> (f64, f64, f64) {
    let own: BTreeSet<&String> = t.table.headings.iter().collect();
    let theirs: BTreeSet<&String> = t2.table.headings.iter().collect();
    let schema_benefit = if theirs.is_empty() {
        0.0
    } else {
        theirs.difference(&own).count() as f64 / theirs.len() as f64
    };
    let union = t.entities.union(&t2.entities).count();
    let overlap = if union == 0 {
        0.0
    } else {
        t.entities.intersection(&t2.entities).count() as f64 / union as f64
    };
    let relatedness = (directed_relatedness(corpus, &t.entities, &t2.entities)
        + directed_relatedness(corpus, &t2.entities, &t.entities))
        / 2.0;
    (schema_benefit, overlap, relatedness)
}

/// Per-table quality signals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TableQuality {
    pub rows: f64,
    pub cols: f64,
    pub empty_cells: f64,
    pub caption_idf: f64,
    pub title_idf: f64,
    pub in_links: f64,
    pub out_links: f64,
    pub page_views: f64,
    pub inv_tables_on_page: f64,
    pub table_page_ratio: f64,
}

pub const QUALITY_NAMES: [&str; 10] = [
    "rows",
    "cols",
    "empty_cells",
    "caption_idf",
    "title_idf",
    "in_links",
    "out_links",
    "page_views",
    "inv_tables_on_page",
    "table_page_ratio",
];

/// `Σ ln(N / df(t))` over the distinct terms of `text`.
pub fn idf_sum(text: &str, corpus: &Corpus) -> f64 {
    let n = corpus.len().max(1) as f64;
    let terms: BTreeSet<String> = tokenize(text).collect();
    terms
        .iter()
        .map(|t| {
            let df = corpus.index().doc_freqs.get(t).copied().unwrap_or(0).max(1) as f64;
            (n / df).ln().max(0.0)
        })
        .sum()
}

impl TableQuality {
    pub fn of(table: &Table, corpus: &Corpus) -> TableQuality {
        let m = &table.meta;
        TableQuality {
            rows: table.num_rows() as f64,
            cols: table.num_cols() as f64,
            empty_cells: table.empty_cells() as f64,
            caption_idf: idf_sum(&table.caption, corpus),
            title_idf: idf_sum(&table.page_title, corpus),
            in_links: m.in_links as f64,
            out_links: m.out_links as f64,
            page_views: m.page_views as f64,
            inv_tables_on_page: 1.0 / m.tables_on_page.max(1) as f64,
            table_page_ratio: if m.page_chars == 0 {
                0.0
            } else {
                m.table_chars as f64 / m.page_chars as f64
            },
        }
    }

    pub fn values(&self) -> [f64; 10] {
        [
            self.rows,
            self.cols,
            self.empty_cells,
            self.caption_idf,
            self.title_idf,
            self.in_links,
            self.out_links,
            self.page_views,
            self.inv_tables_on_page,
            self.table_page_ratio,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableMatchFeatures {
    pub input: TableQuality,
    pub candidate: TableQuality,
    /// Data, column-values, page-title and heading cosines.
    pub infogather: [f64; 4],
    pub msje: f64,
    pub heading_sim: f64,
    pub data_sim: f64,
    pub schema_benefit: f64,
    pub entity_overlap: f64,
    pub entity_relatedness: f64,
}

const MATCH_NAMES: [&str; 10] = [
    "ig_data",
    "ig_column_values",
    "ig_page_title",
    "ig_headings",
    "msje_heading",
    "related_heading_sim",
    "related_data_sim",
    "schema_benefit",
    "entity_overlap",
    "entity_relatedness",
];

impl TableMatchFeatures {
    pub fn schema() -> FeatureSchema {
        static SCHEMA: OnceLock<FeatureSchema> = OnceLock::new();
        SCHEMA
            .get_or_init(|| {
                let names = QUALITY_NAMES
                    .iter()
                    .map(|n| format!("input_{n}"))
                    .chain(QUALITY_NAMES.iter().map(|n| format!("candidate_{n}")))
                    .chain(MATCH_NAMES.iter().map(|n| n.to_string()));
                FeatureSchema::new(names)
            })
            .clone()
    }

    pub fn values(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(30);
        v.extend(self.input.values());
        v.extend(self.candidate.values());
        v.extend(self.infogather);
        v.extend([
            self.msje,
            self.heading_sim,
            self.data_sim,
            self.schema_benefit,
            self.entity_overlap,
            self.entity_relatedness,
        ]);
        v
    }

    pub fn to_vector(&self) -> FeatureVector {
        FeatureVector::new(Self::schema(), self.values()).expect("match features are finite")
    }

    pub fn infogather_score(&self, weights: &[f64; 4]) -> f64 {
        self.infogather.iter().zip(weights).map(|(s, w)| s * w).sum()
    }
}

pub fn extract_match_features(
    t: &TableProfile,
    t2: &TableProfile,
    target: Option<&str>,
    corpus: &Corpus,
    settings: &MatchSettings,
) -> TableMatchFeatures {
    let (schema_benefit, entity_overlap, entity_relatedness) = complement_scores(t, t2, corpus);
    TableMatchFeatures {
        input: TableQuality::of(t.table, corpus),
        candidate: TableQuality::of(t2.table, corpus),
        infogather: infogather_similarities(t, t2, target),
        msje: msje_heading_score(&t.table.headings, &t2.table.headings, settings.msje_threshold),
        heading_sim: related_heading_sim(t, t2),
        data_sim: related_data_sim(t, t2),
        schema_benefit,
        entity_overlap,
        entity_relatedness,
    }
}

/// A labeled table pair with relevance grade 0 (not relevant), 1 (relevant)
/// or 2 (highly relevant).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradedPair {
    pub input: String,
    pub candidate: String,
    pub grade: u8,
}

/// Parse `input_id\tcandidate_id\tgrade` lines.
pub fn parse_pairs(text: &str) -> Result<Vec<GradedPair>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').map(str::trim).collect();
        let [a, b, g] = parts.as_slice() else {
            return Err(Error::parse("table pairs", i + 1, "expected 3 tab-separated fields"));
        };
        let grade: u8 = match g.parse() {
            Ok(x) if x <= 2 => x,
            _ => return Err(Error::parse("table pairs", i + 1, format!("grade `{g}` not in {{0,1,2}}"))),
        };
        out.push(GradedPair {
            input: a.to_string(),
            candidate: b.to_string(),
            grade,
        });
    }
    Ok(out)
}

pub fn pairs_to_text(pairs: &[GradedPair]) -> String {
    pairs
        .iter()
        .map(|p| format!("{}\t{}\t{}\n", p.input, p.candidate, p.grade))
        .collect()
}

/// Train the TMatch forest on graded pairs whose tables are found in
/// `tables`; grades are rescaled to `[0, 1]`.
pub fn train_tmatch(
    pairs: &[GradedPair],
    tables: &Corpus,
    corpus: &Corpus,
    settings: &MatchSettings,
    params: &ForestParams,
) -> Result<ForestModel> {
    let mut samples = Vec::with_capacity(pairs.len());
    let mut missing = 0;
    for p in pairs {
        let (Some(a), Some(b)) = (tables.get(&p.input), tables.get(&p.candidate)) else {
            log::debug!("skipping pair {} / {}: table not found", p.input, p.candidate);
            missing += 1;
            continue;
        };
        let f = extract_match_features(&TableProfile::new(a), &TableProfile::new(b), None, corpus, settings);
        samples.push((f.to_vector(), p.grade as f64 / 2.0));
    }
    if missing > 0 {
        log::warn!("skipped {missing} of {} pairs whose tables are not in the corpus", pairs.len());
    }
    fit(&samples, params)
}

pub fn tmatch_score(model: &ForestModel, features: &TableMatchFeatures) -> Result<f64> {
    model.predict(&features.to_vector())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{CellRecord, TableRecord};

    pub(crate) fn table(id: &str, title: &str, headings: &[&str], rows: &[&[&str]]) -> Table {
        Table::from_record(TableRecord {
            id: id.into(),
            page_title: title.into(),
            caption: String::new(),
            headings: headings.iter().map(|h| h.to_string()).collect(),
            rows: rows
                .iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .map(|(i, c)| {
                            if i == 0 {
                                CellRecord::entity(*c, format!("e:{c}"))
                            } else {
                                CellRecord::text(*c)
                            }
                        })
                        .collect()
                })
                .collect(),
            meta: None,
        })
        .unwrap()
    }

    #[test]
    fn infogather_examples() {
        let a = table("a", "World cities", &["city", "country"], &[&["Paris", "France"], &["Rome", "Italy"]]);
        let b = table("b", "Moon craters", &["crater", "diameter"], &[&["Tycho", "85 km"]]);
        let mut c = b.clone();
        c.page_title = a.page_title.clone();
        let w = [1.0; 4];
        assert!((infogather_score(&a, &a, Some("country"), &w) - 4.0).abs() < 1e-12);
        assert_eq!(infogather_score(&a, &b, Some("country"), &w), 0.0);
        assert!((infogather_score(&a, &c, Some("country"), &w) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn msje_examples() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(msje_heading_score(&s(&["a", "b", "c"]), &s(&["a", "b", "c"]), 0.8), 1.0);
        assert_eq!(msje_heading_score(&s(&["year", "team"]), &s(&["year", "club"]), 0.8), 0.5);
        assert_eq!(msje_heading_score(&s(&["x"]), &s(&["y"]), 0.8), 0.0);
    }

    #[test]
    fn data_sim_half() {
        let a = table("a", "", &["name", "colour"], &[&["apple", "red"], &["pear", "green"]]);
        let b = table("b", "", &["name", "shape"], &[&["apple", "round"], &["pear", "long"]]);
        let (pa, pb) = (TableProfile::new(&a), TableProfile::new(&b));
        assert!((related_data_sim(&pa, &pb) - 0.5).abs() < 1e-12);
        assert!((related_data_sim(&pa, &pa) - 1.0).abs() < 1e-12);
        assert!((related_heading_sim(&pa, &pa) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn complement_examples() {
        let a = table("a", "", &["name", "colour", "shape"], &[&["apple", "red", "round"]]);
        let b = table("b", "", &["name", "colour"], &[&["apple", "green"]]);
        let c = table("c", "", &["name", "colour"], &[&["kiwi", "green"]]);
        let corpus = Corpus::from_tables(vec![a.clone(), b.clone(), c.clone()]);
        let (pa, pb, pc) = (TableProfile::new(&a), TableProfile::new(&b), TableProfile::new(&c));
        let (benefit, overlap, related) = complement_scores(&pa, &pb, &corpus);
        assert_eq!(benefit, 0.0);
        assert_eq!(overlap, 1.0);
        assert_eq!(related, 1.0);
        let (_, overlap, related) = complement_scores(&pa, &pc, &corpus);
        assert_eq!(overlap, 0.0);
        assert_eq!(related, 0.0);
        assert!((complement_scores(&pb, &pa, &corpus).0 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn quality_counts() {
        let t = table(
            "t",
            "",
            &["a", "b", "c", "d"],
            &[&["x", "", "1", "2"], &["y", "3", "", "4"], &["z", "5", "6", "7"]],
        );
        let corpus = Corpus::from_tables(vec![t.clone()]);
        let q = TableQuality::of(&t, &corpus);
        assert_eq!((q.rows, q.cols, q.empty_cells), (3.0, 4.0, 2.0));
        assert_eq!(q.inv_tables_on_page, 1.0);
    }

    #[test]
    fn pairs_parsing() {
        let p = parse_pairs("# header\na\tb\t2\nc\td\t0\n").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(parse_pairs(&pairs_to_text(&p)).unwrap(), p);
        assert!(parse_pairs("a\tb\t3\n").is_err());
        assert!(parse_pairs("a\tb\n").is_err());
    }
}
