//! Artifact files: version headers, prerequisite checks and the read-only
//! snapshot served by `suggest` and `serve`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use cellac_core::embed::LabelEmbeddings;
use cellac_core::eval::{TestCell, TestCollection};
use cellac_core::forest::ForestModel;
use cellac_core::kb::Kb;
use cellac_core::ranker::{Engine, FeatureGroups, LtrModel};
use cellac_core::stats::HeadingStats;
use cellac_core::table::{Corpus, Table};

use crate::config::Config;

pub const CORPUS: &str = "cellac-corpus v1";
pub const KB: &str = "cellac-kb v1";
pub const CELLS: &str = "cellac-testcells v1";
pub const TABLES: &str = "cellac-testtables v1";
pub const QRELS: &str = "cellac-qrels v1";
pub const RUN: &str = "cellac-run v1";

/// Write `# <header>` followed by `body`, creating parent directories.
pub fn write_artifact(path: &Path, header: &str, body: &str) -> Result<()> {
    write_raw(path, &format!("# {header}\n{body}"))
}

pub fn write_raw(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Read a file another subcommand produces; a missing file names that
/// subcommand.
pub fn require(path: &Path, what: &str, producer: &str) -> Result<String> {
    if !path.exists() {
        bail!(
            "{what} not found at {}; run `cellac {producer}` first",
            path.display()
        );
    }
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Strip and check the version header of one of our own text artifacts.
pub fn body<'a>(text: &'a str, header: &str, path: &Path) -> Result<&'a str> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    match first.strip_prefix("# ") {
        Some(h) if h == header => Ok(rest),
        Some(h) if h.starts_with("cellac-") => {
            bail!("{} has version `{h}`, this build reads `{header}`", path.display())
        }
        _ => bail!("{} has no `{header}` header", path.display()),
    }
}

/// Version string of an artifact: its header line, or the format fields
/// of a model file.
pub fn version_of(text: &str) -> String {
    if let Some(h) = text.lines().next().and_then(|l| l.strip_prefix("# ")) {
        return h.to_string();
    }
    #[derive(serde::Deserialize)]
    struct Head {
        format: String,
        version: u32,
    }
    serde_json::from_str::<Head>(text)
        .map(|h| format!("{} v{}", h.format, h.version))
        .unwrap_or_else(|_| "unknown".into())
}

pub fn kb_to_text(kb: &Kb) -> String {
    let mut triples: Vec<_> = kb.triples().collect();
    triples.sort_unstable();
    let mut out = String::new();
    for t in triples {
        out.push_str(&format!("t\t{}\t{}\t{}\n", t.subject, t.predicate, t.object));
    }
    for (p, l) in kb.labels() {
        out.push_str(&format!("l\t{p}\t{l}\n"));
    }
    out
}

pub fn kb_from_text(text: &str) -> Kb {
    let (mut triples, mut labels) = (String::new(), String::new());
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("t\t") {
            triples.push_str(rest);
            triples.push('\n');
        } else if let Some(rest) = line.strip_prefix("l\t") {
            labels.push_str(rest);
            labels.push('\n');
        }
    }
    Kb::parse(&triples, &labels)
}

pub fn load_corpus(cfg: &Config) -> Result<(Corpus, String)> {
    let path = cfg.corpus_path();
    let text = require(&path, "corpus", "ingest")?;
    let corpus = Corpus::parse_jsonl(body(&text, CORPUS, &path)?);
    Ok((corpus, CORPUS.into()))
}

pub fn load_kb(cfg: &Config) -> Result<(Kb, String)> {
    let path = cfg.kb_path();
    let text = require(&path, "knowledge base", "ingest")?;
    Ok((kb_from_text(body(&text, KB, &path)?), KB.into()))
}

pub fn load_stats(cfg: &Config) -> Result<(HeadingStats, String)> {
    let (a, b) = (cfg.h2h_path(), cfg.h2p_path());
    let h2h = require(&a, "heading statistics", "build-stats")?;
    let h2p = require(&b, "heading statistics", "build-stats")?;
    let stats = HeadingStats::from_tsv(&h2h, &h2p).with_context(|| format!("loading {}", a.display()))?;
    Ok((stats, version_of(&h2h)))
}

pub fn load_embeddings(cfg: &Config) -> Result<(LabelEmbeddings, String)> {
    let path = cfg.embeddings_path();
    let text = require(&path, "label embeddings", "train-embeddings")?;
    let emb = LabelEmbeddings::from_text(&text).with_context(|| format!("loading {}", path.display()))?;
    Ok((emb, version_of(&text)))
}

pub fn load_tmatch(cfg: &Config) -> Result<(ForestModel, String)> {
    let path = cfg.tmatch_path();
    let text = require(&path, "table matching model", "train-tmatch")?;
    let model = ForestModel::from_json(&text).with_context(|| format!("loading {}", path.display()))?;
    Ok((model, version_of(&text)))
}

pub fn load_ltr(cfg: &Config) -> Result<(LtrModel, String)> {
    let path = cfg.ltr_path();
    let text = require(&path, "value ranking model", "train-ltr")?;
    let model = LtrModel::from_json(&text).with_context(|| format!("loading {}", path.display()))?;
    Ok((model, version_of(&text)))
}

/// Test cells, their source tables and the qrels written by `make-testset`.
pub fn load_testset(dir: &Path) -> Result<(TestCollection, String)> {
    let cells_path = dir.join("cells.jsonl");
    let tables_path = dir.join("tables.jsonl");
    let cells = require(&cells_path, "test cells", "make-testset")?;
    let tables = require(&tables_path, "test tables", "make-testset")?;
    let cells: Vec<TestCell> = TestCollection::parse_cells(body(&cells, CELLS, &cells_path)?)?;
    let tables: Vec<Table> = Corpus::parse_jsonl(body(&tables, TABLES, &tables_path)?).tables().to_vec();
    Ok((TestCollection { cells, tables }, CELLS.into()))
}

/// Everything `suggest` needs, loaded once and never modified.
#[derive(Debug)]
pub struct Snapshot {
    pub engine: Engine,
    pub ltr: LtrModel,
    pub versions: BTreeMap<String, String>,
}

impl Snapshot {
    pub fn load(cfg: &Config) -> Result<Snapshot> {
        let mut versions = BTreeMap::new();
        let (corpus, v) = load_corpus(cfg)?;
        versions.insert("corpus".to_string(), v);
        let (kb, v) = load_kb(cfg)?;
        versions.insert("kb".to_string(), v);
        let (stats, v) = load_stats(cfg)?;
        versions.insert("stats".to_string(), v);
        let (ltr, v) = load_ltr(cfg)?;
        versions.insert("ltr".to_string(), v);
        let mut engine = Engine::new(corpus, kb)
            .with_stats(stats)
            .with_settings(cfg.ranker_settings());
        // the table-level features need both matching resources
        let needs_matching = ltr.groups == FeatureGroups::I_II_III;
        if needs_matching || cfg.embeddings_path().exists() {
            let (emb, v) = load_embeddings(cfg)?;
            versions.insert("embeddings".to_string(), v);
            engine = engine.with_embeddings(emb);
        }
        if needs_matching || cfg.tmatch_path().exists() {
            let (tm, v) = load_tmatch(cfg)?;
            versions.insert("tmatch".to_string(), v);
            engine = engine.with_tmatch(tm);
        }
        Ok(Snapshot { engine, ltr, versions })
    }
}
