use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cellac::api::{suggest, Evidence, SuggestRequest, SuggestResponse, DEFAULT_K};
use cellac::artifacts::{self, Snapshot};
use cellac::config::Config;
use cellac_core::bench::{evaluate_grid, run_grid, synthetic_setup, GridParams};
use cellac_core::candidates::Candidate;
use cellac_core::embed::train_label_embeddings;
use cellac_core::eval::{build_test_collection, empty_cell_ndcg10, evaluate, PreparedCells, Qrels, Report, Run, RunEntry};
use cellac_core::kb::Kb;
use cellac_core::matching::{parse_pairs, train_tmatch};
use cellac_core::ranker::{cross_validate, Engine, FeatureGroups, LabeledQuery};
use cellac_core::stats::HeadingStats;
use cellac_core::synth::{parse_truth, truth_qrels, SynthParams, Synthetic};
use cellac_core::table::{ingest_corpus, Table};

#[derive(Parser)]
#[command(name = "cellac", version, about = "Auto-complete data cells of relational tables")]
struct Cli {
    /// TOML settings file; `CELLAC_<KEY>` variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory (overrides the configured one).
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic table corpus, knowledge base and labels.
    Synth(SynthArgs),
    /// Validate a table corpus and a knowledge base into the work directory.
    Ingest(IngestArgs),
    /// Hold out test cells and remove their tables from the corpus.
    MakeTestset(TestsetArgs),
    /// Count heading-to-heading and heading-to-predicate co-occurrences.
    BuildStats,
    /// Train heading label embeddings.
    TrainEmbeddings(SeedArgs),
    /// Train the table matching model on graded table pairs.
    TrainTmatch(TmatchArgs),
    /// Train the value ranking model on the test cells.
    TrainLtr(LtrArgs),
    /// Rank candidate values for one cell or a batch of test cells.
    Suggest(SuggestArgs),
    /// Score a run file against qrels.
    Evaluate(EvaluateArgs),
    /// Serve suggestions over HTTP.
    Serve(ServeArgs),
    /// Run every method on a synthetic benchmark.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SeedArgs {
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Graded table pairs to emit.
    #[arg(long, default_value_t = 600)]
    pairs: usize,
}

#[derive(Args)]
struct IngestArgs {
    /// Newline-delimited table records.
    #[arg(long)]
    tables: PathBuf,
    /// Tab-separated `subject predicate object` lines.
    #[arg(long)]
    triples: PathBuf,
    /// Tab-separated `predicate label` lines.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct TestsetArgs {
    #[arg(long, default_value_t = 2)]
    per_type: usize,
    #[arg(long, default_value_t = 3)]
    cells: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Planted values (`table row col key`) to use as ground truth instead
    /// of the concealed text.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct TmatchArgs {
    /// Tab-separated `input candidate grade` lines.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct LtrArgs {
    #[arg(long, default_value = "I+II+III")]
    groups: FeatureGroups,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write a cross-validated run over the training cells.
    #[arg(long)]
    cv_run: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
}

#[derive(Args)]
struct SuggestArgs {
    #[arg(long, conflicts_with = "row")]
    entity: Option<String>,
    /// Row of the input table.
    #[arg(long)]
    row: Option<usize>,
    #[arg(long, conflicts_with = "column")]
    heading: Option<String>,
    /// Column of the input table.
    #[arg(long)]
    column: Option<usize>,
    /// Input table as one JSON record; without it a one-row table is made
    /// from `--entity` and `--heading`.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: i64,
    /// Rank every cell of the test set instead of a single cell.
    #[arg(long, conflicts_with_all = ["entity", "row", "heading", "column", "table"])]
    batch: bool,
    /// Write the batch run here instead of standard output.
    #[arg(long, requires = "batch")]
    out: Option<PathBuf>,
    /// Print responses as JSON (one line per cell in batch mode).
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    addr: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 25)]
    per_type: usize,
    #[arg(long, default_value_t = 6)]
    cells: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(w) = cli.workdir {
        cfg.workdir = w;
    }
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Ingest(a) => ingest(&cfg, &a),
        Command::MakeTestset(a) => make_testset(&cfg, &a),
        Command::BuildStats => build_stats(&cfg),
        Command::TrainEmbeddings(a) => train_embeddings(&cfg, a.seed.unwrap_or(cfg.seed)),
        Command::TrainTmatch(a) => tmatch(&cfg, &a),
        Command::TrainLtr(a) => train_ltr(&cfg, &a),
        Command::Suggest(a) => suggest_cmd(&cfg, &a),
        Command::Evaluate(a) => evaluate_cmd(&a),
        Command::Serve(a) => serve(&cfg, a.addr.as_deref().unwrap_or(&cfg.addr)),
        Command::Bench(a) => bench(&a),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn synth(a: &SynthArgs) -> Result<()> {
    let world = Synthetic::generate(&SynthParams {
        seed: a.seed,
        scale: a.scale,
        pairs: a.pairs,
        ..Default::default()
    });
    let mut tables = String::new();
    for t in &world.tables {
        tables.push_str(&serde_json::to_string(t)?);
        tables.push('\n');
    }
    artifacts::write_raw(&a.out.join("tables.jsonl"), &tables)?;
    artifacts::write_raw(&a.out.join("triples.tsv"), &world.triples_tsv())?;
    artifacts::write_raw(&a.out.join("labels.tsv"), &world.labels_tsv())?;
    artifacts::write_raw(&a.out.join("pairs.tsv"), &cellac_core::matching::pairs_to_text(&world.pairs))?;
    artifacts::write_raw(&a.out.join("truth.tsv"), &world.truth_tsv())?;
    println!(
        "{} tables, {} triples, {} table pairs written to {}",
        world.tables.len(),
        world.triples.len(),
        world.pairs.len(),
        a.out.display()
    );
    Ok(())
}

fn ingest(cfg: &Config, a: &IngestArgs) -> Result<()> {
    let corpus = ingest_corpus(&a.tables)?;
    if corpus.is_empty() {
        bail!("no valid table records in {}", a.tables.display());
    }
    let labels = match &a.labels {
        Some(p) => read(p)?,
        None => String::new(),
    };
    let kb = Kb::parse(&read(&a.triples)?, &labels);
    artifacts::write_artifact(&cfg.corpus_path(), artifacts::CORPUS, &corpus.to_jsonl())?;
    artifacts::write_artifact(&cfg.kb_path(), artifacts::KB, &artifacts::kb_to_text(&kb))?;
    println!(
        "{} tables ({} skipped), {} triples over {} subjects ({} lines skipped)",
        corpus.len(),
        corpus.skipped(),
        kb.len(),
        kb.num_subjects(),
        kb.skipped()
    );
    Ok(())
}

fn make_testset(cfg: &Config, a: &TestsetArgs) -> Result<()> {
    let (corpus, _) = artifacts::load_corpus(cfg)?;
    let seed = a.seed.unwrap_or(cfg.seed);
    let (collection, rest) = build_test_collection(&corpus, a.per_type, a.cells, seed)?;
    let qrels = match &a.truth {
        Some(p) => truth_qrels(&parse_truth(&read(p)?)?, &collection),
        None => collection.qrels(),
    };
    let dir = cfg.testset_dir();
    let tables: String = collection
        .tables
        .iter()
        .map(|t| serde_json::to_string(&t.to_record()).map(|s| s + "\n"))
        .collect::<serde_json::Result<_>>()?;
    artifacts::write_artifact(&dir.join("cells.jsonl"), artifacts::CELLS, &collection.cells_to_jsonl())?;
    artifacts::write_artifact(&dir.join("tables.jsonl"), artifacts::TABLES, &tables)?;
    artifacts::write_artifact(&dir.join("qrels.tsv"), artifacts::QRELS, &qrels.to_text())?;
    // statistics and models must never see the held-out tables
    artifacts::write_artifact(&cfg.corpus_path(), artifacts::CORPUS, &rest.to_jsonl())?;
    println!(
        "{} cells from {} tables; corpus now has {} tables",
        collection.cells.len(),
        collection.tables.len(),
        rest.len()
    );
    Ok(())
}

fn build_stats(cfg: &Config) -> Result<()> {
    let (corpus, _) = artifacts::load_corpus(cfg)?;
    let (kb, _) = artifacts::load_kb(cfg)?;
    let stats = HeadingStats::build(&corpus, &kb);
    artifacts::write_raw(&cfg.h2h_path(), &stats.h2h_tsv())?;
    artifacts::write_raw(&cfg.h2p_path(), &stats.h2p_tsv())?;
    println!(
        "{} headings with related headings, {} headings with matched predicates",
        stats.h2h_counts().len(),
        stats.h2p_counts().len()
    );
    Ok(())
}

fn train_embeddings(cfg: &Config, seed: u64) -> Result<()> {
    let (corpus, _) = artifacts::load_corpus(cfg)?;
    let emb = train_label_embeddings(&corpus, &cfg.embedding_params(seed))?;
    artifacts::write_raw(&cfg.embeddings_path(), &emb.to_text())?;
    println!("{} labels, dimension {}", emb.vocab().len(), emb.dim());
    Ok(())
}

fn tmatch(cfg: &Config, a: &TmatchArgs) -> Result<()> {
    let (corpus, _) = artifacts::load_corpus(cfg)?;
    let pairs = parse_pairs(&read(&a.pairs)?)?;
    let usable = pairs
        .iter()
        .filter(|p| corpus.get(&p.input).is_some() && corpus.get(&p.candidate).is_some())
        .count();
    if usable < 2 {
        bail!("only {usable} of {} pairs refer to corpus tables", pairs.len());
    }
    let settings = cfg.ranker_settings().matching;
    let model = train_tmatch(&pairs, &corpus, &corpus, &settings, &cfg.forest_params(a.seed.unwrap_or(cfg.seed)))?;
    artifacts::write_raw(&cfg.tmatch_path(), &model.to_json())?;
    println!("trained on {usable} pairs, {} trees", model.trees().len());
    Ok(())
}

/// Engine over the corpus, KB and statistics, plus the matching resources
/// the feature groups need.
fn training_engine(cfg: &Config, groups: FeatureGroups) -> Result<Engine> {
    let (corpus, _) = artifacts::load_corpus(cfg)?;
    let (kb, _) = artifacts::load_kb(cfg)?;
    let (stats, _) = artifacts::load_stats(cfg)?;
    let mut engine = Engine::new(corpus, kb)
        .with_stats(stats)
        .with_settings(cfg.ranker_settings());
    if groups == FeatureGroups::I_II_III {
        engine = engine
            .with_embeddings(artifacts::load_embeddings(cfg)?.0)
            .with_tmatch(artifacts::load_tmatch(cfg)?.0);
    }
    Ok(engine)
}

fn load_qrels(dir: &Path) -> Result<Qrels> {
    let path = dir.join("qrels.tsv");
    Ok(Qrels::parse(&artifacts::require(&path, "qrels", "make-testset")?)?)
}

fn train_ltr(cfg: &Config, a: &LtrArgs) -> Result<()> {
    let engine = training_engine(cfg, a.groups)?;
    let dir = cfg.testset_dir();
    let (collection, _) = artifacts::load_testset(&dir)?;
    let qrels = load_qrels(&dir)?;
    let prepared = PreparedCells::new(&collection)?;
    let truths: Vec<Vec<Candidate>> = prepared
        .cells
        .iter()
        .map(|c| qrels.get(&c.cell_id).map(<[_]>::to_vec).unwrap_or_default())
        .collect();
    let labeled: Vec<LabeledQuery> = (0..prepared.len())
        .filter(|&i| !truths[i].is_empty())
        .map(|i| LabeledQuery {
            query: prepared.query(i),
            truth: &truths[i],
        })
        .collect();
    let params = cfg.forest_params(a.seed.unwrap_or(cfg.seed));
    let model = engine.train_ltr(&labeled, a.groups, &params)?;
    artifacts::write_raw(&cfg.ltr_path(), &model.to_json())?;
    println!("trained {} model on {} cells", a.groups.as_str(), labeled.len());
    if let Some(path) = &a.cv_run {
        let ranked = cross_validate(&engine, &labeled, a.groups, &params, a.folds, cellac_core::bench::RUN_DEPTH)?;
        let mut run = Run::default();
        for (lq, r) in labeled.iter().zip(&ranked) {
            let i = prepared
                .tables
                .iter()
                .position(|t| std::ptr::eq(t, lq.query.table))
                .expect("query table comes from the prepared cells");
            run.insert(&prepared.cells[i].cell_id, r);
        }
        artifacts::write_artifact(path, artifacts::RUN, &run.to_text())?;
        println!("cross-validated run written to {}", path.display());
    }
    Ok(())
}

/// Requests for every test cell, with the cell concealed in its table.
fn batch_requests(cfg: &Config, k: i64) -> Result<Vec<(String, SuggestRequest)>> {
    let (collection, _) = artifacts::load_testset(&cfg.testset_dir())?;
    collection
        .cells
        .iter()
        .map(|c| {
            let table: Table = collection.input_table(c)?;
            Ok((
                c.cell_id.clone(),
                SuggestRequest {
                    table: table.to_record(),
                    row: Some(c.row),
                    entity: None,
                    column: Some(c.col),
                    heading: None,
                    k,
                },
            ))
        })
        .collect()
}

/// Run-file lines for a response, with the same provenance tokens the
/// evaluation runs use.
fn run_entries(resp: &SuggestResponse) -> Vec<RunEntry> {
    resp.suggestions
        .iter()
        .map(|s| RunEntry {
            rank: s.rank,
            value: Candidate::from_key(&s.canonical).unwrap_or(Candidate::Empty),
            score: s.score,
            provenance: s
                .evidence
                .iter()
                .map(|e| match e {
                    Evidence::Table { table_id, heading, .. } => format!("tc:{table_id}:{heading}"),
                    Evidence::Kb { predicate, .. } => format!("kb:{predicate}"),
                })
                .collect::<Vec<_>>()
                .join(";"),
        })
        .collect()
}

fn print_response(out: &mut impl Write, r: &SuggestResponse) -> Result<()> {
    writeln!(out, "{} / {}", r.entity, r.heading)?;
    for s in &r.suggestions {
        let prov: Vec<String> = s
            .evidence
            .iter()
            .map(|e| match e {
                Evidence::Table { table_id, heading, .. } => format!("table {table_id} [{heading}]"),
                Evidence::Kb { predicate, .. } => format!("kb {predicate}"),
            })
            .collect();
        let shown = if s.is_empty { "(empty)" } else { s.display.as_str() };
        writeln!(out, "{:>3}. {:<30} {:>8.4}  {}", s.rank, shown, s.score, prov.join("; "))?;
    }
    Ok(())
}

fn suggest_cmd(cfg: &Config, a: &SuggestArgs) -> Result<()> {
    let snap = Snapshot::load(cfg)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if a.batch {
        let requests = batch_requests(cfg, a.k)?;
        let mut run = Run::default();
        for (cell, req) in &requests {
            let resp = suggest(&snap, req)?;
            if a.json {
                let line = serde_json::json!({ "cell": cell, "response": resp });
                writeln!(out, "{line}")?;
            } else {
                run.0.insert(cell.clone(), run_entries(&resp));
            }
        }
        if !a.json {
            match &a.out {
                Some(p) => {
                    artifacts::write_artifact(p, artifacts::RUN, &run.to_text())?;
                    eprintln!("{} cells ranked, run written to {}", requests.len(), p.display());
                }
                None => write!(out, "{}", run.to_text())?,
            }
        }
        return Ok(());
    }
    let req = match &a.table {
        Some(p) => SuggestRequest {
            table: serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
            row: a.row,
            entity: a.entity.clone(),
            column: a.column,
            heading: a.heading.clone(),
            k: a.k,
        },
        None => {
            let (Some(e), Some(h)) = (&a.entity, &a.heading) else {
                bail!("without --table, both --entity and --heading are needed");
            };
            SuggestRequest::stub(e, h, a.k)
        }
    };
    let resp = suggest(&snap, &req)?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string(&resp)?)?;
    } else {
        print_response(&mut out, &resp)?;
    }
    Ok(())
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<()> {
    let run = Run::parse(&read(&a.run)?)?;
    let qrels = Qrels::parse(&read(&a.qrels)?)?;
    let name = a.run.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
    let report = evaluate(&name, &run, &qrels)?;
    if a.json {
        println!("{}", serde_json::to_string(&report)?);
    } else {
        print!("{}", Report::table(std::slice::from_ref(&report)));
        println!(
            "cells: {} with a non-empty value, {} in total",
            report.empty_excluded.cells, report.empty_included.cells
        );
    }
    Ok(())
}

fn serve(cfg: &Config, addr: &str) -> Result<()> {
    let snap = Arc::new(Snapshot::load(cfg)?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(cellac::server::serve(snap, addr))
}

fn bench(a: &BenchArgs) -> Result<()> {
    let params = SynthParams {
        seed: a.seed,
        scale: a.scale,
        ..Default::default()
    };
    let grid = GridParams {
        forest: cellac_core::forest::ForestParams {
            seed: a.seed,
            ..Default::default()
        },
        folds: a.folds,
        all_tc: true,
    };
    let setup = synthetic_setup(&params, a.per_type, a.cells, &grid.forest)?;
    let prepared = PreparedCells::new(&setup.collection)?;
    let runs = run_grid(&setup.engine, &prepared, &setup.qrels, &grid)?;
    let reports = evaluate_grid(&runs, &setup.qrels)?;
    let empty: Vec<(String, f64)> = runs
        .iter()
        .map(|(n, r)| Ok((n.clone(), empty_cell_ndcg10(r, &setup.qrels)?)))
        .collect::<Result<_>>()?;
    if a.json {
        let j = serde_json::json!({ "cells": prepared.len(), "reports": reports, "empty_cell_ndcg10": empty });
        println!("{j}");
        return Ok(());
    }
    println!("{} cells, {} corpus tables", prepared.len(), setup.engine.corpus.len());
    print!("{}", Report::table(&reports));
    let held: HashSet<&str> = ["otg", "cac-I", "cac-I+II", "cac-I+II+III"].into();
    for (n, s) in empty.iter().filter(|(n, _)| held.contains(n.as_str())) {
        println!("{n:<14} empty-cell NDCG@10 {s:.4}");
    }
    Ok(())
}
