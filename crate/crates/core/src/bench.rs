//! Experimental grid: every single-source ranker, the KB-first baseline and
//! the learned ranker with each feature set, run over a set of test cells.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::embed::{train_label_embeddings, EmbeddingParams};
use crate::error::Result;
use crate::eval::{build_test_collection, evaluate, PreparedCells, Qrels, Report, Run, TestCollection};
use crate::forest::ForestParams;
use crate::matching::train_tmatch;
use crate::ranker::{cross_validate, Engine, FeatureGroups, KbVariant, LabeledQuery, Ranked, TcConfig};
use crate::stats::HeadingStats;
use crate::synth::{SynthParams, Synthetic};
use crate::table::{Corpus, Table};

/// Suggestions kept per cell in runs.
pub const RUN_DEPTH: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub forest: ForestParams,
    pub folds: usize,
    /// Also run all sixteen table-corpus configurations (otherwise only the
    /// best-known ones).
    pub all_tc: bool,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            forest: ForestParams::default(),
            folds: 5,
            all_tc: true,
        }
    }
}

/// Everything needed to run the grid on a synthetic world.
pub struct SyntheticSetup {
    pub world: Synthetic,
    pub collection: TestCollection,
    pub engine: Engine,
    pub qrels: Qrels,
}

/// Generate a world, hold out a test collection, and build every artifact
/// on the remaining corpus.
pub fn synthetic_setup(
    params: &SynthParams,
    per_type: usize,
    cells_per_column: usize,
    forest: &ForestParams,
) -> Result<SyntheticSetup> {
    let world = Synthetic::generate(params);
    let tables = world
        .tables
        .iter()
        .cloned()
        .map(Table::from_record)
        .collect::<Result<Vec<_>>>()?;
    let full = Corpus::from_tables(tables);
    let (collection, corpus) = build_test_collection(&full, per_type, cells_per_column, params.seed)?;
    let kb = world.kb();
    let stats = HeadingStats::build(&corpus, &kb);
    let emb = train_label_embeddings(
        &corpus,
        &EmbeddingParams {
            seed: params.seed,
            ..Default::default()
        },
    )?;
    let held_out: HashSet<&str> = collection.tables.iter().map(|t| t.id.as_str()).collect();
    let pairs: Vec<_> = world
        .pairs
        .iter()
        .filter(|p| !held_out.contains(p.input.as_str()) && !held_out.contains(p.candidate.as_str()))
        .cloned()
        .collect();
    let engine = Engine::new(corpus, kb).with_stats(stats).with_embeddings(emb);
    let tmatch = train_tmatch(&pairs, &engine.corpus, &engine.corpus, &engine.settings.matching, forest)?;
    let engine = engine.with_tmatch(tmatch);
    let qrels = world.qrels(&collection);
    Ok(SyntheticSetup {
        world,
        collection,
        engine,
        qrels,
    })
}

fn run_of(prepared: &PreparedCells, rankings: Vec<Vec<Ranked>>) -> Run {
    let mut run = Run::default();
    for (cell, mut ranked) in prepared.cells.iter().zip(rankings) {
        ranked.truncate(RUN_DEPTH);
        run.insert(&cell.cell_id, &ranked);
    }
    run
}

fn per_cell<F>(prepared: &PreparedCells, f: F) -> Result<Vec<Vec<Ranked>>>
where
    F: Fn(usize) -> Result<Vec<Ranked>> + Sync + Send,
{
    (0..prepared.len()).into_par_iter().map(f).collect()
}

/// Named runs of every method.
pub fn run_grid(
    engine: &Engine,
    prepared: &PreparedCells,
    qrels: &Qrels,
    params: &GridParams,
) -> Result<Vec<(String, Run)>> {
    let mut runs = Vec::new();
    let truths: Vec<Vec<_>> = prepared
        .cells
        .iter()
        .map(|c| qrels.get(&c.cell_id).map(<[_]>::to_vec).unwrap_or_default())
        .collect();
    let labeled: Vec<LabeledQuery> = (0..prepared.len())
        .map(|i| LabeledQuery {
            query: prepared.query(i),
            truth: &truths[i],
        })
        .collect();

    for (name, variant, gamma) in [
        ("kb-ed", KbVariant::Ed, engine.settings.gamma_ed),
        ("kb-mp", KbVariant::Mp, engine.settings.gamma_mp),
    ] {
        let ranked = per_cell(prepared, |i| engine.kb_rank(&prepared.query(i), variant, gamma))?;
        runs.push((name.to_string(), run_of(prepared, ranked)));
    }
    let configs = if params.all_tc {
        TcConfig::all()
    } else {
        vec![engine.settings.otg_tc]
    };
    for cfg in configs {
        let ranked = per_cell(prepared, |i| engine.tc_rank(&prepared.query(i), cfg))?;
        runs.push((format!("tc-{cfg}"), run_of(prepared, ranked)));
    }
    let ranked = per_cell(prepared, |i| engine.otg_rank(&prepared.query(i)))?;
    runs.push(("otg".to_string(), run_of(prepared, ranked)));
    for groups in FeatureGroups::ALL {
        let ranked = cross_validate(engine, &labeled, groups, &params.forest, params.folds, RUN_DEPTH)?;
        runs.push((format!("cac-{}", groups.as_str()), run_of(prepared, ranked)));
    }
    Ok(runs)
}

pub fn evaluate_grid(runs: &[(String, Run)], qrels: &Qrels) -> Result<Vec<Report>> {
    runs.iter().map(|(name, run)| evaluate(name, run, qrels)).collect()
}
