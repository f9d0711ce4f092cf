//! Scoring candidate pools: knowledge-base and table-corpus single-source
//! rankers, the KB-first baseline, and the feature-based learned ranker.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::candidates::{
    build_pool, find_kb_candidates, find_tc_candidates, merge_candidates, tie_break, Candidate,
    CandidateValue, CellQuery,
};
use crate::embed::LabelEmbeddings;
use crate::error::{Error, Result};
use crate::eval::ndcg_at_k;
use crate::forest::{fit, FeatureSchema, FeatureVector, ForestModel, ForestParams};
use crate::kb::Kb;
use crate::matching::{
    extract_match_features, infogather_similarities, tmatch_score, MatchSettings, TableProfile,
    TableQuality, QUALITY_NAMES,
};
use crate::similarity::edit_sim;
use crate::stats::HeadingStats;
use crate::table::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KbVariant {
    Ed,
    Mp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Matcher {
    InfoGather,
    TMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Combine {
    Top,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeadSim {
    Uni,
    Ed,
    Mp,
    L2v,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TcConfig {
    pub matcher: Matcher,
    pub combine: Combine,
    pub headsim: HeadSim,
}

impl TcConfig {
    pub const fn new(matcher: Matcher, combine: Combine, headsim: HeadSim) -> TcConfig {
        TcConfig {
            matcher,
            combine,
            headsim,
        }
    }

    /// Every matcher × combination × heading-similarity configuration.
    pub fn all() -> Vec<TcConfig> {
        let mut v = Vec::new();
        for m in [Matcher::InfoGather, Matcher::TMatch] {
            for c in [Combine::Top, Combine::All] {
                for h in [HeadSim::Uni, HeadSim::Ed, HeadSim::Mp, HeadSim::L2v] {
                    v.push(TcConfig::new(m, c, h));
                }
            }
        }
        v
    }
}

impl fmt::Display for TcConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = match self.matcher {
            Matcher::InfoGather => "infogather",
            Matcher::TMatch => "tmatch",
        };
        let c = match self.combine {
            Combine::Top => "top",
            Combine::All => "all",
        };
        let h = match self.headsim {
            HeadSim::Uni => "uni",
            HeadSim::Ed => "ed",
            HeadSim::Mp => "mp",
            HeadSim::L2v => "l2v",
        };
        write!(f, "{m}-{c}-{h}")
    }
}

impl FromStr for TcConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<TcConfig> {
        let parts: Vec<&str> = s.split('-').collect();
        let bad = || Error::InvalidArgument(format!("unknown table-corpus ranker `{s}`"));
        let [m, c, h] = parts.as_slice() else { return Err(bad()) };
        let matcher = match *m {
            "infogather" | "ig" => Matcher::InfoGather,
            "tmatch" => Matcher::TMatch,
            _ => return Err(bad()),
        };
        let combine = match *c {
            "top" => Combine::Top,
            "all" => Combine::All,
            _ => return Err(bad()),
        };
        let headsim = match *h {
            "uni" => HeadSim::Uni,
            "ed" => HeadSim::Ed,
            "mp" => HeadSim::Mp,
            "l2v" => HeadSim::L2v,
            _ => return Err(bad()),
        };
        Ok(TcConfig::new(matcher, combine, headsim))
    }
}

/// Nested feature sets of the learned ranker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[allow(non_camel_case_types)]
pub enum FeatureGroups {
    I,
    I_II,
    I_II_III,
}

impl FeatureGroups {
    pub const ALL: [FeatureGroups; 3] = [FeatureGroups::I, FeatureGroups::I_II, FeatureGroups::I_II_III];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroups::I => "I",
            FeatureGroups::I_II => "I+II",
            FeatureGroups::I_II_III => "I+II+III",
        }
    }

    fn width(self) -> usize {
        match self {
            FeatureGroups::I => GROUP_I.len(),
            FeatureGroups::I_II => GROUP_I.len() + GROUP_II.len(),
            FeatureGroups::I_II_III => all_feature_names().len(),
        }
    }

    pub fn schema(self) -> FeatureSchema {
        static SCHEMAS: OnceLock<[FeatureSchema; 3]> = OnceLock::new();
        let all = SCHEMAS.get_or_init(|| {
            FeatureGroups::ALL.map(|g| FeatureSchema::new(all_feature_names()[..g.width()].iter().cloned()))
        });
        all[self as usize].clone()
    }

    pub fn from_schema(schema: &FeatureSchema) -> Option<FeatureGroups> {
        FeatureGroups::ALL
            .into_iter()
            .find(|g| g.schema().names() == schema.names())
    }
}

impl FromStr for FeatureGroups {
    type Err = Error;

    fn from_str(s: &str) -> Result<FeatureGroups> {
        match s.to_ascii_uppercase().replace(['-', '_', ' '], "+").as_str() {
            "I" => Ok(FeatureGroups::I),
            "I+II" => Ok(FeatureGroups::I_II),
            "I+II+III" => Ok(FeatureGroups::I_II_III),
            _ => Err(Error::InvalidArgument(format!("unknown feature groups `{s}`"))),
        }
    }
}

const GROUP_I: [&str; 6] = [
    "IS_TC",
    "IS_KB",
    "EDITDIST_PH",
    "MAPPINGPROB_PH",
    "EDITDIST_HH",
    "MAPPINGPROB_HH",
];

const GROUP_II: [&str; 12] = [
    "NUM_E",
    "NUM_H",
    "NUM_EH",
    "EMPTY_RATE",
    "MATCH_PH_NUM",
    "MATCH_HH_NUM",
    "MATCH_PH_MAX",
    "MATCH_PH_AVG",
    "MATCH_PH_SUM",
    "MATCH_HH_MAX",
    "MATCH_HH_AVG",
    "MATCH_HH_SUM",
];

const HEADSIMS: [HeadSim; 3] = [HeadSim::Ed, HeadSim::Mp, HeadSim::L2v];

fn all_feature_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut v: Vec<String> = GROUP_I.iter().chain(&GROUP_II).map(|s| s.to_string()).collect();
        v.extend(["TMATCH_NUM", "TMATCH_MAX", "TMATCH_AVG", "TMATCH_SUM"].map(String::from));
        for m in ["IG", "TMATCH"] {
            for h in ["ED", "MP", "L2V"] {
                for a in ["MAX", "AVG", "SUM"] {
                    v.push(format!("SCORE_{m}_{h}_{a}"));
                }
            }
        }
        v.extend(QUALITY_NAMES.iter().map(|q| format!("TABLE_{}_AVG", q.to_uppercase())));
        v
    })
}

/// Names of every value-ranking feature, in schema order.
pub fn feature_names() -> &'static [String] {
    all_feature_names()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankerSettings {
    /// Empty score of the edit-distance KB ranker.
    pub gamma_ed: f64,
    /// Empty score of the mapping-probability KB ranker.
    pub gamma_mp: f64,
    /// Minimum label edit similarity for admitting a predicate.
    pub tau_ed: f64,
    pub matching: MatchSettings,
    /// Table-corpus ranker used for the non-KB part of the KB-first baseline.
    pub otg_tc: TcConfig,
}

impl Default for RankerSettings {
    fn default() -> Self {
        RankerSettings {
            gamma_ed: 0.8,
            gamma_mp: 0.6,
            tau_ed: 0.8,
            matching: MatchSettings::default(),
            otg_tc: TcConfig::new(Matcher::InfoGather, Combine::All, HeadSim::Ed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranked {
    pub rank: usize,
    pub score: f64,
    pub candidate: CandidateValue,
}

/// Sort by score descending, ties by canonical key with `Empty` last, and
/// number ranks from 1.
pub fn sort_ranked(scored: Vec<(CandidateValue, f64)>) -> Vec<Ranked> {
    let mut scored = scored;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| tie_break(&a.0.value, &b.0.value)));
    scored
        .into_iter()
        .enumerate()
        .map(|(i, (candidate, score))| Ranked {
            rank: i + 1,
            score,
            candidate,
        })
        .collect()
}

/// Matching scores of one supporting table against the input table.
#[derive(Debug, Clone, Copy)]
struct TableScores {
    ig: f64,
    tmatch: Option<f64>,
    quality: TableQuality,
}

/// Learned value ranker: a forest over one of the nested feature sets.
#[derive(Debug, Clone, PartialEq)]
pub struct LtrModel {
    pub groups: FeatureGroups,
    pub forest: ForestModel,
}

impl LtrModel {
    pub fn from_forest(forest: ForestModel) -> Result<LtrModel> {
        let groups = FeatureGroups::from_schema(forest.schema()).ok_or_else(|| Error::SchemaMismatch {
            expected: "a value-ranking feature set".into(),
            got: format!("{} unrecognized features", forest.schema().len()),
        })?;
        Ok(LtrModel { groups, forest })
    }

    pub fn to_json(&self) -> String {
        self.forest.to_json()
    }

    pub fn from_json(text: &str) -> Result<LtrModel> {
        Self::from_forest(ForestModel::from_json(text)?)
    }
}

/// A query with its ground-truth values.
#[derive(Debug, Clone, Copy)]
pub struct LabeledQuery<'a> {
    pub query: CellQuery<'a>,
    pub truth: &'a [Candidate],
}

fn is_correct(c: &Candidate, truth: &[Candidate]) -> bool {
    truth.iter().any(|t| t.matches(c))
}

/// Read-only bundle of artifacts used for ranking.
#[derive(Debug, Clone)]
pub struct Engine {
    pub corpus: Corpus,
    pub kb: Kb,
    pub stats: Option<HeadingStats>,
    pub embeddings: Option<LabelEmbeddings>,
    pub tmatch: Option<ForestModel>,
    pub settings: RankerSettings,
    empty_stats: HeadingStats,
}

fn aggregate(xs: &[f64]) -> [f64; 3] {
    if xs.is_empty() {
        return [0.0; 3];
    }
    let sum: f64 = xs.iter().sum();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    [max, sum / xs.len() as f64, sum]
}

impl Engine {
    pub fn new(corpus: Corpus, kb: Kb) -> Engine {
        Engine {
            corpus,
            kb,
            stats: None,
            embeddings: None,
            tmatch: None,
            settings: RankerSettings::default(),
            empty_stats: HeadingStats::default(),
        }
    }

    pub fn with_stats(mut self, stats: HeadingStats) -> Engine {
        self.stats = Some(stats);
        self
    }

    pub fn with_embeddings(mut self, emb: LabelEmbeddings) -> Engine {
        self.embeddings = Some(emb);
        self
    }

    pub fn with_tmatch(mut self, model: ForestModel) -> Engine {
        self.tmatch = Some(model);
        self
    }

    pub fn with_settings(mut self, settings: RankerSettings) -> Engine {
        self.settings = settings;
        self
    }

    fn stats_or_empty(&self) -> &HeadingStats {
        self.stats.as_ref().unwrap_or(&self.empty_stats)
    }

    fn require_stats(&self) -> Result<&HeadingStats> {
        self.stats.as_ref().ok_or(Error::MissingResource("heading statistics"))
    }

    fn require_embeddings(&self) -> Result<&LabelEmbeddings> {
        self.embeddings.as_ref().ok_or(Error::MissingResource("label embeddings"))
    }

    fn require_tmatch(&self) -> Result<&ForestModel> {
        self.tmatch.as_ref().ok_or(Error::MissingResource("table matching model"))
    }

    /// Candidate pool from both sources plus `Empty`.
    pub fn pool(&self, q: &CellQuery) -> Vec<CandidateValue> {
        build_pool(q, &self.corpus, &self.kb, self.stats_or_empty(), self.settings.tau_ed)
    }

    pub fn head_sim(&self, sim: HeadSim, h_prime: &str, h: &str) -> Result<f64> {
        Ok(match sim {
            HeadSim::Uni => 1.0,
            HeadSim::Ed => edit_sim(h_prime, h),
            HeadSim::Mp => self.require_stats()?.p_h2h(h_prime, h),
            HeadSim::L2v => self.require_embeddings()?.l2v_sim(h_prime, h),
        })
    }

    fn table_scores(
        &self,
        q: &CellQuery,
        tables: &[u32],
        with_tmatch: bool,
    ) -> Result<HashMap<u32, TableScores>> {
        let model = if with_tmatch { Some(self.require_tmatch()?) } else { None };
        let input = TableProfile::new(q.table);
        let w = &self.settings.matching.ig_weights;
        let mut out = HashMap::with_capacity(tables.len());
        for &t in tables {
            let cand = TableProfile::new(self.corpus.table(t));
            let ig_sims = infogather_similarities(&input, &cand, Some(q.heading));
            let ig = ig_sims.iter().zip(w).map(|(s, w)| s * w).sum();
            let tmatch = match model {
                Some(m) => {
                    let f = extract_match_features(&input, &cand, None, &self.corpus, &self.settings.matching);
                    Some(tmatch_score(m, &f)?)
                }
                None => None,
            };
            out.insert(
                t,
                TableScores {
                    ig,
                    tmatch,
                    quality: TableQuality::of(cand.table, &self.corpus),
                },
            );
        }
        Ok(out)
    }

    /// Per supporting table of `c`: `score(T', T) · max_{h'} sim(h', h)`
    /// where `h'` ranges over the headings under which `T'` holds the value.
    fn table_products(
        &self,
        c: &CandidateValue,
        h: &str,
        scores: &HashMap<u32, TableScores>,
        matcher: Matcher,
        sim: HeadSim,
    ) -> Result<Vec<f64>> {
        let mut best: BTreeMap<u32, f64> = BTreeMap::new();
        for ev in &c.tc {
            let s = self.head_sim(sim, &ev.heading, h)?;
            let slot = best.entry(ev.table).or_insert(f64::NEG_INFINITY);
            *slot = slot.max(s);
        }
        best.into_iter()
            .map(|(t, s)| {
                let ts = &scores[&t];
                let m = match matcher {
                    Matcher::InfoGather => ts.ig,
                    Matcher::TMatch => ts.tmatch.ok_or(Error::MissingResource("table matching model"))?,
                };
                Ok(m * s)
            })
            .collect()
    }

    fn kb_score(&self, c: &CandidateValue, h: &str, variant: KbVariant) -> f64 {
        c.kb.iter()
            .map(|k| match variant {
                KbVariant::Ed => edit_sim(&k.label, h),
                KbVariant::Mp => self.stats_or_empty().p_p2h(&k.predicate, h),
            })
            .fold(0.0, f64::max)
    }

    /// KB-only ranking: a value scores its best predicate-to-heading match;
    /// `Empty` scores `gamma`.
    pub fn kb_rank(&self, q: &CellQuery, variant: KbVariant, gamma: f64) -> Result<Vec<Ranked>> {
        if variant == KbVariant::Mp {
            self.require_stats()?;
        }
        let mut pool = merge_candidates(find_kb_candidates(
            q,
            &self.kb,
            self.stats_or_empty(),
            self.settings.tau_ed,
        ));
        pool.push(CandidateValue::empty());
        let scored = pool
            .into_iter()
            .map(|c| {
                let s = if c.value.is_empty() {
                    gamma
                } else {
                    self.kb_score(&c, q.heading, variant)
                };
                (c, s)
            })
            .collect();
        Ok(sort_ranked(scored))
    }

    fn tc_pool(&self, q: &CellQuery) -> Vec<CandidateValue> {
        let mut pool = merge_candidates(find_tc_candidates(q, &self.corpus, self.stats_or_empty()));
        pool.push(CandidateValue::empty());
        pool
    }

    fn tc_scores(&self, q: &CellQuery, pool: &[CandidateValue], cfg: TcConfig) -> Result<Vec<f64>> {
        if cfg.headsim == HeadSim::Mp {
            self.require_stats()?;
        }
        if cfg.headsim == HeadSim::L2v {
            self.require_embeddings()?;
        }
        let tables = supporting_tables(pool);
        let scores = self.table_scores(q, &tables, cfg.matcher == Matcher::TMatch)?;
        pool.iter()
            .map(|c| {
                if c.value.is_empty() || c.tc.is_empty() {
                    return Ok(0.0);
                }
                let products = self.table_products(c, q.heading, &scores, cfg.matcher, cfg.headsim)?;
                Ok(match cfg.combine {
                    Combine::Top => products.iter().copied().fold(0.0, f64::max),
                    Combine::All => products.iter().sum(),
                })
            })
            .collect()
    }

    /// Table-corpus-only ranking; `Empty` scores 0.
    pub fn tc_rank(&self, q: &CellQuery, cfg: TcConfig) -> Result<Vec<Ranked>> {
        let pool = self.tc_pool(q);
        let scores = self.tc_scores(q, &pool, cfg)?;
        Ok(sort_ranked(pool.into_iter().zip(scores).collect()))
    }

    /// KB-first baseline: KB values (edit-distance scores) before table
    /// values, `Empty` last.
    pub fn otg_rank(&self, q: &CellQuery) -> Result<Vec<Ranked>> {
        let pool = self.pool(q);
        let tc = self.tc_scores(q, &pool, self.settings.otg_tc)?;
        let scored = pool
            .into_iter()
            .zip(tc)
            .map(|(c, s)| {
                let score = if c.value.is_empty() {
                    -1.0
                } else if c.is_kb() {
                    2.0 + self.kb_score(&c, q.heading, KbVariant::Ed)
                } else {
                    s.max(0.0) / (1.0 + s.max(0.0))
                };
                (c, score)
            })
            .collect();
        Ok(sort_ranked(scored))
    }

    /// Feature vectors for every candidate of `pool`.
    pub fn features(
        &self,
        q: &CellQuery,
        pool: &[CandidateValue],
        groups: FeatureGroups,
    ) -> Result<Vec<FeatureVector>> {
        let stats = self.require_stats()?;
        let third = groups == FeatureGroups::I_II_III;
        let scores = if third {
            self.require_embeddings()?;
            self.table_scores(q, &supporting_tables(pool), true)?
        } else {
            HashMap::new()
        };
        let h = q.heading;

        let mut context = Vec::with_capacity(GROUP_II.len());
        if groups >= FeatureGroups::I_II {
            let ph: Vec<f64> = stats.matched_predicates(h).iter().map(|&(_, n)| n as f64).collect();
            let hh: Vec<f64> = stats.related_headings(h).iter().map(|&(_, n)| n as f64).collect();
            context.extend([
                self.corpus.entity_rows(q.entity).len() as f64,
                self.corpus.heading_columns(h).len() as f64,
                self.corpus.entity_heading_cells(q.entity, h).len() as f64,
                self.corpus.empty_rate(h),
                ph.len() as f64,
                hh.len() as f64,
            ]);
            context.extend(aggregate(&ph));
            context.extend(aggregate(&hh));
        }

        let schema = groups.schema();
        pool.iter()
            .map(|c| {
                let mut v = Vec::with_capacity(schema.len());
                if c.value.is_empty() {
                    v.extend([0.0; GROUP_I.len()]);
                } else {
                    let max_kb = |f: &dyn Fn(&str, &str) -> f64| {
                        c.kb.iter().map(|k| f(&k.predicate, &k.label)).fold(0.0, f64::max)
                    };
                    let max_tc = |f: &dyn Fn(&str) -> f64| c.tc.iter().map(|t| f(&t.heading)).fold(0.0, f64::max);
                    v.extend([
                        c.is_tc() as u8 as f64,
                        c.is_kb() as u8 as f64,
                        max_kb(&|_, label| edit_sim(label, h)),
                        max_kb(&|p, _| stats.p_p2h(p, h)),
                        max_tc(&|h2| edit_sim(h2, h)),
                        max_tc(&|h2| stats.p_h2h(h2, h)),
                    ]);
                }
                v.extend(&context);
                if third {
                    if c.value.is_empty() || c.tc.is_empty() {
                        v.extend(std::iter::repeat(0.0).take(schema.len() - v.len()));
                    } else {
                        let tables = c.supporting_tables();
                        let tm: Vec<f64> = tables.iter().map(|t| scores[t].tmatch.unwrap_or(0.0)).collect();
                        v.push(tm.iter().filter(|&&s| s > 0.0).count() as f64);
                        v.extend(aggregate(&tm));
                        for m in [Matcher::InfoGather, Matcher::TMatch] {
                            for sim in HEADSIMS {
                                v.extend(aggregate(&self.table_products(c, h, &scores, m, sim)?));
                            }
                        }
                        let mut quality = [0.0; 10];
                        for t in &tables {
                            for (acc, x) in quality.iter_mut().zip(scores[t].quality.values()) {
                                *acc += x / tables.len() as f64;
                            }
                        }
                        v.extend(quality);
                    }
                }
                FeatureVector::new(schema.clone(), v)
            })
            .collect()
    }

    /// Pointwise training: a candidate's target is 1 when it matches the
    /// ground truth, `Empty` included.
    pub fn train_ltr(
        &self,
        cells: &[LabeledQuery],
        groups: FeatureGroups,
        params: &ForestParams,
    ) -> Result<LtrModel> {
        let per_cell: Vec<Vec<(FeatureVector, f64)>> = cells
            .par_iter()
            .map(|lq| {
                let pool = self.pool(&lq.query);
                let feats = self.features(&lq.query, &pool, groups)?;
                Ok(pool
                    .iter()
                    .zip(feats)
                    .map(|(c, f)| (f, is_correct(&c.value, lq.truth) as u8 as f64))
                    .collect())
            })
            .collect::<Result<_>>()?;
        let samples: Vec<(FeatureVector, f64)> = per_cell.into_iter().flatten().collect();
        Ok(LtrModel {
            groups,
            forest: fit(&samples, params)?,
        })
    }

    /// Score the full pool with a learned model and keep the top `k`.
    pub fn rank(&self, q: &CellQuery, model: &LtrModel, k: usize) -> Result<Vec<Ranked>> {
        let pool = self.pool(q);
        let feats = self.features(q, &pool, model.groups)?;
        let scored = pool
            .into_iter()
            .zip(feats)
            .map(|(c, f)| Ok((c, model.forest.predict(&f)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut ranked = sort_ranked(scored);
        ranked.truncate(k);
        Ok(ranked)
    }

    /// Pick the `gamma` of `grid` with the best mean NDCG@10 (`Empty`
    /// counted as a value); ties go to the smaller value.
    pub fn learn_gamma(&self, cells: &[LabeledQuery], variant: KbVariant, grid: &[f64]) -> Result<f64> {
        if grid.is_empty() {
            return Err(Error::InvalidArgument("empty gamma grid".into()));
        }
        let rankings: Vec<Vec<Ranked>> = cells
            .par_iter()
            .map(|lq| self.kb_rank(&lq.query, variant, 0.0))
            .collect::<Result<_>>()?;
        let mut best = (grid[0], f64::NEG_INFINITY);
        for &g in grid {
            let mut total = 0.0;
            for (lq, ranked) in cells.iter().zip(&rankings) {
                let rescored: Vec<(CandidateValue, f64)> = ranked
                    .iter()
                    .map(|r| {
                        let s = if r.candidate.value.is_empty() { g } else { r.score };
                        (r.candidate.clone(), s)
                    })
                    .collect();
                let values: Vec<Candidate> = sort_ranked(rescored).into_iter().map(|r| r.candidate.value).collect();
                total += ndcg_at_k(&values, lq.truth, 10)?;
            }
            let mean = total / cells.len().max(1) as f64;
            if mean > best.1 + 1e-12 {
                best = (g, mean);
            }
        }
        Ok(best.0)
    }
}

fn supporting_tables(pool: &[CandidateValue]) -> Vec<u32> {
    let mut t: Vec<u32> = pool.iter().flat_map(|c| c.tc.iter().map(|e| e.table)).collect();
    t.sort_unstable();
    t.dedup();
    t
}

/// Assign `n` items to `k` folds after a seeded shuffle.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > n.max(2) {
        return Err(Error::InvalidArgument(format!("cannot split {n} items into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % k;
    }
    Ok(folds)
}

/// K-fold cross-validated learned ranking: each cell is ranked by a model
/// trained on the other folds.
pub fn cross_validate(
    engine: &Engine,
    cells: &[LabeledQuery],
    groups: FeatureGroups,
    params: &ForestParams,
    folds: usize,
    k: usize,
) -> Result<Vec<Vec<Ranked>>> {
    let assign = fold_assignment(cells.len(), folds, params.seed)?;
    let mut out: Vec<Option<Vec<Ranked>>> = vec![None; cells.len()];
    for f in 0..folds {
        let train: Vec<LabeledQuery> = cells
            .iter()
            .zip(&assign)
            .filter(|(_, &a)| a != f)
            .map(|(c, _)| *c)
            .collect();
        let model = engine.train_ltr(&train, groups, params)?;
        let test: Vec<usize> = (0..cells.len()).filter(|&i| assign[i] == f).collect();
        let ranked: Vec<Vec<Ranked>> = test
            .par_iter()
            .map(|&i| engine.rank(&cells[i].query, &model, k))
            .collect::<Result<_>>()?;
        for (i, r) in test.into_iter().zip(ranked) {
            out[i] = Some(r);
        }
    }
    Ok(out.into_iter().map(|r| r.unwrap_or_default()).collect())
}
