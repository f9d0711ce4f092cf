//! Settings file plus `CELLAC_*` environment overrides.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use figment::providers::{Env, Format, Serialized, Toml};
use figment::Figment;
use serde::{Deserialize, Serialize};

use cellac_core::embed::EmbeddingParams;
use cellac_core::forest::ForestParams;
use cellac_core::ranker::RankerSettings;

/// Flat on purpose: every key maps to one `CELLAC_<KEY>` variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Directory holding every artifact unless a path below overrides it.
    pub workdir: PathBuf,
    pub corpus: Option<PathBuf>,
    pub kb: Option<PathBuf>,
    pub h2h: Option<PathBuf>,
    pub h2p: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub tmatch: Option<PathBuf>,
    pub ltr: Option<PathBuf>,

    pub gamma_ed: f64,
    pub gamma_mp: f64,
    pub tau_ed: f64,
    pub msje_threshold: f64,

    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,

    pub embedding_dim: usize,
    pub embedding_epochs: usize,

    pub addr: String,
}

const KEYS: &[&str] = &[
    "workdir",
    "corpus",
    "kb",
    "h2h",
    "h2p",
    "embeddings",
    "tmatch",
    "ltr",
    "gamma_ed",
    "gamma_mp",
    "tau_ed",
    "msje_threshold",
    "n_trees",
    "max_depth",
    "min_leaf",
    "seed",
    "embedding_dim",
    "embedding_epochs",
    "addr",
];

impl Default for Config {
    fn default() -> Self {
        let ranker = RankerSettings::default();
        let forest = ForestParams::default();
        let emb = EmbeddingParams::default();
        Config {
            workdir: PathBuf::from("cellac-work"),
            corpus: None,
            kb: None,
            h2h: None,
            h2p: None,
            embeddings: None,
            tmatch: None,
            ltr: None,
            gamma_ed: ranker.gamma_ed,
            gamma_mp: ranker.gamma_mp,
            tau_ed: ranker.tau_ed,
            msje_threshold: ranker.matching.msje_threshold,
            n_trees: forest.n_trees,
            max_depth: forest.max_depth,
            min_leaf: forest.min_leaf,
            seed: 1,
            embedding_dim: emb.dim,
            embedding_epochs: emb.epochs,
            addr: "127.0.0.1:8080".into(),
        }
    }
}

impl Config {
    /// Defaults, then the file (if any), then the environment.
    pub fn load(file: Option<&Path>) -> Result<Config> {
        let mut fig = Figment::from(Serialized::defaults(Config::default()));
        if let Some(f) = file {
            if !f.exists() {
                anyhow::bail!("config file {} does not exist", f.display());
            }
            fig = fig.merge(Toml::file(f));
        }
        // other CELLAC_ variables (log level and the like) are not settings
        let env = Env::prefixed("CELLAC_").filter(|k| KEYS.iter().any(|x| k.as_str().eq_ignore_ascii_case(x)));
        fig.merge(env)
            .extract()
            .context("invalid configuration")
    }

    fn path(&self, own: &Option<PathBuf>, name: &str) -> PathBuf {
        own.clone().unwrap_or_else(|| self.workdir.join(name))
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.path(&self.corpus, "corpus.jsonl")
    }

    pub fn kb_path(&self) -> PathBuf {
        self.path(&self.kb, "kb.tsv")
    }

    pub fn h2h_path(&self) -> PathBuf {
        self.path(&self.h2h, "h2h.tsv")
    }

    pub fn h2p_path(&self) -> PathBuf {
        self.path(&self.h2p, "h2p.tsv")
    }

    pub fn embeddings_path(&self) -> PathBuf {
        self.path(&self.embeddings, "embeddings.txt")
    }

    pub fn tmatch_path(&self) -> PathBuf {
        self.path(&self.tmatch, "tmatch.json")
    }

    pub fn ltr_path(&self) -> PathBuf {
        self.path(&self.ltr, "ltr.json")
    }

    pub fn testset_dir(&self) -> PathBuf {
        self.workdir.join("testset")
    }

    pub fn ranker_settings(&self) -> RankerSettings {
        let mut s = RankerSettings {
            gamma_ed: self.gamma_ed,
            gamma_mp: self.gamma_mp,
            tau_ed: self.tau_ed,
            ..Default::default()
        };
        s.matching.msje_threshold = self.msje_threshold;
        s
    }

    pub fn forest_params(&self, seed: u64) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            feature_subsample: None,
            seed,
        }
    }

    pub fn embedding_params(&self, seed: u64) -> EmbeddingParams {
        EmbeddingParams {
            dim: self.embedding_dim,
            epochs: self.embedding_epochs,
            seed,
            ..Default::default()
        }
    }
}
