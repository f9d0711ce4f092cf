//! Auto-completion of data cells in relational tables.
//!
//! Candidate values for a target cell (an entity row and a heading column of
//! an input table) are collected from a table corpus and a knowledge base,
//! then ranked, with an explicit `Empty` candidate standing for "leave the
//! cell blank".

pub mod bench;
pub mod candidates;
pub mod embed;
pub mod eval;
pub mod error;
pub mod forest;
pub mod kb;
pub mod matching;
pub mod ranker;
pub mod similarity;
pub mod stats;
pub mod synth;
pub mod table;
pub mod types;

pub use error::{Error, Result};
