//! Suggestion requests and responses shared by the CLI and the HTTP service.

use serde::{Deserialize, Serialize};

use cellac_core::candidates::{CandidateValue, CellQuery};
use cellac_core::table::{CellRecord, Table, TableRecord};

use crate::artifacts::Snapshot;

pub const DEFAULT_K: i64 = 10;

fn default_k() -> i64 {
    DEFAULT_K
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuggestRequest {
    pub table: TableRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<String>,
    #[serde(default = "default_k")]
    pub k: i64,
}

impl SuggestRequest {
    /// A one-row table holding just the entity and an empty target column.
    pub fn stub(entity: &str, heading: &str, k: i64) -> SuggestRequest {
        SuggestRequest {
            table: TableRecord {
                id: "input".into(),
                page_title: String::new(),
                caption: String::new(),
                headings: vec!["entity".into(), heading.into()],
                rows: vec![vec![CellRecord::entity(entity, entity), CellRecord::text("")]],
                meta: None,
            },
            row: None,
            entity: Some(entity.into()),
            column: None,
            heading: Some(heading.into()),
            k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum Evidence {
    Table {
        table_id: String,
        page_title: String,
        heading: String,
    },
    Kb {
        predicate: String,
        label: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub rank: usize,
    pub display: String,
    /// Typed key of the value, `EMPTY` for the empty suggestion.
    pub canonical: String,
    pub score: f64,
    pub is_empty: bool,
    pub evidence: Vec<Evidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestResponse {
    pub entity: String,
    pub heading: String,
    pub suggestions: Vec<Suggestion>,
}

/// A rejected request: a machine-readable code and a message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>) -> ApiError {
        ApiError {
            code: code.into(),
            message: message.into(),
        }
    }

    /// Errors caused by the request rather than the service.
    pub fn is_client_error(&self) -> bool {
        self.code != "internal"
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

fn evidence(snap: &Snapshot, c: &CandidateValue) -> Vec<Evidence> {
    let mut out: Vec<Evidence> = Vec::new();
    for t in &c.tc {
        let e = Evidence::Table {
            table_id: t.table_id.clone(),
            page_title: snap.engine.corpus.table(t.table).page_title.clone(),
            heading: t.heading.clone(),
        };
        if !out.contains(&e) {
            out.push(e);
        }
    }
    for k in &c.kb {
        let e = Evidence::Kb {
            predicate: k.predicate.clone(),
            label: k.label.clone(),
        };
        if !out.contains(&e) {
            out.push(e);
        }
    }
    out
}

/// Resolve the target cell and rank its candidates with the snapshot's
/// learned model.
pub fn suggest(snap: &Snapshot, req: &SuggestRequest) -> Result<SuggestResponse, ApiError> {
    if req.k < 1 {
        return Err(ApiError::new("invalid_k", format!("k must be at least 1, got {}", req.k)));
    }
    let table =
        Table::from_record(req.table.clone()).map_err(|e| ApiError::new("invalid_table", e.to_string()))?;
    let entity = match (&req.row, &req.entity) {
        (Some(_), Some(_)) | (None, None) => {
            return Err(ApiError::new("invalid_target", "give exactly one of `row` and `entity`"))
        }
        (None, Some(e)) => e.clone(),
        (Some(r), None) => {
            if *r >= table.num_rows() {
                return Err(ApiError::new(
                    "invalid_target",
                    format!("row {r} out of range for {} rows", table.num_rows()),
                ));
            }
            table
                .core_entity(*r)
                .ok_or_else(|| ApiError::new("invalid_target", format!("row {r} has no linked entity")))?
                .to_string()
        }
    };
    let heading = match (&req.column, &req.heading) {
        (Some(_), Some(_)) | (None, None) => {
            return Err(ApiError::new("invalid_target", "give exactly one of `column` and `heading`"))
        }
        (None, Some(h)) => cellac_core::table::normalize_heading(h),
        (Some(c), None) => {
            if *c >= table.num_cols() {
                return Err(ApiError::new(
                    "invalid_target",
                    format!("column {c} out of range for {} columns", table.num_cols()),
                ));
            }
            if *c == table.core_column {
                return Err(ApiError::new("invalid_target", format!("column {c} is the entity column")));
            }
            table.headings[*c].clone()
        }
    };
    if heading.is_empty() {
        return Err(ApiError::new("invalid_target", "empty heading"));
    }
    let q = CellQuery {
        entity: &entity,
        heading: &heading,
        table: &table,
    };
    let ranked = snap
        .engine
        .rank(&q, &snap.ltr, req.k as usize)
        .map_err(|e| ApiError::new("internal", e.to_string()))?;
    let suggestions = ranked
        .iter()
        .map(|r| Suggestion {
            rank: r.rank,
            display: r.candidate.display(),
            canonical: r.candidate.value.key(),
            score: r.score,
            is_empty: r.candidate.value.is_empty(),
            evidence: evidence(snap, &r.candidate),
        })
        .collect();
    Ok(SuggestResponse {
        entity,
        heading,
        suggestions,
    })
}
