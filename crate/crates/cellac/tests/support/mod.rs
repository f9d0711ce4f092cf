//! A work directory built by running the real binary through the whole
//! pipeline on a small synthetic world.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use tower::ServiceExt;

use cellac::artifacts::Snapshot;
use cellac::config::Config;

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cellac"));
    c.env("RUST_LOG", "error");
    // keep the caller's environment from leaking into settings
    for (k, _) in std::env::vars() {
        if k.starts_with("CELLAC_") {
            c.env_remove(k);
        }
    }
    c
}

/// Run `cellac --workdir <work> args...`.
pub fn cellac(work: &Path, args: &[&str]) -> Output {
    bin().arg("--workdir").arg(work).args(args).output().expect("binary runs")
}

pub fn ok(work: &Path, args: &[&str]) -> String {
    let out = cellac(work, args);
    assert!(
        out.status.success(),
        "cellac {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    pub fn work(&self) -> PathBuf {
        self.dir.path().join("work")
    }

    pub fn synth(&self) -> PathBuf {
        self.dir.path().join("synth")
    }

    pub fn config(&self) -> Config {
        Config {
            workdir: self.work(),
            ..Default::default()
        }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        Arc::new(Snapshot::load(&self.config()).unwrap())
    }
}

/// Synthetic inputs plus every artifact, with `per_type × 4 × cells` test
/// cells.
pub fn pipeline(per_type: usize, cells: usize) -> Fixture {
    let fx = Fixture {
        dir: tempfile::tempdir().unwrap(),
    };
    let (w, s) = (fx.work(), fx.synth());
    let s_str = s.to_str().unwrap();
    ok(&w, &["synth", "--out", s_str, "--scale", "0.3", "--pairs", "200", "--seed", "3"]);
    ok(
        &w,
        &[
            "ingest",
            "--tables",
            &format!("{s_str}/tables.jsonl"),
            "--triples",
            &format!("{s_str}/triples.tsv"),
            "--labels",
            &format!("{s_str}/labels.tsv"),
        ],
    );
    ok(
        &w,
        &[
            "make-testset",
            "--per-type",
            &per_type.to_string(),
            "--cells",
            &cells.to_string(),
            "--seed",
            "7",
            "--truth",
            &format!("{s_str}/truth.tsv"),
        ],
    );
    ok(&w, &["build-stats"]);
    ok(&w, &["train-embeddings", "--seed", "3"]);
    ok(&w, &["train-tmatch", "--pairs", &format!("{s_str}/pairs.tsv"), "--seed", "3"]);
    ok(&w, &["train-ltr", "--seed", "3"]);
    fx
}

pub async fn call(app: axum::Router, req: Request<Body>) -> (StatusCode, serde_json::Value) {
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap())
}

pub fn post_json(body: impl Into<String>) -> Request<Body> {
    Request::post("/v1/suggest")
        .header("content-type", "application/json")
        .body(Body::from(body.into()))
        .unwrap()
}

pub fn get(path: &str) -> Request<Body> {
    Request::get(path).body(Body::empty()).unwrap()
}

/// Ordered canonical keys from a response body.
pub fn keys(resp: &serde_json::Value) -> Vec<String> {
    resp["suggestions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["canonical"].as_str().unwrap().to_string())
        .collect()
}
