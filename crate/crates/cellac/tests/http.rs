mod support;

use std::sync::OnceLock;

use axum::http::StatusCode;
use serde_json::{json, Value};

use cellac::server::router;
use support::*;

fn fixture() -> &'static Fixture {
    static FX: OnceLock<Fixture> = OnceLock::new();
    FX.get_or_init(|| pipeline(1, 3))
}

fn first_cell() -> Value {
    let fx = fixture();
    let text = std::fs::read_to_string(fx.work().join("testset/cells.jsonl")).unwrap();
    serde_json::from_str(text.lines().nth(1).unwrap()).unwrap()
}

fn input_table(cell: &Value) -> Value {
    let fx = fixture();
    let text = std::fs::read_to_string(fx.work().join("testset/tables.jsonl")).unwrap();
    let mut t: Value = text
        .lines()
        .skip(1)
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .find(|t| t["id"] == cell["tableId"])
        .unwrap();
    let (r, c) = (cell["row"].as_u64().unwrap() as usize, cell["col"].as_u64().unwrap() as usize);
    t["rows"][r][c] = json!({ "text": "" });
    t
}

#[tokio::test]
async fn health_reports_artifact_versions() {
    let app = router(fixture().snapshot());
    let (status, body) = call(app, get("/v1/health")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["versions"]["corpus"], "cellac-corpus v1");
    assert_eq!(body["versions"]["ltr"], "cellac-forest v1");
    assert_eq!(body["versions"]["stats"], "cellac-h2h v1");
}

#[tokio::test]
async fn stats_summarize_the_snapshot() {
    let app = router(fixture().snapshot());
    let (status, body) = call(app, get("/v1/stats")).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["corpus"]["tables"].as_u64().unwrap() > 50);
    assert!(body["kb"]["triples"].as_u64().unwrap() > 100);
    assert_eq!(body["ltr"]["groups"], "I+II+III");
    assert!(body["ltr"]["features"].as_u64().unwrap() > 10);
}

#[tokio::test]
async fn suggest_by_row_and_column() {
    let cell = first_cell();
    let req = json!({ "table": input_table(&cell), "row": cell["row"], "column": cell["col"], "k": 5 });
    let (status, body) = call(router(fixture().snapshot()), post_json(req.to_string())).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let s = body["suggestions"].as_array().unwrap();
    assert!(!s.is_empty() && s.len() <= 5);
    assert_eq!(body["entity"], cell["entity"]);
    for w in s.windows(2) {
        assert!(w[0]["score"].as_f64() >= w[1]["score"].as_f64());
    }
    for (i, x) in s.iter().enumerate() {
        assert_eq!(x["rank"], i + 1);
        if !x["is_empty"].as_bool().unwrap() {
            assert!(!x["evidence"].as_array().unwrap().is_empty(), "{x}");
        }
    }
    assert_eq!(s.iter().filter(|x| x["is_empty"] == true).count().min(1), s.iter().filter(|x| x["canonical"] == "EMPTY").count());

    // addressing the same cell by entity and heading gives the same list
    let req = json!({ "table": input_table(&cell), "entity": cell["entity"], "heading": cell["heading"], "k": 5 });
    let (_, again) = call(router(fixture().snapshot()), post_json(req.to_string())).await;
    assert_eq!(keys(&again), keys(&body));
}

#[tokio::test]
async fn bad_requests_get_machine_readable_codes() {
    let cell = first_cell();
    let table = input_table(&cell);
    let cases = [
        ("{not json".to_string(), "malformed_body"),
        (json!({ "row": 0, "column": 1 }).to_string(), "malformed_body"),
        (json!({ "table": table, "row": 0, "column": 1, "k": 0 }).to_string(), "invalid_k"),
        (json!({ "table": table, "row": 0, "column": 1, "k": -3 }).to_string(), "invalid_k"),
        (json!({ "table": table, "row": 0, "entity": "x", "column": 1 }).to_string(), "invalid_target"),
        (json!({ "table": table, "column": 1 }).to_string(), "invalid_target"),
        (json!({ "table": table, "row": 0 }).to_string(), "invalid_target"),
        (json!({ "table": table, "row": 999, "column": 1 }).to_string(), "invalid_target"),
        (json!({ "table": table, "row": 0, "column": 999 }).to_string(), "invalid_target"),
        (json!({ "table": table, "row": 0, "column": 0 }).to_string(), "invalid_target"),
        (json!({ "table": { "id": "", "headings": ["a"], "rows": [] }, "entity": "e", "heading": "h" }).to_string(), "invalid_table"),
    ];
    for (body, code) in cases {
        let (status, resp) = call(router(fixture().snapshot()), post_json(body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert_eq!(resp["error"]["code"], code, "{body}");
        assert!(resp["error"]["message"].as_str().unwrap().len() > 3);
    }
}

#[tokio::test]
async fn unknown_entity_gets_only_empty() {
    let cell = first_cell();
    let req = json!({ "table": input_table(&cell), "entity": "nobody:at_all", "heading": cell["heading"] });
    let (status, body) = call(router(fixture().snapshot()), post_json(req.to_string())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(keys(&body), ["EMPTY"]);
    assert_eq!(body["suggestions"][0]["is_empty"], true);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_agree() {
    let snap = fixture().snapshot();
    let cell = first_cell();
    let req = json!({ "table": input_table(&cell), "row": cell["row"], "column": cell["col"] }).to_string();
    let handles: Vec<_> = (0..16)
        .map(|_| {
            let app = router(snap.clone());
            let req = req.clone();
            tokio::spawn(async move { call(app, post_json(req)).await })
        })
        .collect();
    let mut bodies = Vec::new();
    for h in handles {
        let (status, body) = h.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        bodies.push(body);
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
}
