mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use goodwill::blocks::{ModelSpec, Variant};
use goodwill::mcmc::McmcConfig;
use goodwill::model::FitConfig;
use goodwill_cli::service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn app(root: &Path) -> Router {
    let (state, _) = AppState::open(root, 1).unwrap();
    router(state)
}

fn small_fit(variant: Variant) -> Value {
    let cfg = FitConfig {
        spec: ModelSpec::standard(variant, vec![], vec![]),
        priors: Default::default(),
        mcmc: McmcConfig {
            chains: 2,
            iterations: 300,
            burn_in: 150,
            seed: 4,
            ..Default::default()
        },
    };
    serde_json::to_value(cfg).unwrap()
}

/// Future rows 100..112 of a CSV as keyed JSON rows.
fn future_rows(csv: &str) -> (Vec<Value>, String) {
    let lines: Vec<&str> = csv.lines().collect();
    let header: Vec<&str> = lines[0].split(',').collect();
    let rows = lines[101..113]
        .iter()
        .map(|l| {
            let mut row = serde_json::Map::new();
            for (k, v) in header.iter().zip(l.split(',')) {
                match *k {
                    "date" => row.insert("date".into(), json!(v)),
                    "sales" => None,
                    _ => row.insert(k.to_string(), json!(v.parse::<f64>().unwrap())),
                };
            }
            Value::Object(row)
        })
        .collect();
    let mut text = vec![lines[0]];
    text.extend(&lines[101..113]);
    (rows, text.join("\n") + "\n")
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn fit_lifecycle_and_cli_parity() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let csv = common::synthetic_csv(120, 9);

    let (status, ds) = call(&app, Method::POST, "/datasets", Some(csv.clone())).await;
    assert_eq!(status, StatusCode::CREATED, "{ds}");
    assert_eq!(ds["rows"], 120);
    let dataset_id = ds["dataset_id"].as_str().unwrap().to_string();

    let mut body = small_fit(Variant::RF);
    body["dataset_id"] = json!(dataset_id);
    body["train_end"] = json!(100);
    let (status, job) = call(&app, Method::POST, "/models", Some(body.to_string())).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{job}");
    let id = job["model_id"].as_str().unwrap().to_string();
    let (status, again) = call(&app, Method::POST, "/models", Some(body.to_string())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["model_id"], job["model_id"]);
    assert_eq!(again["created"], false);

    let start = Instant::now();
    let view = loop {
        let (status, view) = call(&app, Method::GET, &format!("/models/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        match view["status"].as_str().unwrap() {
            "done" => break view,
            "failed" => panic!("fit failed: {view}"),
            _ => {
                assert!(start.elapsed() < Duration::from_secs(300), "fit did not finish");
                tokio::time::sleep(Duration::from_millis(100)).await;
            }
        }
    };
    assert_eq!(view["channels"], json!(["tv", "radio", "online"]));
    assert!(view["evaluation"].is_object());
    assert!(view["started"].is_string() && view["completed"].is_string());

    let (status, list) = call(&app, Method::GET, "/models", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list.as_array().unwrap().len(), 1);

    let (future, future_csv) = future_rows(&csv);
    let req = json!({ "horizon": 12, "seed": 3, "future": future });
    let (status, f) = call(&app, Method::POST, &format!("/models/{id}/forecast"), Some(req.to_string())).await;
    assert_eq!(status, StatusCode::OK, "{f}");
    assert_eq!(f["steps"].as_array().unwrap().len(), 12);

    // Regressors have no future values without a body.
    let (status, err) = call(&app, Method::GET, &format!("/models/{id}/forecast?h=4"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "input");

    let alloc = json!({ "budget": 12.0, "future": future, "risk_grid": 20 });
    let (status, a) = call(&app, Method::POST, &format!("/models/{id}/allocate"), Some(alloc.to_string())).await;
    assert_eq!(status, StatusCode::OK, "{a}");
    assert!(a["frontier"].as_array().unwrap().len() <= 20);

    let (status, d) = call(&app, Method::GET, &format!("/models/{id}/diagnostics?max_points=40"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(d["report"]["max_rhat"].is_number());

    // The command line on the same store gives the same numbers.
    let path = dir.path().join("future.csv");
    std::fs::write(&path, future_csv).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_goodwill"))
        .args(["--store", dir.path().to_str().unwrap(), "forecast", "--model", &id, "--horizon", "12", "--seed", "3"])
        .args(["--future", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cli: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cli, f);
}

#[tokio::test]
async fn errors_are_json() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());

    let (status, err) = call(&app, Method::GET, "/models/m-missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "not_found");

    let (status, err) = call(&app, Method::GET, "/nowhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "not_found");

    let (status, err) = call(&app, Method::POST, "/models", Some("{not json".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "input");

    let (status, err) = call(&app, Method::POST, "/datasets", Some("date,sales\n2020-01-06,abc\n".into())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{err}");

    let mut body = small_fit(Variant::RF);
    body["dataset_id"] = json!("d-unknown");
    let (status, _) = call(&app, Method::POST, "/models", Some(body.to_string())).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_spec_is_rejected_without_queuing() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (_, ds) = call(&app, Method::POST, "/datasets", Some(common::synthetic_csv(60, 1))).await;
    let mut body = small_fit(Variant::RF);
    body["spec"]["variant"] = serde_json::to_value(Variant::B).unwrap();
    body["dataset_id"] = ds["dataset_id"].clone();
    let (status, err) = call(&app, Method::POST, "/models", Some(body.to_string())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{err}");
    assert_eq!(err["code"], "spec");
    let (_, list) = call(&app, Method::GET, "/models", None).await;
    assert_eq!(list, json!([]));
}

#[tokio::test]
async fn allocate_matches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    common::save_closed_form(dir.path(), "cf");
    let app = app(dir.path());

    let (status, probe) = call(&app, Method::POST, "/models/cf/allocate", Some(json!({ "budget": 10.0 }).to_string())).await;
    assert_eq!(status, StatusCode::OK, "{probe}");
    let omega = probe["moments"]["omega"].as_f64().unwrap();
    let cap = omega + 0.25;
    let req = json!({ "budget": 10.0, "upper": { "a": 1.0, "b": 1.0 }, "variance_cap": cap });
    let (status, a) = call(&app, Method::POST, "/models/cf/allocate", Some(req.to_string())).await;
    assert_eq!(status, StatusCode::OK, "{a}");
    let want = common::closed_form_spend(cap, omega);
    let spend = &a["chosen"]["allocation"]["spend"];
    for (i, w) in want.iter().enumerate() {
        assert!((spend[i].as_f64().unwrap() - w).abs() < 1e-6, "{spend} vs {want:?}");
    }
    assert!(a["chosen"]["allocation"]["binding"].as_array().unwrap().contains(&json!("variance_cap")));

    let tight = json!({ "budget": 10.0, "variance_cap": omega * 0.5 });
    let (status, err) = call(&app, Method::POST, "/models/cf/allocate", Some(tight.to_string())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["detail"]["binding"], json!("variance_cap"));
}
