use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use toposketch::enumerate::{enumerate, hypothetical_filter, EnumOptions};
use toposketch::io::{load_bundled, SolutionFile};
use toposketch::model::Model;
use toposketch::optimize::optimize;
use toposketch::oracle::{brute_force, DEFAULT_CAP};
use toposketch::problem::ConstraintSpec;
use toposketch_server::{router, AppState};

struct Client {
    app: Router,
}

impl Client {
    fn new() -> Self {
        Client { app: router(AppState::new()) }
    }

    async fn raw(&self, method: Method, path: &str, body: Option<String>) -> (StatusCode, String, String) {
        let req = Request::builder().method(method).uri(path).header("content-type", "application/json");
        let req = req.body(body.map_or_else(Body::empty, Body::from)).unwrap();
        let res = self.app.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let ctype = res.headers().get("content-type").map(|v| v.to_str().unwrap().to_string()).unwrap_or_default();
        let bytes = res.into_body().collect().await.unwrap().to_bytes();
        (status, ctype, String::from_utf8(bytes.to_vec()).unwrap())
    }

    async fn call(&self, method: Method, path: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (status, _, text) = self.raw(method, path, body.map(|b| b.to_string())).await;
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        self.call(Method::GET, path, None).await
    }

    async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, path, Some(body)).await
    }

    async fn session(&self, benchmark: &str) -> u64 {
        let (status, v) = self.post("/sessions", json!({ "benchmark": benchmark })).await;
        assert_eq!(status, StatusCode::CREATED, "{v}");
        v["id"].as_u64().unwrap()
    }

    /// Starts an enumeration and polls until it leaves the running state.
    async fn enumerate(&self, id: u64) -> Value {
        let (status, job) = self.post(&format!("/sessions/{id}/enumerate"), json!({})).await;
        assert_eq!(status, StatusCode::ACCEPTED, "{job}");
        self.wait(id, job["id"].as_u64().unwrap()).await
    }

    async fn wait(&self, id: u64, job: u64) -> Value {
        for _ in 0..6000 {
            let (status, v) = self.get(&format!("/sessions/{id}/jobs/{job}")).await;
            assert_eq!(status, StatusCode::OK);
            if v["status"] != "running" {
                return v;
            }
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
        panic!("job did not finish");
    }
}

fn signatures(v: &Value) -> BTreeSet<String> {
    v.as_array().unwrap().iter().map(|t| t["signature"].to_string()).collect()
}

#[tokio::test]
async fn lists_bundled_benchmarks() {
    let c = Client::new();
    let (status, v) = c.get("/benchmarks").await;
    assert_eq!(status, StatusCode::OK);
    let names: Vec<&str> = v["benchmarks"].as_array().unwrap().iter().map(|n| n.as_str().unwrap()).collect();
    for n in ["pfk", "lr", "tng", "col9", "mac", "house2f", "office_patio"] {
        assert!(names.contains(&n), "{n}");
    }
}

#[tokio::test]
async fn session_creation_errors() {
    let c = Client::new();
    let (s, v) = c.post("/sessions", json!({ "benchmark": "nope" })).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "not_found");
    let (s, v) = c.post("/sessions", json!({ "problem": "schema = \"toposketch/1\"\nname = 3" })).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "validation");
    let (s, _) = c.post("/sessions", json!({})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _, _) = c.raw(Method::POST, "/sessions", Some("{not json".into())).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = c.get("/sessions/77").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = c.get("/nowhere").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn uploaded_problem_text_creates_a_session() {
    let c = Client::new();
    let text = toposketch::io::save_problem(&load_bundled("tng").unwrap().spec);
    let (s, v) = c.post("/sessions", json!({ "problem": text })).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["name"], "tng");
    assert_eq!(v["spaces"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn enumeration_job_matches_engine_and_oracle() {
    let c = Client::new();
    let id = c.session("pfk").await;
    let (s, _) = c.get(&format!("/sessions/{id}/topologies/0")).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let job = c.enumerate(id).await;
    assert_eq!(job["status"], "done");
    assert_eq!(job["n2"], 24);
    assert_eq!(job["progress"]["consistent"], 24);
    let p = load_bundled("pfk").unwrap();
    let oracle: BTreeSet<String> = brute_force(&p, DEFAULT_CAP)
        .unwrap()
        .classes
        .keys()
        .map(|k| serde_json::to_value(&k.0).unwrap().to_string())
        .collect();
    assert_eq!(signatures(&job["topologies"]), oracle);
    let (_, list) = c.get(&format!("/sessions/{id}/topologies")).await;
    assert_eq!(list["total"], 24);
    assert_eq!(signatures(&list["topologies"]), oracle);
}

#[tokio::test]
async fn topology_payload_and_sketches() {
    let c = Client::new();
    let id = c.session("tng").await;
    c.enumerate(id).await;
    let (s, t) = c.get(&format!("/sessions/{id}/topologies/1")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(t["index"], 1);
    assert_eq!(t["domains"].as_array().unwrap().len(), 4);
    assert_eq!(t["witness"]["spaces"].as_array().unwrap().len(), 4);
    for key in ["sketch_svg", "witness_svg"] {
        let svg = t[key].as_str().unwrap();
        assert!(svg.starts_with("<svg"), "{key}");
        assert_eq!(svg.matches("class=\"room").count(), 4);
    }
    // reads do not change state
    let (_, again) = c.get(&format!("/sessions/{id}/topologies/1")).await;
    assert_eq!(t, again);
    let (s, ctype, svg) = c.raw(Method::GET, &format!("/sessions/{id}/topologies/1/sketch.svg"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ctype, "image/svg+xml");
    assert_eq!(svg, t["sketch_svg"].as_str().unwrap());
    let (s, _) = c.get(&format!("/sessions/{id}/topologies/4")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn diff_highlights_differing_spaces() {
    let c = Client::new();
    let id = c.session("pfk").await;
    c.enumerate(id).await;
    let (s, d) = c.get(&format!("/sessions/{id}/diff?a=3&b=3")).await;
    assert_eq!(s, StatusCode::OK);
    assert!(d["differences"].as_array().unwrap().is_empty());
    assert!(!d["svg_a"].as_str().unwrap().contains(" diff\""));
    let (_, d) = c.get(&format!("/sessions/{id}/diff?a=0&b=1")).await;
    let spaces = d["spaces"].as_array().unwrap().len();
    assert!(spaces >= 2);
    assert!(!d["differences"].as_array().unwrap().is_empty());
    for key in ["svg_a", "svg_b"] {
        assert_eq!(d[key].as_str().unwrap().matches(" diff\"").count(), spaces);
    }
    let (s, _) = c.get(&format!("/sessions/{id}/diff?a=0&b=99")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = c.get(&format!("/sessions/{id}/diff?a=0")).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn filter_matches_engine_and_leaves_topologies_untouched() {
    let c = Client::new();
    let id = c.session("pfk").await;
    c.enumerate(id).await;
    let (_, before) = c.get(&format!("/sessions/{id}/topologies/5")).await;
    let constraint = json!({ "kind": "on_contour", "space": "p6x2", "sides": ["S"] });
    let (s, f) = c.post(&format!("/sessions/{id}/filter"), json!({ "constraints": [constraint] })).await;
    assert_eq!(s, StatusCode::OK, "{f}");
    let survivors: Vec<usize> = serde_json::from_value(f["survivors"].clone()).unwrap();
    let excluded: Vec<usize> = serde_json::from_value(f["excluded"].clone()).unwrap();
    assert_eq!(survivors.len() + excluded.len(), 24);
    assert_eq!(survivors.len(), 12);

    let m = Model::build(Arc::new(load_bundled("pfk").unwrap()));
    let e = enumerate(&m, &EnumOptions::default());
    let extra: ConstraintSpec = serde_json::from_value(constraint).unwrap();
    assert_eq!(hypothetical_filter(&m, &e.topologies, &[extra]).unwrap(), survivors);

    let (_, after) = c.get(&format!("/sessions/{id}/topologies/5")).await;
    assert_eq!(before, after);
    let bad = json!({ "constraints": [{ "kind": "on_contour", "space": "ghost", "sides": ["S"] }] });
    let (s, v) = c.post(&format!("/sessions/{id}/filter"), bad).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["message"].as_str().unwrap().contains("ghost"));
    let (s, _) = c.post(&format!("/sessions/{id}/filter"), json!({ "constraints": [{ "kind": "teleport" }] })).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn refine_then_undo_restores_domains() {
    let c = Client::new();
    let id = c.session("tng").await;
    c.enumerate(id).await;
    let base = format!("/sessions/{id}/topologies/0");
    let (s, start) = c.get(&format!("{base}/refine")).await;
    assert_eq!(s, StatusCode::OK);
    let (_, topo) = c.get(&base).await;
    assert_eq!(start["sketch"]["domains"], topo["domains"]);
    let l = topo["witness"]["spaces"][0]["l"].as_i64().unwrap();
    let (s, r) = c.post(&format!("{base}/refine"), json!({ "space": "r1", "attr": "L", "min": l, "max": l })).await;
    assert_eq!(s, StatusCode::OK, "{r}");
    assert_eq!(r["consistent"], true);
    assert_eq!(r["sketch"]["domains"][0]["L"], json!([[l, l]]));
    assert_eq!(r["sketch"]["steps"].as_array().unwrap().len(), 1);
    // an impossible refinement is reported and not applied
    let (_, bad) = c.post(&format!("{base}/refine"), json!({ "space": "r1", "attr": "L", "min": 50, "max": 60 })).await;
    assert_eq!(bad["consistent"], false);
    assert_eq!(bad["sketch"], r["sketch"]);
    let (_, undone) = c.post(&format!("{base}/undo"), json!({})).await;
    assert_eq!(undone["consistent"], true);
    assert_eq!(undone["sketch"], start["sketch"]);
    let (_, empty) = c.post(&format!("{base}/undo"), json!({})).await;
    assert_eq!(empty["consistent"], false);
    let (s, _) = c.post(&format!("{base}/refine"), json!({ "space": "zz", "attr": "L", "min": 1, "max": 2 })).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = c.post(&format!("{base}/refine"), json!({ "space": "r1", "attr": "L", "min": 3, "max": 2 })).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn cost_optimize_and_rank() {
    let c = Client::new();
    let id = c.session("tng").await;
    c.enumerate(id).await;
    let (s, cost) = c.get(&format!("/sessions/{id}/cost")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(cost["cost"]["weights"]["internal_wall_length"], 1);
    let m = Model::build(Arc::new(load_bundled("tng").unwrap()));
    let e = enumerate(&m, &EnumOptions::default());
    let expected = optimize(&m, &e.topologies[2], m.cost, None).unwrap();
    let (s, o) = c.post(&format!("/sessions/{id}/topologies/2/optimize"), json!({})).await;
    assert_eq!(s, StatusCode::OK, "{o}");
    assert_eq!(o["cost"], expected.cost);
    assert_eq!(o["solutions"].as_array().unwrap().len(), expected.solutions.len());
    assert!(o["svg"].as_str().unwrap().starts_with("<svg"));

    let spec = json!({ "weights": { "external_wall_length": "1/2", "internal_wall_length": 2 } });
    let (s, v) = c.call(Method::PUT, &format!("/sessions/{id}/cost"), Some(spec)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["scale"], 1);
    let (_, o) = c.post(&format!("/sessions/{id}/topologies/2/optimize"), json!({ "max_solutions": 1 })).await;
    // 2 * 18 internal + 1/2 * 36 external
    assert_eq!(o["cost"], "54");
    assert_eq!(o["solutions"].as_array().unwrap().len(), 1);

    let (s, r) = c.post(&format!("/sessions/{id}/rank"), json!({})).await;
    assert_eq!(s, StatusCode::OK, "{r}");
    let ranking = r["ranking"].as_array().unwrap();
    assert_eq!(ranking.len(), 4);
    let costs: Vec<i64> = ranking.iter().map(|e| e["cost"].as_str().unwrap().parse().unwrap()).collect();
    assert!(costs.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(r["timing"]["topologies"], 4);
    let (s, _) = c.call(Method::PUT, &format!("/sessions/{id}/cost"), Some(json!({ "weights": { "beauty": 1 } }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn solution_file_round_trip() {
    let c = Client::new();
    let id = c.session("pfk").await;
    c.enumerate(id).await;
    c.post(&format!("/sessions/{id}/topologies/0/optimize"), json!({})).await;
    let (s, ctype, text) = c.raw(Method::GET, &format!("/sessions/{id}/solutions"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ctype, "application/json");
    let f = SolutionFile::from_json(&text).unwrap();
    assert_eq!(f.n2, 24);
    assert_eq!(f.topologies.len(), 24);
    assert_eq!(f.optima.len(), 1);
    assert!(f.unknown_spaces(&load_bundled("pfk").unwrap()).is_empty());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn long_jobs_can_be_cancelled_and_block_a_second_start() {
    let c = Client::new();
    let id = c.session("mac_interpretation").await;
    let (s, job) = c.post(&format!("/sessions/{id}/enumerate"), json!({})).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    assert_eq!(job["status"], "running");
    let (s, _) = c.post(&format!("/sessions/{id}/enumerate"), json!({})).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = c.post(&format!("/sessions/{id}/jobs/0/cancel"), json!({})).await;
    assert_eq!(s, StatusCode::OK);
    let done = c.wait(id, 0).await;
    assert_eq!(done["status"], "cancelled");
    assert_eq!(done["stats"]["cancelled"], true);
    let (s, _) = c.get(&format!("/sessions/{id}/jobs/5")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = c.call(Method::DELETE, &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let (s, _) = c.get(&format!("/sessions/{id}")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn sessions_are_independent() {
    let c = Client::new();
    let a = c.session("tng").await;
    let b = c.session("pfk").await;
    assert_ne!(a, b);
    assert_eq!(c.enumerate(a).await["n2"], 4);
    let (s, _) = c.get(&format!("/sessions/{b}/topologies")).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(c.enumerate(b).await["n2"], 24);
    assert_eq!(c.get(&format!("/sessions/{a}")).await.1["topologies"], 4);
}
