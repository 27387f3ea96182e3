#![allow(dead_code)]

use std::time::{Duration, Instant};

use axum::body::{Body, Bytes};
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub const FIXTURE_T1: &str = "\
customer_id,order_date,revenue,cost,volume_tons,product_group,region
C1,2024-01-01,100,60,10,steel,north
C2,2024-02-15,50,40,5,steel,south
C3,2024-01-10,10,5,1,alloy,north
C1,2024-03-01,200,120,20,alloy,north
C3,2024-02-10,10,5,1,alloy,north
C3,2024-03-10,10,5,1,alloy,north
";

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub bytes: Bytes,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes)
            .unwrap_or_else(|e| panic!("body is not JSON ({e}): {}", String::from_utf8_lossy(&self.bytes)))
    }
}

pub async fn call(app: &Router, method: Method, uri: &str, body: impl Into<Body>, headers: &[(&str, &str)]) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    let resp = app.clone().oneshot(req.body(body.into()).unwrap()).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    Reply { status, headers, bytes }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    call(app, Method::GET, uri, Body::empty(), &[]).await
}

pub async fn post_json(app: &Router, uri: &str, body: &Value) -> Reply {
    call(app, Method::POST, uri, body.to_string(), &[("content-type", "application/json")]).await
}

pub async fn upload(app: &Router, csv: &str) -> String {
    let r = call(app, Method::POST, "/api/v1/datasets", csv.to_string(), &[("content-type", "text/csv")]).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&r.bytes));
    r.json()["dataset_id"].as_str().unwrap().to_string()
}

/// Polls a job until it leaves queued/running and returns its final status document.
pub async fn wait_job(app: &Router, job_id: u64) -> Value {
    let deadline = Instant::now() + Duration::from_secs(30);
    let mut last_rank = 0;
    loop {
        let job = get(app, &format!("/api/v1/jobs/{job_id}")).await.json();
        let rank = match job["state"].as_str().unwrap() {
            "queued" => 0,
            "running" => 1,
            "ready" | "failed" => 2,
            other => panic!("unknown job state {other}"),
        };
        assert!(rank >= last_rank, "job state moved backwards: {job}");
        last_rank = rank;
        if rank == 2 {
            return job;
        }
        assert!(Instant::now() < deadline, "job {job_id} did not finish");
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
}

pub fn t1_request(dataset_id: &str, k: usize, specs: usize) -> Value {
    let all = [
        serde_json::json!({"label_name": "Strategic", "levels": {"profit": "very_high", "volume_tons": "high"}}),
        serde_json::json!({"label_name": "Occasional", "levels": {"frequency": "low", "profit": "low"}}),
        serde_json::json!({"label_name": "Loyal small", "levels": {"frequency": "very_high"}}),
    ];
    serde_json::json!({
        "dataset_id": dataset_id,
        "filter": {"date_start": "2024-01-01", "date_end": "2024-03-10"},
        "selection": ["recency_days", "frequency", "monetary_revenue", "profit", "volume_tons",
                      "interpurchase_interval_days", "avg_profit_per_ton"],
        "params": {"algorithm": "kmeans", "k": k, "seed": 7},
        "label_specs": all[..specs].to_vec(),
    })
}

/// Submits a build and waits for it; returns the final job document.
pub async fn build(app: &Router, request: &Value) -> Value {
    let r = post_json(app, "/api/v1/models", request).await;
    assert_eq!(r.status, StatusCode::ACCEPTED, "{}", String::from_utf8_lossy(&r.bytes));
    wait_job(app, r.json()["job_id"].as_u64().unwrap()).await
}
