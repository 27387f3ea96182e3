//! Replays the stored response when a POST is retried with the same
//! `Idempotency-Key`, so a retried build or label request creates at most one
//! version. Keys are scoped to the request path and held in memory.

use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::Arc;

use axum::body::{to_bytes, Body, Bytes};
use axum::extract::{Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::Next;
use axum::response::{IntoResponse, Response};
use tokio::sync::Mutex;

use crate::error::ApiError;
use crate::AppState;

pub const HEADER: &str = "idempotency-key";
pub const REPLAYED: &str = "idempotent-replayed";

struct Stored {
    fingerprint: u64,
    status: StatusCode,
    content_type: Option<HeaderValue>,
    location: Option<HeaderValue>,
    body: Bytes,
}

impl Stored {
    fn response(&self) -> Response {
        let mut r = (self.status, self.body.clone()).into_response();
        if let Some(ct) = &self.content_type {
            r.headers_mut().insert(header::CONTENT_TYPE, ct.clone());
        }
        if let Some(loc) = &self.location {
            r.headers_mut().insert(header::LOCATION, loc.clone());
        }
        r
    }
}

#[derive(Default)]
pub struct IdempotencyCache {
    slots: Mutex<HashMap<String, Arc<Mutex<Option<Stored>>>>>,
}

fn fingerprint(path: &str, body: &[u8]) -> u64 {
    let mut h = DefaultHasher::new();
    path.hash(&mut h);
    body.hash(&mut h);
    h.finish()
}

pub async fn middleware(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if req.method() != Method::POST {
        return next.run(req).await;
    }
    let Some(key) = req.headers().get(HEADER).and_then(|v| v.to_str().ok()).map(str::to_owned) else {
        return next.run(req).await;
    };
    let (parts, body) = req.into_parts();
    let bytes = match to_bytes(body, crate::api::BODY_LIMIT).await {
        Ok(b) => b,
        Err(e) => return ApiError::bad_request(format!("could not read request body: {e}")).into_response(),
    };
    let path = parts.uri.path().to_owned();
    let print = fingerprint(&path, &bytes);

    let slot = {
        let mut slots = state.idempotency.slots.lock().await;
        slots.entry(format!("{path} {key}")).or_default().clone()
    };
    // concurrent retries queue here until the first attempt has finished
    let mut slot = slot.lock().await;
    if let Some(stored) = slot.as_ref() {
        if stored.fingerprint != print {
            return ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "idempotency_key_reused",
                "this Idempotency-Key was already used with a different request",
            )
            .into_response();
        }
        let mut r = stored.response();
        r.headers_mut().insert(REPLAYED, HeaderValue::from_static("true"));
        return r;
    }

    let response = next.run(Request::from_parts(parts, Body::from(bytes))).await;
    let (rparts, rbody) = response.into_parts();
    let body = match to_bytes(rbody, usize::MAX).await {
        Ok(b) => b,
        Err(e) => return ApiError::internal(format!("could not buffer response: {e}")).into_response(),
    };
    let stored = Stored {
        fingerprint: print,
        status: rparts.status,
        content_type: rparts.headers.get(header::CONTENT_TYPE).cloned(),
        location: rparts.headers.get(header::LOCATION).cloned(),
        body,
    };
    let r = stored.response();
    // server-side failures are not remembered so the client can retry them
    if !stored.status.is_server_error() {
        *slot = Some(stored);
    }
    r
}
