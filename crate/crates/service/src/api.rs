//! `/api/v1` routes. Every read is a pure projection of stored state, serialized
//! from ordered collections, so identical reads return identical bytes.

use std::str::FromStr;

use axum::body::Bytes;
use axum::extract::{FromRequest, FromRequestParts, Path, Request, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use seglab_core::cluster::{FeatureSummary, NOISE};
use seglab_core::explain::{characterize_clusters, explain_instance, ExplainConfig, Rule, DEFAULT_RULE_THRESHOLD, DEFAULT_SAMPLES, DEFAULT_TOP};
use seglab_core::features::Feature;
use seglab_core::ingest::{customer_history, parse_transactions, summarize, CustomerHistory, DatasetSummary, Schema};
use seglab_core::label::{LabelSpec, OverrideScope, UNSEGMENTED};
use seglab_core::pipeline::{BuildConfig, FieldError};
use seglab_core::store::{compare_versions, ComparisonReport, ModelVersion, VersionEntry, VersionId};

use crate::error::{ApiError, ApiResult};
use crate::jobs::{JobId, JobStatus};
use crate::AppState;

/// Largest accepted request body (dataset uploads included).
pub const BODY_LIMIT: usize = 256 * 1024 * 1024;

const DEFAULT_AUTHOR: &str = "operator";

pub fn routes() -> Router<AppState> {
    Router::new()
        .route("/datasets", post(upload_dataset).get(list_datasets))
        .route("/datasets/{id}/summary", get(dataset_summary))
        .route("/models", post(submit_build).get(list_models))
        .route("/jobs/{id}", get(get_job))
        .route("/models/{id}", get(get_model))
        .route("/models/{id}/clusters", get(get_clusters))
        .route("/models/{id}/scatter", get(get_scatter))
        .route("/models/{id}/labels", post(post_labels))
        .route("/models/{id}/overrides", post(post_override))
        .route("/models/{id}/explain/{customer_id}", get(get_explanation))
        .route("/customers/{id}/history", get(get_history))
        .route("/compare", get(get_comparison))
}

// ---- extractors with JSON error bodies ----

/// Query-string extractor whose rejection is a JSON 400.
pub struct Q<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequestParts<S> for Q<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        axum::extract::Query::<T>::from_request_parts(parts, state)
            .await
            .map(|q| Q(q.0))
            .map_err(|e| ApiError::bad_request(e.body_text()))
    }
}

/// JSON body extractor reporting the offending field path on decode errors.
pub struct JsonBody<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for JsonBody<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::bad_request(e.body_text()))?;
        decode(&bytes).map(JsonBody).map_err(ApiError::invalid)
    }
}

fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, Vec<FieldError>> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        vec![FieldError {
            field: if path == "." { String::new() } else { path },
            message: e.into_inner().to_string(),
        }]
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker task failed: {e}")))?
}

fn parse_version(raw: &str) -> ApiResult<VersionId> {
    raw.parse().map_err(|_| ApiError::not_found(format!("model version `{raw}`")))
}

// ---- datasets ----

/// Optional column mapping in the query string; missing entries use the canonical
/// column names.
#[derive(Debug, Default, Deserialize)]
pub struct SchemaQuery {
    delimiter: Option<String>,
    customer_id: Option<String>,
    order_date: Option<String>,
    revenue: Option<String>,
    cost: Option<String>,
    volume_tons: Option<String>,
    product_group: Option<String>,
    region: Option<String>,
}

impl SchemaQuery {
    fn schema(self) -> ApiResult<Schema> {
        let mut s = Schema::default();
        if let Some(d) = self.delimiter {
            let mut chars = d.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => s.delimiter = c,
                _ => return Err(ApiError::field("delimiter", "must be a single character")),
            }
        }
        for (slot, value) in [
            (&mut s.customer_id, self.customer_id),
            (&mut s.order_date, self.order_date),
            (&mut s.revenue, self.revenue),
            (&mut s.cost, self.cost),
            (&mut s.volume_tons, self.volume_tons),
            (&mut s.product_group, self.product_group),
            (&mut s.region, self.region),
        ] {
            if let Some(v) = value {
                *slot = v;
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Serialize)]
pub struct DatasetView {
    pub dataset_id: String,
    #[serde(flatten)]
    pub summary: DatasetSummary,
}

/// Stores the uploaded CSV under a content-derived id after checking that it parses
/// with the requested column mapping.
async fn upload_dataset(State(state): State<AppState>, Q(q): Q<SchemaQuery>, body: Bytes) -> ApiResult<Response> {
    let schema = q.schema()?;
    let view = blocking(move || {
        let parsed = parse_transactions(body.as_ref(), &schema)?;
        let dataset_id = state.store.put_dataset(&body)?;
        Ok(DatasetView {
            dataset_id,
            summary: summarize(&parsed),
        })
    })
    .await?;
    let location = format!("/api/v1/datasets/{}/summary", view.dataset_id);
    Ok((StatusCode::CREATED, [(header::LOCATION, location)], Json(view)).into_response())
}

async fn list_datasets(State(state): State<AppState>) -> ApiResult<Json<Vec<String>>> {
    blocking(move || Ok(Json(state.store.workspace().datasets()?))).await
}

async fn dataset_summary(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Q(q): Q<SchemaQuery>,
) -> ApiResult<Json<DatasetView>> {
    let schema = q.schema()?;
    blocking(move || {
        let bytes = state.store.workspace().dataset(&id)?;
        let parsed = parse_transactions(bytes.as_slice(), &schema)?;
        Ok(Json(DatasetView {
            dataset_id: id,
            summary: summarize(&parsed),
        }))
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct HistoryQuery {
    dataset: String,
}

#[derive(Debug, Serialize)]
pub struct HistoryView {
    pub dataset_id: String,
    #[serde(flatten)]
    pub history: CustomerHistory,
}

async fn get_history(
    State(state): State<AppState>,
    Path(customer): Path<String>,
    Q(h): Q<HistoryQuery>,
    Q(q): Q<SchemaQuery>,
) -> ApiResult<Json<HistoryView>> {
    let schema = q.schema()?;
    blocking(move || {
        let bytes = state.store.workspace().dataset(&h.dataset)?;
        let parsed = parse_transactions(bytes.as_slice(), &schema)?;
        let history = customer_history(&parsed.transactions, &customer)
            .ok_or_else(|| ApiError::not_found(format!("customer `{customer}` in dataset `{}`", h.dataset)))?;
        Ok(Json(HistoryView {
            dataset_id: h.dataset,
            history,
        }))
    })
    .await
}

// ---- builds and jobs ----

/// Accepts a build request. Invalid requests are answered at once with a failed
/// job carrying field-level messages; valid ones are queued.
async fn submit_build(State(state): State<AppState>, body: Bytes) -> Response {
    let checked = match decode::<BuildConfig>(&body) {
        Ok(config) => {
            let s = state.clone();
            let id = config.dataset_id.clone();
            let missing = blocking(move || Ok(s.store.workspace().dataset(&id).err())).await;
            match (config.validate(), missing) {
                (Err(fields), _) => Err(fields),
                (Ok(()), Ok(Some(_))) => Err(vec![FieldError {
                    field: "dataset_id".into(),
                    message: format!("unknown dataset `{}`", config.dataset_id),
                }]),
                (Ok(()), Ok(None)) => Ok(config),
                (Ok(()), Err(e)) => return e.into_response(),
            }
        }
        Err(fields) => Err(fields),
    };
    match checked {
        Ok(config) => {
            let job = state.jobs.enqueue(config);
            let location = format!("/api/v1/jobs/{}", job.job_id);
            (StatusCode::ACCEPTED, [(header::LOCATION, location)], Json(job)).into_response()
        }
        Err(fields) => (StatusCode::UNPROCESSABLE_ENTITY, Json(state.jobs.reject(fields))).into_response(),
    }
}

async fn get_job(State(state): State<AppState>, Path(raw): Path<String>) -> ApiResult<Json<JobStatus>> {
    let id: JobId = raw.parse().map_err(|_| ApiError::not_found(format!("job `{raw}`")))?;
    state.jobs.get(id).map(Json).ok_or_else(|| ApiError::not_found(format!("job {id}")))
}

// ---- models ----

#[derive(Debug, Serialize)]
pub struct CustomerLabel {
    pub customer_id: String,
    pub cluster: i32,
    pub label: String,
}

/// The stored version plus its resolved labels.
#[derive(Debug, Serialize)]
pub struct ModelDetail {
    #[serde(flatten)]
    pub version: ModelVersion,
    pub cluster_labels: Vec<String>,
    pub effective_labels: Vec<CustomerLabel>,
}

impl From<ModelVersion> for ModelDetail {
    fn from(version: ModelVersion) -> Self {
        let labeling = version.labeling();
        let cluster_labels = labeling.cluster_labels(&version.overrides);
        let effective_labels = version
            .model
            .customers
            .iter()
            .zip(&version.model.assignment)
            .zip(labeling.effective_labels(&version.overrides))
            .map(|((c, &cluster), label)| CustomerLabel {
                customer_id: c.clone(),
                cluster,
                label,
            })
            .collect();
        Self {
            version,
            cluster_labels,
            effective_labels,
        }
    }
}

async fn list_models(State(state): State<AppState>) -> ApiResult<Json<Vec<VersionEntry>>> {
    blocking(move || Ok(Json(state.store.workspace().versions()?))).await
}

async fn get_model(State(state): State<AppState>, Path(raw): Path<String>) -> ApiResult<Json<ModelDetail>> {
    let id = parse_version(&raw)?;
    blocking(move || Ok(Json(state.store.workspace().load_version(id)?.into()))).await
}

#[derive(Debug, Deserialize)]
pub struct ClustersQuery {
    threshold: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct ClusterView {
    pub index: usize,
    pub label: String,
    pub size: usize,
    pub profit_share: f64,
    pub volume_share: f64,
    pub features: Vec<FeatureSummary>,
    pub rules: Vec<Rule>,
}

#[derive(Debug, Serialize)]
pub struct ClustersView {
    pub model_id: VersionId,
    pub threshold: f64,
    pub customer_count: usize,
    pub noise_size: usize,
    pub noise_label: Option<String>,
    pub features: Vec<Feature>,
    pub global_means: Vec<f64>,
    pub clusters: Vec<ClusterView>,
}

async fn get_clusters(
    State(state): State<AppState>,
    Path(raw): Path<String>,
    Q(q): Q<ClustersQuery>,
) -> ApiResult<Json<ClustersView>> {
    let id = parse_version(&raw)?;
    let threshold = q.threshold.unwrap_or(DEFAULT_RULE_THRESHOLD);
    blocking(move || {
        let v = state.store.workspace().load_version(id)?;
        let rules = characterize_clusters(&v.model, &v.stats, threshold)?;
        let labels = v.labeling().cluster_labels(&v.overrides);
        let clusters = v
            .stats
            .clusters
            .iter()
            .zip(rules.clusters)
            .map(|(s, r)| ClusterView {
                index: s.index,
                label: labels[s.index].clone(),
                size: s.size,
                profit_share: s.profit_share,
                volume_share: s.volume_share,
                features: s.features.clone(),
                rules: r.rules,
            })
            .collect();
        Ok(Json(ClustersView {
            model_id: id,
            threshold,
            customer_count: v.stats.customer_count,
            noise_size: v.stats.noise_size,
            noise_label: (v.stats.noise_size > 0).then(|| UNSEGMENTED.to_string()),
            features: v.config.selection.features().to_vec(),
            global_means: v.stats.global_means.clone(),
            clusters,
        }))
    })
    .await
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Raw,
    #[default]
    Standardized,
}

#[derive(Debug, Deserialize)]
pub struct ScatterQuery {
    x: String,
    y: String,
    z: Option<String>,
    #[serde(default)]
    space: Space,
}

#[derive(Debug, Serialize)]
pub struct ScatterPoint {
    pub customer_id: String,
    pub coords: Vec<f64>,
    pub cluster: i32,
    pub label: String,
}

#[derive(Debug, Serialize)]
pub struct ScatterView {
    pub model_id: VersionId,
    pub space: Space,
    pub axes: Vec<Feature>,
    pub points: Vec<ScatterPoint>,
}

async fn get_scatter(
    State(state): State<AppState>,
    Path(raw): Path<String>,
    Q(q): Q<ScatterQuery>,
) -> ApiResult<Json<ScatterView>> {
    let id = parse_version(&raw)?;
    blocking(move || {
        let v = state.store.workspace().load_version(id)?;
        let mut axes = Vec::new();
        let mut columns = Vec::new();
        for (name, value) in [("x", Some(&q.x)), ("y", Some(&q.y)), ("z", q.z.as_ref())] {
            let Some(value) = value else { continue };
            let f = Feature::from_str(value).map_err(|_| ApiError::field(name, format!("unknown feature `{value}`")))?;
            let col = v
                .config
                .selection
                .position(f)
                .ok_or_else(|| ApiError::field(name, format!("feature `{f}` is not part of this model")))?;
            if axes.contains(&f) {
                return Err(ApiError::field(name, format!("feature `{f}` is already on another axis")));
            }
            axes.push(f);
            columns.push(col);
        }
        let matrix = state.store.matrix(&v)?;
        let grid = match q.space {
            Space::Raw => matrix.raw.as_slice(),
            Space::Standardized => matrix.standardized()?,
        };
        let labels = v.effective_labels();
        let points = grid
            .iter()
            .enumerate()
            .map(|(i, row)| ScatterPoint {
                customer_id: matrix.customers[i].clone(),
                coords: columns.iter().map(|&c| row[c]).collect(),
                cluster: v.model.assignment[i],
                label: labels[i].clone(),
            })
            .collect();
        Ok(Json(ScatterView {
            model_id: id,
            space: q.space,
            axes,
            points,
        }))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relabel {
    pub cluster: usize,
    pub name: String,
}

/// Either a full list of label specs (mapped onto the clusters as a new version,
/// the second step for density models) or a rename of one cluster.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelsRequest {
    pub label_specs: Option<Vec<LabelSpec>>,
    pub relabel: Option<Relabel>,
    pub author: Option<String>,
}

async fn post_labels(
    State(state): State<AppState>,
    Path(raw): Path<String>,
    JsonBody(req): JsonBody<LabelsRequest>,
) -> ApiResult<Response> {
    let id = parse_version(&raw)?;
    let author = req.author.unwrap_or_else(|| DEFAULT_AUTHOR.into());
    match (req.label_specs, req.relabel) {
        (Some(specs), None) => {
            let v = blocking(move || Ok(state.store.assign_specs(id, specs, Utc::now())?)).await?;
            let location = format!("/api/v1/models/{}", v.id);
            Ok((StatusCode::CREATED, [(header::LOCATION, location)], Json(ModelDetail::from(v))).into_response())
        }
        (None, Some(r)) => {
            let v = blocking(move || Ok(state.store.relabel_cluster(id, r.cluster, &r.name, &author, Utc::now())?))
                .await?;
            Ok(Json(ModelDetail::from(v)).into_response())
        }
        _ => Err(ApiError::field("", "send exactly one of `label_specs` or `relabel`")),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideRequest {
    pub scope: OverrideScope,
    pub target_label: String,
    pub author: Option<String>,
}

async fn post_override(
    State(state): State<AppState>,
    Path(raw): Path<String>,
    JsonBody(req): JsonBody<OverrideRequest>,
) -> ApiResult<Json<ModelDetail>> {
    let id = parse_version(&raw)?;
    let author = req.author.unwrap_or_else(|| DEFAULT_AUTHOR.into());
    blocking(move || {
        let v = state.store.add_override(id, req.scope, &req.target_label, &author, Utc::now())?;
        Ok(Json(v.into()))
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct ExplainQuery {
    seed: Option<u64>,
    n_samples: Option<usize>,
    kernel_width: Option<f64>,
    top: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct TopFeature {
    pub feature: Feature,
    pub coefficient: f64,
}

#[derive(Debug, Serialize)]
pub struct ExplanationView {
    pub model_id: VersionId,
    #[serde(flatten)]
    pub explanation: seglab_core::explain::Explanation,
    pub cluster_label: String,
    /// Whether the customer is a noise point explained against its nearest cluster.
    pub noise: bool,
    pub top: Vec<TopFeature>,
}

async fn get_explanation(
    State(state): State<AppState>,
    Path((raw, customer)): Path<(String, String)>,
    Q(q): Q<ExplainQuery>,
) -> ApiResult<Json<ExplanationView>> {
    let id = parse_version(&raw)?;
    let config = ExplainConfig {
        n_samples: q.n_samples.unwrap_or(DEFAULT_SAMPLES),
        kernel_width: q.kernel_width,
        seed: q.seed.unwrap_or(0),
        ..ExplainConfig::default()
    };
    let top = q.top.unwrap_or(DEFAULT_TOP);
    blocking(move || {
        let v = state.store.workspace().load_version(id)?;
        let matrix = state.store.matrix(&v)?;
        let explanation = explain_instance(&v.model, &matrix, &customer, &config)?;
        let noise = v.model.cluster_of(&customer) == Some(NOISE);
        let cluster_label = v.labeling().cluster_labels(&v.overrides)[explanation.cluster].clone();
        let top = explanation
            .top(top)
            .into_iter()
            .map(|(feature, coefficient)| TopFeature { feature, coefficient })
            .collect();
        Ok(Json(ExplanationView {
            model_id: id,
            explanation,
            cluster_label,
            noise,
            top,
        }))
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct CompareQuery {
    a: String,
    b: String,
}

async fn get_comparison(State(state): State<AppState>, Q(q): Q<CompareQuery>) -> ApiResult<Json<ComparisonReport>> {
    let (a, b) = (parse_version(&q.a)?, parse_version(&q.b)?);
    blocking(move || {
        let ws = state.store.workspace();
        Ok(Json(compare_versions(&ws.load_version(a)?, &ws.load_version(b)?)?))
    })
    .await
}

