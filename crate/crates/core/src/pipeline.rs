//! End-to-end build: parse, filter, derive, standardize, cluster, label, describe.

use serde::{Deserialize, Serialize};

use crate::cluster::{cluster_stats, dbscan, kmeans, silhouette, ClusterModel, ClusterParams, ClusterStats};
use crate::features::{derive_features, standardize, FeatureMatrix, FeatureSelection};
use crate::ingest::{filter_transactions, parse_transactions, FilterSpec, Schema};
use crate::label::{assign_labels, validate_specs, LabelAssignment, LabelSpec};
use crate::{Error, Result};

/// Everything needed to reproduce a segmentation from its source data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub dataset_id: String,
    #[serde(default)]
    pub schema: Schema,
    pub filter: FilterSpec,
    pub selection: FeatureSelection,
    pub params: ClusterParams,
    /// Must match `k` for K-Means. For DBSCAN, empty until the discovered clusters are
    /// labeled in a second step.
    #[serde(default)]
    pub label_specs: Vec<LabelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl From<Error> for FieldError {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation { field, message } => FieldError { field, message },
            Error::Parameter { name, message } => FieldError {
                field: format!("params.{name}"),
                message,
            },
            other => FieldError {
                field: String::new(),
                message: other.to_string(),
            },
        }
    }
}

impl BuildConfig {
    /// Checks everything that can be checked without touching the data.
    pub fn validate(&self) -> Result<(), Vec<FieldError>> {
        let mut errors = Vec::new();
        if self.dataset_id.trim().is_empty() {
            errors.push(FieldError {
                field: "dataset_id".into(),
                message: "dataset id is required".into(),
            });
        }
        if let Err(e) = self.filter.validate() {
            errors.push(e.into());
        }
        match self.params {
            ClusterParams::Kmeans { k, .. } => {
                if k < 2 {
                    errors.push(FieldError {
                        field: "params.k".into(),
                        message: format!("k must be at least 2, got {k}"),
                    });
                }
                if self.label_specs.len() != k {
                    errors.push(FieldError {
                        field: "label_specs".into(),
                        message: format!(
                            "k = {k} clusters need exactly {k} label specs, got {}; add or remove labels",
                            self.label_specs.len()
                        ),
                    });
                }
            }
            ClusterParams::Dbscan { eps, min_pts } => {
                if !(eps > 0.0) || !eps.is_finite() {
                    errors.push(FieldError {
                        field: "params.eps".into(),
                        message: format!("eps must be a positive number, got {eps}"),
                    });
                }
                if min_pts == 0 {
                    errors.push(FieldError {
                        field: "params.min_pts".into(),
                        message: "min_pts must be at least 1".into(),
                    });
                }
            }
        }
        if let Err(e) = validate_specs(&self.label_specs, self.selection.features()) {
            errors.push(e.into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub wcss: f64,
    /// Absent when fewer than two clusters exist.
    pub silhouette: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Build {
    pub matrix: FeatureMatrix,
    pub model: ClusterModel,
    pub labels: Option<LabelAssignment>,
    pub stats: ClusterStats,
    pub metrics: Metrics,
}

/// Parses the source and derives the standardized matrix for `config`.
pub fn prepare_matrix(source: &[u8], config: &BuildConfig) -> Result<FeatureMatrix> {
    let parsed = parse_transactions(source, &config.schema)?;
    let txns = filter_transactions(&parsed.transactions, &config.filter);
    let matrix = derive_features(&txns, &config.selection, &config.filter)?;
    Ok(standardize(matrix))
}

pub fn run(source: &[u8], config: &BuildConfig) -> Result<Build> {
    if let Err(errors) = config.validate() {
        let first = errors.into_iter().next().expect("non-empty");
        return Err(Error::Validation {
            field: first.field,
            message: first.message,
        });
    }
    let matrix = prepare_matrix(source, config)?;
    let model = match config.params {
        ClusterParams::Kmeans { k, seed } => kmeans(&matrix, k, seed)?,
        ClusterParams::Dbscan { eps, min_pts } => dbscan(&matrix, eps, min_pts)?,
    };
    let labels = label_model(&model, &matrix, &config.label_specs)?;
    let stats = cluster_stats(&model, &matrix)?;
    let metrics = Metrics {
        wcss: model.wcss,
        silhouette: silhouette(&model, &matrix).ok(),
    };
    Ok(Build {
        matrix,
        model,
        labels,
        stats,
        metrics,
    })
}

/// Assigns labels when specs are present. For DBSCAN an empty list defers labeling.
pub fn label_model(
    model: &ClusterModel,
    matrix: &FeatureMatrix,
    specs: &[LabelSpec],
) -> Result<Option<LabelAssignment>> {
    if specs.is_empty() && matches!(model.params, ClusterParams::Dbscan { .. }) {
        return Ok(None);
    }
    assign_labels(&model.centroids, &matrix.features, specs).map(Some)
}
