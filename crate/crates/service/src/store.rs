use std::path::PathBuf;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use seglab_core::features::FeatureMatrix;
use seglab_core::label::{assign_labels, LabelSpec, OverrideLayer, OverrideScope};
use seglab_core::pipeline::{self, BuildConfig};
use seglab_core::store::{verify_source, ModelVersion, VersionId, Workspace};
use seglab_core::Result;

/// A workspace plus the lock that makes this process its single writer. Reads go
/// straight to the files, which are only ever replaced atomically.
pub struct Store {
    ws: Workspace,
    writer: Mutex<()>,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        Ok(Self {
            ws: Workspace::open(root)?,
            writer: Mutex::new(()),
        })
    }

    pub fn workspace(&self) -> &Workspace {
        &self.ws
    }

    pub fn put_dataset(&self, bytes: &[u8]) -> Result<String> {
        let _w = self.writer.lock().unwrap();
        self.ws.put_dataset(bytes)
    }

    /// Runs the full pipeline for `config` and saves the result as a new version.
    pub fn build(&self, config: &BuildConfig, at: DateTime<Utc>) -> Result<VersionId> {
        let source = self.ws.dataset(&config.dataset_id)?;
        let build = pipeline::run(&source, config)?;
        let version = ModelVersion::from_build(config.clone(), build, &source, at);
        let _w = self.writer.lock().unwrap();
        self.ws.save_version(version)
    }

    /// Standardized feature matrix a version was built from. Fails if the dataset
    /// bytes no longer match the version.
    pub fn matrix(&self, version: &ModelVersion) -> Result<FeatureMatrix> {
        let source = self.ws.dataset(&version.config.dataset_id)?;
        verify_source(version, &source)?;
        pipeline::prepare_matrix(&source, &version.config)
    }

    /// Maps `specs` onto the clusters of version `id` and stores the result as a new
    /// version with an empty override layer. The clustering itself is reused.
    pub fn assign_specs(&self, id: VersionId, specs: Vec<LabelSpec>, at: DateTime<Utc>) -> Result<ModelVersion> {
        let base = self.ws.load_version(id)?;
        let labels = assign_labels(&base.model.centroids, base.config.selection.features(), &specs)?;
        let mut config = base.config.clone();
        config.label_specs = specs;
        let version = ModelVersion {
            id: 0,
            created_at: at,
            config,
            labels: Some(labels),
            overrides: OverrideLayer::default(),
            ..base
        };
        let _w = self.writer.lock().unwrap();
        let new_id = self.ws.save_version(version)?;
        self.ws.load_version(new_id)
    }

    pub fn relabel_cluster(
        &self,
        id: VersionId,
        cluster: usize,
        name: &str,
        author: &str,
        at: DateTime<Utc>,
    ) -> Result<ModelVersion> {
        let _w = self.writer.lock().unwrap();
        let version = self.ws.load_version(id)?;
        let mut layer = version.overrides.clone();
        version.labeling().relabel_cluster(&mut layer, cluster, name, author, at)?;
        self.ws.write_overrides(id, &layer)
    }

    pub fn add_override(
        &self,
        id: VersionId,
        scope: OverrideScope,
        target_label: &str,
        author: &str,
        at: DateTime<Utc>,
    ) -> Result<ModelVersion> {
        let _w = self.writer.lock().unwrap();
        let version = self.ws.load_version(id)?;
        let mut layer = version.overrides.clone();
        version.labeling().apply_override(&mut layer, scope, target_label, author, at)?;
        self.ws.write_overrides(id, &layer)
    }
}
