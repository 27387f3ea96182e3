//! Versioned model store and version comparison.
//!
//! A workspace directory holds `datasets/<id>.csv`, one JSON document per version in
//! `versions/<id>.json`, and `index.json` listing the versions. Every file is written
//! to a temporary sibling and renamed into place.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cluster::{ClusterModel, ClusterStats};
use crate::label::{LabelAssignment, Labeling, OverrideLayer};
use crate::pipeline::{self, BuildConfig, Metrics};
use crate::{Error, Result};

pub type VersionId = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVersion {
    pub id: VersionId,
    pub created_at: DateTime<Utc>,
    pub config: BuildConfig,
    pub model: ClusterModel,
    pub labels: Option<LabelAssignment>,
    pub overrides: OverrideLayer,
    pub stats: ClusterStats,
    pub metrics: Metrics,
    /// SHA-256 of the source dataset bytes.
    pub source_hash: String,
}

impl ModelVersion {
    /// Assembles an unsaved version (id 0) from a finished build.
    pub fn from_build(config: BuildConfig, build: pipeline::Build, source: &[u8], created_at: DateTime<Utc>) -> Self {
        Self {
            id: 0,
            created_at,
            config,
            model: build.model,
            labels: build.labels,
            overrides: OverrideLayer::default(),
            stats: build.stats,
            metrics: build.metrics,
            source_hash: source_hash(source),
        }
    }

    pub fn labeling(&self) -> Labeling {
        Labeling::new(&self.model, self.labels.as_ref())
    }

    pub fn effective_labels(&self) -> Vec<String> {
        self.labeling().effective_labels(&self.overrides)
    }
}

pub fn source_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn verify_source(version: &ModelVersion, bytes: &[u8]) -> Result<()> {
    let found = source_hash(bytes);
    if found != version.source_hash {
        return Err(Error::SourceMismatch {
            expected: version.source_hash.clone(),
            found,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionEntry {
    pub id: VersionId,
    pub created_at: DateTime<Utc>,
    pub dataset_id: String,
    pub algorithm: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Index {
    next_id: VersionId,
    versions: Vec<VersionEntry>,
}

/// Single-writer, multi-reader store rooted at a directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("versions"))?;
        fs::create_dir_all(root.join("datasets"))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn index_path(&self) -> PathBuf {
        self.root.join("index.json")
    }

    fn version_path(&self, id: VersionId) -> PathBuf {
        self.root.join("versions").join(format!("{id:06}.json"))
    }

    fn dataset_path(&self, id: &str) -> Result<PathBuf> {
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(Error::NotFound(format!("dataset `{id}`")));
        }
        Ok(self.root.join("datasets").join(format!("{id}.csv")))
    }

    fn read_index(&self) -> Result<Index> {
        match fs::read(self.index_path()) {
            Ok(bytes) => Ok(serde_json::from_slice(&bytes)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Index {
                next_id: 1,
                versions: Vec::new(),
            }),
            Err(e) => Err(e.into()),
        }
    }

    /// Stores dataset bytes under a content-derived id and returns the id.
    pub fn put_dataset(&self, bytes: &[u8]) -> Result<String> {
        let id = source_hash(bytes)[..16].to_string();
        let path = self.dataset_path(&id)?;
        if !path.exists() {
            write_atomic(&path, bytes)?;
        }
        Ok(id)
    }

    pub fn dataset(&self, id: &str) -> Result<Vec<u8>> {
        match fs::read(self.dataset_path(id)?) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::NotFound(format!("dataset `{id}`"))),
            Err(e) => Err(e.into()),
        }
    }

    pub fn datasets(&self) -> Result<Vec<String>> {
        let mut ids: Vec<String> = fs::read_dir(self.root.join("datasets"))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str()?.strip_suffix(".csv").map(str::to_string))
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Assigns the next id, writes the version document and then the index.
    pub fn save_version(&self, mut version: ModelVersion) -> Result<VersionId> {
        let mut index = self.read_index()?;
        let id = index.next_id.max(1);
        version.id = id;
        write_atomic(&self.version_path(id), &serde_json::to_vec_pretty(&version)?)?;
        index.next_id = id + 1;
        index.versions.push(VersionEntry {
            id,
            created_at: version.created_at,
            dataset_id: version.config.dataset_id.clone(),
            algorithm: match version.model.params {
                crate::cluster::ClusterParams::Kmeans { .. } => "kmeans".into(),
                crate::cluster::ClusterParams::Dbscan { .. } => "dbscan".into(),
            },
        });
        write_atomic(&self.index_path(), &serde_json::to_vec_pretty(&index)?)?;
        Ok(id)
    }

    pub fn load_version(&self, id: VersionId) -> Result<ModelVersion> {
        match fs::read(self.version_path(id)) {
            Ok(bytes) => Ok(serde_json::from_slice(&bytes)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::NotFound(format!("model version {id}"))),
            Err(e) => Err(e.into()),
        }
    }

    pub fn versions(&self) -> Result<Vec<VersionEntry>> {
        Ok(self.read_index()?.versions)
    }

    /// Replaces the override layer of a stored version. Callers only ever extend it.
    pub fn write_overrides(&self, id: VersionId, overrides: &OverrideLayer) -> Result<ModelVersion> {
        let mut version = self.load_version(id)?;
        let existing = version.overrides.records();
        if overrides.records().len() < existing.len() || &overrides.records()[..existing.len()] != existing {
            return Err(Error::validation("overrides", "override history can only be appended to"));
        }
        version.overrides = overrides.clone();
        write_atomic(&self.version_path(id), &serde_json::to_vec_pretty(&version)?)?;
        Ok(version)
    }

    /// Re-runs the stored config against the stored dataset, refusing to proceed if
    /// the dataset bytes changed.
    pub fn rebuild(&self, version: &ModelVersion) -> Result<pipeline::Build> {
        let source = self.dataset(&version.config.dataset_id)?;
        verify_source(version, &source)?;
        pipeline::run(&source, &version.config)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().expect("workspace files live in a directory");
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(Error::Write)?;
    tmp.write_all(bytes).map_err(Error::Write)?;
    tmp.as_file().sync_all().map_err(Error::Write)?;
    tmp.persist(path).map_err(|e| Error::Write(e.error))?;
    Ok(())
}

/// Chance-corrected agreement of two labelings of the same items (pair-counting form
/// computed from the contingency table). Identical partitions score exactly 1.
pub fn adjusted_rand_index(a: &[i32], b: &[i32]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    let n = a.len() as u128;
    let pairs = |m: u128| m * m.saturating_sub(1) / 2;
    let mut table: HashMap<(i32, i32), u128> = HashMap::new();
    let mut rows: HashMap<i32, u128> = HashMap::new();
    let mut cols: HashMap<i32, u128> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: u128 = table.values().map(|&c| pairs(c)).sum();
    let sum_a: u128 = rows.values().map(|&c| pairs(c)).sum();
    let sum_b: u128 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    if total == 0 {
        return 1.0;
    }
    let expected = (sum_a as f64) * (sum_b as f64) / total as f64;
    let max_index = (sum_a + sum_b) as f64 / 2.0;
    let denom = max_index - expected;
    if denom == 0.0 {
        // both partitions all-singletons, or both a single block
        return if index as f64 == expected { 1.0 } else { 0.0 };
    }
    (index as f64 - expected) / denom
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    /// Effective labels in version A (rows), sorted.
    pub from_labels: Vec<String>,
    /// Effective labels in version B (columns), sorted.
    pub to_labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovedCustomer {
    pub customer_id: String,
    pub from_label: String,
    pub to_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub a: VersionId,
    pub b: VersionId,
    pub shared_customers: usize,
    pub adjusted_rand_index: f64,
    pub transitions: TransitionMatrix,
    pub moved: Vec<MovedCustomer>,
}

/// Compares two versions over their shared customers. Noise points form one block of
/// the partition; transitions use effective labels.
pub fn compare_versions(a: &ModelVersion, b: &ModelVersion) -> Result<ComparisonReport> {
    let labels_a = a.effective_labels();
    let labels_b = b.effective_labels();
    let in_b: BTreeMap<&str, usize> = b.model.customers.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut shared: Vec<(usize, usize)> = a
        .model
        .customers
        .iter()
        .enumerate()
        .filter_map(|(i, c)| in_b.get(c.as_str()).map(|&j| (i, j)))
        .collect();
    shared.sort_by(|x, y| a.model.customers[x.0].cmp(&a.model.customers[y.0]));
    if shared.is_empty() {
        return Err(Error::ComparisonUndefined(format!(
            "versions {} and {} share no customers",
            a.id, b.id
        )));
    }

    let part_a: Vec<i32> = shared.iter().map(|&(i, _)| a.model.assignment[i]).collect();
    let part_b: Vec<i32> = shared.iter().map(|&(_, j)| b.model.assignment[j]).collect();

    let from_labels: Vec<String> = shared.iter().map(|&(i, _)| labels_a[i].clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let to_labels: Vec<String> = shared.iter().map(|&(_, j)| labels_b[j].clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let mut counts = vec![vec![0usize; to_labels.len()]; from_labels.len()];
    let mut moved = Vec::new();
    for &(i, j) in &shared {
        let (la, lb) = (&labels_a[i], &labels_b[j]);
        let r = from_labels.binary_search(la).expect("row label present");
        let c = to_labels.binary_search(lb).expect("column label present");
        counts[r][c] += 1;
        if la != lb {
            moved.push(MovedCustomer {
                customer_id: a.model.customers[i].clone(),
                from_label: la.clone(),
                to_label: lb.clone(),
            });
        }
    }

    Ok(ComparisonReport {
        a: a.id,
        b: b.id,
        shared_customers: shared.len(),
        adjusted_rand_index: adjusted_rand_index(&part_a, &part_b),
        transitions: TransitionMatrix {
            from_labels,
            to_labels,
            counts,
        },
        moved,
    })
}
