use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{LabelAssignment, UNSEGMENTED};
use crate::cluster::{ClusterModel, NOISE};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OverrideScope {
    Instance { customer_id: String },
    Cluster { index: usize },
    Group { customer_ids: BTreeSet<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverrideRecord {
    pub scope: OverrideScope,
    pub target_label: String,
    pub timestamp: DateTime<Utc>,
    pub author: String,
}

/// Append-only list of human corrections. The last record covering a customer wins.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OverrideLayer {
    records: Vec<OverrideRecord>,
}

impl OverrideLayer {
    pub fn records(&self) -> &[OverrideRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn push(&mut self, record: OverrideRecord) {
        self.records.push(record);
    }
}

/// Label resolution for one model version: cluster membership plus the label each
/// cluster received from the optimal assignment (or a placeholder when unlabeled).
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    customers: Vec<String>,
    membership: Vec<i32>,
    base: Vec<String>,
}

impl Labeling {
    pub fn new(model: &ClusterModel, labels: Option<&LabelAssignment>) -> Self {
        let base = match labels {
            Some(a) => a.labels.clone(),
            None => (0..model.cluster_count()).map(|c| format!("cluster-{c}")).collect(),
        };
        Self {
            customers: model.customers.clone(),
            membership: model.assignment.clone(),
            base,
        }
    }

    /// Current label of each cluster after cluster-scope overrides.
    pub fn cluster_labels(&self, layer: &OverrideLayer) -> Vec<String> {
        let mut labels = self.base.clone();
        for r in layer.records() {
            if let OverrideScope::Cluster { index } = r.scope {
                labels[index] = r.target_label.clone();
            }
        }
        labels
    }

    /// Effective label per customer (parallel to the model's customers), obtained by
    /// replaying the override log over the assigned labels.
    pub fn effective_labels(&self, layer: &OverrideLayer) -> Vec<String> {
        let mut out: Vec<String> = self
            .membership
            .iter()
            .map(|&c| if c == NOISE { UNSEGMENTED.to_string() } else { self.base[c as usize].clone() })
            .collect();
        for r in layer.records() {
            for (i, label) in out.iter_mut().enumerate() {
                let covered = match &r.scope {
                    OverrideScope::Instance { customer_id } => &self.customers[i] == customer_id,
                    OverrideScope::Cluster { index } => self.membership[i] == *index as i32,
                    OverrideScope::Group { customer_ids } => customer_ids.contains(&self.customers[i]),
                };
                if covered {
                    label.clone_from(&r.target_label);
                }
            }
        }
        out
    }

    pub fn effective_label(&self, layer: &OverrideLayer, customer_id: &str) -> Option<String> {
        let i = self.customers.iter().position(|c| c == customer_id)?;
        Some(self.effective_labels(layer).swap_remove(i))
    }

    /// Labels an override may target: the current cluster labels, plus the noise
    /// label when the model has noise points.
    pub fn known_labels(&self, layer: &OverrideLayer) -> BTreeSet<String> {
        let mut known: BTreeSet<String> = self.cluster_labels(layer).into_iter().collect();
        if self.membership.contains(&NOISE) {
            known.insert(UNSEGMENTED.to_string());
        }
        known
    }

    /// Renames a cluster by appending a cluster-scope override; returns the updated
    /// per-cluster label map. The original assignment is left untouched.
    pub fn relabel_cluster(
        &self,
        layer: &mut OverrideLayer,
        cluster: usize,
        new_name: &str,
        author: &str,
        at: DateTime<Utc>,
    ) -> Result<Vec<String>> {
        let current = self.cluster_labels(layer);
        if cluster >= current.len() {
            return Err(Error::validation("cluster", format!("cluster {cluster} does not exist")));
        }
        let name = new_name.trim();
        if name.is_empty() {
            return Err(Error::validation("name", "label name must be non-empty"));
        }
        if name == UNSEGMENTED {
            return Err(Error::validation("name", format!("`{UNSEGMENTED}` is reserved for noise points")));
        }
        if current.iter().enumerate().any(|(c, l)| c != cluster && l == name) {
            return Err(Error::validation("name", format!("label `{name}` is already used by another cluster")));
        }
        layer.push(OverrideRecord {
            scope: OverrideScope::Cluster { index: cluster },
            target_label: name.to_string(),
            timestamp: at,
            author: author.to_string(),
        });
        Ok(self.cluster_labels(layer))
    }

    /// Appends an instance, group or cluster override targeting an existing label.
    pub fn apply_override(
        &self,
        layer: &mut OverrideLayer,
        scope: OverrideScope,
        target_label: &str,
        author: &str,
        at: DateTime<Utc>,
    ) -> Result<()> {
        let unknown = |id: &String| !self.customers.contains(id);
        match &scope {
            OverrideScope::Instance { customer_id } if unknown(customer_id) => {
                return Err(Error::validation("scope", format!("unknown customer `{customer_id}`")));
            }
            OverrideScope::Group { customer_ids } => {
                if customer_ids.is_empty() {
                    return Err(Error::validation("scope", "group override needs at least one customer"));
                }
                if let Some(id) = customer_ids.iter().find(|id| unknown(id)) {
                    return Err(Error::validation("scope", format!("unknown customer `{id}`")));
                }
            }
            OverrideScope::Cluster { index } if *index >= self.base.len() => {
                return Err(Error::validation("scope", format!("cluster {index} does not exist")));
            }
            _ => {}
        }
        if !self.known_labels(layer).contains(target_label) {
            return Err(Error::validation("target_label", format!("unknown label `{target_label}`")));
        }
        layer.push(OverrideRecord {
            scope,
            target_label: target_label.to_string(),
            timestamp: at,
            author: author.to_string(),
        });
        Ok(())
    }
}
