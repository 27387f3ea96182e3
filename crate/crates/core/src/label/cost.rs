use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::UNSEGMENTED;
use crate::features::Feature;
use crate::{Error, Result};

/// Five-step ordinal scale anchored at the standard-normal 10/30/50/70/90th percentiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    VeryLow,
    Low,
    Moderate,
    High,
    VeryHigh,
}

impl Level {
    pub fn target_z(self) -> f64 {
        match self {
            Level::VeryLow => -1.28,
            Level::Low => -0.52,
            Level::Moderate => 0.0,
            Level::High => 0.52,
            Level::VeryHigh => 1.28,
        }
    }
}

/// A named segment description: a target level for some of the selected features.
/// Features not mentioned do not contribute to the cost.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub label_name: String,
    #[serde(default)]
    pub levels: BTreeMap<Feature, Level>,
}

impl LabelSpec {
    pub fn new(name: impl Into<String>, levels: impl IntoIterator<Item = (Feature, Level)>) -> Self {
        Self {
            label_name: name.into(),
            levels: levels.into_iter().collect(),
        }
    }
}

/// L1 distance between the level targets and the centroid over the spec's features.
pub fn label_cost(centroid_z: &[f64], features: &[Feature], spec: &LabelSpec) -> Result<f64> {
    spec.levels.iter().try_fold(0.0, |acc, (&feature, level)| {
        let j = features.iter().position(|&f| f == feature).ok_or_else(|| {
            Error::validation(
                "label_specs",
                format!("label `{}` references feature `{feature}` which is not in the model", spec.label_name),
            )
        })?;
        Ok(acc + (level.target_z() - centroid_z[j]).abs())
    })
}

pub fn validate_specs(specs: &[LabelSpec], features: &[Feature]) -> Result<()> {
    let mut names = BTreeSet::new();
    for spec in specs {
        let name = spec.label_name.trim();
        if name.is_empty() {
            return Err(Error::validation("label_specs", "label names must be non-empty"));
        }
        if name == UNSEGMENTED {
            return Err(Error::validation(
                "label_specs",
                format!("`{UNSEGMENTED}` is reserved for noise points"),
            ));
        }
        if !names.insert(spec.label_name.as_str()) {
            return Err(Error::validation(
                "label_specs",
                format!("duplicate label name `{}`", spec.label_name),
            ));
        }
        if let Some(f) = spec.levels.keys().find(|f| !features.contains(f)) {
            return Err(Error::validation(
                "label_specs",
                format!("label `{}` references feature `{f}` which is not in the model", spec.label_name),
            ));
        }
    }
    Ok(())
}
