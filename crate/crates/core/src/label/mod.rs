//! Semantic labels: ordinal label specifications, optimal label-to-cluster
//! assignment, and the append-only override layer that yields effective labels.

mod assignment;
mod cost;
mod overrides;

pub use assignment::{assign_labels, solve_assignment, LabelAssignment};
pub use cost::{label_cost, validate_specs, LabelSpec, Level};
pub use overrides::{Labeling, OverrideLayer, OverrideRecord, OverrideScope};

/// Label carried by DBSCAN noise points. Not available for label specs.
pub const UNSEGMENTED: &str = "Unsegmented";
