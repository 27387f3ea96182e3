//! Customer segmentation workbench core.
//!
//! The pipeline runs transactions through [`ingest`] and [`features`], clusters the
//! standardized feature matrix ([`cluster`]), maps operator-authored label
//! specifications onto clusters ([`label`]), explains memberships ([`explain`]) and
//! persists immutable model versions ([`store`]). [`pipeline`] ties the stages
//! together so a stored build config can be replayed deterministically.

pub mod cluster;
pub mod error;
pub mod explain;
pub mod features;
pub mod ingest;
pub mod label;
pub mod pipeline;
pub mod store;

pub use error::{Error, Result};
