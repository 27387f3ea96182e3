//! K-Means and DBSCAN over the standardized feature matrix, plus descriptive
//! statistics and silhouette quality.

mod dbscan;
mod kmeans;
mod stats;

use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::{Error, Result};

pub use dbscan::{dbscan, dbscan_points, DEFAULT_EPS, DEFAULT_MIN_PTS};
pub use kmeans::{kmeans, kmeans_points, kmeans_with, KMeansConfig, KMeansFit};
pub use stats::{cluster_stats, silhouette, silhouette_points, ClusterStats, ClusterSummary, FeatureSummary};

/// Assignment value for DBSCAN noise points.
pub const NOISE: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum ClusterParams {
    Kmeans { k: usize, seed: u64 },
    Dbscan { eps: f64, min_pts: usize },
}

/// A built clustering. Immutable once constructed by [`kmeans`] or [`dbscan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub params: ClusterParams,
    pub customers: Vec<String>,
    /// Cluster index per customer, parallel to `customers`; [`NOISE`] for noise.
    pub assignment: Vec<i32>,
    /// Per cluster, in standardized space; the mean of the members.
    pub centroids: Vec<Vec<f64>>,
    pub iterations_run: u32,
    pub converged: bool,
    pub wcss: f64,
}

impl ClusterModel {
    pub fn cluster_count(&self) -> usize {
        self.centroids.len()
    }

    pub fn cluster_of(&self, customer_id: &str) -> Option<i32> {
        self.customers
            .iter()
            .position(|c| c == customer_id)
            .map(|i| self.assignment[i])
    }

    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, &a)| a == cluster as i32)
            .map(|(i, _)| i)
    }

    pub fn noise_count(&self) -> usize {
        self.assignment.iter().filter(|&&a| a == NOISE).count()
    }

    pub(crate) fn check_matrix(&self, matrix: &FeatureMatrix) -> Result<()> {
        if self.customers != matrix.customers {
            return Err(Error::Parameter {
                name: "model",
                message: "model customers do not match the feature matrix".into(),
            });
        }
        Ok(())
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean of member rows for each cluster label in `0..clusters`.
pub(crate) fn member_means(points: &[Vec<f64>], assignment: &[i32], clusters: usize) -> Vec<Vec<f64>> {
    let dim = points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; dim]; clusters];
    let mut counts = vec![0usize; clusters];
    for (p, &a) in points.iter().zip(assignment) {
        if a < 0 {
            continue;
        }
        let a = a as usize;
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(p) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|x| *x /= c as f64);
        }
    }
    sums
}

/// Sum of squared distances of non-noise points to their cluster centroid.
pub fn within_cluster_ss(points: &[Vec<f64>], assignment: &[i32], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .filter(|(_, &a)| a >= 0)
        .map(|(p, &a)| squared_distance(p, &centroids[a as usize]))
        .sum()
}
