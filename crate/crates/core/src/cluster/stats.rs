use serde::{Deserialize, Serialize};

use super::{squared_distance, ClusterModel, NOISE};
use crate::features::{Feature, FeatureMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub feature: Feature,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub centroid_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub index: usize,
    pub size: usize,
    pub features: Vec<FeatureSummary>,
    pub profit_share: f64,
    pub volume_share: f64,
}

/// Raw-space descriptive statistics per cluster. Noise points are counted in
/// `noise_size` and left out of every cluster and share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub customer_count: usize,
    pub noise_size: usize,
    /// Raw-space mean of every customer, per feature.
    pub global_means: Vec<f64>,
    pub clusters: Vec<ClusterSummary>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn share(part: f64, total: f64) -> f64 {
    if total == 0.0 {
        0.0
    } else {
        part / total
    }
}

pub fn cluster_stats(model: &ClusterModel, matrix: &FeatureMatrix) -> Result<ClusterStats> {
    model.check_matrix(matrix)?;
    let n = matrix.len();
    let global_means = (0..matrix.features.len())
        .map(|j| matrix.raw.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();

    let clustered = || model.assignment.iter().zip(&matrix.totals).filter(|(&a, _)| a != NOISE);
    let total_profit: f64 = clustered().map(|(_, t)| t.profit).sum();
    let total_volume: f64 = clustered().map(|(_, t)| t.volume_tons).sum();

    let clusters = (0..model.cluster_count())
        .map(|c| {
            let members: Vec<usize> = model.members(c).collect();
            let features = matrix
                .features
                .iter()
                .enumerate()
                .map(|(j, &feature)| {
                    let mut values: Vec<f64> = members.iter().map(|&i| matrix.raw[i][j]).collect();
                    values.sort_by(f64::total_cmp);
                    let (min, max, med, mean) = if values.is_empty() {
                        (0.0, 0.0, 0.0, 0.0)
                    } else {
                        let mean = values.iter().sum::<f64>() / values.len() as f64;
                        (values[0], values[values.len() - 1], median(&values), mean)
                    };
                    FeatureSummary {
                        feature,
                        mean,
                        median: med,
                        min,
                        max,
                        centroid_z: model.centroids[c][j],
                    }
                })
                .collect();
            let profit: f64 = members.iter().map(|&i| matrix.totals[i].profit).sum();
            let volume: f64 = members.iter().map(|&i| matrix.totals[i].volume_tons).sum();
            ClusterSummary {
                index: c,
                size: members.len(),
                features,
                profit_share: share(profit, total_profit),
                volume_share: share(volume, total_volume),
            }
        })
        .collect();

    Ok(ClusterStats {
        customer_count: n,
        noise_size: model.noise_count(),
        global_means,
        clusters,
    })
}

/// Mean silhouette over the standardized matrix; noise excluded.
pub fn silhouette(model: &ClusterModel, matrix: &FeatureMatrix) -> Result<f64> {
    model.check_matrix(matrix)?;
    silhouette_points(matrix.standardized()?, &model.assignment)
}

/// Mean silhouette width. Points in singleton clusters score 0; negative labels are
/// skipped. Needs at least two non-empty clusters.
pub fn silhouette_points(points: &[Vec<f64>], assignment: &[i32]) -> Result<f64> {
    let clusters = assignment.iter().copied().filter(|&a| a >= 0).max().map_or(0, |m| m as usize + 1);
    let mut sizes = vec![0usize; clusters];
    for &a in assignment.iter().filter(|&&a| a >= 0) {
        sizes[a as usize] += 1;
    }
    let non_empty = sizes.iter().filter(|&&s| s > 0).count();
    if non_empty < 2 {
        return Err(Error::MetricUndefined(format!(
            "silhouette needs at least 2 non-empty clusters, found {non_empty}"
        )));
    }

    let mut total = 0.0;
    let mut counted = 0usize;
    for (i, p) in points.iter().enumerate() {
        let own = assignment[i];
        if own < 0 {
            continue;
        }
        counted += 1;
        if sizes[own as usize] == 1 {
            continue;
        }
        let mut sums = vec![0.0; clusters];
        for (j, q) in points.iter().enumerate() {
            if j != i && assignment[j] >= 0 {
                sums[assignment[j] as usize] += squared_distance(p, q).sqrt();
            }
        }
        let a = sums[own as usize] / (sizes[own as usize] - 1) as f64;
        let b = (0..clusters)
            .filter(|&c| c != own as usize && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / counted as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::ClusterParams;
    use crate::features::{standardize, Feature};

    fn fixture_matrix() -> FeatureMatrix {
        // profit and volume columns of fixture T1 (C1, C2, C3)
        let m = FeatureMatrix::from_rows(
            vec!["C1".into(), "C2".into(), "C3".into()],
            vec![Feature::Profit, Feature::VolumeTons],
            vec![vec![120.0, 30.0], vec![10.0, 5.0], vec![15.0, 3.0]],
        )
        .unwrap();
        standardize(m)
    }

    fn model_for(matrix: &FeatureMatrix, assignment: Vec<i32>) -> ClusterModel {
        let k = assignment.iter().copied().max().unwrap_or(-1) + 1;
        let centroids = crate::cluster::member_means(matrix.standardized().unwrap(), &assignment, k as usize);
        ClusterModel {
            params: ClusterParams::Kmeans { k: k as usize, seed: 0 },
            customers: matrix.customers.clone(),
            assignment,
            centroids,
            iterations_run: 1,
            converged: true,
            wcss: 0.0,
        }
    }

    #[test]
    fn single_cluster_totality() {
        let m = fixture_matrix();
        let s = cluster_stats(&model_for(&m, vec![0, 0, 0]), &m).unwrap();
        assert_eq!(s.clusters[0].size, 3);
        assert_eq!(s.clusters[0].profit_share, 1.0);
        assert_eq!(s.clusters[0].volume_share, 1.0);
        assert_eq!(s.noise_size, 0);
    }

    #[test]
    fn fixture_profit_share() {
        let m = fixture_matrix();
        let s = cluster_stats(&model_for(&m, vec![0, 1, 1]), &m).unwrap();
        assert!((s.clusters[0].profit_share - 120.0 / 145.0).abs() < 1e-12);
        assert!((s.clusters[1].profit_share - 25.0 / 145.0).abs() < 1e-12);
        let profit = &s.clusters[1].features[0];
        assert_eq!((profit.min, profit.median, profit.max, profit.mean), (10.0, 12.5, 15.0, 12.5));
    }

    #[test]
    fn noise_excluded_from_shares() {
        let m = fixture_matrix();
        let s = cluster_stats(&model_for(&m, vec![NOISE, 0, 0]), &m).unwrap();
        assert_eq!(s.noise_size, 1);
        assert_eq!(s.clusters[0].size, 2);
        assert_eq!(s.clusters[0].profit_share, 1.0);
    }

    #[test]
    fn silhouette_tight_pairs() {
        let p = vec![vec![0.0], vec![0.1], vec![10.0], vec![10.1]];
        let s = silhouette_points(&p, &[0, 0, 1, 1]).unwrap();
        // a = 0.1; b = 10.05 or 9.95; direct formula evaluation
        let expected = ((9.95f64 - 0.1) / 9.95 * 2.0 + (10.05 - 0.1) / 10.05 * 2.0) / 4.0;
        assert!((s - expected).abs() < 1e-12);
        assert!(s > 0.9);
    }

    #[test]
    fn silhouette_all_singletons_is_zero() {
        let p = vec![vec![0.0], vec![1.0], vec![5.0]];
        assert_eq!(silhouette_points(&p, &[0, 1, 2]).unwrap(), 0.0);
    }

    #[test]
    fn silhouette_one_cluster_undefined() {
        let p = vec![vec![0.0], vec![1.0]];
        assert!(matches!(silhouette_points(&p, &[0, 0]), Err(Error::MetricUndefined(_))));
        assert!(matches!(silhouette_points(&p, &[0, NOISE]), Err(Error::MetricUndefined(_))));
    }
}
