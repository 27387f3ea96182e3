use std::collections::VecDeque;

use super::{member_means, squared_distance, within_cluster_ss, ClusterModel, ClusterParams, NOISE};
use crate::features::FeatureMatrix;
use crate::{Error, Result};

/// Starting values offered to operators; not tuned for any dataset.
pub const DEFAULT_EPS: f64 = 0.5;
pub const DEFAULT_MIN_PTS: usize = 5;

const UNVISITED: i32 = i32::MIN;

pub fn dbscan(matrix: &FeatureMatrix, eps: f64, min_pts: usize) -> Result<ClusterModel> {
    let points = matrix.standardized()?;
    let assignment = dbscan_points(points, eps, min_pts)?;
    let clusters = assignment.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
    let centroids = member_means(points, &assignment, clusters);
    let wcss = within_cluster_ss(points, &assignment, &centroids);
    Ok(ClusterModel {
        params: ClusterParams::Dbscan { eps, min_pts },
        customers: matrix.customers.clone(),
        assignment,
        centroids,
        iterations_run: 0,
        converged: true,
        wcss,
    })
}

/// Density clustering with closed `eps`-balls (self included in the count).
///
/// Points are scanned in index order and clusters expand breadth-first, so a border
/// point reachable from several clusters joins the one with the lowest index.
pub fn dbscan_points(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Result<Vec<i32>> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Parameter {
            name: "eps",
            message: format!("must be a positive number, got {eps}"),
        });
    }
    if min_pts == 0 {
        return Err(Error::Parameter {
            name: "min_pts",
            message: "must be at least 1".into(),
        });
    }
    let eps_sq = eps * eps;
    let neighbors = |i: usize| -> Vec<usize> {
        (0..points.len())
            .filter(|&j| squared_distance(&points[i], &points[j]) <= eps_sq)
            .collect()
    };

    let mut labels = vec![UNVISITED; points.len()];
    let mut next_cluster = 0;
    for i in 0..points.len() {
        if labels[i] != UNVISITED {
            continue;
        }
        let seeds = neighbors(i);
        if seeds.len() < min_pts {
            labels[i] = NOISE;
            continue;
        }
        labels[i] = next_cluster;
        let mut queue: VecDeque<usize> = seeds.into();
        while let Some(j) = queue.pop_front() {
            match labels[j] {
                NOISE => labels[j] = next_cluster,
                UNVISITED => {
                    labels[j] = next_cluster;
                    let reach = neighbors(j);
                    if reach.len() >= min_pts {
                        queue.extend(reach);
                    }
                }
                _ => {}
            }
        }
        next_cluster += 1;
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn chain_is_one_cluster() {
        assert_eq!(dbscan_points(&pts(&[0.0, 1.0, 2.0]), 1.5, 2).unwrap(), [0, 0, 0]);
    }

    #[test]
    fn far_point_is_noise() {
        let labels = dbscan_points(&pts(&[0.0, 0.1, 0.2, 0.15, 100.0]), 1.0, 2).unwrap();
        assert_eq!(labels, [0, 0, 0, 0, NOISE]);
    }

    #[test]
    fn ball_is_closed() {
        assert_eq!(dbscan_points(&pts(&[0.0, 0.5]), 0.5, 2).unwrap(), [0, 0]);
    }

    #[test]
    fn border_joins_lowest_cluster() {
        // 1.5 is a non-core point reachable from the cores at 0.5 and 2.5
        let p = pts(&[0.0, 0.25, 0.5, 1.5, 2.5, 2.75, 3.0]);
        assert_eq!(dbscan_points(&p, 1.0, 4).unwrap(), [0, 0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn all_noise_is_legal() {
        let labels = dbscan_points(&pts(&[0.0, 10.0, 20.0]), 1.0, 2).unwrap();
        assert_eq!(labels, [NOISE; 3]);
    }

    #[test]
    fn invalid_parameters() {
        assert!(dbscan_points(&pts(&[0.0]), 0.0, 2).is_err());
        assert!(dbscan_points(&pts(&[0.0]), 1.0, 0).is_err());
    }
}
