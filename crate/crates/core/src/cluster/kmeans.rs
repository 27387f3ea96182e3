use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{member_means, squared_distance, within_cluster_ss, ClusterModel, ClusterParams};
use crate::features::FeatureMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub max_iterations: u32,
    /// Stop once no centroid moves further than this.
    pub tolerance: f64,
    /// Independent k-means++ initializations; the lowest-WCSS run is kept.
    pub restarts: u32,
    /// Polish each converged run with single-point transfers.
    pub refine: bool,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-6,
            restarts: 25,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub iterations: u32,
    /// True when every restart met the tolerance within the iteration cap.
    pub converged: bool,
    pub wcss: f64,
    /// WCSS after each Lloyd iteration of the kept run, then after each transfer pass.
    pub trace: Vec<f64>,
}

pub fn kmeans(matrix: &FeatureMatrix, k: usize, seed: u64) -> Result<ClusterModel> {
    kmeans_with(matrix, k, seed, &KMeansConfig::default())
}

pub fn kmeans_with(matrix: &FeatureMatrix, k: usize, seed: u64, config: &KMeansConfig) -> Result<ClusterModel> {
    let fit = kmeans_points(matrix.standardized()?, k, seed, config)?;
    Ok(ClusterModel {
        params: ClusterParams::Kmeans { k, seed },
        customers: matrix.customers.clone(),
        assignment: fit.assignment.iter().map(|&a| a as i32).collect(),
        centroids: fit.centroids,
        iterations_run: fit.iterations,
        converged: fit.converged,
        wcss: fit.wcss,
    })
}

/// Lloyd's algorithm with k-means++ seeding from a ChaCha8 generator seeded with
/// `seed`. Identical inputs give bit-identical output.
pub fn kmeans_points(points: &[Vec<f64>], k: usize, seed: u64, config: &KMeansConfig) -> Result<KMeansFit> {
    let n = points.len();
    if k < 2 || k > n {
        return Err(Error::Parameter {
            name: "k",
            message: format!("must satisfy 2 <= k <= {n} (customer count), got {k}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansFit> = None;
    let mut all_converged = true;
    for _ in 0..config.restarts.max(1) {
        let init = plus_plus_seeds(points, k, &mut rng);
        let run = lloyd(points, init, config);
        all_converged &= run.converged;
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one restart");
    best.converged = all_converged;
    Ok(best)
}

fn plus_plus_seeds(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].clone());
    let mut nearest: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let u: f64 = rng.random();
        let pick = if total > 0.0 {
            let target = u * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    chosen = i;
                    break;
                }
            }
            // guard against rounding leaving `chosen` on a zero-weight tail point
            if nearest[chosen] == 0.0 {
                chosen = nearest.iter().rposition(|&w| w > 0.0).unwrap();
            }
            chosen
        } else {
            // every point coincides with a centroid; duplicates get repaired in Lloyd
            ((u * n as f64) as usize).min(n - 1)
        };
        let c = points[pick].clone();
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn nearest_centroid(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(p, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, config: &KMeansConfig) -> KMeansFit {
    let k = centroids.len();
    let mut assignment = vec![0usize; points.len()];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        for (a, p) in assignment.iter_mut().zip(points) {
            *a = nearest_centroid(p, &centroids);
        }
        repair_empty(points, &mut assignment, &centroids, k);

        let labels: Vec<i32> = assignment.iter().map(|&a| a as i32).collect();
        let next = member_means(points, &labels, k);
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        trace.push(within_cluster_ss(points, &labels, &centroids));
        if shift < config.tolerance {
            converged = true;
            break;
        }
    }

    if config.refine {
        transfer_refine(points, &mut assignment, &mut centroids, &mut trace);
    }

    KMeansFit {
        wcss: *trace.last().unwrap_or(&0.0),
        assignment,
        centroids,
        iterations,
        converged,
        trace,
    }
}

/// Single-point transfers (Hartigan): move a point to another cluster whenever that
/// lowers WCSS once both centroids are updated. Stops when no move improves; the
/// result is also a Lloyd fixed point. Each accepted move appends to `trace`.
fn transfer_refine(points: &[Vec<f64>], assignment: &mut [usize], centroids: &mut [Vec<f64>], trace: &mut Vec<f64>) {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &a in assignment.iter() {
        sizes[a] += 1;
    }
    loop {
        let mut moved = false;
        for (i, p) in points.iter().enumerate() {
            let from = assignment[i];
            if sizes[from] < 2 {
                continue;
            }
            let n_from = sizes[from] as f64;
            let removal = n_from / (n_from - 1.0) * squared_distance(p, &centroids[from]);
            let mut best: Option<(usize, f64)> = None;
            for to in (0..k).filter(|&c| c != from) {
                let n_to = sizes[to] as f64;
                let gain = removal - n_to / (n_to + 1.0) * squared_distance(p, &centroids[to]);
                if gain > 1e-12 * (1.0 + removal) && best.is_none_or(|(_, g)| gain > g) {
                    best = Some((to, gain));
                }
            }
            let Some((to, _)) = best else { continue };
            let (n_from, n_to) = (sizes[from] as f64, sizes[to] as f64);
            for (d, &x) in p.iter().enumerate() {
                centroids[from][d] = (centroids[from][d] * n_from - x) / (n_from - 1.0);
                centroids[to][d] = (centroids[to][d] * n_to + x) / (n_to + 1.0);
            }
            sizes[from] -= 1;
            sizes[to] += 1;
            assignment[i] = to;
            moved = true;
        }
        if !moved {
            break;
        }
        // recompute exactly so centroids stay the member means
        let labels: Vec<i32> = assignment.iter().map(|&a| a as i32).collect();
        let means = member_means(points, &labels, k);
        centroids.clone_from_slice(&means);
        trace.push(within_cluster_ss(points, &labels, centroids));
    }
}

/// Gives each empty cluster the point farthest from its current centroid, taken
/// from a cluster that keeps at least one member.
fn repair_empty(points: &[Vec<f64>], assignment: &mut [usize], centroids: &[Vec<f64>], k: usize) {
    let mut sizes = vec![0usize; k];
    for &a in assignment.iter() {
        sizes[a] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            let a = assignment[i];
            if sizes[a] < 2 {
                continue;
            }
            let d = squared_distance(p, &centroids[a]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let i = far.expect("k <= n leaves a cluster with two or more members");
        sizes[assignment[i]] -= 1;
        assignment[i] = empty;
        sizes[empty] = 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn symmetric_pairs_split() {
        let p = pts(&[-1.05, -0.95, 0.95, 1.05]);
        let fit = kmeans_points(&p, 2, 7, &KMeansConfig::default()).unwrap();
        assert_eq!(fit.assignment[0], fit.assignment[1]);
        assert_eq!(fit.assignment[2], fit.assignment[3]);
        assert_ne!(fit.assignment[0], fit.assignment[2]);
        let left = &fit.centroids[fit.assignment[0]];
        let right = &fit.centroids[fit.assignment[2]];
        assert!((left[0] + 1.0).abs() < 1e-6);
        assert!((right[0] - 1.0).abs() < 1e-6);
        assert!(fit.converged);
    }

    #[test]
    fn k_equals_n_has_zero_wcss() {
        let p = pts(&[0.0, 3.0, -2.0, 8.5, 1.0]);
        let fit = kmeans_points(&p, 5, 1, &KMeansConfig::default()).unwrap();
        assert_eq!(fit.wcss, 0.0);
        let mut seen = fit.assignment.clone();
        seen.sort_unstable();
        assert_eq!(seen, [0, 1, 2, 3, 4]);
    }

    #[test]
    fn duplicates_trigger_empty_cluster_repair() {
        let p = pts(&[1.0, 1.0, 1.0, 1.0, 5.0]);
        let fit = kmeans_points(&p, 3, 3, &KMeansConfig::default()).unwrap();
        let mut sizes = [0; 3];
        fit.assignment.iter().for_each(|&a| sizes[a] += 1);
        assert!(sizes.iter().all(|&s| s > 0), "{sizes:?}");
        assert_eq!(fit.wcss, 0.0);
    }

    #[test]
    fn k_out_of_range() {
        let p = pts(&[0.0, 1.0, 2.0]);
        for k in [0, 1, 4] {
            let err = kmeans_points(&p, k, 0, &KMeansConfig::default()).unwrap_err();
            assert!(matches!(err, Error::Parameter { name: "k", .. }));
        }
    }

    #[test]
    fn same_seed_bit_identical() {
        let p: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64 * 0.37).sin() * 3.0, (i as f64 * 1.3).cos()])
            .collect();
        let a = kmeans_points(&p, 4, 99, &KMeansConfig::default()).unwrap();
        let b = kmeans_points(&p, 4, 99, &KMeansConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.wcss.to_bits(), b.wcss.to_bits());
    }
}
