mod common;

use chrono::NaiveDate;
use common::oracles::*;
use common::FIXTURE_T1;
use seglab_core::cluster::{
    cluster_stats, dbscan_points, kmeans, kmeans_points, ClusterModel, ClusterParams, KMeansConfig,
};
use seglab_core::explain::characterize_clusters;
use seglab_core::features::{derive_features, standardize, Feature, FeatureMatrix, FeatureSelection};
use seglab_core::ingest::{flag_outliers, parse_transactions, FilterSpec, Schema};
use seglab_core::label::solve_assignment;
use seglab_core::store::adjusted_rand_index;

fn t1_matrix() -> FeatureMatrix {
    let txns = parse_transactions(FIXTURE_T1.as_bytes(), &Schema::default()).unwrap().transactions;
    let window = FilterSpec::window(
        NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
        NaiveDate::from_ymd_opt(2024, 3, 10).unwrap(),
    )
    .unwrap();
    let selection = FeatureSelection::new(Feature::ALL.to_vec()).unwrap();
    standardize(derive_features(&txns, &selection, &window).unwrap())
}

#[test]
fn kmeans_on_fixture_matches_exhaustive_optimum() {
    let m = t1_matrix();
    let model = kmeans(&m, 2, 11).unwrap();
    let best = best_partition_wcss(m.standardized().unwrap(), 2);
    assert!(model.wcss <= best + 1e-9, "{} > {}", model.wcss, best);
}

#[test]
fn kmeans_matches_exhaustive_optimum_on_random_instances() {
    let mut rng = Lcg(0x5EED_0001);
    for case in 0..200 {
        let n = rng.range(3, 8);
        let k = rng.range(2, 3.min(n));
        let dim = rng.range(1, 3);
        let points = rng.points(n, dim, 3.0);
        let fit = kmeans_points(&points, k, case, &KMeansConfig::default()).unwrap();
        let best = best_partition_wcss(&points, k);
        assert!(fit.wcss <= best + 1e-9, "case {case}: {} > {best}", fit.wcss);
    }
}

#[test]
fn kmeans_wcss_matches_recomputation() {
    let mut rng = Lcg(77);
    for seed in 0..20 {
        let points = rng.points(15, 2, 5.0);
        let fit = kmeans_points(&points, 3, seed, &KMeansConfig::default()).unwrap();
        let recomputed = partition_wcss(&points, &fit.assignment, 3);
        assert!((fit.wcss - recomputed).abs() < 1e-6);
    }
}

#[test]
fn dbscan_matches_closure_oracle() {
    let mut rng = Lcg(0xDB5C_A4);
    for case in 0..300 {
        let n = rng.range(1, 20);
        let dim = rng.range(1, 3);
        let points = rng.points(n, dim, 2.0);
        let eps = 0.2 + rng.unit();
        let min_pts = rng.range(1, 5);
        let got = dbscan_points(&points, eps, min_pts).unwrap();
        assert_eq!(got, dbscan_oracle(&points, eps, min_pts), "case {case}");
    }
}

#[test]
fn dbscan_spec_examples() {
    let chain = vec![vec![0.0], vec![1.0], vec![2.0]];
    assert_eq!(dbscan_oracle(&chain, 1.5, 2), vec![0, 0, 0]);
    assert_eq!(dbscan_points(&chain, 1.5, 2).unwrap(), vec![0, 0, 0]);
}

#[test]
fn assignment_matches_permutation_enumeration() {
    let mut rng = Lcg(0xA551);
    for case in 0..300 {
        let n = rng.range(1, 7);
        let integer = case % 3 == 0;
        let cost: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| if integer { rng.range(0, 3) as f64 } else { rng.unit() * 10.0 })
                    .collect()
            })
            .collect();
        let (got, total) = solve_assignment(&cost).unwrap();
        let (want, want_total) = assignment_oracle(&cost);
        assert!((total - want_total).abs() < 1e-9, "case {case}");
        assert_eq!(got, want, "case {case}: {cost:?}");
    }
}

#[test]
fn worked_assignment_examples_match_oracle() {
    for cost in [
        vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        vec![vec![1.0, 2.0], vec![2.0, 1.0]],
        vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]],
    ] {
        assert_eq!(solve_assignment(&cost).unwrap(), assignment_oracle(&cost));
    }
    assert_eq!(
        assignment_oracle(&[vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]]),
        (vec![1, 0, 2], 5.0)
    );
}

#[test]
fn ari_matches_pair_counting() {
    let mut rng = Lcg(0xA21);
    for case in 0..200 {
        let n = rng.range(2, 12);
        let ka = rng.range(1, 4);
        let kb = rng.range(1, 4);
        let a: Vec<i32> = (0..n).map(|_| rng.range(0, ka - 1) as i32).collect();
        let b: Vec<i32> = (0..n).map(|_| rng.range(0, kb - 1) as i32).collect();
        let got = adjusted_rand_index(&a, &b);
        let want = ari_pair_counting(&a, &b);
        assert!((got - want).abs() < 1e-9, "case {case}: {a:?} {b:?} {got} vs {want}");
    }
    assert!((ari_pair_counting(&[0, 0, 1, 1], &[0, 1, 0, 1]) + 0.5).abs() < 1e-12);
}

#[test]
fn outliers_match_full_scan() {
    let m = t1_matrix();
    let z = m.standardized().unwrap();
    let flagged = flag_outliers(&m, 0.5).unwrap();
    let mut scan = Vec::new();
    for (i, row) in z.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v.abs() > 0.5 {
                scan.push((m.customers[i].clone(), m.features[j], v));
            }
        }
    }
    assert_eq!(flagged.len(), scan.len());
    for o in &flagged {
        assert!(scan.iter().any(|(c, f, v)| *c == o.customer_id && *f == o.feature && *v == o.z_value));
    }
    assert!(flagged.windows(2).all(|w| w[0].z_value.abs() >= w[1].z_value.abs()));
}

#[test]
fn outlier_threshold_examples() {
    let base = FeatureMatrix::from_rows(
        vec!["a".into(), "b".into()],
        vec![Feature::Profit, Feature::VolumeTons],
        vec![vec![0.0, 0.0], vec![0.0, 0.0]],
    )
    .unwrap();
    let mut small = standardize(base.clone());
    small.standardization.as_mut().unwrap().values = vec![vec![0.9, -1.0], vec![0.3, 0.0]];
    assert!(flag_outliers(&small, 3.0).unwrap().is_empty());

    let mut one = standardize(base);
    one.standardization.as_mut().unwrap().values = vec![vec![0.9, 4.2], vec![0.3, 0.0]];
    let hits = flag_outliers(&one, 3.0).unwrap();
    assert_eq!(hits.len(), 1);
    assert_eq!((hits[0].customer_id.as_str(), hits[0].feature, hits[0].z_value), ("a", Feature::VolumeTons, 4.2));
    assert!(flag_outliers(&one, 0.0).is_err());
}

#[test]
fn zero_threshold_rules_match_scan() {
    let m = t1_matrix();
    let model = kmeans(&m, 2, 5).unwrap();
    let stats = cluster_stats(&model, &m).unwrap();
    let rules = characterize_clusters(&model, &stats, 0.0).unwrap();
    for (c, centroid) in model.centroids.iter().enumerate() {
        let non_zero = centroid.iter().filter(|&&z| z != 0.0).count();
        assert_eq!(rules.clusters[c].rules.len(), non_zero);
    }
}

#[test]
fn fixture_profit_share_for_split() {
    let m = t1_matrix();
    let z = m.standardized().unwrap();
    let assignment = vec![0, 1, 1];
    let centroids = (0..2)
        .map(|c| {
            let members: Vec<&Vec<f64>> = z.iter().zip(&assignment).filter(|(_, &a)| a == c).map(|(p, _)| p).collect();
            (0..m.features.len())
                .map(|j| members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64)
                .collect()
        })
        .collect();
    let model = ClusterModel {
        params: ClusterParams::Kmeans { k: 2, seed: 0 },
        customers: m.customers.clone(),
        assignment,
        centroids,
        iterations_run: 0,
        converged: true,
        wcss: 0.0,
    };
    let stats = cluster_stats(&model, &m).unwrap();
    assert!((stats.clusters[0].profit_share - 120.0 / 145.0).abs() < 1e-12);
    assert_eq!(stats.clusters.iter().map(|c| c.size).sum::<usize>() + stats.noise_size, 3);
}
