//! Why is a customer in its segment? Local surrogate explanations of cluster
//! membership and threshold rules describing each cluster's defining features.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cluster::{squared_distance, ClusterModel, ClusterStats, NOISE};
use crate::features::{Feature, FeatureMatrix};
use crate::{Error, Result};

pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_PERTURBATION: f64 = 0.5;
pub const DEFAULT_TOP: usize = 3;
pub const DEFAULT_RULE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub n_samples: usize,
    /// Defaults to `0.75 * sqrt(d)` over the non-constant features.
    pub kernel_width: Option<f64>,
    pub seed: u64,
    /// Standard deviation of the perturbations in standardized units.
    pub perturbation: f64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            n_samples: DEFAULT_SAMPLES,
            kernel_width: None,
            seed: 0,
            perturbation: DEFAULT_PERTURBATION,
        }
    }
}

/// Weighted linear surrogate fit around one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateFit {
    /// Slope per feature, in standardized units. Constant features get 0.
    pub coefficients: Vec<f64>,
    /// Surrogate prediction at the explained point.
    pub intercept: f64,
    /// Weighted coefficient of determination of the fit.
    pub fidelity: f64,
    pub kernel_width: f64,
    /// Fraction of (weighted) samples that kept the target membership.
    pub target_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub customer_id: String,
    pub cluster: usize,
    pub features: Vec<Feature>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub fidelity: f64,
    pub n_samples: usize,
    pub kernel_width: f64,
    pub seed: u64,
}

impl Explanation {
    /// The `m` features with the largest absolute coefficient, largest first.
    pub fn top(&self, m: usize) -> Vec<(Feature, f64)> {
        let mut pairs: Vec<(Feature, f64)> = self.features.iter().copied().zip(self.coefficients.iter().copied()).collect();
        pairs.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
        pairs.truncate(m);
        pairs
    }
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best.0
}

/// Explains one customer's membership. Noise customers are explained against their
/// nearest cluster.
pub fn explain_instance(
    model: &ClusterModel,
    matrix: &FeatureMatrix,
    customer_id: &str,
    config: &ExplainConfig,
) -> Result<Explanation> {
    model.check_matrix(matrix)?;
    let row = matrix
        .customer_index(customer_id)
        .ok_or_else(|| Error::NotFound(format!("customer `{customer_id}`")))?;
    if model.cluster_count() < 2 {
        return Err(Error::ExplanationUndefined(format!(
            "model has {} cluster(s); membership needs at least 2 to contrast",
            model.cluster_count()
        )));
    }
    let z = matrix.standardized()?;
    let point = &z[row];
    let cluster = match model.assignment[row] {
        NOISE => nearest(point, &model.centroids),
        c => c as usize,
    };
    let active: Vec<bool> = match &matrix.standardization {
        Some(s) => s.constant.iter().map(|c| !c).collect(),
        None => vec![true; matrix.features.len()],
    };
    let fit = explain_point(point, &model.centroids, cluster, &active, config)?;
    Ok(Explanation {
        customer_id: customer_id.to_string(),
        cluster,
        features: matrix.features.clone(),
        coefficients: fit.coefficients,
        intercept: fit.intercept,
        fidelity: fit.fidelity,
        n_samples: config.n_samples,
        kernel_width: fit.kernel_width,
        seed: config.seed,
    })
}

/// Perturbs `point` along the `active` features, labels each sample 1 when its
/// nearest centroid is `target`, weights samples with `exp(-d^2 / width^2)` and fits
/// weighted least squares on the offsets from `point`.
pub fn explain_point(
    point: &[f64],
    centroids: &[Vec<f64>],
    target: usize,
    active: &[bool],
    config: &ExplainConfig,
) -> Result<SurrogateFit> {
    if centroids.len() < 2 {
        return Err(Error::ExplanationUndefined("fewer than 2 clusters".into()));
    }
    if config.n_samples == 0 || !(config.perturbation > 0.0) {
        return Err(Error::Parameter {
            name: "config",
            message: "n_samples and perturbation must be positive".into(),
        });
    }
    let cols: Vec<usize> = (0..point.len()).filter(|&j| active[j]).collect();
    let width = match config.kernel_width {
        Some(w) if w > 0.0 => w,
        Some(w) => {
            return Err(Error::Parameter {
                name: "kernel_width",
                message: format!("must be positive, got {w}"),
            })
        }
        None => 0.75 * (cols.len().max(1) as f64).sqrt(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_samples;
    let p = cols.len() + 1;
    let mut design = DMatrix::<f64>::zeros(n, p);
    let mut y = DVector::<f64>::zeros(n);
    let mut w = DVector::<f64>::zeros(n);
    let mut sample = point.to_vec();
    for s in 0..n {
        design[(s, 0)] = 1.0;
        let mut d2 = 0.0;
        for (k, &j) in cols.iter().enumerate() {
            let draw: f64 = StandardNormal.sample(&mut rng);
            let offset = config.perturbation * draw;
            sample[j] = point[j] + offset;
            design[(s, k + 1)] = offset;
            d2 += offset * offset;
        }
        y[s] = if nearest(&sample, centroids) == target { 1.0 } else { 0.0 };
        w[s] = (-d2 / (width * width)).exp();
    }

    let mut weighted = design.clone();
    for (s, mut row) in weighted.row_iter_mut().enumerate() {
        row *= w[s];
    }
    let gram = design.transpose() * &weighted;
    let rhs = weighted.transpose() * &y;
    let beta = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::ExplanationUndefined(format!("surrogate fit failed: {e}")))?,
    };

    let w_sum = w.sum();
    let y_mean = w.dot(&y) / w_sum;
    let fitted = &design * &beta;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for s in 0..n {
        ss_res += w[s] * (y[s] - fitted[s]).powi(2);
        ss_tot += w[s] * (y[s] - y_mean).powi(2);
    }
    // a single-class neighbourhood is fit exactly by the intercept
    let single_class = y.iter().all(|&v| v == y[0]);
    let fidelity = if single_class || ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };

    let mut coefficients = vec![0.0; point.len()];
    if single_class {
        // the exact solution; the solver would only add rounding noise to the slopes
        return Ok(SurrogateFit {
            coefficients,
            intercept: y[0],
            fidelity,
            kernel_width: width,
            target_share: y_mean,
        });
    }
    for (k, &j) in cols.iter().enumerate() {
        coefficients[j] = beta[k + 1];
    }
    Ok(SurrogateFit {
        coefficients,
        intercept: beta[0],
        fidelity,
        kernel_width: width,
        target_share: y_mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub feature: Feature,
    pub direction: Direction,
    pub centroid_z: f64,
    pub cluster_mean: f64,
    pub global_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRules {
    pub cluster: usize,
    pub rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub threshold: f64,
    pub clusters: Vec<ClusterRules>,
}

/// One rule per feature whose centroid satisfies `|z| >= threshold` (and `z != 0`),
/// sorted by `|z|` descending.
pub fn characterize_clusters(model: &ClusterModel, stats: &ClusterStats, threshold: f64) -> Result<RuleSet> {
    if !(threshold >= 0.0) {
        return Err(Error::Parameter {
            name: "z_threshold",
            message: format!("must be >= 0, got {threshold}"),
        });
    }
    if stats.clusters.len() != model.cluster_count() {
        return Err(Error::Parameter {
            name: "stats",
            message: "stats were not computed for this model".into(),
        });
    }
    let clusters = stats
        .clusters
        .iter()
        .zip(&model.centroids)
        .map(|(summary, centroid)| {
            let mut rules: Vec<Rule> = summary
                .features
                .iter()
                .zip(centroid)
                .enumerate()
                .filter(|(_, (_, &z))| z != 0.0 && z.abs() >= threshold)
                .map(|(j, (f, &z))| Rule {
                    feature: f.feature,
                    direction: if z > 0.0 { Direction::High } else { Direction::Low },
                    centroid_z: z,
                    cluster_mean: f.mean,
                    global_mean: stats.global_means[j],
                })
                .collect();
            rules.sort_by(|a, b| b.centroid_z.abs().total_cmp(&a.centroid_z.abs()));
            ClusterRules {
                cluster: summary.index,
                rules,
            }
        })
        .collect();
    Ok(RuleSet { threshold, clusters })
}
