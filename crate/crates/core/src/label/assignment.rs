use serde::{Deserialize, Serialize};

use super::cost::{label_cost, validate_specs, LabelSpec};
use crate::features::Feature;
use crate::{Error, Result};

/// Optimal bijection between clusters and label specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAssignment {
    /// Label name per cluster index.
    pub labels: Vec<String>,
    /// Position in the submitted spec list per cluster index.
    pub spec_index: Vec<usize>,
    /// `cost_matrix[cluster][spec]`.
    pub cost_matrix: Vec<Vec<f64>>,
    pub total_cost: f64,
    pub cluster_costs: Vec<f64>,
    pub specs: Vec<LabelSpec>,
}

/// Minimum-cost bijection from clusters (rows of `centroids`) to `specs`.
pub fn assign_labels(centroids: &[Vec<f64>], features: &[Feature], specs: &[LabelSpec]) -> Result<LabelAssignment> {
    if specs.len() != centroids.len() {
        return Err(Error::validation(
            "label_specs",
            format!(
                "model has {} clusters but {} label specs were given; add or remove labels so the counts match",
                centroids.len(),
                specs.len()
            ),
        ));
    }
    validate_specs(specs, features)?;
    let cost_matrix = centroids
        .iter()
        .map(|c| specs.iter().map(|s| label_cost(c, features, s)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let (spec_index, _) = solve_assignment(&cost_matrix)?;
    let cluster_costs: Vec<f64> = spec_index.iter().enumerate().map(|(c, &s)| cost_matrix[c][s]).collect();
    Ok(LabelAssignment {
        labels: spec_index.iter().map(|&s| specs[s].label_name.clone()).collect(),
        spec_index,
        total_cost: cluster_costs.iter().sum(),
        cluster_costs,
        cost_matrix,
        specs: specs.to_vec(),
    })
}

/// Solves the square linear assignment problem exactly. Returns the column chosen for
/// each row and the total cost. Among optimal solutions the lexicographically smallest
/// row-to-column vector is returned (costs within `1e-9 * max(1, |optimum|)` tie).
pub fn solve_assignment(cost: &[Vec<f64>]) -> Result<(Vec<usize>, f64)> {
    let n = cost.len();
    if cost.iter().any(|row| row.len() != n) {
        return Err(Error::Parameter {
            name: "cost",
            message: "cost matrix must be square".into(),
        });
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Parameter {
            name: "cost",
            message: "cost matrix entries must be finite".into(),
        });
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }

    let optimum = hungarian(cost).1;
    let tolerance = 1e-9 * optimum.abs().max(1.0);

    // Fix rows one at a time to the smallest column that still admits an optimum.
    let mut rows: Vec<usize> = (0..n).collect();
    let mut cols: Vec<usize> = (0..n).collect();
    let mut fixed_cost = 0.0;
    let mut result = vec![0; n];
    while let Some(&row) = rows.first() {
        let rest_rows = &rows[1..];
        let mut chosen = None;
        for (ci, &col) in cols.iter().enumerate() {
            let rest_cols: Vec<usize> = cols.iter().enumerate().filter(|&(i, _)| i != ci).map(|(_, &c)| c).collect();
            let sub: Vec<Vec<f64>> = rest_rows
                .iter()
                .map(|&r| rest_cols.iter().map(|&c| cost[r][c]).collect())
                .collect();
            let total = fixed_cost + cost[row][col] + hungarian(&sub).1;
            if total <= optimum + tolerance {
                chosen = Some(ci);
                break;
            }
        }
        // the optimal column of this row always qualifies
        let ci = chosen.expect("an optimal completion exists");
        let col = cols.remove(ci);
        fixed_cost += cost[row][col];
        result[row] = col;
        rows.remove(0);
    }
    let total = result.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
    Ok((result, total))
}

/// Shortest augmenting path Hungarian method with row/column potentials, O(n^3).
fn hungarian(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    // 1-based: index 0 is the virtual column used to start each augmentation
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        row_to_col[matched_row[j] - 1] = j - 1;
    }
    let total = row_to_col.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
    (row_to_col, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Level;

    fn m(rows: &[&[f64]]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn zero_diagonal() {
        assert_eq!(solve_assignment(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap(), (vec![0, 1], 0.0));
    }

    #[test]
    fn two_by_two_diagonal() {
        assert_eq!(solve_assignment(&m(&[&[1.0, 2.0], &[2.0, 1.0]])).unwrap(), (vec![0, 1], 2.0));
    }

    #[test]
    fn three_by_three_worked_example() {
        let cost = m(&[&[4.0, 1.0, 3.0], &[2.0, 0.0, 5.0], &[3.0, 2.0, 2.0]]);
        assert_eq!(solve_assignment(&cost).unwrap(), (vec![1, 0, 2], 5.0));
    }

    #[test]
    fn ties_take_lexicographically_smallest() {
        let flat = m(&[&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]]);
        assert_eq!(solve_assignment(&flat).unwrap().0, vec![0, 1, 2]);
        // [1, 0, 2] and [1, 2, 0] are both optimal
        let cost = m(&[&[5.0, 0.0, 5.0], &[0.0, 5.0, 0.0], &[0.0, 5.0, 0.0]]);
        assert_eq!(solve_assignment(&cost).unwrap(), (vec![1, 0, 2], 0.0));
    }

    #[test]
    fn non_square_rejected() {
        assert!(solve_assignment(&m(&[&[1.0, 2.0]])).is_err());
        assert!(solve_assignment(&m(&[&[f64::NAN]])).is_err());
    }

    #[test]
    fn labels_follow_centroids() {
        let features = [Feature::Profit, Feature::VolumeTons];
        let specs = vec![
            LabelSpec::new("Strategic", [(Feature::Profit, Level::High), (Feature::VolumeTons, Level::VeryHigh)]),
            LabelSpec::new("Developing", [(Feature::Profit, Level::Moderate), (Feature::VolumeTons, Level::Moderate)]),
        ];
        let centroids = vec![vec![-0.1, 0.05], vec![0.6, 1.3]];
        let a = assign_labels(&centroids, &features, &specs).unwrap();
        assert_eq!(a.labels, ["Developing", "Strategic"]);
        assert_eq!(a.spec_index, [1, 0]);
        assert!((a.total_cost - (0.15 + 0.08 + 0.02)).abs() < 1e-12);
        assert!((a.total_cost - a.cluster_costs.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn count_mismatch_mentions_counts() {
        let features = [Feature::Profit, Feature::VolumeTons];
        let specs: Vec<LabelSpec> = ["A", "B", "C"].iter().map(|n| LabelSpec::new(*n, [])).collect();
        let err = assign_labels(&[vec![0.0, 0.0], vec![1.0, 1.0]], &features, &specs).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2 clusters") && msg.contains("3 label specs"), "{msg}");
    }
}
