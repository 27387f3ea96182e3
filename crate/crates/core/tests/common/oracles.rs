//! Brute-force reference implementations. Deliberately independent of the library's
//! algorithms: exhaustive enumeration, union-find closure, and direct pair counting.

#![allow(dead_code)]

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// WCSS of a labeling with centroids recomputed as member means.
pub fn partition_wcss(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let dim = points[0].len();
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<&Vec<f64>> = points.iter().zip(labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
        if members.is_empty() {
            continue;
        }
        let mean: Vec<f64> = (0..dim).map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64).collect();
        total += members.iter().map(|p| sq(p, &mean)).sum::<f64>();
    }
    total
}

/// Minimum WCSS over every partition of the points into exactly `k` non-empty blocks
/// (restricted growth strings).
pub fn best_partition_wcss(points: &[Vec<f64>], k: usize) -> f64 {
    fn rec(i: usize, used: usize, labels: &mut Vec<usize>, points: &[Vec<f64>], k: usize, best: &mut f64) {
        let n = points.len();
        if n - i < k - used {
            return;
        }
        if i == n {
            if used == k {
                *best = best.min(partition_wcss(points, labels, k));
            }
            return;
        }
        for c in 0..=used.min(k - 1) {
            labels.push(c);
            rec(i + 1, used.max(c + 1), labels, points, k, best);
            labels.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(0, 0, &mut Vec::new(), points, k, &mut best);
    best
}

fn find(parent: &mut Vec<usize>, x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

/// Density-connectivity by closure: cores are points with at least `min_pts` points
/// in their closed eps-ball; core components are connected parts of the eps-graph on
/// cores; components are numbered by their smallest core index; a non-core point
/// within eps of a core joins the lowest-numbered such component, else it is noise.
pub fn dbscan_oracle(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<i32> {
    let n = points.len();
    let near = |i: usize, j: usize| sq(&points[i], &points[j]) <= eps * eps;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in 0..n {
            if core[i] && core[j] && near(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    // number components by their smallest core member
    let mut comp_id = vec![-1i32; n];
    let mut next = 0;
    for i in 0..n {
        if core[i] {
            let r = find(&mut parent, i);
            if comp_id[r] < 0 {
                comp_id[r] = next;
                next += 1;
            }
        }
    }
    (0..n)
        .map(|i| {
            if core[i] {
                comp_id[find(&mut parent, i)]
            } else {
                (0..n)
                    .filter(|&j| core[j] && near(i, j))
                    .map(|j| comp_id[find(&mut parent, j)])
                    .min()
                    .unwrap_or(-1)
            }
        })
        .collect()
}

/// Non-core points within eps of cores from two or more different components.
pub fn ambiguous_border_points(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<usize> {
    let labels = dbscan_oracle(points, eps, min_pts);
    let n = points.len();
    let near = |i: usize, j: usize| sq(&points[i], &points[j]) <= eps * eps;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
    (0..n)
        .filter(|&i| !core[i])
        .filter(|&i| {
            let mut comps: Vec<i32> = (0..n).filter(|&j| core[j] && near(i, j)).map(|j| labels[j]).collect();
            comps.sort_unstable();
            comps.dedup();
            comps.len() > 1
        })
        .collect()
}

/// All permutations in lexicographic order; returns the first one whose cost is within
/// `1e-9 * max(1, |min|)` of the minimum.
pub fn assignment_oracle(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    let mut perms = Vec::new();
    fn rec(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for c in 0..n {
            if !prefix.contains(&c) {
                prefix.push(c);
                rec(prefix, n, out);
                prefix.pop();
            }
        }
    }
    rec(&mut Vec::new(), n, &mut perms);
    let total = |p: &[usize]| p.iter().enumerate().map(|(r, &c)| cost[r][c]).sum::<f64>();
    let min = perms.iter().map(|p| total(p)).fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * min.abs().max(1.0);
    let best = perms.into_iter().find(|p| total(p) <= min + tol).unwrap();
    let c = total(&best);
    (best, c)
}

/// Adjusted Rand index by counting every pair of items directly (Hubert-Arabie form).
pub fn ari_pair_counting(a: &[i32], b: &[i32]) -> f64 {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut neither) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in i + 1..n {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let denom = (neither + only_b) * (only_b + both) + (neither + only_a) * (only_a + both);
    if denom == 0.0 {
        return 1.0;
    }
    2.0 * (neither * both - only_a * only_b) / denom
}

/// Deterministic xorshift stream for generating test instances without the
/// library's RNG stack.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        lo + (self.next_u64() % (hi_inclusive - lo + 1) as u64) as usize
    }

    pub fn points(&mut self, n: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..dim).map(|_| (self.unit() * 2.0 - 1.0) * scale).collect()).collect()
    }
}
