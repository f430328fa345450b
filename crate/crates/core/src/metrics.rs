//! Evaluation metrics: OSPA with an exact assignment solver, agent position
//! RMSE and cardinality statistics.

use serde::{Deserialize, Serialize};

/// OSPA cutoff (m) and order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OspaParams {
    pub cutoff: f64,
    pub order: f64,
}

impl Default for OspaParams {
    fn default() -> Self {
        Self {
            cutoff: 20.0,
            order: 1.0,
        }
    }
}

/// OSPA value together with its localization and cardinality parts, which add up
/// to the total for order 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OspaBreakdown {
    pub total: f64,
    pub localization: f64,
    pub cardinality: f64,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Minimum-cost assignment of every row to a distinct column (rows ≤ columns).
/// Returns the column chosen for each row and the total cost.
pub fn hungarian(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let m = cost[0].len();
    assert!(n <= m, "assignment needs rows <= columns");
    // Shortest augmenting path with row/column potentials, 1-based sentinels.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut col_row = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        col_row[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=m {
        if col_row[j] != 0 {
            assignment[col_row[j] - 1] = j - 1;
        }
    }
    let total = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .sum();
    (assignment, total)
}

/// OSPA between two position sets with its decomposition.
pub fn ospa_breakdown(x: &[[f64; 2]], y: &[[f64; 2]], params: OspaParams) -> OspaBreakdown {
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let (m, n) = (small.len(), large.len());
    if n == 0 {
        return OspaBreakdown {
            total: 0.0,
            localization: 0.0,
            cardinality: 0.0,
        };
    }
    let c = params.cutoff;
    let p = params.order;
    let cost: Vec<Vec<f64>> = small
        .iter()
        .map(|a| large.iter().map(|b| dist(*a, *b).min(c).powf(p)).collect())
        .collect();
    let (_, loc) = hungarian(&cost);
    let card = c.powf(p) * (n - m) as f64;
    let nf = n as f64;
    OspaBreakdown {
        total: ((loc + card) / nf).powf(1.0 / p),
        localization: loc / nf,
        cardinality: card / nf,
    }
}

pub fn ospa(x: &[[f64; 2]], y: &[[f64; 2]], params: OspaParams) -> f64 {
    ospa_breakdown(x, y, params).total
}

/// Squared position errors of the selected agents at one step.
pub fn agent_squared_errors(
    truth: &[[f64; 2]],
    estimates: &[[f64; 2]],
    include: &[usize],
) -> Vec<f64> {
    include
        .iter()
        .map(|&i| {
            let d = dist(truth[i], estimates[i]);
            d * d
        })
        .collect()
}

/// Root of the mean of squared errors (0 for an empty slice).
pub fn rmse(squared_errors: &[f64]) -> f64 {
    if squared_errors.is_empty() {
        return 0.0;
    }
    (squared_errors.iter().sum::<f64>() / squared_errors.len() as f64).sqrt()
}

/// Position RMSE over the selected agents at one step.
pub fn agent_rmse(truth: &[[f64; 2]], estimates: &[[f64; 2]], include: &[usize]) -> f64 {
    rmse(&agent_squared_errors(truth, estimates, include))
}

/// Sample mean and standard deviation (n − 1 denominator; 0 for a single value).
pub fn cardinality_stats(counts: &[f64]) -> (f64, f64) {
    let n = counts.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = counts.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ospa_examples() {
        let p = OspaParams::default();
        assert_eq!(ospa(&[], &[], p), 0.0);
        assert_eq!(ospa(&[], &[[1.0, 1.0]], p), 20.0);
        assert!((ospa(&[[0.0, 0.0]], &[[3.0, 4.0]], p) - 5.0).abs() < 1e-15);
        let set = [[1.0, 2.0], [5.0, -3.0]];
        assert_eq!(ospa(&set, &set, p), 0.0);
    }

    #[test]
    fn breakdown_adds_up() {
        let b = ospa_breakdown(
            &[[0.0, 0.0]],
            &[[3.0, 4.0], [100.0, 0.0]],
            OspaParams::default(),
        );
        assert!((b.localization + b.cardinality - b.total).abs() < 1e-12);
        assert!((b.total - 12.5).abs() < 1e-12);
    }

    #[test]
    fn hungarian_beats_greedy() {
        // greedy picks (0,0)=1 then (1,1)=10; optimum is 2 + 2
        let cost = vec![vec![1.0, 2.0], vec![2.0, 10.0]];
        let (a, total) = hungarian(&cost);
        assert_eq!(a, vec![1, 0]);
        assert_eq!(total, 4.0);
    }

    #[test]
    fn rmse_examples() {
        let truth = [[0.0, 0.0], [10.0, 10.0]];
        assert_eq!(agent_rmse(&truth, &truth, &[0, 1]), 0.0);
        let est = [[3.0, 4.0], [0.0, 0.0]];
        assert!((agent_rmse(&truth, &est, &[0]) - 5.0).abs() < 1e-15);
        // the second agent is excluded
        assert_eq!(agent_rmse(&truth, &[[0.0, 0.0], [0.0, 0.0]], &[0]), 0.0);
    }

    #[test]
    fn cardinality_examples() {
        assert_eq!(cardinality_stats(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        assert_eq!(cardinality_stats(&[1.0, 3.0]).0, 2.0);
    }
}
