//! Clustering evaluation: accuracy under the best label bijection and
//! normalized mutual information.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub acc: f64,
    pub nmi: f64,
    /// `mapping[p]` is the truth label matched to predicted label `p`.
    pub mapping: Vec<usize>,
}

/// Minimum-cost perfect assignment on a square cost matrix.
///
/// Returns `(assignment, cost)` where row `i` is assigned column
/// `assignment[i]`. Among optimal assignments the lexicographically smallest
/// one is returned.
pub fn hungarian<T: Scalar>(cost: ArrayView2<'_, T>) -> Result<(Vec<usize>, T)> {
    let n = cost.nrows();
    if cost.ncols() != n {
        return Err(Error::DimensionMismatch(format!("cost matrix is {}x{}", n, cost.ncols())));
    }
    for ((i, j), v) in cost.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row: i, col: j });
        }
    }
    if n == 0 {
        return Ok((Vec::new(), T::zero()));
    }
    let (_, best) = solve_assignment(cost);
    let scale = cost.iter().fold(T::one(), |acc, v| acc.max(v.abs())) * T::lit(n as f64);
    let tol = T::tol(1e-12) * scale;

    // Fix rows one at a time to the smallest column that keeps the optimum.
    let mut assignment = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let mut fixed_cost = T::zero();
    for row in 0..n {
        let rest_rows: Vec<usize> = ((row + 1)..n).collect();
        let mut chosen = None;
        for col in 0..n {
            if used[col] {
                continue;
            }
            let rest_cols: Vec<usize> = (0..n).filter(|&c| !used[c] && c != col).collect();
            let sub = Array2::from_shape_fn((rest_rows.len(), rest_cols.len()), |(i, j)| {
                cost[[rest_rows[i], rest_cols[j]]]
            });
            let (_, sub_cost) = solve_assignment(sub.view());
            let total = fixed_cost + cost[[row, col]] + sub_cost;
            if (total - best).abs() <= tol {
                chosen = Some(col);
                break;
            }
        }
        let col = chosen.ok_or_else(|| Error::Invariant("assignment tie-break lost the optimum".into()))?;
        assignment[row] = col;
        used[col] = true;
        fixed_cost += cost[[row, col]];
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
    Ok((assignment, total))
}

// O(n^3) shortest augmenting path with row/column potentials.
fn solve_assignment<T: Scalar>(cost: ArrayView2<'_, T>) -> (Vec<usize>, T) {
    let n = cost.nrows();
    if n == 0 {
        return (Vec::new(), T::zero());
    }
    let inf = T::infinity();
    // 1-based with a virtual column 0.
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
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
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
    (assignment, total)
}

fn check_lengths(pred: &ClusterAssignment, truth: &ClusterAssignment) -> Result<()> {
    if pred.labels.len() != truth.labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predicted labels vs {} truth labels",
            pred.labels.len(),
            truth.labels.len()
        )));
    }
    if pred.labels.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate an empty labeling".into()));
    }
    Ok(())
}

fn contingency(pred: &ClusterAssignment, truth: &ClusterAssignment, size: usize) -> Array2<f64> {
    let mut table = Array2::<f64>::zeros((size, size));
    for (&p, &t) in pred.labels.iter().zip(&truth.labels) {
        table[[p, t]] += 1.0;
    }
    table
}

fn alphabet(pred: &ClusterAssignment, truth: &ClusterAssignment) -> usize {
    let seen = pred.labels.iter().chain(&truth.labels).max().map_or(0, |m| m + 1);
    pred.k.max(truth.k).max(seen)
}

fn best_mapping(pred: &ClusterAssignment, truth: &ClusterAssignment) -> Result<(Vec<usize>, f64)> {
    check_lengths(pred, truth)?;
    let size = alphabet(pred, truth);
    let table = contingency(pred, truth, size);
    let (mapping, neg_matches) = hungarian(table.mapv(|c| -c).view())?;
    Ok((mapping, -neg_matches / pred.labels.len() as f64))
}

/// Fraction of items whose predicted label maps onto the true label under
/// the best one-to-one relabeling.
pub fn accuracy(pred: &ClusterAssignment, truth: &ClusterAssignment) -> Result<f64> {
    best_mapping(pred, truth).map(|(_, acc)| acc)
}

/// `I(X, Y) / sqrt(H(X) H(Y))` with natural-log entropies; zero when either
/// labeling has zero entropy.
pub fn nmi(pred: &ClusterAssignment, truth: &ClusterAssignment) -> Result<f64> {
    check_lengths(pred, truth)?;
    let size = alphabet(pred, truth);
    let table = contingency(pred, truth, size);
    let total = pred.labels.len() as f64;
    let rows: Vec<f64> = table.rows().into_iter().map(|r| r.sum() / total).collect();
    let cols: Vec<f64> = table.columns().into_iter().map(|c| c.sum() / total).collect();
    let entropy = |ps: &[f64]| -> f64 { ps.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum() };
    let hx = entropy(&rows);
    let hy = entropy(&cols);
    if hx * hy <= 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for ((i, j), &c) in table.indexed_iter() {
        if c > 0.0 {
            let pij = c / total;
            mi += pij * (pij / (rows[i] * cols[j])).ln();
        }
    }
    Ok((mi / (hx * hy).sqrt()).clamp(0.0, 1.0))
}

pub fn evaluate(pred: &ClusterAssignment, truth: &ClusterAssignment) -> Result<EvalResult> {
    let (mapping, acc) = best_mapping(pred, truth)?;
    Ok(EvalResult { acc, nmi: nmi(pred, truth)?, mapping })
}
