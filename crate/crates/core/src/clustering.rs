//! Discretization of relaxed indicator matrices and external clustering
//! metrics: accuracy under optimal assignment, normalized mutual
//! information, and the adjusted Rand index.

use crate::error::{Result, RimError};
use crate::matrix::DenseMatrix;
use serde::Serialize;

/// Row-wise argmax labels; ties go to the smallest column index.
pub fn discretize(f: &DenseMatrix) -> Vec<usize> {
    (0..f.rows())
        .map(|i| {
            let row = f.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn check_pair(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.is_empty() {
        return Err(RimError::InvalidValue("empty label vectors".into()));
    }
    if pred.len() != truth.len() {
        return Err(RimError::ShapeMismatch {
            expected: format!("{} labels", truth.len()),
            got: format!("{}", pred.len()),
            context: "clustering metrics",
        });
    }
    Ok(())
}

/// Contingency table `n_ij = |{k : pred_k = i, truth_k = j}|`, sized by the
/// largest label on each side.
fn contingency(pred: &[usize], truth: &[usize]) -> DenseMatrix {
    let rp = pred.iter().max().unwrap() + 1;
    let rt = truth.iter().max().unwrap() + 1;
    let mut m = DenseMatrix::zeros(rp, rt);
    for (&p, &t) in pred.iter().zip(truth) {
        m.set(p, t, m.get(p, t) + 1.0);
    }
    m
}

/// Minimum-cost perfect assignment on a square cost matrix, returned as
/// `assignment[row] = column`. Standard Hungarian algorithm with row/column
/// potentials, O(n^3).
pub fn hungarian(cost: &DenseMatrix) -> Result<Vec<usize>> {
    if cost.rows() != cost.cols() {
        return Err(RimError::ShapeMismatch {
            expected: format!("{0}x{0} square matrix", cost.rows()),
            got: format!("{}x{}", cost.rows(), cost.cols()),
            context: "hungarian",
        });
    }
    let n = cost.rows();
    // potentials and matching, 1-indexed with a dummy 0 slot
    let mut u = vec![0.0_f64; n + 1];
    let mut v = vec![0.0_f64; n + 1];
    let mut match_col = vec![0usize; n + 1]; // col -> row

    for row in 1..=n {
        let mut links = vec![0usize; n + 1];
        let mut mins = vec![f64::INFINITY; n + 1];
        let mut visited = vec![false; n + 1];
        let mut marked_col = 0usize;
        match_col[0] = row;
        loop {
            visited[marked_col] = true;
            let marked_row = match_col[marked_col];
            let mut delta = f64::INFINITY;
            let mut next_col = 0usize;
            for col in 1..=n {
                if visited[col] {
                    continue;
                }
                let reduced = cost.get(marked_row - 1, col - 1) - u[marked_row] - v[col];
                if reduced < mins[col] {
                    mins[col] = reduced;
                    links[col] = marked_col;
                }
                if mins[col] < delta {
                    delta = mins[col];
                    next_col = col;
                }
            }
            for col in 0..=n {
                if visited[col] {
                    u[match_col[col]] += delta;
                    v[col] -= delta;
                } else {
                    mins[col] -= delta;
                }
            }
            marked_col = next_col;
            if match_col[marked_col] == 0 {
                break;
            }
        }
        // augment along the alternating path
        while marked_col != 0 {
            let prev = links[marked_col];
            match_col[marked_col] = match_col[prev];
            marked_col = prev;
        }
    }

    let mut assignment = vec![0usize; n];
    for col in 1..=n {
        if match_col[col] > 0 {
            assignment[match_col[col] - 1] = col - 1;
        }
    }
    Ok(assignment)
}

/// Clustering accuracy: the best match rate over all one-to-one relabelings
/// of `pred`, found by assignment on the negated contingency table.
pub fn acc(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_pair(pred, truth)?;
    let table = contingency(pred, truth);
    let size = table.rows().max(table.cols());
    // pad to square; negate so minimum cost = maximum agreement
    let cost = DenseMatrix::from_fn(size, size, |i, j| {
        if i < table.rows() && j < table.cols() {
            -table.get(i, j)
        } else {
            0.0
        }
    });
    let assignment = hungarian(&cost)?;
    let matched: f64 = assignment
        .iter()
        .enumerate()
        .filter(|(i, _)| *i < table.rows())
        .map(|(i, &j)| if j < table.cols() { table.get(i, j) } else { 0.0 })
        .sum();
    Ok(matched / pred.len() as f64)
}

/// Normalized mutual information with geometric-mean normalization, using
/// natural logarithms and the convention `0 ln 0 = 0`. Returns 0 when either
/// side has a single cluster (zero entropy).
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_pair(pred, truth)?;
    let table = contingency(pred, truth);
    let n = pred.len() as f64;
    let row_marginals = table.row_sums();
    let col_marginals = table.col_sums();

    let entropy = |marginals: &[f64]| -> f64 {
        marginals
            .iter()
            .filter(|&&m| m > 0.0)
            .map(|&m| -(m / n) * (m / n).ln())
            .sum()
    };
    let h_pred = entropy(&row_marginals);
    let h_truth = entropy(&col_marginals);
    if h_pred <= 0.0 || h_truth <= 0.0 {
        return Ok(0.0);
    }

    let mut mi = 0.0;
    for i in 0..table.rows() {
        for j in 0..table.cols() {
            let nij = table.get(i, j);
            if nij > 0.0 {
                mi += (nij / n) * (n * nij / (row_marginals[i] * col_marginals[j])).ln();
            }
        }
    }
    Ok(mi / (h_pred * h_truth).sqrt())
}

/// Adjusted Rand index via pair counting.
pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_pair(pred, truth)?;
    if pred.len() < 2 {
        return Err(RimError::InvalidValue(
            "adjusted Rand index needs at least two samples".into(),
        ));
    }
    let table = contingency(pred, truth);
    let choose2 = |m: f64| m * (m - 1.0) / 2.0;
    let n = pred.len() as f64;

    let sum_ij: f64 = table.data().iter().map(|&v| choose2(v)).sum();
    let sum_a: f64 = table.row_sums().iter().map(|&v| choose2(v)).sum();
    let sum_b: f64 = table.col_sums().iter().map(|&v| choose2(v)).sum();
    let total = choose2(n);

    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < 1e-15 {
        // both partitions are trivial in the same way; conventionally 1
        return Ok(1.0);
    }
    Ok((sum_ij - expected) / (max_index - expected))
}

/// JSON-serializable metrics bundle.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRecord {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
    pub n: usize,
    pub c: usize,
}

impl MetricsRecord {
    pub fn compute(pred: &[usize], truth: &[usize]) -> Result<Self> {
        check_pair(pred, truth)?;
        let c = truth.iter().max().unwrap() + 1;
        Ok(Self {
            acc: acc(pred, truth)?,
            nmi: nmi(pred, truth)?,
            ari: ari(pred, truth)?,
            n: pred.len(),
            c,
        })
    }
}
