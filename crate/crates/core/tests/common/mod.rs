//! Shared helpers for the integration suites: a dense active-set QP oracle
//! for the manifold projection, interior-point generators, and brute-force
//! clustering-metric oracles. Everything here is deliberately independent of
//! the library's own algorithms.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rim_core::manifold::{random_tangent, Bounds, RimPoint};
use rim_core::DenseMatrix;

/// Bounds `[lo_frac * n/c, hi_frac * n/c]` with real (not floored) base, so
/// they are feasible for every shape.
pub fn feasible_band(n: usize, c: usize, lo_frac: f64, hi_frac: f64) -> Bounds {
    let base = n as f64 / c as f64;
    Bounds::new(vec![lo_frac * base; c], vec![hi_frac * base; c]).unwrap()
}

/// Interior manifold point with exact unit row sums: the uniform matrix
/// plus a small tangent perturbation.
pub fn interior_point(n: usize, c: usize, bounds: &Bounds, seed: u64) -> RimPoint {
    let uniform = DenseMatrix::constant(n, c, 1.0 / c as f64);
    let t = random_tangent(n, c, seed).unwrap();
    let x = uniform.add_scaled(0.2 / c as f64, t.matrix()).unwrap();
    RimPoint::certify(x, bounds.clone(), 1e-9).unwrap()
}

/// One linear constraint `a . x >= b` (equalities are stored separately)
/// over the row-major vectorization of an n-by-c matrix.
#[derive(Clone)]
struct Inequality {
    a: Vec<f64>,
    b: f64,
}

/// Euclidean projection of `y` onto
/// `{X | X 1 = 1, X >= 0, l <= X^T 1 <= u}` by a dense primal active-set
/// method. Exact up to linear-algebra roundoff; meant for tiny instances.
pub fn qp_project(y: &DenseMatrix, bounds: &Bounds) -> DenseMatrix {
    let (n, c) = (y.rows(), y.cols());
    let dim = n * c;
    let idx = |i: usize, j: usize| i * c + j;

    // equalities: row sums = 1
    let mut eq: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..n {
        let mut a = vec![0.0; dim];
        for j in 0..c {
            a[idx(i, j)] = 1.0;
        }
        eq.push((a, 1.0));
    }

    // inequalities: positivity, column lower, column upper (as a . x >= b)
    let mut ineq: Vec<Inequality> = Vec::new();
    for p in 0..dim {
        let mut a = vec![0.0; dim];
        a[p] = 1.0;
        ineq.push(Inequality { a, b: 0.0 });
    }
    for j in 0..c {
        let mut lo = vec![0.0; dim];
        for i in 0..n {
            lo[idx(i, j)] = 1.0;
        }
        let hi: Vec<f64> = lo.iter().map(|v| -v).collect();
        ineq.push(Inequality {
            a: lo,
            b: bounds.lower()[j],
        });
        ineq.push(Inequality {
            a: hi,
            b: -bounds.upper()[j],
        });
    }

    // feasible start: uniform matrix (requires l <= n/c <= u, which the
    // generators in this suite guarantee)
    let mut x = vec![1.0 / c as f64; dim];
    for q in &ineq {
        let v: f64 = q.a.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!(
            v >= q.b - 1e-9,
            "uniform start infeasible; generate bounds bracketing n/c"
        );
    }
    let yv: Vec<f64> = y.data().to_vec();
    let mut active: Vec<usize> = Vec::new();

    for _round in 0..500 {
        // equality-constrained subproblem: min 1/2||z - y||^2 with the row
        // equalities plus the active inequalities as equalities; KKT system
        // [I A^T; A 0] [z; lambda] = [y; b]
        let m = eq.len() + active.len();
        let mut kkt = DMatrix::<f64>::zeros(dim + m, dim + m);
        let mut rhs = DVector::<f64>::zeros(dim + m);
        for p in 0..dim {
            kkt[(p, p)] = 1.0;
            rhs[p] = yv[p];
        }
        let mut row = dim;
        for (a, b) in &eq {
            for p in 0..dim {
                kkt[(row, p)] = a[p];
                kkt[(p, row)] = a[p];
            }
            rhs[row] = *b;
            row += 1;
        }
        for &k in &active {
            let q = &ineq[k];
            for p in 0..dim {
                kkt[(row, p)] = q.a[p];
                kkt[(p, row)] = q.a[p];
            }
            rhs[row] = q.b;
            row += 1;
        }
        let sol = kkt
            .lu()
            .solve(&rhs)
            .expect("degenerate active set in QP oracle");
        let z: Vec<f64> = (0..dim).map(|p| sol[p]).collect();

        let step_norm: f64 = z
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if step_norm <= 1e-12 {
            // check multipliers of active inequalities: stationarity gives
            // z - y = sum lambda_true a_i with lambda_true = -lambda_kkt
            let lambda_ineq = &sol.as_slice()[dim + eq.len()..dim + m];
            let mut worst = (0usize, 0.0_f64);
            for (slot, &lk) in lambda_ineq.iter().enumerate() {
                let lambda_true = -lk;
                if lambda_true < worst.1 {
                    worst = (slot, lambda_true);
                }
            }
            if worst.1 >= -1e-10 {
                return DenseMatrix::new(n, c, x).unwrap();
            }
            active.remove(worst.0);
            continue;
        }

        // longest feasible step toward z
        let mut alpha = 1.0_f64;
        let mut blocking = None;
        for (k, q) in ineq.iter().enumerate() {
            if active.contains(&k) {
                continue;
            }
            let ad: f64 = q
                .a
                .iter()
                .zip(z.iter().zip(&x))
                .map(|(a, (zi, xi))| a * (zi - xi))
                .sum();
            if ad < -1e-13 {
                let ax: f64 = q.a.iter().zip(&x).map(|(a, b)| a * b).sum();
                let limit = (ax - q.b) / (-ad);
                if limit < alpha {
                    alpha = limit.max(0.0);
                    blocking = Some(k);
                }
            }
        }
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += alpha * (*zi - *xi);
        }
        match blocking {
            Some(k) => active.push(k),
            None => {
                // full step with no blocking constraint: x = z; loop once
                // more to verify multipliers
            }
        }
    }
    panic!("QP oracle did not converge");
}

/// Brute-force clustering accuracy: maximize the match rate over all
/// relabelings of `pred`.
pub fn acc_oracle(pred: &[usize], truth: &[usize]) -> f64 {
    let c = pred.iter().chain(truth).max().unwrap() + 1;
    let mut perm: Vec<usize> = (0..c).collect();
    let mut best = 0usize;
    permute(&mut perm, 0, &mut |p| {
        let hits = pred.iter().zip(truth).filter(|(&a, &b)| p[a] == b).count();
        best = best.max(hits);
    });
    best as f64 / pred.len() as f64
}

pub fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Entropy-based normalized mutual information from first principles.
pub fn nmi_oracle(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len() as f64;
    let cp = pred.iter().max().unwrap() + 1;
    let ct = truth.iter().max().unwrap() + 1;
    // integer counts divided once, so degenerate marginals have exactly
    // zero entropy
    let mut counts = vec![vec![0usize; ct]; cp];
    for (&a, &b) in pred.iter().zip(truth) {
        counts[a][b] += 1;
    }
    let joint: Vec<Vec<f64>> = counts
        .iter()
        .map(|row| row.iter().map(|&k| k as f64 / n).collect())
        .collect();
    let pa: Vec<f64> = (0..cp)
        .map(|a| counts[a].iter().sum::<usize>() as f64 / n)
        .collect();
    let pb: Vec<f64> = (0..ct)
        .map(|b| (0..cp).map(|a| counts[a][b]).sum::<usize>() as f64 / n)
        .collect();
    let h = |p: &[f64]| -> f64 { p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum() };
    let (ha, hb) = (h(&pa), h(&pb));
    if ha <= 0.0 || hb <= 0.0 {
        return 0.0;
    }
    let mut mi = 0.0;
    for a in 0..cp {
        for b in 0..ct {
            if joint[a][b] > 0.0 {
                mi += joint[a][b] * (joint[a][b] / (pa[a] * pb[b])).ln();
            }
        }
    }
    mi / (ha * hb).sqrt()
}

/// Pair-enumeration adjusted Rand index.
pub fn ari_oracle(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len();
    let mut both = 0.0_f64;
    let mut in_pred = 0.0_f64;
    let mut in_truth = 0.0_f64;
    let mut total = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            total += 1.0;
            let same_p = pred[i] == pred[j];
            let same_t = truth[i] == truth[j];
            if same_p {
                in_pred += 1.0;
            }
            if same_t {
                in_truth += 1.0;
            }
            if same_p && same_t {
                both += 1.0;
            }
        }
    }
    let expected = in_pred * in_truth / total;
    let max_index = 0.5 * (in_pred + in_truth);
    if (max_index - expected).abs() < 1e-15 {
        return 1.0;
    }
    (both - expected) / (max_index - expected)
}

/// Log-log least-squares slope of `times` against `sizes`.
pub fn fit_exponent(sizes: &[f64], times: &[f64]) -> f64 {
    let n = sizes.len() as f64;
    let xs: Vec<f64> = sizes.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = times.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}
