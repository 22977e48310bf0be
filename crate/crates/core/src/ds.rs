//! Doubly-stochastic-manifold baseline: Fisher-metric Riemannian gradient,
//! classical Sinkhorn retraction, and a gradient-descent loop. Exists to
//! reproduce the speed/quality comparison against the relaxed manifold.

use crate::error::{Result, RimError};
use crate::manifold::RimPoint;
use crate::matrix::DenseMatrix;
use crate::optim::{OptimizerOptions, Problem, Termination, Trace, TraceRecord};
use nalgebra::{DMatrix, DVector};
use std::time::Instant;

/// Fisher-metric Riemannian gradient on the doubly stochastic manifold
/// `{X > 0 | X 1 = row_target, X^T 1 = col_target}`: with
/// `gamma = egrad .* X`, solve the (n+c)-dimensional linear system for
/// multipliers `(alpha, beta)` such that
/// `gamma - (alpha 1^T + 1 beta^T) .* X` has zero row and column sums.
/// The system is rank-deficient by one (a constant shift of `alpha`
/// against `beta`); the minimum-norm solution is selected by augmenting
/// with the known nullspace direction.
pub fn ds_rgrad(
    x: &DenseMatrix,
    egrad: &DenseMatrix,
    row_target: &[f64],
    col_target: &[f64],
) -> Result<DenseMatrix> {
    let (n, c) = (x.rows(), x.cols());
    if !x.same_shape(egrad) {
        return Err(RimError::ShapeMismatch {
            expected: format!("{n}x{c}"),
            got: format!("{}x{}", egrad.rows(), egrad.cols()),
            context: "ds_rgrad",
        });
    }
    if row_target.len() != n || col_target.len() != c {
        return Err(RimError::ShapeMismatch {
            expected: format!("targets of length {n} and {c}"),
            got: format!("{} and {}", row_target.len(), col_target.len()),
            context: "ds_rgrad",
        });
    }
    if x.min_entry() <= 0.0 {
        return Err(RimError::InvalidValue(
            "doubly stochastic point must be strictly positive".into(),
        ));
    }

    let gamma = egrad.hadamard(x)?;
    let gamma_rows = gamma.row_sums();
    let gamma_cols = gamma.col_sums();

    // M = [diag(row_target), X; X^T, diag(col_target)] annihilates
    // v = [1_n; -1_c]; add v v^T to make it invertible while keeping the
    // consistent right-hand side orthogonal projection intact.
    let dim = n + c;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..n {
        m[(i, i)] = row_target[i];
        for j in 0..c {
            m[(i, n + j)] = x.get(i, j);
            m[(n + j, i)] = x.get(i, j);
        }
    }
    for j in 0..c {
        m[(n + j, n + j)] = col_target[j];
    }
    let v = DVector::<f64>::from_fn(dim, |i, _| if i < n { 1.0 } else { -1.0 });
    let m_aug = &m + &v * v.transpose();

    let rhs = DVector::<f64>::from_fn(dim, |i, _| {
        if i < n {
            gamma_rows[i]
        } else {
            gamma_cols[i - n]
        }
    });
    let lu = m_aug.lu();
    let sol = lu.solve(&rhs).ok_or_else(|| {
        RimError::Singular("doubly stochastic multiplier system is singular".into())
    })?;
    let residual = (&m * &sol - &rhs).norm();
    let scale = rhs.norm().max(1.0);
    if residual > 1e-8 * scale {
        return Err(RimError::Singular(format!(
            "multiplier system solved poorly (relative residual {:.3e})",
            residual / scale
        )));
    }

    let alpha = sol.rows(0, n);
    let beta = sol.rows(n, c);
    Ok(DenseMatrix::from_fn(n, c, |i, j| {
        gamma.get(i, j) - (alpha[i] + beta[j]) * x.get(i, j)
    }))
}

/// Classical Sinkhorn retraction on the doubly stochastic manifold:
/// alternately rescale the rows and columns of `X .* exp(tV ./ X)` to the
/// target marginals.
pub fn ds_retract_sinkhorn(
    x: &DenseMatrix,
    v: &DenseMatrix,
    t: f64,
    row_target: &[f64],
    col_target: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<DenseMatrix> {
    let (n, c) = (x.rows(), x.cols());
    if x.min_entry() <= 0.0 {
        return Err(RimError::InvalidValue(
            "Sinkhorn retraction requires a strictly positive point".into(),
        ));
    }
    const EXP_CLAMP: f64 = 50.0;
    let mut k = DenseMatrix::zeros(n, c);
    for i in 0..n {
        for j in 0..c {
            let e = (t * v.get(i, j) / x.get(i, j)).clamp(-EXP_CLAMP, EXP_CLAMP);
            k.set(i, j, x.get(i, j) * e.exp());
        }
    }
    if k.data().iter().any(|e| !e.is_finite()) {
        return Err(RimError::Overflow("ds sinkhorn exp"));
    }

    let mut out = k;
    for _ in 0..max_iter {
        let row_sums = out.row_sums();
        for i in 0..n {
            if row_sums[i] <= 0.0 {
                return Err(RimError::Overflow("ds sinkhorn row scaling"));
            }
            let f = row_target[i] / row_sums[i];
            for e in out.row_mut(i) {
                *e *= f;
            }
        }
        let col_sums = out.col_sums();
        for j in 0..c {
            if col_sums[j] <= 0.0 {
                return Err(RimError::Overflow("ds sinkhorn column scaling"));
            }
            let f = col_target[j] / col_sums[j];
            for i in 0..n {
                out.set(i, j, out.get(i, j) * f);
            }
        }
        let row_err = out
            .row_sums()
            .iter()
            .zip(row_target)
            .fold(0.0_f64, |m, (s, t)| m.max((s - t).abs()));
        let col_err = out
            .col_sums()
            .iter()
            .zip(col_target)
            .fold(0.0_f64, |m, (s, t)| m.max((s - t).abs()));
        if row_err <= tol && col_err <= tol {
            break;
        }
    }
    Ok(out)
}

/// Gradient descent on the doubly stochastic manifold with Armijo
/// backtracking, using the Fisher gradient and the Sinkhorn retraction.
/// `x0` must carry degenerate bounds (lower = upper), which become the
/// column targets; the row targets are all ones.
pub fn ds_rgd(problem: &dyn Problem, x0: &RimPoint, opts: &OptimizerOptions) -> Result<Trace> {
    if !x0.bounds().is_degenerate() {
        return Err(RimError::InvalidValue(
            "doubly stochastic descent needs degenerate bounds (lower = upper)".into(),
        ));
    }
    let (n, _c) = (x0.matrix().rows(), x0.matrix().cols());
    let row_target = vec![1.0_f64; n];
    let col_target = x0.bounds().lower().to_vec();
    let sinkhorn_iters = 1000;
    let sinkhorn_tol = 1e-10;

    let started = Instant::now();
    let mut records: Vec<TraceRecord> = Vec::new();
    let push = |records: &mut Vec<TraceRecord>, iter, cost, gnorm, step| {
        records.push(TraceRecord {
            iter,
            cost,
            rgrad_norm: gnorm,
            step,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        });
    };

    let mut x = x0.clone();
    let mut cost = problem.cost(x.matrix())?;
    for iter in 0..opts.max_iter {
        let egrad = problem.egrad(x.matrix())?;
        let g = ds_rgrad(x.matrix(), &egrad, &row_target, &col_target)?;
        let gnorm = g.frob_norm();
        push(&mut records, iter, cost, gnorm, 0.0);
        if gnorm <= opts.grad_tol {
            return Ok(Trace {
                records,
                final_point: x,
                termination: Termination::GradTol,
            });
        }

        // first-order change of the cost along -g is -<egrad, g>
        let slope = -egrad.frob_inner(&g)?;
        let mut step = opts.initial_step;
        let mut accepted = None;
        for _ in 0..=60 {
            let cand = ds_retract_sinkhorn(
                x.matrix(),
                &g.scale(-1.0),
                step,
                &row_target,
                &col_target,
                sinkhorn_iters,
                sinkhorn_tol,
            )?;
            let cand_cost = problem.cost(&cand)?;
            if cand_cost <= cost + opts.armijo_c1 * step * slope {
                accepted = Some((step, cand, cand_cost));
                break;
            }
            step *= opts.backtrack_factor;
            if step < 1e-14 {
                break;
            }
        }
        match accepted {
            Some((step, cand, cand_cost)) => {
                records.last_mut().unwrap().step = step;
                x = RimPoint::certify(cand, x0.bounds().clone(), x0.feas_tol().max(1e-2))?;
                cost = cand_cost;
            }
            None => {
                return Ok(Trace {
                    records,
                    final_point: x,
                    termination: Termination::StepCollapse,
                })
            }
        }
    }
    let egrad = problem.egrad(x.matrix())?;
    let g = ds_rgrad(x.matrix(), &egrad, &row_target, &col_target)?;
    push(&mut records, opts.max_iter, cost, g.frob_norm(), 0.0);
    Ok(Trace {
        records,
        final_point: x,
        termination: Termination::MaxIter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Bounds;
    use crate::problems::NormApprox;
    use crate::retraction::RetractionMethod;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Strictly positive doubly stochastic matrix with unit row sums and
    /// column sums n/c, built by Sinkhorn-balancing positive noise.
    fn ds_point(n: usize, c: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = DenseMatrix::from_fn(n, c, |_, _| rng.gen_range(0.2..1.0));
        let zero = DenseMatrix::zeros(n, c);
        let rt = vec![1.0; n];
        let ct = vec![n as f64 / c as f64; c];
        ds_retract_sinkhorn(&raw, &zero, 0.0, &rt, &ct, 5000, 1e-12).unwrap()
    }

    #[test]
    fn rgrad_zero_gradient() {
        let x = ds_point(5, 5, 1);
        let g = ds_rgrad(
            &x,
            &DenseMatrix::zeros(5, 5),
            &[1.0; 5],
            &[1.0; 5],
        )
        .unwrap();
        assert!(g.max_abs() < 1e-12);
    }

    #[test]
    fn rgrad_is_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for seed in 0..10 {
            let (n, c) = (6, 4);
            let x = ds_point(n, c, 10 + seed);
            let egrad = DenseMatrix::from_fn(n, c, |_, _| rng.gen_range(-1.0..1.0));
            let g = ds_rgrad(&x, &egrad, &vec![1.0; n], &vec![n as f64 / c as f64; c]).unwrap();
            for s in g.row_sums() {
                assert!(s.abs() <= 1e-8, "row sum {s}");
            }
            for s in g.col_sums() {
                assert!(s.abs() <= 1e-8, "col sum {s}");
            }
        }
    }

    /// Random doubly-stochastic-tangent direction (zero row and column sums).
    fn ds_tangent(n: usize, c: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = DenseMatrix::from_fn(n, c, |_, _| rng.gen_range(-1.0..1.0));
        // project: subtract row means, then column means, repeated to
        // convergence (the two projections commute for this affine space)
        let mut v = raw;
        for _ in 0..200 {
            for i in 0..n {
                let mean: f64 = v.row(i).iter().sum::<f64>() / c as f64;
                for e in v.row_mut(i) {
                    *e -= mean;
                }
            }
            let col_means: Vec<f64> =
                v.col_sums().iter().map(|s| s / n as f64).collect();
            for i in 0..n {
                for j in 0..c {
                    v.set(i, j, v.get(i, j) - col_means[j]);
                }
            }
        }
        v
    }

    #[test]
    fn fisher_riesz_identity() {
        let (n, c) = (5, 4);
        let x = ds_point(n, c, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let egrad = DenseMatrix::from_fn(n, c, |_, _| rng.gen_range(-1.0..1.0));
        let g = ds_rgrad(&x, &egrad, &vec![1.0; n], &vec![n as f64 / c as f64; c]).unwrap();
        for seed in 0..10 {
            let v = ds_tangent(n, c, 40 + seed);
            let fisher: f64 = (0..n)
                .flat_map(|i| (0..c).map(move |j| (i, j)))
                .map(|(i, j)| g.get(i, j) * v.get(i, j) / x.get(i, j))
                .sum();
            let euclid = egrad.frob_inner(&v).unwrap();
            assert_relative_eq!(fisher, euclid, epsilon = 1e-8, max_relative = 1e-8);
        }
    }

    /// Square-case closed form: alpha = (I - F F^T)^+ (gamma - F gamma^T) 1,
    /// beta = gamma^T 1 - F^T alpha, grad = gamma - (alpha 1^T + 1 beta^T) .* F.
    fn rgrad_oracle_square(f: &DenseMatrix, egrad: &DenseMatrix) -> DenseMatrix {
        let n = f.rows();
        let gamma = egrad.hadamard(f).unwrap();
        let f_na = f.to_na();
        let gamma_na = gamma.to_na();
        let ident = DMatrix::<f64>::identity(n, n);
        let a = &ident - &f_na * f_na.transpose();
        let rhs = (&gamma_na - &f_na * gamma_na.transpose())
            * DVector::<f64>::from_element(n, 1.0);
        let pinv = a.svd(true, true).pseudo_inverse(1e-12).unwrap();
        let alpha = &pinv * rhs;
        let beta = gamma_na.transpose() * DVector::<f64>::from_element(n, 1.0)
            - f_na.transpose() * &alpha;
        DenseMatrix::from_fn(n, n, |i, j| {
            gamma.get(i, j) - (alpha[i] + beta[j]) * f.get(i, j)
        })
    }

    #[test]
    fn rgrad_matches_square_closed_form() {
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..10 {
            let x = ds_point(n, n, 50 + seed);
            let egrad = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let got = ds_rgrad(&x, &egrad, &[1.0; 3], &[1.0; 3]).unwrap();
            let oracle = rgrad_oracle_square(&x, &egrad);
            assert!(
                got.sub(&oracle).unwrap().max_abs() < 1e-8,
                "seed {seed}: deviation {}",
                got.sub(&oracle).unwrap().max_abs()
            );
        }
    }

    #[test]
    fn sinkhorn_zero_step_identity() {
        let x = ds_point(6, 3, 6);
        let v = DenseMatrix::zeros(6, 3);
        let out =
            ds_retract_sinkhorn(&x, &v, 0.0, &[1.0; 6], &[2.0; 3], 1000, 1e-12).unwrap();
        assert!(out.sub(&x).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn sinkhorn_hits_marginals() {
        let x = ds_point(6, 3, 7);
        let v = ds_tangent(6, 3, 8);
        let out =
            ds_retract_sinkhorn(&x, &v, 0.2, &[1.0; 6], &[2.0; 3], 5000, 1e-10).unwrap();
        for s in out.row_sums() {
            assert!((s - 1.0).abs() < 1e-2);
        }
        for s in out.col_sums() {
            assert!((s - 2.0).abs() < 1e-2);
        }
        assert!(out.min_entry() > 0.0);
    }

    #[test]
    fn sinkhorn_agrees_with_bounded_version_when_degenerate() {
        let (n, c) = (6, 3);
        let x = ds_point(n, c, 9);
        let v = ds_tangent(n, c, 10);
        let ct = vec![n as f64 / c as f64; c];
        let bounds = Bounds::equal(ct.clone()).unwrap();
        let point = RimPoint::certify(x.clone(), bounds, 1e-8).unwrap();
        let tangent =
            crate::manifold::TangentVector::new(crate::manifold::tangent_project(&v).into_matrix())
                .unwrap();
        let t = 0.1;
        let bounded = crate::retraction::retract_sinkhorn(
            &point,
            &tangent,
            t,
            &RetractionMethod::sinkhorn().with_tol(1e-12).with_max_iter(20000),
        )
        .unwrap();
        let classical = ds_retract_sinkhorn(
            &x,
            tangent.matrix(),
            t,
            &vec![1.0; n],
            &ct,
            20000,
            1e-12,
        )
        .unwrap();
        let diff = bounded
            .result
            .matrix()
            .sub(&classical)
            .unwrap()
            .max_abs();
        assert!(diff < 1e-6, "diff {diff}");
    }

    #[test]
    fn rgd_drives_cost_down_on_square_problem() {
        let n = 20;
        let a = ds_point(n, n, 11).map(|v| v.max(1e-9));
        // rescale rows exactly to 1 so the target is on the manifold
        let row_sums = a.row_sums();
        let a = DenseMatrix::from_fn(n, n, |i, j| a.get(i, j) / row_sums[i]);
        let problem = NormApprox::new(a).unwrap();
        let x0 = RimPoint::certify(
            ds_point(n, n, 12),
            problem.bounds().clone(),
            1e-2,
        )
        .unwrap();
        let opts = OptimizerOptions {
            max_iter: 40,
            grad_tol: 1e-12,
            ..Default::default()
        };
        let trace = ds_rgd(&problem, &x0, &opts).unwrap();
        assert!(trace.is_monotone());
        let first = trace.records.first().unwrap().cost;
        assert!(
            trace.final_cost() < first * 1e-2,
            "insufficient decrease: {} -> {}",
            first,
            trace.final_cost()
        );
    }

    #[test]
    fn rgd_rejects_band_bounds() {
        let bounds = Bounds::band(6, 3, 0.5, 1.5).unwrap();
        let x0 = crate::manifold::random_point(6, 3, &bounds, 1).unwrap();
        let problem = NormApprox::new(DenseMatrix::constant(6, 3, 1.0 / 3.0)).unwrap();
        assert!(ds_rgd(&problem, &x0, &OptimizerOptions::default()).is_err());
    }
}
