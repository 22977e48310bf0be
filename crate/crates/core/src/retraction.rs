//! The three retraction algorithms: Dykstra cyclic projection, dual
//! gradient ascent, and bounded Sinkhorn scaling, plus their building-block
//! projections.

use crate::error::{Result, RimError};
use crate::manifold::{Bounds, RimPoint, TangentVector};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetractionKind {
    Dykstra,
    DualAscent,
    Sinkhorn,
}

/// Configuration for a retraction. `max_iter` and `tol` default to the
/// reference scheme (`min(1000, n*c)` iterations; tolerance 1e-2 when
/// lower = upper, 1e-1 otherwise) when left unset.
#[derive(Debug, Clone, Copy)]
pub struct RetractionMethod {
    pub kind: RetractionKind,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    /// Ascent step, used by `DualAscent` only.
    pub step: f64,
}

pub const DEFAULT_DUAL_STEP: f64 = 0.05;

impl RetractionMethod {
    pub fn dykstra() -> Self {
        Self {
            kind: RetractionKind::Dykstra,
            max_iter: None,
            tol: None,
            step: DEFAULT_DUAL_STEP,
        }
    }

    pub fn dual_ascent() -> Self {
        Self {
            kind: RetractionKind::DualAscent,
            max_iter: None,
            tol: None,
            step: DEFAULT_DUAL_STEP,
        }
    }

    pub fn sinkhorn() -> Self {
        Self {
            kind: RetractionKind::Sinkhorn,
            max_iter: None,
            tol: None,
            step: DEFAULT_DUAL_STEP,
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = Some(max_iter);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = Some(tol);
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(m) = self.max_iter {
            if m == 0 {
                return Err(RimError::InvalidValue("max_iter must be >= 1".into()));
            }
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(RimError::InvalidValue("tol must be positive".into()));
            }
        }
        if self.kind == RetractionKind::DualAscent && !(self.step > 0.0) {
            return Err(RimError::InvalidValue(
                "dual ascent step must be positive".into(),
            ));
        }
        Ok(())
    }

    fn resolved_max_iter(&self, n: usize, c: usize) -> usize {
        self.max_iter.unwrap_or_else(|| (n * c).clamp(1, 1000))
    }

    fn resolved_tol(&self, bounds: &Bounds) -> f64 {
        self.tol.unwrap_or_else(|| bounds.default_feas_tol())
    }

    /// Dispatch on `kind`.
    pub fn retract(&self, x: &RimPoint, v: &TangentVector, t: f64) -> Result<RetractionReport> {
        match self.kind {
            RetractionKind::Dykstra => retract_dykstra(x, v, t, self),
            RetractionKind::DualAscent => retract_dual(x, v, t, self),
            RetractionKind::Sinkhorn => retract_sinkhorn(x, v, t, self),
        }
    }
}

/// Outcome of a retraction call.
#[derive(Debug, Clone)]
pub struct RetractionReport {
    pub result: RimPoint,
    pub iterations: usize,
    pub residual_row: f64,
    pub residual_pos: f64,
    pub residual_cols: f64,
    pub converged: bool,
}

fn residuals(p: &DenseMatrix, bounds: &Bounds) -> (f64, f64, f64) {
    let row = p
        .row_sums()
        .iter()
        .map(|s| (s - 1.0) * (s - 1.0))
        .sum::<f64>()
        .sqrt();
    let pos = (-p.min_entry()).max(0.0);
    let col = p
        .col_sums()
        .iter()
        .zip(bounds.lower().iter().zip(bounds.upper()))
        .fold(0.0_f64, |m, (s, (l, u))| {
            m.max((l - s).max(0.0)).max((s - u).max(0.0))
        });
    (row, pos, col)
}

/// Euclidean projection of `v` onto the scaled simplex `{x >= 0, sum x = k}`
/// by Newton iteration on the shift. Returns the projection and whether the
/// Newton loop converged (it falls back to the last clamp after 100 steps).
pub fn simplex_project(v: &[f64], k: f64) -> (Vec<f64>, bool) {
    debug_assert!(k > 0.0);
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let v0: Vec<f64> = v.iter().map(|x| x - mean + k / n as f64).collect();
    let vmin = v0.iter().cloned().fold(f64::INFINITY, f64::min);
    if vmin >= 0.0 {
        return (v0, true);
    }
    let mut lambda = 0.0;
    let mut steps = 1;
    loop {
        let mut f = -k;
        let mut npos = 0usize;
        for &x in &v0 {
            let y = x - lambda;
            if y > 0.0 {
                f += y;
                npos += 1;
            }
        }
        if f.abs() <= 1e-10 {
            break;
        }
        if npos == 0 {
            // all entries clamped: push lambda back toward feasibility
            lambda = v0.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - k / n as f64;
            steps += 1;
        } else {
            lambda += f / npos as f64;
            steps += 1;
        }
        if steps > 100 {
            let x = v0.iter().map(|x| (x - lambda).max(0.0)).collect();
            return (x, false);
        }
    }
    let x = v0.iter().map(|x| (x - lambda).max(0.0)).collect();
    (x, true)
}

/// Project every row of `x` onto the unit simplex. Rows are independent, so
/// this is the exact Euclidean projection onto `{ X >= 0, X 1_c = 1_n }`.
pub fn project_rows(x: &DenseMatrix) -> Result<DenseMatrix> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let cols = x.cols();
        let mut out = x.clone();
        let any_fail = out
            .data_mut()
            .par_chunks_mut(cols)
            .map(|row| {
                let (p, ok) = simplex_project(row, 1.0);
                row.copy_from_slice(&p);
                !ok
            })
            .reduce(|| false, |a, b| a || b);
        if any_fail {
            return Err(RimError::NonConvergence {
                method: "project_rows (simplex Newton)",
                iterations: 100,
                residual_row: f64::NAN,
                residual_pos: f64::NAN,
                residual_cols: f64::NAN,
            });
        }
        Ok(out)
    }
    #[cfg(not(feature = "parallel"))]
    {
        project_rows_serial(x)
    }
}

/// Sequential reference path for `project_rows`.
pub fn project_rows_serial(x: &DenseMatrix) -> Result<DenseMatrix> {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let (p, ok) = simplex_project(row, 1.0);
        if !ok {
            return Err(RimError::NonConvergence {
                method: "project_rows (simplex Newton)",
                iterations: 100,
                residual_row: f64::NAN,
                residual_pos: f64::NAN,
                residual_cols: f64::NAN,
            });
        }
        row.copy_from_slice(&p);
    }
    Ok(out)
}

/// Euclidean projection onto `{ X | column sums >= lower }`: columns below
/// their bound receive a uniform upward shift, the rest are unchanged.
pub fn project_col_lower(x: &DenseMatrix, lower: &[f64]) -> Result<DenseMatrix> {
    if lower.len() != x.cols() {
        return Err(RimError::ShapeMismatch {
            expected: format!("{} bounds", x.cols()),
            got: format!("{}", lower.len()),
            context: "project_col_lower",
        });
    }
    let n = x.rows() as f64;
    let sums = x.col_sums();
    let mut out = x.clone();
    for (j, (&s, &l)) in sums.iter().zip(lower).enumerate() {
        if s < l {
            let shift = (l - s) / n;
            for i in 0..x.rows() {
                out.set(i, j, out.get(i, j) + shift);
            }
        }
    }
    Ok(out)
}

/// Mirror of `project_col_lower` for the upper bounds.
pub fn project_col_upper(x: &DenseMatrix, upper: &[f64]) -> Result<DenseMatrix> {
    if upper.len() != x.cols() {
        return Err(RimError::ShapeMismatch {
            expected: format!("{} bounds", x.cols()),
            got: format!("{}", upper.len()),
            context: "project_col_upper",
        });
    }
    let n = x.rows() as f64;
    let sums = x.col_sums();
    let mut out = x.clone();
    for (j, (&s, &u)) in sums.iter().zip(upper).enumerate() {
        if s > u {
            let shift = (u - s) / n;
            for i in 0..x.rows() {
                out.set(i, j, out.get(i, j) + shift);
            }
        }
    }
    Ok(out)
}

/// Internal state of a Dykstra projection run.
pub(crate) struct DykstraOutcome {
    pub result: RimPoint,
    pub iterations: usize,
    pub residual_row: f64,
    pub residual_pos: f64,
    pub residual_cols: f64,
    pub converged: bool,
}

/// Dykstra's alternating projection of an arbitrary matrix `y` onto the
/// manifold, with per-constraint correction variables. The exit test follows
/// the reference scheme: row-sum residual plus positivity at `tol`; column
/// residuals are reported but not part of the exit test.
pub(crate) fn dykstra_project(
    y: &DenseMatrix,
    bounds: &Bounds,
    max_iter: usize,
    tol: f64,
) -> Result<DykstraOutcome> {
    let (n, c) = (y.rows(), y.cols());
    if c != bounds.cols() {
        return Err(RimError::ShapeMismatch {
            expected: format!("{} columns", bounds.cols()),
            got: format!("{c} columns"),
            context: "dykstra_project",
        });
    }
    let mut p = y.clone();
    let mut z1 = DenseMatrix::zeros(n, c);
    let mut z2 = DenseMatrix::zeros(n, c);
    let mut z3 = DenseMatrix::zeros(n, c);
    let mut iterations = 0;
    let mut converged = false;

    for iter in 1..=max_iter {
        iterations = iter;

        // rows: simplex projection with correction z1
        let corrected = p.add(&z1)?;
        let projected = project_rows(&corrected)?;
        z1 = corrected.sub(&projected)?;
        p = projected;

        // columns: lower bounds with correction z2
        let corrected = p.add(&z2)?;
        let projected = project_col_lower(&corrected, bounds.lower())?;
        z2 = corrected.sub(&projected)?;
        p = projected;

        // columns: upper bounds with correction z3
        let corrected = p.add(&z3)?;
        let projected = project_col_upper(&corrected, bounds.upper())?;
        z3 = corrected.sub(&projected)?;
        p = projected;

        let (row, pos, _col) = residuals(&p, bounds);
        if row < tol && pos <= tol {
            converged = true;
            break;
        }
    }

    let (row, pos, col) = residuals(&p, bounds);
    let cert = tol.max(row).max(pos).max(col) * (1.0 + 1e-12);
    Ok(DykstraOutcome {
        result: RimPoint::from_parts(p, bounds.clone(), cert),
        iterations,
        residual_row: row,
        residual_pos: pos,
        residual_cols: col,
        converged,
    })
}

/// Geodesic retraction: Euclidean projection of `x + t v` onto the manifold
/// via Dykstra's algorithm.
pub fn retract_dykstra(
    x: &RimPoint,
    v: &TangentVector,
    t: f64,
    cfg: &RetractionMethod,
) -> Result<RetractionReport> {
    cfg.validate()?;
    let bounds = x.bounds();
    let target = x.matrix().add_scaled(t, v.matrix())?;
    let out = dykstra_project(
        &target,
        bounds,
        cfg.resolved_max_iter(x.matrix().rows(), x.matrix().cols()),
        cfg.resolved_tol(bounds),
    )?;
    Ok(RetractionReport {
        result: out.result,
        iterations: out.iterations,
        residual_row: out.residual_row,
        residual_pos: out.residual_pos,
        residual_cols: out.residual_cols,
        converged: out.converged,
    })
}

/// Dual gradient ascent on the Lagrange multipliers (nu free, omega >= 0,
/// rho >= 0); the primal is recovered as
/// `max(0, X + tV - nu 1_c^T - 1_n omega^T + 1_n rho^T)`.
pub fn retract_dual(
    x: &RimPoint,
    v: &TangentVector,
    t: f64,
    cfg: &RetractionMethod,
) -> Result<RetractionReport> {
    cfg.validate()?;
    let bounds = x.bounds();
    let (n, c) = (x.matrix().rows(), x.matrix().cols());
    let z = x.matrix().add_scaled(t, v.matrix())?;
    let step = cfg.step;
    let tol = cfg.resolved_tol(bounds);
    let max_iter = cfg.resolved_max_iter(n, c).max(100);

    let mut nu = vec![1.0_f64; n];
    let mut omega = vec![1.0_f64; c];
    let mut rho = vec![1.0_f64; c];

    let primal = |nu: &[f64], omega: &[f64], rho: &[f64]| -> DenseMatrix {
        DenseMatrix::from_fn(n, c, |i, j| {
            (z.get(i, j) - nu[i] - omega[j] + rho[j]).max(0.0)
        })
    };

    let mut prev_residual = f64::INFINITY;
    let mut growth_streak = 0usize;
    let mut iterations = 0;
    let mut converged = false;

    for iter in 1..=max_iter {
        iterations = iter;
        let f = primal(&nu, &omega, &rho);
        let row_sums = f.row_sums();
        let col_sums = f.col_sums();

        for (i, s) in row_sums.iter().enumerate() {
            nu[i] += step * (s - 1.0);
        }
        for (j, s) in col_sums.iter().enumerate() {
            omega[j] = (omega[j] + step * (s - bounds.upper()[j])).max(0.0);
            rho[j] = (rho[j] + step * (bounds.lower()[j] - s)).max(0.0);
        }

        // projected dual gradient: row balance for nu, and for the clamped
        // multipliers the full gradient where positive, only the ascent
        // (violation) part at the clamp — so the exit implies both
        // feasibility and complementary slackness, i.e. dual optimality
        let stat_row = row_sums
            .iter()
            .map(|s| (s - 1.0) * (s - 1.0))
            .sum::<f64>()
            .sqrt();
        let mut stat_cols = 0.0_f64;
        for (j, s) in col_sums.iter().enumerate() {
            let go = s - bounds.upper()[j];
            let gr = bounds.lower()[j] - s;
            let po = if omega[j] > 0.0 { go.abs() } else { go.max(0.0) };
            let pr = if rho[j] > 0.0 { gr.abs() } else { gr.max(0.0) };
            stat_cols = stat_cols.max(po).max(pr);
        }
        let residual = stat_row + stat_cols;
        if stat_row < tol && stat_cols <= tol {
            converged = true;
            break;
        }
        // a too-large step makes the residual grow geometrically; a healthy
        // run decreases (possibly with oscillation) and resets the streak
        if residual > prev_residual * 1.01 {
            growth_streak += 1;
            if growth_streak >= 50 {
                return Err(RimError::DualDivergence {
                    iterations: iter,
                    residual,
                });
            }
        } else {
            growth_streak = 0;
        }
        prev_residual = residual;
    }

    let f = primal(&nu, &omega, &rho);
    let (row, pos, col) = residuals(&f, bounds);
    let cert = tol.max(row).max(pos).max(col) * (1.0 + 1e-12);
    Ok(RetractionReport {
        result: RimPoint::from_parts(f, bounds.clone(), cert),
        iterations,
        residual_row: row,
        residual_pos: pos,
        residual_cols: col,
        converged,
    })
}

/// Exponent clamp applied to `tV ./ X` before the elementwise exp; inactive
/// for the small steps retractions are called with.
const SINKHORN_EXP_CLAMP: f64 = 50.0;

/// Bounded Sinkhorn retraction:
/// `diag(p) (X .* exp(tV ./ X)) diag(q .* w)` with `p` from row balancing
/// and `q`, `w` clamped column scalings enforcing the bounds.
pub fn retract_sinkhorn(
    x: &RimPoint,
    v: &TangentVector,
    t: f64,
    cfg: &RetractionMethod,
) -> Result<RetractionReport> {
    cfg.validate()?;
    let bounds = x.bounds();
    let (n, c) = (x.matrix().rows(), x.matrix().cols());
    if x.matrix().min_entry() <= 0.0 {
        return Err(RimError::InvalidValue(
            "Sinkhorn retraction requires a strictly positive point".into(),
        ));
    }
    let tol = cfg.resolved_tol(bounds);
    let max_iter = cfg.resolved_max_iter(n, c).max(100);

    let xm = x.matrix();
    let mut k = DenseMatrix::zeros(n, c);
    for i in 0..n {
        for j in 0..c {
            let e = (t * v.matrix().get(i, j) / xm.get(i, j))
                .clamp(-SINKHORN_EXP_CLAMP, SINKHORN_EXP_CLAMP);
            k.set(i, j, xm.get(i, j) * e.exp());
        }
    }
    if k.data().iter().any(|v| !v.is_finite()) {
        return Err(RimError::Overflow("sinkhorn retraction exp"));
    }

    let kt = k.transpose();
    let mut p = vec![1.0_f64; n];
    let mut q = vec![1.0_f64; c];
    let mut w = vec![1.0_f64; c];
    let lower = bounds.lower();
    let upper = bounds.upper();

    let assemble = |p: &[f64], q: &[f64], w: &[f64]| -> DenseMatrix {
        DenseMatrix::from_fn(n, c, |i, j| p[i] * k.get(i, j) * q[j] * w[j])
    };

    let mut iterations = 0;
    let mut converged = false;
    for iter in 1..=max_iter {
        iterations = iter;
        // row balancing
        let qw: Vec<f64> = q.iter().zip(&w).map(|(a, b)| a * b).collect();
        let kqw = k.matvec(&qw)?;
        for (pi, s) in p.iter_mut().zip(&kqw) {
            if *s <= 0.0 {
                return Err(RimError::Overflow("sinkhorn row scaling"));
            }
            *pi = 1.0 / s;
        }
        // column scalings, clamped at 1
        let ktp = kt.matvec(&p)?;
        for j in 0..c {
            q[j] = (lower[j] / (ktp[j] * w[j])).max(1.0);
        }
        for j in 0..c {
            w[j] = (upper[j] / (ktp[j] * q[j])).min(1.0);
        }

        let f = assemble(&p, &q, &w);
        let (row, pos, col) = residuals(&f, bounds);
        if row < tol && pos <= tol && col <= tol {
            converged = true;
            break;
        }
    }

    let f = assemble(&p, &q, &w);
    if f.data().iter().any(|v| !v.is_finite()) {
        return Err(RimError::Overflow("sinkhorn retraction scaling"));
    }
    let (row, pos, col) = residuals(&f, bounds);
    let cert = tol.max(row).max(pos).max(col) * (1.0 + 1e-12);
    Ok(RetractionReport {
        result: RimPoint::from_parts(f, bounds.clone(), cert),
        iterations,
        residual_row: row,
        residual_pos: pos,
        residual_cols: col,
        converged,
    })
}
