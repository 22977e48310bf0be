//! Riemannian gradient descent, conjugate gradient, and trust region on the
//! relaxed indicator matrix manifold.

use crate::error::{Result, RimError};
use crate::manifold::{egrad_to_rgrad, ehess_to_rhess, RimPoint, TangentVector};
use crate::matrix::DenseMatrix;
use crate::retraction::RetractionMethod;
use serde::Serialize;
use std::io::Write;
use std::time::Instant;

/// Abstract cost with Euclidean gradient and optional Euclidean
/// Hessian-vector product (required by the trust-region solver).
pub trait Problem {
    fn cost(&self, f: &DenseMatrix) -> Result<f64>;
    fn egrad(&self, f: &DenseMatrix) -> Result<DenseMatrix>;
    fn ehess_vec(&self, _f: &DenseMatrix, _v: &DenseMatrix) -> Option<Result<DenseMatrix>> {
        None
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub initial_step: f64,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub tr_radius0: f64,
    pub tr_radius_max: f64,
    pub retraction: RetractionMethod,
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-6,
            initial_step: 1.0,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            tr_radius0: 1.0,
            tr_radius_max: 1e4,
            retraction: RetractionMethod::dykstra(),
            seed: 0,
        }
    }
}

impl OptimizerOptions {
    fn validate(&self) -> Result<()> {
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return Err(RimError::InvalidValue("need 0 < armijo_c1 < 1".into()));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(RimError::InvalidValue(
                "need 0 < backtrack_factor < 1".into(),
            ));
        }
        self.retraction.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    GradTol,
    MaxIter,
    StepCollapse,
    /// A retraction or problem evaluation failed; the trace holds the
    /// iterations completed before the failure.
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub cost: f64,
    pub rgrad_norm: f64,
    pub step: f64,
    pub elapsed_seconds: f64,
}

/// Per-iteration log of an optimizer run plus the final point.
#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub final_point: RimPoint,
    pub termination: Termination,
}

impl Trace {
    pub fn final_cost(&self) -> f64 {
        self.records.last().map(|r| r.cost).unwrap_or(f64::NAN)
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.records
            .last()
            .map(|r| r.rgrad_norm)
            .unwrap_or(f64::NAN)
    }

    pub fn iterations(&self) -> usize {
        self.records.last().map(|r| r.iter).unwrap_or(0)
    }

    pub fn elapsed_seconds(&self) -> f64 {
        self.records
            .last()
            .map(|r| r.elapsed_seconds)
            .unwrap_or(0.0)
    }

    /// Costs are non-increasing over accepted iterations.
    pub fn is_monotone(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].cost <= w[0].cost + 1e-12 * w[0].cost.abs().max(1.0))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,cost,rgrad_norm,step,elapsed_seconds")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.17e},{:.17e},{:.17e},{:.6}",
                r.iter, r.cost, r.rgrad_norm, r.step, r.elapsed_seconds
            )?;
        }
        Ok(())
    }

    pub fn summary_json(&self, solver: &str, manifold: &str) -> serde_json::Value {
        serde_json::json!({
            "solver": solver,
            "manifold": manifold,
            "final_cost": self.final_cost(),
            "final_grad_norm": self.final_grad_norm(),
            "iterations": self.iterations(),
            "seconds": self.elapsed_seconds(),
            "termination": format!("{:?}", self.termination),
        })
    }
}

/// Backtracking Armijo line search along a descent direction. Returns the
/// accepted step together with the retracted point and its cost, or `None`
/// when the step collapses (more than 60 backtracks).
pub fn armijo_search(
    problem: &dyn Problem,
    x: &RimPoint,
    d: &TangentVector,
    g: &TangentVector,
    cost_x: f64,
    opts: &OptimizerOptions,
) -> Result<Option<(f64, RimPoint, f64)>> {
    let slope = g.matrix().frob_inner(d.matrix())?;
    if slope >= 0.0 {
        return Err(RimError::InvalidValue(format!(
            "armijo_search requires a descent direction, got slope {slope:.3e}"
        )));
    }
    let mut step = opts.initial_step;
    for _ in 0..=60 {
        let report = opts.retraction.retract(x, d, step)?;
        let cand_cost = problem.cost(report.result.matrix())?;
        if cand_cost <= cost_x + opts.armijo_c1 * step * slope {
            return Ok(Some((step, report.result, cand_cost)));
        }
        step *= opts.backtrack_factor;
        if step < 1e-14 {
            break;
        }
    }
    Ok(None)
}

struct RunState {
    records: Vec<TraceRecord>,
    started: Instant,
}

impl RunState {
    fn new() -> Self {
        Self {
            records: Vec::new(),
            started: Instant::now(),
        }
    }

    fn push(&mut self, iter: usize, cost: f64, rgrad_norm: f64, step: f64) {
        self.records.push(TraceRecord {
            iter,
            cost,
            rgrad_norm,
            step,
            elapsed_seconds: self.started.elapsed().as_secs_f64(),
        });
    }

    fn finish(self, final_point: RimPoint, termination: Termination) -> Trace {
        Trace {
            records: self.records,
            final_point,
            termination,
        }
    }
}

/// Riemannian gradient descent with Armijo backtracking.
pub fn rgd(problem: &dyn Problem, x0: &RimPoint, opts: &OptimizerOptions) -> Result<Trace> {
    opts.validate()?;
    let mut state = RunState::new();
    let mut x = x0.clone();
    let mut cost = problem.cost(x.matrix())?;

    for iter in 0..opts.max_iter {
        let g = egrad_to_rgrad(&problem.egrad(x.matrix())?);
        let gnorm = g.norm();
        state.push(iter, cost, gnorm, 0.0);
        if gnorm <= opts.grad_tol {
            return Ok(state.finish(x, Termination::GradTol));
        }
        let d = g.scale(-1.0);
        match armijo_search(problem, &x, &d, &g, cost, opts) {
            Ok(Some((step, next, next_cost))) => {
                state.records.last_mut().unwrap().step = step;
                x = next;
                cost = next_cost;
            }
            Ok(None) => return Ok(state.finish(x, Termination::StepCollapse)),
            Err(_) => return Ok(state.finish(x, Termination::Failed)),
        }
    }
    let g = egrad_to_rgrad(&problem.egrad(x.matrix())?);
    state.push(opts.max_iter, cost, g.norm(), 0.0);
    Ok(state.finish(x, Termination::MaxIter))
}

/// Gradient descent with a fixed step, used to probe the O(1/T) rate bound.
pub fn rgd_fixed_step(
    problem: &dyn Problem,
    x0: &RimPoint,
    step: f64,
    iters: usize,
    retraction: &RetractionMethod,
) -> Result<Trace> {
    let mut state = RunState::new();
    let mut x = x0.clone();
    for iter in 0..iters {
        let cost = problem.cost(x.matrix())?;
        let g = egrad_to_rgrad(&problem.egrad(x.matrix())?);
        state.push(iter, cost, g.norm(), step);
        let d = g.scale(-1.0);
        let report = retraction.retract(&x, &d, step)?;
        x = report.result;
    }
    let cost = problem.cost(x.matrix())?;
    let g = egrad_to_rgrad(&problem.egrad(x.matrix())?);
    state.push(iters, cost, g.norm(), step);
    Ok(state.finish(x, Termination::MaxIter))
}

/// Riemannian conjugate gradient with the Polak-Ribiere(+) coefficient.
/// Vector transport is the identity: the tangent space is the same at every
/// point of this manifold.
pub fn rcg(problem: &dyn Problem, x0: &RimPoint, opts: &OptimizerOptions) -> Result<Trace> {
    opts.validate()?;
    let mut state = RunState::new();
    let mut x = x0.clone();
    let mut cost = problem.cost(x.matrix())?;
    let mut g = egrad_to_rgrad(&problem.egrad(x.matrix())?);
    let mut d = g.scale(-1.0);
    let restart_period = x.matrix().rows() * x.matrix().cols();

    for iter in 0..opts.max_iter {
        let gnorm = g.norm();
        state.push(iter, cost, gnorm, 0.0);
        if gnorm <= opts.grad_tol {
            return Ok(state.finish(x, Termination::GradTol));
        }
        // restart to steepest descent on schedule or when d is not a descent
        // direction
        if iter > 0 && iter % restart_period == 0 {
            d = g.scale(-1.0);
        }
        if g.matrix().frob_inner(d.matrix())? >= 0.0 {
            d = g.scale(-1.0);
        }
        let mut search = armijo_search(problem, &x, &d, &g, cost, opts);
        // a collapsed line search along a conjugate direction is not fatal:
        // fall back to steepest descent before giving up
        if matches!(search, Ok(None)) {
            let steepest = g.scale(-1.0);
            if steepest
                .matrix()
                .sub(d.matrix())?
                .max_abs()
                > 1e-14 * g.norm().max(1.0)
            {
                d = steepest;
                search = armijo_search(problem, &x, &d, &g, cost, opts);
            }
        }
        match search {
            Ok(Some((step, next, next_cost))) => {
                state.records.last_mut().unwrap().step = step;
                let g_next = egrad_to_rgrad(&problem.egrad(next.matrix())?);
                let num = g_next
                    .matrix()
                    .frob_inner(&g_next.matrix().sub(g.matrix())?)?;
                let den = g.matrix().frob_inner(g.matrix())?;
                let beta = (num / den).max(0.0);
                let new_d = g_next.matrix().scale(-1.0).add_scaled(beta, d.matrix())?;
                d = TangentVector::new(crate::manifold::tangent_project(&new_d).into_matrix())?;
                x = next;
                cost = next_cost;
                g = g_next;
            }
            Ok(None) => return Ok(state.finish(x, Termination::StepCollapse)),
            Err(_) => return Ok(state.finish(x, Termination::Failed)),
        }
    }
    state.push(opts.max_iter, cost, g.norm(), 0.0);
    Ok(state.finish(x, Termination::MaxIter))
}

/// Steihaug truncated CG for `min <g,d> + 1/2 <H d, d>` subject to
/// `||d|| <= radius`. Returns the step and whether the boundary was hit.
fn steihaug_tcg(
    hess: &dyn Fn(&DenseMatrix) -> Result<DenseMatrix>,
    g: &TangentVector,
    radius: f64,
    inner_tol: f64,
    max_inner: usize,
) -> Result<(DenseMatrix, bool)> {
    let (n, c) = (g.matrix().rows(), g.matrix().cols());
    let mut d = DenseMatrix::zeros(n, c);
    let mut r = g.matrix().scale(-1.0);
    let mut p = r.clone();
    let mut r_sq = r.frob_inner(&r)?;
    if r_sq.sqrt() <= inner_tol {
        return Ok((d, false));
    }

    for _ in 0..max_inner {
        let hp = hess(&p)?;
        let php = p.frob_inner(&hp)?;
        if php <= 0.0 {
            // negative curvature: walk to the boundary along p
            let tau = boundary_step(&d, &p, radius)?;
            return Ok((d.add_scaled(tau, &p)?, true));
        }
        let alpha = r_sq / php;
        let d_next = d.add_scaled(alpha, &p)?;
        if d_next.frob_norm() >= radius {
            let tau = boundary_step(&d, &p, radius)?;
            return Ok((d.add_scaled(tau, &p)?, true));
        }
        d = d_next;
        r = r.add_scaled(-alpha, &hp)?;
        let r_sq_next = r.frob_inner(&r)?;
        if r_sq_next.sqrt() <= inner_tol {
            return Ok((d, false));
        }
        let beta = r_sq_next / r_sq;
        p = r.add_scaled(beta, &p)?;
        r_sq = r_sq_next;
    }
    Ok((d, false))
}

/// Positive root of ||d + tau p|| = radius.
fn boundary_step(d: &DenseMatrix, p: &DenseMatrix, radius: f64) -> Result<f64> {
    let dd = d.frob_inner(d)?;
    let dp = d.frob_inner(p)?;
    let pp = p.frob_inner(p)?;
    let disc = (dp * dp + pp * (radius * radius - dd)).max(0.0);
    Ok((-dp + disc.sqrt()) / pp)
}

/// Riemannian trust region with a Steihaug-Toint inner solver.
pub fn rtr(problem: &dyn Problem, x0: &RimPoint, opts: &OptimizerOptions) -> Result<Trace> {
    opts.validate()?;
    let mut state = RunState::new();
    let mut x = x0.clone();
    let mut cost = problem.cost(x.matrix())?;
    let mut radius = opts.tr_radius0;
    let dim = x.matrix().rows() * x.matrix().cols();

    for iter in 0..opts.max_iter {
        let g = egrad_to_rgrad(&problem.egrad(x.matrix())?);
        let gnorm = g.norm();
        state.push(iter, cost, gnorm, radius);
        if gnorm <= opts.grad_tol {
            return Ok(state.finish(x, Termination::GradTol));
        }

        let xm = x.matrix().clone();
        let hess = |v: &DenseMatrix| -> Result<DenseMatrix> {
            let hv = problem
                .ehess_vec(&xm, v)
                .ok_or_else(|| {
                    RimError::InvalidValue(
                        "trust region requires a Hessian-vector product".into(),
                    )
                })??;
            Ok(ehess_to_rhess(&hv).into_matrix())
        };

        // superlinear forcing sequence
        let inner_tol = gnorm.sqrt().min(0.1) * gnorm;
        let (step_dir, hit_boundary) =
            match steihaug_tcg(&hess, &g, radius, inner_tol, dim.min(250)) {
                Ok(v) => v,
                Err(_) => return Ok(state.finish(x, Termination::Failed)),
            };
        if step_dir.frob_norm() == 0.0 {
            return Ok(state.finish(x, Termination::GradTol));
        }

        let predicted = -(g.matrix().frob_inner(&step_dir)?
            + 0.5 * step_dir.frob_inner(&hess(&step_dir)?)?);
        let d = TangentVector::new(crate::manifold::tangent_project(&step_dir).into_matrix())?;
        let report = match opts.retraction.retract(&x, &d, 1.0) {
            Ok(r) => r,
            Err(_) => return Ok(state.finish(x, Termination::Failed)),
        };
        let cand_cost = match problem.cost(report.result.matrix()) {
            Ok(v) => v,
            Err(_) => return Ok(state.finish(x, Termination::Failed)),
        };
        let actual = cost - cand_cost;
        let rho = actual / predicted;

        if !rho.is_finite() {
            radius *= 0.25;
            continue;
        }
        if rho < 0.25 {
            radius *= 0.25;
        } else if rho > 0.75 && hit_boundary {
            radius = (2.0 * radius).min(opts.tr_radius_max);
        }
        if rho > 0.1 && actual >= 0.0 {
            x = report.result;
            cost = cand_cost;
        }
        if radius < 1e-14 {
            return Ok(state.finish(x, Termination::StepCollapse));
        }
    }
    let g = egrad_to_rgrad(&problem.egrad(x.matrix())?);
    state.push(opts.max_iter, cost, g.norm(), radius);
    Ok(state.finish(x, Termination::MaxIter))
}
