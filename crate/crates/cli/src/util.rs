//! Shared plumbing for the experiment commands: seeded instance
//! generation, solver/manifold selection, and output writers.

use crate::error::{CliError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rim_core::ds::{ds_retract_sinkhorn, ds_rgd};
use rim_core::manifold::{random_point, random_tangent, Bounds, RimPoint};
use rim_core::optim::{rcg, rgd, rtr, OptimizerOptions, Problem, Termination, Trace};
use rim_core::DenseMatrix;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Rgd,
    Rcg,
    Rtr,
}

impl Solver {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "rgd" => Ok(Self::Rgd),
            "rcg" => Ok(Self::Rcg),
            "rtr" => Ok(Self::Rtr),
            other => Err(CliError::Validation(format!(
                "unknown solver {other:?} (expected rgd, rcg, or rtr)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Rgd => "rgd",
            Self::Rcg => "rcg",
            Self::Rtr => "rtr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Manifold {
    Rim,
    Ds,
}

impl Manifold {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "rim" => Ok(Self::Rim),
            "ds" => Ok(Self::Ds),
            other => Err(CliError::Validation(format!(
                "unknown manifold {other:?} (expected rim or ds)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Rim => "rim",
            Self::Ds => "ds",
        }
    }
}

/// Strictly positive matrix with unit row sums, rows normalized exactly.
pub fn random_stochastic(n: usize, c: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DenseMatrix::from_fn(n, c, |_, _| rng.gen_range(0.5..1.5));
    let sums = raw.row_sums();
    DenseMatrix::from_fn(n, c, |i, j| raw.get(i, j) / sums[i])
}

/// Strictly positive point with exact row sums and column sums equal to
/// `col_target`, built by Sinkhorn-balancing a random positive matrix.
pub fn balanced_positive(
    n: usize,
    col_target: &[f64],
    bounds: &Bounds,
    seed: u64,
) -> Result<RimPoint> {
    let c = col_target.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DenseMatrix::from_fn(n, c, |_, _| rng.gen_range(0.5..1.5));
    let zero = DenseMatrix::zeros(n, c);
    let balanced = ds_retract_sinkhorn(
        &raw,
        &zero,
        0.0,
        &vec![1.0; n],
        col_target,
        10_000,
        1e-12,
    )?;
    Ok(RimPoint::certify(balanced, bounds.clone(), 1e-6)?)
}

/// Strictly positive interior point: the uniform matrix plus a small
/// tangent perturbation, certified at the bounds' own tolerance.
pub fn interior_start(n: usize, c: usize, bounds: &Bounds, seed: u64) -> Result<RimPoint> {
    let uniform = DenseMatrix::constant(n, c, 1.0 / c as f64);
    let t = random_tangent(n, c, seed)?;
    let x = uniform.add_scaled(0.2 / c as f64, t.matrix())?;
    Ok(RimPoint::certify(x, bounds.clone(), bounds.default_feas_tol())?)
}

/// Seeded starting point for the relaxed manifold.
pub fn rim_start(n: usize, c: usize, bounds: &Bounds, seed: u64) -> Result<RimPoint> {
    Ok(random_point(n, c, bounds, seed)?)
}

/// Run the selected solver on the selected manifold. The doubly stochastic
/// baseline only ships gradient descent.
pub fn run_solver(
    solver: Solver,
    manifold: Manifold,
    problem: &dyn Problem,
    x0: &RimPoint,
    opts: &OptimizerOptions,
) -> Result<Trace> {
    let trace = match (manifold, solver) {
        (Manifold::Rim, Solver::Rgd) => rgd(problem, x0, opts)?,
        (Manifold::Rim, Solver::Rcg) => rcg(problem, x0, opts)?,
        (Manifold::Rim, Solver::Rtr) => rtr(problem, x0, opts)?,
        (Manifold::Ds, Solver::Rgd) => ds_rgd(problem, x0, opts)?,
        (Manifold::Ds, other) => {
            return Err(CliError::Validation(format!(
                "the doubly stochastic baseline only supports rgd, not {}",
                other.name()
            )))
        }
    };
    if trace.termination == Termination::Failed {
        return Err(CliError::Convergence(format!(
            "solver failed after {} iterations (final cost {:.6e})",
            trace.iterations(),
            trace.final_cost()
        )));
    }
    Ok(trace)
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Validation(format!("json encoding: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_trace_csv(path: &Path, trace: &Trace) -> Result<()> {
    let file = std::fs::File::create(path)?;
    Ok(trace.write_csv(std::io::BufWriter::new(file))?)
}

/// Sibling path `<stem>.<tag>.csv` next to a JSON output path.
pub fn sibling_csv(json_path: &Path, tag: &str) -> PathBuf {
    let stem = json_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_owned());
    json_path.with_file_name(format!("{stem}.{tag}.csv"))
}
