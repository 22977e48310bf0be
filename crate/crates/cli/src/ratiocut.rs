//! `rim ratiocut`: graph clustering — build a k-NN Gaussian graph from a
//! CSV dataset, minimize the Ratio Cut over the manifold, discretize, and
//! score against the ground-truth labels.

use crate::config::{self, Config};
use crate::error::{CliError, Result};
use crate::util::{self, Manifold, Solver};
use clap::Args;
use rim_core::clustering::{discretize, MetricsRecord};
use rim_core::graph::{knn_gaussian_similarity, laplacian, Dataset};
use rim_core::manifold::{Bounds, RimPoint};
use rim_core::optim::OptimizerOptions;
use rim_core::problems::RatioCut;
use rim_core::DenseMatrix;
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct RatiocutArgs {
    /// Input CSV; one sample per row, features as decimal columns
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Last CSV column holds integer class labels (default true)
    #[arg(long)]
    pub label_col: Option<bool>,
    /// Nearest-neighbor count for the similarity graph (default 10)
    #[arg(long)]
    pub k: Option<usize>,
    /// Column lower bounds as a fraction of floor(n/c) (default 0.9)
    #[arg(long)]
    pub l_frac: Option<f64>,
    /// Column upper bounds as a fraction of floor(n/c) (default 1.1)
    #[arg(long)]
    pub u_frac: Option<f64>,
    /// rgd, rcg, or rtr (default rgd)
    #[arg(long)]
    pub solver: Option<String>,
    /// Starting point: uniform or random (default random)
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Result JSON path; trace and column-sum CSVs are written alongside
    /// (default ratiocut.json)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &RatiocutArgs, cfg: &Config) -> Result<()> {
    let data: PathBuf = config::resolve_required(args.data.clone(), cfg, "data")?;
    let label_col = config::resolve(args.label_col, cfg, "label-col", true)?;
    let k = config::resolve(args.k, cfg, "k", 10usize)?;
    let l_frac = config::resolve(args.l_frac, cfg, "l-frac", 0.9f64)?;
    let u_frac = config::resolve(args.u_frac, cfg, "u-frac", 1.1f64)?;
    let solver = Solver::parse(&config::resolve(
        args.solver.clone(),
        cfg,
        "solver",
        "rgd".to_owned(),
    )?)?;
    let init = config::resolve(args.init.clone(), cfg, "init", "random".to_owned())?;
    let seed = config::resolve(args.seed, cfg, "seed", 0u64)?;
    let max_iter = config::resolve(args.max_iter, cfg, "max-iter", 200usize)?;
    let out = config::resolve(
        args.out.clone(),
        cfg,
        "out",
        PathBuf::from("ratiocut.json"),
    )?;

    let dataset = Dataset::from_csv(&data, label_col)?;
    let labels = dataset
        .labels()
        .ok_or_else(|| {
            CliError::Validation(
                "clustering metrics need ground-truth labels; re-run with a label column"
                    .into(),
            )
        })?
        .to_vec();
    let n = dataset.len();
    let c = labels.iter().max().map(|m| m + 1).unwrap_or(0);
    if c < 2 {
        return Err(CliError::Validation(format!(
            "need at least two classes in the labels, found {c}"
        )));
    }

    let lap = laplacian(&knn_gaussian_similarity(&dataset, k)?)?;
    let problem = RatioCut::new(lap)?;
    let bounds = Bounds::band(n, c, l_frac, u_frac)?;
    let x0 = match init.as_str() {
        "random" => util::rim_start(n, c, &bounds, seed)?,
        "uniform" => RimPoint::certify(
            DenseMatrix::constant(n, c, 1.0 / c as f64),
            bounds.clone(),
            bounds.default_feas_tol(),
        )?,
        other => {
            return Err(CliError::Validation(format!(
                "unknown init {other:?} (expected uniform or random)"
            )))
        }
    };

    let opts = OptimizerOptions {
        max_iter,
        grad_tol: 1e-8,
        seed,
        ..Default::default()
    };
    let trace = util::run_solver(solver, Manifold::Rim, &problem, &x0, &opts)?;
    let f = trace.final_point.matrix();

    let pred = discretize(f);
    let metrics = MetricsRecord::compute(&pred, &labels)?;

    util::write_trace_csv(&util::sibling_csv(&out, "trace"), &trace)?;
    let mut colsums = String::from("column,sum,lower,upper\n");
    for (j, s) in f.col_sums().iter().enumerate() {
        let _ = writeln!(
            colsums,
            "{j},{s:.9},{:.9},{:.9}",
            bounds.lower()[j],
            bounds.upper()[j]
        );
    }
    std::fs::write(util::sibling_csv(&out, "colsums"), colsums)?;
    util::write_json(
        &out,
        &serde_json::json!({
            "final_cost": trace.final_cost(),
            "seconds": trace.elapsed_seconds(),
            "acc": metrics.acc,
            "nmi": metrics.nmi,
            "ari": metrics.ari,
        }),
    )?;
    Ok(())
}
