//! `rim approx`: the norm approximation experiment — recover a random
//! row-stochastic target from a random start, on either manifold.

use crate::config::{self, Config};
use crate::error::{CliError, Result};
use crate::util::{self, Manifold, Solver};
use clap::Args;
use rim_core::optim::OptimizerOptions;
use rim_core::problems::NormApprox;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct ApproxArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub c: Option<usize>,
    /// rgd, rcg, or rtr (default rgd)
    #[arg(long)]
    pub solver: Option<String>,
    /// rim or ds (default rim)
    #[arg(long)]
    pub manifold: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Result JSON path; a trace CSV is written alongside (default
    /// approx.json)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &ApproxArgs, cfg: &Config) -> Result<()> {
    let n = config::resolve_required(args.n, cfg, "n")?;
    let c = config::resolve_required(args.c, cfg, "c")?;
    if n == 0 || c == 0 || c > n {
        return Err(CliError::Validation(format!(
            "need n >= c >= 1, got n = {n}, c = {c}"
        )));
    }
    let solver = Solver::parse(&config::resolve(
        args.solver.clone(),
        cfg,
        "solver",
        "rgd".to_owned(),
    )?)?;
    let manifold = Manifold::parse(&config::resolve(
        args.manifold.clone(),
        cfg,
        "manifold",
        "rim".to_owned(),
    )?)?;
    let seed = config::resolve(args.seed, cfg, "seed", 0u64)?;
    let max_iter = config::resolve(args.max_iter, cfg, "max-iter", 200usize)?;
    let out = config::resolve(
        args.out.clone(),
        cfg,
        "out",
        PathBuf::from("approx.json"),
    )?;

    let target = util::random_stochastic(n, c, seed);
    let problem = NormApprox::new(target)?;
    let x0 = match manifold {
        Manifold::Rim => util::rim_start(n, c, problem.bounds(), seed.wrapping_add(1))?,
        Manifold::Ds => util::balanced_positive(
            n,
            &problem.bounds().lower().to_vec(),
            problem.bounds(),
            seed.wrapping_add(1),
        )?,
    };
    let opts = OptimizerOptions {
        max_iter,
        grad_tol: 1e-10,
        seed,
        ..Default::default()
    };
    let trace = util::run_solver(solver, manifold, &problem, &x0, &opts)?;

    util::write_trace_csv(&util::sibling_csv(&out, "trace"), &trace)?;
    util::write_json(&out, &trace.summary_json(solver.name(), manifold.name()))?;
    Ok(())
}
