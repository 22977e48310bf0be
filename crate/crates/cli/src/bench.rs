//! `rim retract-bench`: timing sweep over the three retractions across
//! problem sizes and bound modes.

use crate::config::{self, Config};
use crate::error::{CliError, Result};
use crate::util;
use clap::Args;
use rim_core::manifold::{random_tangent, Bounds};
use rim_core::retraction::RetractionMethod;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated row counts (default 500)
    #[arg(long)]
    pub rows: Option<String>,
    /// Comma-separated column counts (default 5)
    #[arg(long)]
    pub cols: Option<String>,
    /// Comma-separated methods from dykstra, sinkhorn, dual (default all)
    #[arg(long)]
    pub methods: Option<String>,
    /// Bound mode: `equal` or `band:<lo_frac>,<hi_frac>` (default: both
    /// equal and band:0.9,1.1)
    #[arg(long)]
    pub bounds: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Timed repetitions per configuration (default 5)
    #[arg(long)]
    pub reps: Option<usize>,
    /// Retraction step length (default 0.1)
    #[arg(long)]
    pub step: Option<f64>,
    /// Output CSV path; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
enum BoundMode {
    Equal,
    Band(f64, f64),
}

impl BoundMode {
    fn parse(text: &str) -> Result<Self> {
        if text == "equal" {
            return Ok(Self::Equal);
        }
        if let Some(rest) = text.strip_prefix("band:") {
            if let Some((lo, hi)) = rest.split_once(',') {
                let lo: f64 = lo.trim().parse().map_err(|_| bad_mode(text))?;
                let hi: f64 = hi.trim().parse().map_err(|_| bad_mode(text))?;
                return Ok(Self::Band(lo, hi));
            }
        }
        Err(bad_mode(text))
    }

    fn label(&self) -> String {
        match self {
            Self::Equal => "equal".to_owned(),
            Self::Band(lo, hi) => format!("band:{lo},{hi}"),
        }
    }

    fn build(&self, n: usize, c: usize) -> Result<Bounds> {
        match self {
            Self::Equal => Ok(Bounds::equal(vec![n as f64 / c as f64; c])?),
            Self::Band(lo, hi) => Ok(Bounds::band(n, c, *lo, *hi)?),
        }
    }
}

fn bad_mode(text: &str) -> CliError {
    CliError::Validation(format!(
        "bad bounds mode {text:?} (expected equal or band:<lo>,<hi>)"
    ))
}

fn parse_sizes(text: &str, what: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim().parse::<usize>().ok().filter(|&v| v > 0).ok_or_else(|| {
                CliError::Validation(format!("bad {what} entry {t:?}"))
            })
        })
        .collect()
}

fn parse_method(name: &str) -> Result<RetractionMethod> {
    match name {
        "dykstra" => Ok(RetractionMethod::dykstra()),
        "sinkhorn" => Ok(RetractionMethod::sinkhorn()),
        "dual" => Ok(RetractionMethod::dual_ascent()),
        other => Err(CliError::Validation(format!(
            "unknown retraction {other:?} (expected dykstra, sinkhorn, or dual)"
        ))),
    }
}

pub fn run(args: &BenchArgs, cfg: &Config) -> Result<()> {
    let rows = parse_sizes(
        &config::resolve(args.rows.clone(), cfg, "rows", "500".to_owned())?,
        "rows",
    )?;
    let cols = parse_sizes(
        &config::resolve(args.cols.clone(), cfg, "cols", "5".to_owned())?,
        "cols",
    )?;
    let methods_text = config::resolve(
        args.methods.clone(),
        cfg,
        "methods",
        "dykstra,sinkhorn,dual".to_owned(),
    )?;
    let methods: Vec<(String, RetractionMethod)> = methods_text
        .split(',')
        .map(|m| {
            let m = m.trim();
            parse_method(m).map(|cfg| (m.to_owned(), cfg))
        })
        .collect::<Result<_>>()?;
    let modes = match config::resolve(args.bounds.clone(), cfg, "bounds", String::new())? {
        s if s.is_empty() => vec![BoundMode::Equal, BoundMode::Band(0.9, 1.1)],
        s => vec![BoundMode::parse(&s)?],
    };
    let seed = config::resolve(args.seed, cfg, "seed", 0u64)?;
    let reps = config::resolve(args.reps, cfg, "reps", 5usize)?;
    let step = config::resolve(args.step, cfg, "step", 0.1f64)?;
    if reps == 0 {
        return Err(CliError::Validation("reps must be >= 1".into()));
    }

    let mut csv = String::from("method,n,c,mode,mean_seconds,std_seconds,converged_fraction\n");
    for &n in &rows {
        for &c in &cols {
            if c > n {
                return Err(CliError::Validation(format!(
                    "need rows >= cols, got {n} < {c}"
                )));
            }
            for mode in &modes {
                let bounds = mode.build(n, c)?;
                // instance generation is excluded from the timings
                let x = match mode {
                    BoundMode::Equal => util::balanced_positive(
                        n,
                        &bounds.lower().to_vec(),
                        &bounds,
                        seed,
                    )?,
                    BoundMode::Band(..) => util::interior_start(n, c, &bounds, seed)?,
                };
                let v = random_tangent(n, c, seed.wrapping_add(1))?;
                for (name, method) in &methods {
                    let mut seconds = Vec::with_capacity(reps);
                    let mut converged = 0usize;
                    for _ in 0..reps {
                        let t0 = Instant::now();
                        let outcome = method.retract(&x, &v, step);
                        seconds.push(t0.elapsed().as_secs_f64());
                        // a failed repetition counts as unconverged rather
                        // than aborting the whole sweep
                        if matches!(&outcome, Ok(r) if r.converged) {
                            converged += 1;
                        }
                    }
                    let mean = seconds.iter().sum::<f64>() / reps as f64;
                    let var = seconds
                        .iter()
                        .map(|s| (s - mean) * (s - mean))
                        .sum::<f64>()
                        / reps as f64;
                    let _ = writeln!(
                        csv,
                        "{name},{n},{c},{},{:.9},{:.9},{:.4}",
                        mode.label(),
                        mean,
                        var.sqrt(),
                        converged as f64 / reps as f64
                    );
                }
            }
        }
    }

    match &args.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
