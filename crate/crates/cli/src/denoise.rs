//! `rim denoise`: total-variation image denoising on the manifold. The
//! image rows are normalized to the simplex; the data-fit target is the
//! noisy normalized image.

use crate::config::{self, Config};
use crate::error::{CliError, Result};
use crate::pgm::PgmImage;
use crate::util::{self, Manifold, Solver};
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rim_core::manifold::{Bounds, RimPoint};
use rim_core::optim::OptimizerOptions;
use rim_core::problems::{Tv, TV_DEFAULT_EPSILON};
use rim_core::DenseMatrix;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Input image (plain-text PGM, P2)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Gaussian noise level on the (0,1)-scaled image (default 0.3)
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Total-variation weight (default 0.3)
    #[arg(long)]
    pub xi: Option<f64>,
    /// rim or ds (default rim)
    #[arg(long)]
    pub manifold: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Denoised image path (default denoised.pgm)
    #[arg(long)]
    pub out_image: Option<PathBuf>,
    /// Result JSON path (default denoise.json)
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

pub fn run(args: &DenoiseArgs, cfg: &Config) -> Result<()> {
    let input: PathBuf = config::resolve_required(args.input.clone(), cfg, "input")?;
    let sigma = config::resolve(args.noise_sigma, cfg, "noise-sigma", 0.3f64)?;
    let xi = config::resolve(args.xi, cfg, "xi", 0.3f64)?;
    if xi < 0.0 {
        return Err(CliError::Validation(format!("xi must be >= 0, got {xi}")));
    }
    if sigma < 0.0 {
        return Err(CliError::Validation(format!(
            "noise-sigma must be >= 0, got {sigma}"
        )));
    }
    let manifold = Manifold::parse(&config::resolve(
        args.manifold.clone(),
        cfg,
        "manifold",
        "rim".to_owned(),
    )?)?;
    let seed = config::resolve(args.seed, cfg, "seed", 0u64)?;
    let max_iter = config::resolve(args.max_iter, cfg, "max-iter", 100usize)?;
    let out_image = config::resolve(
        args.out_image.clone(),
        cfg,
        "out-image",
        PathBuf::from("denoised.pgm"),
    )?;
    let out_json = config::resolve(
        args.out_json.clone(),
        cfg,
        "out-json",
        PathBuf::from("denoise.json"),
    )?;

    let image = PgmImage::read(&input)?;
    let max_value = image.max_value as f64;
    let raw = image.to_matrix();
    let (n, c) = (raw.rows(), raw.cols());
    if c < 2 {
        return Err(CliError::Validation(
            "image must be at least two pixels wide".into(),
        ));
    }

    // scale to (0,1), add seeded noise, clamp strictly inside the box
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0)
        .map_err(|e| CliError::Validation(format!("noise model: {e}")))?;
    let noisy = DenseMatrix::from_fn(n, c, |i, j| {
        let v = raw.get(i, j) / max_value + sigma * noise.sample(&mut rng);
        v.clamp(1e-6, 1.0 - 1e-6)
    });

    // normalize the rows to the simplex; the scales restore pixel
    // intensities afterwards
    let row_scales = noisy.row_sums();
    let target = DenseMatrix::from_fn(n, c, |i, j| noisy.get(i, j) / row_scales[i]);
    let col_sums = target.col_sums();
    let bounds = match manifold {
        Manifold::Rim => Bounds::new(
            col_sums.iter().map(|s| 0.9 * s).collect(),
            col_sums.iter().map(|s| 1.1 * s).collect(),
        )?,
        Manifold::Ds => Bounds::equal(col_sums)?,
    };
    let x0 = RimPoint::certify(target.clone(), bounds, 1e-6)?;
    let problem = Tv::new(target, xi, TV_DEFAULT_EPSILON)?;

    let opts = OptimizerOptions {
        max_iter,
        grad_tol: 1e-8,
        seed,
        ..Default::default()
    };
    let trace = util::run_solver(Solver::Rgd, manifold, &problem, &x0, &opts)?;

    let f = trace.final_point.matrix();
    let restored = DenseMatrix::from_fn(n, c, |i, j| {
        f.get(i, j) * row_scales[i] * max_value
    });
    PgmImage::from_matrix(&restored, image.max_value).write(&out_image)?;
    util::write_json(
        &out_json,
        &serde_json::json!({
            "loss": trace.final_cost(),
            "seconds": trace.elapsed_seconds(),
        }),
    )?;
    Ok(())
}
