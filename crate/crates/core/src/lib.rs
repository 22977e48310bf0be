//! Riemannian optimization on the relaxed indicator matrix manifold
//! `M = { X | X 1_c = 1_n, l <= X^T 1_n <= u, X > 0 }`: three retractions,
//! gradient/conjugate-gradient/trust-region solvers, graph-cut and
//! denoising cost functions, clustering metrics, and a doubly-stochastic
//! baseline for comparison.

pub mod clustering;
pub mod ds;
pub mod error;
pub mod graph;
pub mod manifold;
pub mod matrix;
pub mod optim;
pub mod problems;
pub mod retraction;

pub use error::{Result, RimError};
pub use manifold::{
    egrad_to_rgrad, ehess_to_rhess, inner, is_on_manifold, manifold_dim, random_point,
    random_tangent, tangent_project, Bounds, RimPoint, TangentVector,
};
pub use matrix::DenseMatrix;
pub use optim::{rcg, rgd, rgd_fixed_step, rtr, OptimizerOptions, Problem, Termination, Trace};
pub use retraction::{RetractionKind, RetractionMethod, RetractionReport};
