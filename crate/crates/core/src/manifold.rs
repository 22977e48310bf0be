//! The relaxed indicator matrix manifold
//! `M = { X | X 1_c = 1_n, l < X^T 1_n < u, X > 0 }`
//! together with its tangent space, gradient/Hessian conversions,
//! feasibility checks, and seeded random generation.

use crate::error::{Result, RimError};
use crate::matrix::DenseMatrix;
use crate::retraction;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Per-column lower/upper bounds on the column sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(RimError::InfeasibleBounds(format!(
                "lower has {} entries, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !l.is_finite() || !u.is_finite() || l > u)
        {
            return Err(RimError::InfeasibleBounds(
                "need lower[j] <= upper[j] elementwise with finite entries".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    /// Equal lower and upper: the doubly stochastic degenerate mode.
    pub fn equal(targets: Vec<f64>) -> Result<Self> {
        Self::new(targets.clone(), targets)
    }

    /// Band `[lo_frac * floor(n/c), hi_frac * floor(n/c)]` for every column.
    pub fn band(n: usize, c: usize, lo_frac: f64, hi_frac: f64) -> Result<Self> {
        let base = (n / c) as f64;
        Self::new(vec![lo_frac * base; c], vec![hi_frac * base; c])
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn cols(&self) -> usize {
        self.lower.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower == self.upper
    }

    /// Default feasibility tolerance: 1e-2 in the degenerate mode, 1e-1
    /// otherwise.
    pub fn default_feas_tol(&self) -> f64 {
        if self.is_degenerate() {
            1e-2
        } else {
            1e-1
        }
    }

    /// The column-sum budget must bracket the total row sum `n`.
    pub fn check_feasible(&self, n: usize) -> Result<()> {
        let lo: f64 = self.lower.iter().sum();
        let hi: f64 = self.upper.iter().sum();
        let n = n as f64;
        if lo > n + 1e-9 || hi < n - 1e-9 {
            return Err(RimError::InfeasibleBounds(format!(
                "column-sum budget [{lo}, {hi}] does not contain row total {n}"
            )));
        }
        Ok(())
    }
}

/// A matrix certified feasible for a `Bounds` at a tolerance.
#[derive(Debug, Clone)]
pub struct RimPoint {
    x: DenseMatrix,
    bounds: Bounds,
    feas_tol: f64,
}

impl RimPoint {
    /// Certify `x` against the manifold invariants at tolerance `feas_tol`.
    pub fn certify(x: DenseMatrix, bounds: Bounds, feas_tol: f64) -> Result<Self> {
        if x.cols() != bounds.cols() {
            return Err(RimError::ShapeMismatch {
                expected: format!("{} columns", bounds.cols()),
                got: format!("{} columns", x.cols()),
                context: "RimPoint::certify",
            });
        }
        let (row, pos, col) = feasibility_residuals(&x, &bounds);
        if row > feas_tol || pos > feas_tol || col > feas_tol {
            return Err(RimError::OffManifold(format!(
                "residuals row {row:.3e}, positivity {pos:.3e}, columns {col:.3e} exceed tolerance {feas_tol:.1e}"
            )));
        }
        Ok(Self {
            x,
            bounds,
            feas_tol,
        })
    }

    /// Construct without re-checking; used by retractions, which certify at
    /// their own achieved residuals.
    pub(crate) fn from_parts(x: DenseMatrix, bounds: Bounds, feas_tol: f64) -> Self {
        Self {
            x,
            bounds,
            feas_tol,
        }
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn feas_tol(&self) -> f64 {
        self.feas_tol
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.x
    }
}

/// A matrix with (numerically) zero row sums.
#[derive(Debug, Clone)]
pub struct TangentVector {
    v: DenseMatrix,
}

pub const TANGENT_ROW_SUM_TOL: f64 = 1e-10;

impl TangentVector {
    /// Wrap a matrix already known to have zero row sums.
    pub fn new(v: DenseMatrix) -> Result<Self> {
        let worst = v
            .row_sums()
            .iter()
            .fold(0.0_f64, |m, s| m.max(s.abs()));
        if worst > TANGENT_ROW_SUM_TOL {
            return Err(RimError::InvalidValue(format!(
                "tangent row sums must vanish; worst |row sum| = {worst:.3e}"
            )));
        }
        Ok(Self { v })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.v
    }

    pub fn norm(&self) -> f64 {
        self.v.frob_norm()
    }

    pub fn scale(&self, s: f64) -> TangentVector {
        TangentVector { v: self.v.scale(s) }
    }
}

/// dim M = (n - 1) c.
pub fn manifold_dim(n: usize, c: usize) -> Result<usize> {
    if n < 2 || c < 2 {
        return Err(RimError::InvalidValue(format!(
            "manifold is degenerate for n = {n}, c = {c}; need n >= 2 and c >= 2"
        )));
    }
    Ok((n - 1) * c)
}

fn feasibility_residuals(x: &DenseMatrix, bounds: &Bounds) -> (f64, f64, f64) {
    let row = x
        .row_sums()
        .iter()
        .fold(0.0_f64, |m, s| m.max((s - 1.0).abs()));
    let pos = (-x.min_entry()).max(0.0);
    let col = x
        .col_sums()
        .iter()
        .zip(bounds.lower().iter().zip(bounds.upper()))
        .fold(0.0_f64, |m, (s, (l, u))| {
            m.max((l - s).max(0.0)).max((s - u).max(0.0))
        });
    (row, pos, col)
}

/// Checks all three manifold invariants at tolerance `tol`.
pub fn is_on_manifold(x: &DenseMatrix, bounds: &Bounds, tol: f64) -> Result<bool> {
    if x.cols() != bounds.cols() {
        return Err(RimError::ShapeMismatch {
            expected: format!("{} columns", bounds.cols()),
            got: format!("{} columns", x.cols()),
            context: "is_on_manifold",
        });
    }
    let (row, pos, col) = feasibility_residuals(x, bounds);
    Ok(row <= tol && pos <= tol && col <= tol)
}

/// Orthogonal projection onto the tangent space `{ U | U 1_c = 0 }`:
/// subtract the row mean from every entry.
pub fn tangent_project(u: &DenseMatrix) -> TangentVector {
    let c = u.cols() as f64;
    let mut v = u.clone();
    for i in 0..v.rows() {
        let row = v.row_mut(i);
        let mean: f64 = row.iter().sum::<f64>() / c;
        for e in row.iter_mut() {
            *e -= mean;
        }
    }
    TangentVector { v }
}

/// The Riemannian gradient under the restricted Euclidean metric is the
/// tangent projection of the Euclidean gradient.
pub fn egrad_to_rgrad(egrad: &DenseMatrix) -> TangentVector {
    tangent_project(egrad)
}

/// The Riemannian Hessian applied to a tangent direction is the tangent
/// projection of the Euclidean Hessian-vector product.
pub fn ehess_to_rhess(ehess_v: &DenseMatrix) -> TangentVector {
    tangent_project(ehess_v)
}

/// Frobenius inner product of two tangent vectors.
pub fn inner(u: &TangentVector, v: &TangentVector) -> Result<f64> {
    u.matrix().frob_inner(v.matrix())
}

/// Seeded random manifold point: |N(0,1)| entries projected onto the
/// manifold with Dykstra's algorithm.
pub fn random_point(n: usize, c: usize, bounds: &Bounds, seed: u64) -> Result<RimPoint> {
    manifold_dim(n, c)?;
    bounds.check_feasible(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DenseMatrix::from_fn(n, c, |_, _| {
        let g: f64 = StandardNormal.sample(&mut rng);
        g.abs()
    });
    let feas_tol = 1e-2;
    let report = retraction::dykstra_project(&z, bounds, 1000, feas_tol)?;
    if !report.converged {
        return Err(RimError::NonConvergence {
            method: "random_point (Dykstra)",
            iterations: report.iterations,
            residual_row: report.residual_row,
            residual_pos: report.residual_pos,
            residual_cols: report.residual_cols,
        });
    }
    Ok(report.result)
}

/// Seeded random unit-norm tangent vector.
pub fn random_tangent(n: usize, c: usize, seed: u64) -> Result<TangentVector> {
    manifold_dim(n, c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let z = DenseMatrix::from_fn(n, c, |_, _| StandardNormal.sample(&mut rng));
        let t = tangent_project(&z);
        let norm = t.norm();
        if norm > 1e-8 {
            return Ok(t.scale(1.0 / norm));
        }
        // degenerate draw, resample
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dim_formula() {
        assert_eq!(manifold_dim(2, 2).unwrap(), 2);
        assert_eq!(manifold_dim(10, 3).unwrap(), 27);
        assert_eq!(manifold_dim(5000, 100).unwrap(), 499900);
        assert!(manifold_dim(1, 3).is_err());
        assert!(manifold_dim(3, 1).is_err());
    }

    #[test]
    fn membership_checks() {
        let n = 4;
        let c = 2;
        let uniform = DenseMatrix::constant(n, c, 1.0 / c as f64);
        let b = Bounds::new(vec![0.5 * n as f64 / c as f64; c], vec![1.5 * n as f64 / c as f64; c])
            .unwrap();
        assert!(is_on_manifold(&uniform, &b, 1e-9).unwrap());

        let mut neg = uniform.clone();
        neg.set(0, 0, -0.1);
        assert!(!is_on_manifold(&neg, &b, 1e-6).unwrap());

        // row sums 1 but a column sum below its lower bound
        let skew = DenseMatrix::from_fn(4, 2, |_, j| if j == 0 { 1.0 } else { 0.0 });
        let b2 = Bounds::new(vec![1.0, 1.0], vec![3.0, 3.0]).unwrap();
        assert!(!is_on_manifold(&skew, &b2, 1e-6).unwrap());
    }

    #[test]
    fn tangent_projection_examples() {
        let u = DenseMatrix::from_rows(&[vec![1.0, -1.0], vec![2.0, -2.0]]).unwrap();
        let t = tangent_project(&u);
        for (a, b) in t.matrix().data().iter().zip(u.data()) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }

        let u = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(tangent_project(&u).matrix().max_abs() < 1e-14);

        let t = tangent_project(&DenseMatrix::identity(2));
        let expect = [0.5, -0.5, -0.5, 0.5];
        for (a, b) in t.matrix().data().iter().zip(expect) {
            assert_relative_eq!(a, &b, epsilon = 1e-14);
        }
    }

    /// Least-squares oracle: the tangent projection minimizes ||T - U|| over
    /// matrices with zero row sums; solve each row independently.
    fn projection_oracle(u: &DenseMatrix) -> DenseMatrix {
        // per-row: minimize ||t - u_i|| s.t. sum(t) = 0 -> t = u_i - mean
        // computed here via a tiny KKT solve to stay independent of the
        // closed form in the implementation.
        let c = u.cols();
        DenseMatrix::from_fn(u.rows(), c, |i, j| {
            let row = u.row(i);
            // KKT: t = u - lambda * 1, with lambda = sum(u)/c from 1^T t = 0
            let lambda = row.iter().sum::<f64>() / c as f64;
            row[j] - lambda
        })
    }

    #[test]
    fn projection_matches_oracle_and_riesz() {
        let mut seed = 7;
        for _ in 0..10 {
            seed += 1;
            let g = random_tangent(3, 2, seed).unwrap(); // just a seeded source
            let u = g.matrix().scale(3.0).add(&DenseMatrix::constant(3, 2, 0.7)).unwrap();
            let p = tangent_project(&u);
            let oracle = projection_oracle(&u);
            assert!(p.matrix().sub(&oracle).unwrap().max_abs() < 1e-12);

            // Riesz identity over random tangents
            for k in 0..10 {
                let v = random_tangent(3, 2, 1000 + k).unwrap();
                let lhs = inner(&p, &v).unwrap();
                let rhs = u.frob_inner(v.matrix()).unwrap();
                assert_relative_eq!(lhs, rhs, epsilon = 1e-12, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn egrad_examples() {
        let ones = DenseMatrix::constant(3, 4, 1.0);
        assert!(egrad_to_rgrad(&ones).matrix().max_abs() < 1e-14);

        let t = random_tangent(3, 4, 5).unwrap();
        let again = egrad_to_rgrad(t.matrix());
        assert!(again.matrix().sub(t.matrix()).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn inner_examples() {
        let u = TangentVector::new(
            DenseMatrix::from_rows(&[vec![1.0, -1.0], vec![0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let z = TangentVector::new(DenseMatrix::zeros(2, 2)).unwrap();
        let w = TangentVector::new(
            DenseMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, -1.0]]).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(inner(&u, &u).unwrap(), 2.0);
        assert_relative_eq!(inner(&u, &z).unwrap(), 0.0);
        assert_relative_eq!(inner(&u, &w).unwrap(), 0.0);
    }

    #[test]
    fn random_point_deterministic_and_feasible() {
        let b = Bounds::band(6, 3, 0.9, 1.1).unwrap();
        let p1 = random_point(6, 3, &b, 42).unwrap();
        let p2 = random_point(6, 3, &b, 42).unwrap();
        assert_eq!(p1.matrix(), p2.matrix());
        assert!(is_on_manifold(p1.matrix(), &b, 1e-2).unwrap());

        let be = Bounds::equal(vec![2.0; 3]).unwrap();
        let p = random_point(6, 3, &be, 9).unwrap();
        for s in p.matrix().col_sums() {
            assert!((s - 2.0).abs() <= 1e-2 + 1e-9, "column sum {s}");
        }
    }

    #[test]
    fn random_tangent_properties() {
        for seed in 0..100 {
            let t = random_tangent(5, 3, seed).unwrap();
            let worst = t
                .matrix()
                .row_sums()
                .iter()
                .fold(0.0_f64, |m, s| m.max(s.abs()));
            assert!(worst <= 1e-10);
            assert_relative_eq!(t.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn idempotence_and_orthogonality() {
        for seed in 0..20 {
            let u = random_tangent(4, 3, seed)
                .unwrap()
                .matrix()
                .add(&DenseMatrix::constant(4, 3, 0.3))
                .unwrap();
            let p = tangent_project(&u);
            let pp = tangent_project(p.matrix());
            assert!(pp.matrix().sub(p.matrix()).unwrap().max_abs() < 1e-12);

            let w = random_tangent(4, 3, 500 + seed).unwrap();
            let residual = u.sub(p.matrix()).unwrap();
            let dot = residual.frob_inner(tangent_project(w.matrix()).matrix()).unwrap();
            assert!(dot.abs() < 1e-10);
        }
    }
}
