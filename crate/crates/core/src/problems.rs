//! Concrete cost functions: norm approximation, total-variation denoising,
//! Max Cut, and Ratio Cut, plus a gradient-norm bound diagnostic for the
//! cut objectives.

use crate::error::{Result, RimError};
use crate::manifold::Bounds;
use crate::matrix::DenseMatrix;
use crate::optim::Problem;

/// `min ||F - A||_F^2` over the manifold whose column sums are pinned to
/// those of `A` (lower = upper), so `A` itself is the optimum.
#[derive(Debug, Clone)]
pub struct NormApprox {
    a: DenseMatrix,
    bounds: Bounds,
}

impl NormApprox {
    /// `a` must be strictly positive with unit row sums.
    pub fn new(a: DenseMatrix) -> Result<Self> {
        if a.min_entry() <= 0.0 {
            return Err(RimError::InvalidValue(
                "norm approximation target must be strictly positive".into(),
            ));
        }
        let worst = a
            .row_sums()
            .iter()
            .fold(0.0_f64, |m, s| m.max((s - 1.0).abs()));
        if worst > 1e-6 {
            return Err(RimError::OffManifold(format!(
                "norm approximation target must have unit row sums; worst deviation {worst:.3e}"
            )));
        }
        let bounds = Bounds::equal(a.col_sums())?;
        Ok(Self { a, bounds })
    }

    pub fn target(&self) -> &DenseMatrix {
        &self.a
    }

    /// Bounds pinning the column sums to the target's.
    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }
}

impl Problem for NormApprox {
    fn cost(&self, f: &DenseMatrix) -> Result<f64> {
        let d = f.sub(&self.a)?;
        Ok(d.frob_inner(&d)?)
    }

    fn egrad(&self, f: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(f.sub(&self.a)?.scale(2.0))
    }

    fn ehess_vec(&self, _f: &DenseMatrix, v: &DenseMatrix) -> Option<Result<DenseMatrix>> {
        Some(Ok(v.scale(2.0)))
    }
}

/// Smoothed total-variation denoising:
/// `1/2 ||F - noisy||^2 + xi * sum phi(forward differences)` with
/// `phi(x) = sqrt(x^2 + eps^2)` and differences taken as zero past the last
/// row/column (reflective boundary).
#[derive(Debug, Clone)]
pub struct Tv {
    noisy: DenseMatrix,
    xi: f64,
    epsilon: f64,
}

pub const TV_DEFAULT_EPSILON: f64 = 1e-6;

impl Tv {
    pub fn new(noisy: DenseMatrix, xi: f64, epsilon: f64) -> Result<Self> {
        if xi < 0.0 {
            return Err(RimError::InvalidValue("xi must be nonnegative".into()));
        }
        if !(epsilon > 0.0) {
            return Err(RimError::InvalidValue("epsilon must be positive".into()));
        }
        Ok(Self { noisy, xi, epsilon })
    }

    pub fn noisy(&self) -> &DenseMatrix {
        &self.noisy
    }

    fn phi(&self, x: f64) -> f64 {
        (x * x + self.epsilon * self.epsilon).sqrt()
    }

    fn phi_prime(&self, x: f64) -> f64 {
        x / self.phi(x)
    }

    fn phi_second(&self, x: f64) -> f64 {
        let e2 = self.epsilon * self.epsilon;
        e2 / (x * x + e2).powf(1.5)
    }

    /// Visit every forward difference (including the zero boundary ones,
    /// which contribute `phi(0) = eps` to the cost but nothing to the
    /// gradient).
    fn for_each_diff(&self, f: &DenseMatrix, mut visit: impl FnMut(usize, usize, usize, usize, f64)) {
        let (n, c) = (f.rows(), f.cols());
        for i in 0..n {
            for j in 0..c {
                if j + 1 < c {
                    visit(i, j, i, j + 1, f.get(i, j + 1) - f.get(i, j));
                } else {
                    visit(i, j, i, j, 0.0);
                }
                if i + 1 < n {
                    visit(i, j, i + 1, j, f.get(i + 1, j) - f.get(i, j));
                } else {
                    visit(i, j, i, j, 0.0);
                }
            }
        }
    }
}

impl Problem for Tv {
    fn cost(&self, f: &DenseMatrix) -> Result<f64> {
        let d = f.sub(&self.noisy)?;
        let fidelity = 0.5 * d.frob_inner(&d)?;
        let mut tv = 0.0;
        self.for_each_diff(f, |_, _, _, _, diff| tv += self.phi(diff));
        Ok(fidelity + self.xi * tv)
    }

    fn egrad(&self, f: &DenseMatrix) -> Result<DenseMatrix> {
        let mut g = f.sub(&self.noisy)?;
        self.for_each_diff(f, |i0, j0, i1, j1, diff| {
            if i0 == i1 && j0 == j1 {
                return; // boundary, zero difference
            }
            let d = self.xi * self.phi_prime(diff);
            g.set(i1, j1, g.get(i1, j1) + d);
            g.set(i0, j0, g.get(i0, j0) - d);
        });
        Ok(g)
    }

    fn ehess_vec(&self, f: &DenseMatrix, v: &DenseMatrix) -> Option<Result<DenseMatrix>> {
        if !f.same_shape(v) {
            return Some(Err(RimError::ShapeMismatch {
                expected: format!("{}x{}", f.rows(), f.cols()),
                got: format!("{}x{}", v.rows(), v.cols()),
                context: "Tv::ehess_vec",
            }));
        }
        let mut h = v.clone();
        self.for_each_diff(f, |i0, j0, i1, j1, diff| {
            if i0 == i1 && j0 == j1 {
                return;
            }
            let dv = v.get(i1, j1) - v.get(i0, j0);
            let d = self.xi * self.phi_second(diff) * dv;
            h.set(i1, j1, h.get(i1, j1) + d);
            h.set(i0, j0, h.get(i0, j0) - d);
        });
        Some(Ok(h))
    }
}

/// `min -tr(F^T S F)` for a symmetric similarity matrix `S`.
#[derive(Debug, Clone)]
pub struct MaxCut {
    s: DenseMatrix,
}

impl MaxCut {
    pub fn new(s: DenseMatrix) -> Result<Self> {
        if !s.is_symmetric(1e-10) {
            return Err(RimError::InvalidValue(
                "Max Cut similarity matrix must be symmetric".into(),
            ));
        }
        Ok(Self { s })
    }
}

impl Problem for MaxCut {
    fn cost(&self, f: &DenseMatrix) -> Result<f64> {
        let sf = self.s.matmul(f)?;
        Ok(-f.frob_inner(&sf)?)
    }

    fn egrad(&self, f: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(self.s.matmul(f)?.scale(-2.0))
    }

    fn ehess_vec(&self, _f: &DenseMatrix, v: &DenseMatrix) -> Option<Result<DenseMatrix>> {
        Some(self.s.matmul(v).map(|sv| sv.scale(-2.0)))
    }
}

/// Condition-number cutoff beyond which `F^T F` is treated as singular.
pub const RATIOCUT_COND_LIMIT: f64 = 1e12;

/// `min tr(F^T L F (F^T F)^{-1})` for a graph Laplacian `L`.
#[derive(Debug, Clone)]
pub struct RatioCut {
    l: DenseMatrix,
}

struct RatioCutCache {
    lf: DenseMatrix,
    j: DenseMatrix,
    k: DenseMatrix,
}

impl RatioCut {
    pub fn new(l: DenseMatrix) -> Result<Self> {
        if !l.is_symmetric(1e-10) {
            return Err(RimError::InvalidValue(
                "Laplacian must be symmetric".into(),
            ));
        }
        let ones = vec![1.0; l.cols()];
        let lv = l.matvec(&ones)?;
        let worst = lv.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if worst > 1e-8 {
            return Err(RimError::InvalidValue(format!(
                "Laplacian rows must sum to zero; worst |L 1| = {worst:.3e}"
            )));
        }
        Ok(Self { l })
    }

    pub fn laplacian(&self) -> &DenseMatrix {
        &self.l
    }

    /// Per-point cache: LF, J = (F^T F)^{-1}, K = F^T L F. Fails when
    /// F^T F is numerically singular.
    fn cache(&self, f: &DenseMatrix) -> Result<RatioCutCache> {
        let ft = f.transpose();
        let g = ft.matmul(f)?;
        let g_na = g.to_na();
        let svd = g_na.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if smin <= 0.0 || smax / smin > RATIOCUT_COND_LIMIT {
            return Err(RimError::Singular(format!(
                "F^T F has condition number {:.3e} (limit {RATIOCUT_COND_LIMIT:.1e})",
                if smin > 0.0 { smax / smin } else { f64::INFINITY }
            )));
        }
        let j_na = g_na.try_inverse().ok_or_else(|| {
            RimError::Singular("F^T F could not be inverted".into())
        })?;
        let lf = self.l.matmul(f)?;
        let k = ft.matmul(&lf)?;
        Ok(RatioCutCache {
            lf,
            j: DenseMatrix::from_na(&j_na),
            k,
        })
    }
}

impl Problem for RatioCut {
    fn cost(&self, f: &DenseMatrix) -> Result<f64> {
        let cache = self.cache(f)?;
        let kj = cache.k.matmul(&cache.j)?;
        Ok((0..kj.rows()).map(|i| kj.get(i, i)).sum())
    }

    fn egrad(&self, f: &DenseMatrix) -> Result<DenseMatrix> {
        let cache = self.cache(f)?;
        let lfj = cache.lf.matmul(&cache.j)?;
        let jkj = cache.j.matmul(&cache.k)?.matmul(&cache.j)?;
        Ok(lfj.sub(&f.matmul(&jkj)?)?.scale(2.0))
    }

    fn ehess_vec(&self, f: &DenseMatrix, v: &DenseMatrix) -> Option<Result<DenseMatrix>> {
        Some(self.ehess_vec_impl(f, v))
    }
}

impl RatioCut {
    /// Directional derivative of the Euclidean gradient along `v`.
    fn ehess_vec_impl(&self, f: &DenseMatrix, v: &DenseMatrix) -> Result<DenseMatrix> {
        let cache = self.cache(f)?;
        let j = &cache.j;
        let k = &cache.k;
        let lf = &cache.lf;
        let lv = self.l.matmul(v)?;
        let ft = f.transpose();
        let vt = v.transpose();
        // S = V^T F + F^T V, T = V^T L F + F^T L V
        let s = vt.matmul(f)?.add(&ft.matmul(v)?)?;
        let t = vt.matmul(lf)?.add(&ft.matmul(&lv)?)?;
        let jsj = j.matmul(&s)?.matmul(j)?;
        let jkj = j.matmul(k)?.matmul(j)?;

        let term1 = lv.matmul(j)?;
        let term2 = lf.matmul(&jsj)?;
        let term3 = v.matmul(&jkj)?;
        let term4 = f.matmul(&jsj)?.matmul(k)?.matmul(j)?;
        let term5 = f.matmul(j)?.matmul(&t)?.matmul(j)?;
        let term6 = f.matmul(&jkj)?.matmul(&s)?.matmul(j)?;
        Ok(term1
            .sub(&term2)?
            .sub(&term3)?
            .add(&term4)?
            .sub(&term5)?
            .add(&term6)?
            .scale(2.0))
    }
}

/// Upper bound on the spectral norm of the Euclidean gradient of the
/// weighted cut objective `tr(F^T L F (F^T W F)^{-1})`:
/// `2(||L|| sqrt(n)/alpha + ||W|| ||L|| n^{3/2}/alpha^2)` with
/// `alpha = sigma_min(W) l_min^2 / n`. For the Ratio Cut, `w` is the
/// identity.
pub fn ratiocut_gradient_bound(
    l: &DenseMatrix,
    w: &DenseMatrix,
    l_min: f64,
    n: usize,
) -> Result<f64> {
    if !(l_min > 0.0) {
        return Err(RimError::InvalidValue(
            "l_min must be positive".into(),
        ));
    }
    if !w.is_symmetric(1e-10) {
        return Err(RimError::InvalidValue("w must be symmetric".into()));
    }
    let nf = n as f64;
    let l_norm = l.spectral_norm();
    let w_norm = w.spectral_norm();
    let w_na = w.to_na();
    let sigma_min = w_na
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let alpha = sigma_min * l_min * l_min / nf;
    if !(alpha > 0.0) {
        return Err(RimError::Singular(
            "w has a zero singular value; the bound is vacuous".into(),
        ));
    }
    Ok(2.0 * (l_norm * nf.sqrt() / alpha + w_norm * l_norm * nf.powf(1.5) / (alpha * alpha)))
}
