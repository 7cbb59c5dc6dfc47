//! Extreme eigenvalues of sparse symmetric matrices and pencils.
//!
//! Everything is driven by inertia counts from banded LDL^T: bisection
//! brackets the target, inverse iteration polishes the vector and gives a
//! residual certificate.

use super::banded::SymBandLdl;
use super::scalar::{dot, norm2};
use super::sparse::CsrMatrix;
use crate::error::{LabError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug)]
pub struct EigOptions {
    /// Relative to the Gershgorin scale of the matrix.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigPair {
    pub value: f64,
    /// ||M v - value v|| for unit v.
    pub residual: f64,
    /// Gershgorin scale used for the relative tolerance.
    pub scale: f64,
    pub vector: Vec<f64>,
}

pub fn count_below(m: &CsrMatrix, sigma: f64) -> usize {
    SymBandLdl::factor_shifted(m, sigma).negative_count()
}

fn scale_of(m: &CsrMatrix) -> f64 {
    let (lo, hi) = m.gershgorin();
    lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
}

/// Smallest eigenvalue with a residual certificate.
pub fn min_eig_sym(m: &CsrMatrix, opts: &EigOptions) -> Result<EigPair> {
    let n = m.nrows();
    if n == 0 {
        return Err(LabError::InvalidInput("empty matrix".into()));
    }
    let scale = scale_of(m);
    let (glo, _) = m.gershgorin();
    let mut lo = glo - 1e-12 * scale;
    while count_below(m, lo) > 0 {
        lo -= scale;
    }
    let mut hi = m.diag().into_iter().fold(f64::INFINITY, f64::min) + 1e-12 * scale;
    while count_below(m, hi) == 0 {
        hi += scale;
    }
    let width = 0.01 * opts.tol * scale;
    let mut guard = 0;
    while hi - lo > width && guard < 400 {
        let mid = 0.5 * (lo + hi);
        if count_below(m, mid) == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
        guard += 1;
    }
    let fac = SymBandLdl::factor_shifted(m, lo);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut v);
    let mut extra = 0;
    for _ in 0..opts.max_iter {
        let mut w = fac.solve(&v);
        if !normalize(&mut w) {
            break;
        }
        v = w;
        let mv = m.matvec(&v);
        let theta = dot(&v, &mv);
        let r: Vec<f64> = mv.iter().zip(&v).map(|(a, b)| a - theta * b).collect();
        let res = norm2(&r);
        if res <= opts.tol * scale {
            extra += 1;
            if extra > 2 {
                return Ok(EigPair {
                    value: theta,
                    residual: res,
                    scale,
                    vector: v,
                });
            }
        }
    }
    Err(LabError::NoConvergence {
        what: "inverse iteration for the smallest eigenvalue".into(),
        iterations: opts.max_iter,
    })
}

fn normalize(v: &mut [f64]) -> bool {
    let s = norm2(v);
    if !(s > 0.0 && s.is_finite()) {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= s);
    true
}

/// Largest eigenvalue, via the smallest of -M.
pub fn max_eig_sym(m: &CsrMatrix, opts: &EigOptions) -> Result<EigPair> {
    let mut p = min_eig_sym(&m.scaled(-1.0), opts)?;
    p.value = -p.value;
    Ok(p)
}

/// Spectral norm of a symmetric matrix from both spectral ends.
pub fn sym_norm(m: &CsrMatrix, opts: &EigOptions) -> Result<f64> {
    let lo = min_eig_sym(m, opts)?.value;
    let hi = max_eig_sym(m, opts)?.value;
    Ok(lo.abs().max(hi.abs()))
}

/// k-th smallest eigenvalue (0-based) by inertia bisection.
pub fn kth_eigenvalue(m: &CsrMatrix, k: usize, tol: f64) -> Result<f64> {
    if k >= m.nrows() {
        return Err(LabError::InvalidInput(format!("eigenvalue index {k} out of range")));
    }
    let scale = scale_of(m);
    let (glo, ghi) = m.gershgorin();
    let (mut lo, mut hi) = (glo - 1e-12 * scale, ghi + 1e-12 * scale);
    while hi - lo > tol * scale {
        let mid = 0.5 * (lo + hi);
        if count_below(m, mid) <= k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn pencil_pd(t: &CsrMatrix, s: &CsrMatrix, sigma: f64) -> bool {
    SymBandLdl::factor(&t.combine(1.0, s, -sigma)).is_positive_definite()
}

/// Smallest generalized eigenvalue of (T, S) for S positive definite:
/// sup { sigma : T - sigma S > 0 }.
pub fn pencil_min(t: &CsrMatrix, s: &CsrMatrix, tol: f64) -> Result<f64> {
    if !SymBandLdl::factor(s).is_positive_definite() {
        return Err(LabError::NotPositive {
            what: "pencil weight S".into(),
            lambda_min: f64::NAN,
        });
    }
    let (mut lo, mut hi);
    if pencil_pd(t, s, 0.0) {
        lo = 0.0;
        hi = 1.0;
        while pencil_pd(t, s, hi) {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(LabError::NoConvergence {
                    what: "pencil bracket".into(),
                    iterations: 1000,
                });
            }
        }
    } else {
        hi = 0.0;
        lo = -1.0;
        while !pencil_pd(t, s, lo) {
            hi = lo;
            lo *= 2.0;
            if lo < -1e300 {
                return Err(LabError::NoConvergence {
                    what: "pencil bracket".into(),
                    iterations: 1000,
                });
            }
        }
    }
    while hi - lo > tol * lo.abs().max(hi.abs()).max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if pencil_pd(t, s, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn pencil_max(t: &CsrMatrix, s: &CsrMatrix, tol: f64) -> Result<f64> {
    Ok(-pencil_min(&t.scaled(-1.0), s, tol)?)
}

#[derive(Clone, Debug)]
pub struct LanczosResult {
    pub value: f64,
    pub residual_estimate: f64,
    pub steps: usize,
}

/// Largest eigenvalue of a symmetric operator given as a closure, by Lanczos
/// with full reorthogonalization.
pub fn lanczos_max<F>(apply: F, n: usize, steps: usize, seed: u64) -> LanczosResult
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let k = steps.min(n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut q);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for j in 0..k {
        let mut w = apply(&basis[j]);
        let a = dot(&basis[j], &w);
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bnorm = norm2(&w);
        if j + 1 == k || bnorm <= 1e-14 * a.abs().max(1e-300) {
            beta.push(bnorm);
            break;
        }
        beta.push(bnorm);
        w.iter_mut().for_each(|x| *x /= bnorm);
        basis.push(w);
    }
    let m = alpha.len();
    let mut tri = nalgebra::DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        tri[(i, i)] = alpha[i];
        if i + 1 < m {
            tri[(i, i + 1)] = beta[i];
            tri[(i + 1, i)] = beta[i];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(tri);
    let (imax, &value) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty tridiagonal");
    let last = eig.eigenvectors[(m - 1, imax)];
    LanczosResult {
        value,
        residual_estimate: (beta[m - 1] * last).abs(),
        steps: m,
    }
}
