//! Banded direct solvers: general LU with partial pivoting and
//! symmetric LDL^T without pivoting (inertia counts, SPD solves).

use super::scalar::Scalar;
use super::sparse::CsrMatrix;
use crate::error::{LabError, Result};
use num_complex::Complex64;

/// Band storage of a general square matrix with room for pivoting fill.
/// Row i holds columns [i - kl, i + kl + ku].
#[derive(Clone, Debug)]
pub struct BandMatrix<T: Scalar> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![T::zero(); n * width],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

impl BandMatrix<Complex64> {
    /// Sum of real sparse terms with complex coefficients.
    pub fn from_terms(terms: &[(&CsrMatrix, Complex64)]) -> Self {
        let n = terms[0].0.nrows();
        let (mut kl, mut ku) = (0, 0);
        for (m, _) in terms {
            let (a, b) = m.bandwidths();
            kl = kl.max(a);
            ku = ku.max(b);
        }
        let mut band = Self::zeros(n, kl, ku);
        for (m, c) in terms {
            for (i, j, v) in m.triplets() {
                band.add(i, j, *c * v);
            }
        }
        band
    }
}

impl BandMatrix<f64> {
    pub fn from_csr(m: &CsrMatrix) -> Self {
        let (kl, ku) = m.bandwidths();
        let mut band = Self::zeros(m.nrows(), kl, ku);
        for (i, j, v) in m.triplets() {
            band.add(i, j, v);
        }
        band
    }
}

/// LU factors of a band matrix; pivots are replayed in order during solves.
#[derive(Clone, Debug)]
pub struct BandLu<T: Scalar> {
    u: BandMatrix<T>,
    lower: Vec<T>,
    piv: Vec<usize>,
    /// min |u_ii| / max |u_ii|, a cheap conditioning indicator.
    pub pivot_ratio: f64,
}

impl<T: Scalar> BandLu<T> {
    pub fn factor(mut a: BandMatrix<T>) -> Result<Self> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let mut lower = vec![T::zero(); n * kl.max(1)];
        let mut piv = vec![0; n];
        let (mut umin, mut umax) = (f64::INFINITY, 0.0f64);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let right = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = a.get(k, k).modulus();
            for r in k + 1..=last {
                let m = a.get(r, k).modulus();
                if m > best {
                    best = m;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(LabError::Singular { index: k, pivot_ratio: 0.0 });
            }
            piv[k] = p;
            if p != k {
                for c in k..=right {
                    let (ik, ip) = (a.idx(k, c), a.idx(p, c));
                    a.data.swap(ik, ip);
                }
            }
            let d = a.get(k, k);
            umin = umin.min(best);
            umax = umax.max(best);
            for r in k + 1..=last {
                let m = a.get(r, k) / d;
                lower[k * kl + (r - k - 1)] = m;
                let irk = a.idx(r, k);
                a.data[irk] = T::zero();
                if m == T::zero() {
                    continue;
                }
                for c in k + 1..=right {
                    let v = a.get(k, c);
                    let irc = a.idx(r, c);
                    a.data[irc] -= m * v;
                }
            }
        }
        Ok(Self {
            u: a,
            lower,
            piv,
            pivot_ratio: umin / umax,
        })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let (n, kl, ku) = (self.u.n, self.u.kl, self.u.ku);
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            let last = (k + kl).min(n - 1);
            for r in k + 1..=last {
                let m = self.lower[k * kl + (r - k - 1)];
                x[r] -= m * xk;
            }
        }
        for i in (0..n).rev() {
            let right = (i + kl + ku).min(n - 1);
            let mut acc = x[i];
            for c in i + 1..=right {
                acc -= self.u.get(i, c) * x[c];
            }
            x[i] = acc / self.u.get(i, i);
        }
        x
    }
}

/// LDL^T of a symmetric band matrix, no pivoting.
/// Exact zero pivots are perturbed to a tiny negative value so that
/// inertia counts treat boundary shifts consistently.
#[derive(Clone, Debug)]
pub struct SymBandLdl {
    n: usize,
    bw: usize,
    /// Row i stores L[i, i-bw..i] (unit diagonal implicit).
    l: Vec<f64>,
    d: Vec<f64>,
}

impl SymBandLdl {
    /// Factors m - shift*I using the lower triangle of m.
    pub fn factor_shifted(m: &CsrMatrix, shift: f64) -> Self {
        let n = m.nrows();
        let (bw, _) = m.bandwidths();
        let w = bw.max(1);
        let mut a = vec![0.0; n * w];
        let mut diag = vec![-shift; n];
        for (i, j, v) in m.triplets() {
            if j == i {
                diag[i] += v;
            } else if j < i {
                a[i * w + (bw - (i - j))] += v;
            }
        }
        let scale = m.max_abs().max(shift.abs()).max(f64::MIN_POSITIVE);
        let tiny = -f64::EPSILON * scale * 1e-3;
        let mut d = vec![0.0; n];
        // a[i*w + (bw - (i-j))] holds the lower entry (i, j); overwritten by L(i, j).
        for j in 0..n {
            let j0 = j.saturating_sub(bw);
            let mut dj = diag[j];
            for k in j0..j {
                let ljk = a[j * w + (bw - (j - k))];
                dj -= ljk * ljk * d[k];
            }
            if dj == 0.0 {
                dj = tiny;
            }
            d[j] = dj;
            let last = (j + bw).min(n.saturating_sub(1));
            for i in j + 1..=last {
                let i0 = i.saturating_sub(bw);
                let mut s = a[i * w + (bw - (i - j))];
                for k in i0.max(j0)..j {
                    s -= a[i * w + (bw - (i - k))] * a[j * w + (bw - (j - k))] * d[k];
                }
                a[i * w + (bw - (i - j))] = s / dj;
            }
        }
        Self { n, bw, l: a, d }
    }

    pub fn factor(m: &CsrMatrix) -> Self {
        Self::factor_shifted(m, 0.0)
    }

    /// Number of negative pivots = number of eigenvalues below the shift.
    pub fn negative_count(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.d.iter().all(|&v| v > 0.0 && v.is_finite())
    }

    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    pub fn solve<T: Scalar>(&self, b: &[T]) -> Vec<T> {
        let (n, bw) = (self.n, self.bw);
        let w = bw.max(1);
        let mut x = b.to_vec();
        for i in 0..n {
            let i0 = i.saturating_sub(bw);
            let mut acc = x[i];
            for k in i0..i {
                acc -= x[k].scale(self.l[i * w + (bw - (i - k))]);
            }
            x[i] = acc;
        }
        for i in 0..n {
            x[i] = x[i].scale(1.0 / self.d[i]);
        }
        for i in (0..n).rev() {
            let last = (i + bw).min(n - 1);
            let mut acc = x[i];
            for k in i + 1..=last {
                acc -= x[k].scale(self.l[k * w + (bw - (k - i))]);
            }
            x[i] = acc;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::scalar::norm2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, kl: usize, ku: usize, seed: u64, sym: bool) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trip = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                if sym && j > i {
                    continue;
                }
                let v: f64 = rng.random_range(-1.0..1.0);
                trip.push((i, j, v));
                if sym && j < i {
                    trip.push((j, i, v));
                }
            }
        }
        CsrMatrix::from_triplets(n, n, trip)
    }

    #[test]
    fn lu_solves_nonsymmetric_band() {
        let m = random_band(40, 3, 2, 1, false);
        let x: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let b = m.matvec(&x);
        let lu = BandLu::factor(BandMatrix::from_csr(&m)).unwrap();
        let y = lu.solve(&b);
        let err: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        assert!(norm2(&err) < 1e-9 * norm2(&x));
    }

    #[test]
    fn lu_needs_pivoting() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        let lu = BandLu::factor(BandMatrix::from_csr(&m)).unwrap();
        let y = lu.solve(&[2.0, 3.0]);
        assert!((y[0] - 1.0).abs() < 1e-15 && (y[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn complex_lu_round_trip() {
        let m = random_band(30, 2, 2, 3, true);
        let id = CsrMatrix::identity(30);
        let t = BandMatrix::from_terms(&[(&m, Complex64::new(1.0, 0.0)), (&id, Complex64::new(-0.3, -0.2))]);
        let lu = BandLu::factor(t).unwrap();
        let x: Vec<Complex64> = (0..30).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let mut b = m.matvec(&x);
        for (bi, xi) in b.iter_mut().zip(&x) {
            *bi += Complex64::new(-0.3, -0.2) * xi;
        }
        let y = lu.solve(&b);
        let err: Vec<Complex64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        assert!(norm2(&err) < 1e-10 * norm2(&x));
    }

    #[test]
    fn ldl_inertia_matches_dense() {
        let m = random_band(50, 4, 4, 7, true);
        let eig = m.to_dense().symmetric_eigenvalues();
        for &s in &[-1.0, 0.0, 0.3, 2.0] {
            let expect = eig.iter().filter(|&&e| e < s).count();
            assert_eq!(SymBandLdl::factor_shifted(&m, s).negative_count(), expect);
        }
    }

    #[test]
    fn ldl_solves_spd() {
        let m = random_band(25, 2, 2, 9, true).shifted(10.0);
        let f = SymBandLdl::factor(&m);
        assert!(f.is_positive_definite());
        let x: Vec<f64> = (0..25).map(|i| i as f64 * 0.1).collect();
        let y = f.solve(&m.matvec(&x));
        let err: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        assert!(norm2(&err) < 1e-12 * norm2(&x));
    }
}
