//! Dense reference computations for small problems (at most a few hundred
//! unknowns), used to cross-check the banded solvers.

use crate::error::{LabError, Result};
use crate::linalg::CsrMatrix;
use crate::resolvent::Branch;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub const DENSE_LIMIT: usize = 500;

fn guard(m: &CsrMatrix) -> Result<()> {
    if m.nrows() > DENSE_LIMIT {
        return Err(LabError::InvalidInput(format!(
            "dense oracle limited to {DENSE_LIMIT} unknowns, got {}",
            m.nrows()
        )));
    }
    Ok(())
}

pub struct DenseSpectrum {
    pub values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl DenseSpectrum {
    pub fn new(m: &CsrMatrix) -> Result<Self> {
        guard(m)?;
        let eig = SymmetricEigen::new(m.to_dense());
        Ok(Self {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        })
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// sum_j v_j <v_j, f> / (e_j - lambda -/+ i mu).
    pub fn resolvent_apply(&self, lambda: f64, mu: f64, branch: Branch, f: &[Complex64]) -> Vec<Complex64> {
        let n = f.len();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (j, &e) in self.values.iter().enumerate() {
            let v = self.vectors.column(j);
            let mut c = Complex64::new(0.0, 0.0);
            for i in 0..n {
                c += f[i] * v[i];
            }
            let c = c / Complex64::new(e - lambda, -branch.sign() * mu);
            for i in 0..n {
                out[i] += c * v[i];
            }
        }
        out
    }
}

/// x with M x = b by dense LU.
pub fn dense_solve(m: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    guard(m)?;
    let lu = m.to_dense().lu();
    lu.solve(&DVector::from_column_slice(b))
        .map(|x| x.iter().copied().collect())
        .ok_or(LabError::Singular { index: 0, pivot_ratio: 0.0 })
}

/// f^T M f by a dense product.
pub fn dense_form(m: &CsrMatrix, f: &[f64]) -> Result<f64> {
    guard(m)?;
    let v = DVector::from_column_slice(f);
    Ok(v.dot(&(m.to_dense() * &v)))
}
