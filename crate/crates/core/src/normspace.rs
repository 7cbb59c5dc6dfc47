//! Computable norms: ||.||_S, ||.||_S*, the weights M and Lambda, the
//! surrogate energy-space norm, the maximal smoothness weight, and the
//! Cayley discretization of the dilation group.

use crate::error::{LabError, Result};
use crate::hypotheses::random_test_vectors;
use crate::lattice::{Grid, OperatorSet};
use crate::linalg::{min_eig_sym, BandLu, BandMatrix, CsrMatrix, EigOptions, Scalar, SymBandLdl};
use serde::Serialize;
use std::fmt::Write as _;

pub const DEFAULT_DELTA: f64 = 0.05;

/// Cayley step bound as a multiple of the grid spacing.
pub const DEFAULT_DT_FACTOR: f64 = 0.01;

#[derive(Clone)]
pub struct NormContext {
    pub grid: Grid,
    s: CsrMatrix,
    s_factor: Option<SymBandLdl>,
    k: CsrMatrix,
    pub v: Vec<f64>,
    /// Empty unless V < 0 everywhere.
    pub m: Vec<f64>,
    pub lambda: Vec<f64>,
    pub delta: f64,
    pub dt_max: f64,
}

impl NormContext {
    pub fn new(ops: &OperatorSet, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.25) {
            return Err(LabError::InvalidInput(format!("delta must lie in (0, 1/4), got {delta}")));
        }
        let grid = ops.grid.clone();
        let v = ops.fields.v.clone();
        let (m, lambda) = if v.iter().all(|&x| x < 0.0) {
            let mut m = Vec::with_capacity(v.len());
            let mut l = Vec::with_capacity(v.len());
            for (i, &vi) in v.iter().enumerate() {
                let r = grid.radius(i);
                let mi = if r == 0.0 { -vi } else { (-vi).min(1.0 / (r * r)) };
                m.push(mi);
                l.push((r * (-vi).sqrt()).max(1.0));
            }
            (m, l)
        } else {
            (Vec::new(), Vec::new())
        };
        let fac = SymBandLdl::factor(&ops.s);
        let s_factor = fac.is_positive_definite().then_some(fac);
        Ok(Self {
            dt_max: DEFAULT_DT_FACTOR * grid.spacing,
            grid,
            s: ops.s.clone(),
            s_factor,
            k: ops.dilation_k.clone(),
            v,
            m,
            lambda,
            delta,
        })
    }

    pub fn s_positive(&self) -> bool {
        self.s_factor.is_some()
    }

    pub fn strictly_negative(&self) -> bool {
        !self.m.is_empty()
    }

    fn not_positive(&self) -> LabError {
        let lm = min_eig_sym(&self.s, &EigOptions::default()).map(|p| p.value).unwrap_or(f64::NAN);
        LabError::NotPositive {
            what: "S".into(),
            lambda_min: lm,
        }
    }

    fn require_negative(&self) -> Result<()> {
        if self.strictly_negative() {
            Ok(())
        } else {
            Err(LabError::GateRefused("weights need V(x) < 0 at every grid point".into()))
        }
    }

    pub fn s_form<T: Scalar>(&self, f: &[T]) -> f64 {
        let sf = self.s.matvec(f);
        self.grid.inner(f, &sf).re()
    }

    pub fn s_norm<T: Scalar>(&self, f: &[T]) -> Result<f64> {
        let q = self.s_form(f);
        if q < 0.0 {
            return Err(self.not_positive());
        }
        Ok(q.sqrt())
    }

    /// S^{-1} g with iterative refinement to 1e-12 relative residual.
    pub fn s_solve<T: Scalar>(&self, g: &[T]) -> Result<Vec<T>> {
        let fac = self.s_factor.as_ref().ok_or_else(|| self.not_positive())?;
        let gn = crate::linalg::scalar::norm2(g);
        let mut x = fac.solve(g);
        for _ in 0..6 {
            let sx = self.s.matvec(&x);
            let r: Vec<T> = g.iter().zip(&sx).map(|(a, b)| *a - *b).collect();
            if crate::linalg::scalar::norm2(&r) <= 1e-12 * gn {
                return Ok(x);
            }
            let dx = fac.solve(&r);
            x.iter_mut().zip(&dx).for_each(|(a, b)| *a += *b);
        }
        let sx = self.s.matvec(&x);
        let r: Vec<T> = g.iter().zip(&sx).map(|(a, b)| *a - *b).collect();
        let res = crate::linalg::scalar::norm2(&r) / gn.max(f64::MIN_POSITIVE);
        if res > 1e-10 {
            return Err(LabError::Residual {
                what: "S solve".into(),
                residual: res,
                tol: 1e-12,
            });
        }
        Ok(x)
    }

    pub fn s_star_norm<T: Scalar>(&self, g: &[T]) -> Result<f64> {
        let x = self.s_solve(g)?;
        Ok(self.grid.inner(g, &x).re().max(0.0).sqrt())
    }

    pub fn m_norm(&self, f: &[f64]) -> Result<f64> {
        self.require_negative()?;
        Ok(weighted_norm(&self.grid, f, self.m.iter().map(|m| m.powf(-0.5))))
    }

    pub fn n_norm(&self, f: &[f64]) -> Result<f64> {
        self.require_negative()?;
        Ok(weighted_norm(&self.grid, f, self.v.iter().map(|v| (-v).powf(-0.5))))
    }

    /// Pointwise weight Lambda^{1/2+2 delta} (-V)^{-1/2}.
    pub fn surrogate_weight(&self) -> Result<Vec<f64>> {
        self.require_negative()?;
        let p = 0.5 + 2.0 * self.delta;
        Ok(self.lambda.iter().zip(&self.v).map(|(l, v)| l.powf(p) * (-v).powf(-0.5)).collect())
    }

    pub fn e_surrogate_norm<T: Scalar>(&self, f: &[T]) -> Result<f64> {
        let w = self.surrogate_weight()?;
        let s: f64 = f.iter().zip(&w).map(|(a, b)| (a.modulus() * b).powi(2)).sum();
        Ok((s * self.grid.cell_volume()).sqrt())
    }

    /// L_max = M^{1/4+delta} (-V)^{1/4-delta}.
    pub fn smoothness_weight(&self) -> Result<Vec<f64>> {
        self.require_negative()?;
        let (a, b) = (0.25 + self.delta, 0.25 - self.delta);
        Ok(self.m.iter().zip(&self.v).map(|(m, v)| m.powf(a) * (-v).powf(b)).collect())
    }

    /// CSV with coordinates and the weight fields.
    pub fn weights_csv(&self) -> Result<String> {
        let lmax = self.smoothness_weight()?;
        let mut out = String::new();
        let axes = ["x", "y", "z"];
        let cols: Vec<&str> = axes[..self.grid.dims].to_vec();
        writeln!(out, "{},V,M,Lambda,L_max", cols.join(",")).unwrap();
        let mut p = [0.0; 3];
        for i in 0..self.grid.unknowns() {
            self.grid.point(i, &mut p);
            for x in &p[..self.grid.dims] {
                write!(out, "{:.17e},", x).unwrap();
            }
            writeln!(out, "{:.17e},{:.17e},{:.17e},{:.17e}", self.v[i], self.m[i], self.lambda[i], lmax[i]).unwrap();
        }
        Ok(out)
    }

    pub fn dilation(&self) -> &CsrMatrix {
        &self.k
    }

    /// W_t f by Cayley steps; at least ceil(|t|/dt_max) steps.
    pub fn dilation_flow(&self, f: &[f64], t: f64, steps: Option<usize>) -> Result<Vec<f64>> {
        if t == 0.0 {
            return Ok(f.to_vec());
        }
        let min_steps = (t.abs() / self.dt_max).ceil().max(1.0) as usize;
        let steps = steps.unwrap_or(min_steps);
        if steps < min_steps {
            return Err(LabError::InvalidInput(format!("{steps} Cayley steps below the minimum {min_steps}")));
        }
        let stepper = CayleyStep::new(&self.k, t / steps as f64)?;
        let mut g = f.to_vec();
        for _ in 0..steps {
            g = stepper.apply(&g);
        }
        Ok(g)
    }

    /// (1/eps) int_0^eps W_t f dt by composite midpoint with `nodes` nodes,
    /// together with W_eps f.
    pub fn smoothing_average(&self, f: &[f64], eps: f64, nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let nodes = nodes.max(16);
        let dt = eps / nodes as f64;
        let sub = |span: f64| (span.abs() / self.dt_max).ceil().max(1.0) as usize;
        let half = CayleyStep::new(&self.k, 0.5 * dt / sub(0.5 * dt) as f64)?;
        let full = CayleyStep::new(&self.k, dt / sub(dt) as f64)?;
        let mut g = f.to_vec();
        for _ in 0..sub(0.5 * dt) {
            g = half.apply(&g);
        }
        let mut acc = vec![0.0; f.len()];
        for j in 0..nodes {
            acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            if j + 1 < nodes {
                for _ in 0..sub(dt) {
                    g = full.apply(&g);
                }
            }
        }
        acc.iter_mut().for_each(|a| *a /= nodes as f64);
        for _ in 0..sub(0.5 * dt) {
            g = half.apply(&g);
        }
        Ok((acc, g))
    }
}

fn weighted_norm<I: Iterator<Item = f64>>(grid: &Grid, f: &[f64], w: I) -> f64 {
    let s: f64 = f.iter().zip(w).map(|(a, b)| (a * b).powi(2)).sum();
    (s * grid.cell_volume()).sqrt()
}

/// One Cayley step (I + tau K/2)^{-1}(I - tau K/2); real orthogonal since K is antisymmetric.
pub struct CayleyStep {
    lu: BandLu<f64>,
    rhs: CsrMatrix,
}

impl CayleyStep {
    pub fn new(k: &CsrMatrix, tau: f64) -> Result<Self> {
        let n = k.nrows();
        let id = CsrMatrix::identity(n);
        let lhs = id.combine(1.0, k, 0.5 * tau);
        let rhs = id.combine(1.0, k, -0.5 * tau);
        Ok(Self {
            lu: BandLu::factor(BandMatrix::from_csr(&lhs))?,
            rhs,
        })
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.lu.solve(&self.rhs.matvec(f))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DominatedReport {
    /// min over samples of (rhs - lhs)/rhs.
    pub worst_margin: f64,
    pub holds: bool,
    pub samples: usize,
    pub offending: Option<Vec<f64>>,
}

/// <f, S^{-1} f> <= (c1 - c~)^{-1} <f, (-V)^{-1} f> on sampled vectors.
pub fn dominated_bound_check(ctx: &NormContext, c1: f64, c_tilde: f64, samples: usize, seed: u64) -> Result<DominatedReport> {
    ctx.require_negative()?;
    if !(c1 > c_tilde) {
        return Err(LabError::GateRefused(format!("need c1 > c~, got c1 = {c1}, c~ = {c_tilde}")));
    }
    let mut worst = f64::INFINITY;
    let mut offending = None;
    for f in random_test_vectors(&ctx.grid, samples, seed) {
        let lhs = ctx.s_star_norm(&f)?.powi(2);
        let rhs = ctx.n_norm(&f)?.powi(2) / (c1 - c_tilde);
        if rhs == 0.0 {
            continue;
        }
        let m = (rhs - lhs) / rhs;
        if m < worst {
            worst = m;
            if m < -1e-12 {
                offending = Some(f.clone());
            }
        }
    }
    Ok(DominatedReport {
        worst_margin: worst,
        holds: worst >= -1e-12,
        samples,
        offending,
    })
}
