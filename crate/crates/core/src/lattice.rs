//! Uniform Dirichlet grids and the discrete operators built on them.

use crate::error::{LabError, Result};
use crate::linalg::scalar::norm2;
use crate::linalg::CsrMatrix;
use crate::potential::{PotentialFields, PotentialSpec};
use serde::Serialize;

pub const DEFAULT_UNKNOWN_CAP: usize = 300_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub dims: usize,
    pub half_extent: f64,
    pub points_per_axis: usize,
    pub spacing: f64,
    /// Identical for every axis; symmetric about 0 with 0 at the centre.
    pub coords: Vec<f64>,
}

impl Grid {
    pub fn new(dims: usize, half_extent: f64, points_per_axis: usize) -> Result<Self> {
        Self::with_cap(dims, half_extent, points_per_axis, DEFAULT_UNKNOWN_CAP)
    }

    pub fn with_cap(dims: usize, half_extent: f64, n: usize, cap: usize) -> Result<Self> {
        if !(1..=3).contains(&dims) {
            return Err(LabError::InvalidInput(format!("dims must be 1, 2 or 3, got {dims}")));
        }
        if !(half_extent > 0.0 && half_extent.is_finite()) {
            return Err(LabError::InvalidInput(format!("half extent must be positive, got {half_extent}")));
        }
        if n < 3 || n.is_multiple_of(2) {
            return Err(LabError::InvalidInput(format!("points per axis must be odd and >= 3, got {n}")));
        }
        let total = (n as u128).pow(dims as u32);
        if total > cap as u128 {
            return Err(LabError::InvalidInput(format!("{total} unknowns exceeds the cap of {cap}")));
        }
        let spacing = 2.0 * half_extent / (n - 1) as f64;
        let c = ((n - 1) / 2) as f64;
        let coords = (0..n).map(|j| (j as f64 - c) * spacing).collect();
        Ok(Self {
            dims,
            half_extent,
            points_per_axis: n,
            spacing,
            coords,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.points_per_axis.pow(self.dims as u32)
    }

    /// Weight of one cell, h^n; every inner product carries it.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dims as i32)
    }

    fn stride(&self, axis: usize) -> usize {
        self.points_per_axis.pow(axis as u32)
    }

    pub fn axis_index(&self, i: usize, axis: usize) -> usize {
        (i / self.stride(axis)) % self.points_per_axis
    }

    /// Coordinates of node i written into out[..dims].
    pub fn point(&self, i: usize, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate().take(self.dims) {
            *o = self.coords[self.axis_index(i, k)];
        }
    }

    pub fn radius(&self, i: usize) -> f64 {
        let mut p = [0.0; 3];
        self.point(i, &mut p);
        p[..self.dims].iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Node i's distance (in index units) to the nearest face of the box.
    pub fn boundary_distance(&self, i: usize) -> usize {
        (0..self.dims)
            .map(|k| {
                let j = self.axis_index(i, k);
                j.min(self.points_per_axis - 1 - j)
            })
            .min()
            .unwrap_or(0)
    }

    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        let mut p = [0.0; 3];
        (0..self.unknowns())
            .map(|i| {
                self.point(i, &mut p);
                f(&p[..self.dims])
            })
            .collect()
    }

    /// Same box, spacing halved.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.dims, self.half_extent, 2 * self.points_per_axis - 1)
    }

    /// Weighted inner product sum conj(a) b h^n.
    pub fn inner<T: crate::linalg::Scalar>(&self, a: &[T], b: &[T]) -> T {
        crate::linalg::scalar::dot(a, b).scale(self.cell_volume())
    }

    pub fn l2_norm<T: crate::linalg::Scalar>(&self, a: &[T]) -> f64 {
        norm2(a) * self.cell_volume().sqrt()
    }
}

/// -Delta_h with Dirichlet truncation, (2n+1)-point stencil.
pub fn assemble_laplacian(grid: &Grid) -> CsrMatrix {
    let n = grid.unknowns();
    let ih2 = 1.0 / (grid.spacing * grid.spacing);
    let mut trip = Vec::with_capacity(n * (2 * grid.dims + 1));
    for i in 0..n {
        trip.push((i, i, 2.0 * grid.dims as f64 * ih2));
        for k in 0..grid.dims {
            let s = grid.stride(k);
            let j = grid.axis_index(i, k);
            if j > 0 {
                trip.push((i, i - s, -ih2));
            }
            if j + 1 < grid.points_per_axis {
                trip.push((i, i + s, -ih2));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, trip)
}

/// K = -(X.D_c + D_c.X)/2, so that A = iK is the symmetrized dilation generator.
pub fn assemble_dilation(grid: &Grid) -> CsrMatrix {
    let n = grid.unknowns();
    let q = 1.0 / (4.0 * grid.spacing);
    let mut trip = Vec::with_capacity(n * 2 * grid.dims);
    for i in 0..n {
        for k in 0..grid.dims {
            let s = grid.stride(k);
            let j = grid.axis_index(i, k);
            let x = grid.coords[j];
            if j + 1 < grid.points_per_axis {
                trip.push((i, i + s, -(x + grid.coords[j + 1]) * q));
            }
            if j > 0 {
                trip.push((i, i - s, (x + grid.coords[j - 1]) * q));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, trip)
}

/// All discrete operators for one (grid, potential, c1).
#[derive(Clone)]
pub struct OperatorSet {
    pub grid: Grid,
    pub potential: PotentialSpec,
    pub fields: PotentialFields,
    pub laplacian: CsrMatrix,
    pub h: CsrMatrix,
    pub dilation_k: CsrMatrix,
    pub b: CsrMatrix,
    pub s: CsrMatrix,
    pub c1: f64,
}

impl OperatorSet {
    pub fn unknowns(&self) -> usize {
        self.grid.unknowns()
    }

    pub fn potential_diag(&self) -> &[f64] {
        &self.fields.v
    }

    /// [iB, A] = 4(-Delta_h) + diag(x.grad Vtilde), from the analytic formula.
    pub fn commutator_ba(&self) -> CsrMatrix {
        self.laplacian.combine(4.0, &CsrMatrix::diagonal(&self.fields.w), 1.0)
    }

    /// [iS, A] = -c1 B + [iB, A].
    pub fn commutator_sa(&self) -> CsrMatrix {
        self.b.combine(-self.c1, &self.commutator_ba(), 1.0)
    }

    /// Same grid and potential with a different c1.
    pub fn with_c1(&self, c1: f64) -> Result<Self> {
        check_c1(c1)?;
        let mut out = self.clone();
        out.c1 = c1;
        out.s = self.h.combine(-c1, &self.b, 1.0);
        Ok(out)
    }

    pub fn export_coo(&self, which: &str) -> Option<String> {
        let m = match which {
            "laplacian" => &self.laplacian,
            "H" => &self.h,
            "K" => &self.dilation_k,
            "B" => &self.b,
            "S" => &self.s,
            _ => return None,
        };
        let mut buf = Vec::new();
        m.write_coo(&mut buf).ok()?;
        String::from_utf8(buf).ok()
    }
}

fn check_c1(c1: f64) -> Result<()> {
    if !(0.0..2.0).contains(&c1) {
        return Err(LabError::InvalidInput(format!("c1 must lie in [0, 2), got {c1}")));
    }
    Ok(())
}

pub fn assemble_operators(grid: &Grid, potential: &PotentialSpec, c1: f64) -> Result<OperatorSet> {
    check_c1(c1)?;
    let fields = potential.sample(grid);
    Ok(assemble_with_fields(grid, potential, fields, c1))
}

pub(crate) fn assemble_with_fields(grid: &Grid, potential: &PotentialSpec, fields: PotentialFields, c1: f64) -> OperatorSet {
    let laplacian = assemble_laplacian(grid);
    let h = laplacian.combine(1.0, &CsrMatrix::diagonal(&fields.v), 1.0);
    let b = laplacian.combine(2.0, &CsrMatrix::diagonal(&fields.vt), -1.0);
    let s = h.combine(-c1, &b, 1.0);
    OperatorSet {
        grid: grid.clone(),
        potential: potential.clone(),
        fields,
        laplacian,
        h,
        dilation_k: assemble_dilation(grid),
        b,
        s,
        c1,
    }
}

/// Which analytic commutator a consistency run compares against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Commutator {
    /// i[H, A] against B.
    HA,
    /// i[B, A] against 4(-Delta) + diag(W).
    BA,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub residual_h: f64,
    pub residual_half: f64,
    /// residual_h / residual_half; NaN when both vanish.
    pub ratio: f64,
    /// Test function is not negligible within 10 nodes of the boundary.
    pub touches_boundary: bool,
}

/// ||(i[M, A] - C) f|| / ||f|| where i[M, iK] = KM - MK.
fn commutator_residual(ops: &OperatorSet, which: Commutator, f: &[f64]) -> f64 {
    let (m, c) = match which {
        Commutator::HA => (ops.h.clone(), ops.b.clone()),
        Commutator::BA => (ops.b.clone(), ops.commutator_ba()),
    };
    let k = &ops.dilation_k;
    let kmf = k.matvec(&m.matvec(f));
    let mkf = m.matvec(&k.matvec(f));
    let cf = c.matvec(f);
    let r: Vec<f64> = (0..f.len()).map(|i| kmf[i] - mkf[i] - cf[i]).collect();
    let nf = ops.grid.l2_norm(f);
    if nf == 0.0 {
        0.0
    } else {
        ops.grid.l2_norm(&r) / nf
    }
}

/// Two-grid check that the discrete commutator of H (or B) with A matches
/// its analytic counterpart to second order.
pub fn commutator_consistency<F>(ops: &OperatorSet, test_fn: F, which: Commutator) -> Result<ConsistencyReport>
where
    F: Fn(&[f64]) -> f64,
{
    let f = ops.grid.sample(&test_fn);
    let peak = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let touches_boundary = (0..f.len()).any(|i| ops.grid.boundary_distance(i) < 10 && f[i].abs() > 1e-12 * peak);
    let residual_h = commutator_residual(ops, which, &f);
    let fine_grid = ops.grid.refined()?;
    let fine = assemble_operators(&fine_grid, &ops.potential, ops.c1)?;
    let ff = fine_grid.sample(&test_fn);
    let residual_half = commutator_residual(&fine, which, &ff);
    Ok(ConsistencyReport {
        residual_h,
        residual_half,
        ratio: residual_h / residual_half,
        touches_boundary,
    })
}
