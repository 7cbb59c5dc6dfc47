//! The epsilon-regularized resolvent family and its differential inequality.

use super::solve::{eps0_bound, eps1_bound, Branch, ShiftedSolver};
use super::sweep::fit_exponent;
use crate::error::{LabError, Result};
use crate::hypotheses::random_test_vectors;
use crate::lattice::OperatorSet;
use crate::linalg::eigen::{pencil_max, pencil_min};
use crate::linalg::scalar::to_complex;
use crate::normspace::NormContext;
use num_complex::Complex64;
use serde::Serialize;

/// Geometric schedule eps1/2, eps1/4, ..., eps1/2^count.
pub fn default_schedule(eps1: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| eps1 / 2f64.powi(k as i32)).collect()
}

#[derive(Clone, Debug)]
pub struct TraceOptions {
    /// Empty means the default 12-point schedule.
    pub schedule: Vec<f64>,
    pub quadrature_nodes: usize,
    pub resolvent_bound_samples: usize,
    pub seed: u64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            schedule: Vec::new(),
            quadrature_nodes: 16,
            resolvent_bound_samples: 6,
            seed: 17,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchRow {
    pub f: Complex64,
    /// ||G f_eps||_S^2 and ((1 + c1 eps)/eps) |F|.
    pub energy_bound_lhs: f64,
    pub energy_bound_rhs: f64,
    /// F' from the exact derivative of the resolvent and of f_eps.
    pub derivative_exact: Complex64,
    /// Three-point difference along the schedule (interior points only).
    pub derivative_fd: Option<Complex64>,
    pub diff_rhs: f64,
    /// diff_rhs - |F'| with the difference quotient.
    pub diff_residual: Option<f64>,
    pub diff_residual_exact: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceRow {
    pub eps: f64,
    pub f_eps_s_star: f64,
    pub f_prime_s_star: f64,
    pub a_f_s_star: f64,
    /// eps * max sampled ||G g||_S / ||g||_S*.
    pub resolvent_bound_c: f64,
    /// The certifying constant 1 + c1 eps.
    pub resolvent_bound_limit: f64,
    pub identity_check_residual: f64,
    pub plus: BranchRow,
    pub minus: BranchRow,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularizedTrace {
    pub lambda: f64,
    pub mu: f64,
    pub c1: f64,
    pub eps0: f64,
    pub eps1: f64,
    /// ||[iB,A]||_{S -> S*}, exact from the pencil.
    pub commutator_norm: f64,
    pub rows: Vec<TraceRow>,
    pub limit_plus: Complex64,
    pub limit_minus: Complex64,
    /// <f, (H - lambda - i mu)^{-1} f> with the unaveraged f.
    pub direct_plus: Complex64,
    /// |F0| / (|F_top| + ||f||^2) with the surrogate norm (S* norm if unavailable).
    pub gronwall_ratio: f64,
    pub norm_used: String,
    pub identity_check_max: f64,
}

/// Polynomial through the points evaluated at 0 (Neville).
pub fn richardson_zero(eps: &[f64], vals: &[Complex64]) -> Complex64 {
    let n = eps.len();
    let mut p: Vec<Complex64> = vals.to_vec();
    for k in 1..n {
        for i in 0..n - k {
            let (a, b) = (eps[i], eps[i + k]);
            p[i] = (p[i + 1] * a - p[i] * b) / (a - b);
        }
    }
    p[0]
}

fn three_point(e: [f64; 3], f: [Complex64; 3]) -> Complex64 {
    // derivative at e[1] of the quadratic through the three points
    let (h1, h2) = (e[1] - e[0], e[2] - e[1]);
    f[0] * (-h2 / (h1 * (h1 + h2))) + f[1] * ((h2 - h1) / (h1 * h2)) + f[2] * (h1 / (h2 * (h1 + h2)))
}

pub fn regularized_trace(ops: &OperatorSet, ctx: &NormContext, f: &[f64], lambda: f64, mu: f64, opts: &TraceOptions) -> Result<RegularizedTrace> {
    if !ctx.s_positive() {
        return Err(LabError::NotPositive {
            what: "S (trace needs the S norms)".into(),
            lambda_min: f64::NAN,
        });
    }
    let eps0 = eps0_bound(ops)?;
    let eps1 = eps1_bound(eps0);
    let schedule = if opts.schedule.is_empty() {
        default_schedule(eps1, 12)
    } else {
        opts.schedule.clone()
    };
    for (k, &e) in schedule.iter().enumerate() {
        if !(e > 0.0 && e < eps1) {
            return Err(LabError::InvalidInput(format!("schedule entry {e} outside (0, eps1 = {eps1})")));
        }
        if k > 0 && e >= schedule[k - 1] {
            return Err(LabError::InvalidInput("schedule must be strictly decreasing".into()));
        }
    }
    let ba = ops.commutator_ba();
    let commutator_norm = pencil_min(&ba, &ops.s, 1e-10)?.abs().max(pencil_max(&ba, &ops.s, 1e-10)?.abs());
    let grid = &ops.grid;
    let c1 = ops.c1;
    let samples = random_test_vectors(grid, opts.resolvent_bound_samples, opts.seed);
    let sample_s_star: Vec<f64> = samples.iter().map(|g| ctx.s_star_norm(g)).collect::<Result<_>>()?;

    struct Raw {
        eps: f64,
        vals: [Complex64; 2],
        ge: [Vec<Complex64>; 2],
        deriv: [Complex64; 2],
        resolvent_bound: f64,
        id_res: f64,
        norms: (f64, f64, f64),
    }
    let mut raws = Vec::with_capacity(schedule.len());
    for &eps in &schedule {
        let (fe, we) = ctx.smoothing_average(f, eps, opts.quadrature_nodes)?;
        let fp: Vec<f64> = we.iter().zip(&fe).map(|(a, b)| (a - b) / eps).collect();
        let kf = ctx.dilation().matvec(&fe);
        let fec = to_complex(&fe);
        let fpc = to_complex(&fp);
        let sp = ShiftedSolver::new(ops, lambda, mu, eps, Branch::Plus)?;
        let sm = ShiftedSolver::new(ops, lambda, mu, eps, Branch::Minus)?;
        let gp = sp.solve(&fec)?;
        let gm = sm.solve(&fec)?;
        let gpp = sp.solve(&fpc)?;
        let gmp = sm.solve(&fpc)?;
        let bgp = ops.b.matvec(&gp);
        let bgm = ops.b.matvec(&gm);
        let fp_ = grid.inner(&fec, &gp);
        let fm_ = grid.inner(&fec, &gm);
        let i = Complex64::new(0.0, 1.0);
        // d/deps G^{+-} = +-i G B G, and <f, G^+- B G^+- f> = <G^-+ f, B G^+- f>
        let dp = grid.inner(&fpc, &gp) + grid.inner(&fec, &gpp) + i * grid.inner(&gm, &bgp);
        let dm = grid.inner(&fpc, &gm) + grid.inner(&fec, &gmp) - i * grid.inner(&gp, &bgm);
        let mut best = 0.0f64;
        for (g, &gs) in samples.iter().zip(&sample_s_star) {
            let u = sp.solve(&to_complex(g))?;
            best = best.max(ctx.s_norm(&u)? / gs);
        }
        let id_res = super::solve::energy_identity_check(ops, &fec, lambda, mu, eps, Branch::Plus)?.identity_residual;
        let norms = (ctx.s_star_norm(&fe)?, ctx.s_star_norm(&fp)?, ctx.s_star_norm(&kf)?);
        raws.push(Raw {
            eps,
            vals: [fp_, fm_],
            ge: [gp, gm],
            deriv: [dp, dm],
            resolvent_bound: eps * best,
            id_res,
            norms,
        });
    }

    let mut rows = Vec::with_capacity(raws.len());
    for (k, r) in raws.iter().enumerate() {
        let c = 1.0 + c1 * r.eps;
        let mut branch_rows = Vec::with_capacity(2);
        for b in 0..2 {
            let fval = r.vals[b];
            let s_norm_g = ctx.s_norm(&r.ge[b])?;
            let fd =
                (k > 0 && k + 1 < raws.len()).then(|| three_point([raws[k - 1].eps, r.eps, raws[k + 1].eps], [raws[k - 1].vals[b], fval, raws[k + 1].vals[b]]));
            let (_, fps, afs) = r.norms;
            let diff_rhs = 2.0 * (c / r.eps).sqrt() * (fps + afs) * fval.norm().sqrt() + c * commutator_norm * fval.norm();
            branch_rows.push(BranchRow {
                f: fval,
                energy_bound_lhs: s_norm_g * s_norm_g,
                energy_bound_rhs: c / r.eps * fval.norm(),
                derivative_exact: r.deriv[b],
                derivative_fd: fd,
                diff_rhs,
                diff_residual: fd.map(|d| diff_rhs - d.norm()),
                diff_residual_exact: diff_rhs - r.deriv[b].norm(),
            });
        }
        let minus = branch_rows.pop().unwrap();
        let plus = branch_rows.pop().unwrap();
        rows.push(TraceRow {
            eps: r.eps,
            f_eps_s_star: r.norms.0,
            f_prime_s_star: r.norms.1,
            a_f_s_star: r.norms.2,
            resolvent_bound_c: r.resolvent_bound,
            resolvent_bound_limit: c,
            identity_check_residual: r.id_res,
            plus,
            minus,
        });
    }
    let tail = raws.len().saturating_sub(4);
    let es: Vec<f64> = raws[tail..].iter().map(|r| r.eps).collect();
    let limit_plus = richardson_zero(&es, &raws[tail..].iter().map(|r| r.vals[0]).collect::<Vec<_>>());
    let limit_minus = richardson_zero(&es, &raws[tail..].iter().map(|r| r.vals[1]).collect::<Vec<_>>());
    let direct_plus = super::solve::resolvent_element(ops, lambda, mu, Branch::Plus, f)?;
    let (fnorm2, norm_used) = match ctx.e_surrogate_norm(f) {
        Ok(n) => (n * n, "surrogate".to_string()),
        Err(_) => (ctx.s_star_norm(f)?.powi(2), "S*".to_string()),
    };
    let gronwall_ratio = limit_plus.norm() / (raws[0].vals[0].norm() + fnorm2);
    let identity_check_max = rows.iter().fold(0.0f64, |m, r| m.max(r.identity_check_residual));
    Ok(RegularizedTrace {
        lambda,
        mu,
        c1,
        eps0,
        eps1,
        commutator_norm,
        rows,
        limit_plus,
        limit_minus,
        direct_plus,
        gronwall_ratio,
        norm_used,
        identity_check_max,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsWindowReport {
    pub c2: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps: Vec<f64>,
    /// ||G_eps f - G_0 f|| on the schedule.
    pub diffs: Vec<f64>,
    /// Difference computed through the eps code path at eps = 0.
    pub zero_diff: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    /// max over sampled g of ||(H - lambda - i mu/2) G_eps g|| / ||g||.
    pub contraction_max: f64,
    pub contraction_holds: bool,
}

pub fn eps2_window(eps1: f64, mu: f64, c2: f64) -> f64 {
    if c2 > 0.0 {
        eps1.min(mu / (2.0 * c2))
    } else {
        eps1
    }
}

pub fn eps_window_convergence(ops: &OperatorSet, f: &[f64], lambda: f64, mu: f64, c2: f64, count: usize, samples: usize, seed: u64) -> Result<EpsWindowReport> {
    let eps0 = eps0_bound(ops)?;
    let eps1 = eps1_bound(eps0);
    let eps2 = eps2_window(eps1, mu, c2);
    let grid = &ops.grid;
    let fc = to_complex(f);
    let g0 = ShiftedSolver::new(ops, lambda, mu, 0.0, Branch::Plus)?.solve(&fc)?;
    let g0_again = super::solve::shifted_solve(ops, lambda, mu, 0.0, Branch::Plus, &fc)?;
    let zero_diff = grid.l2_norm(&g0.iter().zip(&g0_again).map(|(a, b)| a - b).collect::<Vec<_>>());
    let eps: Vec<f64> = (0..count.max(4)).map(|k| eps2 / 2f64.powi(k as i32)).collect();
    let gs = random_test_vectors(grid, samples, seed);
    let mut diffs = Vec::with_capacity(eps.len());
    let mut cmax = 0.0f64;
    for &e in &eps {
        let solver = ShiftedSolver::new(ops, lambda, mu, e, Branch::Plus)?;
        let ge = solver.solve(&fc)?;
        diffs.push(grid.l2_norm(&ge.iter().zip(&g0).map(|(a, b)| a - b).collect::<Vec<_>>()));
        for g in &gs {
            let gc = to_complex(g);
            let u = solver.solve(&gc)?;
            let hu = ops.h.matvec(&u);
            let x: Vec<Complex64> = hu.iter().zip(&u).map(|(a, b)| a - Complex64::new(lambda, mu / 2.0) * b).collect();
            cmax = cmax.max(grid.l2_norm(&x) / grid.l2_norm(&gc));
        }
    }
    let fit = fit_exponent(&eps, &diffs)?;
    Ok(EpsWindowReport {
        c2,
        eps0,
        eps1,
        eps2,
        eps,
        diffs,
        zero_diff,
        slope: fit.slope,
        slope_stderr: fit.stderr,
        contraction_max: cmax,
        contraction_holds: cmax <= 1.0 + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule_halves() {
        let s = default_schedule(0.8, 3);
        assert_eq!(s, vec![0.4, 0.2, 0.1]);
    }

    #[test]
    fn richardson_is_exact_on_polynomials() {
        let eps = [0.4, 0.2, 0.1, 0.05];
        let vals: Vec<Complex64> = eps.iter().map(|&e| Complex64::new(1.0 + 2.0 * e - e * e * e, -0.5 + e)).collect();
        let z = richardson_zero(&eps, &vals);
        assert!((z - Complex64::new(1.0, -0.5)).norm() < 1e-12);
    }

    #[test]
    fn three_point_derivative_of_quadratic() {
        let e = [0.1, 0.25, 0.5];
        let f = e.map(|x| Complex64::new(x * x, 3.0 * x));
        let d = three_point(e, f);
        assert!((d - Complex64::new(0.5, 3.0)).norm() < 1e-12);
    }

    #[test]
    fn eps2_window_is_inside_eps1() {
        let w = eps2_window(0.5, 0.1, 10.0);
        assert!(w > 0.0 && w <= 0.5);
    }
}
