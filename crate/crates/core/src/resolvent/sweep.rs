//! Limiting-absorption sweeps over an energy / imaginary-part lattice and
//! the sandwiched-resolvent smoothness probe.

use super::solve::{Branch, ShiftedSolver};
use crate::error::{LabError, Result};
use crate::lattice::{Grid, OperatorSet};
use crate::linalg::count_below;
use crate::linalg::eigen::lanczos_max;
use crate::linalg::scalar::to_complex;
use crate::normspace::NormContext;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

pub const FLAT_THRESHOLD: f64 = 0.1;
pub const BLOWUP_THRESHOLD: f64 = 0.4;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub stderr: f64,
    pub points: usize,
}

/// Least-squares slope of log|F| against log mu.
pub fn fit_exponent(mu: &[f64], abs: &[f64]) -> Result<Fit> {
    if mu.len() != abs.len() || mu.len() < 4 {
        return Err(LabError::InvalidInput(format!(
            "need at least 4 paired points, got {}",
            mu.len().min(abs.len())
        )));
    }
    if mu.iter().chain(abs).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(LabError::InvalidInput("fit data must be positive and finite".into()));
    }
    let n = mu.len() as f64;
    let x: Vec<f64> = mu.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = abs.iter().map(|v| v.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(LabError::InvalidInput("fit abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    Ok(Fit {
        slope,
        stderr,
        points: mu.len(),
    })
}

/// Growth exponent -slope over the lowest decade above the floor
/// (at least 4 points; otherwise the 4 smallest mu).
pub fn growth_exponent(mu: &[f64], abs: &[f64], floor: f64) -> Result<Fit> {
    let mut idx: Vec<usize> = (0..mu.len()).collect();
    idx.sort_by(|&a, &b| mu[a].total_cmp(&mu[b]));
    let mut sel: Vec<usize> = idx.iter().copied().filter(|&i| mu[i] <= 10.0 * floor).collect();
    if sel.len() < 4 {
        sel = idx.into_iter().take(4).collect();
    }
    let m: Vec<f64> = sel.iter().map(|&i| mu[i]).collect();
    let a: Vec<f64> = sel.iter().map(|&i| abs[i]).collect();
    let fit = fit_exponent(&m, &a)?;
    Ok(Fit { slope: -fit.slope, ..fit })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpacingEstimate {
    pub window_lo: f64,
    pub window_hi: f64,
    pub count: usize,
    pub spacing: f64,
    pub multiplier: f64,
    pub floor: f64,
}

/// Mean level spacing of H over [lo, hi] from two inertia counts; a
/// single-point window is widened to +-0.1.
pub fn estimate_spacing(ops: &OperatorSet, lo: f64, hi: f64, multiplier: f64) -> SpacingEstimate {
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.1, lo + 0.1) };
    let count = count_below(&ops.h, hi) - count_below(&ops.h, lo);
    let spacing = (hi - lo) / count.max(1) as f64;
    SpacingEstimate {
        window_lo: lo,
        window_hi: hi,
        count,
        spacing,
        multiplier,
        floor: multiplier * spacing,
    }
}

/// Geometric schedule from start down to floor, `count` points, decreasing.
pub fn mu_schedule(start: f64, floor: f64, count: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && floor > 0.0 && start >= floor && count >= 2) {
        return Err(LabError::InvalidInput(format!("bad mu schedule: start {start}, floor {floor}, count {count}")));
    }
    let r = (floor / start).powf(1.0 / (count - 1) as f64);
    let mut v: Vec<f64> = (0..count).map(|k| start * r.powi(k as i32)).collect();
    v[count - 1] = floor;
    Ok(v)
}

pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![start];
    }
    (0..count).map(|k| start + (stop - start) * k as f64 / (count - 1) as f64).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct TestVector {
    pub label: String,
    pub values: Vec<f64>,
}

/// Gaussians exp(-|x - x0|^2 / (2 sigma^2)) with x0 displaced along the first axis.
pub fn gaussian_test_vectors(grid: &Grid, sigmas: &[f64], offsets: &[f64]) -> Vec<TestVector> {
    let mut out = Vec::new();
    for &o in offsets {
        for &s in sigmas {
            let values = grid.sample(|x| {
                let d2: f64 = x.iter().enumerate().map(|(k, v)| if k == 0 { (v - o).powi(2) } else { v * v }).sum();
                (-d2 / (2.0 * s * s)).exp()
            });
            out.push(TestVector {
                label: format!("gauss(sigma={s},x0={o})"),
                values,
            });
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepCell {
    pub lambda: f64,
    pub mu: f64,
    pub vector: usize,
    pub plus: Complex64,
    pub minus: Complex64,
    /// |F| / ||f||^2 in the normalization norm.
    pub normalized: f64,
    pub in_scope: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaExponent {
    pub lambda: f64,
    /// Largest growth exponent over test vectors.
    pub exponent: f64,
    pub stderr: f64,
    pub per_vector: Vec<f64>,
    pub flat: bool,
    pub in_scope: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LapSweepResult {
    pub lambda_grid: Vec<f64>,
    pub mu_schedule: Vec<f64>,
    pub spacing: SpacingEstimate,
    pub vector_labels: Vec<String>,
    pub vector_norms: Vec<f64>,
    pub normalization: String,
    pub cells: Vec<SweepCell>,
    pub exponents: Vec<LambdaExponent>,
    pub sup_normalized: f64,
    pub flat: bool,
    pub im_positive: bool,
    pub max_conjugate_defect: f64,
}

impl LapSweepResult {
    pub fn exponent_at(&self, lambda: f64) -> Option<&LambdaExponent> {
        self.exponents
            .iter()
            .min_by(|a, b| (a.lambda - lambda).abs().total_cmp(&(b.lambda - lambda).abs()))
    }

    /// First in-scope energy whose exponent is not flat.
    pub fn first_growth(&self) -> Option<&LambdaExponent> {
        self.exponents.iter().find(|e| e.in_scope && !e.flat)
    }
}

fn check_floor(mus: &[f64], spacing: &SpacingEstimate) -> Result<()> {
    for &mu in mus {
        if mu < spacing.floor * (1.0 - 1e-12) {
            return Err(LabError::BelowFloor {
                mu,
                floor: spacing.floor,
                spacing: spacing.spacing,
            });
        }
    }
    Ok(())
}

pub fn lap_sweep(
    ops: &OperatorSet,
    ctx: &NormContext,
    vectors: &[TestVector],
    lambda_grid: &[f64],
    mu_sched: &[f64],
    spacing: &SpacingEstimate,
) -> Result<LapSweepResult> {
    check_floor(mu_sched, spacing)?;
    if vectors.is_empty() || lambda_grid.is_empty() {
        return Err(LabError::InvalidInput("sweep needs test vectors and energies".into()));
    }
    let (norms, normalization) = match vectors.iter().map(|v| ctx.e_surrogate_norm(&v.values)).collect::<Result<Vec<_>>>() {
        Ok(n) => (n, "surrogate".to_string()),
        Err(_) => (
            vectors.iter().map(|v| ctx.s_star_norm(&v.values)).collect::<Result<Vec<_>>>()?,
            "S*".to_string(),
        ),
    };
    let grid = &ops.grid;
    let tasks: Vec<(f64, f64)> = lambda_grid.iter().flat_map(|&l| mu_sched.iter().map(move |&m| (l, m))).collect();
    let complexes: Vec<Vec<Complex64>> = vectors.iter().map(|v| to_complex(&v.values)).collect();
    let per_task: Vec<Vec<SweepCell>> = tasks
        .par_iter()
        .map(|&(lambda, mu)| -> Result<Vec<SweepCell>> {
            let sp = ShiftedSolver::new(ops, lambda, mu, 0.0, Branch::Plus)?;
            let sm = ShiftedSolver::new(ops, lambda, mu, 0.0, Branch::Minus)?;
            let mut out = Vec::with_capacity(vectors.len());
            for (k, fc) in complexes.iter().enumerate() {
                let plus = grid.inner(fc, &sp.solve(fc)?);
                let minus = grid.inner(fc, &sm.solve(fc)?);
                out.push(SweepCell {
                    lambda,
                    mu,
                    vector: k,
                    plus,
                    minus,
                    normalized: plus.norm() / norms[k].powi(2),
                    in_scope: ops.c1 * lambda >= 0.0,
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let cells: Vec<SweepCell> = per_task.into_iter().flatten().collect();
    let mut exponents = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let mut per_vector = Vec::with_capacity(vectors.len());
        let mut stderr = 0.0f64;
        for k in 0..vectors.len() {
            let sel: Vec<&SweepCell> = cells.iter().filter(|c| c.lambda == lambda && c.vector == k).collect();
            let mu: Vec<f64> = sel.iter().map(|c| c.mu).collect();
            let ab: Vec<f64> = sel.iter().map(|c| c.plus.norm()).collect();
            let fit = growth_exponent(&mu, &ab, spacing.floor)?;
            per_vector.push(fit.slope);
            stderr = stderr.max(fit.stderr);
        }
        let exponent = per_vector.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        exponents.push(LambdaExponent {
            lambda,
            exponent,
            stderr,
            per_vector,
            flat: exponent < FLAT_THRESHOLD,
            in_scope: ops.c1 * lambda >= 0.0,
        });
    }
    let sup_normalized = cells.iter().filter(|c| c.in_scope).fold(0.0f64, |m, c| m.max(c.normalized));
    let im_positive = cells.iter().all(|c| c.plus.im > 0.0);
    let max_conjugate_defect = cells.iter().fold(0.0f64, |m, c| m.max((c.minus - c.plus.conj()).norm() / c.plus.norm()));
    let flat = exponents.iter().filter(|e| e.in_scope).all(|e| e.flat);
    Ok(LapSweepResult {
        lambda_grid: lambda_grid.to_vec(),
        mu_schedule: mu_sched.to_vec(),
        spacing: *spacing,
        vector_labels: vectors.iter().map(|v| v.label.clone()).collect(),
        vector_norms: norms,
        normalization,
        cells,
        exponents,
        sup_normalized,
        flat,
        im_positive,
        max_conjugate_defect,
    })
}

#[derive(Clone, Debug)]
pub struct KatoOptions {
    pub lanczos_steps: usize,
    /// Independent Lanczos starts per cell.
    pub samples: usize,
    pub domination_cap: f64,
    pub override_domination: bool,
    pub seed: u64,
}

impl Default for KatoOptions {
    fn default() -> Self {
        Self {
            lanczos_steps: 40,
            samples: 1,
            domination_cap: 10.0,
            override_domination: false,
            seed: 23,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KatoCell {
    pub lambda: f64,
    pub mu: f64,
    pub sup: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KatoReport {
    /// max |L| / L_max; infinite where L_max vanishes under nonzero L.
    pub domination_constant: f64,
    pub overridden: bool,
    pub cells: Vec<KatoCell>,
    pub exponents: Vec<LambdaExponent>,
    pub sup: f64,
    pub flat: bool,
}

/// sup over unit g of <Lg, Im (H - lambda - i mu)^{-1} Lg>, per cell, by Lanczos on L Im R L.
pub fn kato_smoothness_probe(
    ops: &OperatorSet,
    ctx: &NormContext,
    l_diag: &[f64],
    lambda_grid: &[f64],
    mu_sched: &[f64],
    spacing: &SpacingEstimate,
    opts: &KatoOptions,
) -> Result<KatoReport> {
    check_floor(mu_sched, spacing)?;
    let n = ops.unknowns();
    if l_diag.len() != n {
        return Err(LabError::InvalidInput(format!("weight has {} entries, grid has {n}", l_diag.len())));
    }
    let domination_constant = match ctx.smoothness_weight() {
        Ok(lmax) => l_diag.iter().zip(&lmax).fold(0.0f64, |m, (l, w)| {
            if *l == 0.0 {
                m
            } else if *w > 0.0 {
                m.max(l.abs() / w)
            } else {
                f64::INFINITY
            }
        }),
        Err(e) => {
            if opts.override_domination {
                f64::NAN
            } else {
                return Err(e);
            }
        }
    };
    if !(domination_constant <= opts.domination_cap) && !opts.override_domination {
        return Err(LabError::GateRefused(format!(
            "weight not dominated by L_max: worst pointwise ratio {domination_constant:.4e} exceeds cap {}",
            opts.domination_cap
        )));
    }
    let zero = l_diag.iter().all(|&l| l == 0.0);
    let tasks: Vec<(f64, f64)> = lambda_grid.iter().flat_map(|&l| mu_sched.iter().map(move |&m| (l, m))).collect();
    let cells: Vec<KatoCell> = tasks
        .par_iter()
        .map(|&(lambda, mu)| -> Result<KatoCell> {
            if zero {
                return Ok(KatoCell { lambda, mu, sup: 0.0 });
            }
            let solver = ShiftedSolver::new(ops, lambda, mu, 0.0, Branch::Plus)?;
            let failure = std::sync::Mutex::new(None);
            let apply = |g: &[f64]| -> Vec<f64> {
                let u: Vec<Complex64> = g.iter().zip(l_diag).map(|(a, l)| Complex64::new(a * l, 0.0)).collect();
                match solver.solve(&u) {
                    Ok(z) => z.iter().zip(l_diag).map(|(v, l)| v.im * l).collect(),
                    Err(e) => {
                        *failure.lock().unwrap() = Some(e);
                        vec![0.0; g.len()]
                    }
                }
            };
            let mut sup = 0.0f64;
            for s in 0..opts.samples.max(1) {
                let r = lanczos_max(apply, n, opts.lanczos_steps, opts.seed + s as u64);
                sup = sup.max(r.value);
            }
            if let Some(e) = failure.into_inner().unwrap() {
                return Err(e);
            }
            Ok(KatoCell { lambda, mu, sup })
        })
        .collect::<Result<_>>()?;
    let mut exponents = Vec::new();
    for &lambda in lambda_grid {
        let sel: Vec<&KatoCell> = cells.iter().filter(|c| c.lambda == lambda).collect();
        let (exponent, stderr) = if zero {
            (0.0, 0.0)
        } else {
            let fit = growth_exponent(
                &sel.iter().map(|c| c.mu).collect::<Vec<_>>(),
                &sel.iter().map(|c| c.sup).collect::<Vec<_>>(),
                spacing.floor,
            )?;
            (fit.slope, fit.stderr)
        };
        exponents.push(LambdaExponent {
            lambda,
            exponent,
            stderr,
            per_vector: vec![exponent],
            flat: exponent < FLAT_THRESHOLD,
            in_scope: ops.c1 * lambda >= 0.0,
        });
    }
    let sup = cells.iter().fold(0.0f64, |m, c| m.max(c.sup));
    let flat = exponents.iter().all(|e| e.flat);
    Ok(KatoReport {
        domination_constant,
        overridden: opts.override_domination && !(domination_constant <= opts.domination_cap),
        cells,
        exponents,
        sup,
        flat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::assemble_operators;
    use crate::potential;

    #[test]
    fn fit_recovers_power_laws() {
        let mu: Vec<f64> = (0..8).map(|k| 10f64.powf(-k as f64 / 2.0)).collect();
        let abs: Vec<f64> = mu.iter().map(|m| 3.0 * m.powf(-0.5)).collect();
        let fit = fit_exponent(&mu, &abs).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12 && fit.stderr < 1e-12);
        let flat = vec![2.0; 8];
        assert!(fit_exponent(&mu, &flat).unwrap().slope.abs() < 1e-12);
        assert!(fit_exponent(&mu[..3], &abs[..3]).is_err());
        assert!(fit_exponent(&mu, &[0.0; 8]).is_err());
    }

    #[test]
    fn fit_tolerates_percent_noise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mu: Vec<f64> = (0..16).map(|k| 10f64.powf(-k as f64 / 5.0)).collect();
        let abs: Vec<f64> = mu.iter().map(|m| m.powf(-0.5) * (1.0 + 0.01 * rng.random_range(-1.0..1.0))).collect();
        let fit = fit_exponent(&mu, &abs).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.02, "{}", fit.slope);
    }

    #[test]
    fn growth_exponent_uses_the_lowest_decade() {
        // |F| flat above mu = 0.1, growing like mu^-1 below
        let mu: Vec<f64> = (0..13).map(|k| 10f64.powf(-k as f64 / 4.0)).collect();
        let abs: Vec<f64> = mu.iter().map(|&m| if m >= 0.1 { 1.0 } else { 0.1 / m }).collect();
        let fit = growth_exponent(&mu, &abs, mu[12]).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12, "{}", fit.slope);
        let few = growth_exponent(&mu, &abs, 1e-9).unwrap();
        assert_eq!(few.points, 4);
    }

    #[test]
    fn schedules() {
        let s = mu_schedule(1.0, 1e-3, 4).unwrap();
        for (a, b) in s.iter().zip([1.0, 0.1, 0.01, 0.001]) {
            assert!((a / b - 1.0).abs() < 1e-12);
        }
        assert!(mu_schedule(1e-4, 1e-3, 4).is_err());
        assert_eq!(linspace(0.0, 2.0, 3), vec![0.0, 1.0, 2.0]);
        assert_eq!(linspace(0.5, 2.0, 1), vec![0.5]);
    }

    #[test]
    fn spacing_counts_levels_in_window() {
        let g = Grid::new(1, 10.0, 201).unwrap();
        let ops = assemble_operators(&g, &potential::zero(), 0.0).unwrap();
        // free Dirichlet levels (k pi / 2R)^2 approximately; count those below 1
        let est = estimate_spacing(&ops, 0.0, 1.0, 3.0);
        let expected = (20.0 / std::f64::consts::PI).floor() as usize;
        assert!((est.count as i64 - expected as i64).abs() <= 1);
        assert!((est.floor - 3.0 * est.spacing).abs() < 1e-15);
        let point = estimate_spacing(&ops, 0.5, 0.5, 3.0);
        assert_eq!((point.window_lo, point.window_hi), (0.4, 0.6));
    }

    #[test]
    fn sweep_refuses_mu_below_floor() {
        let g = Grid::new(1, 10.0, 101).unwrap();
        let ops = assemble_operators(&g, &potential::inverse_power(1.0, 1.0).unwrap(), 1.5).unwrap();
        let ctx = NormContext::new(&ops, 0.05).unwrap();
        let sp = estimate_spacing(&ops, 0.0, 1.0, 3.0);
        let v = gaussian_test_vectors(&g, &[1.0], &[0.0]);
        let err = lap_sweep(&ops, &ctx, &v, &[0.5], &[1.0, 0.5 * sp.floor], &sp).unwrap_err();
        assert!(matches!(err, LabError::BelowFloor { .. }));
    }

    #[test]
    fn small_sweep_is_consistent() {
        let g = Grid::new(1, 30.0, 301).unwrap();
        let ops = assemble_operators(&g, &potential::inverse_power(4.0, 0.5).unwrap(), 1.5).unwrap();
        let ctx = NormContext::new(&ops, 0.05).unwrap();
        let lambdas = linspace(0.0, 1.0, 3);
        let sp = estimate_spacing(&ops, 0.0, 1.0, 3.0);
        let mus = mu_schedule(1.0, sp.floor, 6).unwrap();
        let v = gaussian_test_vectors(&g, &[1.0, 2.0], &[0.0]);
        let res = lap_sweep(&ops, &ctx, &v, &lambdas, &mus, &sp).unwrap();
        assert_eq!(res.cells.len(), 3 * 6 * 2);
        assert!(res.im_positive);
        assert!(res.max_conjugate_defect < 1e-12);
        assert_eq!(res.exponents.len(), 3);
        assert!(res.exponents.iter().all(|e| e.in_scope));
    }
}
