//! Potential families with analytic Euler derivatives.
//!
//! Euler derivatives are the dilation derivatives: with g(t) = V(e^t x),
//! Vtilde(x) = g'(0) = x.grad V and W(x) = g''(0) = x.grad Vtilde.

use crate::error::{LabError, Result};
use crate::lattice::{assemble_laplacian, Grid};
use crate::linalg::{count_below, kth_eigenvalue, CsrMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Classification {
    #[serde(rename = "compliant")]
    Compliant,
    #[serde(rename = "fails-(i)")]
    FailsI,
    #[serde(rename = "fails-(ii)")]
    FailsII,
    #[serde(rename = "fails-(iii)")]
    FailsIII,
    #[serde(rename = "resonant")]
    Resonant,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Classification::Compliant => "compliant",
            Classification::FailsI => "fails-(i)",
            Classification::FailsII => "fails-(ii)",
            Classification::FailsIII => "fails-(iii)",
            Classification::Resonant => "resonant",
        };
        f.write_str(s)
    }
}

/// Limits of |Vtilde|/(-V) and |W|/(-V) as |x| -> infinity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailConstants {
    pub c_limit: f64,
    pub d_limit: f64,
    /// The limit is also the global supremum, so grid suprema may not exceed it.
    pub c_is_sup: bool,
    pub d_is_sup: bool,
}

/// Result of a depth bisection placing an eigenvalue of H at 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Calibration {
    pub depth: f64,
    pub eigenvalue: f64,
    pub spacing: f64,
    pub index: usize,
}

#[derive(Clone)]
pub struct PotentialSpec {
    pub id: String,
    value: ScalarField,
    gradient: Option<VectorField>,
    euler1: Option<ScalarField>,
    euler2: Option<ScalarField>,
    pub tail: TailConstants,
    pub expected: Classification,
    /// Dilation step for the finite-difference fallback.
    pub fd_step: f64,
    pub calibration: Option<Calibration>,
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("id", &self.id)
            .field("tail", &self.tail)
            .field("expected", &self.expected)
            .field("calibration", &self.calibration)
            .finish_non_exhaustive()
    }
}

/// V, Vtilde and W sampled on a grid.
#[derive(Clone, Debug, Serialize)]
pub struct PotentialFields {
    pub v: Vec<f64>,
    pub vt: Vec<f64>,
    pub w: Vec<f64>,
    /// False when the finite-difference fallback produced vt or w.
    pub analytic: bool,
}

fn dilate(x: &[f64], t: f64) -> Vec<f64> {
    let s = t.exp();
    x.iter().map(|v| v * s).collect()
}

impl PotentialSpec {
    pub fn custom(
        id: impl Into<String>,
        value: ScalarField,
        gradient: Option<VectorField>,
        euler1: Option<ScalarField>,
        euler2: Option<ScalarField>,
        tail: TailConstants,
        expected: Classification,
    ) -> Self {
        Self {
            id: id.into(),
            value,
            gradient,
            euler1,
            euler2,
            tail,
            expected,
            fd_step: 1e-4,
            calibration: None,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.euler1.is_some() && self.euler2.is_some()
    }

    pub fn euler1(&self, x: &[f64]) -> f64 {
        match &self.euler1 {
            Some(f) => f(x),
            None => {
                let s = self.fd_step;
                (self.value(&dilate(x, s)) - self.value(&dilate(x, -s))) / (2.0 * s)
            }
        }
    }

    pub fn euler2(&self, x: &[f64]) -> f64 {
        match &self.euler2 {
            Some(f) => f(x),
            None => {
                let s = self.fd_step;
                (self.value(&dilate(x, s)) - 2.0 * self.value(x) + self.value(&dilate(x, -s))) / (s * s)
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        match &self.gradient {
            Some(f) => f(x, &mut g),
            None => {
                let s = self.fd_step;
                let mut y = x.to_vec();
                for k in 0..x.len() {
                    y[k] = x[k] + s;
                    let a = self.value(&y);
                    y[k] = x[k] - s;
                    let b = self.value(&y);
                    y[k] = x[k];
                    g[k] = (a - b) / (2.0 * s);
                }
            }
        }
        g
    }

    pub fn sample(&self, grid: &Grid) -> PotentialFields {
        PotentialFields {
            v: grid.sample(|x| self.value(x)),
            vt: grid.sample(|x| self.euler1(x)),
            w: grid.sample(|x| self.euler2(x)),
            analytic: self.has_analytic_derivatives(),
        }
    }

    /// Identically zero on the grid.
    pub fn is_zero_on(&self, grid: &Grid) -> bool {
        grid.sample(|x| self.value(x)).iter().all(|&v| v == 0.0)
    }
}

/// Radially symmetric family given through t = |x|^2:
/// value(t), rad(t) = V'(r)/r, e1(t), e2(t).
fn radial<V, G, E1, E2>(id: String, value: V, rad: G, e1: E1, e2: E2, tail: TailConstants, expected: Classification) -> PotentialSpec
where
    V: Fn(f64) -> f64 + Send + Sync + 'static,
    G: Fn(f64) -> f64 + Send + Sync + 'static,
    E1: Fn(f64) -> f64 + Send + Sync + 'static,
    E2: Fn(f64) -> f64 + Send + Sync + 'static,
{
    let r2 = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    PotentialSpec::custom(
        id,
        Arc::new(move |x| value(r2(x))),
        Some(Arc::new(move |x, out| {
            let g = rad(r2(x));
            out.iter_mut().zip(x).for_each(|(o, xi)| *o = g * xi);
        })),
        Some(Arc::new(move |x| e1(r2(x)))),
        Some(Arc::new(move |x| e2(r2(x)))),
        tail,
        expected,
    )
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

pub fn zero() -> PotentialSpec {
    radial(
        "zero".into(),
        |_| 0.0,
        |_| 0.0,
        |_| 0.0,
        |_| 0.0,
        TailConstants {
            c_limit: 0.0,
            d_limit: 0.0,
            c_is_sup: true,
            d_is_sup: true,
        },
        Classification::Compliant,
    )
}

/// V = v everywhere.
pub fn constant(v: f64) -> PotentialSpec {
    let expected = if v <= 0.0 { Classification::Compliant } else { Classification::FailsI };
    radial(
        format!("constant:v={}", fmt_num(v)),
        move |_| v,
        |_| 0.0,
        |_| 0.0,
        |_| 0.0,
        TailConstants {
            c_limit: 0.0,
            d_limit: 0.0,
            c_is_sup: true,
            d_is_sup: true,
        },
        expected,
    )
}

/// V = -eps (1 + |x|^2)^(-m/2), m in (0, 2).
pub fn inverse_power(eps: f64, m: f64) -> Result<PotentialSpec> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(LabError::InvalidInput(format!("inverse_power strength must be positive, got {eps}")));
    }
    if !(m > 0.0 && m < 2.0) {
        return Err(LabError::InvalidInput(format!("inverse_power exponent must lie in (0, 2), got {m}")));
    }
    let d_limit = m * m;
    let interior = m / (2.0 + m);
    Ok(radial(
        format!("inverse_power:eps={},mu={}", fmt_num(eps), fmt_num(m)),
        move |t| -eps * (1.0 + t).powf(-m / 2.0),
        move |t| eps * m * (1.0 + t).powf(-m / 2.0 - 1.0),
        move |t| eps * m * t * (1.0 + t).powf(-m / 2.0 - 1.0),
        move |t| eps * m * (2.0 * t * (1.0 + t).powf(-m / 2.0 - 1.0) - (m + 2.0) * t * t * (1.0 + t).powf(-m / 2.0 - 2.0)),
        TailConstants {
            c_limit: m,
            d_limit,
            c_is_sup: true,
            d_is_sup: d_limit >= interior,
        },
        Classification::Compliant,
    ))
}

/// V = -eps exp(-|x|^2); |Vtilde|/(-V) = 2|x|^2 is unbounded.
pub fn gaussian_well(eps: f64) -> Result<PotentialSpec> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(LabError::InvalidInput(format!("gaussian_well strength must be positive, got {eps}")));
    }
    Ok(radial(
        format!("gaussian_well:eps={}", fmt_num(eps)),
        move |t| -eps * (-t).exp(),
        move |t| 2.0 * eps * (-t).exp(),
        move |t| 2.0 * eps * t * (-t).exp(),
        move |t| 4.0 * eps * t * (1.0 - t) * (-t).exp(),
        TailConstants {
            c_limit: f64::INFINITY,
            d_limit: f64::INFINITY,
            c_is_sup: true,
            d_is_sup: true,
        },
        Classification::FailsII,
    ))
}

/// inverse_power(eps, m) minus depth * exp(-1/(1 - |x|^2/w^2)) on |x| < w.
pub fn bumped_well(eps: f64, m: f64, depth: f64, width: f64) -> Result<PotentialSpec> {
    let base = inverse_power(eps, m)?;
    if !(width > 0.0 && depth >= 0.0) {
        return Err(LabError::InvalidInput("bump width must be positive and depth nonnegative".into()));
    }
    let w2 = width * width;
    let bump = move |t: f64| {
        let s = t / w2;
        if s < 1.0 {
            (s, (-1.0 / (1.0 - s)).exp())
        } else {
            (s, 0.0)
        }
    };
    let (bv, bg, b1, b2) = (
        base.value.clone(),
        base.gradient.clone().unwrap(),
        base.euler1.clone().unwrap(),
        base.euler2.clone().unwrap(),
    );
    let r2 = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let mut spec = PotentialSpec::custom(
        format!(
            "bumped_well:eps={},mu={},depth={},width={}",
            fmt_num(eps),
            fmt_num(m),
            fmt_num(depth),
            fmt_num(width)
        ),
        Arc::new(move |x| {
            let (_, b) = bump(r2(x));
            bv(x) - depth * b
        }),
        Some(Arc::new(move |x, out| {
            bg(x, out);
            let (s, b) = bump(r2(x));
            if b > 0.0 {
                let g = 2.0 * depth * b / (w2 * (1.0 - s).powi(2));
                out.iter_mut().zip(x).for_each(|(o, xi)| *o += g * xi);
            }
        })),
        Some(Arc::new(move |x| {
            let (s, b) = bump(r2(x));
            let e = if b > 0.0 { 2.0 * depth * s * b / (1.0 - s).powi(2) } else { 0.0 };
            b1(x) + e
        })),
        Some(Arc::new(move |x| {
            let (s, b) = bump(r2(x));
            let e = if b > 0.0 {
                let q = 1.0 - s;
                2.0 * depth * b * (2.0 * s / q.powi(2) - 2.0 * s * s / q.powi(4) + 4.0 * s * s / q.powi(3))
            } else {
                0.0
            };
            b2(x) + e
        })),
        base.tail,
        Classification::Resonant,
    );
    // the bump edge makes the ratios peak inside the support
    spec.tail.c_is_sup = false;
    spec.tail.d_is_sup = false;
    Ok(spec)
}

fn hamiltonian(lap: &CsrMatrix, grid: &Grid, spec: &PotentialSpec) -> CsrMatrix {
    lap.combine(1.0, &CsrMatrix::diagonal(&grid.sample(|x| spec.value(x))), 1.0)
}

/// Bumped inverse-power well whose depth is bisected until an eigenvalue of
/// H sits at 0 on this grid. The largest crossing depth in [0, max_depth] is used.
pub fn resonant_well(eps: f64, m: f64, max_depth: f64, width: f64, grid: &Grid) -> Result<PotentialSpec> {
    let lap = assemble_laplacian(grid);
    let count = |d: f64| -> Result<usize> { Ok(count_below(&hamiltonian(&lap, grid, &bumped_well(eps, m, d, width)?), 0.0)) };
    let target = count(max_depth)?;
    if count(0.0)? == target {
        return Err(LabError::NoConvergence {
            what: format!("resonance bisection (no crossing in depth range [0, {max_depth}])"),
            iterations: 0,
        });
    }
    let (mut lo, mut hi) = (0.0, max_depth);
    let mut iters = 0;
    while hi - lo > 1e-13 * hi && iters < 200 {
        let mid = 0.5 * (lo + hi);
        if count(mid)? == target {
            hi = mid;
        } else {
            lo = mid;
        }
        iters += 1;
    }
    let mut spec = bumped_well(eps, m, hi, width)?;
    let h = hamiltonian(&lap, grid, &spec);
    let k = target - 1;
    let tol = 1e-15;
    let ev = kth_eigenvalue(&h, k, tol)?;
    let above = kth_eigenvalue(&h, k + 1, tol)?;
    let spacing = if k > 0 { 0.5 * (above - kth_eigenvalue(&h, k - 1, tol)?) } else { above - ev };
    if ev.abs() >= spacing / 10.0 {
        return Err(LabError::NoConvergence {
            what: format!("resonance certification (eigenvalue {ev:.3e}, spacing {spacing:.3e})"),
            iterations: iters,
        });
    }
    spec.id = format!(
        "resonant_well:eps={},mu={},height={},width={}",
        fmt_num(eps),
        fmt_num(m),
        fmt_num(max_depth),
        fmt_num(width)
    );
    spec.calibration = Some(Calibration {
        depth: hi,
        eigenvalue: ev,
        spacing,
        index: k,
    });
    spec.expected = Classification::Resonant;
    Ok(spec)
}

fn parse_params(id: &str, body: &str, allowed: &[&str]) -> Result<Vec<f64>> {
    let mut vals = vec![None; allowed.len()];
    if !body.is_empty() {
        for kv in body.split(',') {
            let (k, v) = kv.split_once('=').ok_or_else(|| LabError::BadPotential(id.into()))?;
            let pos = allowed.iter().position(|a| *a == k.trim()).ok_or_else(|| LabError::BadPotential(id.into()))?;
            let v: f64 = v.trim().parse().map_err(|_| LabError::BadPotential(id.into()))?;
            if vals[pos].replace(v).is_some() {
                return Err(LabError::BadPotential(id.into()));
            }
        }
    }
    vals.into_iter().map(|v| v.ok_or_else(|| LabError::BadPotential(id.into()))).collect()
}

/// Registry lookup, e.g. `inverse_power:eps=1,mu=1`. The grid is needed only
/// for families calibrated on the discretization.
pub fn parse_potential(id: &str, grid: &Grid) -> Result<PotentialSpec> {
    let (name, body) = id.split_once(':').unwrap_or((id, ""));
    let bad = |e: LabError| match e {
        LabError::InvalidInput(_) => LabError::BadPotential(id.into()),
        other => other,
    };
    match name.trim() {
        "zero" if body.is_empty() => Ok(zero()),
        "constant" => Ok(constant(parse_params(id, body, &["v"])?[0])),
        "inverse_power" => {
            let p = parse_params(id, body, &["eps", "mu"])?;
            inverse_power(p[0], p[1]).map_err(bad)
        }
        "gaussian_well" => gaussian_well(parse_params(id, body, &["eps"])?[0]).map_err(bad),
        "bumped_well" => {
            let p = parse_params(id, body, &["eps", "mu", "depth", "width"])?;
            bumped_well(p[0], p[1], p[2], p[3]).map_err(bad)
        }
        "resonant_well" => {
            let p = parse_params(id, body, &["eps", "mu", "height", "width"])?;
            if !(p[2] > 0.0 && p[3] > 0.0) {
                return Err(LabError::BadPotential(id.into()));
            }
            resonant_well(p[0], p[1], p[2], p[3], grid).map_err(bad)
        }
        _ => Err(LabError::BadPotential(id.into())),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub points: usize,
    /// Worst scaled disagreement of each callback with finite differences.
    pub euler1_error: f64,
    pub euler2_error: f64,
    pub gradient_error: f64,
    pub worst_point: Option<Vec<f64>>,
    pub tail_consistent: bool,
    pub degenerate: bool,
    pub notes: Vec<String>,
    pub pass: bool,
}

pub const VALIDATION_TOL: f64 = 1e-6;

/// Five-point central difference of g at 0.
fn central<G: Fn(f64) -> f64>(g: G, s: f64) -> f64 {
    (8.0 * (g(s) - g(-s)) - (g(2.0 * s) - g(-2.0 * s))) / (12.0 * s)
}

/// Compares callbacks against central differences (step 1e-5 in the dilation
/// parameter, five-point stencil) at 50 seeded random points, and tail limits against grid suprema.
pub fn validate_spec(spec: &PotentialSpec, grid: &Grid, seed: u64) -> ValidationReport {
    let s = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = grid.half_extent;
    let (mut e1, mut e2, mut eg) = (0.0f64, 0.0f64, 0.0f64);
    let mut worst_point = None;
    let mut notes = Vec::new();
    for _ in 0..50 {
        let x: Vec<f64> = (0..grid.dims).map(|_| rng.random_range(-r..r)).collect();
        let v = spec.value(&x);
        let vt = spec.euler1(&x);
        let w = spec.euler2(&x);
        let vt_fd = central(|t| spec.value(&dilate(&x, t)), s);
        let w_fd = central(|t| spec.euler1(&dilate(&x, t)), s);
        let grad = spec.gradient(&x);
        let vt_grad: f64 = grad.iter().zip(&x).map(|(g, xi)| g * xi).sum();
        let floor = 1e-300;
        let a = (vt - vt_fd).abs() / (vt.abs() + v.abs() + floor);
        let b = (w - w_fd).abs() / (w.abs() + vt.abs() + v.abs() + floor);
        let c = (vt - vt_grad).abs() / (vt.abs() + v.abs() + floor);
        if a.max(b).max(c) > e1.max(e2).max(eg) && a.max(b).max(c) > VALIDATION_TOL && worst_point.is_none() {
            worst_point = Some(x.clone());
        }
        e1 = e1.max(a);
        e2 = e2.max(b);
        eg = eg.max(c);
    }
    let fields = spec.sample(grid);
    let mut c_sup = 0.0f64;
    let mut d_sup = 0.0f64;
    for i in 0..fields.v.len() {
        if fields.v[i] < 0.0 {
            c_sup = c_sup.max(fields.vt[i].abs() / -fields.v[i]);
            d_sup = d_sup.max(fields.w[i].abs() / -fields.v[i]);
        }
    }
    let mut tail_consistent = true;
    if spec.tail.c_is_sup && c_sup > spec.tail.c_limit + 1e-6 {
        tail_consistent = false;
        notes.push(format!("grid sup of |Vtilde|/(-V) = {c_sup} exceeds tail limit {}", spec.tail.c_limit));
    }
    if spec.tail.d_is_sup && d_sup > spec.tail.d_limit + 1e-6 {
        tail_consistent = false;
        notes.push(format!("grid sup of |W|/(-V) = {d_sup} exceeds tail limit {}", spec.tail.d_limit));
    }
    let degenerate = spec.is_zero_on(grid);
    if degenerate {
        notes.push("degenerate: smoothing weights unavailable (V vanishes identically)".into());
    }
    if !spec.has_analytic_derivatives() {
        notes.push("Euler derivatives from finite-difference fallback".into());
    }
    let pass = e1 <= VALIDATION_TOL && e2 <= VALIDATION_TOL && eg <= VALIDATION_TOL && tail_consistent;
    ValidationReport {
        points: 50,
        euler1_error: e1,
        euler2_error: e2,
        gradient_error: eg,
        worst_point,
        tail_consistent,
        degenerate,
        notes,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_power_values_at_one() {
        let v = inverse_power(1.0, 1.0).unwrap();
        let x = [1.0];
        assert!((v.value(&x) + 2f64.powf(-0.5)).abs() < 1e-15);
        assert!((v.euler1(&x) - 2f64.powf(-1.5)).abs() < 1e-15);
        let w = 2.0 * 2f64.powf(-1.5) - 3.0 * 2f64.powf(-2.5);
        assert!((v.euler2(&x) - w).abs() < 1e-15);
        assert!((v.euler2(&x) - 0.176777).abs() < 1e-6);
        assert_eq!(v.tail.c_limit, 1.0);
        assert_eq!(v.tail.d_limit, 1.0);
    }

    #[test]
    fn inverse_power_rejects_exponent() {
        assert!(inverse_power(1.0, 2.0).is_err());
        assert!(inverse_power(1.0, 0.0).is_err());
        assert!(inverse_power(0.0, 1.0).is_err());
    }

    #[test]
    fn gaussian_ratio() {
        let v = gaussian_well(1.0).unwrap();
        for r in [1.0f64, 2.0] {
            let x = [r, 0.0];
            assert!((v.euler1(&x) / -v.value(&x) - 2.0 * r * r).abs() < 1e-12);
            assert!(v.value(&x) < 0.0);
        }
    }

    #[test]
    fn shipped_families_validate() {
        for dims in [1, 2, 3] {
            let g = Grid::new(dims, 10.0, 21).unwrap();
            for spec in [
                zero(),
                constant(-1.0),
                inverse_power(1.0, 1.0).unwrap(),
                inverse_power(2.0, 0.3).unwrap(),
                inverse_power(0.5, 1.7).unwrap(),
                gaussian_well(1.0).unwrap(),
                bumped_well(0.01, 1.0, 3.0, 2.0).unwrap(),
            ] {
                let r = validate_spec(&spec, &g, 11);
                assert!(r.pass, "{} dims {dims}: {r:?}", spec.id);
            }
        }
    }

    #[test]
    fn bump_derivatives_inside_support() {
        // dense check near the bump, where random points rarely land
        let spec = bumped_well(0.01, 1.0, 3.0, 2.0).unwrap();
        let s = 1e-5;
        for k in 1..40 {
            let x = [k as f64 * 0.049];
            let fd = central(|t| spec.value(&dilate(&x, t)), s);
            assert!((spec.euler1(&x) - fd).abs() < 1e-8, "x={}", x[0]);
            let fd2 = central(|t| spec.euler1(&dilate(&x, t)), s);
            let w = spec.euler2(&x);
            assert!((w - fd2).abs() < 1e-7 * w.abs().max(1.0), "x={} w={w} fd={fd2}", x[0]);
        }
    }

    #[test]
    fn wrong_sign_detected() {
        let good = inverse_power(1.0, 1.0).unwrap();
        let g2 = good.clone();
        let bad = PotentialSpec::custom(
            "bad",
            Arc::new(move |x| good.value(x)),
            None,
            Some(Arc::new(move |x| -g2.euler1(x))),
            None,
            TailConstants {
                c_limit: 1.0,
                d_limit: 1.0,
                c_is_sup: false,
                d_is_sup: false,
            },
            Classification::Compliant,
        );
        let g = Grid::new(1, 10.0, 21).unwrap();
        let r = validate_spec(&bad, &g, 3);
        assert!(!r.pass);
        assert!(r.worst_point.is_some());
    }

    #[test]
    fn zero_is_degenerate() {
        let g = Grid::new(1, 10.0, 21).unwrap();
        let r = validate_spec(&zero(), &g, 1);
        assert!(r.pass && r.degenerate);
    }

    #[test]
    fn fallback_close_to_analytic() {
        let a = inverse_power(1.0, 1.0).unwrap();
        let a2 = a.clone();
        let fb = PotentialSpec::custom("fb", Arc::new(move |x| a2.value(x)), None, None, None, a.tail, Classification::Compliant);
        for x in [0.3, 1.0, 4.0] {
            assert!((fb.euler1(&[x]) - a.euler1(&[x])).abs() < 1e-8);
            assert!((fb.euler2(&[x]) - a.euler2(&[x])).abs() < 1e-6);
            assert!((fb.gradient(&[x])[0] - a.gradient(&[x])[0]).abs() < 1e-8);
        }
        let g = Grid::new(1, 5.0, 11).unwrap();
        assert!(!fb.sample(&g).analytic);
    }

    #[test]
    fn registry() {
        let g = Grid::new(1, 10.0, 21).unwrap();
        assert_eq!(parse_potential("inverse_power:eps=1,mu=1", &g).unwrap().id, "inverse_power:eps=1,mu=1");
        assert_eq!(parse_potential("zero", &g).unwrap().id, "zero");
        for bad in [
            "inverse_power:eps=1",
            "nope",
            "inverse_power:eps=1,mu=3",
            "gaussian_well:eps=x",
            "inverse_power:eps=1,mu=1,mu=1",
        ] {
            assert!(matches!(parse_potential(bad, &g), Err(LabError::BadPotential(_))), "{bad}");
        }
    }

    #[test]
    fn resonance_calibrates() {
        let g = Grid::new(1, 100.0, 501).unwrap();
        let spec = resonant_well(0.001, 1.0, 20.0, 2.0, &g).unwrap();
        let c = spec.calibration.unwrap();
        assert!(c.eigenvalue.abs() < c.spacing / 10.0);
        assert!(c.depth > 0.0 && c.depth < 20.0);
        // too shallow a search range has no crossing
        assert!(resonant_well(0.001, 1.0, 1e-6, 2.0, &g).is_err());
    }
}
