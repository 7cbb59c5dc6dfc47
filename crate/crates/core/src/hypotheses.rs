//! Checks of the pointwise potential conditions, the constants c~, d~, c1,
//! c2, and strict positivity of S.

use crate::error::{LabError, Result};
use crate::lattice::{assemble_operators, Grid, OperatorSet};
use crate::linalg::eigen::{max_eig_sym, pencil_max, pencil_min};
use crate::linalg::{min_eig_sym, CsrMatrix, EigOptions};
use crate::potential::{Classification, PotentialFields, PotentialSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub fn euler_derivatives(potential: &PotentialSpec, grid: &Grid) -> PotentialFields {
    potential.sample(grid)
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct ConditionFlags {
    /// V <= 0 everywhere.
    pub i: bool,
    /// sup |Vtilde|/(-V) < 2.
    pub ii: bool,
    /// sup |W|/(-V) finite.
    pub iii: bool,
    #[serde(rename = "S_positive")]
    pub s_positive: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub potential_id: String,
    /// Grid supremum of |Vtilde|/(-V).
    pub c_tilde: f64,
    pub c_tilde_tail: f64,
    /// max(grid supremum, tail limit); used for gating and for c1.
    pub c_tilde_bound: f64,
    pub d_tilde: f64,
    pub d_tilde_tail: f64,
    pub d_tilde_bound: f64,
    pub c1: Option<f64>,
    #[serde(rename = "lambda_min_S")]
    pub lambda_min_s: Option<f64>,
    #[serde(rename = "lambda_min_S_residual")]
    pub lambda_min_s_residual: Option<f64>,
    pub c2: Option<f64>,
    #[serde(rename = "lambda_min_H")]
    pub lambda_min_h: Option<f64>,
    pub conditions: ConditionFlags,
    /// Energies for which c1*lambda >= 0.
    pub lambda_range: String,
    pub verdict: Classification,
    pub expected: Classification,
    pub classification_match: bool,
    pub derivatives: String,
    pub notes: Vec<String>,
}

impl HypothesisReport {
    pub fn pass(&self) -> bool {
        self.conditions.i && self.conditions.ii && self.conditions.iii && self.conditions.s_positive == Some(true)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn ratio(num: f64, v: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if v < 0.0 {
        num.abs() / -v
    } else {
        f64::INFINITY
    }
}

/// Constants and pointwise conditions; c1 and spectral fields left empty.
pub fn check_conditions(potential: &PotentialSpec, grid: &Grid) -> HypothesisReport {
    let f = euler_derivatives(potential, grid);
    conditions_from_fields(potential, &f)
}

fn conditions_from_fields(potential: &PotentialSpec, f: &PotentialFields) -> HypothesisReport {
    let mut c = 0.0f64;
    let mut d = 0.0f64;
    for i in 0..f.v.len() {
        c = c.max(ratio(f.vt[i], f.v[i]));
        d = d.max(ratio(f.w[i], f.v[i]));
    }
    let cond_i = f.v.iter().all(|&v| v <= 0.0);
    let c_bound = c.max(potential.tail.c_limit);
    let d_bound = d.max(potential.tail.d_limit);
    let conditions = ConditionFlags {
        i: cond_i,
        ii: c_bound < 2.0,
        iii: d_bound.is_finite(),
        s_positive: None,
    };
    let verdict = if !conditions.i {
        Classification::FailsI
    } else if !conditions.ii {
        Classification::FailsII
    } else if !conditions.iii {
        Classification::FailsIII
    } else {
        Classification::Compliant
    };
    let classification_match = match potential.expected {
        Classification::Resonant => verdict != Classification::Compliant,
        e => e == verdict,
    };
    let mut notes = Vec::new();
    if potential.expected == Classification::Resonant {
        notes.push("resonance-tuned well: conditions are recorded, the family exists to break the conclusion".into());
    }
    HypothesisReport {
        potential_id: potential.id.clone(),
        c_tilde: c,
        c_tilde_tail: potential.tail.c_limit,
        c_tilde_bound: c_bound,
        d_tilde: d,
        d_tilde_tail: potential.tail.d_limit,
        d_tilde_bound: d_bound,
        c1: None,
        lambda_min_s: None,
        lambda_min_s_residual: None,
        c2: None,
        lambda_min_h: None,
        conditions,
        lambda_range: String::new(),
        verdict,
        expected: potential.expected,
        classification_match,
        derivatives: if f.analytic { "analytic" } else { "finite-difference" }.into(),
        notes,
    }
}

/// Midpoint of (c~, 2), or a validated override in [0, 2).
pub fn select_c1(report: &HypothesisReport, override_c1: Option<f64>) -> Result<f64> {
    if !report.conditions.ii {
        return Err(LabError::GateRefused(format!("condition (ii) fails: c~ = {} >= 2", report.c_tilde_bound)));
    }
    match override_c1 {
        Some(c) if (0.0..2.0).contains(&c) => Ok(c),
        Some(c) => Err(LabError::InvalidInput(format!("c1 override {c} outside [0, 2)"))),
        None => Ok(0.5 * (report.c_tilde_bound + 2.0)),
    }
}

pub fn c2_bound(ops: &OperatorSet, opts: &EigOptions) -> Result<f64> {
    Ok((-min_eig_sym(&ops.b, opts)?.value).max(0.0))
}

/// Full hypothesis run: constants, c1, assembly, lambda_min(S), c2, lambda_min(H).
/// Operators are returned only when c1 could be selected.
pub fn check_hypotheses(
    potential: &PotentialSpec,
    grid: &Grid,
    c1_override: Option<f64>,
    opts: &EigOptions,
) -> Result<(HypothesisReport, Option<OperatorSet>)> {
    let mut report = check_conditions(potential, grid);
    let c1 = match select_c1(&report, c1_override) {
        Ok(c) => c,
        Err(LabError::GateRefused(msg)) => {
            report.notes.push(format!("c1 not selected: {msg}"));
            return Ok((report, None));
        }
        Err(e) => return Err(e),
    };
    if c1_override.is_some() && c1 < report.c_tilde_bound {
        report.notes.push(format!("c1 override {c1} is below c~ = {}", report.c_tilde_bound));
    }
    let ops = assemble_operators(grid, potential, c1)?;
    let s_min = min_eig_sym(&ops.s, opts)?;
    report.c1 = Some(c1);
    report.lambda_min_s = Some(s_min.value);
    report.lambda_min_s_residual = Some(s_min.residual);
    report.conditions.s_positive = Some(s_min.value > 0.0);
    report.c2 = Some(c2_bound(&ops, opts)?);
    report.lambda_min_h = Some(min_eig_sym(&ops.h, opts)?.value);
    report.lambda_range = if c1 > 0.0 { "[0, inf)".into() } else { "(-inf, inf)".into() };
    Ok((report, Some(ops)))
}

#[derive(Clone, Debug, Serialize)]
pub struct FormCheck {
    pub name: String,
    /// Largest sampled |<f,Tf>| / <f,Sf>.
    pub d_emp: f64,
    /// Exact: max |generalized eigenvalue| of the pencil (T, S).
    pub d_pencil: f64,
    /// min over samples of (cap <f,Sf> - |<f,Tf>|) / <f,Sf>.
    pub worst_margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FormReport {
    pub checks: Vec<FormCheck>,
    pub d_emp: f64,
    pub d_pencil: f64,
    pub cap: f64,
    pub pass: bool,
}

/// Random vectors: half white noise, half sums of smooth bumps.
pub fn random_test_vectors(grid: &Grid, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.unknowns();
    let r = grid.half_extent;
    (0..count)
        .map(|k| {
            if k % 2 == 0 {
                (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
            } else {
                let bumps: Vec<(Vec<f64>, f64, f64)> = (0..3)
                    .map(|_| {
                        let c: Vec<f64> = (0..grid.dims).map(|_| rng.random_range(-0.5 * r..0.5 * r)).collect();
                        let w = rng.random_range(0.02 * r..0.2 * r);
                        (c, w, rng.random_range(-1.0..1.0))
                    })
                    .collect();
                grid.sample(|x| {
                    bumps
                        .iter()
                        .map(|(c, w, a)| {
                            let d2: f64 = x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum();
                            a * (-d2 / (2.0 * w * w)).exp()
                        })
                        .sum()
                })
            }
        })
        .collect()
}

/// Two-sided form bounds -dS <= T <= dS for T in {B, [iB,A], [iS,A]}.
pub fn quadratic_form_inequalities(ops: &OperatorSet, samples: usize, cap: f64, seed: u64) -> Result<FormReport> {
    let s_min = min_eig_sym(&ops.s, &EigOptions::default())?.value;
    if s_min <= 0.0 {
        return Err(LabError::NotPositive {
            what: "S (form inequalities are vacuous)".into(),
            lambda_min: s_min,
        });
    }
    let vectors = random_test_vectors(&ops.grid, samples, seed);
    let sv: Vec<Vec<f64>> = vectors.iter().map(|f| ops.s.matvec(f)).collect();
    let sf: Vec<f64> = vectors.iter().zip(&sv).map(|(f, s)| crate::linalg::scalar::dot(f, s)).collect();
    let mats: [(&str, CsrMatrix); 3] = [("B", ops.b.clone()), ("[iB,A]", ops.commutator_ba()), ("[iS,A]", ops.commutator_sa())];
    let mut checks = Vec::new();
    for (name, t) in mats.iter() {
        let mut d_emp = 0.0f64;
        let mut worst = f64::INFINITY;
        for (f, &q) in vectors.iter().zip(&sf) {
            let tf = crate::linalg::scalar::dot(f, &t.matvec(f));
            d_emp = d_emp.max(tf.abs() / q);
            worst = worst.min((cap * q - tf.abs()) / q);
        }
        let lo = pencil_min(t, &ops.s, 1e-10)?;
        let hi = pencil_max(t, &ops.s, 1e-10)?;
        checks.push(FormCheck {
            name: name.to_string(),
            d_emp,
            d_pencil: lo.abs().max(hi.abs()),
            worst_margin: worst,
        });
    }
    let d_emp = checks.iter().fold(0.0f64, |m, c| m.max(c.d_emp));
    let d_pencil = checks.iter().fold(0.0f64, |m, c| m.max(c.d_pencil));
    Ok(FormReport {
        checks,
        d_emp,
        d_pencil,
        cap,
        pass: d_emp <= cap,
    })
}

/// The two lower bounds for S used to build the dominated norm estimate:
/// S >= (2 - c1)(-Delta) and S >= -(c1 - c~) V, as sampled worst margins
/// normalized by <f,Sf>.
#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundReport {
    pub laplacian_margin: f64,
    pub potential_margin: f64,
    pub samples: usize,
}

pub fn s_lower_bounds(ops: &OperatorSet, c_tilde: f64, samples: usize, seed: u64) -> LowerBoundReport {
    let vectors = random_test_vectors(&ops.grid, samples, seed);
    let mut lm = f64::INFINITY;
    let mut pm = f64::INFINITY;
    for f in &vectors {
        let q = crate::linalg::scalar::dot(f, &ops.s.matvec(f));
        let l = crate::linalg::scalar::dot(f, &ops.laplacian.matvec(f));
        let v: f64 = f.iter().zip(&ops.fields.v).map(|(a, b)| a * a * b).sum();
        lm = lm.min((q - (2.0 - ops.c1) * l) / q);
        pm = pm.min((q + (ops.c1 - c_tilde) * v) / q);
    }
    LowerBoundReport {
        laplacian_margin: lm,
        potential_margin: pm,
        samples,
    }
}

/// Exact ||B|| from both spectral ends.
pub fn b_norm(ops: &OperatorSet) -> Result<f64> {
    let opts = EigOptions {
        tol: 1e-7,
        ..EigOptions::default()
    };
    let lo = min_eig_sym(&ops.b, &opts)?.value;
    let hi = max_eig_sym(&ops.b, &opts)?.value;
    Ok(lo.abs().max(hi.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{self, gaussian_well, inverse_power};

    #[test]
    fn inverse_power_constants() {
        let g = Grid::new(1, 20.0, 401).unwrap();
        let r = check_conditions(&inverse_power(1.0, 1.0).unwrap(), &g);
        assert!(r.c_tilde >= 0.99 && r.c_tilde <= 1.0);
        assert!((r.c_tilde - 400.0 / 401.0).abs() < 1e-10);
        assert!(r.d_tilde <= 1.0 && r.d_tilde > 0.99);
        assert_eq!(r.d_tilde_bound, 1.0);
        assert_eq!(r.verdict, Classification::Compliant);
        assert_eq!(select_c1(&r, None).unwrap(), 1.5);
    }

    #[test]
    fn gaussian_fails_ii() {
        let g = Grid::new(1, 10.0, 201).unwrap();
        let r = check_conditions(&gaussian_well(1.0).unwrap(), &g);
        assert!(r.conditions.i && !r.conditions.ii);
        assert_eq!(r.verdict, Classification::FailsII);
        assert!(r.classification_match);
        assert!(matches!(select_c1(&r, None), Err(LabError::GateRefused(_))));
        let (rep, ops) = check_hypotheses(&gaussian_well(1.0).unwrap(), &g, None, &EigOptions::default()).unwrap();
        assert!(ops.is_none() && !rep.pass());
    }

    #[test]
    fn c1_midpoint_and_override() {
        let g = Grid::new(1, 10.0, 21).unwrap();
        let mut r = check_conditions(&potential::zero(), &g);
        assert_eq!(select_c1(&r, None).unwrap(), 1.0);
        assert_eq!(select_c1(&r, Some(0.0)).unwrap(), 0.0);
        assert!(select_c1(&r, Some(2.0)).is_err());
        r.c_tilde_bound = 1.9;
        assert!((select_c1(&r, None).unwrap() - 1.95).abs() < 1e-15);
    }

    #[test]
    fn positive_constant_fails_i() {
        let g = Grid::new(1, 10.0, 21).unwrap();
        let r = check_conditions(&potential::constant(0.5), &g);
        assert!(!r.conditions.i);
        assert_eq!(r.verdict, Classification::FailsI);
        assert!(r.classification_match);
    }

    #[test]
    fn zero_potential_c2_vanishes() {
        let g = Grid::new(1, 10.0, 101).unwrap();
        let (r, ops) = check_hypotheses(&potential::zero(), &g, Some(0.0), &EigOptions::default()).unwrap();
        assert_eq!(r.c2, Some(0.0));
        assert!(r.pass());
        let ops = ops.unwrap();
        let shifted = OperatorSet {
            b: ops.b.shifted(5.0),
            ..ops.clone()
        };
        assert_eq!(c2_bound(&shifted, &EigOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn c2_shift_is_exact() {
        let g = Grid::new(1, 10.0, 101).unwrap();
        let v = inverse_power(20.0, 1.0).unwrap();
        let ops = assemble_operators(&g, &v, 1.5).unwrap();
        let opts = EigOptions::default();
        let c2 = c2_bound(&ops, &opts).unwrap();
        assert!(c2 > 0.0);
        let shifted = OperatorSet {
            b: ops.b.shifted(0.25 * c2),
            ..ops.clone()
        };
        let c2s = c2_bound(&shifted, &opts).unwrap();
        assert!((c2 - c2s - 0.25 * c2).abs() < 1e-8 * c2.max(1.0));
    }

    #[test]
    fn form_inequalities_zero_potential() {
        let g = Grid::new(1, 10.0, 51).unwrap();
        let ops = assemble_operators(&g, &potential::zero(), 0.0).unwrap();
        let r = quadratic_form_inequalities(&ops, 20, 1.0 + 1e-12, 1).unwrap();
        let b = &r.checks[0];
        assert!((b.d_emp - 1.0).abs() < 1e-12 && (b.d_pencil - 1.0).abs() < 1e-8);
    }

    #[test]
    fn form_violation_detected() {
        let g = Grid::new(1, 10.0, 51).unwrap();
        let ops = assemble_operators(&g, &inverse_power(1.0, 1.0).unwrap(), 1.5).unwrap();
        let base = quadratic_form_inequalities(&ops, 40, 100.0, 2).unwrap();
        assert!(base.pass);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = g.unknowns();
        let mut trip = Vec::new();
        for i in 0..n {
            let v: f64 = rng.random_range(-1.0..1.0) * 1e4;
            trip.push((i, i, v));
        }
        let mut bad = ops.clone();
        bad.b = ops.b.combine(1.0, &CsrMatrix::from_triplets(n, n, trip), 1.0);
        let r = quadratic_form_inequalities(&bad, 40, base.d_emp * 1.01, 2).unwrap();
        assert!(!r.pass);
        assert!(r.checks[0].worst_margin < 0.0);
    }

    #[test]
    fn s_bounds_hold() {
        let g = Grid::new(1, 20.0, 201).unwrap();
        let v = inverse_power(1.0, 1.0).unwrap();
        let (r, ops) = check_hypotheses(&v, &g, None, &EigOptions::default()).unwrap();
        let lb = s_lower_bounds(&ops.unwrap(), r.c_tilde, 100, 5);
        assert!(lb.laplacian_margin >= -1e-12 && lb.potential_margin >= -1e-12, "{lb:?}");
    }
}
