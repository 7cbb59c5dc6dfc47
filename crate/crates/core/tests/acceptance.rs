//! Acceptance criteria 1-11. Each test prints one `criterion N: PASS|FAIL`
//! line straight to stderr so the verdicts survive output capture.

use laplab::cli::{execute, reproduce, Command};
use laplab::config::RunConfig;
use laplab::hypotheses::check_hypotheses;
use laplab::lattice::{assemble_operators, commutator_consistency, Commutator, Grid, OperatorSet};
use laplab::linalg::{min_eig_sym, EigOptions};
use laplab::normspace::NormContext;
use laplab::oracle::DenseSpectrum;
use laplab::potential::{self, parse_potential, Classification};
use laplab::resolvent::{energy_identity_check, eps0_bound, eps_window_convergence, regularized_trace, shifted_solve, Branch, TraceOptions};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use std::io::Write;
use std::time::{Duration, Instant};

fn verdict(id: &str, pass: bool, detail: &str) {
    let line = format!("criterion {id}: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

fn within(start: Instant, limit: Duration) -> (bool, String) {
    let el = start.elapsed();
    (el <= limit, format!("{:.2}s of {}s", el.as_secs_f64(), limit.as_secs()))
}

fn compliant(n: usize, r: f64) -> (OperatorSet, f64) {
    let g = Grid::new(1, r, n).unwrap();
    let spec = potential::inverse_power(1.0, 1.0).unwrap();
    let (rep, ops) = check_hypotheses(&spec, &g, None, &EigOptions::default()).unwrap();
    assert!(rep.pass(), "reference well must be compliant");
    (ops.unwrap(), rep.c2.unwrap())
}

fn random_complex(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

#[test]
fn criterion_01_identity_exactness() {
    let t0 = Instant::now();
    let (ops, _) = compliant(401, 20.0);
    let eps0 = eps0_bound(&ops).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_id, mut worst_margin, mut in_scope, mut bad) = (0.0f64, f64::INFINITY, 0, 0);
    for _ in 0..200 {
        let f = random_complex(ops.unknowns(), &mut rng);
        let lambda = rng.random_range(-1.0..2.0);
        let mu = 10f64.powf(rng.random_range(-3.0..0.0));
        let eps = eps0 * rng.random_range(1e-3..1.0);
        let branch = if rng.random_bool(0.5) { Branch::Plus } else { Branch::Minus };
        let c = energy_identity_check(&ops, &f, lambda, mu, eps, branch).unwrap();
        worst_id = worst_id.max(c.identity_residual);
        if c.in_scope {
            in_scope += 1;
            let scale = c.lhs.abs().max(c.s_form.abs());
            worst_margin = worst_margin.min(c.margin / scale);
            if c.margin < -1e-10 * scale {
                bad += 1;
            }
        }
    }
    let (fast, time) = within(t0, Duration::from_secs(10));
    let pass = worst_id <= 1e-10 && bad == 0 && fast;
    verdict(
        "1",
        pass,
        &format!("max identity residual {worst_id:.2e} (tol 1e-10); {in_scope} in-scope tuples, worst relative margin over <f,Sf> {worst_margin:.2e}; {time}"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_oracle_equivalence() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    // 399 is the odd grid closest to 400 (grids are odd so that 0 is a node)
    for n in [201, 399] {
        let g = Grid::new(1, 20.0, n).unwrap();
        let ops = assemble_operators(&g, &potential::inverse_power(1.0, 1.0).unwrap(), 1.5).unwrap();
        let dense = DenseSpectrum::new(&ops.h).unwrap();
        for _ in 0..50 {
            let f = random_complex(n, &mut rng);
            let lambda = rng.random_range(-0.5..3.0);
            let mu = 10f64.powf(rng.random_range(-3.0..0.0));
            let branch = if rng.random_bool(0.5) { Branch::Plus } else { Branch::Minus };
            let u = shifted_solve(&ops, lambda, mu, 0.0, branch, &f).unwrap();
            let v = dense.resolvent_apply(lambda, mu, branch, &f);
            let diff: Vec<Complex64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
            worst = worst.max(g.l2_norm(&diff) / g.l2_norm(&v));
        }
    }
    let (fast, time) = within(t0, Duration::from_secs(30));
    let pass = worst <= 1e-8 && fast;
    verdict(
        "2",
        pass,
        &format!("100 cells on N = 201, 399; worst relative error {worst:.2e} (tol 1e-8); {time}"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_commutator_consistency() {
    let t0 = Instant::now();
    let g = Grid::new(1, 15.0, 301).unwrap();
    let mut ratios = Vec::new();
    for spec in [potential::zero(), potential::inverse_power(1.0, 1.0).unwrap()] {
        let ops = assemble_operators(&g, &spec, 1.0).unwrap();
        for sigma in [0.8, 1.2] {
            let f = |x: &[f64]| (-(x[0] - 0.5).powi(2) / (2.0 * sigma * sigma)).exp();
            for which in [Commutator::HA, Commutator::BA] {
                let r = commutator_consistency(&ops, f, which).unwrap();
                assert!(!r.touches_boundary);
                ratios.push(r.ratio);
            }
        }
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    let (fast, time) = within(t0, Duration::from_secs(20));
    let pass = lo >= 3.0 && hi <= 5.0 && fast;
    verdict(
        "3",
        pass,
        &format!("r(h)/r(h/2) over {} cases in [{lo:.3}, {hi:.3}] (want [3, 5]); {time}", ratios.len()),
    );
    assert!(pass);
}

#[test]
fn criterion_04_hypothesis_constants() {
    let t0 = Instant::now();
    let r = 20.0;
    let g = Grid::new(1, r, 401).unwrap();
    let mut worst = 0.0f64;
    let mut tails_exact = true;
    for m in [0.5, 1.0, 1.5] {
        let spec = parse_potential(&format!("inverse_power:eps=1,mu={m}"), &g).unwrap();
        let (rep, _) = check_hypotheses(&spec, &g, None, &EigOptions::default()).unwrap();
        worst = worst.max((rep.c_tilde - m * r * r / (1.0 + r * r)).abs());
        tails_exact &= rep.c_tilde_tail == m;
    }
    let gw = parse_potential("gaussian_well:eps=1", &g).unwrap();
    let (rep, _) = check_hypotheses(&gw, &g, None, &EigOptions::default()).unwrap();
    let (fast, time) = within(t0, Duration::from_secs(10));
    let pass = worst <= 1e-6 && tails_exact && rep.verdict == Classification::FailsII && fast;
    verdict(
        "4",
        pass,
        &format!(
            "max |c~ - mu R^2/(1+R^2)| = {worst:.2e}; tails exact: {tails_exact}; gaussian_well verdict {}; {time}",
            rep.verdict
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_proof_trace_bounds() {
    let t0 = Instant::now();
    let (ops, _) = compliant(401, 20.0);
    let ctx = NormContext::new(&ops, 0.05).unwrap();
    let f = ops.grid.sample(|x| (-(x[0] - 1.0).powi(2) / 2.0).exp());
    let tr = regularized_trace(&ops, &ctx, &f, 1.0, 0.5, &TraceOptions::default()).unwrap();
    let energy_ok = tr
        .rows
        .iter()
        .all(|r| r.plus.energy_bound_lhs <= r.plus.energy_bound_rhs && r.minus.energy_bound_lhs <= r.minus.energy_bound_rhs);
    let resolvent_ok = tr.rows.iter().all(|r| r.resolvent_bound_c <= r.resolvent_bound_limit);
    let lim_lo = tr.rows.iter().map(|r| r.resolvent_bound_limit).fold(f64::INFINITY, f64::min);
    let lim_hi = tr.rows.iter().map(|r| r.resolvent_bound_limit).fold(0.0, f64::max);
    let emp_lo = tr.rows.iter().map(|r| r.resolvent_bound_c).fold(f64::INFINITY, f64::min);
    let emp_hi = tr.rows.iter().map(|r| r.resolvent_bound_c).fold(0.0, f64::max);
    let interior: Vec<f64> = tr.rows.iter().flat_map(|r| [r.plus.diff_residual, r.minus.diff_residual]).flatten().collect();
    let r14 = !interior.is_empty() && interior.iter().all(|&v| v >= 0.0);
    let min_diff = interior.iter().copied().fold(f64::INFINITY, f64::min);
    let (fast, time) = within(t0, Duration::from_secs(120));
    let pass = energy_ok && resolvent_ok && lim_hi / lim_lo < 2.0 && r14 && fast;
    verdict(
        "5",
        pass,
        &format!(
            "energy bound holds at all {} points: {energy_ok}; eps*ratio within 1 + c1 eps: {resolvent_ok}, certifying C in [{lim_lo:.4}, {lim_hi:.4}], empirical eps*ratio in [{emp_lo:.2e}, {emp_hi:.2e}]; differential inequality: {} interior residuals, min {min_diff:.2e}; {time}",
            tr.rows.len(),
            interior.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_eps_window_slope() {
    let t0 = Instant::now();
    let g = Grid::new(1, 20.0, 401).unwrap();
    let mut slopes = Vec::new();
    for (id, c1) in [("inverse_power:eps=1,mu=1", None), ("inverse_power:eps=4,mu=0.5", None), ("zero", Some(0.0))] {
        let spec = parse_potential(id, &g).unwrap();
        let (rep, ops) = check_hypotheses(&spec, &g, c1, &EigOptions::default()).unwrap();
        let ops = ops.unwrap();
        let f = g.sample(|x| (-(x[0] - 1.0).powi(2) / 2.0).exp());
        let w = eps_window_convergence(&ops, &f, 1.0, 0.5, rep.c2.unwrap(), 8, 4, 1).unwrap();
        slopes.push((id, w.slope));
    }
    let (fast, time) = within(t0, Duration::from_secs(60));
    let pass = slopes.iter().all(|(_, s)| (0.9..=1.1).contains(s)) && fast;
    let list: Vec<String> = slopes.iter().map(|(id, s)| format!("{id}: {s:.4}")).collect();
    verdict("6", pass, &format!("log-log slopes {} (want [0.9, 1.1]); {time}", list.join(", ")));
    assert!(pass);
}

const DEEP_WELL: &str = "inverse_power:eps=4,mu=0.5";
const RESONANT: &str = "resonant_well:eps=0.001,mu=1,height=20,width=2";

fn headline_config(id: &str, points: usize) -> RunConfig {
    let mut c = RunConfig::minimal(1, 200.0, points, id);
    c.sweep.lambda_start = 0.0;
    c.sweep.lambda_stop = 2.0;
    c.sweep.lambda_count = 21;
    c.sweep.mu_start = 1.0;
    c.sweep.mu_count = 16;
    c
}

fn lap_json(cmd: Command, cfg: &RunConfig, name: &str) -> Value {
    let dir = tempfile::tempdir().unwrap();
    execute(&cmd, cfg, dir.path()).unwrap();
    serde_json::from_str(&std::fs::read_to_string(dir.path().join(name)).unwrap()).unwrap()
}

fn exponents(v: &Value) -> Vec<(f64, f64)> {
    v["exponents"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e["lambda"].as_f64().unwrap(), e["exponent"].as_f64().unwrap()))
        .collect()
}

#[test]
fn criterion_07_headline_flatness() {
    let t0 = Instant::now();
    let cfg = headline_config(DEEP_WELL, 2001);
    let g = Grid::new(1, 200.0, 2001).unwrap();
    let ops = assemble_operators(&g, &parse_potential(DEEP_WELL, &g).unwrap(), 1.0).unwrap();
    let gs = min_eig_sym(&ops.h, &EigOptions::default()).unwrap();
    let certified = gs.value + gs.residual <= -0.05;
    let fine = lap_json(Command::Lap { force: false }, &cfg, "lap.json")["result"].clone();
    let coarse = lap_json(Command::Lap { force: false }, &headline_config(DEEP_WELL, 1001), "lap.json")["result"].clone();
    let ex = exponents(&fine);
    let worst = ex.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let (s2, s1) = (fine["sup_normalized"].as_f64().unwrap(), coarse["sup_normalized"].as_f64().unwrap());
    let stable = s2.max(s1) / s2.min(s1) <= 2.0;
    let (fast, time) = within(t0, Duration::from_secs(600));
    let pass = certified && ex.len() == 21 && worst < 0.1 && stable && fast;
    verdict(
        "7",
        pass,
        &format!(
            "lambda_min(H) = {:.4} (residual {:.1e}); max exponent over 21 energies {worst:.4} (want < 0.1); sup_normalized {s1:.4} (N=1001) vs {s2:.4} (N=2001); {time}",
            gs.value, gs.residual
        ),
    );
    assert!(pass);
}

/// The mu range must reach five decades below mu = 1 before the level
/// spacing floor of the N = 2001 grid. Implemented as stated; see README.
#[test]
fn criterion_07_decade_span() {
    let fine = lap_json(Command::Lap { force: false }, &headline_config(DEEP_WELL, 2001), "lap.json")["result"].clone();
    let sched: Vec<f64> = fine["mu_schedule"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let decades = (sched[0] / sched[sched.len() - 1]).log10();
    let floor = fine["spacing"]["floor"].as_f64().unwrap();
    let pass = decades >= 5.0;
    verdict(
        "7 (decade span)",
        pass,
        &format!("mu spans {decades:.2} decades, 1 down to the spacing floor {floor:.3e} on N = 2001, R = 200 (want >= 5)"),
    );
    assert!(pass);
}

#[test]
fn criterion_08_resonant_control() {
    let t0 = Instant::now();
    let res = lap_json(Command::Lap { force: true }, &headline_config(RESONANT, 2001), "lap.json")["result"].clone();
    let ex = exponents(&res);
    let at_zero = ex.iter().find(|e| e.0 == 0.0).unwrap().1;
    let (fast, time) = within(t0, Duration::from_secs(300));
    let pass = at_zero >= 0.4 && fast;
    verdict("8", pass, &format!("exponent at lambda = 0 is {at_zero:.4} (want >= 0.4); {time}"));
    assert!(pass);
}

fn smooth_json(weight: &str, force: bool) -> Value {
    let cfg = headline_config(DEEP_WELL, 2001);
    lap_json(
        Command::Smooth {
            force,
            weight: Some(weight.into()),
        },
        &cfg,
        "smooth.json",
    )["result"]["report"]
        .clone()
}

#[test]
fn criterion_09_lmax_is_flat() {
    let t0 = Instant::now();
    let rep = smooth_json("lmax", false);
    let ex = exponents(&rep);
    let worst = ex.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let at = ex.iter().find(|e| e.1 == worst).unwrap().0;
    let (fast, time) = within(t0, Duration::from_secs(300));
    let pass = worst < 0.1 && fast;
    verdict(
        "9 (L_max flat)",
        pass,
        &format!("max exponent {worst:.4} at lambda = {at} with delta = 0.05 (want < 0.1); {time}"),
    );
    assert!(pass);
}

#[test]
fn criterion_09_constant_weight_grows() {
    let t0 = Instant::now();
    let rep = smooth_json("one", true);
    let ex = exponents(&rep);
    let worst = ex.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let (fast, time) = within(t0, Duration::from_secs(300));
    let pass = worst >= 0.4 && rep["overridden"].as_bool() == Some(true) && fast;
    verdict(
        "9 (L = 1 grows)",
        pass,
        &format!("max exponent {worst:.4} under override (want >= 0.4); {time}"),
    );
    assert!(pass);
}

#[test]
fn criterion_10_cayley_flow() {
    let t0 = Instant::now();
    let g = Grid::new(1, 20.0, 801).unwrap();
    let ops = assemble_operators(&g, &potential::inverse_power(1.0, 1.0).unwrap(), 1.0).unwrap();
    let ctx = NormContext::new(&ops, 0.05).unwrap();
    let f = g.sample(|x| (-(x[0] - 1.0).powi(2)).exp() * (1.0 + 0.3 * x[0]));
    let n0 = g.l2_norm(&f);
    let t = 2.0;
    let wt = ctx.dilation_flow(&f, t, None).unwrap();
    let drift = (g.l2_norm(&wt) - n0).abs() / n0 / t;
    let (s, u) = (0.7, 1.3);
    let steps = |x: f64| Some((x / ctx.dt_max).ceil() as usize * 4);
    let ws = ctx.dilation_flow(&f, s, steps(s)).unwrap();
    let wus = ctx.dilation_flow(&ws, u, steps(u)).unwrap();
    let wsum = ctx.dilation_flow(&f, s + u, steps(s + u)).unwrap();
    let diff: Vec<f64> = wus.iter().zip(&wsum).map(|(a, b)| a - b).collect();
    let defect = g.l2_norm(&diff) / n0;
    let (fast, time) = within(t0, Duration::from_secs(10));
    let pass = drift <= 1e-12 && defect <= 1e-8 && fast;
    verdict(
        "10",
        pass,
        &format!("norm drift {drift:.2e} per unit time (tol 1e-12); composition defect {defect:.2e} (tol 1e-8); {time}"),
    );
    assert!(pass);
}

#[test]
fn criterion_11_determinism() {
    let t0 = Instant::now();
    let mut cfg = RunConfig::minimal(1, 40.0, 401, DEEP_WELL);
    cfg.sweep.lambda_count = 5;
    cfg.trace.identity_samples = 5;
    let mut results = Vec::new();
    for cmd in [
        Command::Lap { force: false },
        Command::ProofTrace,
        Command::Smooth { force: true, weight: None },
        Command::Check,
    ] {
        let dir = tempfile::tempdir().unwrap();
        execute(&cmd, &cfg, dir.path()).unwrap();
        results.push((cmd.name(), reproduce(dir.path()).map(|o| o.exit_code)));
    }
    let pass = results.iter().all(|(_, r)| matches!(r, Ok(0)));
    let list: Vec<String> = results
        .iter()
        .map(|(n, r)| format!("{n}: {}", if matches!(r, Ok(0)) { "identical" } else { "differs" }))
        .collect();
    verdict("11", pass, &format!("{}; {:.2}s", list.join(", "), t0.elapsed().as_secs_f64()));
    assert!(pass);
}
