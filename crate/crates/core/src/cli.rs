//! Subcommands as library functions. Each returns an [`Outcome`] carrying
//! the process exit code, a one-line summary and the files it wrote.

use crate::config::RunConfig;
use crate::error::{LabError, Result};
use crate::hypotheses::{check_hypotheses, quadratic_form_inequalities, s_lower_bounds};
use crate::lattice::{assemble_operators, commutator_consistency, Commutator, Grid, OperatorSet};
use crate::linalg::{min_eig_sym, EigOptions};
use crate::normspace::{dominated_bound_check, NormContext};
use crate::oracle::{DenseSpectrum, DENSE_LIMIT};
use crate::potential::{parse_potential, validate_spec, PotentialSpec};
use crate::report;
use crate::resolvent::{
    default_schedule, energy_identity_check, eps1_bound, eps_window_convergence, estimate_spacing, gaussian_test_vectors, kato_smoothness_probe, lap_sweep,
    linspace, mu_schedule, regularized_trace, resolvent_element, Branch, KatoOptions, TraceOptions,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::{Path, PathBuf};

pub const IDENTITY_TOL: f64 = 1e-10;
pub const ORACLE_TOL: f64 = 1e-8;
pub const THREADS_ENV: &str = "LAPLAB_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    Check,
    Lap { force: bool },
    ProofTrace,
    Smooth { force: bool, weight: Option<String> },
    OracleTest,
    CommutatorTest,
    Export,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Lap { .. } => "lap",
            Command::ProofTrace => "proof-trace",
            Command::Smooth { .. } => "smooth",
            Command::OracleTest => "oracle-test",
            Command::CommutatorTest => "commutator-test",
            Command::Export => "export",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    #[serde(flatten)]
    command: Command,
    config_hash: String,
    files: Vec<String>,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.dir.join(name);
        std::fs::write(&p, text)?;
        self.files.push(p);
        Ok(())
    }
}

/// Thread count from the environment, else the config, else rayon's default.
pub fn thread_count(cfg: &RunConfig) -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(LabError::Config(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        },
        Err(_) => Ok(cfg.run.threads),
    }
}

/// Runs `cmd`, writing outputs, the archived config and a manifest into `out`.
pub fn execute(cmd: &Command, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out)?;
    let mut w = Writer { dir: out, files: Vec::new() };
    let mut run = || -> Result<(i32, String)> {
        match cmd {
            Command::Check => run_check(cfg, &mut w),
            Command::Lap { force } => run_lap(cfg, *force, &mut w),
            Command::ProofTrace => run_trace(cfg, &mut w),
            Command::Smooth { force, weight } => run_smooth(cfg, *force, weight.as_deref(), &mut w),
            Command::OracleTest => run_oracle(cfg, &mut w),
            Command::CommutatorTest => run_commutator(cfg, &mut w),
            Command::Export => run_export(cfg, &mut w),
        }
    };
    let (exit_code, summary) = match thread_count(cfg)? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| LabError::Config(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    let mut names: Vec<String> = w.files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect();
    names.sort();
    w.put("config.toml", &cfg.canonical())?;
    let manifest = Manifest {
        command: cmd.clone(),
        config_hash: cfg.hash(),
        files: names,
    };
    w.put("manifest.json", &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"))?;
    Ok(Outcome {
        exit_code,
        summary,
        files: w.files,
    })
}

struct Setup {
    grid: Grid,
    spec: PotentialSpec,
    report: crate::hypotheses::HypothesisReport,
    ops: Option<OperatorSet>,
}

fn eig_opts(cfg: &RunConfig) -> EigOptions {
    EigOptions {
        tol: cfg.hypotheses.eig_tol,
        seed: cfg.run.seed,
        ..EigOptions::default()
    }
}

fn setup(cfg: &RunConfig) -> Result<Setup> {
    let g = &cfg.grid;
    let grid = Grid::new(g.dims, g.half_extent, g.points)?;
    let spec = parse_potential(&cfg.potential.id, &grid)?;
    let (report, ops) = check_hypotheses(&spec, &grid, cfg.hypotheses.c1, &eig_opts(cfg))?;
    Ok(Setup { grid, spec, report, ops })
}

/// Operators for a run that requires the hypotheses, or that was forced past them.
fn gated_ops(cfg: &RunConfig, s: Setup, force: bool, what: &str) -> Result<(OperatorSet, f64)> {
    if !s.report.pass() && !force {
        return Err(LabError::GateRefused(format!(
            "{what} needs a compliant potential; verdict for {} is {} (rerun with --force to override)",
            s.report.potential_id, s.report.verdict
        )));
    }
    let lambda_min_h = s.report.lambda_min_h;
    let ops = match s.ops {
        Some(o) => o,
        None => assemble_operators(&s.grid, &s.spec, cfg.hypotheses.c1.unwrap_or(0.0))?,
    };
    let lmin = match lambda_min_h {
        Some(l) => l,
        None => min_eig_sym(&ops.h, &eig_opts(cfg))?.value,
    };
    Ok((ops, lmin))
}

fn run_check(cfg: &RunConfig, w: &mut Writer) -> Result<(i32, String)> {
    let s = setup(cfg)?;
    let validation = validate_spec(&s.spec, &s.grid, cfg.run.seed);
    let mut extra = json!({});
    let mut forms_pass = true;
    if let Some(ops) = &s.ops {
        let forms = quadratic_form_inequalities(ops, cfg.hypotheses.form_samples, cfg.hypotheses.form_cap, cfg.run.seed)?;
        forms_pass = forms.pass;
        extra["forms"] = serde_json::to_value(&forms).expect("serializes");
        extra["s_lower_bounds"] =
            serde_json::to_value(s_lower_bounds(ops, s.report.c_tilde_bound, cfg.hypotheses.form_samples, cfg.run.seed)).expect("serializes");
        let ctx = NormContext::new(ops, cfg.norms.delta)?;
        if ctx.strictly_negative() && ctx.s_positive() {
            let dom = dominated_bound_check(&ctx, ops.c1, s.report.c_tilde_bound, cfg.hypotheses.form_samples, cfg.run.seed)?;
            extra["dominated_bound"] = serde_json::to_value(&dom).expect("serializes");
        }
    }
    let result = json!({
        "hypotheses": serde_json::to_value(&s.report).expect("serializes"),
        "validation": serde_json::to_value(&validation).expect("serializes"),
        "checks": extra,
    });
    w.put("check.json", &report::envelope(cfg, "check", s.report.c1, &result))?;
    let r = &s.report;
    let fmt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
    let summary = format!(
        "verdict: {}, expected: {}, c1 = {}, lambda_min_S = {}, lambda_min_H = {}",
        r.verdict,
        r.expected,
        fmt(r.c1),
        fmt(r.lambda_min_s),
        fmt(r.lambda_min_h)
    );
    let code = if r.pass() && validation.pass && forms_pass { 0 } else { 1 };
    Ok((code, summary))
}

fn run_lap(cfg: &RunConfig, force: bool, w: &mut Writer) -> Result<(i32, String)> {
    let s = setup(cfg)?;
    let (ops, lambda_min_h) = gated_ops(cfg, s, force, "lap")?;
    let ctx = NormContext::new(&ops, cfg.norms.delta)?;
    let sw = &cfg.sweep;
    let lambdas = linspace(sw.lambda_start, sw.lambda_stop, sw.lambda_count);
    let spacing = estimate_spacing(&ops, sw.lambda_start, sw.lambda_stop, sw.floor_multiplier);
    let mus = mu_schedule(sw.mu_start, spacing.floor, sw.mu_count)?;
    let vectors = gaussian_test_vectors(&ops.grid, &sw.sigmas, &sw.offsets);
    let res = lap_sweep(&ops, &ctx, &vectors, &lambdas, &mus, &spacing)?;
    w.put("lap.csv", &report::lap_csv(cfg, &res))?;
    w.put("lap.gp", &report::lap_plot_script(&res, "lap.csv"))?;
    let result = json!({
        "lambda_min_H": lambda_min_h,
        "forced": force,
        "spacing": res.spacing,
        "normalization": res.normalization,
        "vectors": res.vector_labels,
        "vector_norms": res.vector_norms,
        "mu_schedule": res.mu_schedule,
        "exponents": res.exponents,
        "sup_normalized": res.sup_normalized,
        "flat": res.flat,
        "im_positive": res.im_positive,
        "max_conjugate_defect": res.max_conjugate_defect,
    });
    w.put("lap.json", &report::envelope(cfg, "lap", Some(ops.c1), &result))?;
    let summary = match res.first_growth() {
        None => format!("flat: true, sup_normalized = {:.6e}, lambda_min_H = {:.6e}", res.sup_normalized, lambda_min_h),
        Some(e) => format!("flat: false at lambda={} (exponent {:.3})", e.lambda, e.exponent),
    };
    Ok((if res.flat { 0 } else { 1 }, summary))
}

fn random_complex(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn run_trace(cfg: &RunConfig, w: &mut Writer) -> Result<(i32, String)> {
    let s = setup(cfg)?;
    let c2 = s.report.c2;
    let (ops, _) = gated_ops(cfg, s, false, "proof-trace")?;
    let c2 = c2.ok_or_else(|| LabError::GateRefused("c2 unavailable".into()))?;
    let ctx = NormContext::new(&ops, cfg.norms.delta)?;
    let t = &cfg.trace;
    let f = ops.grid.sample(|x| {
        let d2: f64 = x.iter().enumerate().map(|(k, v)| if k == 0 { (v - t.offset).powi(2) } else { v * v }).sum();
        (-d2 / (2.0 * t.sigma * t.sigma)).exp()
    });
    let eps0 = crate::resolvent::eps0_bound(&ops)?;
    let schedule = if t.schedule.is_empty() {
        default_schedule(eps1_bound(eps0), t.eps_count)
    } else {
        t.schedule.clone()
    };
    let opts = TraceOptions {
        schedule,
        quadrature_nodes: t.quadrature_nodes,
        resolvent_bound_samples: t.resolvent_bound_samples,
        seed: cfg.run.seed,
    };
    let tr = regularized_trace(&ops, &ctx, &f, t.lambda, t.mu, &opts)?;
    let win = eps_window_convergence(&ops, &f, t.lambda, t.mu, c2, t.window_count, t.window_samples, cfg.run.seed)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut identity_max = tr.identity_check_max;
    let mut inequality_ok = true;
    let mut checks = Vec::new();
    for _ in 0..t.identity_samples {
        let g = random_complex(ops.unknowns(), &mut rng);
        let lambda = rng.random_range(0.0..2.0);
        let mu = rng.random_range(0.05..1.0);
        let eps = eps0 * rng.random_range(0.01..0.99);
        let branch = if rng.random_bool(0.5) { Branch::Plus } else { Branch::Minus };
        let c = energy_identity_check(&ops, &g, lambda, mu, eps, branch)?;
        identity_max = identity_max.max(c.identity_residual);
        if c.in_scope && !c.inequality_holds {
            inequality_ok = false;
        }
        checks.push(json!({"lambda": lambda, "mu": mu, "eps": eps, "branch": branch.symbol(), "check": c}));
    }
    let energy_bound_ok = tr
        .rows
        .iter()
        .all(|r| r.plus.energy_bound_lhs <= r.plus.energy_bound_rhs && r.minus.energy_bound_lhs <= r.minus.energy_bound_rhs);
    w.put("trace.csv", &report::trace_csv(cfg, &tr, &win))?;
    let result = json!({"trace": tr, "window": win, "identity_checks": checks, "identity_max": identity_max});
    w.put("trace.json", &report::envelope(cfg, "proof-trace", Some(ops.c1), &result))?;
    let summary = format!(
        "identity residual max = {identity_max:.3e}, F(0+) = {:.10e}{:+.10e}i, direct = {:.10e}{:+.10e}i, window slope = {:.3}",
        tr.limit_plus.re, tr.limit_plus.im, tr.direct_plus.re, tr.direct_plus.im, win.slope
    );
    let code = if identity_max > IDENTITY_TOL {
        3
    } else if !(inequality_ok && energy_bound_ok && win.contraction_holds) {
        1
    } else {
        0
    };
    Ok((code, summary))
}

/// Weight for the smoothness probe: `lmax`, `one`, `zero` or `scaled_lmax:<factor>`.
pub fn smoothness_weight(ctx: &NormContext, spec: &str) -> Result<Vec<f64>> {
    let n = ctx.grid.unknowns();
    match spec {
        "lmax" => ctx.smoothness_weight(),
        "one" => Ok(vec![1.0; n]),
        "zero" => Ok(vec![0.0; n]),
        other => match other.strip_prefix("scaled_lmax:").map(str::parse::<f64>) {
            Some(Ok(k)) => Ok(ctx.smoothness_weight()?.into_iter().map(|v| k * v).collect()),
            _ => Err(LabError::InvalidInput(format!(
                "unknown weight {other:?}; expected lmax, one, zero or scaled_lmax:<factor>"
            ))),
        },
    }
}

fn run_smooth(cfg: &RunConfig, force: bool, weight: Option<&str>, w: &mut Writer) -> Result<(i32, String)> {
    let s = setup(cfg)?;
    let (ops, _) = gated_ops(cfg, s, force, "smooth")?;
    let ctx = NormContext::new(&ops, cfg.norms.delta)?;
    if !ctx.strictly_negative() {
        return Err(LabError::GateRefused("smoothness weight needs V < 0 at every node".into()));
    }
    let weight = weight.unwrap_or(&cfg.smooth.weight);
    let l = smoothness_weight(&ctx, weight)?;
    let sw = &cfg.sweep;
    let lambdas = linspace(sw.lambda_start, sw.lambda_stop, sw.lambda_count);
    let spacing = estimate_spacing(&ops, sw.lambda_start, sw.lambda_stop, sw.floor_multiplier);
    let mus = mu_schedule(sw.mu_start, spacing.floor, sw.mu_count)?;
    let opts = KatoOptions {
        lanczos_steps: cfg.smooth.lanczos_steps,
        samples: cfg.smooth.samples,
        domination_cap: cfg.smooth.domination_cap,
        override_domination: force,
        seed: cfg.run.seed,
    };
    let rep = kato_smoothness_probe(&ops, &ctx, &l, &lambdas, &mus, &spacing, &opts)?;
    w.put("smooth.csv", &report::kato_csv(cfg, &rep))?;
    w.put(
        "smooth.json",
        &report::envelope(cfg, "smooth", Some(ops.c1), &json!({"weight": weight, "spacing": spacing, "report": rep})),
    )?;
    let summary = if rep.flat {
        format!("smooth: true, weight = {weight}, sup = {:.6e}", rep.sup)
    } else {
        let e = rep.exponents.iter().find(|e| !e.flat).expect("some exponent is not flat");
        format!("smooth: false at lambda={} (exponent {:.3}), weight = {weight}", e.lambda, e.exponent)
    };
    Ok((if rep.flat { 0 } else { 1 }, summary))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn run_oracle(cfg: &RunConfig, w: &mut Writer) -> Result<(i32, String)> {
    let s = setup(cfg)?;
    if s.grid.unknowns() > DENSE_LIMIT {
        return Err(LabError::InvalidInput(format!(
            "oracle-test needs at most {DENSE_LIMIT} unknowns, grid has {}",
            s.grid.unknowns()
        )));
    }
    let opts = eig_opts(cfg);
    let ops = match s.ops {
        Some(o) => o,
        None => assemble_operators(&s.grid, &s.spec, cfg.hypotheses.c1.unwrap_or(0.0))?,
    };
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for (name, m) in [("H", &ops.h), ("S", &ops.s), ("B", &ops.b)] {
        let dense = DenseSpectrum::new(m)?;
        let banded = min_eig_sym(m, &opts)?.value;
        let err = rel(banded, dense.min());
        worst = worst.max(err);
        rows.push(json!({"check": format!("lambda_min({name})"), "banded": banded, "dense": dense.min(), "rel_error": err}));
    }
    let dense_h = DenseSpectrum::new(&ops.h)?;
    let f = ops.grid.sample(|x| (-x.iter().map(|v| v * v).sum::<f64>() / 2.0).exp());
    let fc: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for &(lambda, mu) in &[(0.5, 1.0), (1.0, 0.1), (2.0, 0.01)] {
        for branch in [Branch::Plus, Branch::Minus] {
            let got = resolvent_element(&ops, lambda, mu, branch, &f)?;
            let u = dense_h.resolvent_apply(lambda, mu, branch, &fc);
            let want = ops.grid.inner(&fc, &u);
            let err = (got - want).norm() / want.norm().max(1e-300);
            worst = worst.max(err);
            rows.push(
                json!({"check": format!("F({lambda}, {mu}, {})", branch.symbol()), "banded": [got.re, got.im], "dense": [want.re, want.im], "rel_error": err}),
            );
        }
    }
    w.put(
        "oracle.json",
        &report::envelope(
            cfg,
            "oracle-test",
            Some(ops.c1),
            &json!({"checks": rows, "worst": worst, "tolerance": ORACLE_TOL}),
        ),
    )?;
    let pass = worst <= ORACLE_TOL;
    Ok((
        if pass { 0 } else { 3 },
        format!("oracle: {}, worst relative error = {worst:.3e}", if pass { "pass" } else { "fail" }),
    ))
}

fn run_commutator(cfg: &RunConfig, w: &mut Writer) -> Result<(i32, String)> {
    let s = setup(cfg)?;
    let ops = match s.ops {
        Some(o) => o,
        None => assemble_operators(&s.grid, &s.spec, cfg.hypotheses.c1.unwrap_or(0.0))?,
    };
    let sigma = cfg.trace.sigma;
    let test_fn = |x: &[f64]| (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * sigma * sigma)).exp();
    let mut rows = Vec::new();
    let mut pass = true;
    for (name, which) in [("[H,A]", Commutator::HA), ("[B,A]", Commutator::BA)] {
        let r = commutator_consistency(&ops, test_fn, which)?;
        let ok = !r.touches_boundary && (r.residual_half < 1e-12 || (3.5..=4.5).contains(&r.ratio));
        pass &= ok;
        rows.push(json!({"commutator": name, "report": r, "second_order": ok}));
    }
    w.put(
        "commutator.json",
        &report::envelope(cfg, "commutator-test", Some(ops.c1), &json!({"checks": rows})),
    )?;
    let ratios: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{} ratio {:.3}",
                r["commutator"].as_str().unwrap_or(""),
                r["report"]["ratio"].as_f64().unwrap_or(f64::NAN)
            )
        })
        .collect();
    Ok((if pass { 0 } else { 1 }, format!("commutators second order: {pass}; {}", ratios.join(", "))))
}

fn run_export(cfg: &RunConfig, w: &mut Writer) -> Result<(i32, String)> {
    let s = setup(cfg)?;
    let ops = match s.ops {
        Some(o) => o,
        None => assemble_operators(&s.grid, &s.spec, cfg.hypotheses.c1.unwrap_or(0.0))?,
    };
    for name in ["laplacian", "H", "K", "B", "S"] {
        let text = ops.export_coo(name).expect("known operator");
        w.put(&format!("{name}.coo"), &text)?;
    }
    let ctx = NormContext::new(&ops, cfg.norms.delta)?;
    if ctx.strictly_negative() {
        w.put("weights.csv", &(report::header(cfg, "export") + &ctx.weights_csv()?))?;
    }
    Ok((0, format!("exported {} files for {} unknowns", w.files.len(), ops.unknowns())))
}

#[derive(Debug)]
pub struct Reproduction {
    pub compared: Vec<String>,
    pub mismatched: Vec<String>,
}

/// Reruns the command archived in `dir` and compares every output byte for byte.
pub fn reproduce(dir: &Path) -> Result<Outcome> {
    let text = std::fs::read_to_string(dir.join("manifest.json")).map_err(|e| LabError::Reproduction(format!("no manifest in {}: {e}", dir.display())))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| LabError::Reproduction(format!("bad manifest: {e}")))?;
    let cfg = RunConfig::load(&dir.join("config.toml"))?;
    if cfg.hash() != manifest.config_hash {
        return Err(LabError::Reproduction(format!(
            "archived config hashes to {}, manifest says {}",
            cfg.hash(),
            manifest.config_hash
        )));
    }
    for name in manifest.files.iter().filter(|n| n.ends_with(".csv")) {
        let body = std::fs::read_to_string(dir.join(name))?;
        if report::header_hash(&body) != Some(manifest.config_hash.as_str()) {
            return Err(LabError::Reproduction(format!("{name} carries a different config hash")));
        }
    }
    let scratch = std::env::temp_dir().join(format!("laplab-reproduce-{}-{}", std::process::id(), manifest.config_hash));
    let rerun = execute(&manifest.command, &cfg, &scratch);
    let compare = || -> Result<Reproduction> {
        rerun?;
        let mut rep = Reproduction {
            compared: Vec::new(),
            mismatched: Vec::new(),
        };
        for name in &manifest.files {
            let a = std::fs::read(dir.join(name))?;
            let b = std::fs::read(scratch.join(name)).unwrap_or_default();
            rep.compared.push(name.clone());
            if a != b {
                rep.mismatched.push(name.clone());
            }
        }
        Ok(rep)
    };
    let result = compare();
    let _ = std::fs::remove_dir_all(&scratch);
    let rep = result?;
    if !rep.mismatched.is_empty() {
        return Err(LabError::Reproduction(format!("outputs differ: {}", rep.mismatched.join(", "))));
    }
    Ok(Outcome {
        exit_code: 0,
        summary: format!("reproduced {} ({} files identical)", manifest.command.name(), rep.compared.len()),
        files: Vec::new(),
    })
}
