//! CSV, JSON and gnuplot emission. All numbers are printed with 17
//! significant digits so that reruns compare byte for byte.

use crate::config::RunConfig;
use crate::resolvent::sweep::KatoReport;
use crate::resolvent::{EpsWindowReport, LapSweepResult, RegularizedTrace};
use serde::Serialize;
use std::fmt::Write as _;

pub const OUTSIDE_SCOPE: &str = "outside theorem scope";

pub fn num(x: f64) -> String {
    format!("{x:.17e}")
}

pub fn header(cfg: &RunConfig, command: &str) -> String {
    format!("# config_hash={} command={} potential={}\n", cfg.hash(), command, cfg.potential.id)
}

/// Parses the config hash out of a CSV header line.
pub fn header_hash(text: &str) -> Option<&str> {
    let first = text.lines().next()?;
    first.strip_prefix("# config_hash=")?.split_whitespace().next()
}

#[derive(Serialize)]
pub struct Tolerances {
    pub eig_tol: f64,
    pub solve_tol: f64,
    pub identity_tol: f64,
    pub flat_threshold: f64,
    pub blowup_threshold: f64,
}

#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config_hash: String,
    pub grid: &'a crate::config::GridConfig,
    pub potential: &'a str,
    pub c1: Option<f64>,
    pub delta: f64,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub result: &'a T,
}

pub fn envelope<T: Serialize>(cfg: &RunConfig, command: &str, c1: Option<f64>, result: &T) -> String {
    let env = Envelope {
        tool: "laplab",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_hash: cfg.hash(),
        grid: &cfg.grid,
        potential: &cfg.potential.id,
        c1,
        delta: cfg.norms.delta,
        seed: cfg.run.seed,
        tolerances: Tolerances {
            eig_tol: cfg.hypotheses.eig_tol,
            solve_tol: crate::resolvent::solve::SOLVE_TOL,
            identity_tol: 1e-10,
            flat_threshold: crate::resolvent::FLAT_THRESHOLD,
            blowup_threshold: crate::resolvent::BLOWUP_THRESHOLD,
        },
        result,
    };
    serde_json::to_string_pretty(&env).expect("envelope serializes") + "\n"
}

pub fn lap_csv(cfg: &RunConfig, res: &LapSweepResult) -> String {
    let mut s = header(cfg, "lap");
    s.push_str("kind,lambda,mu,epsilon,vector,branch,re_F,im_F,normalized,exponent,tag\n");
    for c in &res.cells {
        let tag = if c.in_scope { "" } else { OUTSIDE_SCOPE };
        for (b, v) in [("+", c.plus), ("-", c.minus)] {
            let norm = if b == "+" { num(c.normalized) } else { String::new() };
            writeln!(
                s,
                "cell,{},{},{},{},{},{},{},{},,{}",
                num(c.lambda),
                num(c.mu),
                num(0.0),
                c.vector,
                b,
                num(v.re),
                num(v.im),
                norm,
                tag
            )
            .unwrap();
        }
    }
    for e in &res.exponents {
        let tag = if !e.in_scope {
            OUTSIDE_SCOPE
        } else if e.flat {
            "flat"
        } else {
            "growth"
        };
        writeln!(s, "exponent,{},,,,,,,,{},{}", num(e.lambda), num(e.exponent), tag).unwrap();
    }
    writeln!(s, "summary,,,,,,,,{},,sup_normalized", num(res.sup_normalized)).unwrap();
    s
}

pub fn lap_plot_script(res: &LapSweepResult, csv: &str) -> String {
    let mut s = String::new();
    writeln!(s, "# gnuplot script: |F| against mu per energy (first test vector), then growth exponents").unwrap();
    writeln!(s, "set datafile separator ','").unwrap();
    writeln!(s, "set terminal pngcairo size 1000,700").unwrap();
    writeln!(s, "set output 'lap_abs.png'").unwrap();
    writeln!(s, "set logscale xy").unwrap();
    writeln!(s, "set xlabel 'mu'").unwrap();
    writeln!(s, "set ylabel '|F(lambda, mu)|'").unwrap();
    writeln!(s, "set key outside right").unwrap();
    let lines: Vec<String> = res
        .lambda_grid
        .iter()
        .map(|l| {
            format!(
                "'{csv}' using ((strcol(1) eq 'cell' && strcol(6) eq '+' && $5 == 0 && abs($2 - ({l:.17e})) < 1e-12) ? $3 : 1/0):(sqrt($7**2 + $8**2)) with linespoints title 'lambda={l:.3}'"
            )
        })
        .collect();
    writeln!(s, "plot {}", lines.join(", \\\n     ")).unwrap();
    writeln!(s, "set output 'lap_exponents.png'").unwrap();
    writeln!(s, "unset logscale").unwrap();
    writeln!(s, "set xlabel 'lambda'").unwrap();
    writeln!(s, "set ylabel 'growth exponent'").unwrap();
    writeln!(
        s,
        "set arrow from graph 0, first {0} to graph 1, first {0} nohead dt 2",
        crate::resolvent::FLAT_THRESHOLD
    )
    .unwrap();
    writeln!(
        s,
        "plot '{csv}' using (strcol(1) eq 'exponent' ? $2 : 1/0):10 with linespoints title 'max over test vectors'"
    )
    .unwrap();
    s
}

pub fn trace_csv(cfg: &RunConfig, tr: &RegularizedTrace, win: &EpsWindowReport) -> String {
    let mut s = header(cfg, "proof-trace");
    s.push_str("kind,epsilon,branch,re_F,im_F,energy_bound_lhs,energy_bound_rhs,resolvent_bound_c,resolvent_bound_limit,dF_fd_re,dF_fd_im,dF_exact_re,dF_exact_im,diff_rhs,diff_residual,identity_check,window_diff\n");
    for r in &tr.rows {
        for (b, row) in [("+", &r.plus), ("-", &r.minus)] {
            let (fdr, fdi) = row.derivative_fd.map_or((String::new(), String::new()), |d| (num(d.re), num(d.im)));
            writeln!(
                s,
                "trace,{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},",
                num(r.eps),
                b,
                num(row.f.re),
                num(row.f.im),
                num(row.energy_bound_lhs),
                num(row.energy_bound_rhs),
                num(r.resolvent_bound_c),
                num(r.resolvent_bound_limit),
                fdr,
                fdi,
                num(row.derivative_exact.re),
                num(row.derivative_exact.im),
                num(row.diff_rhs),
                row.diff_residual.map_or(String::new(), num),
                num(r.identity_check_residual)
            )
            .unwrap();
        }
    }
    for (b, v) in [("+", tr.limit_plus), ("-", tr.limit_minus)] {
        writeln!(s, "limit,{},{},{},{},,,,,,,,,,,,", num(0.0), b, num(v.re), num(v.im)).unwrap();
    }
    writeln!(s, "direct,{},+,{},{},,,,,,,,,,,,", num(0.0), num(tr.direct_plus.re), num(tr.direct_plus.im)).unwrap();
    writeln!(s, "window,{},+,,,,,,,,,,,,,,{}", num(0.0), num(win.zero_diff)).unwrap();
    for (e, d) in win.eps.iter().zip(&win.diffs) {
        writeln!(s, "window,{},+,,,,,,,,,,,,,,{}", num(*e), num(*d)).unwrap();
    }
    s
}

pub fn kato_csv(cfg: &RunConfig, rep: &KatoReport) -> String {
    let mut s = header(cfg, "smooth");
    s.push_str("kind,lambda,mu,sup,exponent,tag\n");
    for c in &rep.cells {
        writeln!(s, "cell,{},{},{},,", num(c.lambda), num(c.mu), num(c.sup)).unwrap();
    }
    for e in &rep.exponents {
        writeln!(s, "exponent,{},,,{},{}", num(e.lambda), num(e.exponent), if e.flat { "flat" } else { "growth" }).unwrap();
    }
    s
}
