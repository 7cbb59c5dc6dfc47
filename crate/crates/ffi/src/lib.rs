//! C ABI over `laplab`. Objects are opaque handles; every entry point
//! returns a [`LaplabStatus`] and records a message retrievable with
//! [`laplab_last_error`] on failure. Panics never cross the boundary.

use laplab::config::RunConfig;
use laplab::hypotheses::{check_hypotheses, HypothesisReport};
use laplab::lattice::{assemble_operators, Grid, OperatorSet};
use laplab::linalg::EigOptions;
use laplab::potential::parse_potential;
use laplab::resolvent::{resolvent_element, shifted_solve, Branch};
use laplab::LabError;
use num_complex::Complex64;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaplabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BadPotential = 3,
    GateRefused = 4,
    NumericalFailure = 5,
    Panic = 6,
}

/// Opaque handle: a grid, a potential and the assembled operators.
pub struct LaplabLab {
    ops: OperatorSet,
    report: HypothesisReport,
}

/// Scalar summary of the hypothesis check. Fields that could not be computed are NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct LaplabCheckReport {
    /// 1 when all conditions hold and S is positive.
    pub compliant: i32,
    pub c_tilde: f64,
    pub d_tilde: f64,
    pub c1: f64,
    pub c2: f64,
    pub lambda_min_s: f64,
    pub lambda_min_h: f64,
    pub unknowns: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &LabError) -> LaplabStatus {
    match e {
        LabError::InvalidInput(_) | LabError::Config(_) => LaplabStatus::InvalidArgument,
        LabError::BadPotential(_) => LaplabStatus::BadPotential,
        LabError::GateRefused(_) | LabError::BelowFloor { .. } => LaplabStatus::GateRefused,
        _ => LaplabStatus::NumericalFailure,
    }
}

fn guard<F: FnOnce() -> Result<(), (LaplabStatus, String)>>(f: F) -> LaplabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LaplabStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(&msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            LaplabStatus::Panic
        }
    }
}

fn lab_err(e: LabError) -> (LaplabStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (LaplabStatus, String) {
    (LaplabStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (LaplabStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (LaplabStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (LaplabStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn branch_of(b: i32) -> Result<Branch, (LaplabStatus, String)> {
    match b {
        1 => Ok(Branch::Plus),
        -1 => Ok(Branch::Minus),
        _ => Err((LaplabStatus::InvalidArgument, format!("branch must be +1 or -1, got {b}"))),
    }
}

fn build(dims: usize, half_extent: f64, points: usize, id: &str, c1: Option<f64>) -> Result<LaplabLab, LabError> {
    let grid = Grid::new(dims, half_extent, points)?;
    let spec = parse_potential(id, &grid)?;
    let (report, ops) = check_hypotheses(&spec, &grid, c1, &EigOptions::default())?;
    let ops = match ops {
        Some(o) => o,
        None => assemble_operators(&grid, &spec, c1.unwrap_or(0.0))?,
    };
    Ok(LaplabLab { ops, report })
}

unsafe fn emit(out: *mut *mut LaplabLab, lab: LaplabLab) {
    *out = Box::into_raw(Box::new(lab));
}

/// Creates a handle for `potential_id` on a `dims`-dimensional box
/// [-half_extent, half_extent]^dims with `points` (odd) nodes per axis.
/// The hypothesis check runs here; when it cannot select c1 the operators
/// are assembled with c1 = 0 so that resolvents remain available.
///
/// # Safety
/// `potential_id` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn laplab_new(dims: usize, half_extent: f64, points: usize, potential_id: *const c_char, out: *mut *mut LaplabLab) -> LaplabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let id = c_str(potential_id, "potential_id")?;
        emit(out, build(dims, half_extent, points, id, None).map_err(lab_err)?);
        Ok(())
    })
}

/// Creates a handle from the text of a run configuration (TOML).
///
/// # Safety
/// `config_toml` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn laplab_new_from_config(config_toml: *const c_char, out: *mut *mut LaplabLab) -> LaplabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = RunConfig::parse(c_str(config_toml, "config_toml")?).map_err(lab_err)?;
        let g = &cfg.grid;
        emit(
            out,
            build(g.dims, g.half_extent, g.points, &cfg.potential.id, cfg.hypotheses.c1).map_err(lab_err)?,
        );
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `lab` must come from `laplab_new*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn laplab_free(lab: *mut LaplabLab) {
    if !lab.is_null() {
        drop(Box::from_raw(lab));
    }
}

/// Number of grid unknowns; 0 for a null handle.
///
/// # Safety
/// `lab` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn laplab_unknowns(lab: *const LaplabLab) -> usize {
    lab.as_ref().map_or(0, |l| l.ops.unknowns())
}

/// # Safety
/// `lab` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn laplab_check(lab: *const LaplabLab, out: *mut LaplabCheckReport) -> LaplabStatus {
    guard(|| {
        let lab = lab.as_ref().ok_or_else(|| null("lab"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = &lab.report;
        *out = LaplabCheckReport {
            compliant: r.pass() as i32,
            c_tilde: r.c_tilde_bound,
            d_tilde: r.d_tilde_bound,
            c1: r.c1.unwrap_or(f64::NAN),
            c2: r.c2.unwrap_or(f64::NAN),
            lambda_min_s: r.lambda_min_s.unwrap_or(f64::NAN),
            lambda_min_h: r.lambda_min_h.unwrap_or(f64::NAN),
            unknowns: lab.ops.unknowns(),
        };
        Ok(())
    })
}

/// <f, (H - lambda - i branch mu)^{-1} f> for a real vector f of length `len`.
/// `branch` is +1 or -1.
///
/// # Safety
/// `f` must point to `len` doubles; `out_re` and `out_im` must be valid.
#[no_mangle]
pub unsafe extern "C" fn laplab_resolvent_element(
    lab: *const LaplabLab,
    lambda: f64,
    mu: f64,
    branch: i32,
    f: *const f64,
    len: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> LaplabStatus {
    guard(|| {
        let lab = lab.as_ref().ok_or_else(|| null("lab"))?;
        if out_re.is_null() || out_im.is_null() {
            return Err(null("output"));
        }
        let f = slice(f, len, "f")?;
        if len != lab.ops.unknowns() {
            return Err((LaplabStatus::InvalidArgument, format!("f has {len} entries, grid has {}", lab.ops.unknowns())));
        }
        let z = resolvent_element(&lab.ops, lambda, mu, branch_of(branch)?, f).map_err(lab_err)?;
        *out_re = z.re;
        *out_im = z.im;
        Ok(())
    })
}

/// Solves (H - lambda - i branch (mu + eps B)) u = f. `f_im` may be null
/// for a real right-hand side.
///
/// # Safety
/// Input arrays must hold `len` doubles and output arrays room for `len`.
#[no_mangle]
pub unsafe extern "C" fn laplab_shifted_solve(
    lab: *const LaplabLab,
    lambda: f64,
    mu: f64,
    eps: f64,
    branch: i32,
    f_re: *const f64,
    f_im: *const f64,
    len: usize,
    u_re: *mut f64,
    u_im: *mut f64,
) -> LaplabStatus {
    guard(|| {
        let lab = lab.as_ref().ok_or_else(|| null("lab"))?;
        if u_re.is_null() || u_im.is_null() {
            return Err(null("output"));
        }
        if len != lab.ops.unknowns() {
            return Err((
                LaplabStatus::InvalidArgument,
                format!("vectors have {len} entries, grid has {}", lab.ops.unknowns()),
            ));
        }
        let re = slice(f_re, len, "f_re")?;
        let f: Vec<Complex64> = if f_im.is_null() {
            re.iter().map(|&r| Complex64::new(r, 0.0)).collect()
        } else {
            let im = slice(f_im, len, "f_im")?;
            re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect()
        };
        let u = shifted_solve(&lab.ops, lambda, mu, eps, branch_of(branch)?, &f).map_err(lab_err)?;
        let (ur, ui) = (std::slice::from_raw_parts_mut(u_re, len), std::slice::from_raw_parts_mut(u_im, len));
        for (k, z) in u.iter().enumerate() {
            ur[k] = z.re;
            ui[k] = z.im;
        }
        Ok(())
    })
}

/// Full hypothesis report as JSON. Release with `laplab_string_free`.
/// Returns null on failure.
///
/// # Safety
/// `lab` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn laplab_report_json(lab: *const LaplabLab) -> *mut c_char {
    let mut out = ptr::null_mut();
    let status = guard(|| {
        let lab = lab.as_ref().ok_or_else(|| null("lab"))?;
        let text = serde_json::to_string_pretty(&lab.report).map_err(|e| (LaplabStatus::NumericalFailure, e.to_string()))?;
        out = CString::new(text).map_err(|e| (LaplabStatus::NumericalFailure, e.to_string()))?.into_raw();
        Ok(())
    });
    if status == LaplabStatus::Ok {
        out
    } else {
        ptr::null_mut()
    }
}

/// # Safety
/// `s` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn laplab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn laplab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn laplab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
