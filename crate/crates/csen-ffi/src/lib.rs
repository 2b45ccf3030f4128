//! C ABI over the core toolkit: opaque handles, integer status codes, and
//! a thread-local error message.
//!
//! The authoritative header lives at `include/csen.h` and is maintained by
//! hand alongside this file; `tests/abi.rs` exercises every exported
//! function. Conventions:
//!
//! * every fallible function returns `csen_status` and writes results
//!   through out-pointers;
//! * handles are created and destroyed by this library only; passing a
//!   handle to the wrong `*_free` is undefined behavior, everything else
//!   (null pointers, bad sizes) is reported as a status;
//! * `csen_last_error_message` describes the most recent failure on the
//!   calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use csen::error::Error;
use csen::metrics;
use csen::model::{csen1_init, csen2_init, threshold_support, CsenModel};
use csen::numerics::{build_proxy_operator, gaussian_matrix, Matrix, ProxyKind, ProxyOperator};
use csen::solvers;

/// Status codes mirrored in include/csen.h.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsenStatus {
    Ok = 0,
    InvalidArgument = 1,
    NumericFailure = 2,
    IoError = 3,
    FormatError = 4,
    RankDeficient = 5,
    GuardExceeded = 6,
    Diverged = 7,
    UndefinedSnr = 8,
    NullPointer = 9,
    Panic = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', "?")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> CsenStatus {
    match err {
        Error::InvalidArgument(_) | Error::Config(_) | Error::DegenerateAtom { .. } => {
            CsenStatus::InvalidArgument
        }
        Error::NumericFailure(_) => CsenStatus::NumericFailure,
        Error::Io { .. } => CsenStatus::IoError,
        Error::Format { .. } => CsenStatus::FormatError,
        Error::RankDeficient { .. } => CsenStatus::RankDeficient,
        Error::CombinatorialGuard { .. } => CsenStatus::GuardExceeded,
        Error::Diverged { .. } => CsenStatus::Diverged,
        Error::UndefinedSnr => CsenStatus::UndefinedSnr,
    }
}

fn fail(err: Error) -> CsenStatus {
    let code = status_of(&err);
    set_error(&err.to_string());
    code
}

fn guard(f: impl FnOnce() -> CsenStatus) -> CsenStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            CsenStatus::Panic
        }
    }
}

unsafe fn cstr_path(ptr: *const c_char) -> Result<PathBuf, CsenStatus> {
    if ptr.is_null() {
        set_error("null path");
        return Err(CsenStatus::NullPointer);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(CsenStatus::InvalidArgument)
        }
    }
}

/// Opaque matrix handle.
pub struct CsenMatrix(Matrix);
/// Opaque proxy-operator handle.
pub struct CsenProxy(ProxyOperator);
/// Opaque model handle.
pub struct CsenModelHandle(CsenModel);

/// Solver outcome written back to the caller.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CsenSolverInfo {
    pub iterations: u64,
    pub converged: c_int,
    pub objective: f64,
}

fn write_info(info: *mut CsenSolverInfo, r: &solvers::SolverResult) {
    if !info.is_null() {
        unsafe {
            *info = CsenSolverInfo {
                iterations: r.iterations as u64,
                converged: r.converged as c_int,
                objective: r.objective,
            };
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn csen_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the last failure on this thread; valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn csen_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

// ---------------------------------------------------------------- matrix

/// Create a rows×cols matrix from row-major values.
///
/// # Safety
/// `data` must point to rows·cols doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn csen_matrix_create(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut CsenMatrix,
) -> CsenStatus {
    guard(|| {
        if data.is_null() || out.is_null() {
            set_error("null pointer");
            return CsenStatus::NullPointer;
        }
        let slice = std::slice::from_raw_parts(data, rows * cols);
        match Matrix::new(rows, cols, slice.to_vec()) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(CsenMatrix(m)));
                CsenStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Draw a Gaussian measurement matrix with entries N(0, 1/rows).
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn csen_matrix_gaussian(
    rows: usize,
    cols: usize,
    seed: u64,
    out: *mut *mut CsenMatrix,
) -> CsenStatus {
    guard(|| {
        if out.is_null() {
            set_error("null pointer");
            return CsenStatus::NullPointer;
        }
        match gaussian_matrix(rows, cols, seed) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(CsenMatrix(m)));
                CsenStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Load a CSM1 file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn csen_matrix_load_csm1(
    path: *const c_char,
    out: *mut *mut CsenMatrix,
) -> CsenStatus {
    guard(|| {
        if out.is_null() {
            set_error("null pointer");
            return CsenStatus::NullPointer;
        }
        let path = match cstr_path(path) {
            Ok(p) => p,
            Err(code) => return code,
        };
        match Matrix::read_csm1(&path) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(CsenMatrix(m)));
                CsenStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Write a CSM1 file.
///
/// # Safety
/// `m` must be a live matrix handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn csen_matrix_save_csm1(
    m: *const CsenMatrix,
    path: *const c_char,
) -> CsenStatus {
    guard(|| {
        let Some(m) = m.as_ref() else {
            set_error("null matrix");
            return CsenStatus::NullPointer;
        };
        let path = match cstr_path(path) {
            Ok(p) => p,
            Err(code) => return code,
        };
        match m.0.write_csm1(&path) {
            Ok(()) => CsenStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `m` must be a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn csen_matrix_rows(m: *const CsenMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.rows())
}

/// # Safety
/// `m` must be a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn csen_matrix_cols(m: *const CsenMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.cols())
}

/// Borrow the row-major data; valid while the handle lives.
///
/// # Safety
/// `m` must be a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn csen_matrix_data(m: *const CsenMatrix) -> *const f64 {
    m.as_ref().map_or(std::ptr::null(), |m| m.0.data().as_ptr())
}

/// # Safety
/// `m` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn csen_matrix_free(m: *mut CsenMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

// ----------------------------------------------------------------- proxy

/// Build a proxy operator over dictionary `d`. `kind` = 0 for maximum
/// correlation (B = Dᵀ), 1 for LMMSE with regularizer `lambda`.
///
/// # Safety
/// `d` must be a live matrix handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn csen_proxy_build(
    d: *const CsenMatrix,
    kind: c_int,
    lambda: f64,
    grid_h: usize,
    grid_w: usize,
    out: *mut *mut CsenProxy,
) -> CsenStatus {
    guard(|| {
        let Some(d) = d.as_ref() else {
            set_error("null dictionary");
            return CsenStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null out pointer");
            return CsenStatus::NullPointer;
        }
        let kind = match kind {
            0 => ProxyKind::MaxCorrelation,
            1 => ProxyKind::Lmmse { lambda },
            other => {
                set_error(&format!("unknown proxy kind {other}"));
                return CsenStatus::InvalidArgument;
            }
        };
        match build_proxy_operator(&d.0, kind, (grid_h, grid_w)) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(CsenProxy(p)));
                CsenStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// x̃ = B·y written to `out` (length n = grid_h·grid_w, row-major).
///
/// # Safety
/// `y` must point to `y_len` doubles; `out` to n doubles.
#[no_mangle]
pub unsafe extern "C" fn csen_proxy_apply(
    p: *const CsenProxy,
    y: *const f64,
    y_len: usize,
    out: *mut f64,
) -> CsenStatus {
    guard(|| {
        let Some(p) = p.as_ref() else {
            set_error("null proxy");
            return CsenStatus::NullPointer;
        };
        if y.is_null() || out.is_null() {
            set_error("null pointer");
            return CsenStatus::NullPointer;
        }
        let y = std::slice::from_raw_parts(y, y_len);
        match p.0.apply_vec(y) {
            Ok(x) => {
                std::ptr::copy_nonoverlapping(x.as_ptr(), out, x.len());
                CsenStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `p` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn csen_proxy_free(p: *mut CsenProxy) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

// --------------------------------------------------------------- solvers

unsafe fn solver_inputs<'a>(
    d: *const CsenMatrix,
    y: *const f64,
    y_len: usize,
    x_out: *mut f64,
) -> Result<(&'a CsenMatrix, &'a [f64]), CsenStatus> {
    let Some(dm) = d.as_ref() else {
        set_error("null dictionary");
        return Err(CsenStatus::NullPointer);
    };
    if y.is_null() || x_out.is_null() {
        set_error("null pointer");
        return Err(CsenStatus::NullPointer);
    }
    Ok((dm, std::slice::from_raw_parts(y, y_len)))
}

/// FISTA for ‖Dx−y‖² + λ‖x‖₁. Writes n coefficients to `x_out`.
///
/// # Safety
/// `y` must point to `y_len` doubles and `x_out` to `d->cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn csen_solve_lasso(
    d: *const CsenMatrix,
    y: *const f64,
    y_len: usize,
    lambda: f64,
    max_iters: usize,
    rel_tol: f64,
    x_out: *mut f64,
    info: *mut CsenSolverInfo,
) -> CsenStatus {
    guard(|| {
        let (dm, ys) = match solver_inputs(d, y, y_len, x_out) {
            Ok(v) => v,
            Err(code) => return code,
        };
        match solvers::fista_lasso(&dm.0, ys, lambda, max_iters, rel_tol) {
            Ok(r) => {
                std::ptr::copy_nonoverlapping(r.x_hat.as_ptr(), x_out, r.x_hat.len());
                write_info(info, &r);
                CsenStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Weighted variant: minimizes ‖Dx−y‖² + λ‖w⊙x‖₁.
///
/// # Safety
/// `weights` must point to `d->cols` positive doubles; see
/// [`csen_solve_lasso`] for the rest.
#[no_mangle]
pub unsafe extern "C" fn csen_solve_weighted_lasso(
    d: *const CsenMatrix,
    y: *const f64,
    y_len: usize,
    lambda: f64,
    weights: *const f64,
    max_iters: usize,
    rel_tol: f64,
    x_out: *mut f64,
    info: *mut CsenSolverInfo,
) -> CsenStatus {
    guard(|| {
        let (dm, ys) = match solver_inputs(d, y, y_len, x_out) {
            Ok(v) => v,
            Err(code) => return code,
        };
        if weights.is_null() {
            set_error("null weights");
            return CsenStatus::NullPointer;
        }
        let w = std::slice::from_raw_parts(weights, dm.0.cols()).to_vec();
        let wv = match solvers::WeightVector::explicit(w) {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        match solvers::weighted_fista_lasso(&dm.0, ys, lambda, &wv, max_iters, rel_tol) {
            Ok(r) => {
                std::ptr::copy_nonoverlapping(r.x_hat.as_ptr(), x_out, r.x_hat.len());
                write_info(info, &r);
                CsenStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Orthogonal matching pursuit with at most `k_max` atoms.
///
/// # Safety
/// See [`csen_solve_lasso`].
#[no_mangle]
pub unsafe extern "C" fn csen_solve_omp(
    d: *const CsenMatrix,
    y: *const f64,
    y_len: usize,
    k_max: usize,
    res_tol: f64,
    x_out: *mut f64,
    info: *mut CsenSolverInfo,
) -> CsenStatus {
    guard(|| {
        let (dm, ys) = match solver_inputs(d, y, y_len, x_out) {
            Ok(v) => v,
            Err(code) => return code,
        };
        match solvers::omp(&dm.0, ys, k_max, res_tol) {
            Ok(r) => {
                std::ptr::copy_nonoverlapping(r.x_hat.as_ptr(), x_out, r.x_hat.len());
                write_info(info, &r);
                CsenStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Closed-form ridge code x̂ = (DᵀD+λI)⁻¹Dᵀy.
///
/// # Safety
/// See [`csen_solve_lasso`].
#[no_mangle]
pub unsafe extern "C" fn csen_solve_crc(
    d: *const CsenMatrix,
    y: *const f64,
    y_len: usize,
    lambda: f64,
    x_out: *mut f64,
    info: *mut CsenSolverInfo,
) -> CsenStatus {
    guard(|| {
        let (dm, ys) = match solver_inputs(d, y, y_len, x_out) {
            Ok(v) => v,
            Err(code) => return code,
        };
        match solvers::crc_solution(&dm.0, ys, lambda) {
            Ok(r) => {
                std::ptr::copy_nonoverlapping(r.x_hat.as_ptr(), x_out, r.x_hat.len());
                write_info(info, &r);
                CsenStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// wᵢ = 1/(pᵢ+ε), inputs clamped into [0,1].
///
/// # Safety
/// `p` and `w_out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csen_weights_from_probability(
    p: *const f64,
    len: usize,
    epsilon: f64,
    w_out: *mut f64,
) -> CsenStatus {
    guard(|| {
        if p.is_null() || w_out.is_null() {
            set_error("null pointer");
            return CsenStatus::NullPointer;
        }
        let ps = std::slice::from_raw_parts(p, len);
        match solvers::weights_from_probability(ps, epsilon) {
            Ok(w) => {
                std::ptr::copy_nonoverlapping(w.w().as_ptr(), w_out, len);
                CsenStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

// --------------------------------------------------------------- metrics

/// Writes [precision, recall, f1, ce] to `out4`.
///
/// # Safety
/// Index arrays must be sorted, duplicate-free and below `n`; `out4` must
/// point to four doubles.
#[no_mangle]
pub unsafe extern "C" fn csen_support_metrics(
    predicted: *const usize,
    predicted_len: usize,
    truth: *const usize,
    truth_len: usize,
    n: usize,
    out4: *mut f64,
) -> CsenStatus {
    guard(|| {
        if (predicted.is_null() && predicted_len > 0)
            || (truth.is_null() && truth_len > 0)
            || out4.is_null()
        {
            set_error("null pointer");
            return CsenStatus::NullPointer;
        }
        let p = if predicted_len == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(predicted, predicted_len)
        };
        let t = if truth_len == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(truth, truth_len)
        };
        if p.iter().chain(t).any(|&i| i >= n) {
            set_error("support index out of range");
            return CsenStatus::InvalidArgument;
        }
        let m = metrics::support_metrics(p, t, n);
        let out = std::slice::from_raw_parts_mut(out4, 4);
        out[0] = m.precision;
        out[1] = m.recall;
        out[2] = m.f1;
        out[3] = m.ce;
        CsenStatus::Ok
    })
}

/// `*out` = 1 when ‖x−x̂‖/‖x‖ ≤ tol.
///
/// # Safety
/// `x_hat` and `x` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csen_recovery_success(
    x_hat: *const f64,
    x: *const f64,
    len: usize,
    tol: f64,
    out: *mut c_int,
) -> CsenStatus {
    guard(|| {
        if x_hat.is_null() || x.is_null() || out.is_null() {
            set_error("null pointer");
            return CsenStatus::NullPointer;
        }
        let xh = std::slice::from_raw_parts(x_hat, len);
        let xs = std::slice::from_raw_parts(x, len);
        match metrics::recovery_success(xh, xs, tol) {
            Ok(ok) => {
                *out = ok as c_int;
                CsenStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// 10·log₁₀(‖x−x̂‖²/‖x‖²), floored at −300 dB.
///
/// # Safety
/// `x_hat` and `x` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csen_nmse_db(
    x_hat: *const f64,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> CsenStatus {
    guard(|| {
        if x_hat.is_null() || x.is_null() || out.is_null() {
            set_error("null pointer");
            return CsenStatus::NullPointer;
        }
        let xh = std::slice::from_raw_parts(x_hat, len);
        let xs = std::slice::from_raw_parts(x, len);
        match metrics::nmse_db(xh, xs) {
            Ok(v) => {
                *out = v;
                CsenStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

// ----------------------------------------------------------------- model

/// Fresh network: `arch` 1 = csen1, 2 = csen2.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn csen_model_init(
    arch: c_int,
    grid_h: usize,
    grid_w: usize,
    seed: u64,
    out: *mut *mut CsenModelHandle,
) -> CsenStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out pointer");
            return CsenStatus::NullPointer;
        }
        let r = match arch {
            1 => csen1_init((grid_h, grid_w), seed),
            2 => csen2_init((grid_h, grid_w), seed),
            other => {
                set_error(&format!("unknown architecture {other}"));
                return CsenStatus::InvalidArgument;
            }
        };
        match r {
            Ok(m) => {
                *out = Box::into_raw(Box::new(CsenModelHandle(m)));
                CsenStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Load a CSEN1CKPT checkpoint.
///
/// # Safety
/// `path` must be NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn csen_model_load(
    path: *const c_char,
    out: *mut *mut CsenModelHandle,
) -> CsenStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out pointer");
            return CsenStatus::NullPointer;
        }
        let path = match cstr_path(path) {
            Ok(p) => p,
            Err(code) => return code,
        };
        match CsenModel::load_checkpoint(&path) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(CsenModelHandle(m)));
                CsenStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Save a CSEN1CKPT checkpoint.
///
/// # Safety
/// `m` must be a live model handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn csen_model_save(
    m: *const CsenModelHandle,
    path: *const c_char,
) -> CsenStatus {
    guard(|| {
        let Some(m) = m.as_ref() else {
            set_error("null model");
            return CsenStatus::NullPointer;
        };
        let path = match cstr_path(path) {
            Ok(p) => p,
            Err(code) => return code,
        };
        match m.0.save_checkpoint(&path) {
            Ok(()) => CsenStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `m` must be a live model handle; `h`/`w` valid.
#[no_mangle]
pub unsafe extern "C" fn csen_model_grid(
    m: *const CsenModelHandle,
    h: *mut usize,
    w: *mut usize,
) -> CsenStatus {
    guard(|| {
        let Some(m) = m.as_ref() else {
            set_error("null model");
            return CsenStatus::NullPointer;
        };
        if h.is_null() || w.is_null() {
            set_error("null pointer");
            return CsenStatus::NullPointer;
        }
        let (gh, gw) = m.0.grid();
        *h = gh;
        *w = gw;
        CsenStatus::Ok
    })
}

/// # Safety
/// `m` must be a live model handle.
#[no_mangle]
pub unsafe extern "C" fn csen_model_parameter_count(m: *const CsenModelHandle) -> usize {
    m.as_ref().map_or(0, |m| m.0.parameter_count())
}

/// Probability map for one proxy plane (row-major grid_h·grid_w values),
/// written to `p_out` of the same length.
///
/// # Safety
/// `proxy_plane` and `p_out` must point to `plane_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csen_model_forward(
    m: *const CsenModelHandle,
    proxy_plane: *const f64,
    plane_len: usize,
    p_out: *mut f64,
) -> CsenStatus {
    guard(|| {
        let Some(m) = m.as_ref() else {
            set_error("null model");
            return CsenStatus::NullPointer;
        };
        if proxy_plane.is_null() || p_out.is_null() {
            set_error("null pointer");
            return CsenStatus::NullPointer;
        }
        let (h, w) = m.0.grid();
        if plane_len != h * w {
            set_error(&format!(
                "plane has {plane_len} values, model grid is {h}x{w}"
            ));
            return CsenStatus::InvalidArgument;
        }
        let plane = std::slice::from_raw_parts(proxy_plane, plane_len);
        let mat = match Matrix::new(h, w, plane.to_vec()) {
            Ok(m) => m,
            Err(e) => return fail(e),
        };
        match m.0.forward(&mat) {
            Ok(p) => {
                std::ptr::copy_nonoverlapping(p.data().as_ptr(), p_out, plane_len);
                CsenStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Support Λ̂ = {i : pᵢ > τ}. Writes at most `cap` indices and the total
/// count; when the count exceeds `cap` only the first `cap` are stored.
///
/// # Safety
/// `p` must point to `len` doubles; `indices_out` to `cap` usizes;
/// `count_out` valid.
#[no_mangle]
pub unsafe extern "C" fn csen_threshold_support(
    p: *const f64,
    len: usize,
    tau: f64,
    indices_out: *mut usize,
    cap: usize,
    count_out: *mut usize,
) -> CsenStatus {
    guard(|| {
        if p.is_null() || count_out.is_null() || (indices_out.is_null() && cap > 0) {
            set_error("null pointer");
            return CsenStatus::NullPointer;
        }
        let ps = std::slice::from_raw_parts(p, len);
        let mat = match Matrix::new(1, len, ps.to_vec()) {
            Ok(m) => m,
            Err(e) => return fail(e),
        };
        let support = threshold_support(&mat, tau);
        *count_out = support.len();
        let take = support.len().min(cap);
        if take > 0 {
            std::ptr::copy_nonoverlapping(support.as_ptr(), indices_out, take);
        }
        CsenStatus::Ok
    })
}

/// # Safety
/// `m` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn csen_model_free(m: *mut CsenModelHandle) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}
