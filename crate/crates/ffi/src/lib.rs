//! C interface to `wfl-core`.
//!
//! Objects are opaque handles created by `wfl_*_new`/`wfl_*_sample`-style
//! constructors and released with the matching `wfl_*_free`. Fallible calls
//! return a [`WflStatus`] and write results through out-pointers; on failure
//! the message is available from [`wfl_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use wfl_core::fourier::{dirichlet_eval, partial_sum, Composed, KernelOrder, QuadratureSpec};
use wfl_core::testfn::TestFunction;
use wfl_core::verify::{self, CheckReport};
use wfl_core::zeroone::{self, GridBivariate};
use wfl_core::{DyadicHomeomorphism, Error, RandomSource};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WflStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Domain = 3,
    Construction = 4,
    Config = 5,
    Io = 6,
    Json = 7,
    Panic = 8,
}

/// Sampled homeomorphism on a dyadic grid.
pub struct WflHomeo(DyadicHomeomorphism);

/// Test function `f`.
pub struct WflFunction(TestFunction);

/// Bivariate grid function for the averaging map.
pub struct WflGrid(GridBivariate);

/// Summary of a statistical check.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WflCheckResult {
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub n_samples: u64,
    pub seed: u64,
}

impl From<&CheckReport> for WflCheckResult {
    fn from(r: &CheckReport) -> Self {
        Self {
            statistic: r.statistic,
            threshold: r.threshold,
            pass: r.pass,
            n_samples: r.sample_count as u64,
            seed: r.seed,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> WflStatus {
    match e {
        Error::Domain(_) => WflStatus::Domain,
        Error::Construction(_) => WflStatus::Construction,
        Error::Config(_) => WflStatus::Config,
        Error::Io(_) => WflStatus::Io,
        Error::Json(_) => WflStatus::Json,
    }
}

/// Runs `body`, records any error or panic, and converts it to a status.
fn guard(body: impl FnOnce() -> Result<(), (WflStatus, String)>) -> WflStatus {
    set_error(String::new());
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => WflStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("panic: {msg}"));
            WflStatus::Panic
        }
    }
}

fn core<T>(r: wfl_core::Result<T>) -> Result<T, (WflStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (WflStatus, String) {
    (WflStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (WflStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), (WflStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (WflStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (WflStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string, truncating to `len - 1` bytes, and returns the full
/// message length in bytes (0 when the last call succeeded).
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn wfl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wfl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Dirichlet kernel `D_n(x) = sin((2n+1) pi x) / sin(pi x)`, with `2n+1` at integers.
#[no_mangle]
pub extern "C" fn wfl_dirichlet(n: u32, x: f64) -> f64 {
    dirichlet_eval(KernelOrder(n), x)
}

/// Samples a homeomorphism on the grid of mesh `2^-depth` from `seed`.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to free
/// with [`wfl_homeo_free`].
#[no_mangle]
pub unsafe extern "C" fn wfl_homeo_sample(seed: u64, depth: u32, out: *mut *mut WflHomeo) -> WflStatus {
    guard(|| {
        let phi = core(DyadicHomeomorphism::sample(depth, &RandomSource::new(seed)))?;
        write(out, Box::into_raw(Box::new(WflHomeo(phi))), "out")
    })
}

/// # Safety
/// `h` must be null or a handle from [`wfl_homeo_sample`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wfl_homeo_free(h: *mut WflHomeo) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of grid values, `2^depth + 1`; 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wfl_homeo_len(h: *const WflHomeo) -> usize {
    h.as_ref().map_or(0, |h| h.0.values().len())
}

/// Copies up to `len` grid values into `buf`.
///
/// # Safety
/// `h` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn wfl_homeo_values(h: *const WflHomeo, buf: *mut f64, len: usize) -> WflStatus {
    guard(|| {
        let h = deref(h, "homeomorphism")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let v = h.0.values();
        std::ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len().min(len));
        Ok(())
    })
}

/// `phi(x)` by linear interpolation of the grid.
///
/// # Safety
/// `h` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wfl_homeo_eval(h: *const WflHomeo, x: f64, out: *mut f64) -> WflStatus {
    guard(|| write(out, deref(h, "homeomorphism")?.0.evaluate(x), "out"))
}

/// `phi^-1(y)` of the interpolated map.
///
/// # Safety
/// `h` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wfl_homeo_invert(h: *const WflHomeo, y: f64, out: *mut f64) -> WflStatus {
    guard(|| write(out, deref(h, "homeomorphism")?.0.invert(y), "out"))
}

/// Parses a test function from JSON, e.g. `{"variant":"constant","c":1}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer; on
/// success `*out` must be released with [`wfl_function_free`].
#[no_mangle]
pub unsafe extern "C" fn wfl_function_from_json(json: *const c_char, out: *mut *mut WflFunction) -> WflStatus {
    guard(|| {
        let text = c_str(json, "json")?;
        let f: TestFunction = core(serde_json::from_str(text).map_err(Error::from))?;
        core(f.validate())?;
        write(out, Box::into_raw(Box::new(WflFunction(f))), "out")
    })
}

/// Parses a test function in the command-line syntax (`sin:1`, `osc:3:2`,
/// `counterexample:3,4,5:6`, JSON or `@file`).
///
/// # Safety
/// As for [`wfl_function_from_json`].
#[no_mangle]
pub unsafe extern "C" fn wfl_function_parse(spec: *const c_char, out: *mut *mut WflFunction) -> WflStatus {
    guard(|| {
        let f = core(wfl_core::cli::parse_function(c_str(spec, "spec")?))?;
        write(out, Box::into_raw(Box::new(WflFunction(f))), "out")
    })
}

/// # Safety
/// `f` must be null or a live function handle.
#[no_mangle]
pub unsafe extern "C" fn wfl_function_free(f: *mut WflFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// `f(t)`.
///
/// # Safety
/// `f` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wfl_function_eval(f: *const WflFunction, t: f64, out: *mut f64) -> WflStatus {
    guard(|| write(out, deref(f, "function")?.0.eval(t), "out"))
}

/// `sup |f|`.
///
/// # Safety
/// `f` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wfl_function_sup_norm(f: *const WflFunction, out: *mut f64) -> WflStatus {
    guard(|| write(out, deref(f, "function")?.0.sup_norm(), "out"))
}

/// `S_n(f o phi; x)`, or `S_n(f; x)` when `phi` is null, by composite
/// Simpson quadrature with `points_per_oscillation` nodes per kernel lobe.
///
/// # Safety
/// `f` must be a live handle, `phi` null or a live handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn wfl_partial_sum(
    f: *const WflFunction,
    phi: *const WflHomeo,
    n: u32,
    x: f64,
    points_per_oscillation: u32,
    out: *mut f64,
) -> WflStatus {
    guard(|| {
        let f = &deref(f, "function")?.0;
        let q = core(QuadratureSpec::new(points_per_oscillation))?;
        let v = match phi.as_ref() {
            Some(h) => core(partial_sum(&Composed { f, phi: &h.0 }, KernelOrder(n), x, &q))?,
            None => core(partial_sum(f, KernelOrder(n), x, &q))?,
        };
        write(out, v, "out")
    })
}

/// KS check of `phi(2^-i)` against its law; a NaN threshold selects the 1% critical value.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wfl_check_dyadic_law(
    i: u32,
    samples: usize,
    seed: u64,
    threshold: f64,
    out: *mut WflCheckResult,
) -> WflStatus {
    guard(|| {
        let t = (!threshold.is_nan()).then_some(threshold);
        let r = core(verify::check_dyadic_law(i, samples, seed, t))?;
        write(out, (&r).into(), "out")
    })
}

/// First-passage check: `P(first chain value below y is below x) = x / y`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wfl_check_first_passage(
    x: f64,
    y: f64,
    samples: usize,
    seed: u64,
    out: *mut WflCheckResult,
) -> WflStatus {
    guard(|| {
        let r = core(verify::check_first_passage(x, y, samples, seed))?;
        write(out, (&r).into(), "out")
    })
}

/// KS check of `phi(1/2)` given `phi(1/4) = y`; NaN threshold as above.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wfl_check_conditional(
    y: f64,
    samples: usize,
    seed: u64,
    threshold: f64,
    out: *mut WflCheckResult,
) -> WflStatus {
    guard(|| {
        let t = (!threshold.is_nan()).then_some(threshold);
        let r = core(verify::check_conditional_chain(y, samples, seed, t))?;
        write(out, (&r).into(), "out")
    })
}

/// Constant grid `p = c` off the diagonal on `m` cells.
///
/// # Safety
/// `out` must be a valid pointer; release `*out` with [`wfl_grid_free`].
#[no_mangle]
pub unsafe extern "C" fn wfl_grid_constant(m: usize, c: f64, out: *mut *mut WflGrid) -> WflStatus {
    guard(|| {
        let g = core(GridBivariate::constant(m, c))?;
        write(out, Box::into_raw(Box::new(WflGrid(g))), "out")
    })
}

/// Multiplicative grid `p(x_a, x_b) = q[b] / q[a]` from `len` positive
/// non-increasing values (grid of `len - 1` cells).
///
/// # Safety
/// `q` must point to `len` readable doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wfl_grid_multiplicative(q: *const f64, len: usize, out: *mut *mut WflGrid) -> WflStatus {
    guard(|| {
        if q.is_null() {
            return Err(null("q"));
        }
        let g = core(zeroone::make_multiplicative(std::slice::from_raw_parts(q, len)))?;
        write(out, Box::into_raw(Box::new(WflGrid(g))), "out")
    })
}

/// # Safety
/// `g` must be null or a live grid handle.
#[no_mangle]
pub unsafe extern "C" fn wfl_grid_free(g: *mut WflGrid) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Number of cells `M`; 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wfl_grid_cells(g: *const WflGrid) -> usize {
    g.as_ref().map_or(0, |g| g.0.m())
}

/// `p(x_a, x_b)` for `a <= b <= M`.
///
/// # Safety
/// `g` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wfl_grid_get(g: *const WflGrid, a: usize, b: usize, out: *mut f64) -> WflStatus {
    guard(|| {
        let g = &deref(g, "grid")?.0;
        if a > b || b > g.m() {
            return Err((
                WflStatus::Domain,
                format!("need a <= b <= {}, got a = {a}, b = {b}", g.m()),
            ));
        }
        write(out, g.get(a, b), "out")
    })
}

/// One application of the averaging map, as a new grid.
///
/// # Safety
/// `g` must be a live handle and `out` a valid pointer; release `*out` with
/// [`wfl_grid_free`].
#[no_mangle]
pub unsafe extern "C" fn wfl_grid_iterate(g: *const WflGrid, out: *mut *mut WflGrid) -> WflStatus {
    guard(|| {
        let next = zeroone::iterate(&deref(g, "grid")?.0);
        write(out, Box::into_raw(Box::new(WflGrid(next))), "out")
    })
}

/// Largest gap between `p` and its average.
///
/// # Safety
/// `g` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wfl_grid_residual(g: *const WflGrid, out: *mut f64) -> WflStatus {
    guard(|| write(out, zeroone::residual(&deref(g, "grid")?.0), "out"))
}

/// Largest `|p(x,z) - p(x,y) p(y,z)|` over grid triples.
///
/// # Safety
/// `g` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wfl_grid_defect(g: *const WflGrid, out: *mut f64) -> WflStatus {
    guard(|| write(out, zeroone::defect(&deref(g, "grid")?.0), "out"))
}
