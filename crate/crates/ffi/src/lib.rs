//! C interface: opaque handles for piecewise-constant functions, the
//! exponential forecaster and the meta-initializer.
//!
//! Every fallible function returns a status code; on failure a message is
//! kept per thread and can be read with `dm_last_error_message`. Handles are
//! created by `*_new` functions and released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dispersed_meta::forecaster::{theory_lambda, ForecasterState};
use dispersed_meta::meta_init::MetaInitializer;
use dispersed_meta::{Density, Error, Interval, PiecewiseConstant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DM_OK: i32 = 0;
pub const DM_ERR_NULL: i32 = 1;
pub const DM_ERR_INVALID_ARGUMENT: i32 = 2;
pub const DM_ERR_DOMAIN: i32 = 3;
pub const DM_ERR_NUMERIC: i32 = 4;
pub const DM_ERR_PANIC: i32 = 5;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn code_of(e: &Error) -> i32 {
    match e {
        Error::DomainMismatch(..) | Error::DisjointBall(..) | Error::NotRefined(..) => DM_ERR_DOMAIN,
        Error::QuadratureDiverged(..) | Error::DegenerateWeights(..) => DM_ERR_NUMERIC,
        _ => DM_ERR_INVALID_ARGUMENT,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (i32, String)>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DM_OK,
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            DM_ERR_PANIC
        }
    }
}

fn lib(e: Error) -> (i32, String) {
    (code_of(&e), e.to_string())
}

fn null(name: &str) -> (i32, String) {
    (DM_ERR_NULL, format!("{name} is null"))
}

unsafe fn slice<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], (i32, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Piecewise-constant function on a closed interval.
pub struct DmPiecewise(PiecewiseConstant);

/// Exponential forecaster with its own random stream.
pub struct DmForecaster {
    state: ForecasterState,
    rng: ChaCha8Rng,
}

/// Meta-initializer over task-optimum balls.
pub struct DmMetaInit(MetaInitializer);

/// Builds a function from `n_values + 1` breakpoints spanning the domain
/// and `n_values` cell values.
///
/// # Safety
/// Array arguments must point to the stated number of elements; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_pc_new(
    breakpoints: *const f64,
    n_breakpoints: usize,
    values: *const f64,
    n_values: usize,
    out: *mut *mut DmPiecewise,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let bps = slice(breakpoints, n_breakpoints, "breakpoints")?.to_vec();
        let vals = slice(values, n_values, "values")?.to_vec();
        let (lo, hi) = match (bps.first(), bps.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err((DM_ERR_INVALID_ARGUMENT, "no breakpoints".into())),
        };
        let domain = Interval::new(lo, hi).map_err(lib)?;
        let pc = PiecewiseConstant::new(domain, bps, vals).map_err(lib)?;
        *out = Box::into_raw(Box::new(DmPiecewise(pc)));
        Ok(())
    })
}

/// # Safety
/// `pc` must be null or a handle from `dm_pc_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dm_pc_free(pc: *mut DmPiecewise) {
    if !pc.is_null() {
        drop(Box::from_raw(pc));
    }
}

/// Value at `x` (cells are closed on the left).
///
/// # Safety
/// `pc` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dm_pc_eval(pc: *const DmPiecewise, x: f64, out: *mut f64) -> i32 {
    guard(|| {
        let pc = pc.as_ref().ok_or_else(|| null("pc"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let d = pc.0.domain();
        if !(x >= d.lo && x <= d.hi) {
            return Err((DM_ERR_DOMAIN, format!("{x} outside [{}, {}]", d.lo, d.hi)));
        }
        *out = pc.0.eval(x);
        Ok(())
    })
}

/// Number of cells, or 0 for a null handle.
///
/// # Safety
/// `pc` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dm_pc_num_cells(pc: *const DmPiecewise) -> usize {
    pc.as_ref().map_or(0, |p| p.0.num_cells())
}

/// Integral over the domain.
///
/// # Safety
/// `pc` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dm_pc_integral(pc: *const DmPiecewise, out: *mut f64) -> i32 {
    guard(|| {
        let pc = pc.as_ref().ok_or_else(|| null("pc"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = pc.0.integral();
        Ok(())
    })
}

/// Forecaster started from `init` (a nonnegative function with positive
/// mass; null means uniform on `[lo, hi]`).
///
/// # Safety
/// `init` must be null or a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dm_forecaster_new(
    lo: f64,
    hi: f64,
    init: *const DmPiecewise,
    lambda: f64,
    seed: u64,
    out: *mut *mut DmForecaster,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let domain = Interval::new(lo, hi).map_err(lib)?;
        let density = match init.as_ref() {
            Some(p) => Density::new(p.0.clone()).map_err(lib)?,
            None => Density::uniform(domain).map_err(lib)?,
        };
        let state = ForecasterState::new(domain, density, lambda).map_err(lib)?;
        *out = Box::into_raw(Box::new(DmForecaster { state, rng: ChaCha8Rng::seed_from_u64(seed) }));
        Ok(())
    })
}

/// # Safety
/// `f` must be null or a live forecaster handle.
#[no_mangle]
pub unsafe extern "C" fn dm_forecaster_free(f: *mut DmForecaster) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Draws the next parameter.
///
/// # Safety
/// `f` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dm_forecaster_sample(f: *mut DmForecaster, out: *mut f64) -> i32 {
    guard(|| {
        let f = f.as_mut().ok_or_else(|| null("forecaster"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = f.state.sample(&mut f.rng).map_err(lib)?;
        Ok(())
    })
}

/// Applies one loss with values in `[0, 1]` on the forecaster's domain.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn dm_forecaster_update(f: *mut DmForecaster, loss: *const DmPiecewise) -> i32 {
    guard(|| {
        let f = f.as_mut().ok_or_else(|| null("forecaster"))?;
        let loss = loss.as_ref().ok_or_else(|| null("loss"))?;
        f.state = f.state.update(&loss.0).map_err(lib)?;
        Ok(())
    })
}

/// Rounds applied so far, or 0 for a null handle.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dm_forecaster_round(f: *const DmForecaster) -> usize {
    f.as_ref().map_or(0, |f| f.state.round())
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_meta_init_new(lo: f64, hi: f64, gamma: f64, eta: f64, out: *mut *mut DmMetaInit) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let domain = Interval::new(lo, hi).map_err(lib)?;
        let m = MetaInitializer::new(domain, gamma, eta).map_err(lib)?;
        *out = Box::into_raw(Box::new(DmMetaInit(m)));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dm_meta_init_free(h: *mut DmMetaInit) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Records the optimum ball `[ball_lo, ball_hi]` of a finished task.
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dm_meta_init_observe(h: *mut DmMetaInit, ball_lo: f64, ball_hi: f64) -> i32 {
    guard(|| {
        let h = h.as_mut().ok_or_else(|| null("meta_init"))?;
        let ball = Interval::new(ball_lo, ball_hi).map_err(lib)?;
        h.0.observe(ball).map_err(lib)
    })
}

/// Current initialization as a new function handle (density with mass 1).
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dm_meta_init_density(h: *const DmMetaInit, out: *mut *mut DmPiecewise) -> i32 {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("meta_init"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let d = h.0.density().map_err(lib)?;
        *out = Box::into_raw(Box::new(DmPiecewise(d.pc().clone())));
        Ok(())
    })
}

/// `sqrt(−log Z / m)` with `Z` the mass fraction of `init` in the ball.
///
/// # Safety
/// `init` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dm_theory_lambda(
    init: *const DmPiecewise,
    ball_lo: f64,
    ball_hi: f64,
    m: usize,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let init = init.as_ref().ok_or_else(|| null("init"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if m == 0 {
            return Err((DM_ERR_INVALID_ARGUMENT, "m must be positive".into()));
        }
        let d = Density::new(init.0.clone()).map_err(lib)?;
        let ball = Interval::new(ball_lo, ball_hi).map_err(lib)?;
        *out = theory_lambda(&d, &ball, m);
        Ok(())
    })
}
