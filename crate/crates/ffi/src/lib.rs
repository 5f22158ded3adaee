//! C ABI over the core library: opaque handles, integer error codes and a
//! thread-local last-error message. The matching declarations live in
//! `include/nelson_eff.h` (kept in sync by the `header_matches_exports`
//! test).

use nelson_eff::effective_dynamics::region_member;
use nelson_eff::generator::{
    alpha_coeff, eval_g_eff, solve_g, EffectiveGenerator, GeneratorTable,
};
use nelson_eff::model::{mu_norm, Dispersion, FormFactor, ModelParams};
use nelson_eff::Error;
use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Error codes mirroring the CLI exit codes.
pub const NELSON_EFF_OK: c_int = 0;
pub const NELSON_EFF_ERR_USAGE: c_int = 2;
pub const NELSON_EFF_ERR_DOMAIN: c_int = 3;
pub const NELSON_EFF_ERR_ACCURACY: c_int = 4;
pub const NELSON_EFF_ERR_RESOURCE: c_int = 5;
/// A panic crossed the boundary; the handle state is still valid.
pub const NELSON_EFF_ERR_INTERNAL: c_int = 70;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

fn code_of(err: &Error) -> c_int {
    err.exit_code()
}

fn run_ffi<F: FnOnce() -> Result<(), (c_int, String)>>(f: F) -> c_int {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NELSON_EFF_OK,
        Ok(Err((code, msg))) => {
            set_last_error(&msg);
            code
        }
        Err(_) => {
            set_last_error("internal panic");
            NELSON_EFF_ERR_INTERNAL
        }
    }
}

fn fail(err: Error) -> (c_int, String) {
    (code_of(&err), err.to_string())
}

/// Opaque model-parameter handle.
pub struct NelsonEffParams {
    inner: ModelParams,
}

/// Opaque generator-table handle.
pub struct NelsonEffTable {
    inner: GeneratorTable,
}

/// Last error message for this thread; valid until the next failing call.
#[no_mangle]
pub extern "C" fn nelson_eff_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// New parameter set with the Nelson form factor. Returns null on invalid
/// input (consult `nelson_eff_last_error`).
#[no_mangle]
pub extern "C" fn nelson_eff_params_new_nelson(
    mu: c_double,
    mass: c_double,
    epsilon: c_double,
    lambda: c_double,
) -> *mut NelsonEffParams {
    params_new(mu, mass, epsilon, FormFactor::Nelson { lambda })
}

/// New parameter set with the power-law form factor `|k|^-a` cut at lambda.
#[no_mangle]
pub extern "C" fn nelson_eff_params_new_powerlaw(
    mu: c_double,
    mass: c_double,
    epsilon: c_double,
    a: c_double,
    lambda: c_double,
) -> *mut NelsonEffParams {
    params_new(mu, mass, epsilon, FormFactor::PowerLaw { a, lambda })
}

fn params_new(mu: f64, mass: f64, epsilon: f64, ff: FormFactor) -> *mut NelsonEffParams {
    let result = catch_unwind(|| {
        let params = ModelParams::new(mu, Dispersion { m: mass }, ff, epsilon);
        nelson_eff::model::validate(&params).map(|()| params)
    });
    match result {
        Ok(Ok(params)) => Box::into_raw(Box::new(NelsonEffParams { inner: params })),
        Ok(Err(e)) => {
            set_last_error(&e.to_string());
            ptr::null_mut()
        }
        Err(_) => {
            set_last_error("internal panic");
            ptr::null_mut()
        }
    }
}

/// Release a parameter handle; null is ignored.
///
/// # Safety
/// `params` must be null or a pointer returned by a `nelson_eff_params_new_*`
/// call that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn nelson_eff_params_free(params: *mut NelsonEffParams) {
    if !params.is_null() {
        drop(unsafe { Box::from_raw(params) });
    }
}

unsafe fn params_ref<'a>(p: *const NelsonEffParams) -> Result<&'a ModelParams, (c_int, String)> {
    if p.is_null() {
        return Err((NELSON_EFF_ERR_USAGE, "null params handle".into()));
    }
    Ok(unsafe { &(*p).inner })
}

unsafe fn out_ref<'a>(out: *mut c_double) -> Result<&'a mut f64, (c_int, String)> {
    if out.is_null() {
        return Err((NELSON_EFF_ERR_USAGE, "null output pointer".into()));
    }
    Ok(unsafe { &mut *out })
}

/// `|| omega_mu^{-s} V ||_{L^2}` of the configured form factor.
///
/// # Safety
/// `params` must be a live handle; `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn nelson_eff_mu_norm(
    params: *const NelsonEffParams,
    s: c_double,
    out: *mut c_double,
) -> c_int {
    run_ffi(|| {
        let p = unsafe { params_ref(params) }?;
        let o = unsafe { out_ref(out) }?;
        *o = mu_norm(&p.form_factor, s, p.mu, &p.dispersion).map_err(fail)?;
        Ok(())
    })
}

/// Self-consistent generator value `g(p)`.
///
/// # Safety
/// `params` must be a live handle; `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn nelson_eff_solve_g(
    params: *const NelsonEffParams,
    p_abs: c_double,
    tol: c_double,
    out: *mut c_double,
) -> c_int {
    run_ffi(|| {
        let p = unsafe { params_ref(params) }?;
        let o = unsafe { out_ref(out) }?;
        *o = solve_g(p_abs, p, tol).map_err(fail)?;
        Ok(())
    })
}

/// Explicit generator `g_eff(p)` for a given `g0 = g(0)`.
///
/// # Safety
/// `params` must be a live handle; `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn nelson_eff_g_eff(
    params: *const NelsonEffParams,
    p_abs: c_double,
    g0: c_double,
    out: *mut c_double,
) -> c_int {
    run_ffi(|| {
        let p = unsafe { params_ref(params) }?;
        let o = unsafe { out_ref(out) }?;
        *o = eval_g_eff(p_abs, g0, p).map_err(fail)?;
        Ok(())
    })
}

/// Power-series coefficient `alpha_j(mu)`; `j` must be even.
///
/// # Safety
/// `params` must be a live handle; `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn nelson_eff_alpha_coeff(
    params: *const NelsonEffParams,
    j: c_int,
    g0: c_double,
    out: *mut c_double,
) -> c_int {
    run_ffi(|| {
        let p = unsafe { params_ref(params) }?;
        let o = unsafe { out_ref(out) }?;
        if j < 0 {
            return Err((NELSON_EFF_ERR_DOMAIN, "coefficient order must be >= 0".into()));
        }
        *o = alpha_coeff(j as u32, g0, p).map_err(fail)?;
        Ok(())
    })
}

/// Build a generator table on `nodes` Chebyshev points over `[0, p_max]`.
/// Returns null on failure.
///
/// # Safety
/// `params` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nelson_eff_table_build(
    params: *const NelsonEffParams,
    nodes: c_int,
    p_max: c_double,
    tol: c_double,
) -> *mut NelsonEffTable {
    let result = catch_unwind(AssertUnwindSafe(|| {
        let p = unsafe { params_ref(params) }?;
        if nodes < 2 {
            return Err((NELSON_EFF_ERR_USAGE, "need at least 2 nodes".into()));
        }
        GeneratorTable::build(p, nodes as usize, p_max, tol).map_err(fail)
    }));
    match result {
        Ok(Ok(table)) => Box::into_raw(Box::new(NelsonEffTable { inner: table })),
        Ok(Err((_, msg))) => {
            set_last_error(&msg);
            ptr::null_mut()
        }
        Err(_) => {
            set_last_error("internal panic");
            ptr::null_mut()
        }
    }
}

/// Release a table handle; null is ignored.
///
/// # Safety
/// `table` must be null or a pointer from `nelson_eff_table_build` that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn nelson_eff_table_free(table: *mut NelsonEffTable) {
    if !table.is_null() {
        drop(unsafe { Box::from_raw(table) });
    }
}

/// Interpolated `g(p)` from a table.
///
/// # Safety
/// `table` must be a live handle; `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn nelson_eff_table_eval_g(
    table: *const NelsonEffTable,
    p_abs: c_double,
    out: *mut c_double,
) -> c_int {
    run_ffi(|| {
        if table.is_null() {
            return Err((NELSON_EFF_ERR_USAGE, "null table handle".into()));
        }
        let o = unsafe { out_ref(out) }?;
        let t = unsafe { &(*table).inner };
        *o = t.g(p_abs).map_err(fail)?;
        Ok(())
    })
}

/// `h(p) = p^2 - g(p)` from a table.
///
/// # Safety
/// `table` must be a live handle; `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn nelson_eff_table_eval_h(
    table: *const NelsonEffTable,
    p_abs: c_double,
    out: *mut c_double,
) -> c_int {
    run_ffi(|| {
        if table.is_null() {
            return Err((NELSON_EFF_ERR_USAGE, "null table handle".into()));
        }
        let o = unsafe { out_ref(out) }?;
        let t = unsafe { &(*table).inner };
        *o = t.h(p_abs).map_err(fail)?;
        Ok(())
    })
}

/// Membership of `(a, b)` in the scaling region `I_N`; writes 0 or 1.
///
/// # Safety
/// `out` must point to a writable int.
#[no_mangle]
pub unsafe extern "C" fn nelson_eff_region_member(
    a: c_double,
    b: c_double,
    n: c_int,
    out: *mut c_int,
) -> c_int {
    run_ffi(|| {
        if out.is_null() {
            return Err((NELSON_EFF_ERR_USAGE, "null output pointer".into()));
        }
        if n < 0 {
            return Err((NELSON_EFF_ERR_DOMAIN, "region order must be >= 0".into()));
        }
        let inside = region_member(a, b, n as u32).map_err(fail)?;
        unsafe { *out = if inside { 1 } else { 0 } };
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_g_through_ffi() {
        let p = nelson_eff_params_new_nelson(100.0, 0.0, 0.25, 1.0);
        assert!(!p.is_null());
        let mut g = 0.0;
        unsafe {
            assert_eq!(nelson_eff_solve_g(p, 0.0, 1e-9, &mut g), NELSON_EFF_OK);
        }
        let direct = solve_g(
            0.0,
            &ModelParams::new(100.0, Dispersion::massless(), FormFactor::Nelson { lambda: 1.0 }, 0.25),
            1e-9,
        )
        .unwrap();
        assert!((g - direct).abs() < 1e-9);
        unsafe { nelson_eff_params_free(p) };
    }

    #[test]
    fn invalid_params_set_last_error() {
        let p = nelson_eff_params_new_nelson(100.0, 0.0, 0.7, 1.0);
        assert!(p.is_null());
        let msg = unsafe { std::ffi::CStr::from_ptr(nelson_eff_last_error()) };
        assert!(msg.to_str().unwrap().contains("epsilon"));
    }

    #[test]
    fn null_handles_are_usage_errors() {
        let mut out = 0.0;
        unsafe {
            assert_eq!(
                nelson_eff_mu_norm(ptr::null(), 1.0, &mut out),
                NELSON_EFF_ERR_USAGE
            );
            assert_eq!(
                nelson_eff_solve_g(ptr::null(), 1.0, 1e-9, ptr::null_mut()),
                NELSON_EFF_ERR_USAGE
            );
        }
    }

    #[test]
    fn table_lifecycle_and_domain_error() {
        let p = nelson_eff_params_new_nelson(100.0, 0.0, 0.25, 1.0);
        let t = unsafe { nelson_eff_table_build(p, 8, 20.0, 1e-9) };
        assert!(!t.is_null());
        let mut g = -1.0;
        unsafe {
            assert_eq!(nelson_eff_table_eval_g(t, 5.0, &mut g), NELSON_EFF_OK);
            assert!(g > 0.0);
            // beyond mu/2 the generator vanishes by definition
            assert_eq!(nelson_eff_table_eval_g(t, 60.0, &mut g), NELSON_EFF_OK);
            assert_eq!(g, 0.0);
            // in the gap between table range and mu/2: domain error
            assert_eq!(nelson_eff_table_eval_g(t, 30.0, &mut g), NELSON_EFF_ERR_DOMAIN);
            let mut h = 0.0;
            assert_eq!(nelson_eff_table_eval_h(t, 5.0, &mut h), NELSON_EFF_OK);
            assert!((h - (25.0 - g_at(t, 5.0))).abs() < 1e-12);
            nelson_eff_table_free(t);
            nelson_eff_params_free(p);
        }
    }

    fn g_at(t: *const NelsonEffTable, p: f64) -> f64 {
        let mut g = 0.0;
        unsafe {
            assert_eq!(nelson_eff_table_eval_g(t, p, &mut g), NELSON_EFF_OK);
        }
        g
    }

    #[test]
    fn region_and_alpha_through_ffi() {
        let mut inside = -1;
        unsafe {
            assert_eq!(nelson_eff_region_member(0.95, 0.3, 6, &mut inside), NELSON_EFF_OK);
            assert_eq!(inside, 1);
            assert_eq!(nelson_eff_region_member(0.95, 0.3, 2, &mut inside), NELSON_EFF_OK);
            assert_eq!(inside, 0);
            assert_eq!(
                nelson_eff_region_member(1.5, 0.3, 2, &mut inside),
                NELSON_EFF_ERR_DOMAIN
            );
        }
        let p = nelson_eff_params_new_nelson(1000.0, 0.0, 0.25, 1.0);
        let mut g0 = 0.0;
        let mut a0 = 0.0;
        unsafe {
            assert_eq!(nelson_eff_solve_g(p, 0.0, 1e-9, &mut g0), NELSON_EFF_OK);
            assert_eq!(nelson_eff_alpha_coeff(p, 0, g0, &mut a0), NELSON_EFF_OK);
            assert!(a0 > 0.0);
            // odd order rejected
            assert_eq!(nelson_eff_alpha_coeff(p, 3, g0, &mut a0), NELSON_EFF_ERR_DOMAIN);
            nelson_eff_params_free(p);
        }
    }

    /// Every exported symbol must appear in the shipped C header.
    #[test]
    fn header_matches_exports() {
        let header = include_str!("../include/nelson_eff.h");
        for name in [
            "nelson_eff_last_error",
            "nelson_eff_params_new_nelson",
            "nelson_eff_params_new_powerlaw",
            "nelson_eff_params_free",
            "nelson_eff_mu_norm",
            "nelson_eff_solve_g",
            "nelson_eff_g_eff",
            "nelson_eff_alpha_coeff",
            "nelson_eff_table_build",
            "nelson_eff_table_free",
            "nelson_eff_table_eval_g",
            "nelson_eff_table_eval_h",
            "nelson_eff_region_member",
        ] {
            assert!(header.contains(name), "header missing {name}");
        }
    }
}
