//! C ABI for catsim.
//!
//! Objects are opaque handles created by `catsim_*_new`/`catsim_run` and
//! released with the matching `*_free`. Every fallible call returns a
//! [`CatsimStatus`]; on failure `catsim_last_error` gives a message that stays
//! valid until the next failing call on the same thread. Rates are angular
//! (rad/s) unless a name says `hz`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use catsim::experiments::{run_cat, CatRun, ModelKind, RunSettings};
use catsim::fock::CatSpec;
use catsim::models::{derive_rates, with_target_beta, Regime, SystemParams, TWO_PI};
use catsim::wigner::cat_wigner_point;
use catsim::Error;

#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum CatsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Regime = 3,
    Truncation = 4,
    Integration = 5,
    Physicality = 6,
    Panic = 7,
    Other = 8,
}

/// Model selector for [`catsim_run`].
#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum CatsimModel {
    Reduced = 0,
    Full = 1,
}

/// Opaque system parameters.
pub struct CatsimParams(SystemParams);

/// Opaque finished run.
pub struct CatsimRun(CatRun);

#[repr(C)]
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct CatsimRates {
    pub gamma1: f64,
    pub gamma2: f64,
    pub kerr: f64,
    pub gamma_lin: f64,
    pub gamma_dec: f64,
    pub omega_m_dressed: f64,
    pub beta_de: f64,
    /// 0 sideband resolved, 1 not.
    pub regime: i32,
}

#[repr(C)]
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct CatsimSummary {
    pub w_min: f64,
    pub t_min_seconds: f64,
    pub gamma2_t_min: f64,
    pub fidelity_max: f64,
    pub root_fidelity_max: f64,
    pub final_parity: f64,
    pub final_n_mech: f64,
    pub final_n_cav: f64,
    pub n_mech: usize,
    pub samples: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CatsimStatus {
    match e {
        Error::InvalidParameter(_) | Error::Config(_) | Error::Grid(_) | Error::Degenerate(_) => CatsimStatus::InvalidArgument,
        Error::Regime(_) => CatsimStatus::Regime,
        Error::Truncation { .. } => CatsimStatus::Truncation,
        Error::StepSizeUnderflow { .. } | Error::TooManySteps { .. } => CatsimStatus::Integration,
        Error::Physicality { .. } => CatsimStatus::Physicality,
        _ => CatsimStatus::Other,
    }
}

/// Runs `f`, converting errors and panics into a status and the last-error message.
fn guarded<F: FnOnce() -> Result<(), (CatsimStatus, String)>>(f: F) -> CatsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CatsimStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            CatsimStatus::Panic
        }
    }
}

fn lib<T>(r: catsim::Result<T>) -> Result<T, (CatsimStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (CatsimStatus, String) {
    (CatsimStatus::NullPointer, format!("{name} is null"))
}

unsafe fn obj<'a, T>(p: *const T, name: &str) -> Result<&'a T, (CatsimStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

/// Message of the last failure on this thread (empty if none). Owned by the
/// library.
#[no_mangle]
pub extern "C" fn catsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn catsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reference parameter set (g₀/2π = 1 MHz, ω_m/2π = 15 MHz, κ/2π = 100 kHz)
/// with the mechanical drive off. Never fails; free with [`catsim_params_free`].
#[no_mangle]
pub extern "C" fn catsim_params_reference() -> *mut CatsimParams {
    Box::into_raw(Box::new(CatsimParams(SystemParams::fig2())))
}

/// Parameters from `/2π` frequencies in Hz, drive off.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn catsim_params_new(
    g0_hz: f64,
    omega_m_hz: f64,
    gamma_hz: f64,
    kappa_hz: f64,
    nbar_b: f64,
    n_p: f64,
    out: *mut *mut CatsimParams,
) -> CatsimStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = SystemParams {
            g0: TWO_PI * g0_hz,
            omega_m: TWO_PI * omega_m_hz,
            gamma: TWO_PI * gamma_hz,
            kappa: TWO_PI * kappa_hz,
            nbar_b,
            n_p,
            ..SystemParams::fig2()
        };
        lib(p.validate())?;
        *out = Box::into_raw(Box::new(CatsimParams(p)));
        Ok(())
    })
}

/// Sets the mechanical drive so the dissipative cat has real size `beta`.
///
/// # Safety
/// `params` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn catsim_params_set_beta(params: *mut CatsimParams, beta: f64) -> CatsimStatus {
    guarded(|| {
        let p = params.as_mut().ok_or_else(|| null("params"))?;
        p.0 = lib(with_target_beta(&p.0, beta))?;
        Ok(())
    })
}

/// # Safety
/// `params` must come from this library (or be null) and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn catsim_params_free(params: *mut CatsimParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Derived rates in the sideband-resolved formulas.
///
/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn catsim_rates(params: *const CatsimParams, out: *mut CatsimRates) -> CatsimStatus {
    guarded(|| {
        let p = obj(params, "params")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = lib(derive_rates(&p.0, Regime::SidebandResolved))?;
        *out = CatsimRates {
            gamma1: r.gamma1,
            gamma2: r.gamma2,
            kerr: r.kerr,
            gamma_lin: r.gamma_lin,
            gamma_dec: r.gamma_dec,
            omega_m_dressed: r.omega_m_dressed,
            beta_de: r.beta_de,
            regime: match Regime::for_params(&p.0) {
                Regime::SidebandResolved => 0,
                Regime::NonSidebandResolved => 1,
            },
        };
        Ok(())
    })
}

/// Evolves from the ground state for `t_end_gamma2` units of 1/Γ₂ with
/// `samples_per_unit` samples per unit. Fidelities refer to the even cat
/// of the size set by the drive (see [`catsim_params_set_beta`]). Default truncations are used.
///
/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn catsim_run(
    params: *const CatsimParams,
    model: CatsimModel,
    t_end_gamma2: f64,
    samples_per_unit: usize,
    out: *mut *mut CatsimRun,
) -> CatsimStatus {
    guarded(|| {
        let p = obj(params, "params")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !(t_end_gamma2 > 0.0 && t_end_gamma2.is_finite()) || samples_per_unit == 0 {
            return Err((CatsimStatus::InvalidArgument, "t_end_gamma2 and samples_per_unit must be positive".into()));
        }
        let kind = match model {
            CatsimModel::Reduced => ModelKind::Reduced,
            CatsimModel::Full => ModelKind::Full,
        };
        let rates = lib(derive_rates(&p.0, Regime::SidebandResolved))?;
        let settings = RunSettings {
            t_end_gamma2,
            samples_per_unit,
            beta: rates.beta_de,
            ..RunSettings::for_model(kind)
        };
        let run = lib(run_cat(&p.0, kind, &settings))?;
        *out = Box::into_raw(Box::new(CatsimRun(run)));
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn catsim_run_summary(run: *const CatsimRun, out: *mut CatsimSummary) -> CatsimStatus {
    guarded(|| {
        let r = &obj(run, "run")?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = &r.summary;
        *out = CatsimSummary {
            w_min: s.w_min,
            t_min_seconds: s.t_min,
            gamma2_t_min: s.gamma2_t_min,
            fidelity_max: s.fidelity_max,
            root_fidelity_max: s.root_fidelity_max,
            final_parity: s.final_parity,
            final_n_mech: s.final_n_mech,
            final_n_cav: s.final_n_cav,
            n_mech: s.n_mech,
            samples: r.record.len(),
        };
        Ok(())
    })
}

/// Copies `min(len, samples)` values of a timeseries column into `buf`.
/// Columns: `t_seconds`, `gamma2_t`, `n_cav`, `n_mech`, `parity`, `w_min`,
/// `fidelity_even_cat`. `written` receives the count.
///
/// # Safety
/// `run` must be a live handle, `name` a NUL-terminated string, `buf` valid
/// for `len` doubles and `written` writable.
#[no_mangle]
pub unsafe extern "C" fn catsim_run_series(
    run: *const CatsimRun,
    name: *const c_char,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> CatsimStatus {
    guarded(|| {
        let r = &obj(run, "run")?.0;
        if name.is_null() {
            return Err(null("name"));
        }
        if buf.is_null() && len > 0 {
            return Err(null("buf"));
        }
        let written = written.as_mut().ok_or_else(|| null("written"))?;
        let name = CStr::from_ptr(name).to_str()
            .map_err(|_| (CatsimStatus::InvalidArgument, "column name is not UTF-8".to_string()))?;
        let values: &[f64] = if name == "t_seconds" {
            &r.record.times
        } else {
            r.record.series(name)
                .ok_or_else(|| (CatsimStatus::InvalidArgument, format!("unknown column '{name}'")))?
        };
        let n = values.len().min(len);
        if n > 0 {
            ptr::copy_nonoverlapping(values.as_ptr(), buf, n);
        }
        *written = n;
        Ok(())
    })
}

/// # Safety
/// `run` must come from this library (or be null) and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn catsim_run_free(run: *mut CatsimRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Analytic Wigner function of a pure cat with real size `beta` at `(x, p)`
/// (`α = x + ip`, vacuum variance 1/4). Returns NaN for an odd cat at
/// `beta = 0`.
#[no_mangle]
pub extern "C" fn catsim_cat_wigner(beta: f64, odd: bool, x: f64, p: f64) -> f64 {
    if odd && beta == 0.0 {
        set_error("odd cat state with beta = 0".into());
        return f64::NAN;
    }
    let spec = if odd { CatSpec::odd(beta) } else { CatSpec::even(beta) };
    cat_wigner_point(&spec, x, p)
}
