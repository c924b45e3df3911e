use std::ffi::{CStr, CString};
use std::ptr;

use catsim_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(catsim_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(catsim_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn rates_of_the_reference_set() {
    let p = catsim_params_reference();
    let mut r = CatsimRates::default();
    assert_eq!(unsafe { catsim_rates(p, &mut r) }, CatsimStatus::Ok);
    assert!((r.gamma2 / r.gamma1 / 400.0 - 1.0).abs() < 1e-12);
    assert_eq!(r.regime, 0);
    assert_eq!(r.beta_de, 0.0);
    assert_eq!(unsafe { catsim_params_set_beta(p, 2.0) }, CatsimStatus::Ok);
    assert_eq!(unsafe { catsim_rates(p, &mut r) }, CatsimStatus::Ok);
    assert!((r.beta_de - 2.0).abs() < 1e-12);
    unsafe { catsim_params_free(p) };
}

#[test]
fn invalid_parameters_report_an_error() {
    let mut p = ptr::null_mut();
    let s = unsafe { catsim_params_new(1e6, 15e6, 15.0, -1.0, 0.0, 0.1, &mut p) };
    assert_eq!(s, CatsimStatus::InvalidArgument);
    assert!(p.is_null());
    assert!(last_error().contains("kappa"), "{}", last_error());

    let s = unsafe { catsim_params_new(1e6, 15e6, 15.0, 1e5, 0.0, 0.1, ptr::null_mut()) };
    assert_eq!(s, CatsimStatus::NullPointer);
    let mut r = CatsimRates::default();
    assert_eq!(unsafe { catsim_rates(ptr::null(), &mut r) }, CatsimStatus::NullPointer);
    unsafe { catsim_params_free(ptr::null_mut()) };
    unsafe { catsim_run_free(ptr::null_mut()) };
}

#[test]
fn undriven_run_stays_in_vacuum() {
    let p = catsim_params_reference();
    unsafe {
        let mut run = ptr::null_mut();
        assert_eq!(catsim_run(p, CatsimModel::Reduced, 1.0, 10, &mut run), CatsimStatus::Ok);
        let mut s = CatsimSummary::default();
        assert_eq!(catsim_run_summary(run, &mut s), CatsimStatus::Ok);
        // only residual sideband heating
        assert!(s.final_n_mech < 1e-3, "{}", s.final_n_mech);
        assert!(s.fidelity_max > 0.999);
        assert_eq!(catsim_run(p, CatsimModel::Reduced, -1.0, 10, &mut run), CatsimStatus::InvalidArgument);
        assert!(last_error().contains("t_end"), "{}", last_error());
        catsim_run_free(run);
        catsim_params_free(p);
    }
}

#[test]
fn reduced_run_round_trip() {
    let p = catsim_params_reference();
    unsafe {
        assert_eq!(catsim_params_set_beta(p, 2.0), CatsimStatus::Ok);
        let mut run = ptr::null_mut();
        assert_eq!(catsim_run(p, CatsimModel::Reduced, 3.0, 30, &mut run), CatsimStatus::Ok);
        let mut s = CatsimSummary::default();
        assert_eq!(catsim_run_summary(run, &mut s), CatsimStatus::Ok);
        assert!((s.w_min + 0.457).abs() < 2e-3, "{}", s.w_min);
        assert_eq!(s.samples, 91);
        assert_eq!(s.n_mech, 35);

        let name = CString::new("w_min").unwrap();
        let mut buf = vec![f64::NAN; 200];
        let mut n = 0usize;
        assert_eq!(catsim_run_series(run, name.as_ptr(), buf.as_mut_ptr(), buf.len(), &mut n), CatsimStatus::Ok);
        assert_eq!(n, 91);
        let min = buf[..n].iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(min, s.w_min);

        let t = CString::new("t_seconds").unwrap();
        assert_eq!(catsim_run_series(run, t.as_ptr(), buf.as_mut_ptr(), 5, &mut n), CatsimStatus::Ok);
        assert_eq!(n, 5);
        assert_eq!(buf[0], 0.0);

        let bad = CString::new("nope").unwrap();
        assert_eq!(catsim_run_series(run, bad.as_ptr(), buf.as_mut_ptr(), 5, &mut n), CatsimStatus::InvalidArgument);
        catsim_run_free(run);
        catsim_params_free(p);
    }
}

#[test]
fn cat_wigner_values() {
    let w = catsim_cat_wigner(2.0, true, 0.0, 0.0);
    assert!((w + 2.0 / std::f64::consts::PI).abs() < 1e-12);
    assert!(catsim_cat_wigner(0.0, true, 0.0, 0.0).is_nan());
    assert!(catsim_cat_wigner(0.0, false, 0.0, 0.0) > 0.6);
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/catsim.h")).unwrap();
    for f in [
        "catsim_last_error", "catsim_version", "catsim_params_reference", "catsim_params_new",
        "catsim_params_set_beta", "catsim_params_free", "catsim_rates", "catsim_run", "catsim_run_summary",
        "catsim_run_series", "catsim_run_free", "catsim_cat_wigner", "CATSIM_STATUS_OK",
    ] {
        assert!(h.contains(f), "{f} missing from header");
    }
    assert!(h.contains("typedef struct CatsimRun CatsimRun;"), "run handle is opaque");
}
