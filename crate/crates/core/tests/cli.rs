use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use catsim::cli::{exit_code, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_INTEGRATION};
use catsim::config::RunConfig;
use catsim::error::Error;
use catsim::experiments::{convergence_check, ModelKind, RunSettings};
use catsim::models::{with_target_beta, SystemParams};

fn catsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catsim")).args(args).output().unwrap()
}

fn with_config(text: &str) -> (tempfile::TempDir, String, String) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("out");
    (dir, cfg.to_str().unwrap().to_string(), out.to_str().unwrap().to_string())
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (h, rows) = csv(path);
    let k = h.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

#[test]
fn rates_writes_one_row_and_one_line() {
    let (_d, cfg, out) = with_config("scenario = fig2\n");
    let o = catsim(&["rates", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);
    let ratio = column(&Path::new(&out).join("rates.csv"), "gamma2_over_gamma1");
    assert_eq!(ratio.len(), 1);
    assert!((ratio[0] / 400.0 - 1.0).abs() < 1e-12);
    assert!(Path::new(&out).join("manifest.txt").exists());
}

#[test]
fn csv_numbers_carry_17_significant_digits() {
    let (_d, cfg, out) = with_config("scenario = fig2\n");
    catsim(&["rates", &cfg, "--out", &out]);
    let (_, rows) = csv(&Path::new(&out).join("rates.csv"));
    for v in &rows[0] {
        let mantissa = v.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
        assert_eq!(mantissa.len(), 17, "{v}");
    }
}

#[test]
fn missing_custom_parameter_names_the_key() {
    let (_d, cfg, out) = with_config(
        "scenario = custom\ng0_over_2pi_hz = 1e6\nomega_m_over_2pi_hz = 15e6\ngamma_over_2pi_hz = 15\nn_p = 0.1\n",
    );
    let o = catsim(&["rates", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    assert!(stdout(&o).contains("kappa_over_2pi_hz"), "{}", stdout(&o));
}

#[test]
fn config_errors_exit_with_1() {
    let (_d, cfg, out) = with_config("scenario = fig2\nbogus = 3\n");
    let o = catsim(&["rates", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    assert!(stdout(&o).contains("line 2"), "{}", stdout(&o));

    let o = catsim(&["rates", "/nonexistent/catsim.cfg", "--out", &out]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));

    let (_d, cfg, out) = with_config("scenario = fig2\n");
    let o = catsim(&["simulate", &cfg, "--out", &out, "--dims", "6"]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    let o = catsim(&["frobnicate", &cfg]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn loose_tolerance_is_an_integration_failure() {
    let (_d, cfg, out) = with_config("scenario = fig2\nrtol = 0.3\natol = 0.01\n");
    let o = catsim(&["simulate", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(EXIT_INTEGRATION));
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn convergence_failures_map_to_exit_3() {
    let p = with_target_beta(&SystemParams::fig2(), 2.0).unwrap();
    let s = RunSettings { t_end_gamma2: 2.5, ..RunSettings::default() };
    let run = catsim::experiments::run_cat(&p, ModelKind::Reduced, &s).unwrap();
    let e = convergence_check(&p, ModelKind::Reduced, &s, run.summary.w_min, 1e-15).unwrap_err();
    assert!(matches!(e, Error::Convergence { .. }), "{e}");
    assert_eq!(exit_code(&e), EXIT_CONVERGENCE);
    let ok = convergence_check(&p, ModelKind::Reduced, &s, run.summary.w_min, 2e-3).unwrap();
    assert!(ok.delta.abs() < 2e-3);
}

#[test]
fn wigner_forms() {
    let (_d, cfg, out) = with_config("form = cat\nparity = odd\nbeta = 2\ngrid_n = 101\nline_cut = true\n");
    let o = catsim(&["wigner", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let w = column(&Path::new(&out).join("wigner.csv"), "w");
    assert_eq!(w.len(), 101 * 101);
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((min + 2.0 / std::f64::consts::PI).abs() < 1e-9, "{min}");
    assert_eq!(column(&Path::new(&out).join("line_cut.csv"), "w").len(), 101);

    let (_d, cfg, out) = with_config("form = mixture\nbeta = 2\n");
    assert_eq!(catsim(&["wigner", &cfg, "--out", &out]).status.code(), Some(0));
    let w = column(&Path::new(&out).join("wigner.csv"), "w");
    assert!(w.iter().all(|v| *v > -1e-15));

    // a decohered cat at late times has lost its fringes
    let (_d, cfg, out) = with_config("form = decohered\nbeta = 2\nt = 5\ngamma1 = 1\nnth = 0\n");
    assert_eq!(catsim(&["wigner", &cfg, "--out", &out]).status.code(), Some(0));
    let w = column(&Path::new(&out).join("wigner.csv"), "w");
    assert!(w.iter().all(|v| *v > -1e-6));

    let (_d, cfg, out) = with_config("form = approx\nbeta = 2\nt = 1\ngamma1 = 0.1\ngamma2 = 1\n");
    assert_eq!(catsim(&["wigner", &cfg, "--out", &out]).status.code(), Some(0));
}

#[test]
fn grid_flag_overrides_the_grid() {
    let (_d, cfg, out) = with_config("form = cat\nbeta = 1\n");
    let o = catsim(&["wigner", &cfg, "--out", &out, "--grid", "11,3"]);
    assert_eq!(o.status.code(), Some(0));
    let x = column(&Path::new(&out).join("wigner.csv"), "x");
    assert_eq!(x.len(), 121);
    assert_eq!(x[0], -3.0);
}

#[test]
fn toy_simulation_writes_both_curves() {
    let (_d, cfg, out) = with_config("scenario = figS2\ntoy_t_end = 3\nsamples_per_unit = 20\n");
    let o = catsim(&["simulate", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let p = Path::new(&out).join("figS2.csv");
    let n = column(&p, "numeric_w_min");
    let a = column(&p, "approx_w_min");
    assert_eq!(n.len(), 61);
    assert_eq!(n[0], 0.0);
    assert_eq!(a[0], 0.0);
    assert!(n.iter().any(|w| *w < -0.1));
}

#[test]
fn single_point_sweep_matches_simulate() {
    let (_d, cfg, out) = with_config("scenario = fig2\nsnapshots_gamma2_t = 1.6\nt_end_gamma2 = 3\n");
    let o = catsim(&["simulate", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let dir = Path::new(&out);
    let w_sim = column(&dir.join("summary.csv"), "w_min")[0];
    let t_sim = column(&dir.join("summary.csv"), "gamma2_t_min")[0];
    assert!(dir.join("timeseries.csv").exists() && dir.join("wigner_t0.csv").exists());

    let (_d2, cfg2, out2) = with_config("scenario = fig2\ng0_over_kappa = 10\nfit = false\n");
    let o = catsim(&["sweep", &cfg2, "--out", &out2]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let sweep = Path::new(&out2).join("sweep.csv");
    let w_sw = column(&sweep, "w_min")[0];
    let t_sw = column(&sweep, "gamma2_t_min")[0];
    assert!((w_sim - w_sw).abs() < 1e-6, "{w_sim} vs {w_sw}");
    assert_eq!(t_sim, t_sw);
}

#[test]
fn manifest_reproduces_the_run() {
    let (_d, cfg, out) = with_config("scenario = fig2\nn_p = 0.2\n");
    assert_eq!(catsim(&["rates", &cfg, "--out", &out]).status.code(), Some(0));
    let manifest = Path::new(&out).join("manifest.txt");
    let parsed = RunConfig::from_file(&manifest).unwrap();
    assert_eq!(parsed, RunConfig::from_file(Path::new(&cfg)).unwrap());
    let out2 = format!("{out}-again");
    assert_eq!(catsim(&["rates", manifest.to_str().unwrap(), "--out", &out2]).status.code(), Some(0));
    assert_eq!(
        fs::read(Path::new(&out).join("rates.csv")).unwrap(),
        fs::read(Path::new(&out2).join("rates.csv")).unwrap()
    );
}

#[test]
fn sweeps_are_bit_identical_across_runs() {
    let (_d, cfg, out) = with_config("scenario = fig3\ng0_over_kappa = 1, 3\nfit = false\n");
    let out2 = format!("{out}-again");
    for o in [&out, &out2] {
        let r = catsim(&["sweep", &cfg, "--out", o]);
        assert_eq!(r.status.code(), Some(0), "{}", stdout(&r));
    }
    let a = fs::read(Path::new(&out).join("sweep.csv")).unwrap();
    let b = fs::read(Path::new(&out2).join("sweep.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn failed_sweep_points_are_tagged() {
    // κ = 100 g₀ leaves the sideband-resolved regime for the reduced model
    let (_d, cfg, out) = with_config("scenario = fig3\ng0_over_kappa = 0.01, 10\nfit = false\n");
    let o = catsim(&["sweep", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let (h, rows) = csv(&Path::new(&out).join("sweep.csv"));
    let k = h.iter().position(|c| c == "status").unwrap();
    assert!(rows[0][k].starts_with("error:"), "{:?}", rows[0]);
    assert_eq!(rows[1][k], "ok");
    assert!(stdout(&o).contains("failed=1"));
}
