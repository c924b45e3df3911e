//! `catsim simulate|sweep|wigner|rates <config>`.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 integration
//! failure (or more than half of a sweep failed), 3 convergence-rule failure.

use std::fs;
use std::path::{ Path, PathBuf };
use clap::{ Args, Parser, Subcommand };
use log::{ info, warn };
use crate::config::{ fmt_f64, Command, RunConfig, Scenario, WignerForm };
use crate::error::{ Error, Result };
use crate::experiments::{
    convergence_check, fig3_default_g0_over_kappa, inset_gammas_for_ratios, log_space, run_cat,
    run_fig3, run_fig3_inset, run_fig4, run_fig_s2, run_fig_s3, snapshot_grid, CatRun, ModelKind,
    SweepResult,
};
use crate::fock::CatSpec;
use crate::models::{ derive_rates, TWO_PI };
use crate::output::{
    fig_s2_table, fit_table, heatmap_table, line_cut_table, rates_table, summary_table, sweep_table,
    timeseries_table, wigner_table, write_manifest, CsvTable,
};
use crate::plot::{ heatmap, line_plot, Series };
use crate::wigner::{
    negativity, wigner_approx_re, wigner_cat_analytic, wigner_decohered, wigner_mixture,
    DecoherenceSpec, WignerGrid,
};
use crate::C64;

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INTEGRATION: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;

/// Convergence tolerance on W_min when the truncation grows by 25%.
pub const CONVERGENCE_TOL: f64 = 2e-3;

/// Most full-model points a sweep will run.
pub const MAX_FULL_SWEEP_POINTS: usize = 5;

#[derive(Parser, Debug)]
#[command(name = "catsim", version, about = "Dissipative mechanical cat-state simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Time evolution of one parameter set.
    Simulate(RunArgs),
    /// Parameter sweep of a figure scenario.
    Sweep(RunArgs),
    /// Analytic Wigner function on a grid.
    Wigner(RunArgs),
    /// Derived rates only.
    Rates(RunArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// key = value configuration file.
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "catsim-out")]
    pub out: PathBuf,
    /// Truncations as `Na,Nb`.
    #[arg(long)]
    pub dims: Option<String>,
    /// Relative integrator tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Wigner grid as `N,xmax`.
    #[arg(long)]
    pub grid: Option<String>,
}

/// Result of one invocation: exit code and the single stdout line.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub summary: String,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Convergence { .. } => EXIT_CONVERGENCE,
        Error::StepSizeUnderflow { .. }
        | Error::TooManySteps { .. }
        | Error::Physicality { .. }
        | Error::Io(_)
        | Error::RecordTooShort(_)
        | Error::Fit(_) => EXIT_INTEGRATION,
        _ => EXIT_CONFIG,
    }
}

pub fn run(cli: Cli) -> Outcome {
    let (command, args) = match cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
        Cmd::Wigner(a) => (Command::Wigner, a),
        Cmd::Rates(a) => (Command::Rates, a),
    };
    match dispatch(command, &args) {
        Ok(o) => o,
        Err(e) => Outcome { code: exit_code(&e), summary: format!("{}: failed: {e}", command.name()) },
    }
}

fn load(command: Command, args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_file_with(&args.config, command != Command::Wigner)?;
    if let Some(d) = &args.dims {
        cfg.apply_dims(d)?;
    }
    if let Some(t) = args.tol {
        cfg.apply_tol(t)?;
    }
    if let Some(g) = &args.grid {
        cfg.apply_grid(g)?;
    }
    Ok(cfg)
}

fn dispatch(command: Command, args: &RunArgs) -> Result<Outcome> {
    let cfg = load(command, args)?;
    fs::create_dir_all(&args.out)?;
    let out = args.out.as_path();
    write_manifest(out, command, &cfg, &[])?;
    match command {
        Command::Simulate => simulate(&cfg, out),
        Command::Sweep => sweep(&cfg, out),
        Command::Wigner => wigner(&cfg, out),
        Command::Rates => rates(&cfg, out),
    }
}

fn write_svg(out: &Path, name: &str, svg: String) -> Result<()> {
    fs::write(out.join(name), svg)?;
    Ok(())
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    match cfg.scenario {
        Scenario::Custom | Scenario::Fig2 => {}
        Scenario::FigS2 => return simulate_toy(cfg, out),
        s => return Err(Error::Config(format!("scenario '{}' is a sweep; use `catsim sweep`", s.name()))),
    }
    let p = cfg.params()?;
    let settings = cfg.run_settings();
    let run = run_cat(&p, cfg.model, &settings)?;
    write_run(cfg, out, &run)?;
    let s = &run.summary;
    let mut line = format!(
        "simulate: model={} W_min={} at gamma2_t={} max_fidelity={} (root {}) -> {}",
        cfg.model, fmt_f64(s.w_min), fmt_f64(s.gamma2_t_min), fmt_f64(s.fidelity_max),
        fmt_f64(s.root_fidelity_max), out.display()
    );
    if cfg.convergence_check {
        match convergence_check(&p, cfg.model, &settings, s.w_min, CONVERGENCE_TOL) {
            Ok(c) => {
                let mut t = CsvTable::new(&["n_cav", "n_mech", "w_min", "n_cav_enlarged", "n_mech_enlarged", "w_min_enlarged", "delta"]);
                t.push_nums(&[c.dims.0 as f64, c.dims.1 as f64, c.w_min, c.dims_enlarged.0 as f64,
                              c.dims_enlarged.1 as f64, c.w_min_enlarged, c.delta]);
                t.write(&out.join("convergence.csv"))?;
                line.push_str(&format!(" converged(dW={})", fmt_f64(c.delta)));
            }
            Err(e @ Error::Convergence { .. }) => {
                return Ok(Outcome { code: EXIT_CONVERGENCE, summary: format!("{line} convergence failed: {e}") });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Outcome { code: 0, summary: line })
}

fn write_run(cfg: &RunConfig, out: &Path, run: &CatRun) -> Result<()> {
    timeseries_table(&run.record).write(&out.join("timeseries.csv"))?;
    summary_table(run).write(&out.join("summary.csv"))?;
    for (k, (t, rho)) in run.snapshots.iter().enumerate() {
        let g = snapshot_grid(rho, &cfg.grid)?;
        wigner_table(&g).write(&out.join(format!("wigner_t{k}.csv")))?;
        info!("snapshot {k} at t = {t:e} s: min W = {}", g.min());
    }
    if cfg.plot {
        let rec = &run.record;
        let g2t = rec.series("gamma2_t").unwrap();
        let series = |name: &str| Series {
            label: name.to_string(),
            points: g2t.iter().copied().zip(rec.series(name).unwrap().iter().copied()).collect(),
        };
        write_svg(out, "w_min.svg", line_plot("W_min(t)", "Gamma2 t", "W_min", &[series("w_min")], false))?;
        write_svg(out, "occupation.svg",
            line_plot("occupation", "Gamma2 t", "<n>", &[series("n_mech"), series("n_cav")], false))?;
    }
    Ok(())
}

fn simulate_toy(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let settings = cfg.run_settings();
    let samples = (cfg.toy_t_end * cfg.toy_gamma2 * cfg.samples_per_unit as f64).ceil().max(1.0) as usize;
    let r = run_fig_s2(cfg.toy_gamma1, cfg.toy_gamma2, cfg.beta, cfg.toy_t_end, samples, &settings.evolve)?;
    fig_s2_table(&r).write(&out.join("figS2.csv"))?;
    if cfg.plot {
        let pts = |v: &[f64]| r.times.iter().copied().zip(v.iter().copied()).collect();
        write_svg(out, "figS2.svg", line_plot("toy model", "t", "W_min", &[
            Series { label: "numeric".into(), points: pts(&r.numeric_w_min) },
            Series { label: "approximate".into(), points: pts(&r.approx_w_min) },
        ], false))?;
    }
    let (kn, wn) = argmin(&r.numeric_w_min);
    let (ka, wa) = argmin(&r.approx_w_min);
    Ok(Outcome {
        code: 0,
        summary: format!(
            "simulate: figS2 numeric W_min={} at t={} approximate W_min={} at t={} -> {}",
            fmt_f64(wn), fmt_f64(r.times[kn]), fmt_f64(wa), fmt_f64(r.times[ka]), out.display()
        ),
    })
}

fn argmin(v: &[f64]) -> (usize, f64) {
    v.iter().copied().enumerate().fold((0, f64::INFINITY), |b, (k, x)| if x < b.1 { (k, x) } else { b })
}

fn axis_or(v: &[f64], default: impl FnOnce() -> Vec<f64>) -> Vec<f64> {
    if v.is_empty() { default() } else { v.to_vec() }
}

fn sweep(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let mut settings = cfg.run_settings();
    settings.snapshot_gamma2_t.clear();
    let base = cfg.hz.to_params();
    let result = match cfg.scenario {
        Scenario::Fig3 | Scenario::Fig2 | Scenario::Custom => {
            if cfg.scenario != Scenario::Fig3 && cfg.sweep.g0_over_kappa.is_empty() {
                return Err(Error::Config("sweep needs g0_over_kappa values for this scenario".into()));
            }
            let xs = axis_or(&cfg.sweep.g0_over_kappa, || fig3_default_g0_over_kappa(9));
            if cfg.model == ModelKind::Full && xs.len() > MAX_FULL_SWEEP_POINTS {
                return Err(Error::Config(format!(
                    "full-model sweeps are limited to {MAX_FULL_SWEEP_POINTS} points (got {})", xs.len()
                )));
            }
            let mut r = run_fig3(&base, &xs, cfg.model, &settings)?;
            if !cfg.sweep.fit {
                r.fit = None;
            }
            if let Some(fit) = &r.fit {
                fit_table(fit).write(&out.join("fit.csv"))?;
            }
            if cfg.plot {
                let pts = ok_points(&r, |a, w| (a[0], w / crate::experiments::w_plus(cfg.beta)));
                write_svg(out, "fig3.svg", line_plot("W_min / W+", "g0/kappa", "W_min/W+",
                    &[Series { label: cfg.model.to_string(), points: pts }], true))?;
            }
            r
        }
        Scenario::Fig3Inset => {
            let gammas = if cfg.sweep.gamma_hz.is_empty() {
                inset_gammas_for_ratios(&base, cfg.beta, &[1000.0, 100.0, 10.0, 1.0])?
            } else {
                cfg.sweep.gamma_hz.iter().map(|g| g * TWO_PI).collect()
            };
            let (r, curves) = run_fig3_inset(&base, &gammas, &settings)?;
            let mut t = CsvTable::new(&["gamma_over_2pi_hz", "t_seconds", "gamma2_t", "w_min"]);
            let mut series = Vec::new();
            for (g, c) in gammas.iter().zip(&curves) {
                if let Some(run) = c {
                    let g2t = run.record.series("gamma2_t").unwrap();
                    let w = run.record.series("w_min").unwrap();
                    for k in 0..run.record.len() {
                        t.push_nums(&[g / TWO_PI, run.record.times[k], g2t[k], w[k]]);
                    }
                    series.push(Series {
                        label: format!("Gamma/2pi={:.3e} Hz", g / TWO_PI),
                        points: g2t.iter().copied().zip(w.iter().copied()).filter(|p| p.0 > 0.0).collect(),
                    });
                }
            }
            t.write(&out.join("inset_curves.csv"))?;
            if cfg.plot {
                write_svg(out, "fig3_inset.svg", line_plot("W_min(t)", "Gamma2 t", "W_min", &series, true))?;
            }
            // report Γ in Hz on the axis
            let mut r = r;
            for pt in &mut r.points {
                pt.axes[0] /= TWO_PI;
            }
            r.axis_names = vec!["gamma_over_2pi_hz".into()];
            r
        }
        Scenario::Fig4 => {
            let xs = axis_or(&cfg.sweep.g0_over_kappa, || log_space(0.1, 10.0, 7));
            let ths: Vec<f64> = axis_or(&cfg.sweep.gamma_th_hz, || log_space(1e-3, 10.0, 7))
                .iter().map(|g| g * TWO_PI).collect();
            let r = run_fig4(&base, &xs, &ths, &settings)?;
            heatmap_table(&r).write(&out.join("heatmap.csv"))?;
            if cfg.plot {
                let grid: Vec<Vec<f64>> = (0..xs.len())
                    .map(|i| (0..ths.len()).map(|j| {
                        r.points[i * ths.len() + j].outcome.as_ref().map(|s| s.w_min).unwrap_or(f64::NAN)
                    }).collect())
                    .collect();
                let lx: Vec<f64> = xs.iter().map(|v| v.log10()).collect();
                let ly: Vec<f64> = ths.iter().map(|v| (v / TWO_PI).log10()).collect();
                write_svg(out, "fig4.svg", heatmap("W_min", "log10 g0/kappa", "log10 Gamma_th/2pi [Hz]", &lx, &ly, &grid))?;
            }
            let mut r = r;
            for pt in &mut r.points {
                pt.axes[1] /= TWO_PI;
            }
            r.axis_names = vec!["g0_over_kappa".into(), "gamma_th_over_2pi_hz".into()];
            r
        }
        Scenario::FigS3 => {
            let betas = axis_or(&cfg.sweep.betas, || (0..=10).map(f64::from).collect());
            let xs = axis_or(&cfg.sweep.g0_over_kappa, || vec![0.5, 10.0]);
            let r = run_fig_s3(&base, &betas, &xs, &settings)?;
            if cfg.plot {
                let series: Vec<Series> = xs.iter().map(|&x| Series {
                    label: format!("g0/kappa={x}"),
                    points: r.points.iter()
                        .filter(|pt| pt.axes[0] == x)
                        .filter_map(|pt| pt.outcome.as_ref().ok().map(|s| (pt.axes[1], s.w_min)))
                        .collect(),
                }).collect();
                write_svg(out, "figS3.svg", line_plot("W_min vs beta", "beta", "W_min", &series, false))?;
            }
            r
        }
        Scenario::FigS2 => return Err(Error::Config("figS2 is a single run; use `catsim simulate`".into())),
    };
    sweep_table(&result).write(&out.join("sweep.csv"))?;
    let failed = result.failures();
    let total = result.points.len();
    let mut line = format!("sweep: scenario={} points={total} failed={failed}", cfg.scenario.name());
    if let Some(f) = &result.fit {
        line.push_str(&format!(" C={} k={}", fmt_f64(f.c), fmt_f64(f.k)));
    }
    line.push_str(&format!(" -> {}", out.display()));
    let code = if 2 * failed > total { EXIT_INTEGRATION } else { 0 };
    if failed > 0 {
        warn!("{failed} of {total} sweep points failed");
    }
    Ok(Outcome { code, summary: line })
}

fn ok_points(r: &SweepResult, f: impl Fn(&[f64], f64) -> (f64, f64)) -> Vec<(f64, f64)> {
    r.points.iter().filter_map(|pt| pt.outcome.as_ref().ok().map(|s| f(&pt.axes, s.w_min))).collect()
}

fn wigner(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let w = &cfg.wigner;
    let beta = C64::new(cfg.beta, 0.0);
    let grid: WignerGrid = match w.form {
        WignerForm::Cat => wigner_cat_analytic(&CatSpec::new(beta, w.parity)?, &cfg.grid)?,
        WignerForm::Mixture => wigner_mixture(beta, &cfg.grid),
        WignerForm::Decohered => wigner_decohered(
            &DecoherenceSpec { beta, parity: w.parity, gamma1: w.gamma1, nth: w.nth }, w.t, &cfg.grid)?,
        WignerForm::Approx => wigner_approx_re(cfg.beta, w.gamma1, w.gamma2, w.t, &cfg.grid)?,
    };
    wigner_table(&grid).write(&out.join("wigner.csv"))?;
    if w.line_cut {
        line_cut_table(&grid).write(&out.join("line_cut.csv"))?;
    }
    if cfg.plot {
        let lx = grid.x.clone();
        let rows: Vec<Vec<f64>> = (0..grid.x.len()).map(|i| grid.values.row(i).to_vec()).collect();
        write_svg(out, "wigner.svg", heatmap(&format!("W ({})", w.form.name()), "x", "p", &lx, &grid.p, &rows))?;
    }
    let neg = negativity(&grid);
    Ok(Outcome {
        code: 0,
        summary: format!(
            "wigner: form={} min={} (refined {} at x={}, p={}) max={} integral={} -> {}",
            w.form.name(), fmt_f64(grid.min()), fmt_f64(neg.w_min), fmt_f64(neg.x), fmt_f64(neg.p),
            fmt_f64(grid.max()), fmt_f64(grid.integral()), out.display()
        ),
    })
}

fn rates(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let p = cfg.params()?;
    let r = derive_rates(&p, cfg.regime)?;
    rates_table(&r).write(&out.join("rates.csv"))?;
    Ok(Outcome {
        code: 0,
        summary: format!(
            "rates: gamma2/gamma1={} beta_de={} gamma2/2pi={} Hz -> {}",
            fmt_f64(r.gamma2 / r.gamma1), fmt_f64(r.beta_de), fmt_f64(r.gamma2 / TWO_PI), out.display()
        ),
    })
}
