//! Acceptance criteria AC1 to AC11. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any of them fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use catsim::dynamics::{evolve_with, EvolveOptions, Flow, IntegrationStats};
use catsim::experiments::*;
use catsim::fock::{cat_state, coherent_state, CatSpec, DensityMatrix, FockSpace, MECH};
use catsim::models::*;
use catsim::wigner::*;
use catsim::C64;
use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Runs one criterion, adds the runtime bound to its verdict and prints the line.
/// `ACCEPTANCE_ONLY=3,7` restricts the run to the listed criteria.
fn check<F: FnOnce() -> Verdict>(id: usize, limit_s: f64, f: F) -> bool {
    if let Ok(only) = std::env::var("ACCEPTANCE_ONLY") {
        if !only.split(',').any(|s| s.trim() == id.to_string()) {
            println!("AC{id} SKIP");
            return true;
        }
    }
    let start = Instant::now();
    let v = f();
    let secs = start.elapsed().as_secs_f64();
    let pass = v.pass && secs < limit_s;
    println!("AC{id} {} {} runtime={secs:.1}s (limit {limit_s}s)", if pass { "PASS" } else { "FAIL" }, v.detail);
    pass
}

fn within(v: f64, target: f64, tol: f64) -> bool {
    (v - target).abs() <= tol
}

fn physical(stats: &IntegrationStats) -> bool {
    stats.max_trace_drift < 1e-8 && stats.max_hermiticity < 1e-10 && stats.min_eigenvalue >= -1e-8
}

fn ac1() -> Verdict {
    let odd = cat_wigner_point(&CatSpec::odd(2.0), 0.0, 0.0);
    let (even, _) = even_cat_negativity(2.0);
    verdict(
        within(odd, -2.0 / PI, 1e-9) && within(even, -0.476, 1e-3),
        format!("odd W(0,0)={odd:.12} even min={even:.6}"),
    )
}

fn ac2() -> Verdict {
    let space = FockSpace::single(MECH, 40).unwrap();
    let spec = CatSpec::even(2.0);
    let rho = DensityMatrix::from_pure(&cat_state(&space, &spec).unwrap());
    let grid = GridSpec::default_for_beta(2.0);
    let num = wigner_numeric(&rho, &grid).unwrap();
    let ana = wigner_cat_analytic(&spec, &grid).unwrap();
    let sup = (&num.values - &ana.values).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    verdict(sup < 1e-6, format!("sup-norm={sup:.3e}"))
}

fn fig2_check(run: &CatRun, w: (f64, f64), t: (f64, f64), f: (f64, f64)) -> (bool, String) {
    let s = &run.summary;
    let ok = within(s.w_min, w.0, w.1) && within(s.gamma2_t_min, t.0, t.1) && within(s.root_fidelity_max, f.0, f.1);
    (ok, format!(
        "W_min={:.5} at G2t={:.3} root fidelity={:.4} (overlap {:.4})",
        s.w_min, s.gamma2_t_min, s.root_fidelity_max, s.fidelity_max
    ))
}

fn ac3(stats: &mut Vec<(String, IntegrationStats)>, n_mech: &mut f64) -> Verdict {
    let run = run_fig2(ModelKind::Reduced, &RunSettings::for_model(ModelKind::Reduced)).unwrap();
    stats.push(("AC3".into(), run.summary.stats.clone()));
    *n_mech = run.summary.final_n_mech;
    let (ok, d) = fig2_check(&run, (-0.455, 0.010), (1.6, 0.3), (0.991, 0.005));
    verdict(ok, d)
}

fn ac4(stats: &mut Vec<(String, IntegrationStats)>, reduced_n_mech: f64) -> Verdict {
    let run = match run_fig2(ModelKind::Full, &RunSettings::for_model(ModelKind::Full)) {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("run failed: {e}")),
    };
    stats.push(("AC4".into(), run.summary.stats.clone()));
    let (ok, d) = fig2_check(&run, (-0.401, 0.015), (3.9, 0.5), (0.956, 0.010));
    let n_cav = run.summary.final_n_cav;
    // late-time cross-check of the mechanical occupation against the reduced model
    let n_mech = run.summary.final_n_mech;
    let cross = reduced_n_mech.is_nan() || (n_mech / reduced_n_mech - 1.0).abs() < 0.05;
    verdict(ok && n_cav < 0.02 && cross, format!(
        "{d} late n_cav={n_cav:.4} late n_mech={n_mech:.4} (reduced {reduced_n_mech:.4})"
    ))
}

fn ac5(stats: &mut Vec<(String, IntegrationStats)>) -> Verdict {
    let mut xs = fig3_default_g0_over_kappa(9);
    xs.push(10.0);
    xs.sort_by(f64::total_cmp);
    let res = run_fig3(&SystemParams::fig2(), &xs, ModelKind::Reduced, &RunSettings::default()).unwrap();
    let mut ok = res.failures() == 0;
    let at = |x: f64| -> Option<f64> {
        let pt = res.points.iter().find(|p| p.axes[0] == x)?;
        pt.outcome.as_ref().ok().map(|s| s.w_min)
    };
    let w10 = at(10.0).unwrap_or(f64::NAN);
    let w03 = at(xs[0]).unwrap_or(f64::NAN);
    for p in &res.points {
        if let Ok(s) = &p.outcome {
            stats.push((format!("AC5 g0/kappa={:.3}", p.axes[0]), s.stats.clone()));
        }
    }
    let ratio = w10 / w_plus(2.0);
    ok &= ratio > 0.95 && w03 < 0.0;
    let d = match &res.fit {
        Some(f) => {
            ok &= within(f.c, 1.0 / 3.0, 0.1) && within(f.k, -0.25, 0.1);
            format!("C={:.4} k={:.4} ({} points)", f.c, f.k, f.n_used)
        }
        None => {
            ok = false;
            "fit failed".into()
        }
    };
    verdict(ok, format!("{d} W_min/W+ at 10 = {ratio:.4} W_min at {:.1} = {w03:.3e}", xs[0]))
}

fn ac6(stats: &mut Vec<(String, IntegrationStats)>, parity_drift: &mut f64) -> Verdict {
    let (gamma2, beta) = (1.0, 2.0);
    let eps2 = toy_eps2_for_beta(gamma2, beta);
    let size = (2.0 * eps2.norm() / gamma2).sqrt();
    let space = FockSpace::single(MECH, default_n_mech(size)).unwrap();
    let model = build_toy_model(&space, 0.0, gamma2, eps2, 0.0).unwrap();
    let target = cat_state(&space, &CatSpec::new(toy_beta(gamma2, eps2), catsim::fock::Parity::Even).unwrap()).unwrap();
    let times: Vec<f64> = (0..=600).map(|k| 6.0 * k as f64 / 600.0 / gamma2).collect();
    let mut fid = 0.0;
    let mut drift = 0.0f64;
    let st = evolve_with(&model, &DensityMatrix::vacuum(&space), &times, &EvolveOptions::default(), |_, rho| {
        fid = rho.fidelity(&target)?;
        drift = drift.max((rho.parity_expectation(MECH)? - 1.0).abs());
        Ok(Flow::Continue)
    })
    .unwrap();
    stats.push(("AC6".into(), st));
    *parity_drift = drift;
    verdict(fid > 0.99, format!("fidelity at G2t=6 = {fid:.6} (size {size:.3})"))
}

fn mixture(space: &FockSpace, beta: f64) -> DensityMatrix {
    let a = DensityMatrix::from_pure(&coherent_state(space, C64::new(beta, 0.0)).unwrap());
    let b = DensityMatrix::from_pure(&coherent_state(space, C64::new(-beta, 0.0)).unwrap());
    DensityMatrix::from_matrix(space, (a.data() + b.data()) * C64::new(0.5, 0.0)).unwrap()
}

// Least-squares slope of ln V(t).
fn fringe_rate(beta: f64, gamma1: f64, nth: f64) -> f64 {
    let space = FockSpace::single(MECH, 50).unwrap();
    let model = build_toy_model(&space, gamma1, 0.0, C64::new(0.0, 0.0), nth).unwrap();
    let cat = DensityMatrix::from_pure(&cat_state(&space, &CatSpec::even(beta)).unwrap());
    let mix = mixture(&space, beta);
    let times: Vec<f64> = (0..=10).map(|k| 0.001 * k as f64 / gamma1).collect();
    let opts = EvolveOptions { rtol: 1e-10, atol: 1e-13, ..Default::default() };
    let collect = |rho0: &DensityMatrix| {
        let mut out = Vec::new();
        evolve_with(&model, rho0, &times, &opts, |_, rho| {
            out.push(rho.clone());
            Ok(Flow::Continue)
        })
        .unwrap();
        out
    };
    let (cats, mixes) = (collect(&cat), collect(&mix));
    let norm = 1.0 + (-2.0 * beta * beta).exp();
    let y: Vec<f64> = cats.iter().zip(&mixes)
        .map(|(c, m)| fringe_visibility(c, m, norm, beta).unwrap().ln())
        .collect();
    let n = times.len() as f64;
    let (mt, my) = (times.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = times.iter().zip(&y).map(|(t, v)| (t - mt) * (v - my)).sum();
    let sxx: f64 = times.iter().map(|t| (t - mt).powi(2)).sum();
    -sxy / sxx
}

fn ac7() -> Verdict {
    let (beta, gamma1) = (2.0, 1.0);
    let mut ok = true;
    let mut parts = Vec::new();
    for nth in [0.0, 1.0] {
        let rate = fringe_rate(beta, gamma1, nth);
        let expected = 2.0 * beta * beta * gamma1 * (2.0 * nth + 1.0);
        let rel = (rate / expected - 1.0).abs();
        ok &= rel < 0.05;
        parts.push(format!("nth={nth}: rate={rate:.4} expected={expected} rel={rel:.2e}"));
    }
    verdict(ok, parts.join("; "))
}

fn ac8() -> Verdict {
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let omega_m = TWO_PI * 10f64.powf(rng.gen_range(5.0..8.0));
        let p = SystemParams {
            g0: TWO_PI * 10f64.powf(rng.gen_range(1.0..6.0)),
            omega_m,
            gamma: TWO_PI * 10f64.powf(rng.gen_range(-1.0..3.0)),
            kappa: omega_m * 10f64.powf(rng.gen_range(-4.0..-1.0)),
            nbar_b: rng.gen_range(0.0..100.0),
            n_p: 10f64.powf(rng.gen_range(-2.0..3.0)),
            ..SystemParams::fig2()
        };
        let r = derive_rates(&p, Regime::SidebandResolved).unwrap();
        let e1 = (r.gamma2 / r.gamma1 / (2.0 * p.g0 / p.kappa).powi(2) - 1.0).abs();
        let e2 = (r.delta_w2 / r.delta_w1 / (3.0 * p.g0 / (4.0 * p.omega_m)).powi(2) - 1.0).abs();
        worst = (worst.0.max(e1), worst.1.max(e2));
    }
    verdict(worst.0 < 1e-12 && worst.1 < 1e-12, format!("max rel error G2/G1={:.2e} dw2/dw1={:.2e}", worst.0, worst.1))
}

fn ac9(stats: &[(String, IntegrationStats)], parity_drift: f64) -> Verdict {
    let bad: Vec<&str> = stats.iter().filter(|(_, s)| !physical(s)).map(|(n, _)| n.as_str()).collect();
    let trace = stats.iter().map(|s| s.1.max_trace_drift).fold(0.0, f64::max);
    let herm = stats.iter().map(|s| s.1.max_hermiticity).fold(0.0, f64::max);
    let eig = stats.iter().map(|s| s.1.min_eigenvalue).fold(f64::INFINITY, f64::min);
    verdict(
        bad.is_empty() && !stats.is_empty() && parity_drift < 1e-6,
        format!(
            "{} runs, trace drift={trace:.2e} hermiticity={herm:.2e} min eigenvalue={eig:.2e} parity drift={parity_drift:.2e}{}",
            stats.len(),
            if bad.is_empty() { String::new() } else { format!(" violations in {bad:?}") }
        ),
    )
}

fn ac10() -> Verdict {
    let r = run_fig_s2(0.1, 1.0, 2.0, 10.0, 600, &EvolveOptions::default()).unwrap();
    let argmin = |v: &[f64]| v.iter().copied().enumerate().fold((0, f64::INFINITY), |b, (k, x)| if x < b.1 { (k, x) } else { b });
    let (kn, wn) = argmin(&r.numeric_w_min);
    let (ka, wa) = argmin(&r.approx_w_min);
    let (tn, ta) = (r.times[kn], r.times[ka]);
    let depth = (wa / wn - 1.0).abs();
    let time = (ta / tn - 1.0).abs();
    verdict(depth <= 0.2 && time <= 0.4, format!(
        "numeric {wn:.4} at t={tn:.3}, approximate {wa:.4} at t={ta:.3}: depth {:.1}% time {:.1}%",
        100.0 * depth, 100.0 * time
    ))
}

fn ac11() -> Verdict {
    let betas: Vec<f64> = (1..=10).map(f64::from).collect();
    let res = run_fig_s3(&SystemParams::fig2(), &betas, &[0.5, 10.0], &RunSettings::default()).unwrap();
    let curve = |x: f64| -> Vec<f64> {
        res.points.iter()
            .filter(|p| p.axes[0] == x)
            .map(|p| p.outcome.as_ref().map(|s| s.w_min).unwrap_or(f64::NAN))
            .collect()
    };
    let (low, high) = (curve(0.5), curve(10.0));
    let fmt = |v: &[f64]| v.iter().map(|w| format!("{w:.4}")).collect::<Vec<_>>().join(" ");
    // turning back toward zero: some value after the minimum is higher by more than noise
    let k_min = low.iter().copied().enumerate().fold((0, f64::INFINITY), |b, (k, x)| if x < b.1 { (k, x) } else { b }).0;
    let turns = low[k_min + 1..].iter().any(|w| *w > low[k_min] + 1e-4);
    let decreasing = high.windows(2).all(|w| w[1] < w[0]);
    let bounded = high.iter().all(|w| *w >= -2.0 / PI - 1e-3);
    let ok = res.failures() == 0 && turns && decreasing && bounded;
    verdict(ok, format!(
        "g0/kappa=0.5 non-monotone={turns} [{}]; g0/kappa=10 decreasing={decreasing} above -2/pi={bounded} [{}]",
        fmt(&low), fmt(&high)
    ))
}

fn main() -> ExitCode {
    let mut stats = Vec::new();
    let mut parity_drift = f64::NAN;
    let mut reduced_n_mech = f64::NAN;
    let results = [
        check(1, 1.0, ac1),
        check(2, 10.0, ac2),
        check(3, 60.0, || ac3(&mut stats, &mut reduced_n_mech)),
        check(4, 3600.0, || ac4(&mut stats, reduced_n_mech)),
        check(5, 900.0, || ac5(&mut stats)),
        check(6, 30.0, || ac6(&mut stats, &mut parity_drift)),
        check(7, f64::INFINITY, ac7),
        check(8, f64::INFINITY, ac8),
        check(9, f64::INFINITY, || ac9(&stats, parity_drift)),
        check(10, 60.0, ac10),
        check(11, 1800.0, ac11),
    ];
    let failed: Vec<String> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(k, _)| format!("AC{}", k + 1)).collect();
    if failed.is_empty() {
        println!("acceptance: all 11 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
