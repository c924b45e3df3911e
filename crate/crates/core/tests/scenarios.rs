use catsim::experiments::*;
use catsim::models::{SystemParams, TWO_PI};

fn w_min(r: &SweepResult, k: usize) -> f64 {
    r.points[k].outcome.as_ref().unwrap().w_min
}

#[test]
fn thermal_map_has_a_plateau_and_decays_with_gamma_th() {
    let ths: Vec<f64> = [1e-3, 1e-2, 1.0, 10.0].iter().map(|g| g * TWO_PI).collect();
    let r = run_fig4(&SystemParams::fig4(), &[3.0], &ths, &RunSettings::default()).unwrap();
    assert_eq!(r.failures(), 0);
    let w: Vec<f64> = (0..4).map(|k| w_min(&r, k)).collect();
    // weaker negativity with more thermal decoherence
    assert!(w.windows(2).all(|p| p[1] > p[0]), "{w:?}");
    // left side flat: the first decade changes W_min far less than the last
    assert!((w[1] - w[0]).abs() < 0.1 * (w[3] - w[0]).abs(), "{w:?}");
    assert!(w[0] < -0.1);
}

#[test]
fn inset_negativity_recoheres_on_the_linear_timescale() {
    let base = SystemParams { kappa: TWO_PI * 10e3, ..SystemParams::fig2() };
    let gammas = inset_gammas_for_ratios(&base, 2.0, &[100.0, 1.0]).unwrap();
    let (r, curves) = run_fig3_inset(&base, &gammas, &RunSettings::default()).unwrap();
    assert_eq!(r.failures(), 0);
    // stronger linear damping, shallower minimum
    assert!(w_min(&r, 0) < w_min(&r, 1));
    assert!(w_min(&r, 0) < -0.4);
    for c in &curves {
        let w = c.as_ref().unwrap().record.series("w_min").unwrap();
        let last = *w.last().unwrap();
        assert!(last > 0.5 * c.as_ref().unwrap().summary.w_min, "no recovery: {last}");
    }
}

#[test]
fn cat_size_sweep_handles_vacuum_and_small_cats() {
    let r = run_fig_s3(&SystemParams::fig2(), &[0.0, 1.0, 2.0], &[10.0], &RunSettings::default()).unwrap();
    assert_eq!(r.failures(), 0);
    assert_eq!(w_min(&r, 0), 0.0);
    assert!(w_min(&r, 2) < w_min(&r, 1) && w_min(&r, 1) < 0.0);
    assert!(run_fig_s3(&SystemParams::fig2(), &[2.0, 1.0, 3.0], &[10.0], &RunSettings::default()).is_err());
}

#[test]
fn full_model_starts_filling_the_mechanics() {
    let s = RunSettings { t_end_gamma2: 0.5, samples_per_unit: 20, ..RunSettings::for_model(ModelKind::Full) };
    let full = run_fig2(ModelKind::Full, &s).unwrap();
    let n = full.record.series("n_mech").unwrap();
    assert_eq!(n[0], 0.0);
    assert!(n.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    assert!(full.summary.final_n_mech > 0.1);
    assert!(full.summary.final_n_cav > 0.0 && full.summary.final_n_cav < 1.0);
}
