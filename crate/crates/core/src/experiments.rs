//! Figure scenarios: time evolutions from the ground state, parameter sweeps
//! and fits.

use log::{ info, warn };
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use crate::dynamics::{
    evolve_with, EvolveOptions, Flow, Frame, IntegrationStats, ModelSpec, TimeSeriesRecord,
};
use crate::error::{ Error, Result };
use crate::fock::{ cat_state, CatSpec, DensityMatrix, FockSpace, StateVector, CAVITY, MECH };
use crate::models::{
    build_full_model, build_reduced_model, build_toy_model, derive_rates, toy_eps2_for_beta,
    with_target_beta, DerivedRates, Regime, SystemParams,
};
use crate::wigner::{
    approx_re_point, even_cat_negativity, fit_c_k, min_wigner, min_wigner_near, min_with, CkFit, GridSpec,
    MinSearch, WignerKernel,
};

pub const TIMESERIES_COLUMNS: [&str; 7] =
    ["t_seconds", "gamma2_t", "n_cav", "n_mech", "parity", "w_min", "fidelity_even_cat"];

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Full,
    Reduced,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(ModelKind::Full),
            "reduced" => Ok(ModelKind::Reduced),
            other => Err(Error::InvalidParameter(format!("unknown model '{other}'"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Full => "full",
            ModelKind::Reduced => "reduced",
        })
    }
}

/// Stop once the negativity has recovered to `fraction` of its running
/// minimum (after a minimum below `−threshold` was seen).
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct EarlyStop {
    pub fraction: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug)]
pub struct RunSettings {
    pub n_cav: usize,
    /// Mechanical truncation; `None` picks the truncation guard plus margin.
    pub n_mech: Option<usize>,
    pub evolve: EvolveOptions,
    /// Horizon in units of `1/Γ₂`.
    pub t_end_gamma2: f64,
    pub samples_per_unit: usize,
    /// Past this many `1/Γ₂`, sample at the given (lower) rate per unit.
    pub coarse_after: Option<(f64, usize)>,
    /// Snapshot times in units of `1/Γ₂`.
    pub snapshot_gamma2_t: Vec<f64>,
    pub early_stop: Option<EarlyStop>,
    pub beta: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            n_cav: 6,
            n_mech: None,
            evolve: EvolveOptions::default(),
            t_end_gamma2: 6.0,
            samples_per_unit: 60,
            coarse_after: None,
            snapshot_gamma2_t: Vec::new(),
            early_stop: None,
            beta: 2.0,
        }
    }
}

impl RunSettings {
    /// Defaults for `kind`. The two-mode model needs a tighter absolute
    /// tolerance to keep every sampled state positive to 1e-8 at dimension 210.
    pub fn for_model(kind: ModelKind) -> Self {
        let mut s = Self::default();
        if kind == ModelKind::Full {
            s.evolve.atol = 1e-12;
        }
        s
    }
}

/// Mechanical truncation used when none is given: 10% above the guard for
/// `β`, and at least 35.
pub fn default_n_mech(beta: f64) -> usize {
    let guard = crate::fock::truncation_guard(beta);
    ((guard as f64 * 1.1).ceil() as usize).max(35)
}

#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub w_min: f64,
    pub t_min: f64,
    pub gamma2_t_min: f64,
    pub fidelity_max: f64,
    /// `sqrt(fidelity_max)`, the Uhlmann (root) fidelity with the pure target.
    pub root_fidelity_max: f64,
    pub gamma2_t_fidelity_max: f64,
    pub final_parity: f64,
    pub final_n_mech: f64,
    pub final_n_cav: f64,
    pub n_cav: usize,
    pub n_mech: usize,
    pub stats: IntegrationStats,
}

#[derive(Clone, Debug)]
pub struct CatRun {
    pub kind: ModelKind,
    pub params: SystemParams,
    pub rates: DerivedRates,
    pub record: TimeSeriesRecord,
    /// Mechanical snapshots `(t, ρ_b)` in the frame rotating at `ω̃_m`.
    pub snapshots: Vec<(f64, DensityMatrix)>,
    pub summary: RunSummary,
}

/// Whether `ρ` commutes with phonon parity, so that `W(−α) = W(α)`.
pub fn has_parity_symmetry(rho: &DensityMatrix) -> bool {
    let d = rho.data();
    let n = rho.dim();
    let scale = d.iter().map(|v| v.norm()).fold(0.0, f64::max);
    (0..n).all(|i| (0..n).all(|j| (i + j) % 2 == 0 || d[[i, j]].norm() <= 1e-13 * scale))
}

/// Negativity tracker for a mechanical state.
pub fn track_w_min(rho: &DensityMatrix, search: &MinSearch) -> Result<f64> {
    Ok(min_wigner(rho, search, has_parity_symmetry(rho))?.w_min.min(0.0))
}

/// Follows the Wigner minimum along a trajectory: a local search around the
/// previous minimizer at every sample and a full window scan every
/// `full_every` samples.
#[derive(Clone, Debug)]
pub struct MinTracker {
    pub search: MinSearch,
    pub full_every: usize,
    last: Option<(f64, f64)>,
    calls: usize,
}

impl MinTracker {
    pub fn new(search: MinSearch, full_every: usize) -> Self {
        Self { search, full_every: full_every.max(1), last: None, calls: 0 }
    }

    pub fn next(&mut self, rho: &DensityMatrix) -> Result<f64> {
        let full = self.calls % self.full_every == 0 || self.last.is_none();
        self.calls += 1;
        let mut n = match self.last {
            Some(c) => min_wigner_near(rho, &self.search, c, 3)?,
            None => min_wigner(rho, &self.search, has_parity_symmetry(rho))?,
        };
        if full && self.last.is_some() {
            let g = min_wigner(rho, &self.search, has_parity_symmetry(rho))?;
            if g.w_min < n.w_min {
                n = g;
            }
        }
        self.last = Some((n.x, n.p));
        Ok(n.w_min.min(0.0))
    }
}

/// Evolves from the ground state with `p` (whose `eps_d` is already set) and
/// records the timeseries columns of [`TIMESERIES_COLUMNS`].
pub fn run_cat(p: &SystemParams, kind: ModelKind, settings: &RunSettings) -> Result<CatRun> {
    let rates = derive_rates(p, Regime::SidebandResolved)?;
    if rates.gamma2 <= 0.0 {
        return Err(Error::InvalidParameter("two-phonon rate is zero (no pump)".into()));
    }
    let beta = rates.beta_de;
    let n_mech = settings.n_mech.unwrap_or_else(|| default_n_mech(beta));
    let (model, opts) = match kind {
        ModelKind::Reduced => (build_reduced_model(p, n_mech)?, settings.evolve.clone()),
        ModelKind::Full => (
            build_full_model(p, settings.n_cav, n_mech)?,
            EvolveOptions { frame: Frame::Interaction, ..settings.evolve.clone() },
        ),
    };
    let mech_space = FockSpace::single(MECH, n_mech)?;
    let target = cat_state(&mech_space, &CatSpec::even(beta))?;
    let times = sample_times(settings.t_end_gamma2, settings.samples_per_unit, rates.gamma2);
    let times = match settings.coarse_after {
        Some((u0, spu)) if u0 < settings.t_end_gamma2 => {
            let t0 = u0 / rates.gamma2;
            let mut t: Vec<f64> = times.into_iter().filter(|&t| t <= t0).collect();
            let tail = sample_times(settings.t_end_gamma2 - u0, spu, rates.gamma2);
            t.extend(tail.into_iter().skip(1).map(|s| t0 + s));
            t
        }
        _ => times,
    };
    let rho0 = DensityMatrix::vacuum(model.space());
    run_from(&model, &rho0, &times, &opts, kind, p, rates, &target, settings)
}

/// Sample times `k/(spu·Γ₂)` up to `units/Γ₂`, the last one clipped to the
/// horizon. A shorter horizon gives a prefix of a longer one.
pub fn sample_times(units: f64, samples_per_unit: usize, gamma2: f64) -> Vec<f64> {
    let spu = samples_per_unit.max(1) as f64;
    let n = (units * spu).ceil().max(1.0) as usize;
    let mut t: Vec<f64> = (0..=n).map(|k| k as f64 / spu / gamma2).collect();
    let end = units / gamma2;
    if let Some(last) = t.last_mut() {
        *last = end;
    }
    if t.len() > 2 && t[t.len() - 2] >= end {
        t.remove(t.len() - 2);
    }
    t
}

#[allow(clippy::too_many_arguments)]
fn run_from(
    model: &ModelSpec,
    rho0: &DensityMatrix,
    times: &[f64],
    opts: &EvolveOptions,
    kind: ModelKind,
    p: &SystemParams,
    rates: DerivedRates,
    target: &StateVector,
    settings: &RunSettings,
) -> Result<CatRun> {
    let mut tracker = MinTracker::new(MinSearch::for_beta(rates.beta_de.max(settings.beta)), 8);
    let mut record = TimeSeriesRecord::new(TIMESERIES_COLUMNS[1..].iter().map(|s| s.to_string()).collect());
    let mut snapshots = Vec::new();
    let snap_t: Vec<f64> = settings.snapshot_gamma2_t.iter().map(|u| u / rates.gamma2).collect();
    let mut best = f64::INFINITY;
    let omega = rates.omega_m_dressed;
    let tol_t = 1e-9 * times.last().copied().unwrap_or(1.0);
    let stats = evolve_with(model, rho0, times, opts, |t, rho| {
        let (mech, n_cav) = match kind {
            ModelKind::Reduced => (rho.clone(), 0.0),
            ModelKind::Full => {
                let m = rho.partial_trace(MECH)?.rotate_mode(MECH, omega * t)?;
                (m, rho.mean_occupation(CAVITY)?)
            }
        };
        let w = tracker.next(&mech)?;
        let row = [
            rates.gamma2 * t,
            n_cav,
            mech.mean_occupation(MECH)?,
            mech.parity_expectation(MECH)?,
            w,
            mech.fidelity(target)?,
        ];
        record.push(t, &row);
        if snap_t.iter().any(|s| (s - t).abs() <= tol_t) {
            snapshots.push((t, mech));
        }
        best = best.min(w);
        if let Some(es) = settings.early_stop {
            if best < -es.threshold && w > es.fraction * best {
                return Ok(Flow::Stop);
            }
        }
        Ok(Flow::Continue)
    })?;
    record.stats = stats.clone();
    let summary = summarize(&record, &rates, settings.n_cav, target.space().total_dim(), stats, kind);
    Ok(CatRun { kind, params: p.clone(), rates, record, snapshots, summary })
}

fn summarize(
    rec: &TimeSeriesRecord,
    rates: &DerivedRates,
    n_cav: usize,
    n_mech: usize,
    stats: IntegrationStats,
    kind: ModelKind,
) -> RunSummary {
    let w = rec.series("w_min").unwrap();
    let f = rec.series("fidelity_even_cat").unwrap();
    let (iw, &w_min) = w.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let (jf, &fidelity_max) = f.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let last = rec.len() - 1;
    RunSummary {
        w_min,
        t_min: rec.times[iw],
        gamma2_t_min: rec.times[iw] * rates.gamma2,
        fidelity_max,
        root_fidelity_max: fidelity_max.sqrt(),
        gamma2_t_fidelity_max: rec.times[jf] * rates.gamma2,
        final_parity: rec.series("parity").unwrap()[last],
        final_n_mech: rec.series("n_mech").unwrap()[last],
        final_n_cav: rec.series("n_cav").unwrap()[last],
        n_cav: if kind == ModelKind::Full { n_cav } else { 0 },
        n_mech,
        stats,
    }
}

/// `fig2` scenario: evolution toward an even cat of size `settings.beta` at the
/// reference parameters.
pub fn run_fig2(kind: ModelKind, settings: &RunSettings) -> Result<CatRun> {
    let p = with_target_beta(&SystemParams::fig2(), settings.beta)?;
    run_cat(&p, kind, settings)
}

/// One point of a sweep. Failed points keep their axis values and an error
/// message.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub axes: Vec<f64>,
    pub outcome: std::result::Result<RunSummary, String>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub axis_names: Vec<String>,
    pub points: Vec<SweepPoint>,
    pub fit: Option<CkFit>,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.outcome.is_err()).count()
    }
}

fn run_points<F>(axis_names: &[&str], axes: Vec<Vec<f64>>, f: F) -> SweepResult
where F: Fn(&[f64]) -> Result<RunSummary> + Sync
{
    let points: Vec<SweepPoint> = axes.par_iter()
        .map(|a| {
            let outcome = f(a).map_err(|e| {
                warn!("sweep point {a:?} failed: {e}");
                e.to_string()
            });
            SweepPoint { axes: a.clone(), outcome }
        })
        .collect();
    SweepResult { axis_names: axis_names.iter().map(|s| s.to_string()).collect(), points, fit: None }
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// Default `fig3` points: g₀/κ log-spaced over `[0.3, 30]`.
pub fn fig3_default_g0_over_kappa(n: usize) -> Vec<f64> { log_space(0.3, 30.0, n) }

/// Negativity of the ideal even cat of size `beta` (`W₊`).
pub fn w_plus(beta: f64) -> f64 { even_cat_negativity(beta).0 }

fn sweep_settings(base: &RunSettings) -> RunSettings {
    RunSettings {
        t_end_gamma2: base.t_end_gamma2.max(10.0),
        early_stop: base.early_stop.or(Some(EarlyStop { fraction: 0.5, threshold: 1e-3 })),
        ..base.clone()
    }
}

/// `fig3` scenario: W_min against g₀/κ with `κ = g₀/x` varied from `base`,
/// and a fit of C and k.
pub fn run_fig3(base: &SystemParams, g0_over_kappa: &[f64], kind: ModelKind, settings: &RunSettings) -> Result<SweepResult> {
    check_monotone(g0_over_kappa, "g0_over_kappa")?;
    let s = sweep_settings(settings);
    let mut res = run_points(&["g0_over_kappa"], g0_over_kappa.iter().map(|&g| vec![g]).collect(), |a| {
        let p = with_target_beta(&SystemParams { kappa: base.g0 / a[0], ..base.clone() }, s.beta)?;
        Ok(run_cat(&p, kind, &s)?.summary)
    });
    let pts: Vec<(f64, f64)> = res.points.iter()
        .filter_map(|pt| pt.outcome.as_ref().ok().map(|s| (pt.axes[0], s.w_min)))
        .collect();
    res.fit = match fit_c_k(&pts, C64::new(s.beta, 0.0), w_plus(s.beta)) {
        Ok(f) => Some(f),
        Err(e) => {
            warn!("C/k fit failed: {e}");
            None
        }
    };
    Ok(res)
}

/// Inset horizon in units of `1/Γ_lin`, and its cap in units of `1/Γ₂`.
pub const INSET_HORIZON_LIN: f64 = 4.0;
pub const INSET_MAX_UNITS: f64 = 1000.0;

/// `Γ` values giving the requested `Γ₂/Γ_lin` ratios around `base` (whose
/// drive is re-derived for `beta`).
pub fn inset_gammas_for_ratios(base: &SystemParams, beta: f64, ratios: &[f64]) -> Result<Vec<f64>> {
    let p = with_target_beta(base, beta)?;
    // rates with negligible intrinsic damping (zero is rejected by validation)
    let r = derive_rates(&SystemParams { gamma: f64::MIN_POSITIVE, ..p }, Regime::SidebandResolved)?;
    ratios.iter()
        .map(|&q| {
            let g = (r.gamma2 / q - r.gamma_lin) / (base.nbar_b + 1.0);
            if g > 0.0 {
                Ok(g)
            } else {
                Err(Error::InvalidParameter(format!("Gamma2/Gamma_lin = {q} is unreachable (Gamma1 alone gives {})", r.gamma2 / r.gamma_lin)))
            }
        })
        .collect()
}

/// `fig3_inset` scenario: `base` (usually κ/2π = 10 kHz) with the intrinsic damping `Γ` varied. Returns the sweep and the full
/// W_min(t) curve of every point.
pub fn run_fig3_inset(base: &SystemParams, gammas: &[f64], settings: &RunSettings) -> Result<(SweepResult, Vec<Option<CatRun>>)> {
    check_monotone(gammas, "Gamma")?;
    let runs: Vec<(Vec<f64>, Result<CatRun>)> = gammas.par_iter()
        .map(|&g| {
            let r = (|| {
                let p = with_target_beta(&SystemParams { gamma: g, ..base.clone() }, settings.beta)?;
                let rates = derive_rates(&p, Regime::SidebandResolved)?;
                // long enough to see recoherence toward zero on 1/Γ_lin
                let units = (INSET_HORIZON_LIN * rates.gamma2 / rates.gamma_lin)
                    .clamp(settings.t_end_gamma2, INSET_MAX_UNITS);
                let s = RunSettings {
                    t_end_gamma2: units,
                    coarse_after: settings.coarse_after.or(Some((10.0, 4))),
                    ..settings.clone()
                };
                run_cat(&p, ModelKind::Reduced, &s)
            })();
            (vec![g], r)
        })
        .collect();
    let mut points = Vec::new();
    let mut curves = Vec::new();
    for (axes, r) in runs {
        match r {
            Ok(run) => {
                points.push(SweepPoint { axes, outcome: Ok(run.summary.clone()) });
                curves.push(Some(run));
            }
            Err(e) => {
                points.push(SweepPoint { axes, outcome: Err(e.to_string()) });
                curves.push(None);
            }
        }
    }
    Ok((SweepResult { axis_names: vec!["gamma".into()], points, fit: None }, curves))
}

/// `fig4` scenario: reduced-model W_min over a grid of g₀/κ and `Γ_th = (n̄_b + 1)Γ`
/// (rad/s) around `base`.
pub fn run_fig4(base: &SystemParams, g0_over_kappa: &[f64], gamma_th: &[f64], settings: &RunSettings) -> Result<SweepResult> {
    check_monotone(g0_over_kappa, "g0_over_kappa")?;
    check_monotone(gamma_th, "gamma_th")?;
    let s = sweep_settings(settings);
    let axes: Vec<Vec<f64>> = g0_over_kappa.iter()
        .flat_map(|&g| gamma_th.iter().map(move |&t| vec![g, t]))
        .collect();
    Ok(run_points(&["g0_over_kappa", "gamma_th"], axes, |a| {
        let p = SystemParams {
            kappa: base.g0 / a[0],
            gamma: a[1] / (base.nbar_b + 1.0),
            ..base.clone()
        };
        let p = with_target_beta(&p, s.beta)?;
        Ok(run_cat(&p, ModelKind::Reduced, &s)?.summary)
    }))
}

/// Toy model evolution paired with the approximate analytic form.
#[derive(Clone, Debug)]
pub struct FigS2 {
    pub times: Vec<f64>,
    pub numeric_w_min: Vec<f64>,
    pub approx_w_min: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub parity: Vec<f64>,
    pub stats: IntegrationStats,
}

pub fn run_fig_s2(gamma1: f64, gamma2: f64, beta: f64, t_end: f64, samples: usize, opts: &EvolveOptions) -> Result<FigS2> {
    let n = default_n_mech(beta);
    let space = FockSpace::single(MECH, n)?;
    let model = build_toy_model(&space, gamma1, gamma2, toy_eps2_for_beta(gamma2, beta), 0.0)?;
    let target = cat_state(&space, &CatSpec::even(beta))?;
    let times: Vec<f64> = (0..=samples).map(|k| t_end * k as f64 / samples as f64).collect();
    let search = MinSearch::for_beta(beta);
    let mut out = FigS2 {
        times: Vec::new(),
        numeric_w_min: Vec::new(),
        approx_w_min: Vec::new(),
        fidelity: Vec::new(),
        parity: Vec::new(),
        stats: IntegrationStats::default(),
    };
    let stats = evolve_with(&model, &DensityMatrix::vacuum(&space), &times, opts, |t, rho| {
        out.times.push(t);
        out.numeric_w_min.push(track_w_min(rho, &search)?);
        let approx = min_with(|x, p| approx_re_point(beta, gamma1, gamma2, t, x, p), &search, true);
        out.approx_w_min.push(approx.w_min.min(0.0));
        out.fidelity.push(rho.fidelity(&target)?);
        out.parity.push(rho.parity_expectation(MECH)?);
        Ok(Flow::Continue)
    })?;
    out.stats = stats;
    Ok(out)
}

/// `figS3` scenario: W_min against cat size for several g₀/κ (reduced model, `base`
/// with κ varied).
pub fn run_fig_s3(base: &SystemParams, betas: &[f64], g0_over_kappa: &[f64], settings: &RunSettings) -> Result<SweepResult> {
    check_monotone(betas, "beta")?;
    check_monotone(g0_over_kappa, "g0_over_kappa")?;
    // only the minimum is wanted here, so stop once W has risen 10% above it
    let s = RunSettings {
        early_stop: settings.early_stop.or(Some(EarlyStop { fraction: 0.9, threshold: 1e-3 })),
        ..sweep_settings(settings)
    };
    let axes: Vec<Vec<f64>> = g0_over_kappa.iter()
        .flat_map(|&g| betas.iter().map(move |&b| vec![g, b]))
        .collect();
    Ok(run_points(&["g0_over_kappa", "beta"], axes, |a| {
        let beta = a[1];
        if beta == 0.0 {
            let n = default_n_mech(0.0);
            let summary = RunSummary {
                w_min: 0.0,
                final_parity: 1.0,
                fidelity_max: 1.0,
                root_fidelity_max: 1.0,
                n_mech: n,
                ..Default::default()
            };
            return Ok(summary);
        }
        let p = with_target_beta(&SystemParams { kappa: base.g0 / a[0], ..base.clone() }, beta)?;
        // the minimum arrives at Γ₂t ~ 1/β², so the sampling rate scales with β²
        let spu = ((s.samples_per_unit as f64) * (beta * beta / 4.0).max(1.0)).ceil() as usize;
        // large truncations accumulate near-zero eigenvalue noise at the default atol
        let mut evolve = s.evolve.clone();
        evolve.atol = evolve.atol.min(1e-12);
        let rs = RunSettings { beta, n_mech: None, samples_per_unit: spu, evolve, ..s.clone() };
        info!("fig S3 point g0/kappa = {}, beta = {beta}", a[0]);
        Ok(run_cat(&p, ModelKind::Reduced, &rs)?.summary)
    }))
}

fn check_monotone(v: &[f64], name: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} sweep is empty")));
    }
    let inc = v.windows(2).all(|w| w[1] > w[0]);
    let dec = v.windows(2).all(|w| w[1] < w[0]);
    if !(inc || dec) {
        return Err(Error::InvalidParameter(format!("{name} sweep values must be strictly monotone")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceCheck {
    pub w_min: f64,
    pub w_min_enlarged: f64,
    pub delta: f64,
    pub dims: (usize, usize),
    pub dims_enlarged: (usize, usize),
}

/// Repeats a run with every truncation enlarged by 25% and requires the
/// negativity to move by less than `tol`.
pub fn convergence_check(p: &SystemParams, kind: ModelKind, settings: &RunSettings, w_min: f64, tol: f64) -> Result<ConvergenceCheck> {
    let beta = derive_rates(p, Regime::SidebandResolved)?.beta_de;
    let n_mech = settings.n_mech.unwrap_or_else(|| default_n_mech(beta));
    let grow = |n: usize| (n as f64 * 1.25).ceil() as usize;
    let s = RunSettings {
        n_cav: grow(settings.n_cav),
        n_mech: Some(grow(n_mech)),
        ..settings.clone()
    };
    let enlarged = run_cat(p, kind, &s)?.summary.w_min;
    let delta = (enlarged - w_min).abs();
    let check = ConvergenceCheck {
        w_min,
        w_min_enlarged: enlarged,
        delta,
        dims: (settings.n_cav, n_mech),
        dims_enlarged: (s.n_cav, grow(n_mech)),
    };
    if delta >= tol {
        return Err(Error::Convergence { delta, tol });
    }
    Ok(check)
}

/// Wigner grid of a mechanical snapshot.
pub fn snapshot_grid(rho: &DensityMatrix, grid: &GridSpec) -> Result<crate::wigner::WignerGrid> {
    crate::wigner::wigner_numeric_unchecked(rho, grid)
}

/// Fringe visibility of a cat with lobes on the x axis: the interference
/// term at the origin, `cat_norm·W_cat(0) − W_mix(0)`, over twice the lobe
/// peak of the mixture. Dividing by the lobe peak removes the envelope
/// broadening, so `ln V` falls at the coherence decay rate.
pub fn fringe_visibility(cat: &DensityMatrix, mixture: &DensityMatrix, cat_norm: f64, beta: f64) -> Result<f64> {
    let kc = WignerKernel::new(cat)?;
    let km = WignerKernel::new(mixture)?;
    let fringe = cat_norm * kc.eval(0.0, 0.0) - km.eval(0.0, 0.0);
    let (neg_peak, _) = crate::wigner::minimize_1d(|x| -km.eval(x, 0.0), 0.0, beta.abs() + 1.0, 200);
    Ok(fringe / (-2.0 * neg_peak))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::coherent_state;
    use crate::models::TWO_PI;

    #[test]
    fn sample_times_nest() {
        let a = sample_times(6.0, 60, 3.0);
        let b = sample_times(10.0, 60, 3.0);
        assert_eq!(a.len(), 361);
        assert_eq!(&b[..a.len()], &a[..]);
        assert_eq!(*b.last().unwrap(), 10.0 / 3.0);
        let c = sample_times(1.01, 10, 1.0);
        assert!(c.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*c.last().unwrap(), 1.01);
    }

    #[test]
    fn sweep_axes_validated() {
        assert!(check_monotone(&[1.0, 2.0, 3.0], "x").is_ok());
        assert!(check_monotone(&[3.0, 2.0], "x").is_ok());
        assert!(check_monotone(&[1.0, 1.0], "x").is_err());
        assert!(check_monotone(&[], "x").is_err());
        let v = log_space(0.3, 30.0, 9);
        assert!((v[0] - 0.3).abs() < 1e-15 && (v[8] - 30.0).abs() < 1e-12);
        assert!((v[4] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn model_kind_parses() {
        assert_eq!("Full".parse::<ModelKind>().unwrap(), ModelKind::Full);
        assert_eq!(ModelKind::Reduced.to_string(), "reduced");
        assert!("toy".parse::<ModelKind>().is_err());
    }

    #[test]
    fn parity_symmetry_detection() {
        let s = FockSpace::single(MECH, 30).unwrap();
        let cat = DensityMatrix::from_pure(&cat_state(&s, &CatSpec::odd(1.5)).unwrap());
        let coh = DensityMatrix::from_pure(&coherent_state(&s, C64::new(1.5, 0.0)).unwrap());
        assert!(has_parity_symmetry(&cat));
        assert!(!has_parity_symmetry(&coh));
        let w = track_w_min(&cat, &MinSearch::for_beta(1.5)).unwrap();
        assert!((w + 2.0 / std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn inset_ratios_are_hit() {
        let base = SystemParams { kappa: TWO_PI * 10e3, ..SystemParams::fig2() };
        let gs = inset_gammas_for_ratios(&base, 2.0, &[100.0, 1.0]).unwrap();
        for (g, q) in gs.iter().zip([100.0, 1.0]) {
            let p = with_target_beta(&SystemParams { gamma: *g, ..base.clone() }, 2.0).unwrap();
            let r = derive_rates(&p, Regime::SidebandResolved).unwrap();
            assert!((r.gamma2 / r.gamma_lin / q - 1.0).abs() < 1e-9);
        }
        assert!(inset_gammas_for_ratios(&base, 2.0, &[1e9]).is_err());
    }

    #[test]
    fn toy_run_starts_without_negativity() {
        let r = run_fig_s2(0.1, 1.0, 2.0, 0.5, 10, &EvolveOptions::default()).unwrap();
        assert_eq!(r.numeric_w_min[0], 0.0);
        assert_eq!(r.approx_w_min[0], 0.0);
        assert!((r.parity[0] - 1.0).abs() < 1e-12);
        assert!(r.numeric_w_min[10] < -0.1);
    }

    #[test]
    fn early_stop_cuts_a_run() {
        let p = with_target_beta(&SystemParams { kappa: SystemParams::fig2().g0 / 0.5, ..SystemParams::fig2() }, 2.0).unwrap();
        let s = RunSettings {
            t_end_gamma2: 10.0,
            samples_per_unit: 20,
            early_stop: Some(EarlyStop { fraction: 0.5, threshold: 1e-3 }),
            ..Default::default()
        };
        let run = run_cat(&p, ModelKind::Reduced, &s).unwrap();
        assert!(run.summary.stats.stopped_early);
        assert!(run.summary.w_min < -1e-3);
        assert!(*run.record.times.last().unwrap() * run.rates.gamma2 < 10.0);
    }

    #[test]
    fn no_pump_is_rejected() {
        let p = SystemParams { n_p: 0.0, ..SystemParams::fig2() };
        assert!(run_cat(&p, ModelKind::Reduced, &RunSettings::default()).is_err());
    }
}
