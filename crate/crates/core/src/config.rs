//! Plain-text `key = value` run configuration.
//!
//! Frequencies are given as f/2π in Hz (keys ending in `_over_2pi_hz`) and
//! converted to rad/s once, here. Lists are comma separated. `#` starts a
//! comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;
use crate::error::{ Error, Result };
use crate::experiments::{ ModelKind, RunSettings };
use crate::fock::Parity;
use crate::models::{ Regime, SystemParams, TWO_PI };
use crate::wigner::GridSpec;
use crate::C64;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Sweep,
    Wigner,
    Rates,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Wigner => "wigner",
            Command::Rates => "rates",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Scenario {
    Custom,
    Fig2,
    Fig3,
    Fig3Inset,
    Fig4,
    FigS2,
    FigS3,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Custom => "custom",
            Scenario::Fig2 => "fig2",
            Scenario::Fig3 => "fig3",
            Scenario::Fig3Inset => "fig3_inset",
            Scenario::Fig4 => "fig4",
            Scenario::FigS2 => "figS2",
            Scenario::FigS3 => "figS3",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "custom" => Scenario::Custom,
            "fig2" => Scenario::Fig2,
            "fig3" => Scenario::Fig3,
            "fig3_inset" => Scenario::Fig3Inset,
            "fig4" => Scenario::Fig4,
            "figs2" => Scenario::FigS2,
            "figs3" => Scenario::FigS3,
            _ => return Err(Error::Config(format!("unknown scenario '{s}'"))),
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum WignerForm {
    Cat,
    Mixture,
    Decohered,
    Approx,
}

impl WignerForm {
    pub fn name(self) -> &'static str {
        match self {
            WignerForm::Cat => "cat",
            WignerForm::Mixture => "mixture",
            WignerForm::Decohered => "decohered",
            WignerForm::Approx => "approx",
        }
    }
}

impl FromStr for WignerForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "cat" => WignerForm::Cat,
            "mixture" => WignerForm::Mixture,
            "decohered" => WignerForm::Decohered,
            "approx" => WignerForm::Approx,
            _ => return Err(Error::Config(format!("unknown Wigner form '{s}'"))),
        })
    }
}

/// Physical inputs as written in the config (Hz for frequencies).
#[derive(Clone, Debug, PartialEq)]
pub struct HzParams {
    pub g0: f64,
    pub omega_m: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub nbar_b: f64,
    pub nbar_a: f64,
    pub n_p: f64,
    pub delta: Option<f64>,
    pub delta_prime: Option<f64>,
    /// Explicit drive `|ε_d|/2π`; when absent the drive targets `beta`.
    pub eps_d: Option<f64>,
    pub eps_d_phase: f64,
}

impl HzParams {
    fn fig2() -> Self {
        Self {
            g0: 1e6,
            omega_m: 15e6,
            gamma: 15.0,
            kappa: 100e3,
            nbar_b: 0.0,
            nbar_a: 0.0,
            n_p: 0.1,
            delta: None,
            delta_prime: None,
            eps_d: None,
            eps_d_phase: 0.0,
        }
    }

    fn fig4() -> Self {
        Self { g0: 10e3, omega_m: 20e6, gamma: 1.0, kappa: 10e3, nbar_b: 10.0, n_p: 100.0, ..Self::fig2() }
    }

    /// Converted parameters; the drive is left at zero when it targets a size.
    pub fn to_params(&self) -> SystemParams {
        SystemParams {
            g0: TWO_PI * self.g0,
            omega_m: TWO_PI * self.omega_m,
            gamma: TWO_PI * self.gamma,
            kappa: TWO_PI * self.kappa,
            nbar_b: self.nbar_b,
            nbar_a: self.nbar_a,
            n_p: self.n_p,
            eps_d: match self.eps_d {
                Some(e) => C64::from_polar(TWO_PI * e, self.eps_d_phase),
                None => C64::new(0.0, 0.0),
            },
            delta: self.delta.map(|d| TWO_PI * d),
            delta_prime: self.delta_prime.map(|d| TWO_PI * d),
            pump_phase: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WignerConfig {
    pub form: WignerForm,
    pub parity: Parity,
    /// Time in units of the rates below (seconds when rates are in 1/s).
    pub t: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub nth: f64,
    pub line_cut: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxes {
    pub g0_over_kappa: Vec<f64>,
    /// `Γ_th/2π` in Hz.
    pub gamma_th_hz: Vec<f64>,
    /// `Γ/2π` in Hz.
    pub gamma_hz: Vec<f64>,
    pub betas: Vec<f64>,
    pub fit: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub model: ModelKind,
    pub regime: Regime,
    pub hz: HzParams,
    pub beta: f64,
    pub n_cav: usize,
    pub n_mech: Option<usize>,
    pub rtol: f64,
    pub atol: f64,
    pub t_end_gamma2: f64,
    pub samples_per_unit: usize,
    pub snapshots_gamma2_t: Vec<f64>,
    pub grid: GridSpec,
    pub convergence_check: bool,
    pub plot: bool,
    pub sweep: SweepAxes,
    pub wigner: WignerConfig,
    /// Toy-model rates for `figS2`, in arbitrary inverse time units.
    pub toy_gamma1: f64,
    pub toy_gamma2: f64,
    pub toy_t_end: f64,
}

const KEYS: &[&str] = &[
    "scenario", "model", "regime", "g0_over_2pi_hz", "omega_m_over_2pi_hz", "gamma_over_2pi_hz",
    "kappa_over_2pi_hz", "nbar_b", "nbar_a", "n_p", "delta_over_2pi_hz", "delta_prime_over_2pi_hz",
    "eps_d_over_2pi_hz", "eps_d_phase_rad", "beta", "n_cav", "n_mech", "rtol", "atol", "t_end_gamma2",
    "samples_per_unit", "snapshots_gamma2_t", "grid_n", "grid_xmax", "convergence_check", "plot",
    "g0_over_kappa", "gamma_th_over_2pi_hz", "gammas_over_2pi_hz", "betas", "fit", "form", "parity", "t",
    "gamma1", "gamma2", "nth", "line_cut", "toy_gamma1", "toy_gamma2", "toy_t_end",
];

/// Keys every `custom` scenario must set.
const REQUIRED_CUSTOM: &[&str] =
    &["g0_over_2pi_hz", "omega_m_over_2pi_hz", "gamma_over_2pi_hz", "kappa_over_2pi_hz", "n_p"];

struct Raw(BTreeMap<String, (String, usize)>);

impl Raw {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected 'key = value'")))?;
            let key = key.trim().to_string();
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("line {line_no}: unknown key '{key}'")));
            }
            if map.insert(key.clone(), (value.trim().to_string(), line_no)).is_some() {
                return Err(Error::Config(format!("line {line_no}: duplicate key '{key}'")));
            }
        }
        Ok(Raw(map))
    }

    fn has(&self, key: &str) -> bool { self.0.contains_key(key) }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some)
                .map_err(|_| Error::Config(format!("line {line}: cannot parse {key} = '{v}'"))),
        }
    }

    fn num(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.get::<f64>(key)?.unwrap_or(default);
        if !v.is_finite() {
            return Err(Error::Config(format!("{key} must be finite")));
        }
        Ok(v)
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.0.get(key) {
            None => Ok(None),
            Some((v, line)) => v.split(',')
                .map(|s| s.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .map(Some)
                .ok_or_else(|| Error::Config(format!("line {line}: cannot parse list {key} = '{v}'"))),
        }
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.0.get(key) {
            None => Ok(default),
            Some((v, line)) => match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::Config(format!("line {line}: {key} must be true or false"))),
            },
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 { Ok(()) } else { Err(Error::Config(format!("{name} must be > 0 (got {v})"))) }
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 { Ok(()) } else { Err(Error::Config(format!("{name} must be >= 0 (got {v})"))) }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with(text, true)
    }

    /// Like [`RunConfig::parse`]; with `require_physics` unset a `custom`
    /// scenario may leave out the physical parameters (the `wigner` command
    /// does not use them).
    pub fn parse_with(text: &str, require_physics: bool) -> Result<Self> {
        let raw = Raw::parse(text)?;
        let scenario = match raw.get::<String>("scenario")? {
            Some(s) => s.parse()?,
            None => Scenario::Custom,
        };
        let base = match scenario {
            Scenario::Fig4 => HzParams::fig4(),
            Scenario::Fig3Inset => HzParams { kappa: 10e3, ..HzParams::fig2() },
            Scenario::Custom => {
                for key in REQUIRED_CUSTOM.iter().filter(|_| require_physics) {
                    if !raw.has(key) {
                        return Err(Error::Config(format!("missing required parameter '{key}'")));
                    }
                }
                HzParams::fig2()
            }
            _ => HzParams::fig2(),
        };
        let hz = HzParams {
            g0: raw.num("g0_over_2pi_hz", base.g0)?,
            omega_m: raw.num("omega_m_over_2pi_hz", base.omega_m)?,
            gamma: raw.num("gamma_over_2pi_hz", base.gamma)?,
            kappa: raw.num("kappa_over_2pi_hz", base.kappa)?,
            nbar_b: raw.num("nbar_b", base.nbar_b)?,
            nbar_a: raw.num("nbar_a", base.nbar_a)?,
            n_p: raw.num("n_p", base.n_p)?,
            delta: raw.get("delta_over_2pi_hz")?,
            delta_prime: raw.get("delta_prime_over_2pi_hz")?,
            eps_d: raw.get("eps_d_over_2pi_hz")?,
            eps_d_phase: raw.num("eps_d_phase_rad", 0.0)?,
        };
        for (n, v) in [("g0_over_2pi_hz", hz.g0), ("omega_m_over_2pi_hz", hz.omega_m),
                       ("gamma_over_2pi_hz", hz.gamma), ("kappa_over_2pi_hz", hz.kappa)] {
            positive(n, v)?;
        }
        for (n, v) in [("nbar_b", hz.nbar_b), ("nbar_a", hz.nbar_a), ("n_p", hz.n_p)] {
            nonneg(n, v)?;
        }
        if let Some(e) = hz.eps_d {
            nonneg("eps_d_over_2pi_hz", e)?;
        }
        let model = match raw.get::<String>("model")? {
            Some(m) => m.parse().map_err(|_| Error::Config(format!("unknown model '{m}'")))?,
            None => ModelKind::Reduced,
        };
        let regime = match raw.get::<String>("regime")?.as_deref() {
            None | Some("resolved") => Regime::SidebandResolved,
            Some("unresolved") => Regime::NonSidebandResolved,
            Some(r) => return Err(Error::Config(format!("unknown regime '{r}' (resolved | unresolved)"))),
        };
        let beta = raw.num("beta", 2.0)?;
        nonneg("beta", beta)?;
        let defaults = RunSettings::for_model(model);
        let rtol = raw.num("rtol", defaults.evolve.rtol)?;
        let atol = raw.num("atol", defaults.evolve.atol)?;
        positive("rtol", rtol)?;
        positive("atol", atol)?;
        let t_end_default = match scenario {
            Scenario::Fig2 | Scenario::Custom => 6.0,
            _ => 10.0,
        };
        let t_end_gamma2 = raw.num("t_end_gamma2", t_end_default)?;
        positive("t_end_gamma2", t_end_gamma2)?;
        let samples_per_unit = raw.get::<usize>("samples_per_unit")?.unwrap_or(60);
        if samples_per_unit == 0 {
            return Err(Error::Config("samples_per_unit must be >= 1".into()));
        }
        let grid_default = GridSpec::default_for_beta(beta);
        let grid = GridSpec::new(
            raw.get::<usize>("grid_n")?.unwrap_or(grid_default.n),
            raw.num("grid_xmax", grid_default.x_max)?,
        ).map_err(|e| Error::Config(e.to_string()))?;
        let n_cav = raw.get::<usize>("n_cav")?.unwrap_or(6);
        let n_mech = raw.get::<usize>("n_mech")?;
        let wigner = WignerConfig {
            form: raw.get::<String>("form")?.map(|f| f.parse()).transpose()?.unwrap_or(WignerForm::Cat),
            parity: raw.get::<String>("parity")?
                .map(|p| p.parse::<Parity>().map_err(|_| Error::Config(format!("unknown parity '{p}'"))))
                .transpose()?
                .unwrap_or(Parity::Even),
            t: raw.num("t", 0.0)?,
            gamma1: raw.num("gamma1", 0.0)?,
            gamma2: raw.num("gamma2", 1.0)?,
            nth: raw.num("nth", 0.0)?,
            line_cut: raw.flag("line_cut", false)?,
        };
        nonneg("t", wigner.t)?;
        nonneg("gamma1", wigner.gamma1)?;
        nonneg("nth", wigner.nth)?;
        let sweep = SweepAxes {
            g0_over_kappa: raw.list("g0_over_kappa")?.unwrap_or_default(),
            gamma_th_hz: raw.list("gamma_th_over_2pi_hz")?.unwrap_or_default(),
            gamma_hz: raw.list("gammas_over_2pi_hz")?.unwrap_or_default(),
            betas: raw.list("betas")?.unwrap_or_default(),
            fit: raw.flag("fit", scenario == Scenario::Fig3)?,
        };
        let cfg = RunConfig {
            scenario,
            model,
            regime,
            hz,
            beta,
            n_cav,
            n_mech,
            rtol,
            atol,
            t_end_gamma2,
            samples_per_unit,
            snapshots_gamma2_t: raw.list("snapshots_gamma2_t")?.unwrap_or_default(),
            grid,
            convergence_check: raw.flag("convergence_check", false)?,
            plot: raw.flag("plot", false)?,
            sweep,
            wigner,
            toy_gamma1: raw.num("toy_gamma1", 0.1)?,
            toy_gamma2: raw.num("toy_gamma2", 1.0)?,
            toy_t_end: raw.num("toy_t_end", 10.0)?,
        };
        positive("toy_gamma2", cfg.toy_gamma2)?;
        nonneg("toy_gamma1", cfg.toy_gamma1)?;
        positive("toy_t_end", cfg.toy_t_end)?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_file_with(path, true)
    }

    pub fn from_file_with(path: &std::path::Path, require_physics: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_with(&text, require_physics)
    }

    /// `--dims Na,Nb`.
    pub fn apply_dims(&mut self, s: &str) -> Result<()> {
        let (a, b) = s.split_once(',').ok_or_else(|| Error::Config(format!("--dims expects Na,Nb, got '{s}'")))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad dimension '{v}'")));
        self.n_cav = parse(a)?;
        self.n_mech = Some(parse(b)?);
        Ok(())
    }

    /// `--tol rel`: sets the relative tolerance and scales the absolute one
    /// to keep their default ratio.
    pub fn apply_tol(&mut self, rel: f64) -> Result<()> {
        positive("--tol", rel)?;
        let d = RunSettings::for_model(self.model).evolve;
        self.rtol = rel;
        self.atol = rel * d.atol / d.rtol;
        Ok(())
    }

    /// `--grid N,xmax`.
    pub fn apply_grid(&mut self, s: &str) -> Result<()> {
        let (n, x) = s.split_once(',').ok_or_else(|| Error::Config(format!("--grid expects N,xmax, got '{s}'")))?;
        let n = n.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad grid size '{n}'")))?;
        let x = x.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad grid extent '{x}'")))?;
        self.grid = GridSpec::new(n, x).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Physical parameters in rad/s, with the drive set for `beta` unless an
    /// explicit amplitude was given.
    pub fn params(&self) -> Result<SystemParams> {
        let p = self.hz.to_params();
        if self.hz.eps_d.is_some() || p.n_p == 0.0 {
            return Ok(p);
        }
        crate::models::with_target_beta(&p, self.beta)
    }

    pub fn run_settings(&self) -> RunSettings {
        let mut s = RunSettings::for_model(self.model);
        s.n_cav = self.n_cav;
        s.n_mech = self.n_mech;
        s.evolve.rtol = self.rtol;
        s.evolve.atol = self.atol;
        s.t_end_gamma2 = self.t_end_gamma2;
        s.samples_per_unit = self.samples_per_unit;
        s.snapshot_gamma2_t = self.snapshots_gamma2_t.clone();
        s.beta = self.beta;
        s
    }

    /// Every resolved setting as config text; parsing it back gives an equal
    /// config.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let list = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", ");
        kv("scenario", self.scenario.name().into());
        kv("model", self.model.to_string());
        kv("regime", match self.regime {
            Regime::SidebandResolved => "resolved".into(),
            Regime::NonSidebandResolved => "unresolved".into(),
        });
        kv("g0_over_2pi_hz", fmt_f64(self.hz.g0));
        kv("omega_m_over_2pi_hz", fmt_f64(self.hz.omega_m));
        kv("gamma_over_2pi_hz", fmt_f64(self.hz.gamma));
        kv("kappa_over_2pi_hz", fmt_f64(self.hz.kappa));
        kv("nbar_b", fmt_f64(self.hz.nbar_b));
        kv("nbar_a", fmt_f64(self.hz.nbar_a));
        kv("n_p", fmt_f64(self.hz.n_p));
        if let Some(d) = self.hz.delta {
            kv("delta_over_2pi_hz", fmt_f64(d));
        }
        if let Some(d) = self.hz.delta_prime {
            kv("delta_prime_over_2pi_hz", fmt_f64(d));
        }
        if let Some(e) = self.hz.eps_d {
            kv("eps_d_over_2pi_hz", fmt_f64(e));
        }
        kv("eps_d_phase_rad", fmt_f64(self.hz.eps_d_phase));
        kv("beta", fmt_f64(self.beta));
        kv("n_cav", self.n_cav.to_string());
        if let Some(n) = self.n_mech {
            kv("n_mech", n.to_string());
        }
        kv("rtol", fmt_f64(self.rtol));
        kv("atol", fmt_f64(self.atol));
        kv("t_end_gamma2", fmt_f64(self.t_end_gamma2));
        kv("samples_per_unit", self.samples_per_unit.to_string());
        if !self.snapshots_gamma2_t.is_empty() {
            kv("snapshots_gamma2_t", list(&self.snapshots_gamma2_t));
        }
        kv("grid_n", self.grid.n.to_string());
        kv("grid_xmax", fmt_f64(self.grid.x_max));
        kv("convergence_check", self.convergence_check.to_string());
        kv("plot", self.plot.to_string());
        for (k, v) in [("g0_over_kappa", &self.sweep.g0_over_kappa), ("gamma_th_over_2pi_hz", &self.sweep.gamma_th_hz),
                       ("gammas_over_2pi_hz", &self.sweep.gamma_hz), ("betas", &self.sweep.betas)] {
            if !v.is_empty() {
                kv(k, list(v));
            }
        }
        kv("fit", self.sweep.fit.to_string());
        kv("form", self.wigner.form.name().into());
        kv("parity", match self.wigner.parity {
            Parity::Even => "even".into(),
            Parity::Odd => "odd".into(),
        });
        kv("t", fmt_f64(self.wigner.t));
        kv("gamma1", fmt_f64(self.wigner.gamma1));
        kv("gamma2", fmt_f64(self.wigner.gamma2));
        kv("nth", fmt_f64(self.wigner.nth));
        kv("line_cut", self.wigner.line_cut.to_string());
        kv("toy_gamma1", fmt_f64(self.toy_gamma1));
        kv("toy_gamma2", fmt_f64(self.toy_gamma2));
        kv("toy_t_end", fmt_f64(self.toy_t_end));
        out
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig2_defaults_match_params() {
        let c = RunConfig::parse("scenario = fig2\n").unwrap();
        assert_eq!(c.hz.to_params(), SystemParams::fig2());
        let c4 = RunConfig::parse("scenario = fig4").unwrap();
        assert_eq!(c4.hz.to_params(), SystemParams::fig4());
    }

    #[test]
    fn units_are_converted_once() {
        let c = RunConfig::parse(
            "g0_over_2pi_hz = 1e6\nomega_m_over_2pi_hz = 15e6\ngamma_over_2pi_hz = 15\nkappa_over_2pi_hz = 1e5\nn_p = 0.1",
        ).unwrap();
        let p = c.params().unwrap();
        assert_eq!(p.g0, TWO_PI * 1e6);
        assert_eq!(p.kappa, TWO_PI * 1e5);
        assert!(p.eps_d.norm() > 0.0);
    }

    #[test]
    fn missing_required_parameter_is_named() {
        let e = RunConfig::parse("g0_over_2pi_hz = 1e6\nomega_m_over_2pi_hz = 15e6\nn_p = 0.1\ngamma_over_2pi_hz = 1").unwrap_err();
        assert!(e.to_string().contains("kappa_over_2pi_hz"), "{e}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse("scenario = fig2\nfoo = 1").is_err());
        assert!(RunConfig::parse("scenario = fig2\nbeta = 1\nbeta = 2").is_err());
        assert!(RunConfig::parse("scenario = fig2\nbeta").is_err());
        assert!(RunConfig::parse("scenario = fig2\nkappa_over_2pi_hz = -1").is_err());
        assert!(RunConfig::parse("scenario = fig2\nmodel = both").is_err());
        assert!(RunConfig::parse("scenario = fig9").is_err());
        assert!(RunConfig::parse("scenario = fig2\nrtol = nan").is_err());
    }

    #[test]
    fn comments_and_lists() {
        let c = RunConfig::parse("# header\nscenario = fig3 # trailing\ng0_over_kappa = 0.3, 1 ,3\n").unwrap();
        assert_eq!(c.sweep.g0_over_kappa, vec![0.3, 1.0, 3.0]);
        assert!(c.sweep.fit);
    }

    #[test]
    fn resolved_text_round_trips() {
        let mut c = RunConfig::parse(
            "scenario = fig3\nkappa_over_2pi_hz = 33333.333333333336\ng0_over_kappa = 0.3, 1.7\nsnapshots_gamma2_t = 1.6\neps_d_over_2pi_hz = 0.1\n",
        ).unwrap();
        c.apply_dims("7,40").unwrap();
        c.apply_tol(1e-9).unwrap();
        c.apply_grid("101,4.5").unwrap();
        let back = RunConfig::parse(&c.to_config_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn fmt_f64_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.0 / std::f64::consts::PI, 1e-300, 6.02214076e23] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
