//! CSV tables and the run manifest.

use std::fs;
use std::path::Path;
use crate::config::{ fmt_f64, Command, RunConfig };
use crate::dynamics::TimeSeriesRecord;
use crate::error::Result;
use crate::experiments::{ CatRun, FigS2, RunSummary, SweepResult };
use crate::models::{ DerivedRates, Regime, TWO_PI };
use crate::wigner::{ CkFit, WignerGrid };

/// Comma separated table with a header row and Unix newlines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|v| fmt_f64(*v)).collect());
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }
}

pub fn timeseries_table(rec: &TimeSeriesRecord) -> CsvTable {
    let mut header = vec!["t_seconds".to_string()];
    header.extend(rec.names.iter().cloned());
    let mut t = CsvTable::new(&header);
    for (k, &time) in rec.times.iter().enumerate() {
        let mut row = vec![time];
        row.extend(rec.values.iter().map(|s| s[k]));
        t.push_nums(&row);
    }
    t
}

fn rate_columns(r: &DerivedRates) -> Vec<(&'static str, f64)> {
    // angular rates are written as rate/2π in Hz
    let hz = |v: f64| v / TWO_PI;
    vec![
        ("regime", match r.regime {
            Regime::SidebandResolved => 0.0,
            Regime::NonSidebandResolved => 1.0,
        }),
        ("alpha_re", r.alpha.re),
        ("alpha_im", r.alpha.im),
        ("g1_over_2pi_hz", hz(r.g1.norm())),
        ("g2_over_2pi_hz", hz(r.g2.norm())),
        ("eps2_re_over_2pi_hz", hz(r.eps2.re)),
        ("eps2_im_over_2pi_hz", hz(r.eps2.im)),
        ("gamma1_over_2pi_hz", hz(r.gamma1)),
        ("gamma2_over_2pi_hz", hz(r.gamma2)),
        ("gamma2_over_gamma1", r.gamma2 / r.gamma1),
        ("kerr_over_2pi_hz", hz(r.kerr)),
        ("delta_w1_over_2pi_hz", hz(r.delta_w1)),
        ("delta_w2_over_2pi_hz", hz(r.delta_w2)),
        ("omega_m_dressed_over_2pi_hz", hz(r.omega_m_dressed)),
        ("delta_wc_over_2pi_hz", hz(r.delta_wc)),
        ("gamma_th_over_2pi_hz", hz(r.gamma_th)),
        ("gamma_lin_over_2pi_hz", hz(r.gamma_lin)),
        ("gamma_ex_over_2pi_hz", hz(r.gamma_ex)),
        ("gamma_dec_over_2pi_hz", hz(r.gamma_dec)),
        ("beta_de", r.beta_de),
        ("beta_kc", r.beta_kc),
        ("incoherent_ratio", r.incoherent_ratio),
    ]
}

/// One-row table of derived rates (regime column: 0 resolved, 1 unresolved).
pub fn rates_table(r: &DerivedRates) -> CsvTable {
    let cols = rate_columns(r);
    let mut t = CsvTable::new(&cols.iter().map(|c| c.0).collect::<Vec<_>>());
    t.push_nums(&cols.iter().map(|c| c.1).collect::<Vec<_>>());
    t
}

const SUMMARY_COLUMNS: [&str; 12] = [
    "w_min", "t_min_seconds", "gamma2_t_min", "fidelity_max", "root_fidelity_max", "gamma2_t_fidelity_max",
    "final_parity", "final_n_mech", "final_n_cav", "n_cav", "n_mech", "rhs_evals",
];

fn summary_values(s: &RunSummary) -> Vec<f64> {
    vec![
        s.w_min, s.t_min, s.gamma2_t_min, s.fidelity_max, s.root_fidelity_max, s.gamma2_t_fidelity_max,
        s.final_parity, s.final_n_mech, s.final_n_cav, s.n_cav as f64, s.n_mech as f64, s.stats.rhs_evals as f64,
    ]
}

/// Summary row of a run followed by its derived rates.
pub fn summary_table(run: &CatRun) -> CsvTable {
    let rates = rate_columns(&run.rates);
    let mut header: Vec<&str> = SUMMARY_COLUMNS.to_vec();
    header.extend(rates.iter().map(|c| c.0));
    let mut t = CsvTable::new(&header);
    let mut row = summary_values(&run.summary);
    row.extend(rates.iter().map(|c| c.1));
    t.push_nums(&row);
    t
}

pub fn wigner_table(g: &WignerGrid) -> CsvTable {
    let mut t = CsvTable::new(&["x", "p", "w"]);
    for (i, &x) in g.x.iter().enumerate() {
        for (j, &p) in g.p.iter().enumerate() {
            t.push_nums(&[x, p, g.values[[i, j]]]);
        }
    }
    t
}

pub fn line_cut_table(g: &WignerGrid) -> CsvTable {
    let mut t = CsvTable::new(&["p", "w"]);
    for (p, w) in g.cut_at_x0() {
        t.push_nums(&[p, w]);
    }
    t
}

/// One row per sweep point: axis values, W_min, t_min, status and the rest
/// of the summary (empty on failure).
pub fn sweep_table(res: &SweepResult) -> CsvTable {
    let mut header: Vec<String> = res.axis_names.clone();
    header.extend(["w_min", "t_min_seconds", "status"].iter().map(|s| s.to_string()));
    header.extend(SUMMARY_COLUMNS[2..].iter().map(|s| s.to_string()));
    let mut t = CsvTable::new(&header);
    for pt in &res.points {
        let mut row: Vec<String> = pt.axes.iter().map(|v| fmt_f64(*v)).collect();
        match &pt.outcome {
            Ok(s) => {
                let v = summary_values(s);
                row.push(fmt_f64(v[0]));
                row.push(fmt_f64(v[1]));
                row.push("ok".into());
                row.extend(v[2..].iter().map(|x| fmt_f64(*x)));
            }
            Err(e) => {
                row.push(String::new());
                row.push(String::new());
                row.push(format!("error: {}", e.replace([',', '\n'], ";")));
                row.extend(std::iter::repeat(String::new()).take(SUMMARY_COLUMNS.len() - 2));
            }
        }
        t.push(row);
    }
    t
}

/// `(g0_over_kappa, gamma_th_hz, w_min)` triples; failed points are left empty.
pub fn heatmap_table(res: &SweepResult) -> CsvTable {
    let mut t = CsvTable::new(&["g0_over_kappa", "gamma_th_hz", "w_min"]);
    for pt in &res.points {
        let w = pt.outcome.as_ref().map(|s| fmt_f64(s.w_min)).unwrap_or_default();
        t.push(vec![fmt_f64(pt.axes[0]), fmt_f64(pt.axes[1] / TWO_PI), w]);
    }
    t
}

pub fn fit_table(fit: &CkFit) -> CsvTable {
    let mut t = CsvTable::new(&["C", "k", "residual_norm", "n_used"]);
    t.push_nums(&[fit.c, fit.k, fit.residual_norm, fit.n_used as f64]);
    t
}

pub fn fig_s2_table(r: &FigS2) -> CsvTable {
    let mut t = CsvTable::new(&["t", "numeric_w_min", "approx_w_min", "fidelity_even_cat", "parity"]);
    for k in 0..r.times.len() {
        t.push_nums(&[r.times[k], r.numeric_w_min[k], r.approx_w_min[k], r.fidelity[k], r.parity[k]]);
    }
    t
}

/// `manifest.txt`: version and command as comments, then the resolved
/// config. The file parses as a config and reproduces the run.
pub fn write_manifest(dir: &Path, command: Command, cfg: &RunConfig, notes: &[(String, String)]) -> Result<()> {
    let mut s = format!("# catsim {}\n# command: {}\n", env!("CARGO_PKG_VERSION"), command.name());
    for (k, v) in notes {
        s.push_str(&format!("# {k}: {v}\n"));
    }
    s.push_str(&cfg.to_config_text());
    fs::write(dir.join("manifest.txt"), s)?;
    Ok(())
}
