//! Lindblad master-equation integration.
//!
//! The right-hand side is evaluated without building a superoperator. For a
//! Hermitian `ρ`, writing `H_eff = H − (i/2) Σ γ c†c` and
//! `Y = −i H_eff ρ + ½ Σ γ c ρ c†` gives `dρ/dt = Y + Y†`, and `c ρ c†` is
//! `c (c ρ)†`. Only left multiplications by sparse operators are needed.
//!
//! Time stepping uses the Dormand–Prince 5(4) pair with embedded error control.

use std::sync::Arc;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use crate::error::{ Error, Result };
use crate::fock::{ hermitize, DensityMatrix, FockSpace, Operator };

pub const TRACE_TOL: f64 = 1e-8;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct LindbladTerm {
    pub rate: f64,
    pub collapse: Operator,
}

/// `amplitude · e^{iωt} · op + h.c.`
#[derive(Clone, Debug)]
pub struct DriveTerm {
    pub op: Operator,
    pub amplitude: C64,
    pub omega: f64,
}

#[derive(Clone, Debug)]
pub struct ModelSpec {
    space: FockSpace,
    h_static: Operator,
    drives: Vec<DriveTerm>,
    lindblad: Vec<LindbladTerm>,
}

impl ModelSpec {
    pub fn new(h_static: Operator) -> Result<Self> {
        if !h_static.is_hermitian(1e-10) {
            return Err(Error::InvalidParameter(format!(
                "static Hamiltonian not Hermitian (residual {:e})",
                h_static.hermiticity_residual())));
        }
        Ok(Self {
            space: h_static.space().clone(),
            h_static,
            drives: Vec::new(),
            lindblad: Vec::new(),
        })
    }

    pub fn with_drive(mut self, op: Operator, amplitude: C64, omega: f64) -> Result<Self> {
        self.space.ensure_same(op.space(), "drive term")?;
        if amplitude != C64::new(0.0, 0.0) {
            self.drives.push(DriveTerm { op, amplitude, omega });
        }
        Ok(self)
    }

    pub fn with_lindblad(mut self, rate: f64, collapse: Operator) -> Result<Self> {
        self.space.ensure_same(collapse.space(), "collapse operator")?;
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::InvalidParameter(format!("Lindblad rate {rate} must be >= 0")));
        }
        if rate > 0.0 {
            self.lindblad.push(LindbladTerm { rate, collapse });
        }
        Ok(self)
    }

    pub fn space(&self) -> &FockSpace { &self.space }

    pub fn h_static(&self) -> &Operator { &self.h_static }

    pub fn drives(&self) -> &[DriveTerm] { &self.drives }

    pub fn lindblad_terms(&self) -> &[LindbladTerm] { &self.lindblad }

    /// Full Hamiltonian `H(t)` in the frame the model is written in.
    pub fn hamiltonian_at(&self, t: f64) -> Operator {
        let mut h = self.h_static.clone();
        for d in &self.drives {
            let term = d.op.scale(d.amplitude * C64::from_polar(1.0, d.omega * t));
            h = &(&h + &term) + &term.adjoint();
        }
        h
    }
}

/// Frame in which the state is propagated. Results are always reported in
/// the frame the model is written in.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum Frame {
    #[default]
    Lab,
    /// Rotates out the diagonal of the static Hamiltonian. Collapse operators
    /// must be eigenoperators of that diagonal.
    Interaction,
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub frame: Frame,
    pub h_init: Option<f64>,
    pub h_max: Option<f64>,
    pub max_steps: usize,
    pub check_physicality: bool,
    /// Check the minimum eigenvalue at every n-th sample (0 disables).
    pub positivity_every: usize,
    pub snapshot_times: Vec<f64>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            frame: Frame::Lab,
            h_init: None,
            h_max: None,
            max_steps: 50_000_000,
            check_physicality: true,
            positivity_every: 1,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Clone, Debug, Default)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub max_trace_drift: f64,
    pub max_hermiticity: f64,
    pub min_eigenvalue: f64,
    pub stopped_early: bool,
}

type ObsFn = dyn Fn(f64, &DensityMatrix) -> Result<f64> + Send + Sync;

#[derive(Clone)]
pub struct Observable {
    pub name: String,
    f: Arc<ObsFn>,
}

impl std::fmt::Debug for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Observable({})", self.name)
    }
}

impl Observable {
    pub fn custom<F>(name: &str, f: F) -> Self
    where F: Fn(f64, &DensityMatrix) -> Result<f64> + Send + Sync + 'static
    {
        Self { name: name.to_string(), f: Arc::new(f) }
    }

    /// Real part of `Tr(A ρ)`.
    pub fn expect(name: &str, op: Operator) -> Self {
        Self::custom(name, move |_, rho| Ok(rho.expect(&op)?.re))
    }

    pub fn number(name: &str, mode: &str) -> Self {
        let mode = mode.to_string();
        Self::custom(name, move |_, rho| rho.mean_occupation(&mode))
    }

    pub fn parity(name: &str, mode: &str) -> Self {
        let mode = mode.to_string();
        Self::custom(name, move |_, rho| rho.parity_expectation(&mode))
    }

    pub fn eval(&self, t: f64, rho: &DensityMatrix) -> Result<f64> { (self.f)(t, rho) }
}

#[derive(Clone, Debug, Default)]
pub struct TimeSeriesRecord {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// `values[k]` is the series of observable `names[k]`.
    pub values: Vec<Vec<f64>>,
    pub snapshots: Vec<(f64, DensityMatrix)>,
    pub stats: IntegrationStats,
}

impl TimeSeriesRecord {
    pub fn new(names: Vec<String>) -> Self {
        let values = vec![Vec::new(); names.len()];
        Self { names, values, ..Default::default() }
    }

    pub fn push(&mut self, t: f64, row: &[f64]) {
        assert_eq!(row.len(), self.names.len());
        if let Some(&last) = self.times.last() {
            assert!(t > last, "record times must be strictly increasing");
        }
        self.times.push(t);
        for (s, v) in self.values.iter_mut().zip(row) {
            s.push(*v);
        }
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|k| self.values[k].as_slice())
    }

    pub fn len(&self) -> usize { self.times.len() }

    pub fn is_empty(&self) -> bool { self.times.is_empty() }
}

// A sparse matrix whose entries rotate as `value · e^{i ν t}`. Duplicate
// positions are allowed.
#[derive(Clone, Debug)]
struct RotatingCsr {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    base: Vec<C64>,
    freq: Vec<f64>,
    values: Vec<C64>,
    time_dependent: bool,
}

impl RotatingCsr {
    fn new(n: usize, mut entries: Vec<(usize, usize, C64, f64)>) -> Self {
        entries.retain(|e| e.2 != C64::new(0.0, 0.0));
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.3.total_cmp(&b.3)));
        // merge identical (row, col, freq)
        let mut merged: Vec<(usize, usize, C64, f64)> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(m) if m.0 == e.0 && m.1 == e.1 && m.3 == e.3 => m.2 += e.2,
                _ => merged.push(e),
            }
        }
        let mut indptr = vec![0; n + 1];
        for e in &merged {
            indptr[e.0 + 1] += 1;
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        let indices = merged.iter().map(|e| e.1).collect();
        let base: Vec<C64> = merged.iter().map(|e| e.2).collect();
        let freq: Vec<f64> = merged.iter().map(|e| e.3).collect();
        let time_dependent = freq.iter().any(|&f| f != 0.0);
        Self { indptr, indices, values: base.clone(), base, freq, time_dependent }
    }

    fn set_time(&mut self, t: f64) {
        if !self.time_dependent {
            return;
        }
        for ((v, b), f) in self.values.iter_mut().zip(&self.base).zip(&self.freq) {
            *v = if *f == 0.0 { *b } else { b * C64::from_polar(1.0, f * t) };
        }
    }

    /// `out += self · m` (row-major `n × n`).
    fn mul_acc(&self, m: &[C64], out: &mut [C64], n: usize) {
        for i in 0..self.indptr.len() - 1 {
            let row = &mut out[i * n..(i + 1) * n];
            for k in self.indptr[i]..self.indptr[i + 1] {
                let a = self.values[k];
                let src = &m[self.indices[k] * n..(self.indices[k] + 1) * n];
                for (o, s) in row.iter_mut().zip(src) {
                    *o += a * s;
                }
            }
        }
    }
}

fn static_diagonal(model: &ModelSpec) -> Result<Vec<f64>> {
    let diag = model.h_static.diagonal();
    let scale = diag.iter().map(|d| d.norm()).fold(1.0, f64::max);
    if diag.iter().any(|d| d.im.abs() > 1e-12 * scale) {
        return Err(Error::InvalidParameter("static Hamiltonian has complex diagonal".into()));
    }
    Ok(diag.iter().map(|d| d.re).collect())
}

// Frequency of entry (i, j) under the rotation e^{iDt} · e^{-iDt}.
fn entry_freq(d: &[f64], i: usize, j: usize) -> f64 { d[i] - d[j] }

fn check_eigenoperator(c: &Operator, d: &[f64]) -> Result<()> {
    let scale = d.iter().map(|x| x.abs()).fold(1.0, f64::max);
    let mut nu: Option<f64> = None;
    for (i, j, _) in c.triplets() {
        let f = entry_freq(d, i, j);
        match nu {
            None => nu = Some(f),
            Some(n) if (n - f).abs() > 1e-9 * scale => {
                return Err(Error::InvalidParameter(
                    "collapse operator is not an eigenoperator of the static diagonal; \
                     interaction frame unavailable".into()));
            }
            _ => {}
        }
    }
    Ok(())
}

/// Matrix-free Lindblad right-hand side with scratch space.
struct Rhs {
    n: usize,
    m: RotatingCsr,
    collapses: Vec<(f64, Operator)>,
    y: Vec<C64>,
    tmp: Vec<C64>,
    tmp_t: Vec<C64>,
    evals: usize,
}

impl Rhs {
    fn new(model: &ModelSpec, frame: Frame) -> Result<Self> {
        let n = model.space.total_dim();
        let d = match frame {
            Frame::Lab => vec![0.0; n],
            Frame::Interaction => static_diagonal(model)?,
        };
        let mi = C64::new(0.0, -1.0);
        let mut entries = Vec::new();
        for (i, j, v) in model.h_static.triplets() {
            if frame == Frame::Interaction && i == j {
                continue;
            }
            entries.push((i, j, mi * v, entry_freq(&d, i, j)));
        }
        for dr in &model.drives {
            for (i, j, v) in dr.op.triplets() {
                let a = dr.amplitude * v;
                let f = dr.omega + entry_freq(&d, i, j);
                entries.push((i, j, mi * a, f));
                entries.push((j, i, mi * a.conj(), -f));
            }
        }
        let mut collapses = Vec::new();
        for term in &model.lindblad {
            if frame == Frame::Interaction {
                check_eigenoperator(&term.collapse, &d)?;
            }
            let cdc = &term.collapse.adjoint() * &term.collapse;
            for (i, j, v) in cdc.triplets() {
                entries.push((i, j, v * (-0.5 * term.rate), entry_freq(&d, i, j)));
            }
            collapses.push((term.rate, term.collapse.clone()));
        }
        let zeros = vec![C64::new(0.0, 0.0); n * n];
        Ok(Self {
            n,
            m: RotatingCsr::new(n, entries),
            collapses,
            y: zeros.clone(),
            tmp: zeros.clone(),
            tmp_t: zeros,
            evals: 0,
        })
    }

    /// `out = L(t) ρ` for Hermitian `ρ`.
    fn eval(&mut self, t: f64, rho: &[C64], out: &mut [C64]) {
        let n = self.n;
        self.evals += 1;
        self.m.set_time(t);
        self.y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        self.m.mul_acc(rho, &mut self.y, n);
        for (rate, c) in &self.collapses {
            self.tmp.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            c.mul_dense_slice(rho, &mut self.tmp, n, C64::new(1.0, 0.0));
            for i in 0..n {
                for j in 0..n {
                    self.tmp_t[i * n + j] = self.tmp[j * n + i].conj();
                }
            }
            c.mul_dense_slice(&self.tmp_t, &mut self.y, n, C64::new(0.5 * rate, 0.0));
        }
        for i in 0..n {
            for j in i..n {
                let v = self.y[i * n + j] + self.y[j * n + i].conj();
                out[i * n + j] = v;
                out[j * n + i] = v.conj();
            }
        }
    }
}

/// `dρ/dt` at time `t` for a Hermitian `ρ`, in the model's own frame.
pub fn liouvillian_apply(model: &ModelSpec, t: f64, rho: &DensityMatrix) -> Result<Array2<C64>> {
    model.space.ensure_same(rho.space(), "liouvillian_apply")?;
    let mut rhs = Rhs::new(model, Frame::Lab)?;
    let n = rho.dim();
    let data = rho.data().as_standard_layout();
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    rhs.eval(t, data.as_slice().unwrap(), &mut out);
    Ok(Array2::from_shape_vec((n, n), out).unwrap())
}

/// `−i[H(t), X] + Σ γ (c X c† − ½{c†c, X})` for an arbitrary square matrix
/// `X`, built from dense products. Slow; used as a reference.
pub fn liouvillian_apply_dense(model: &ModelSpec, t: f64, x: &Array2<C64>) -> Array2<C64> {
    let h = model.hamiltonian_at(t).to_dense();
    let i = C64::new(0.0, 1.0);
    let mut out = (h.dot(x) - x.dot(&h)).mapv(|v| -i * v);
    for term in &model.lindblad {
        let c = term.collapse.to_dense();
        let cd = c.t().mapv(|v| v.conj());
        let cdc = cd.dot(&c);
        let d = c.dot(x).dot(&cd) - (cdc.dot(x) + x.dot(&cdc)).mapv(|v| v * 0.5);
        out = out + d.mapv(|v| v * term.rate);
    }
    out
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Dopri5 {
    rhs: Rhs,
    k: [Vec<C64>; 7],
    ytmp: Vec<C64>,
    ynew: Vec<C64>,
    rtol: f64,
    atol: f64,
}

impl Dopri5 {
    fn new(rhs: Rhs, rtol: f64, atol: f64) -> Self {
        let n2 = rhs.n * rhs.n;
        let z = vec![C64::new(0.0, 0.0); n2];
        Self {
            rhs,
            k: std::array::from_fn(|_| z.clone()),
            ytmp: z.clone(),
            ynew: z,
            rtol,
            atol,
        }
    }

    fn norm(&self, e: &[C64], y: &[C64], y2: &[C64]) -> f64 {
        let s: f64 = e.iter().zip(y).zip(y2)
            .map(|((e, a), b)| {
                let sc = self.atol + self.rtol * a.norm().max(b.norm());
                (e.norm() / sc).powi(2)
            })
            .sum();
        (s / e.len() as f64).sqrt()
    }

    fn initial_step(&mut self, t: f64, y: &[C64], span: f64) -> f64 {
        let d0 = self.norm(y, y, y);
        let d1 = self.norm(&self.k[0], y, y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        for ((yt, yi), k) in self.ytmp.iter_mut().zip(y).zip(&self.k[0]) {
            *yt = yi + k * h0;
        }
        let mut f1 = vec![C64::new(0.0, 0.0); y.len()];
        let ytmp = std::mem::take(&mut self.ytmp);
        self.rhs.eval(t + h0, &ytmp, &mut f1);
        self.ytmp = ytmp;
        let diff: Vec<C64> = f1.iter().zip(&self.k[0]).map(|(a, b)| a - b).collect();
        let d2 = self.norm(&diff, y, y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6 * span)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 5.0)
        };
        (100.0 * h0).min(h1).min(span)
    }

    // Attempts one step from (t, y) with size h; on success `ynew` holds the
    // result and `k[6]` the derivative there. Returns the error norm.
    fn attempt(&mut self, t: f64, y: &[C64], h: f64) -> f64 {
        let n2 = y.len();
        macro_rules! stage {
            ($dst:expr, $c:expr, [$(($idx:expr, $a:expr)),*]) => {{
                for i in 0..n2 {
                    let mut acc = y[i];
                    $( acc += self.k[$idx][i] * ($a * h); )*
                    self.ytmp[i] = acc;
                }
                let mut out = std::mem::take(&mut self.k[$dst]);
                self.rhs.eval(t + $c * h, &self.ytmp, &mut out);
                self.k[$dst] = out;
            }};
        }
        stage!(1, C2, [(0, A21)]);
        stage!(2, C3, [(0, A31), (1, A32)]);
        stage!(3, C4, [(0, A41), (1, A42), (2, A43)]);
        stage!(4, C5, [(0, A51), (1, A52), (2, A53), (3, A54)]);
        stage!(5, 1.0, [(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
        for i in 0..n2 {
            self.ynew[i] = y[i]
                + (self.k[0][i] * B1 + self.k[2][i] * B3 + self.k[3][i] * B4
                    + self.k[4][i] * B5 + self.k[5][i] * B6) * h;
        }
        let mut k7 = std::mem::take(&mut self.k[6]);
        self.rhs.eval(t + h, &self.ynew, &mut k7);
        self.k[6] = k7;
        let mut err = std::mem::take(&mut self.ytmp);
        for i in 0..n2 {
            err[i] = (self.k[0][i] * E1 + self.k[2][i] * E3 + self.k[3][i] * E4
                + self.k[4][i] * E5 + self.k[5][i] * E6 + self.k[6][i] * E7) * h;
        }
        let e = self.norm(&err, y, &self.ynew);
        self.ytmp = err;
        e
    }
}

struct FrameMap {
    d: Option<Vec<f64>>,
}

impl FrameMap {
    // ρ_S[i,j] = ρ_I[i,j] e^{-i(d_i - d_j)t}
    fn to_model(&self, space: &FockSpace, y: &[C64], t: f64) -> DensityMatrix {
        let n = space.total_dim();
        let data = match &self.d {
            None => Array2::from_shape_vec((n, n), y.to_vec()).unwrap(),
            Some(d) => {
                let ph: Vec<C64> = d.iter().map(|x| C64::from_polar(1.0, -x * t)).collect();
                Array2::from_shape_fn((n, n), |(i, j)| y[i * n + j] * ph[i] * ph[j].conj())
            }
        };
        DensityMatrix::from_matrix(space, data).expect("shape matches space")
    }
}

fn check_physical(rho: &DensityMatrix, t: f64, eig: bool, stats: &mut IntegrationStats) -> Result<()> {
    let drift = (rho.trace() - C64::new(1.0, 0.0)).norm();
    stats.max_trace_drift = stats.max_trace_drift.max(drift);
    if drift >= TRACE_TOL {
        return Err(Error::Physicality { t, what: "trace drift", value: drift });
    }
    let herm = rho.hermiticity_residual();
    stats.max_hermiticity = stats.max_hermiticity.max(herm);
    if herm >= HERMITICITY_TOL {
        return Err(Error::Physicality { t, what: "hermiticity residual", value: herm });
    }
    if eig {
        let m = rho.min_eigenvalue();
        stats.min_eigenvalue = stats.min_eigenvalue.min(m);
        if m < -POSITIVITY_TOL {
            return Err(Error::Physicality { t, what: "minimum eigenvalue", value: m });
        }
    }
    Ok(())
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("no sample times".into()));
    }
    if times[0] < 0.0 || !times.iter().all(|t| t.is_finite()) {
        return Err(Error::InvalidParameter("sample times must be finite and >= 0".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("sample times must be strictly increasing".into()));
    }
    Ok(())
}

/// Integrates from `ρ(0) = rho0` and calls `on_sample(t, ρ(t))` at every
/// sample time. The callback may stop the integration early.
pub fn evolve_with<F>(
    model: &ModelSpec,
    rho0: &DensityMatrix,
    sample_times: &[f64],
    opts: &EvolveOptions,
    mut on_sample: F,
) -> Result<IntegrationStats>
where F: FnMut(f64, &DensityMatrix) -> Result<Flow>
{
    model.space.ensure_same(rho0.space(), "initial state")?;
    validate_times(sample_times)?;
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::InvalidParameter("tolerances must be positive".into()));
    }
    let mut stats = IntegrationStats { min_eigenvalue: f64::INFINITY, ..Default::default() };
    if opts.check_physicality {
        check_physical(rho0, 0.0, opts.positivity_every > 0, &mut stats)?;
    }
    let frame = FrameMap {
        d: match opts.frame {
            Frame::Lab => None,
            Frame::Interaction => Some(static_diagonal(model)?),
        },
    };
    let rhs = Rhs::new(model, opts.frame)?;
    let mut solver = Dopri5::new(rhs, opts.rtol, opts.atol);
    let n = model.space.total_dim();
    let mut y: Vec<C64> = rho0.data().as_standard_layout().iter().copied().collect();
    let mut t = 0.0;
    let t_end = *sample_times.last().unwrap();
    let h_max = opts.h_max.unwrap_or(f64::INFINITY);

    let mut k0 = std::mem::take(&mut solver.k[0]);
    solver.rhs.eval(t, &y, &mut k0);
    solver.k[0] = k0;
    let mut h = match opts.h_init {
        Some(h) => h,
        None if t_end > 0.0 => solver.initial_step(t, &y, t_end),
        None => 0.0,
    }
    .min(h_max);

    let mut sample_idx = 0;
    let mut emit = |t: f64, y: &[C64], stats: &mut IntegrationStats, idx: usize| -> Result<Flow> {
        let rho = frame.to_model(&model.space, y, t);
        if opts.check_physicality {
            let eig = opts.positivity_every > 0 && idx % opts.positivity_every == 0;
            check_physical(&rho, t, eig, stats)?;
        }
        on_sample(t, &rho)
    };

    if sample_times[0] == 0.0 {
        if emit(0.0, &y, &mut stats, 0)? == Flow::Stop {
            stats.stopped_early = true;
            return Ok(finish(stats));
        }
        sample_idx = 1;
    }
    let mut last_rejected = false;
    let mut steps = 0usize;
    while sample_idx < sample_times.len() {
        let target = sample_times[sample_idx];
        let remaining = target - t;
        let mut hs = h.min(h_max);
        let lands = hs >= remaining * (1.0 - 1e-12);
        if lands {
            hs = remaining;
        } else if hs > 0.5 * remaining {
            // avoid a sliver step right before the sample
            hs = 0.5 * remaining;
        }
        if hs <= 16.0 * f64::EPSILON * t.abs().max(t_end) {
            return Err(Error::StepSizeUnderflow { t, h: hs, steps });
        }
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::TooManySteps { t, max_steps: opts.max_steps });
        }
        let err = solver.attempt(t, &y, hs);
        if !err.is_finite() {
            stats.rejected += 1;
            h = hs * 0.2;
            last_rejected = true;
            continue;
        }
        if err <= 1.0 {
            stats.accepted += 1;
            t = if lands { target } else { t + hs };
            std::mem::swap(&mut y, &mut solver.ynew);
            let mut m = Array2::from_shape_vec((n, n), std::mem::take(&mut y)).unwrap();
            hermitize(&mut m);
            y = m.into_raw_vec_and_offset().0;
            solver.k.swap(0, 6);
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, if last_rejected { 1.0 } else { 5.0 });
            // keep the natural step across sample landings
            h = if lands { h.max(hs * fac) } else { hs * fac };
            last_rejected = false;
            if lands {
                let idx = sample_idx;
                sample_idx += 1;
                if emit(t, &y, &mut stats, idx)? == Flow::Stop {
                    stats.stopped_early = true;
                    break;
                }
            }
        } else {
            stats.rejected += 1;
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h = hs * fac;
            last_rejected = true;
        }
    }
    stats.rhs_evals = solver.rhs.evals;
    Ok(finish(stats))
}

fn finish(mut stats: IntegrationStats) -> IntegrationStats {
    if stats.min_eigenvalue == f64::INFINITY {
        stats.min_eigenvalue = f64::NAN;
    }
    stats
}

/// Evolves to `t_end`, recording every observable at each sample time
/// (samples beyond `t_end` are ignored).
pub fn evolve(
    model: &ModelSpec,
    rho0: &DensityMatrix,
    t_end: f64,
    sample_times: &[f64],
    observables: &[Observable],
    opts: &EvolveOptions,
) -> Result<TimeSeriesRecord> {
    if !(t_end > 0.0) {
        return Err(Error::InvalidParameter(format!("t_end = {t_end} must be > 0")));
    }
    let mut times: Vec<f64> = sample_times.iter().copied().filter(|&t| t <= t_end).collect();
    let record_end = times.last() != Some(&t_end);
    if record_end {
        times.push(t_end);
    }
    let n_recorded = if record_end { times.len() - 1 } else { times.len() };
    let mut rec = TimeSeriesRecord::new(observables.iter().map(|o| o.name.clone()).collect());
    let mut count = 0;
    let snaps = &opts.snapshot_times;
    let stats = evolve_with(model, rho0, &times, opts, |t, rho| {
        if count < n_recorded {
            let row = observables.iter()
                .map(|o| o.eval(t, rho))
                .collect::<Result<Vec<_>>>()?;
            rec.push(t, &row);
            if snaps.iter().any(|&s| (s - t).abs() <= 1e-12 * t_end.max(1e-300)) {
                rec.snapshots.push((t, rho.clone()));
            }
        }
        count += 1;
        Ok(Flow::Continue)
    })?;
    rec.stats = stats;
    Ok(rec)
}

/// First time at which every recorded observable has settled: its
/// peak-to-peak variation over the trailing `window` is below `tol` times its
/// range over the whole record. Returns `None` if that never happens.
pub fn steady_state_detect(record: &TimeSeriesRecord, window: f64, tol: f64) -> Result<Option<f64>> {
    let times = &record.times;
    if times.len() < 2 || !(window > 0.0) {
        return Err(Error::RecordTooShort("need at least two samples and window > 0".into()));
    }
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    if span < 2.0 * window * (1.0 - 1e-12) {
        return Err(Error::RecordTooShort(format!(
            "record spans {span:e}, needs >= 2 x window = {:e}", 2.0 * window)));
    }
    let ranges: Vec<f64> = record.values.iter().map(|s| peak_to_peak(s)).collect();
    let eps = 1e-12 * window;
    let mut start = 0;
    for k in 0..times.len() {
        let t = times[k];
        if t < t0 + window - eps {
            continue;
        }
        while times[start] < t - window - eps {
            start += 1;
        }
        let settled = record.values.iter().zip(&ranges).all(|(s, &range)| {
            let p2p = peak_to_peak(&s[start..=k]);
            p2p == 0.0 || p2p < tol * range
        });
        if settled {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

fn peak_to_peak(s: &[f64]) -> f64 {
    let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if s.is_empty() { 0.0 } else { hi - lo }
}

/// `n + 1` evenly spaced points on `[0, t_end]`.
pub fn linspace_times(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{ coherent_state, ladder, number, StateVector, CAVITY, MECH };
    use approx::assert_abs_diff_eq;

    fn c(x: f64) -> C64 { C64::new(x, 0.0) }

    fn fock1(dim: usize) -> (FockSpace, DensityMatrix) {
        let s = FockSpace::single(MECH, dim).unwrap();
        let rho = DensityMatrix::from_pure(&StateVector::basis(&s, 1).unwrap());
        (s, rho)
    }

    #[test]
    fn number_state_is_stationary_under_number_hamiltonian() {
        let (s, rho) = fock1(5);
        let model = ModelSpec::new(number(&s, MECH).unwrap().scale_re(3.0)).unwrap();
        let d = liouvillian_apply(&model, 0.3, &rho).unwrap();
        assert!(d.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn amplitude_damping_rate() {
        let (s, rho) = fock1(5);
        let b = ladder(&s, MECH).unwrap();
        let model = ModelSpec::new(Operator::zero(&s)).unwrap().with_lindblad(0.7, b).unwrap();
        let d = liouvillian_apply(&model, 0.0, &rho).unwrap();
        let dn: f64 = (0..5).map(|k| k as f64 * d[[k, k]].re).sum();
        assert_abs_diff_eq!(dn, -0.7, epsilon = 1e-14);
    }

    #[test]
    fn single_phonon_immune_to_two_phonon_loss() {
        let (s, rho) = fock1(5);
        let b = ladder(&s, MECH).unwrap();
        let model = ModelSpec::new(Operator::zero(&s)).unwrap().with_lindblad(1.0, &b * &b).unwrap();
        let d = liouvillian_apply(&model, 0.0, &rho).unwrap();
        assert!(d.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn fast_rhs_matches_dense_reference() {
        let s = FockSpace::optomechanical(3, 4).unwrap();
        let a = ladder(&s, CAVITY).unwrap();
        let b = ladder(&s, MECH).unwrap();
        let bx = &b + &b.adjoint();
        let h = &(&number(&s, MECH).unwrap() + &(&(&a.adjoint() * &a) * &bx).scale_re(0.3))
            - &number(&s, CAVITY).unwrap().scale_re(1.7);
        let model = ModelSpec::new(h).unwrap()
            .with_drive(a.adjoint(), C64::new(0.2, -0.1), 1.3).unwrap()
            .with_lindblad(0.4, a.clone()).unwrap()
            .with_lindblad(0.1, b.adjoint()).unwrap()
            .with_lindblad(0.2, &b * &b).unwrap();
        let sa = FockSpace::single(CAVITY, 3).unwrap();
        let sb = FockSpace::single(MECH, 4).unwrap();
        let rho = DensityMatrix::thermal(&sa, 0.5).unwrap()
            .tensor(&DensityMatrix::from_pure(&coherent_state(&sb, c(0.0)).unwrap())).unwrap();
        let mut mixed = rho.data().clone();
        mixed[[1, 5]] = C64::new(0.01, 0.02);
        mixed[[5, 1]] = C64::new(0.01, -0.02);
        let rho = DensityMatrix::from_matrix(&s, mixed).unwrap();
        let fast = liouvillian_apply(&model, 0.37, &rho).unwrap();
        let slow = liouvillian_apply_dense(&model, 0.37, rho.data());
        for (x, y) in fast.iter().zip(slow.iter()) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn exponential_decay_of_one_phonon() {
        let (s, rho) = fock1(4);
        let b = ladder(&s, MECH).unwrap();
        let gamma = 2.0;
        let model = ModelSpec::new(Operator::zero(&s)).unwrap().with_lindblad(gamma, b).unwrap();
        let times = linspace_times(3.0, 30);
        let rec = evolve(&model, &rho, 3.0, &times,
            &[Observable::number("n", MECH)], &EvolveOptions::default()).unwrap();
        for (t, n) in rec.times.iter().zip(rec.series("n").unwrap()) {
            let exact = (-gamma * t).exp();
            assert!(((n - exact) / exact).abs() < 1e-6, "t={t} n={n} exact={exact}");
        }
    }

    #[test]
    fn coherent_rotation_phase() {
        let s = FockSpace::single(CAVITY, 12).unwrap();
        let delta = 2.0 * std::f64::consts::PI * 1e6;
        let model = ModelSpec::new(number(&s, CAVITY).unwrap().scale_re(delta)).unwrap();
        let rho0 = DensityMatrix::from_pure(&coherent_state(&s, c(1.0)).unwrap());
        let a = ladder(&s, CAVITY).unwrap();
        let a2 = a.clone();
        let obs = [
            Observable::expect("re", a),
            Observable::custom("im", move |_, r| Ok(r.expect(&a2)?.im)),
        ];
        let rec = evolve(&model, &rho0, 250e-9, &[0.0, 250e-9], &obs, &EvolveOptions::default()).unwrap();
        let (re, im) = (rec.series("re").unwrap()[1], rec.series("im").unwrap()[1]);
        // ⟨a⟩(t) = α e^{-iΔt}
        let phase = (-im).atan2(re);
        assert_abs_diff_eq!(phase, std::f64::consts::FRAC_PI_2, epsilon = 1e-4);
    }

    #[test]
    fn interaction_frame_matches_lab_frame() {
        let s = FockSpace::optomechanical(3, 5).unwrap();
        let a = ladder(&s, CAVITY).unwrap();
        let b = ladder(&s, MECH).unwrap();
        let bx = &b + &b.adjoint();
        let (wm, delta) = (20.0, -40.0);
        let h = &(&(&number(&s, MECH).unwrap().scale_re(wm)
            - &number(&s, CAVITY).unwrap().scale_re(delta))
            + &(&(&a.adjoint() * &a) * &bx).scale_re(1.5))
            + &(&a.adjoint() * &bx).scale_re(0.4);
        let h = &h + &(&a * &bx).scale_re(0.4);
        let model = ModelSpec::new(h).unwrap()
            .with_drive(a.adjoint(), c(0.8), delta).unwrap()
            .with_lindblad(0.5, a.clone()).unwrap()
            .with_lindblad(0.05, b.clone()).unwrap();
        let rho0 = DensityMatrix::vacuum(&s);
        let times = linspace_times(2.0, 20);
        let obs = [Observable::number("na", CAVITY), Observable::number("nb", MECH),
            Observable::expect("xb", bx.clone())];
        let lab = evolve(&model, &rho0, 2.0, &times, &obs, &EvolveOptions::default()).unwrap();
        let opts = EvolveOptions { frame: Frame::Interaction, ..Default::default() };
        let int = evolve(&model, &rho0, 2.0, &times, &obs, &opts).unwrap();
        for (x, y) in lab.values.iter().flatten().zip(int.values.iter().flatten()) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
        let bad = ModelSpec::new(number(&s, MECH).unwrap()).unwrap()
            .with_lindblad(1.0, bx).unwrap();
        assert!(evolve(&bad, &rho0, 1.0, &[1.0], &[], &opts).is_err());
    }

    #[test]
    fn early_stop_and_invalid_times() {
        let (s, rho) = fock1(4);
        let model = ModelSpec::new(number(&s, MECH).unwrap()).unwrap()
            .with_lindblad(1.0, ladder(&s, MECH).unwrap()).unwrap();
        let mut seen = 0;
        let stats = evolve_with(&model, &rho, &[0.0, 1.0, 2.0, 3.0], &EvolveOptions::default(), |t, _| {
            seen += 1;
            Ok(if t >= 1.0 { Flow::Stop } else { Flow::Continue })
        }).unwrap();
        assert_eq!(seen, 2);
        assert!(stats.stopped_early);
        assert!(evolve_with(&model, &rho, &[1.0, 0.5], &EvolveOptions::default(), |_, _| Ok(Flow::Continue)).is_err());
    }

    #[test]
    fn steady_state_examples() {
        let times = linspace_times(20.0, 2000);
        let mut rec = TimeSeriesRecord::new(vec!["c".into()]);
        times.iter().for_each(|&t| rec.push(t, &[1.5]));
        assert_eq!(steady_state_detect(&rec, 1.0, 0.01).unwrap(), Some(1.0));

        let mut rec = TimeSeriesRecord::new(vec!["e".into()]);
        times.iter().for_each(|&t| rec.push(t, &[(-t).exp()]));
        let ts = steady_state_detect(&rec, 1.0, 0.01).unwrap().unwrap();
        assert!((5.0..=7.0).contains(&ts), "{ts}");

        let mut rec = TimeSeriesRecord::new(vec!["s".into()]);
        times.iter().for_each(|&t| rec.push(t, &[t.sin()]));
        assert_eq!(steady_state_detect(&rec, 2.0 * std::f64::consts::PI, 0.01).unwrap(), None);

        assert!(matches!(steady_state_detect(&rec, 15.0, 0.01), Err(Error::RecordTooShort(_))));
    }
}
