//! Wigner functions in the dimensionless convention where `α = x + ip`, the
//! vacuum has variance 1/4 in each quadrature and `W_vac(0,0) = 2/π`.

use std::f64::consts::PI;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use crate::error::{ Error, Result };
use crate::fock::{ CatSpec, DensityMatrix, Parity };

pub const W_BOUND: f64 = 2.0 / PI;

/// Square grid of `n × n` points over `[−x_max, x_max]²`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub x_max: f64,
}

impl GridSpec {
    pub fn new(n: usize, x_max: f64) -> Result<Self> {
        if n < 3 || !(x_max > 0.0) || !x_max.is_finite() {
            return Err(Error::Grid(format!("invalid grid n = {n}, x_max = {x_max}")));
        }
        Ok(Self { n, x_max })
    }

    /// 201 × 201 over `[−3.5 − |β|, 3.5 + |β|]`.
    pub fn default_for_beta(beta_abs: f64) -> Self {
        Self { n: 201, x_max: 3.5 + beta_abs }
    }

    pub fn axis(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n).map(|k| -self.x_max + h * k as f64).collect()
    }

    pub fn spacing(&self) -> f64 { 2.0 * self.x_max / (self.n - 1) as f64 }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum WignerSource {
    Numeric,
    Analytic,
}

/// `values[[i, j]] = W(x[i], p[j])`.
#[derive(Clone, Debug)]
pub struct WignerGrid {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub values: Array2<f64>,
    pub source: WignerSource,
}

impl WignerGrid {
    fn from_fn<F>(spec: &GridSpec, source: WignerSource, f: F) -> Self
    where F: Fn(f64, f64) -> f64 + Sync
    {
        let axis = spec.axis();
        let n = spec.n;
        let rows: Vec<Vec<f64>> = axis.par_iter()
            .map(|&x| axis.iter().map(|&p| f(x, p)).collect())
            .collect();
        let values = Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]);
        Self { x: axis.clone(), p: axis, values, source }
    }

    /// Trapezoidal `∬ W dx dp`.
    pub fn integral(&self) -> f64 {
        let wx = trapezoid_weights(&self.x);
        let wp = trapezoid_weights(&self.p);
        self.values.indexed_iter().map(|((i, j), v)| v * wx[i] * wp[j]).sum()
    }

    pub fn min(&self) -> f64 { self.values.iter().copied().fold(f64::INFINITY, f64::min) }

    pub fn max(&self) -> f64 { self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max) }

    /// Largest pointwise difference to another grid on the same axes.
    pub fn sup_diff(&self, other: &WignerGrid) -> f64 {
        assert_eq!(self.values.dim(), other.values.dim(), "grid shape mismatch");
        self.values.iter().zip(other.values.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Values along the line `x = 0` (nearest grid column).
    pub fn cut_at_x0(&self) -> Vec<(f64, f64)> {
        let i = nearest_index(&self.x, 0.0);
        self.p.iter().enumerate().map(|(j, &p)| (p, self.values[[i, j]])).collect()
    }
}

fn nearest_index(axis: &[f64], v: f64) -> usize {
    axis.iter().enumerate()
        .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn trapezoid_weights(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    (0..n).map(|k| {
        let left = if k > 0 { axis[k] - axis[k - 1] } else { 0.0 };
        let right = if k + 1 < n { axis[k + 1] - axis[k] } else { 0.0 };
        0.5 * (left + right)
    }).collect()
}

/// Wigner function of a single-mode density matrix at one phase-space point.
/// Sums the Fock matrix elements diagonal by diagonal: each diagonal is a
/// Clenshaw-evaluated series of normalized associated Laguerre functions and
/// the diagonals are combined by Horner's rule in `2α`. Stable for large
/// dimensions and far from the origin, where the plain three-term recurrence
/// loses all digits.
#[derive(Clone, Debug)]
pub struct WignerKernel {
    // diags[l][n] = c_l ρ[n, n + l] with c_0 = 1, c_l = 2 otherwise
    diags: Vec<Vec<C64>>,
}

impl WignerKernel {
    pub fn new(rho: &DensityMatrix) -> Result<Self> {
        if rho.space().n_modes() != 1 {
            return Err(Error::InvalidSpace("Wigner function needs a single-mode state".into()));
        }
        let d = rho.data();
        let n = rho.dim();
        let diags = (0..n)
            .map(|l| {
                let c = if l == 0 { 1.0 } else { 2.0 };
                (0..n - l).map(|k| d[[k, k + l]] * c).collect()
            })
            .collect();
        Ok(Self { diags })
    }

    pub fn eval(&self, x: f64, p: f64) -> f64 {
        let a2 = C64::new(2.0 * x, 2.0 * p);
        let b = a2.norm_sqr();
        let top = self.diags.len() - 1;
        let mut w = self.diags[top][0];
        for l in (0..top).rev() {
            w = laguerre_series(l, b, &self.diags[l]) + w * a2 / ((l + 1) as f64).sqrt();
        }
        w.re * (-0.5 * b).exp() * 2.0 / PI
    }
}

// Σ_n c_n (−1)^n sqrt(n! l!/(n + l)!) L_n^l(x) by Clenshaw recursion.
fn laguerre_series(l: usize, x: f64, c: &[C64]) -> C64 {
    let lf = l as f64;
    let (y0, y1) = match c.len() {
        1 => (c[0], C64::new(0.0, 0.0)),
        2 => (c[0], c[1]),
        len => {
            let mut y0 = c[len - 2];
            let mut y1 = c[len - 1];
            let mut k = len as f64;
            for i in 3..=len {
                k -= 1.0;
                let t = y0;
                y0 = c[len - i] - y1 * (((k - 1.0) * (lf + k - 1.0)) / ((lf + k) * k)).sqrt();
                y1 = t - y1 * ((lf + 2.0 * k - 1.0) - x) / ((lf + k) * k).sqrt();
            }
            (y0, y1)
        }
    };
    y0 - y1 * ((lf + 1.0) - x) / (lf + 1.0).sqrt()
}

pub fn wigner_point(rho: &DensityMatrix, x: f64, p: f64) -> Result<f64> {
    Ok(WignerKernel::new(rho)?.eval(x, p))
}

/// Numeric Wigner function on a grid. Fails if the grid does not hold the
/// state's weight (`|∬W − 1| > 2e−3`).
pub fn wigner_numeric(rho: &DensityMatrix, spec: &GridSpec) -> Result<WignerGrid> {
    let grid = wigner_numeric_unchecked(rho, spec)?;
    let total = grid.integral();
    let trace = rho.trace().re;
    if (total - trace).abs() > 2e-3 {
        return Err(Error::Grid(format!(
            "grid [-{0}, {0}] misses part of the state: integral = {total:.6}", spec.x_max)));
    }
    Ok(grid)
}

pub fn wigner_numeric_unchecked(rho: &DensityMatrix, spec: &GridSpec) -> Result<WignerGrid> {
    let kernel = WignerKernel::new(rho)?;
    let axis = spec.axis();
    let rows: Vec<Vec<f64>> = axis.par_iter()
        .map(|&x| axis.iter().map(|&p| kernel.eval(x, p)).collect())
        .collect();
    let n = spec.n;
    let values = Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]);
    Ok(WignerGrid { x: axis.clone(), p: axis, values, source: WignerSource::Numeric })
}

/// Cat Wigner function for real `β ≥ 0` with decoherence parameters:
/// lobe centers `±β_t`, width factor `ξ`, and fringe damping `fringe`.
fn cat_kernel(x: f64, p: f64, beta: f64, parity: Parity, beta_t: f64, xi: f64, fringe: f64) -> f64 {
    let s = parity.sign();
    let norm = 1.0 + s * (-2.0 * beta * beta).exp();
    let g = (-2.0 * (x * x + p * p) / xi).exp();
    let lobes = (4.0 * beta_t * x / xi).cosh() * (-2.0 * beta_t * beta_t / xi).exp();
    let fr = s * (4.0 * beta_t * p / xi).cos() * fringe;
    2.0 * g / (PI * norm * xi) * (lobes + fr)
}

// Rotates `(x, p)` by `−arg β` so the cat lobes lie on the x axis.
fn rotate_to_real(beta: C64, x: f64, p: f64) -> (f64, f64) {
    let r = C64::new(x, p) * C64::from_polar(1.0, -beta.arg());
    (r.re, r.im)
}

/// Analytic pure-cat Wigner function at a point.
pub fn cat_wigner_point(spec: &CatSpec, x: f64, p: f64) -> f64 {
    let (x, p) = rotate_to_real(spec.beta, x, p);
    let b = spec.beta.norm();
    cat_kernel(x, p, b, spec.parity, b, 1.0, 1.0)
}

pub fn wigner_cat_analytic(spec: &CatSpec, grid: &GridSpec) -> Result<WignerGrid> {
    if spec.parity == Parity::Odd && spec.beta.norm() == 0.0 {
        return Err(Error::Degenerate("odd cat state with beta = 0".into()));
    }
    Ok(WignerGrid::from_fn(grid, WignerSource::Analytic, |x, p| cat_wigner_point(spec, x, p)))
}

/// Minimum of the even-cat Wigner function, found on the `x = 0` line.
pub fn even_cat_negativity(beta: f64) -> (f64, f64) {
    let spec = CatSpec::even(beta);
    let f = |p: f64| cat_wigner_point(&spec, 0.0, p);
    let p_hi = 3.0 + PI / (8.0 * beta.max(1e-3));
    minimize_1d(f, 0.0, p_hi, 2000)
}

/// Scan followed by golden-section refinement. Returns `(f_min, arg_min)`.
pub fn minimize_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    let h = (hi - lo) / n as f64;
    let (mut best_k, mut best) = (0, f64::INFINITY);
    for k in 0..=n {
        let v = f(lo + h * k as f64);
        if v < best {
            best = v;
            best_k = k;
        }
    }
    let mut a = (lo + h * (best_k as f64 - 1.0)).max(lo);
    let mut b = (lo + h * (best_k as f64 + 1.0)).min(hi);
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-12 * (1.0 + a.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let v = f(x);
    if v <= best { (v, x) } else { (best, lo + h * best_k as f64) }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Negativity {
    pub w_min: f64,
    pub x: f64,
    pub p: f64,
}

/// Grid minimum refined by a quadratic through its 3 × 3 neighborhood.
pub fn negativity(grid: &WignerGrid) -> Negativity {
    let (nx, np) = grid.values.dim();
    let ((i, j), &v) = grid.values.indexed_iter()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    let coarse = Negativity { w_min: v, x: grid.x[i], p: grid.p[j] };
    if i == 0 || j == 0 || i + 1 >= nx || j + 1 >= np {
        return coarse;
    }
    // interpolating quadratic f(u, v) = c0 + c1 u + c2 v + c3 u² + c4 uv + c5 v²
    // from central differences on the 3 × 3 stencil, u, v ∈ {−1, 0, 1}
    let f = |du: isize, dv: isize| grid.values[[(i as isize + du) as usize, (j as isize + dv) as usize]];
    let c0 = f(0, 0);
    let c1 = 0.5 * (f(1, 0) - f(-1, 0));
    let c2 = 0.5 * (f(0, 1) - f(0, -1));
    let c3 = 0.5 * (f(1, 0) + f(-1, 0)) - c0;
    let c5 = 0.5 * (f(0, 1) + f(0, -1)) - c0;
    let c4 = 0.25 * (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1));
    let det = 4.0 * c3 * c5 - c4 * c4;
    if !(det > 0.0 && c3 > 0.0) {
        return coarse;
    }
    let u = (-2.0 * c5 * c1 + c4 * c2) / det;
    let w = (-2.0 * c3 * c2 + c4 * c1) / det;
    if u.abs() > 1.0 || w.abs() > 1.0 {
        return coarse;
    }
    let val = c0 + c1 * u + c2 * w + c3 * u * u + c4 * u * w + c5 * w * w;
    let hx = grid.x[i + 1] - grid.x[i];
    let hp = grid.p[j + 1] - grid.p[j];
    Negativity { w_min: val.min(v), x: grid.x[i] + u * hx, p: grid.p[j] + w * hp }
}

/// Search window for [`min_wigner`]: a square of half-width `half_width`
/// around the origin sampled at `spacing`, followed by a compass search on
/// exact point values.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct MinSearch {
    pub half_width: f64,
    pub spacing: f64,
}

impl MinSearch {
    /// Window suited to cats of size up to `beta_abs`: spacing of a quarter
    /// fringe period (at most 0.1).
    pub fn for_beta(beta_abs: f64) -> Self {
        let fringe = PI / (2.0 * beta_abs.max(1e-3));
        Self { half_width: 2.5, spacing: (fringe / 4.0).min(0.1) }
    }
}

/// Global minimum of the Wigner function within the search window. Uses the
/// inversion symmetry `W(−α) = W(α)` when `symmetric` is set.
pub fn min_wigner(rho: &DensityMatrix, search: &MinSearch, symmetric: bool) -> Result<Negativity> {
    let k = WignerKernel::new(rho)?;
    Ok(min_with(|x, p| k.eval(x, p), search, symmetric))
}

/// Local minimum search: a small grid of `cells` spacings around `center`,
/// then the same compass refinement. Used to follow a minimum from one
/// time sample to the next without rescanning the whole window.
pub fn min_wigner_near(rho: &DensityMatrix, search: &MinSearch, center: (f64, f64), cells: usize) -> Result<Negativity> {
    let k = WignerKernel::new(rho)?;
    let h = search.spacing;
    let c = cells as isize;
    let mut best = Negativity { w_min: f64::INFINITY, x: center.0, p: center.1 };
    for i in -c..=c {
        for j in -c..=c {
            let (x, p) = (center.0 + h * i as f64, center.1 + h * j as f64);
            if x.abs() > search.half_width || p.abs() > search.half_width {
                continue;
            }
            let v = k.eval(x, p);
            if v < best.w_min {
                best = Negativity { w_min: v, x, p };
            }
        }
    }
    if !best.w_min.is_finite() {
        best.w_min = k.eval(center.0, center.1);
    }
    Ok(compass(|x, p| k.eval(x, p), search, best, h / 2.0))
}

/// [`min_wigner`] for an arbitrary function.
pub fn min_with<F: FnMut(f64, f64) -> f64>(mut f: F, search: &MinSearch, symmetric: bool) -> Negativity {
    let m = (search.half_width / search.spacing).ceil() as isize;
    let h = search.half_width / m as f64;
    let mut best = Negativity { w_min: f64::INFINITY, x: 0.0, p: 0.0 };
    for i in -m..=m {
        // with inversion symmetry only the half-plane x >= 0 is needed
        if symmetric && i < 0 {
            continue;
        }
        let x = h * i as f64;
        for j in -m..=m {
            if symmetric && i == 0 && j < 0 {
                continue;
            }
            let p = h * j as f64;
            let v = f(x, p);
            if v < best.w_min {
                best = Negativity { w_min: v, x, p };
            }
        }
    }
    compass(f, search, best, h / 2.0)
}

fn compass<F: FnMut(f64, f64) -> f64>(mut f: F, search: &MinSearch, mut best: Negativity, mut step: f64) -> Negativity {
    while step > 1e-7 {
        let mut moved = false;
        for (dx, dp) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let (x, p) = (best.x + dx, best.p + dp);
            if x.abs() > search.half_width || p.abs() > search.half_width {
                continue;
            }
            let v = f(x, p);
            if v < best.w_min {
                best = Negativity { w_min: v, x, p };
                moved = true;
                break;
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    best
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct DecoherenceSpec {
    pub beta: C64,
    pub parity: Parity,
    pub gamma1: f64,
    pub nth: f64,
}

impl DecoherenceSpec {
    pub fn xi(&self, t: f64) -> f64 {
        2.0 * self.nth * (1.0 - (-self.gamma1 * t).exp()) + 1.0
    }

    /// Cat of amplitude `β` after a time `t` of single-phonon loss and
    /// heating from a bath of occupancy `nth`.
    pub fn point(&self, t: f64, x: f64, p: f64) -> f64 {
        let (x, p) = rotate_to_real(self.beta, x, p);
        let b = self.beta.norm();
        let eta = (-self.gamma1 * t).exp();
        let xi = self.xi(t);
        let fringe = (-2.0 * b * b * (1.0 - eta / xi)).exp();
        cat_kernel(x, p, b, self.parity, b * eta.sqrt(), xi, fringe)
    }
}

pub fn wigner_decohered(spec: &DecoherenceSpec, t: f64, grid: &GridSpec) -> Result<WignerGrid> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t = {t} must be >= 0")));
    }
    if spec.parity == Parity::Odd && spec.beta.norm() == 0.0 {
        return Err(Error::Degenerate("odd cat state with beta = 0".into()));
    }
    Ok(WignerGrid::from_fn(grid, WignerSource::Analytic, |x, p| spec.point(t, x, p)))
}

/// Equal mixture of `|β⟩` and `|−β⟩`.
pub fn mixture_point(beta: C64, x: f64, p: f64) -> f64 {
    let (x, p) = rotate_to_real(beta, x, p);
    let b = beta.norm();
    2.0 / PI * (-2.0 * (x * x + p * p)).exp() * (4.0 * b * x).cosh() * (-2.0 * b * b).exp()
}

pub fn wigner_mixture(beta: C64, grid: &GridSpec) -> WignerGrid {
    WignerGrid::from_fn(grid, WignerSource::Analytic, |x, p| mixture_point(beta, x, p))
}

/// `β_t = β (1 − e^{−2Γ₂t})`.
pub fn beta_t(beta: f64, gamma2: f64, t: f64) -> f64 {
    beta * (1.0 - (-2.0 * gamma2 * t).exp())
}

/// Approximate even-cat formation under two-phonon pumping with weak
/// single-phonon loss.
pub fn approx_re_point(beta: f64, gamma1: f64, gamma2: f64, t: f64, x: f64, p: f64) -> f64 {
    let bt = beta_t(beta, gamma2, t);
    let b2 = bt * bt;
    let g = (-2.0 * (x * x + p * p)).exp();
    2.0 * g / (PI * (1.0 + (-2.0 * b2).exp()))
        * ((4.0 * bt * x).cosh() * (-2.0 * b2).exp() + (4.0 * bt * p).cos() * (-2.0 * b2 * gamma1 * t).exp())
}

pub fn wigner_approx_re(beta: f64, gamma1: f64, gamma2: f64, t: f64, grid: &GridSpec) -> Result<WignerGrid> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t = {t} must be >= 0")));
    }
    Ok(WignerGrid::from_fn(grid, WignerSource::Analytic, |x, p| {
        approx_re_point(beta, gamma1, gamma2, t, x, p)
    }))
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct WminModel {
    pub c: f64,
    pub k: f64,
    pub beta: C64,
    pub w_ideal: f64,
}

/// `W_ideal · exp[−2C|β|²(κ/2g₀)^{2k+2}]`
pub fn wmin_model(model: &WminModel, g0_over_kappa: f64) -> f64 {
    let r = 1.0 / (2.0 * g0_over_kappa);
    model.w_ideal * (-2.0 * model.c * model.beta.norm_sqr() * r.powf(2.0 * model.k + 2.0)).exp()
}

/// `t_min = (C/Γ₂)(Γ₁/Γ₂)^k`
pub fn t_min(c: f64, k: f64, gamma1: f64, gamma2: f64) -> f64 {
    c / gamma2 * (gamma1 / gamma2).powf(k)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CkFit {
    pub c: f64,
    pub k: f64,
    pub residual_norm: f64,
    pub n_used: usize,
}

/// Fits `C` and `k` by linear least squares of `ln(−ln(W_min/W_ideal))`
/// against `ln(κ/2g₀)`. Points with ratios outside `(1e−6, 0.999)` are
/// dropped.
pub fn fit_c_k(points: &[(f64, f64)], beta: C64, w_ideal: f64) -> Result<CkFit> {
    let data: Vec<(f64, f64)> = points.iter()
        .filter(|(g, _)| *g > 0.0)
        .filter_map(|&(g, w)| {
            let r = w / w_ideal;
            (r > 1e-6 && r < 0.999).then(|| ((1.0 / (2.0 * g)).ln(), (-r.ln()).ln()))
        })
        .collect();
    if data.len() < 4 {
        return Err(Error::Fit(format!("{} usable points, need at least 4", data.len())));
    }
    let n = data.len() as f64;
    let mx = data.iter().map(|d| d.0).sum::<f64>() / n;
    let my = data.iter().map(|d| d.1).sum::<f64>() / n;
    let sxx: f64 = data.iter().map(|d| (d.0 - mx).powi(2)).sum();
    let sxy: f64 = data.iter().map(|d| (d.0 - mx) * (d.1 - my)).sum();
    if sxx <= 1e-24 * (1.0 + mx * mx) * n {
        return Err(Error::Fit("all points share the same g0/kappa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_norm = data.iter()
        .map(|d| (d.1 - intercept - slope * d.0).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(CkFit {
        c: intercept.exp() / (2.0 * beta.norm_sqr()),
        k: slope / 2.0 - 1.0,
        residual_norm,
        n_used: data.len(),
    })
}
