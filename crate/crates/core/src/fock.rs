//! Truncated Fock-space linear algebra.
//!
//! A [`FockSpace`] is an ordered product of at most two bosonic modes, each
//! truncated to a finite number of levels. Basis indices are row-major over the
//! modes, so for the optomechanical space `(cavity, mech)` the index of
//! `|n_a, n_b⟩` is `n_a * N_b + n_b`.
//!
//! Operators are stored in compressed sparse row form; every operator used by
//! the models (ladder, number, parity and their products) has at most a few
//! nonzeros per row.

use std::f64::consts::PI;
use std::ops::{ Add, Mul, Neg, Sub };
use nalgebra as na;
use ndarray::{ Array1, Array2 };
use num_complex::Complex64 as C64;
use crate::error::{ Error, Result };

pub const CAVITY: &str = "cavity";
pub const MECH: &str = "mech";

/// Smallest mode dimension accepted for a coherent or cat state of amplitude
/// `beta`: `ceil(|β|² + 6 sqrt(|β|² + 1))`.
pub fn truncation_guard(beta_abs: f64) -> usize {
    let n = beta_abs * beta_abs;
    (n + 6.0 * (n + 1.0).sqrt()).ceil() as usize
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FockSpace {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl FockSpace {
    pub fn new<S: AsRef<str>>(modes: &[(S, usize)]) -> Result<Self> {
        if modes.is_empty() || modes.len() > 2 {
            return Err(Error::InvalidSpace(
                format!("expected one or two modes, got {}", modes.len())));
        }
        let mut dims = Vec::with_capacity(modes.len());
        let mut labels: Vec<String> = Vec::with_capacity(modes.len());
        for (label, dim) in modes {
            let label = label.as_ref();
            if *dim < 2 {
                return Err(Error::InvalidSpace(
                    format!("mode '{label}' has dimension {dim} < 2")));
            }
            if labels.iter().any(|l| l == label) {
                return Err(Error::InvalidSpace(
                    format!("duplicate mode label '{label}'")));
            }
            dims.push(*dim);
            labels.push(label.to_string());
        }
        Ok(Self { dims, labels })
    }

    pub fn single(label: &str, dim: usize) -> Result<Self> {
        Self::new(&[(label, dim)])
    }

    /// Two-mode space in the fixed `(cavity, mech)` order.
    pub fn optomechanical(n_cav: usize, n_mech: usize) -> Result<Self> {
        Self::new(&[(CAVITY, n_cav), (MECH, n_mech)])
    }

    pub fn dims(&self) -> &[usize] { &self.dims }

    pub fn labels(&self) -> &[String] { &self.labels }

    pub fn n_modes(&self) -> usize { self.dims.len() }

    pub fn total_dim(&self) -> usize { self.dims.iter().product() }

    pub fn mode_index(&self, label: &str) -> Result<usize> {
        self.labels.iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownMode(label.to_string()))
    }

    pub fn mode_dim(&self, label: &str) -> Result<usize> {
        Ok(self.dims[self.mode_index(label)?])
    }

    fn stride(&self, mode: usize) -> usize {
        self.dims[mode + 1..].iter().product()
    }

    /// Occupation of `mode` in basis state `idx`.
    pub fn occupation(&self, idx: usize, mode: usize) -> usize {
        (idx / self.stride(mode)) % self.dims[mode]
    }

    pub(crate) fn ensure_same(&self, other: &FockSpace, ctx: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch(format!(
                "{ctx}: {:?}{:?} vs {:?}{:?}",
                self.labels, self.dims, other.labels, other.dims)))
        }
    }

    /// Product space with the modes of `self` followed by those of `other`.
    pub fn product(&self, other: &FockSpace) -> Result<FockSpace> {
        let modes: Vec<(&str, usize)> = self.labels.iter()
            .chain(other.labels.iter())
            .zip(self.dims.iter().chain(other.dims.iter()))
            .map(|(l, d)| (l.as_str(), *d))
            .collect();
        FockSpace::new(&modes)
    }
}

/// A linear operator on a [`FockSpace`], stored as CSR.
#[derive(Clone, Debug)]
pub struct Operator {
    space: FockSpace,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl Operator {
    /// Builds an operator from `(row, col, value)` entries. Duplicates are
    /// summed and exact zeros dropped.
    pub fn from_triplets<I>(space: &FockSpace, entries: I) -> Self
    where I: IntoIterator<Item = (usize, usize, C64)>
    {
        let n = space.total_dim();
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); n];
        for (i, j, v) in entries {
            assert!(i < n && j < n, "entry ({i}, {j}) outside dimension {n}");
            rows[i].push((j, v));
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|(j, _)| *j);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut acc = C64::new(0.0, 0.0);
                while k < row.len() && row[k].0 == j {
                    acc += row[k].1;
                    k += 1;
                }
                if acc != C64::new(0.0, 0.0) {
                    indices.push(j);
                    values.push(acc);
                }
            }
            indptr.push(indices.len());
        }
        Self { space: space.clone(), indptr, indices, values }
    }

    pub fn zero(space: &FockSpace) -> Self {
        Self::from_triplets(space, std::iter::empty())
    }

    pub fn identity(space: &FockSpace) -> Self {
        Self::diagonal_from(space, |_| C64::new(1.0, 0.0))
    }

    fn diagonal_from<F>(space: &FockSpace, f: F) -> Self
    where F: Fn(usize) -> C64
    {
        let n = space.total_dim();
        Self::from_triplets(space, (0..n).map(|i| (i, i, f(i))))
    }

    pub fn from_dense(space: &FockSpace, m: &Array2<C64>) -> Result<Self> {
        let n = space.total_dim();
        if m.dim() != (n, n) {
            return Err(Error::SpaceMismatch(
                format!("matrix shape {:?} for dimension {n}", m.dim())));
        }
        Ok(Self::from_triplets(
            space,
            m.indexed_iter().map(|((i, j), v)| (i, j, *v)),
        ))
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let n = self.dim();
        let mut m = Array2::zeros((n, n));
        for (i, j, v) in self.triplets() {
            m[[i, j]] += v;
        }
        m
    }

    pub fn space(&self) -> &FockSpace { &self.space }

    pub fn dim(&self) -> usize { self.indptr.len() - 1 }

    pub fn nnz(&self) -> usize { self.values.len() }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim()).flat_map(move |i| {
            (self.indptr[i]..self.indptr[i + 1])
                .map(move |k| (i, self.indices[k], self.values[k]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        (self.indptr[i]..self.indptr[i + 1])
            .find(|&k| self.indices[k] == j)
            .map(|k| self.values[k])
            .unwrap_or_default()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            &self.space, self.triplets().map(|(i, j, v)| (j, i, v.conj())))
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn scale_re(&self, c: f64) -> Self { self.scale(C64::new(c, 0.0)) }

    /// `[self, other]`
    pub fn commutator(&self, other: &Operator) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest element of `|A - A†|`.
    pub fn hermiticity_residual(&self) -> f64 {
        (self - &self.adjoint()).max_abs()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol * self.max_abs().max(f64::MIN_POSITIVE)
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn apply(&self, v: &Array1<C64>) -> Array1<C64> {
        assert_eq!(v.len(), self.dim(), "vector length mismatch");
        Array1::from_iter((0..self.dim()).map(|i| {
            (self.indptr[i]..self.indptr[i + 1])
                .map(|k| self.values[k] * v[self.indices[k]])
                .sum::<C64>()
        }))
    }

    /// `self · m` for a dense square matrix `m`.
    pub fn mul_dense(&self, m: &Array2<C64>) -> Array2<C64> {
        let n = self.dim();
        assert_eq!(m.dim(), (n, n), "matrix shape mismatch");
        let m = m.as_standard_layout();
        let mut out = Array2::zeros((n, n));
        self.mul_dense_slice(
            m.as_slice().unwrap(), out.as_slice_mut().unwrap(), n, C64::new(1.0, 0.0));
        out
    }

    /// `out += coeff · self · m` where `m` and `out` are row-major
    /// `dim × ncols` buffers.
    pub(crate) fn mul_dense_slice(
        &self,
        m: &[C64],
        out: &mut [C64],
        ncols: usize,
        coeff: C64,
    ) {
        for i in 0..self.dim() {
            let out_row = &mut out[i * ncols..(i + 1) * ncols];
            for k in self.indptr[i]..self.indptr[i + 1] {
                let a = coeff * self.values[k];
                let j = self.indices[k];
                let src = &m[j * ncols..(j + 1) * ncols];
                for (o, s) in out_row.iter_mut().zip(src) {
                    *o += a * s;
                }
            }
        }
    }
}

impl<'a, 'b> Add<&'b Operator> for &'a Operator {
    type Output = Operator;

    fn add(self, rhs: &'b Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator space mismatch");
        Operator::from_triplets(&self.space, self.triplets().chain(rhs.triplets()))
    }
}

impl<'a, 'b> Sub<&'b Operator> for &'a Operator {
    type Output = Operator;

    fn sub(self, rhs: &'b Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator space mismatch");
        Operator::from_triplets(
            &self.space,
            self.triplets().chain(rhs.triplets().map(|(i, j, v)| (i, j, -v))),
        )
    }
}

impl<'a> Neg for &'a Operator {
    type Output = Operator;

    fn neg(self) -> Operator { self.scale_re(-1.0) }
}

impl<'a, 'b> Mul<&'b Operator> for &'a Operator {
    type Output = Operator;

    fn mul(self, rhs: &'b Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator space mismatch");
        let mut entries = Vec::new();
        for (i, k, a) in self.triplets() {
            for kk in rhs.indptr[k]..rhs.indptr[k + 1] {
                entries.push((i, rhs.indices[kk], a * rhs.values[kk]));
            }
        }
        Operator::from_triplets(&self.space, entries)
    }
}

impl<'a> Mul<C64> for &'a Operator {
    type Output = Operator;

    fn mul(self, rhs: C64) -> Operator { self.scale(rhs) }
}

/// Annihilation operator of `mode`, identity on the other mode.
pub fn ladder(space: &FockSpace, mode: &str) -> Result<Operator> {
    let m = space.mode_index(mode)?;
    let stride = space.stride(m);
    let entries = (0..space.total_dim()).filter_map(|i| {
        let n = space.occupation(i, m);
        (n > 0).then(|| (i - stride, i, C64::new((n as f64).sqrt(), 0.0)))
    });
    Ok(Operator::from_triplets(space, entries))
}

/// Number operator `b†b` of `mode`.
pub fn number(space: &FockSpace, mode: &str) -> Result<Operator> {
    let m = space.mode_index(mode)?;
    Ok(Operator::diagonal_from(space, |i| C64::new(space.occupation(i, m) as f64, 0.0)))
}

/// Parity operator `(-1)^{b†b}` of `mode`.
pub fn parity_operator(space: &FockSpace, mode: &str) -> Result<Operator> {
    let m = space.mode_index(mode)?;
    Ok(Operator::diagonal_from(space, |i| {
        if space.occupation(i, m) % 2 == 0 { C64::new(1.0, 0.0) } else { C64::new(-1.0, 0.0) }
    }))
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

impl std::str::FromStr for Parity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "even" | "+" | "plus" => Ok(Parity::Even),
            "odd" | "-" | "minus" => Ok(Parity::Odd),
            other => Err(Error::InvalidParameter(format!("unknown parity '{other}'"))),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct CatSpec {
    pub beta: C64,
    pub parity: Parity,
}

impl CatSpec {
    pub fn new(beta: C64, parity: Parity) -> Result<Self> {
        if !(beta.re.is_finite() && beta.im.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite cat amplitude {beta}")));
        }
        Ok(Self { beta, parity })
    }

    pub fn even(beta: f64) -> Self {
        Self { beta: C64::new(beta, 0.0), parity: Parity::Even }
    }

    pub fn odd(beta: f64) -> Self {
        Self { beta: C64::new(beta, 0.0), parity: Parity::Odd }
    }

    /// Exact Fock distribution `P_n` of the untruncated cat state.
    pub fn fock_probability(&self, n: usize) -> f64 {
        let b2 = self.beta.norm_sqr();
        let s = self.parity.sign();
        let ln_pois = -b2 + n as f64 * b2.ln() - ln_factorial(n);
        let bracket = 1.0 + s * if n % 2 == 0 { 1.0 } else { -1.0 };
        if bracket == 0.0 {
            return 0.0;
        }
        let pois = if b2 == 0.0 { if n == 0 { 1.0 } else { 0.0 } } else { ln_pois.exp() };
        pois * bracket * bracket / (2.0 * (1.0 + s * (-2.0 * b2).exp()))
    }
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Normalized pure state.
#[derive(Clone, Debug)]
pub struct StateVector {
    space: FockSpace,
    amps: Array1<C64>,
}

impl StateVector {
    /// Normalizes `amps` to unit norm.
    pub fn new(space: &FockSpace, amps: Array1<C64>) -> Result<Self> {
        if amps.len() != space.total_dim() {
            return Err(Error::SpaceMismatch(format!(
                "{} amplitudes for dimension {}", amps.len(), space.total_dim())));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Degenerate("state vector has zero norm".into()));
        }
        Ok(Self { space: space.clone(), amps: amps.mapv(|a| a / norm) })
    }

    pub fn basis(space: &FockSpace, idx: usize) -> Result<Self> {
        let mut amps = Array1::zeros(space.total_dim());
        if idx >= amps.len() {
            return Err(Error::InvalidParameter(format!("basis index {idx} out of range")));
        }
        amps[idx] = C64::new(1.0, 0.0);
        Ok(Self { space: space.clone(), amps })
    }

    pub fn vacuum(space: &FockSpace) -> Self {
        Self::basis(space, 0).expect("vacuum index is always valid")
    }

    pub fn space(&self) -> &FockSpace { &self.space }

    pub fn amplitudes(&self) -> &Array1<C64> { &self.amps }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.space.ensure_same(&other.space, "inner product")?;
        Ok(self.amps.iter().zip(other.amps.iter()).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn expect(&self, op: &Operator) -> Result<C64> {
        self.space.ensure_same(op.space(), "expectation value")?;
        let av = op.apply(&self.amps);
        Ok(self.amps.iter().zip(av.iter()).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn fock_probabilities(&self, mode: &str) -> Result<Vec<f64>> {
        DensityMatrix::from_pure(self).fock_probabilities(mode)
    }

    /// Tensor product `|self⟩ ⊗ |other⟩`.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let space = self.space.product(&other.space)?;
        let amps = Array1::from_iter(
            self.amps.iter().flat_map(|a| other.amps.iter().map(move |b| a * b)));
        Ok(StateVector { space, amps })
    }
}

fn check_single_mode(space: &FockSpace, what: &str) -> Result<()> {
    if space.n_modes() != 1 {
        return Err(Error::InvalidSpace(format!("{what} requires a single-mode space")));
    }
    Ok(())
}

fn coherent_amplitudes(dim: usize, beta: C64) -> Array1<C64> {
    let mut amps = Array1::zeros(dim);
    amps[0] = C64::new((-beta.norm_sqr() / 2.0).exp(), 0.0);
    for n in 1..dim {
        amps[n] = amps[n - 1] * beta / (n as f64).sqrt();
    }
    amps
}

fn guard(dim: usize, beta: C64) -> Result<()> {
    let required = truncation_guard(beta.norm());
    if dim < required {
        return Err(Error::Truncation { dim, required, beta_sq: beta.norm_sqr() });
    }
    Ok(())
}

/// Coherent state `|β⟩` on a single-mode space, renormalized after truncation.
pub fn coherent_state(space: &FockSpace, beta: C64) -> Result<StateVector> {
    check_single_mode(space, "coherent state")?;
    let dim = space.total_dim();
    if beta != C64::new(0.0, 0.0) {
        guard(dim, beta)?;
    }
    StateVector::new(space, coherent_amplitudes(dim, beta))
}

/// Even or odd cat state `(|β⟩ ± |−β⟩)/N` on a single-mode space.
pub fn cat_state(space: &FockSpace, spec: &CatSpec) -> Result<StateVector> {
    check_single_mode(space, "cat state")?;
    let dim = space.total_dim();
    if spec.parity == Parity::Odd && spec.beta.norm() == 0.0 {
        return Err(Error::Degenerate("odd cat state with beta = 0".into()));
    }
    guard(dim, spec.beta)?;
    let coh = coherent_amplitudes(dim, spec.beta);
    let keep = match spec.parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    let amps = Array1::from_iter(coh.iter().enumerate().map(|(n, a)| {
        if n % 2 == keep { a * 2.0 } else { C64::new(0.0, 0.0) }
    }));
    StateVector::new(space, amps)
}

/// Density matrix on a [`FockSpace`], dense and row-major.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    space: FockSpace,
    data: Array2<C64>,
}

impl DensityMatrix {
    pub fn from_matrix(space: &FockSpace, data: Array2<C64>) -> Result<Self> {
        let n = space.total_dim();
        if data.dim() != (n, n) {
            return Err(Error::SpaceMismatch(
                format!("matrix shape {:?} for dimension {n}", data.dim())));
        }
        Ok(Self { space: space.clone(), data: data.as_standard_layout().into_owned() })
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let a = psi.amplitudes();
        let n = a.len();
        let data = Array2::from_shape_fn((n, n), |(i, j)| a[i] * a[j].conj());
        Self { space: psi.space().clone(), data }
    }

    pub fn vacuum(space: &FockSpace) -> Self {
        Self::from_pure(&StateVector::vacuum(space))
    }

    pub fn maximally_mixed(space: &FockSpace) -> Self {
        let n = space.total_dim();
        let data = Array2::from_diag_elem(n, C64::new(1.0 / n as f64, 0.0));
        Self { space: space.clone(), data }
    }

    /// Thermal state with mean occupancy `nbar`, renormalized after
    /// truncation.
    pub fn thermal(space: &FockSpace, nbar: f64) -> Result<Self> {
        check_single_mode(space, "thermal state")?;
        if !(nbar >= 0.0) || !nbar.is_finite() {
            return Err(Error::InvalidParameter(format!("thermal occupancy {nbar} < 0")));
        }
        let dim = space.total_dim();
        let ratio = nbar / (nbar + 1.0);
        let mut p: Vec<f64> = (0..dim).map(|n| ratio.powi(n as i32) / (nbar + 1.0)).collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        let mut data = Array2::zeros((dim, dim));
        for (n, pn) in p.into_iter().enumerate() {
            data[[n, n]] = C64::new(pn, 0.0);
        }
        Ok(Self { space: space.clone(), data })
    }

    /// `self ⊗ other` on the product space.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self> {
        let space = self.space.product(&other.space)?;
        let (n1, n2) = (self.dim(), other.dim());
        let data = Array2::from_shape_fn((n1 * n2, n1 * n2), |(i, j)| {
            self.data[[i / n2, j / n2]] * other.data[[i % n2, j % n2]]
        });
        Ok(Self { space, data })
    }

    pub fn space(&self) -> &FockSpace { &self.space }

    pub fn dim(&self) -> usize { self.data.nrows() }

    pub fn data(&self) -> &Array2<C64> { &self.data }

    pub fn into_data(self) -> Array2<C64> { self.data }

    pub fn trace(&self) -> C64 { self.data.diag().sum() }

    /// `max|ρ − ρ†| / max|ρ|`
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.dim();
        let mut res = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                res = res.max((self.data[[i, j]] - self.data[[j, i]].conj()).norm());
                scale = scale.max(self.data[[i, j]].norm());
            }
        }
        if scale == 0.0 { 0.0 } else { res / scale }
    }

    /// Replaces `ρ` by `(ρ + ρ†)/2`.
    pub fn resymmetrize(&mut self) {
        hermitize(&mut self.data);
    }

    /// Smallest eigenvalue of the Hermitian part of `ρ`.
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.dim();
        let m = na::DMatrix::from_fn(n, n, |i, j| {
            (self.data[[i, j]] + self.data[[j, i]].conj()) * 0.5
        });
        na::SymmetricEigen::new(m).eigenvalues.iter().copied().collect()
    }

    /// `Tr(A ρ)`
    pub fn expect(&self, op: &Operator) -> Result<C64> {
        self.space.ensure_same(op.space(), "expectation value")?;
        Ok(op.triplets().map(|(i, j, v)| v * self.data[[j, i]]).sum())
    }

    pub fn purity(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Reduced density matrix of `keep`, tracing out every other mode.
    pub fn partial_trace(&self, keep: &str) -> Result<DensityMatrix> {
        if self.space.n_modes() < 2 {
            return Err(Error::InvalidSpace("partial trace of a single-mode state".into()));
        }
        let k = self.space.mode_index(keep)?;
        let dk = self.space.dims()[k];
        let stride = self.space.stride(k);
        let n = self.dim();
        let rest = |i: usize| i - self.space.occupation(i, k) * stride;
        let mut out = Array2::zeros((dk, dk));
        for i in 0..n {
            let (ri, oi) = (rest(i), self.space.occupation(i, k));
            for oj in 0..dk {
                let j = ri + oj * stride;
                out[[oi, oj]] += self.data[[i, j]];
            }
        }
        let space = FockSpace::single(keep, dk)?;
        Ok(DensityMatrix { space, data: out })
    }

    /// `⟨ψ|ρ|ψ⟩`. A single-mode target is compared against the reduced state
    /// of the mode carrying the same label.
    pub fn fidelity(&self, target: &StateVector) -> Result<f64> {
        let reduced;
        let rho = if self.space != *target.space() && target.space().n_modes() == 1
            && self.space.n_modes() > 1
        {
            reduced = self.partial_trace(&target.space().labels()[0])?;
            &reduced
        } else {
            self
        };
        rho.space.ensure_same(target.space(), "fidelity")?;
        let a = target.amplitudes();
        let n = a.len();
        let mut f = C64::new(0.0, 0.0);
        for i in 0..n {
            if a[i] == C64::new(0.0, 0.0) {
                continue;
            }
            let row: C64 = (0..n).map(|j| rho.data[[i, j]] * a[j]).sum();
            f += a[i].conj() * row;
        }
        Ok(clamp_unit(f.re))
    }

    /// `⟨(−1)^{n}⟩` for `mode`.
    pub fn parity_expectation(&self, mode: &str) -> Result<f64> {
        let m = self.space.mode_index(mode)?;
        Ok((0..self.dim())
            .map(|i| {
                let s = if self.space.occupation(i, m) % 2 == 0 { 1.0 } else { -1.0 };
                s * self.data[[i, i]].re
            })
            .sum())
    }

    /// Number expectation `⟨n⟩` for `mode`.
    pub fn mean_occupation(&self, mode: &str) -> Result<f64> {
        let m = self.space.mode_index(mode)?;
        Ok((0..self.dim())
            .map(|i| self.space.occupation(i, m) as f64 * self.data[[i, i]].re)
            .sum())
    }

    pub fn fock_probabilities(&self, mode: &str) -> Result<Vec<f64>> {
        let m = self.space.mode_index(mode)?;
        let mut p = vec![0.0; self.space.dims()[m]];
        for i in 0..self.dim() {
            p[self.space.occupation(i, m)] += self.data[[i, i]].re.max(0.0);
        }
        Ok(p)
    }

    /// `e^{iθ n} ρ e^{-iθ n}` for `mode`: moves a state into a frame rotating
    /// at angular frequency `θ/t`.
    pub fn rotate_mode(&self, mode: &str, theta: f64) -> Result<DensityMatrix> {
        let m = self.space.mode_index(mode)?;
        let occ: Vec<f64> = (0..self.dim()).map(|i| self.space.occupation(i, m) as f64).collect();
        let data = Array2::from_shape_fn(self.data.dim(), |(i, j)| {
            self.data[[i, j]] * C64::from_polar(1.0, theta * (occ[i] - occ[j]))
        });
        Ok(DensityMatrix { space: self.space.clone(), data })
    }
}

fn clamp_unit(x: f64) -> f64 {
    if (-1e-10..0.0).contains(&x) {
        0.0
    } else if (1.0..=1.0 + 1e-10).contains(&x) {
        1.0
    } else {
        x
    }
}

pub(crate) fn hermitize(m: &mut Array2<C64>) {
    let n = m.nrows();
    for i in 0..n {
        m[[i, i]] = C64::new(m[[i, i]].re, 0.0);
        for j in i + 1..n {
            let v = (m[[i, j]] + m[[j, i]].conj()) * 0.5;
            m[[i, j]] = v;
            m[[j, i]] = v.conj();
        }
    }
}

/// Vacuum Wigner peak `2/π` in the `x = (b + b†)/2` convention.
pub const WIGNER_PEAK: f64 = 2.0 / PI;
