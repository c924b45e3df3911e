//! Physical parameters, derived coupling rates, and the three master-equation
//! models: full two-mode optomechanics, the reduced mechanical model, and the
//! two-phonon toy model.

use std::f64::consts::PI;
use log::warn;
use num_complex::Complex64 as C64;
use crate::dynamics::ModelSpec;
use crate::error::{ Error, Result };
use crate::fock::{ ladder, number, truncation_guard, FockSpace, CAVITY, MECH };

pub const TWO_PI: f64 = 2.0 * PI;

/// Physical inputs; every frequency is an angular frequency in rad/s.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    pub g0: f64,
    pub omega_m: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub nbar_b: f64,
    pub nbar_a: f64,
    /// Intracavity pump photon number `|α|²`.
    pub n_p: f64,
    pub eps_d: C64,
    /// Pump detuning `ω_p − ω_c`; defaults to `−2ω̃_m`.
    pub delta: Option<f64>,
    /// `ω_p − ω_d`; defaults to `−2ω̃_m`.
    pub delta_prime: Option<f64>,
    pub pump_phase: f64,
}

impl SystemParams {
    /// Reference parameter set (`fig2` scenario) with no drive.
    pub fn fig2() -> Self {
        Self {
            g0: TWO_PI * 1e6,
            omega_m: TWO_PI * 15e6,
            gamma: TWO_PI * 15.0,
            kappa: TWO_PI * 100e3,
            nbar_b: 0.0,
            nbar_a: 0.0,
            n_p: 0.1,
            eps_d: C64::new(0.0, 0.0),
            delta: None,
            delta_prime: None,
            pump_phase: 0.0,
        }
    }

    /// Base parameters of the (g₀/κ, Γ_th) map; κ and Γ are swept.
    pub fn fig4() -> Self {
        Self {
            g0: TWO_PI * 10e3,
            omega_m: TWO_PI * 20e6,
            gamma: TWO_PI * 1.0,
            kappa: TWO_PI * 10e3,
            nbar_b: 10.0,
            n_p: 100.0,
            ..Self::fig2()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("g0", self.g0), ("omega_m", self.omega_m), ("Gamma", self.gamma), ("kappa", self.kappa)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be > 0")));
            }
        }
        let nonneg = [("nbar_b", self.nbar_b), ("nbar_a", self.nbar_a), ("n_p", self.n_p)];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be >= 0")));
            }
        }
        if !(self.eps_d.re.is_finite() && self.eps_d.im.is_finite()) {
            return Err(Error::InvalidParameter("eps_d must be finite".into()));
        }
        Ok(())
    }

    pub fn alpha(&self) -> C64 {
        C64::from_polar(self.n_p.sqrt(), self.pump_phase)
    }

    pub fn g0_over_kappa(&self) -> f64 { self.g0 / self.kappa }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Regime {
    SidebandResolved,
    NonSidebandResolved,
}

impl Regime {
    /// Regime implied by `κ/ω_m`.
    pub fn for_params(p: &SystemParams) -> Self {
        if p.kappa < p.omega_m { Regime::SidebandResolved } else { Regime::NonSidebandResolved }
    }
}

/// Coefficients derived from [`SystemParams`]; rates in rad/s.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedRates {
    pub regime: Regime,
    pub alpha: C64,
    pub g1: C64,
    pub g2: C64,
    pub eps2: C64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub kerr: f64,
    pub delta_w1: f64,
    pub delta_w2: f64,
    pub omega_m_dressed: f64,
    pub delta_wc: f64,
    pub gamma_th: f64,
    pub gamma_lin: f64,
    pub gamma_ex: f64,
    pub gamma_dec: f64,
    pub beta_de: f64,
    pub beta_kc: f64,
    /// Neglected incoherent two-phonon drive relative to Γ₂: `(κ/8ω_m)²`.
    pub incoherent_ratio: f64,
}

pub fn derive_rates(p: &SystemParams, regime: Regime) -> Result<DerivedRates> {
    p.validate()?;
    let implied = Regime::for_params(p);
    if regime == Regime::SidebandResolved && p.kappa >= p.omega_m / 10.0 {
        warn!("sideband-resolved rates requested with kappa/omega_m = {:.3}", p.kappa / p.omega_m);
    } else if regime != implied {
        warn!("{regime:?} rates requested but kappa/omega_m = {:.3}", p.kappa / p.omega_m);
    }
    let alpha = p.alpha();
    let g1 = alpha * p.g0;
    let g2 = alpha * (p.g0 * p.g0 / p.omega_m);
    let eps2 = C64::new(0.0, 2.0) * p.eps_d * g2.conj() / p.kappa;
    let g1s = g1.norm_sqr();
    let g2s = g2.norm_sqr();
    let (gamma1, gamma2, kerr, delta_w1, delta_w2) = match regime {
        Regime::SidebandResolved => {
            let gamma1 = g1s * p.kappa / (p.omega_m * p.omega_m);
            let dw1 = -4.0 * g1s / (3.0 * p.omega_m);
            let r = 3.0 * p.g0 / (4.0 * p.omega_m);
            (gamma1, 4.0 * g2s / p.kappa, g2s / (4.0 * p.omega_m), dw1, r * r * dw1)
        }
        Regime::NonSidebandResolved => {
            let gamma1 = 4.0 * g1s / p.kappa;
            let r = p.g0 / p.omega_m;
            let dw1 = -16.0 * g1s * p.omega_m / (p.kappa * p.kappa);
            let kerr = 16.0 * p.omega_m * g2s / (p.kappa * p.kappa);
            (gamma1, r * r * gamma1, kerr, dw1, 3.0 * r * r * dw1)
        }
    };
    let gamma_th = (p.nbar_b + 1.0) * p.gamma;
    let gamma_lin = gamma_th + gamma1;
    let gamma_ex = p.nbar_b * p.gamma + match regime {
        Regime::SidebandResolved => gamma1 / 9.0,
        Regime::NonSidebandResolved => gamma1,
    };
    let beta_de = if g2s > 0.0 { (p.eps_d.norm() / g2.norm()).sqrt() } else { 0.0 };
    Ok(DerivedRates {
        regime,
        alpha,
        g1,
        g2,
        eps2,
        gamma1,
        gamma2,
        kerr,
        delta_w1,
        delta_w2,
        omega_m_dressed: p.omega_m + delta_w1 + delta_w2,
        delta_wc: 2.0 * p.g0 * p.g0 * p.n_p / p.omega_m,
        gamma_th,
        gamma_lin,
        gamma_ex,
        gamma_dec: 2.0 * beta_de * beta_de * (gamma_lin + gamma_ex),
        beta_de,
        beta_kc: (8.0 * p.omega_m / p.kappa).sqrt() * beta_de,
        incoherent_ratio: (p.kappa / (8.0 * p.omega_m)).powi(2),
    })
}

/// Drive amplitude giving a cat of size `beta` (`|ε_d| = β²|g₂|`). The phase
/// makes `ε₂` positive imaginary, so `β` is real and the lobes sit on the x
/// axis.
pub fn drive_for_target_beta(p: &SystemParams, beta: f64) -> Result<C64> {
    let g2 = p.alpha() * (p.g0 * p.g0 / p.omega_m);
    if g2.norm() == 0.0 {
        return Err(Error::Degenerate("zero pump: g2 = 0".into()));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("target beta {beta} must be >= 0")));
    }
    Ok(C64::from_polar(beta * beta * g2.norm(), g2.arg()))
}

/// `p` with `eps_d` set for a cat of size `beta`.
pub fn with_target_beta(p: &SystemParams, beta: f64) -> Result<SystemParams> {
    Ok(SystemParams { eps_d: drive_for_target_beta(p, beta)?, ..p.clone() })
}

pub fn kerr_cat_size(rates: &DerivedRates) -> Result<f64> {
    if rates.kerr == 0.0 {
        if rates.eps2.norm() == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::Degenerate("Kerr strength is zero".into()));
    }
    Ok((rates.eps2.norm() / rates.kerr).sqrt())
}

fn check_mech_guard(n_mech: usize, beta: f64) -> Result<()> {
    let required = truncation_guard(beta);
    if n_mech < required {
        return Err(Error::Truncation { dim: n_mech, required, beta_sq: beta * beta });
    }
    Ok(())
}

/// Full two-mode model in the pump-rotating, displaced frame on a
/// `(cavity, mech)` space of dimensions `(n_cav, n_mech)`.
pub fn build_full_model(p: &SystemParams, n_cav: usize, n_mech: usize) -> Result<ModelSpec> {
    let rates = derive_rates(p, Regime::SidebandResolved)?;
    if n_cav < 5 {
        return Err(Error::Truncation { dim: n_cav, required: 5, beta_sq: rates.beta_de.powi(2) });
    }
    check_mech_guard(n_mech, rates.beta_de)?;
    let detuning = -2.0 * rates.omega_m_dressed;
    let delta = p.delta.unwrap_or(detuning);
    let delta_prime = p.delta_prime.unwrap_or(detuning);

    let s = FockSpace::optomechanical(n_cav, n_mech)?;
    let a = ladder(&s, CAVITY)?;
    let b = ladder(&s, MECH)?;
    let ad = a.adjoint();
    let bx = &b + &b.adjoint();
    let na = number(&s, CAVITY)?;
    let nb = number(&s, MECH)?;

    let mut h = &na.scale_re(-delta) + &nb.scale_re(p.omega_m);
    h = &h + &(&a * &bx).scale(rates.g1.conj());
    h = &h + &(&ad * &bx).scale(rates.g1);
    h = &h + &(&na * &bx).scale_re(p.g0);

    let mut model = ModelSpec::new(h)?
        .with_drive(ad.clone(), p.eps_d, delta_prime)?
        .with_lindblad(p.kappa * (p.nbar_a + 1.0), a)?
        .with_lindblad(p.kappa * p.nbar_a, ad)?
        .with_lindblad(p.gamma * (p.nbar_b + 1.0), b.clone())?;
    model = model.with_lindblad(p.gamma * p.nbar_b, b.adjoint())?;
    Ok(model)
}

/// Reduced mechanical model with the cavity adiabatically eliminated.
pub fn build_reduced_model(p: &SystemParams, n_mech: usize) -> Result<ModelSpec> {
    if p.kappa >= p.omega_m {
        return Err(Error::Regime(format!(
            "reduced model needs the sideband-resolved regime; kappa/omega_m = {:.3}",
            p.kappa / p.omega_m)));
    }
    let rates = derive_rates(p, Regime::SidebandResolved)?;
    if rates.incoherent_ratio >= 1e-3 {
        return Err(Error::Regime(format!(
            "incoherent two-phonon drive ratio (kappa/8 omega_m)^2 = {:.3e} >= 1e-3",
            rates.incoherent_ratio)));
    }
    check_mech_guard(n_mech, rates.beta_de)?;
    let s = FockSpace::single(MECH, n_mech)?;
    let b = ladder(&s, MECH)?;
    let bd = b.adjoint();
    let b2 = &b * &b;
    let bd2 = &bd * &bd;
    let nb = number(&s, MECH)?;
    let h = &(&bd2.scale(rates.eps2) + &b2.scale(rates.eps2.conj())) - &(&nb * &nb).scale_re(rates.kerr);
    ModelSpec::new(h)?
        .with_lindblad(rates.gamma2, b2)?
        .with_lindblad(rates.gamma_lin, b)?
        .with_lindblad(rates.gamma_ex, bd)
}

/// Two-phonon toy model `H = ε₂* b² + ε₂ b†²` with `Γ₂ L[b²]` and a thermal
/// single-phonon bath of occupancy `nth` at rate `Γ₁`.
pub fn build_toy_model(space: &FockSpace, gamma1: f64, gamma2: f64, eps2: C64, nth: f64) -> Result<ModelSpec> {
    for (name, v) in [("Gamma1", gamma1), ("Gamma2", gamma2), ("nth", nth)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} = {v} must be >= 0")));
        }
    }
    let b = ladder(space, MECH)?;
    let bd = b.adjoint();
    let b2 = &b * &b;
    let h = &(&bd * &bd).scale(eps2) + &b2.scale(eps2.conj());
    ModelSpec::new(h)?
        .with_lindblad(gamma2, b2)?
        .with_lindblad(gamma1 * (nth + 1.0), b)?
        .with_lindblad(gamma1 * nth, bd)
}

/// `ε₂` for the toy model whose steady state has real size `beta`.
pub fn toy_eps2_for_beta(gamma2: f64, beta: f64) -> C64 {
    C64::new(0.0, gamma2 * beta * beta / 2.0)
}

/// Complex steady-state amplitude `β` with `β² = −2iε₂/Γ₂`.
pub fn toy_beta(gamma2: f64, eps2: C64) -> C64 {
    (C64::new(0.0, -2.0) * eps2 / gamma2).sqrt()
}
