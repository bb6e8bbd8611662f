//! Coplanar-waveguide resonator design formulas: geometry → characteristic
//! impedance and effective permittivity (zero-thickness conformal-mapping
//! model), λ/4 resonance frequency, lumped LC equivalent, capacitive-loading
//! correction, and quality-factor/linewidth/lifetime conversions.
//!
//! The conformal-mapping result for a CPW of trace width w and gap s on an
//! infinitely thick substrate of permittivity ε_r is
//!
//!   k = w/(w + 2s),  ε_eff = (1 + ε_r)/2,  Z0 = 30π/√ε_eff · K(k′)/K(k)
//!
//! with K the complete elliptic integral of the first kind (evaluated by the
//! arithmetic-geometric mean, see [`crate::elliptic`]) and k′ = √(1 − k²).
//! Metal thickness, finite substrate height, and kinetic inductance are
//! ignored; for typical 50 Ω geometries on silicon the model lands within
//! ~1% of the target impedance.

use crate::constants::{SPEED_OF_LIGHT, TWO_PI};
use crate::elliptic::complete_elliptic_k;
use crate::error::{CqedError, Result};

/// Planar geometry of a CPW transmission-line resonator. Lengths in meters.
#[derive(Debug, Clone, Copy)]
pub struct CpwGeometry {
    /// Center-trace width w.
    pub trace_width: f64,
    /// Gap s between trace and ground planes (one side).
    pub gap: f64,
    /// Relative permittivity of the substrate; ≥ 1 (1 = vacuum).
    pub substrate_eps_r: f64,
    /// Physical resonator length (λ/4 section).
    pub length: f64,
    /// Substrate thickness; informational only — the impedance model
    /// assumes an infinitely thick substrate.
    pub substrate_thickness: Option<f64>,
}

impl CpwGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("trace width", self.trace_width),
            ("gap", self.gap),
            ("length", self.length),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CqedError::Validation(format!(
                    "CPW {name} must be positive, got {v} m"
                )));
            }
        }
        if !(self.substrate_eps_r >= 1.0) || !self.substrate_eps_r.is_finite() {
            return Err(CqedError::Validation(format!(
                "substrate permittivity must be ≥ 1, got {}",
                self.substrate_eps_r
            )));
        }
        if let Some(t) = self.substrate_thickness {
            if !(t > 0.0) || !t.is_finite() {
                return Err(CqedError::Validation(format!(
                    "substrate thickness must be positive, got {t} m"
                )));
            }
        }
        Ok(())
    }
}

/// Electrical summary of a CPW resonator. The lumped capacitance is the λ/4
/// LC equivalent evaluated at the bare resonance.
#[derive(Debug, Clone, Copy)]
pub struct ResonatorElectrical {
    /// Characteristic impedance in ohms.
    pub z0: f64,
    /// Effective permittivity (1 + ε_r)/2.
    pub eps_eff: f64,
    /// Bare λ/4 resonance frequency in Hz.
    pub f_bare: f64,
    /// Lumped equivalent capacitance in farads.
    pub c_lumped: f64,
    /// Resonance after capacitive loading by the couplers, Hz; ≤ f_bare.
    pub f_loaded: f64,
}

/// Characteristic impedance (ohms) and effective permittivity of a CPW.
pub fn cpw_impedance(geom: &CpwGeometry) -> Result<(f64, f64)> {
    geom.validate()?;
    // k ∈ (0, 1) is guaranteed for positive w and s.
    let k = geom.trace_width / (geom.trace_width + 2.0 * geom.gap);
    let k_prime = (1.0 - k * k).sqrt();
    let eps_eff = (1.0 + geom.substrate_eps_r) / 2.0;
    let z0 = 30.0 * std::f64::consts::PI / eps_eff.sqrt() * complete_elliptic_k(k_prime)
        / complete_elliptic_k(k);
    Ok((z0, eps_eff))
}

/// Bare quarter-wave resonance f = c/(4·L·√ε_eff) in Hz.
pub fn quarter_wave_frequency(geom: &CpwGeometry) -> Result<f64> {
    geom.validate()?;
    let eps_eff = (1.0 + geom.substrate_eps_r) / 2.0;
    Ok(SPEED_OF_LIGHT / (4.0 * geom.length * eps_eff.sqrt()))
}

/// Lumped capacitance of the λ/4 LC equivalent: C = π/(4·ω·Z0) with
/// ω = 2πf. Matches the line's reactance slope at resonance.
pub fn lumped_equivalent(f: f64, z0: f64) -> Result<f64> {
    if !(f > 0.0) || !f.is_finite() {
        return Err(CqedError::Validation(format!(
            "frequency must be positive, got {f} Hz"
        )));
    }
    if !(z0 > 0.0) || !z0.is_finite() {
        return Err(CqedError::Validation(format!(
            "impedance must be positive, got {z0} Ω"
        )));
    }
    Ok(std::f64::consts::PI / (4.0 * TWO_PI * f * z0))
}

/// First-order capacitive-loading correction: the couplers add to the
/// lumped capacitance, pulling the resonance down by
/// f_loaded = f_bare·√(C/(C + ΣC_c)). Always ≤ f_bare.
pub fn loaded_frequency(f_bare: f64, c_lumped: f64, c_couplings: &[f64]) -> Result<f64> {
    if !(f_bare > 0.0) || !(c_lumped > 0.0) {
        return Err(CqedError::Validation(
            "bare frequency and lumped capacitance must be positive".into(),
        ));
    }
    let mut total = 0.0;
    for &c in c_couplings {
        if c < 0.0 || !c.is_finite() {
            return Err(CqedError::Validation(format!(
                "coupling capacitance must be nonnegative, got {c} F"
            )));
        }
        total += c;
    }
    Ok(f_bare * (c_lumped / (c_lumped + total)).sqrt())
}

/// Full geometry → electrical reduction: impedance, bare λ/4 frequency,
/// lumped equivalent at the bare frequency, and the loaded frequency after
/// the given coupling capacitors.
pub fn analyze_cpw(geom: &CpwGeometry, c_couplings: &[f64]) -> Result<ResonatorElectrical> {
    let (z0, eps_eff) = cpw_impedance(geom)?;
    let f_bare = quarter_wave_frequency(geom)?;
    let c_lumped = lumped_equivalent(f_bare, z0)?;
    let f_loaded = loaded_frequency(f_bare, c_lumped, c_couplings)?;
    Ok(ResonatorElectrical {
        z0,
        eps_eff,
        f_bare,
        c_lumped,
        f_loaded,
    })
}

// ---------------------------------------------------------------------------
// Quality factors
// ---------------------------------------------------------------------------

/// Energy relaxation time T1 = Q/(2π·f) in seconds.
pub fn q_to_t1(q: f64, f: f64) -> Result<f64> {
    if !(q > 0.0) || !(f > 0.0) || !q.is_finite() || !f.is_finite() {
        return Err(CqedError::Validation(format!(
            "quality factor and frequency must be positive, got Q = {q}, f = {f} Hz"
        )));
    }
    Ok(q / (TWO_PI * f))
}

/// Quality factor Q = 2π·f·T1 from a relaxation time; inverse of
/// [`q_to_t1`].
pub fn t1_to_q(t1: f64, f: f64) -> Result<f64> {
    if !(t1 > 0.0) || !(f > 0.0) || !t1.is_finite() || !f.is_finite() {
        return Err(CqedError::Validation(format!(
            "relaxation time and frequency must be positive, got T1 = {t1} s, f = {f} Hz"
        )));
    }
    Ok(TWO_PI * f * t1)
}

/// Resonator linewidth κ = f_r/Q_l in Hz (full width at half maximum of the
/// power dip).
pub fn kappa_of(q_l: f64, f_r: f64) -> Result<f64> {
    if !(q_l > 0.0) || !(f_r > 0.0) || !q_l.is_finite() || !f_r.is_finite() {
        return Err(CqedError::Validation(format!(
            "quality factor and frequency must be positive, got Q_l = {q_l}, f_r = {f_r} Hz"
        )));
    }
    Ok(f_r / q_l)
}

/// Loaded/coupling/internal quality factors of one resonance, with the
/// derived linewidth and lifetime. `q_c` is the effective real coupling
/// quality factor 1/Re(1/Q_c), so the combination law is exact:
/// 1/Q_l = 1/Q_i + 1/Q_c.
#[derive(Debug, Clone, Copy)]
pub struct QualityFactors {
    pub q_l: f64,
    pub q_c: f64,
    pub q_i: f64,
    /// Resonance frequency in Hz.
    pub f_r: f64,
    /// Linewidth f_r/Q_l in Hz.
    pub kappa: f64,
    /// Photon lifetime Q_l/(2π·f_r) in seconds.
    pub t1: f64,
}

impl QualityFactors {
    /// Build from all three quality factors, checking the combination law
    /// 1/Q_l = 1/Q_i + 1/Q_c to 10⁻⁹ relative.
    pub fn new(q_l: f64, q_c: f64, q_i: f64, f_r: f64) -> Result<Self> {
        for (name, v) in [("Q_l", q_l), ("Q_c", q_c), ("Q_i", q_i)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CqedError::Validation(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let combined = 1.0 / q_i + 1.0 / q_c;
        let rel = (1.0 / q_l - combined).abs() * q_l;
        if rel > 1e-9 {
            return Err(CqedError::Validation(format!(
                "quality factors violate 1/Q_l = 1/Q_i + 1/Q_c by {rel:.2e} relative"
            )));
        }
        Ok(QualityFactors {
            q_l,
            q_c,
            q_i,
            f_r,
            kappa: kappa_of(q_l, f_r)?,
            t1: q_to_t1(q_l, f_r)?,
        })
    }

    /// Build from loaded and coupling quality factors, deriving
    /// Q_i = 1/(1/Q_l − 1/Q_c). Errors when Q_l ≥ Q_c, which would demand a
    /// nonpositive internal loss.
    pub fn from_loaded_and_coupling(q_l: f64, q_c: f64, f_r: f64) -> Result<Self> {
        if !(q_l > 0.0) || !(q_c > 0.0) {
            return Err(CqedError::Validation(
                "quality factors must be positive".into(),
            ));
        }
        let inv_qi = 1.0 / q_l - 1.0 / q_c;
        if inv_qi <= 0.0 {
            return Err(CqedError::Validation(format!(
                "Q_l = {q_l} is not below Q_c = {q_c}: internal loss would be nonpositive"
            )));
        }
        Self::new(q_l, q_c, 1.0 / inv_qi, f_r)
    }
}
