//! Exact charge-basis diagonalization of the transmon Hamiltonian, plus
//! Josephson-junction parameter conversions and SQUID flux tuning.
//!
//! The transmon Hamiltonian in the Cooper-pair charge basis |−N⟩…|N⟩ is
//!
//!   H = 4·E_C·(n̂ − n_g)² − (E_J/2)·Σ_n (|n⟩⟨n+1| + h.c.)
//!
//! which is real, symmetric, and tridiagonal, so a dense real symmetric
//! eigensolver is exact up to truncation. Truncation is made loud rather
//! than silent: every diagonalization is repeated with the cutoff raised by
//! 5 and the low-lying levels must agree to a relative 10⁻⁸, otherwise a
//! convergence error is returned.
//!
//! All energies are in ordinary Hz (cycles per second, i.e. E/h), matching
//! the rest of the crate.

use nalgebra::DMatrix;

use crate::constants::{FLUX_QUANTUM, PLANCK_H, TWO_PI};
use crate::error::{CqedError, Result};

/// Default charge-basis truncation; comfortably converged for
/// E_J/E_C up to a few hundred.
pub const DEFAULT_CHARGE_CUTOFF: usize = 25;

/// How many eigenvalues a spectrum retains (fewer if the basis is smaller).
const TRACKED_LEVELS: usize = 10;

/// Square size of the |⟨i|n̂|j⟩| block retained in the spectrum.
const MATRIX_ELEMENT_LEVELS: usize = 6;

/// Relative drift allowed between cutoff N and N + 5 before the
/// diagonalization is declared unconverged.
const CONVERGENCE_TOL: f64 = 1e-8;

/// Inputs to the charge-basis diagonalization. Energies in Hz.
#[derive(Debug, Clone, Copy)]
pub struct TransmonParams {
    /// Josephson energy E_J/h in Hz; E_J = 0 (pure charging Hamiltonian) is
    /// accepted and gives the diagonal Cooper-pair-box spectrum.
    pub e_j: f64,
    /// Charging energy E_C/h in Hz; strictly positive.
    pub e_c: f64,
    /// Offset charge n_g in Cooper pairs. The spectrum is periodic in n_g
    /// with period 1.
    pub n_g: f64,
    /// Basis truncation N; the basis is |−N⟩…|N⟩ (2N+1 states). At least 5.
    pub charge_cutoff: usize,
}

impl TransmonParams {
    /// Parameters with the conventional defaults n_g = 0 and cutoff 25.
    pub fn new(e_j: f64, e_c: f64) -> Self {
        TransmonParams {
            e_j,
            e_c,
            n_g: 0.0,
            charge_cutoff: DEFAULT_CHARGE_CUTOFF,
        }
    }

    pub fn with_offset_charge(mut self, n_g: f64) -> Self {
        self.n_g = n_g;
        self
    }

    pub fn with_cutoff(mut self, charge_cutoff: usize) -> Self {
        self.charge_cutoff = charge_cutoff;
        self
    }

    fn validate(&self) -> Result<()> {
        if !self.e_j.is_finite() || self.e_j < 0.0 {
            return Err(CqedError::Validation(format!(
                "Josephson energy must be finite and nonnegative, got {} Hz",
                self.e_j
            )));
        }
        if !self.e_c.is_finite() || self.e_c <= 0.0 {
            return Err(CqedError::Validation(format!(
                "charging energy must be positive, got {} Hz",
                self.e_c
            )));
        }
        if !self.n_g.is_finite() {
            return Err(CqedError::Validation(
                "offset charge must be finite".into(),
            ));
        }
        if self.charge_cutoff < 5 {
            return Err(CqedError::Validation(format!(
                "charge cutoff must be at least 5, got {}",
                self.charge_cutoff
            )));
        }
        Ok(())
    }
}

/// Low-lying transmon spectrum from one (convergence-checked)
/// diagonalization.
#[derive(Debug, Clone)]
pub struct TransmonSpectrum {
    /// Eigenvalues in Hz relative to the ground state: levels[0] = 0 and
    /// the vector is sorted ascending. At most 10 levels are retained.
    pub levels: Vec<f64>,
    /// Qubit transition frequency E_1 − E_0 in Hz.
    pub omega_q: f64,
    /// Signed anharmonicity (E_2 − E_1) − (E_1 − E_0) in Hz; negative in the
    /// transmon regime, approaching −E_C from above as E_J/E_C grows.
    pub alpha: f64,
    /// |⟨i|n̂|j⟩| for the lowest levels (6×6, or smaller for tiny bases).
    /// Entry (0,1) is the qubit charge matrix element that sets the
    /// capacitive coupling strength.
    pub charge_matrix_elements: DMatrix<f64>,
}

impl TransmonSpectrum {
    /// |⟨0|n̂|1⟩|, the qubit transition's charge matrix element.
    pub fn n01(&self) -> f64 {
        self.charge_matrix_elements[(0, 1)]
    }
}

/// Eigenvalues (relative to ground, ascending) and the matching eigenvectors
/// of the charge-basis Hamiltonian at a fixed cutoff, without any
/// convergence check. Columns of the returned matrix are the sorted
/// eigenvectors in the charge basis.
fn diagonalize_at_cutoff(params: &TransmonParams, cutoff: usize) -> (Vec<f64>, DMatrix<f64>) {
    let dim = 2 * cutoff + 1;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..dim {
        // Charge number runs −N..N down the diagonal.
        let n = k as f64 - cutoff as f64;
        h[(k, k)] = 4.0 * params.e_c * (n - params.n_g) * (n - params.n_g);
        if k + 1 < dim {
            h[(k, k + 1)] = -params.e_j / 2.0;
            h[(k + 1, k)] = -params.e_j / 2.0;
        }
    }

    let eig = h.symmetric_eigen();
    // nalgebra does not order the eigenpairs; sort ascending by eigenvalue.
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let ground = eig.eigenvalues[order[0]];
    let kept = TRACKED_LEVELS.min(dim);
    let levels: Vec<f64> = order[..kept]
        .iter()
        .map(|&i| eig.eigenvalues[i] - ground)
        .collect();
    let mut vectors = DMatrix::<f64>::zeros(dim, kept);
    for (col, &i) in order[..kept].iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (levels, vectors)
}

/// Diagonalize the transmon Hamiltonian in the charge basis.
///
/// Runs the eigensolve at the requested cutoff and again at cutoff + 5;
/// if any retained level moves by more than 10⁻⁸ relative (with the
/// denominator floored at E_C so near-degenerate gaps do not divide by
/// zero), the truncation is too small and a convergence error is returned.
pub fn diagonalize(params: &TransmonParams) -> Result<TransmonSpectrum> {
    params.validate()?;

    let (levels, vectors) = diagonalize_at_cutoff(params, params.charge_cutoff);
    let (check_levels, _) = diagonalize_at_cutoff(params, params.charge_cutoff + 5);

    for (i, (&a, &b)) in levels.iter().zip(check_levels.iter()).enumerate() {
        let drift = (a - b).abs() / b.abs().max(params.e_c);
        if drift > CONVERGENCE_TOL {
            return Err(CqedError::Convergence(format!(
                "charge cutoff {} too small: level {} moves by {:.2e} relative \
                 when the cutoff is raised to {}",
                params.charge_cutoff,
                i,
                drift,
                params.charge_cutoff + 5
            )));
        }
    }

    let omega_q = levels[1];
    let alpha = (levels[2] - levels[1]) - (levels[1] - levels[0]);

    // |⟨i|n̂|j⟩| with n̂ diagonal in the charge basis.
    let dim = vectors.nrows();
    let cutoff = (dim - 1) / 2;
    let kept = MATRIX_ELEMENT_LEVELS.min(vectors.ncols());
    let mut elements = DMatrix::<f64>::zeros(kept, kept);
    for i in 0..kept {
        for j in 0..kept {
            let mut sum = 0.0;
            for k in 0..dim {
                let n = k as f64 - cutoff as f64;
                sum += vectors[(k, i)] * n * vectors[(k, j)];
            }
            elements[(i, j)] = sum.abs();
        }
    }

    Ok(TransmonSpectrum {
        levels,
        omega_q,
        alpha,
        charge_matrix_elements: elements,
    })
}

/// Charge dispersion of the qubit transition: |ω_q(n_g = 0) − ω_q(n_g = ½)|
/// in Hz, the peak-to-peak wander of the transition over offset charge.
/// The two offset charges are the extrema of the n_g-periodic bands, so this
/// is the full dispersion amplitude. Exponentially suppressed in √(E_J/E_C).
pub fn charge_dispersion(params: &TransmonParams) -> Result<f64> {
    let symmetric = diagonalize(&TransmonParams {
        n_g: 0.0,
        ..*params
    })?;
    let degenerate = diagonalize(&TransmonParams {
        n_g: 0.5,
        ..*params
    })?;
    Ok((symmetric.omega_q - degenerate.omega_q).abs())
}

// ---------------------------------------------------------------------------
// Junction parameter conversions
// ---------------------------------------------------------------------------

/// Josephson energy (Hz) of a junction with zero-bias inductance L_j:
/// E_J = (Φ0/2π)² / (L_j·h).
pub fn lj_to_ej(l_j: f64) -> Result<f64> {
    if !(l_j > 0.0) || !l_j.is_finite() {
        return Err(CqedError::Validation(format!(
            "Josephson inductance must be positive, got {l_j} H"
        )));
    }
    let phi0_reduced = FLUX_QUANTUM / TWO_PI;
    Ok(phi0_reduced * phi0_reduced / (l_j * PLANCK_H))
}

/// Zero-bias Josephson inductance (henries) from the Josephson energy in Hz;
/// exact inverse of [`lj_to_ej`].
pub fn ej_to_lj(e_j: f64) -> Result<f64> {
    if !(e_j > 0.0) || !e_j.is_finite() {
        return Err(CqedError::Validation(format!(
            "Josephson energy must be positive, got {e_j} Hz"
        )));
    }
    let phi0_reduced = FLUX_QUANTUM / TWO_PI;
    Ok(phi0_reduced * phi0_reduced / (e_j * PLANCK_H))
}

/// Junction critical current I_c = Φ0/(2π·L_j) in amperes.
pub fn lj_to_ic(l_j: f64) -> Result<f64> {
    if !(l_j > 0.0) || !l_j.is_finite() {
        return Err(CqedError::Validation(format!(
            "Josephson inductance must be positive, got {l_j} H"
        )));
    }
    Ok(FLUX_QUANTUM / (TWO_PI * l_j))
}

/// Zero-bias inductance L_j = Φ0/(2π·I_c) from the critical current; exact
/// inverse of [`lj_to_ic`].
pub fn ic_to_lj(i_c: f64) -> Result<f64> {
    if !(i_c > 0.0) || !i_c.is_finite() {
        return Err(CqedError::Validation(format!(
            "critical current must be positive, got {i_c} A"
        )));
    }
    Ok(FLUX_QUANTUM / (TWO_PI * i_c))
}

// ---------------------------------------------------------------------------
// SQUID flux tuning
// ---------------------------------------------------------------------------

/// A DC-SQUID replacing the single junction: two junctions whose combined
/// Josephson energy is tuned by the external flux through the loop.
#[derive(Debug, Clone, Copy)]
pub struct SquidParams {
    /// Total Josephson energy at zero flux, in Hz.
    pub e_j_max: f64,
    /// Junction asymmetry d = |E_J1 − E_J2|/(E_J1 + E_J2) in [0, 1);
    /// 0 is a symmetric SQUID, which tunes all the way to zero.
    pub asymmetry: f64,
    /// External flux through the loop in units of Φ0.
    pub flux: f64,
    /// Flux-bias line mutual coupling: bias current per induced flux
    /// quantum, in A/Φ0.
    pub mutual_coupling: f64,
}

impl SquidParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_j_max > 0.0) || !self.e_j_max.is_finite() {
            return Err(CqedError::Validation(format!(
                "maximum Josephson energy must be positive, got {} Hz",
                self.e_j_max
            )));
        }
        if !(0.0..1.0).contains(&self.asymmetry) {
            return Err(CqedError::Validation(format!(
                "SQUID asymmetry must lie in [0, 1), got {}",
                self.asymmetry
            )));
        }
        if !self.flux.is_finite() {
            return Err(CqedError::Validation("flux must be finite".into()));
        }
        if !(self.mutual_coupling > 0.0) || !self.mutual_coupling.is_finite() {
            return Err(CqedError::Validation(format!(
                "mutual coupling must be positive, got {} A per flux quantum",
                self.mutual_coupling
            )));
        }
        Ok(())
    }

    /// Flux (units of Φ0) induced by a bias current through the flux line.
    pub fn flux_from_bias_current(&self, bias_current: f64) -> f64 {
        bias_current / self.mutual_coupling
    }
}

/// Flux-dependent Josephson energy of a (possibly asymmetric) DC-SQUID:
///
///   E_J(Φ) = E_J_max·√(cos²(πΦ/Φ0) + d²·sin²(πΦ/Φ0))
///
/// Periodic in Φ with period Φ0 and even in Φ; a symmetric SQUID (d = 0)
/// tunes to zero at half-integer flux.
pub fn ej_of_flux(squid: &SquidParams) -> Result<f64> {
    squid.validate()?;
    let phase = std::f64::consts::PI * squid.flux;
    let (sin, cos) = phase.sin_cos();
    let d = squid.asymmetry;
    Ok(squid.e_j_max * (cos * cos + d * d * sin * sin).sqrt())
}
