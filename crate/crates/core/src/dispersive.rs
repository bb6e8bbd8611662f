//! Qubit–resonator coupling, dispersive shift, and Kerr matrices.
//!
//! The capacitive charge–charge interaction Q̂·Q̂_r/C̃_rt between transmon and
//! readout mode gives the coupling rate
//!
//!   h·g = 2e·|⟨0|n̂|1⟩| · Q_r,zpf · |1/C̃_rt|,   Q_r,zpf = √(ħ·ω_r^ang·C̃_r/2)
//!
//! reported in ordinary Hz. The dispersive shift is computed two ways:
//!
//! * perturbatively, χ = g²·α/(Δ·(Δ+α)) with the signed detuning
//!   Δ = ω_q − ω_r and signed anharmonicity α (the Schrieffer-Wolff result
//!   for a weakly anharmonic ladder), and
//! * exactly, by diagonalizing the coupled Hamiltonian on
//!   (transmon levels) ⊗ (Fock levels) and reading off
//!   χ = [E(1,1) − E(1,0) − E(0,1) + E(0,0)]/2 from the dressed energies.
//!
//! The exact oracle keeps the exact transmon eigenvalues on the diagonal and
//! models the charge operator by its harmonic-ladder matrix elements
//! (⟨j|n̂|j+1⟩ ∝ √(j+1), all counter-rotating terms retained). Using the
//! full anharmonic charge matrix elements instead would double-count the
//! anharmonicity that already shifted the ladder spacings: the j = 1→2
//! element exceeds √2·n₀₁ by a few percent, and that error is amplified by
//! Δ/α ≈ 4 in χ, pulling the "exact" value ~15% away from both the
//! perturbative result and the design-table value. The harmonic-ladder
//! oracle agrees with perturbation theory to 0.1% in the deep dispersive
//! regime and collapses to χ = 0 for a perfectly harmonic qubit, as it must.
//!
//! Kerr cross-shifts from energy-participation ratios use
//! χ_nm = ω_m·ω_n·p_m·p_n/(4E_J), with mode anharmonicity α_m = χ_mm/2.

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::constants::{ELEMENTARY_CHARGE, HBAR, PLANCK_H, TWO_PI};
use crate::error::{CqedError, Result};
use crate::netlist::LomCoefficients;
use crate::transmon::{self, TransmonParams, TransmonSpectrum};

/// Default photon-number truncation of the exact-diagonalization oracle.
pub const DEFAULT_FOCK_LEVELS: usize = 6;

/// Transmon levels kept in the coupled Hamiltonian; the n = 0, 1 dressed
/// states we difference are far below this.
const ORACLE_TRANSMON_LEVELS: usize = 6;

/// A transmon capacitively coupled to one readout mode.
#[derive(Debug, Clone, Copy)]
pub struct CoupledSystem {
    pub transmon: TransmonParams,
    /// Dressed resonator frequency in Hz (an input: the loaded resonator
    /// frequency, not recomputed here).
    pub omega_r: f64,
    /// Effective capacitances from the circuit reduction.
    pub lom: LomCoefficients,
    /// Photon-number truncation for the exact oracle; at least 3.
    pub resonator_levels: usize,
}

impl CoupledSystem {
    pub fn new(transmon: TransmonParams, omega_r: f64, lom: LomCoefficients) -> Self {
        CoupledSystem {
            transmon,
            omega_r,
            lom,
            resonator_levels: DEFAULT_FOCK_LEVELS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_r > 0.0) || !self.omega_r.is_finite() {
            return Err(CqedError::Validation(format!(
                "resonator frequency must be positive, got {} Hz",
                self.omega_r
            )));
        }
        if self.resonator_levels < 3 {
            return Err(CqedError::Validation(format!(
                "need at least 3 resonator levels, got {}",
                self.resonator_levels
            )));
        }
        Ok(())
    }
}

/// Coupling and dispersive-shift summary for one operating point.
#[derive(Debug, Clone, Copy)]
pub struct DispersiveResult {
    /// Qubit–resonator coupling in Hz (nonnegative).
    pub g: f64,
    /// Detuning magnitude |ω_q − ω_r| in Hz.
    pub delta: f64,
    /// Signed detuning ω_q − ω_r in Hz (negative when the qubit sits below
    /// the resonator, the usual operating side).
    pub delta_signed: f64,
    /// χ from the closed-form perturbative expression, Hz (signed).
    pub chi_perturbative: f64,
    /// χ from exact diagonalization of the coupled Hamiltonian, Hz (signed).
    pub chi_exact: f64,
    /// True when g/|Δ| < 0.1, the validity band of the perturbative form.
    pub in_dispersive_regime: bool,
}

// ---------------------------------------------------------------------------
// Coupling
// ---------------------------------------------------------------------------

/// Coupling rate in Hz from a precomputed charge matrix element |⟨0|n̂|1⟩|.
/// Returns 0 for a decoupled circuit (1/C̃_rt = 0).
pub fn coupling_g_from_n01(n01: f64, omega_r: f64, lom: &LomCoefficients) -> f64 {
    // Zero-point charge of the readout mode, √(ħ·ω_ang·C/2) in coulombs.
    let q_r_zpf = (HBAR * TWO_PI * omega_r * lom.c_r_eff / 2.0).sqrt();
    2.0 * ELEMENTARY_CHARGE * n01 * q_r_zpf * lom.c_rt_inv.abs() / PLANCK_H
}

/// Qubit–resonator coupling g in Hz: diagonalizes the transmon for
/// |⟨0|n̂|1⟩| and combines it with the reduced capacitances.
pub fn coupling_g(system: &CoupledSystem) -> Result<f64> {
    system.validate()?;
    let spectrum = transmon::diagonalize(&system.transmon)?;
    Ok(coupling_g_from_n01(
        spectrum.n01(),
        system.omega_r,
        &system.lom,
    ))
}

// ---------------------------------------------------------------------------
// Dispersive shift, perturbative
// ---------------------------------------------------------------------------

/// Perturbative dispersive shift χ = g²·α/(Δ·(Δ+α)) in Hz.
///
/// `delta` is the signed detuning ω_q − ω_r and `alpha` the signed (negative)
/// anharmonicity. Errors with a singularity when the system sits exactly on
/// resonance (Δ = 0) or on the straddling point (Δ = −α), or when the result
/// overflows; near-singular but finite values are returned as-is — callers
/// doing sweeps should flag g/|Δ| > 0.1 rather than rely on this guard.
pub fn chi_perturbative(g: f64, delta: f64, alpha: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(CqedError::Singularity(
            "qubit on resonance with the readout mode (Δ = 0)".into(),
        ));
    }
    if delta + alpha == 0.0 {
        return Err(CqedError::Singularity(
            "readout mode on the 1-2 transition (Δ + α = 0)".into(),
        ));
    }
    let chi = g * g * alpha / (delta * (delta + alpha));
    if !chi.is_finite() {
        return Err(CqedError::Singularity(format!(
            "dispersive shift diverges at Δ = {delta} Hz, α = {alpha} Hz"
        )));
    }
    Ok(chi)
}

/// True when the state-dependent pull 2|χ| exceeds the resonator linewidth
/// κ, i.e. the qubit state is resolvable in the readout spectrum.
pub fn readout_observable(chi: f64, kappa: f64) -> bool {
    2.0 * chi.abs() > kappa
}

// ---------------------------------------------------------------------------
// Dispersive shift, exact
// ---------------------------------------------------------------------------

/// Exact dispersive shift from the coupled Hamiltonian built on explicit
/// transmon levels (Hz, relative to ground, sorted) and a Fock ladder:
///
///   H = Σ_j E_j|j⟩⟨j| ⊗ 1 + 1 ⊗ ω_r·a†a + g·(b + b†)(a + a†)
///
/// with harmonic-ladder qubit matrix elements ⟨j|b|j+1⟩ = √(j+1) and all
/// counter-rotating terms kept. Dressed states inherit the bare label of
/// their dominant component; χ = [E(1,1) − E(1,0) − E(0,1) + E(0,0)]/2.
///
/// Errors if a dressed state has no majority bare component (too close to a
/// resonance for the labels to mean anything).
pub fn chi_exact_from_levels(
    levels: &[f64],
    omega_r: f64,
    g: f64,
    fock_levels: usize,
) -> Result<f64> {
    if levels.len() < 3 {
        return Err(CqedError::Validation(format!(
            "need at least 3 transmon levels for the exact oracle, got {}",
            levels.len()
        )));
    }
    if fock_levels < 3 {
        return Err(CqedError::Validation(format!(
            "need at least 3 Fock levels, got {fock_levels}"
        )));
    }
    let n_t = levels.len();
    let dim = n_t * fock_levels;
    let idx = |j: usize, m: usize| j * fock_levels + m;

    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for j in 0..n_t {
        for m in 0..fock_levels {
            h[(idx(j, m), idx(j, m))] = levels[j] + m as f64 * omega_r;
        }
    }
    for j in 0..n_t - 1 {
        let ladder_j = ((j + 1) as f64).sqrt();
        for m in 0..fock_levels - 1 {
            let v = g * ladder_j * ((m + 1) as f64).sqrt();
            // co-rotating (excitation swap) term b†a + b a†
            let (a, b) = (idx(j + 1, m), idx(j, m + 1));
            h[(a, b)] += v;
            h[(b, a)] += v;
            // counter-rotating term b†a† + b a
            let (c, d) = (idx(j + 1, m + 1), idx(j, m));
            h[(c, d)] += v;
            h[(d, c)] += v;
        }
    }

    let eig = h.symmetric_eigen();

    // Dressed energy of the eigenstate dominated by bare |j, m⟩. Requiring a
    // clear majority keeps the assignment unambiguous (no two orthonormal
    // eigenvectors can both hold > 1/2 of the same bare state) and the 0.6
    // margin rejects near-degenerate hybridization: at an exact resonance the
    // two dressed partners carry weight 1/2 ± O((g/ω)²), which would
    // otherwise let one of them slip past a bare > 1/2 test, while any
    // genuinely dispersive point has weight 1 − (g/Δ)² ≈ 1.
    const MAJORITY_WEIGHT: f64 = 0.6;
    let dressed_energy = |j: usize, m: usize| -> Result<f64> {
        let row = idx(j, m);
        let mut best = 0;
        let mut best_w = 0.0;
        for col in 0..dim {
            let w = eig.eigenvectors[(row, col)].powi(2);
            if w > best_w {
                best_w = w;
                best = col;
            }
        }
        if best_w <= MAJORITY_WEIGHT {
            return Err(CqedError::Convergence(format!(
                "dressed state |{j},{m}⟩ has no majority bare component \
                 (weight {best_w:.3}); system too close to a resonance"
            )));
        }
        Ok(eig.eigenvalues[best])
    };

    let e00 = dressed_energy(0, 0)?;
    let e01 = dressed_energy(0, 1)?;
    let e10 = dressed_energy(1, 0)?;
    let e11 = dressed_energy(1, 1)?;
    Ok((e11 - e10 - e01 + e00) / 2.0)
}

/// Exact χ at the requested Fock truncation, cross-checked at +2 photons;
/// errors if the two disagree beyond 0.1% (with a 1 Hz floor).
fn chi_exact_checked(levels: &[f64], omega_r: f64, g: f64, fock_levels: usize) -> Result<f64> {
    let chi = chi_exact_from_levels(levels, omega_r, g, fock_levels)?;
    let chi_fine = chi_exact_from_levels(levels, omega_r, g, fock_levels + 2)?;
    let drift = (chi - chi_fine).abs();
    if drift > (1e-3 * chi_fine.abs()).max(1.0) {
        return Err(CqedError::Convergence(format!(
            "exact dispersive shift not converged in photon number: \
             {chi:.6e} Hz at {fock_levels} levels vs {chi_fine:.6e} Hz at {}",
            fock_levels + 2
        )));
    }
    Ok(chi)
}

fn oracle_levels(spectrum: &TransmonSpectrum) -> &[f64] {
    &spectrum.levels[..ORACLE_TRANSMON_LEVELS.min(spectrum.levels.len())]
}

/// Exact dispersive shift (Hz) of a coupled system: diagonalize the
/// transmon, build the coupled Hamiltonian, difference the dressed energies.
pub fn chi_exact(system: &CoupledSystem) -> Result<f64> {
    system.validate()?;
    let spectrum = transmon::diagonalize(&system.transmon)?;
    let g = coupling_g_from_n01(spectrum.n01(), system.omega_r, &system.lom);
    chi_exact_checked(
        oracle_levels(&spectrum),
        system.omega_r,
        g,
        system.resonator_levels,
    )
}

/// Full dispersive analysis of one operating point: coupling, signed and
/// unsigned detuning, both χ estimates, and the regime flag.
pub fn analyze(system: &CoupledSystem) -> Result<DispersiveResult> {
    system.validate()?;
    let spectrum = transmon::diagonalize(&system.transmon)?;
    let g = coupling_g_from_n01(spectrum.n01(), system.omega_r, &system.lom);
    let delta_signed = spectrum.omega_q - system.omega_r;
    let chi_p = chi_perturbative(g, delta_signed, spectrum.alpha)?;
    let chi_e = chi_exact_checked(
        oracle_levels(&spectrum),
        system.omega_r,
        g,
        system.resonator_levels,
    )?;
    Ok(DispersiveResult {
        g,
        delta: delta_signed.abs(),
        delta_signed,
        chi_perturbative: chi_p,
        chi_exact: chi_e,
        in_dispersive_regime: g < 0.1 * delta_signed.abs(),
    })
}

// ---------------------------------------------------------------------------
// Detuning sweep
// ---------------------------------------------------------------------------

/// One row of a χ-vs-detuning sweep.
#[derive(Debug, Clone, Copy)]
pub struct ChiSweepRow {
    /// Josephson inductance of this grid point, henries.
    pub l_j: f64,
    /// Signed detuning ω_q − ω_r in Hz.
    pub delta: f64,
    /// Perturbative χ in Hz; NaN where the point sits on a singularity.
    pub chi_perturbative: f64,
    /// Exact χ in Hz; NaN where the dressed labels are ambiguous.
    pub chi_exact: f64,
    /// True where g/|Δ| > 0.1 or either estimate failed: the dispersive
    /// approximation is not trustworthy there.
    pub flagged: bool,
}

/// Sweep the dispersive shift along a Josephson-inductance grid (the
/// flux-tuning axis expressed as L_j). Singular or near-resonant points are
/// flagged with NaN entries rather than aborting the sweep.
pub fn sweep_chi_vs_lj(system: &CoupledSystem, lj_grid: &[f64]) -> Result<Vec<ChiSweepRow>> {
    if lj_grid.is_empty() {
        return Err(CqedError::Validation(
            "detuning sweep needs a nonempty L_j grid".into(),
        ));
    }
    system.validate()?;
    let mut rows = Vec::with_capacity(lj_grid.len());
    for &l_j in lj_grid {
        let e_j = transmon::lj_to_ej(l_j)?;
        let params = TransmonParams {
            e_j,
            ..system.transmon
        };
        let spectrum = transmon::diagonalize(&params)?;
        let g = coupling_g_from_n01(spectrum.n01(), system.omega_r, &system.lom);
        let delta = spectrum.omega_q - system.omega_r;
        let chi_p = chi_perturbative(g, delta, spectrum.alpha).unwrap_or(f64::NAN);
        let chi_e = chi_exact_checked(
            oracle_levels(&spectrum),
            system.omega_r,
            g,
            system.resonator_levels,
        )
        .unwrap_or(f64::NAN);
        let flagged = !(g < 0.1 * delta.abs()) || !chi_p.is_finite() || !chi_e.is_finite();
        rows.push(ChiSweepRow {
            l_j,
            delta,
            chi_perturbative: chi_p,
            chi_exact: chi_e,
            flagged,
        });
    }
    Ok(rows)
}

/// Write a sweep as CSV with header `delta_GHz,chi_pert_MHz,chi_exact_MHz,flag`.
/// Fixed 9-decimal formatting keeps reruns byte-identical.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[ChiSweepRow], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "delta_GHz,chi_pert_MHz,chi_exact_MHz,flag")?;
    for r in rows {
        writeln!(
            out,
            "{:.9},{:.9},{:.9},{}",
            r.delta / 1e9,
            r.chi_perturbative / 1e6,
            r.chi_exact / 1e6,
            r.flagged
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Kerr matrix from energy-participation ratios
// ---------------------------------------------------------------------------

/// Modes of an energy-participation analysis: frequencies, junction
/// participation ratios, and the junction energy they share.
#[derive(Debug, Clone)]
pub struct EprInput {
    /// Mode labels, used only to annotate output.
    pub mode_names: Vec<String>,
    /// Mode frequencies ω_m in Hz.
    pub mode_freqs: Vec<f64>,
    /// Junction energy-participation ratio p_m of each mode; lowest-order
    /// EPR can slightly exceed 1, so the accepted range is [0, 1.2].
    pub participations: Vec<f64>,
    /// Josephson energy in Hz.
    pub e_j: f64,
}

#[derive(Debug, Deserialize)]
struct EprFile {
    #[serde(rename = "EJ_GHz")]
    ej_ghz: f64,
    modes: Vec<EprModeSpec>,
}

#[derive(Debug, Deserialize)]
struct EprModeSpec {
    name: String,
    #[serde(rename = "freq_GHz")]
    freq_ghz: f64,
    p: f64,
}

impl EprInput {
    /// Parse from JSON: `{"EJ_GHz": …, "modes": [{"name", "freq_GHz", "p"}…]}`.
    pub fn from_json_str(json: &str, origin: &str) -> Result<Self> {
        let file: EprFile =
            serde_json::from_str(json).map_err(|e| CqedError::parse(origin, e.to_string()))?;
        let input = EprInput {
            mode_names: file.modes.iter().map(|m| m.name.clone()).collect(),
            mode_freqs: file.modes.iter().map(|m| m.freq_ghz * 1e9).collect(),
            participations: file.modes.iter().map(|m| m.p).collect(),
            e_j: file.ej_ghz * 1e9,
        };
        input.validate()?;
        Ok(input)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CqedError::io(path.display().to_string(), e))?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode_freqs.len() != self.participations.len()
            || self.mode_freqs.len() != self.mode_names.len()
        {
            return Err(CqedError::Validation(
                "mode name/frequency/participation lists differ in length".into(),
            ));
        }
        if self.mode_freqs.is_empty() {
            return Err(CqedError::Validation("no modes given".into()));
        }
        if !(self.e_j > 0.0) || !self.e_j.is_finite() {
            return Err(CqedError::Validation(format!(
                "Josephson energy must be positive, got {} Hz",
                self.e_j
            )));
        }
        for (m, &f) in self.mode_freqs.iter().enumerate() {
            if !(f > 0.0) || !f.is_finite() {
                return Err(CqedError::Validation(format!(
                    "mode '{}' has nonpositive frequency {f} Hz",
                    self.mode_names[m]
                )));
            }
        }
        for (m, &p) in self.participations.iter().enumerate() {
            if !(0.0..=1.2).contains(&p) {
                return Err(CqedError::Validation(format!(
                    "mode '{}' has participation {p} outside [0, 1.2]",
                    self.mode_names[m]
                )));
            }
        }
        Ok(())
    }
}

/// Full symmetric Kerr matrix χ_nm = ω_m·ω_n·p_m·p_n/(4E_J) in Hz.
/// Diagonal entries are the self-Kerr; mode anharmonicity is χ_mm/2.
pub fn kerr_from_epr(input: &EprInput) -> Result<DMatrix<f64>> {
    input.validate()?;
    let n = input.mode_freqs.len();
    let mut chi = DMatrix::<f64>::zeros(n, n);
    for m in 0..n {
        for k in m..n {
            let value = input.mode_freqs[m] * input.mode_freqs[k] * input.participations[m]
                * input.participations[k]
                / (4.0 * input.e_j);
            chi[(m, k)] = value;
            chi[(k, m)] = value;
        }
    }
    Ok(chi)
}

/// Mode anharmonicities α_m = χ_mm/2 (Hz) from a Kerr matrix.
pub fn kerr_anharmonicities(kerr: &DMatrix<f64>) -> Vec<f64> {
    (0..kerr.nrows()).map(|m| kerr[(m, m)] / 2.0).collect()
}
