//! Circuit-QED quantization and readout-analysis toolkit.
//!
//! Turns lumped-element circuit parameters into transmon/resonator
//! Hamiltonian quantities and readout figures of merit:
//!
//! - [`netlist`]: lumped circuits, Maxwell capacitance matrices, and the
//!   reduction to effective oscillator-model coefficients (C̃_t, C̃_r, C̃_rt,
//!   drive couplings, E_C).
//! - [`transmon`]: charge-basis diagonalization of the transmon Hamiltonian,
//!   Josephson parameter conversions, SQUID flux tuning, charge dispersion.
//! - [`dispersive`]: qubit–resonator coupling g, dispersive shift χ via both
//!   perturbation theory and exact diagonalization, Kerr matrices from energy
//!   participation ratios, and χ(Δ) sweeps.
//! - [`cpw`]: coplanar-waveguide impedance and λ/4 resonator electricals,
//!   quality-factor / linewidth / lifetime conversions.
//! - [`s21`]: notch-type complex S21 model, synthetic traces, and the
//!   circle-fit pipeline extracting f_r, Q_l, Q_c, Q_i.
//! - [`qnd`]: QND itinerant-photon detection statistics (Ramsey phase,
//!   k-of-N decision rules, Monte-Carlo validation).
//!
//! Unit discipline: ordinary frequencies (Hz) everywhere in public APIs;
//! angular frequencies appear only inside formulas and are documented where
//! used. All inputs/outputs are SI unless a name says otherwise.

// Validation throughout uses `!(v > 0.0)` rather than `v <= 0.0` so that a
// NaN input fails the check too; the negation is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod cpw;
pub mod dispersive;
pub mod elliptic;
pub mod error;
pub mod lm;
pub mod netlist;
pub mod qnd;
pub mod s21;
pub mod transmon;

pub use error::{CqedError, Result};
