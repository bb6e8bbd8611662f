//! Physical constants (CODATA 2018 exact values) used throughout the crate.

/// Planck constant h in J·s (exact, SI definition).
pub const PLANCK_H: f64 = 6.62607015e-34;

/// Reduced Planck constant ħ = h/2π in J·s.
pub const HBAR: f64 = PLANCK_H / TWO_PI;

/// 2π, the radians-per-cycle factor between ordinary and angular frequency.
pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Elementary charge e in coulombs (exact, SI definition).
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;

/// Superconducting flux quantum Φ0 = h/2e in webers.
pub const FLUX_QUANTUM: f64 = PLANCK_H / (2.0 * ELEMENTARY_CHARGE);

/// Speed of light in vacuum in m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
