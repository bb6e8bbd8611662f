//! Notch-type S21 resonance model, synthetic-trace generation, and the
//! circle-fit parameter extraction.
//!
//! A λ/4 resonator capacitively side-coupled to a feedline produces the
//! notch lineshape
//!
//!   S21(f) = a·e^{iα}·e^{−2πi f τ}·[1 − (Q_l/|Q_c|)·e^{iφ}/(1 + 2i·Q_l·(f/f_r − 1))]
//!
//! where a and α are the off-resonant amplitude and phase of the line, τ the
//! cable delay, Q_l the loaded quality factor, |Q_c| the coupling quality
//! factor magnitude, and φ the impedance-mismatch rotation. The internal
//! quality factor follows from 1/Q_i = 1/Q_l − cos(φ)/|Q_c|.
//!
//! In the complex plane the delay-corrected trace is a circle; the fitter
//! (see [`fit_resonance`]) exploits that geometry to get seed parameters
//! algebraically before a full least-squares refinement.

mod circle;
mod fit;
mod io;

pub use circle::{kasa_circle, CircleFit};
pub use fit::fit_resonance;
pub use io::{
    fit_csv_header, fit_csv_row, fit_report_text, read_trace_csv, write_power_sweep_csv,
    write_trace_csv, TraceFormat,
};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::constants::TWO_PI;
use crate::error::{CqedError, Result};

/// Minimum number of points for a fittable trace.
pub const MIN_TRACE_POINTS: usize = 30;

/// A complex transmission trace versus frequency.
#[derive(Debug, Clone)]
pub struct S21Trace {
    /// Strictly increasing frequencies in Hz.
    pub freqs: Vec<f64>,
    /// Complex S21 at each frequency.
    pub values: Vec<Complex64>,
    /// On-chip readout power in dBm, when known (power sweeps).
    pub power_dbm: Option<f64>,
}

impl S21Trace {
    /// Build a trace, enforcing equal lengths (≥ 30), strictly increasing
    /// frequencies, and finite values.
    pub fn new(freqs: Vec<f64>, values: Vec<Complex64>, power_dbm: Option<f64>) -> Result<Self> {
        let trace = S21Trace {
            freqs,
            values,
            power_dbm,
        };
        trace.validate()?;
        Ok(trace)
    }

    /// Check the trace invariants: equal lengths (≥ 30), strictly increasing
    /// frequencies, finite values.
    pub fn validate(&self) -> Result<()> {
        if self.freqs.len() != self.values.len() {
            return Err(CqedError::Validation(format!(
                "frequency and value arrays differ in length: {} vs {}",
                self.freqs.len(),
                self.values.len()
            )));
        }
        if self.freqs.len() < MIN_TRACE_POINTS {
            return Err(CqedError::Validation(format!(
                "trace has {} points; need at least {MIN_TRACE_POINTS}",
                self.freqs.len()
            )));
        }
        for pair in self.freqs.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(CqedError::Validation(format!(
                    "frequencies must be strictly increasing ({} then {})",
                    pair[0], pair[1]
                )));
            }
        }
        if self.freqs.iter().any(|f| !f.is_finite())
            || self
                .values
                .iter()
                .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(CqedError::Validation(
                "trace contains non-finite samples".into(),
            ));
        }
        Ok(())
    }

    /// Frequency span f_max − f_min in Hz.
    pub fn span(&self) -> f64 {
        self.freqs[self.freqs.len() - 1] - self.freqs[0]
    }
}

/// Parameters of the notch transmission model.
#[derive(Debug, Clone, Copy)]
pub struct NotchModel {
    /// Resonance frequency in Hz.
    pub f_r: f64,
    /// Loaded quality factor.
    pub q_l: f64,
    /// Coupling quality factor magnitude.
    pub abs_q_c: f64,
    /// Impedance-mismatch rotation in radians.
    pub phi: f64,
    /// Off-resonant amplitude.
    pub a: f64,
    /// Global phase offset in radians.
    pub alpha_env: f64,
    /// Cable delay in seconds.
    pub tau: f64,
}

impl NotchModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("resonance frequency", self.f_r),
            ("loaded quality factor", self.q_l),
            ("coupling quality factor", self.abs_q_c),
            ("amplitude", self.a),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CqedError::Validation(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("mismatch angle", self.phi),
            ("global phase", self.alpha_env),
            ("cable delay", self.tau),
        ] {
            if !v.is_finite() {
                return Err(CqedError::Validation(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Internal quality factor implied by the diameter-corrected combination
    /// 1/Q_i = 1/Q_l − cos(φ)/|Q_c|; `None` when the parameters would demand
    /// nonpositive internal loss (an unphysical fit).
    pub fn implied_q_i(&self) -> Option<f64> {
        let inv = 1.0 / self.q_l - self.phi.cos() / self.abs_q_c;
        if inv > 0.0 {
            Some(1.0 / inv)
        } else {
            None
        }
    }
}

/// Evaluate the notch model at one frequency.
pub fn model_eval(model: &NotchModel, f: f64) -> Complex64 {
    let x = f / model.f_r - 1.0;
    let envelope = model.a
        * Complex64::from_polar(1.0, model.alpha_env)
        * Complex64::from_polar(1.0, -TWO_PI * f * model.tau);
    let dip = Complex64::from_polar(model.q_l / model.abs_q_c, model.phi)
        / Complex64::new(1.0, 2.0 * model.q_l * x);
    envelope * (Complex64::new(1.0, 0.0) - dip)
}

/// Generate a synthetic trace: the model plus complex Gaussian noise of
/// total standard deviation `noise_sigma` per point (σ/√2 on each
/// quadrature). Deterministic for a given seed: one ChaCha8 stream, drawing
/// the real then the imaginary quadrature for each point in frequency order.
pub fn synthesize_trace(
    model: &NotchModel,
    freqs: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<S21Trace> {
    model.validate()?;
    if noise_sigma < 0.0 || !noise_sigma.is_finite() {
        return Err(CqedError::Validation(format!(
            "noise sigma must be nonnegative, got {noise_sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quadrature_sigma = noise_sigma / 2.0_f64.sqrt();
    let values = freqs
        .iter()
        .map(|&f| {
            let clean = model_eval(model, f);
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            clean + Complex64::new(quadrature_sigma * re, quadrature_sigma * im)
        })
        .collect();
    S21Trace::new(freqs.to_vec(), values, None)
}

/// Fit output: the refined model, the derived internal quality factor,
/// per-parameter standard errors, and the residual size.
#[derive(Debug, Clone, Copy)]
pub struct ResonanceFitResult {
    pub model: NotchModel,
    /// Internal quality factor 1/(1/Q_l − cos(φ)/|Q_c|); positive by
    /// construction (the fit rejects parameter sets where it is not).
    pub q_i: f64,
    /// Standard errors of the seven model parameters (σ²·(JᵀJ)⁻¹ diagonal);
    /// NaN when the covariance could not be formed.
    pub stderr: FitStandardErrors,
    /// RMS of the complex residual |model − data| over the trace.
    pub residual_rms: f64,
}

/// Per-parameter standard errors, same units as the corresponding
/// [`NotchModel`] fields.
#[derive(Debug, Clone, Copy)]
pub struct FitStandardErrors {
    pub f_r: f64,
    pub q_l: f64,
    pub abs_q_c: f64,
    pub phi: f64,
    pub a: f64,
    pub alpha_env: f64,
    pub tau: f64,
}

// ---------------------------------------------------------------------------
// Power-sweep batching
// ---------------------------------------------------------------------------

/// One fitted resonance of a power sweep.
#[derive(Debug, Clone, Copy)]
pub struct PowerSweepRow {
    pub power_dbm: f64,
    pub q_i: f64,
    pub q_c: f64,
    pub f_r: f64,
}

/// Batch fit results, sorted by power, with per-trace failures kept aside.
#[derive(Debug, Clone)]
pub struct PowerSweepTable {
    /// Successful fits sorted by ascending power.
    pub rows: Vec<PowerSweepRow>,
    /// (input index, reason) for traces that could not be fitted or carried
    /// no power annotation.
    pub failures: Vec<(usize, String)>,
    /// Index into `rows` of the maximum-Q_i row, when any row exists.
    pub max_qi_row: Option<usize>,
}

/// Fit every trace of a power sweep and tabulate (power, Q_i, Q_c, f_r)
/// sorted by ascending power. Individual fit failures (and traces without a
/// power annotation) are reported in `failures` without aborting the batch.
pub fn batch_power_sweep(traces: &[S21Trace]) -> PowerSweepTable {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (i, trace) in traces.iter().enumerate() {
        let power = match trace.power_dbm {
            Some(p) => p,
            None => {
                failures.push((i, "trace carries no power annotation".to_string()));
                continue;
            }
        };
        match fit_resonance(trace, None) {
            Ok(result) => rows.push(PowerSweepRow {
                power_dbm: power,
                q_i: result.q_i,
                q_c: result.model.abs_q_c,
                f_r: result.model.f_r,
            }),
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    rows.sort_by(|a, b| a.power_dbm.total_cmp(&b.power_dbm));
    let max_qi_row = rows
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.q_i.total_cmp(&b.q_i))
        .map(|(i, _)| i);
    PowerSweepTable {
        rows,
        failures,
        max_qi_row,
    }
}
