//! The circle-fit extraction pipeline for notch resonances.
//!
//! Fitting proceeds in six steps:
//!
//! 1. cable delay τ from a phase-slope fit on the trace edges, refined by a
//!    golden-section search that minimizes the radial scatter of the
//!    delay-corrected data around its best-fit circle;
//! 2. algebraic circle fit (Kåsa) on the delay-corrected data;
//! 3. arctangent phase-vs-frequency fit around the circle center for f_r,
//!    Q_l, and the resonant angle θ0;
//! 4. amplitude a, global phase α_env, |Q_c|, and mismatch angle φ from the
//!    off-resonant point P = c − r·e^{iθ0} and the circle diameter
//!    (|Q_c| = a·Q_l/2r, φ = θ0 − α_env − π wrapped);
//! 5. Q_i from 1/Q_i = 1/Q_l − cos(φ)/|Q_c|;
//! 6. full complex least-squares refinement of all seven parameters from
//!    that seed (always run; the algebraic values only need to land in the
//!    basin).
//!
//! The caller may supply an initial model instead, which replaces steps 1–4
//! as the refinement seed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::circle::kasa_circle;
use super::{model_eval, FitStandardErrors, NotchModel, ResonanceFitResult, S21Trace};
use crate::constants::TWO_PI;
use crate::error::{CqedError, Result};
use crate::lm::{self, LmOptions};

/// Points per trace edge used for delay/baseline estimation: n/10, min 5.
fn edge_count(n: usize) -> usize {
    (n / 10).max(5)
}

/// Minimum relative dip depth below the edge baseline for a trace to count
/// as containing a resonance at all.
const MIN_DIP_DEPTH: f64 = 0.02;

/// The trace must span at least this many linewidths (post-fit check).
const MIN_LINEWIDTHS: f64 = 3.0;

/// In-place phase unwrapping: adds multiples of 2π so that consecutive
/// samples never jump by more than π.
fn unwrap_phases(phases: &mut [f64]) {
    let mut correction = 0.0;
    for i in 1..phases.len() {
        let jump = phases[i] + correction - phases[i - 1];
        correction -= (jump / TWO_PI).round() * TWO_PI;
        phases[i] += correction;
    }
}

/// Wrap an angle into [−π, π).
fn wrap_angle(x: f64) -> f64 {
    (x + std::f64::consts::PI).rem_euclid(TWO_PI) - std::f64::consts::PI
}

/// Slope of the best-fit line y(x) over the given indices (centered
/// least squares, robust against the huge absolute frequency offsets).
fn line_slope(xs: &[f64], ys: &[f64], indices: &[usize]) -> f64 {
    let n = indices.len() as f64;
    let x_mean = indices.iter().map(|&i| xs[i]).sum::<f64>() / n;
    let y_mean = indices.iter().map(|&i| ys[i]).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for &i in indices {
        let dx = xs[i] - x_mean;
        num += dx * (ys[i] - y_mean);
        den += dx * dx;
    }
    num / den
}

/// First delay estimate: the off-resonant phase slope is −2πτ, so fit a
/// line to the unwrapped phase on the outer tenths of the trace.
fn estimate_delay(freqs: &[f64], values: &[Complex64]) -> f64 {
    let n = freqs.len();
    let k = edge_count(n);
    let mut phases: Vec<f64> = values.iter().map(|z| z.arg()).collect();
    unwrap_phases(&mut phases);
    let indices: Vec<usize> = (0..k).chain(n - k..n).collect();
    -line_slope(freqs, &phases, &indices) / TWO_PI
}

/// Remove a cable delay: z → z·e^{+2πi f τ}.
fn delay_corrected(freqs: &[f64], values: &[Complex64], tau: f64) -> Vec<Complex64> {
    freqs
        .iter()
        .zip(values)
        .map(|(&f, z)| z * Complex64::from_polar(1.0, TWO_PI * f * tau))
        .collect()
}

/// How badly the delay-corrected data fails to be a circle: the summed
/// squared radial residual of its Kåsa fit. Infinite when the fit
/// degenerates, which steers the search away from such delays.
fn delay_cost(freqs: &[f64], values: &[Complex64], tau: f64) -> f64 {
    let corrected = delay_corrected(freqs, values, tau);
    match kasa_circle(&corrected) {
        Ok(fit) => fit.radial_residual_sum(&corrected),
        Err(_) => f64::INFINITY,
    }
}

/// Golden-section refinement of the delay within ±0.5/span of the phase-
/// slope estimate (half a turn of edge phase across the trace).
fn refine_delay(freqs: &[f64], values: &[Complex64], tau0: f64) -> f64 {
    let span = freqs[freqs.len() - 1] - freqs[0];
    let mut lo = tau0 - 0.5 / span;
    let mut hi = tau0 + 0.5 / span;
    let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let mut cost_c = delay_cost(freqs, values, c);
    let mut cost_d = delay_cost(freqs, values, d);
    for _ in 0..200 {
        if cost_c < cost_d {
            hi = d;
            d = c;
            cost_d = cost_c;
            c = hi - ratio * (hi - lo);
            cost_c = delay_cost(freqs, values, c);
        } else {
            lo = c;
            c = d;
            cost_c = cost_d;
            d = lo + ratio * (hi - lo);
            cost_d = delay_cost(freqs, values, d);
        }
        if hi - lo < 1e-18 {
            break;
        }
    }
    (lo + hi) / 2.0
}

/// Gauss-Newton fit of the winding phase θ(f) = θ0 + 2·atan(2·Q_l·(1 − f/f_r))
/// around the circle center. Returns (f_r, Q_l, θ0).
fn fit_phase(freqs: &[f64], theta: &[f64], fr0: f64, ql0: f64, theta0_0: f64) -> (f64, f64, f64) {
    let n = freqs.len();
    let mut fr = fr0;
    let mut ql = ql0;
    let mut th0 = theta0_0;
    for _ in 0..50 {
        let mut jacobian = DMatrix::<f64>::zeros(n, 3);
        let mut residual = DVector::<f64>::zeros(n);
        for i in 0..n {
            let u = 2.0 * ql * (1.0 - freqs[i] / fr);
            let den = 1.0 + u * u;
            residual[i] = theta[i] - (th0 + 2.0 * u.atan());
            jacobian[(i, 0)] = 2.0 / den * 2.0 * ql * freqs[i] / (fr * fr);
            jacobian[(i, 1)] = 2.0 / den * 2.0 * (1.0 - freqs[i] / fr);
            jacobian[(i, 2)] = 1.0;
        }
        let step = match jacobian.svd(true, true).solve(&residual, 1e-14) {
            Ok(s) => s,
            Err(_) => break,
        };
        fr += step[0];
        ql += step[1];
        th0 += step[2];
        if !fr.is_finite() || !ql.is_finite() {
            break;
        }
        let rel = (step[0] / fr.abs().max(1e-30))
            .abs()
            .max((step[1] / ql.abs().max(1e-30)).abs())
            .max((step[2] / th0.abs().max(1e-30)).abs());
        if rel < 1e-14 {
            break;
        }
    }
    (fr, ql, th0)
}

/// Steps 1–4: delay, circle, phase, and the algebraic parameter seed.
fn algebraic_seed(trace: &S21Trace) -> Result<NotchModel> {
    let freqs = &trace.freqs;
    let values = &trace.values;
    let n = freqs.len();

    let tau = refine_delay(freqs, values, estimate_delay(freqs, values));
    let corrected = delay_corrected(freqs, values, tau);
    let circle = kasa_circle(&corrected)?;

    let mut theta: Vec<f64> = corrected
        .iter()
        .map(|z| (z - circle.center).arg())
        .collect();
    unwrap_phases(&mut theta);

    // Seed the phase fit from the deepest point of the dip and a linewidth
    // guess of a tenth of the span.
    let dip = values
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.norm().total_cmp(&b.norm()))
        .map(|(i, _)| i)
        .unwrap_or(n / 2);
    let ql0 = freqs[dip] / (trace.span() / 10.0);
    let (fr, ql, th0) = fit_phase(freqs, &theta, freqs[dip], ql0, theta[n / 2]);
    // Guard against a mirror solution from a bad phase seed; the sign
    // carries no information the refinement cannot restore.
    let mut ql = ql.abs().max(1.0);
    let mut fr = fr.abs();
    let mut th0 = th0;
    // A span that barely covers the dip gives the winding fit too little
    // arc to work with, and it can run away entirely. Re-anchor on the dip
    // itself: the resonance angle is the angle of the deepest point seen
    // from the circle center, and a linewidth of a third of the span keeps
    // the seed responsive inside the window. The refinement converges from
    // here, and the post-fit span check then reports narrow spans properly.
    if !(fr >= freqs[0] && fr <= freqs[n - 1]) || !ql.is_finite() || ql > 1e9 || !th0.is_finite()
    {
        fr = freqs[dip];
        ql = 3.0 * fr / trace.span();
        th0 = (corrected[dip] - circle.center).arg();
    }

    // Off-resonant point: diametrically opposite the resonance angle θ0.
    let p = circle.center - Complex64::from_polar(circle.radius, th0);
    let a = p.norm();
    let alpha_env = p.arg();
    let abs_q_c = a * ql / (2.0 * circle.radius);
    let phi = wrap_angle(th0 - alpha_env - std::f64::consts::PI);

    Ok(NotchModel {
        f_r: fr,
        q_l: ql,
        abs_q_c,
        phi,
        a,
        alpha_env,
        tau,
    })
}

/// Reject traces with no resonance: the deepest point must sit at least 2%
/// below the edge baseline.
fn detect_dip(trace: &S21Trace) -> Result<()> {
    let n = trace.freqs.len();
    let k = edge_count(n);
    let mut edge_mags: Vec<f64> = (0..k)
        .chain(n - k..n)
        .map(|i| trace.values[i].norm())
        .collect();
    edge_mags.sort_by(f64::total_cmp);
    let baseline = edge_mags[edge_mags.len() / 2];
    let min_mag = trace
        .values
        .iter()
        .map(|z| z.norm())
        .fold(f64::INFINITY, f64::min);
    if baseline <= 0.0 {
        return Err(CqedError::NotAResonance(
            "trace magnitude is zero at the edges".into(),
        ));
    }
    let depth = 1.0 - min_mag / baseline;
    if depth < MIN_DIP_DEPTH {
        return Err(CqedError::NotAResonance(format!(
            "no dip found: deepest point is only {:.2}% below the baseline \
             (need {:.0}%)",
            depth * 100.0,
            MIN_DIP_DEPTH * 100.0
        )));
    }
    Ok(())
}

fn pack(model: &NotchModel) -> DVector<f64> {
    DVector::from_vec(vec![
        model.f_r,
        model.q_l,
        model.abs_q_c,
        model.phi,
        model.a,
        model.alpha_env,
        model.tau,
    ])
}

fn unpack(p: &DVector<f64>) -> NotchModel {
    NotchModel {
        f_r: p[0],
        q_l: p[1],
        abs_q_c: p[2],
        phi: p[3],
        a: p[4],
        alpha_env: p[5],
        tau: p[6],
    }
}

/// Fit the notch model to a trace.
///
/// Runs dip detection, the algebraic pipeline (unless `initial_guess`
/// supplies a seed), and the full complex least-squares refinement, then
/// derives Q_i and per-parameter standard errors.
///
/// Errors: [`CqedError::NotAResonance`] when the trace has no dip;
/// [`CqedError::Convergence`] when the refinement stalls;
/// [`CqedError::InvalidFit`] when the converged parameters are unphysical
/// (nonpositive Q, negative implied internal loss, resonance outside the
/// span, or a span under 3 linewidths).
pub fn fit_resonance(
    trace: &S21Trace,
    initial_guess: Option<&NotchModel>,
) -> Result<ResonanceFitResult> {
    trace.validate()?;
    detect_dip(trace)?;

    let seed = match initial_guess {
        Some(model) => {
            model.validate()?;
            *model
        }
        None => algebraic_seed(trace)?,
    };

    let freqs = trace.freqs.clone();
    let values = trace.values.clone();
    let n = freqs.len();
    let residuals = move |p: &DVector<f64>| {
        let model = unpack(p);
        let mut r = DVector::<f64>::zeros(2 * n);
        for i in 0..n {
            let diff = model_eval(&model, freqs[i]) - values[i];
            r[i] = diff.re;
            r[n + i] = diff.im;
        }
        r
    };

    let x0 = pack(&seed);
    let scales = DVector::from_vec(vec![
        seed.f_r.abs().max(1e3),
        seed.q_l.abs().max(1.0),
        seed.abs_q_c.abs().max(1.0),
        seed.phi.abs().max(1e-3),
        seed.a.abs().max(1e-3),
        seed.alpha_env.abs().max(1e-3),
        seed.tau.abs().max(1e-12),
    ]);
    let lm_result = lm::minimize(residuals, &x0, &scales, &LmOptions::default())?;

    // The validity checks below run on the final iterate even when the
    // refinement stalled: a stall on data the model cannot legally describe
    // (span narrower than the dip, negative implied loss) is diagnosed by
    // the more actionable InvalidFit, and only otherwise reported as a
    // convergence failure.
    let mut model = unpack(&lm_result.params);
    // Canonical form: positive amplitude, angles wrapped to [−π, π).
    if model.a < 0.0 {
        model.a = -model.a;
        model.alpha_env += std::f64::consts::PI;
    }
    model.phi = wrap_angle(model.phi);
    model.alpha_env = wrap_angle(model.alpha_env);

    if model.q_l <= 0.0 || model.abs_q_c <= 0.0 || model.f_r <= 0.0 {
        return Err(CqedError::InvalidFit(format!(
            "refinement landed on an unphysical model: f_r = {:.6e} Hz, \
             Q_l = {:.3e}, |Q_c| = {:.3e}",
            model.f_r, model.q_l, model.abs_q_c
        )));
    }
    let first = trace.freqs[0];
    let last = trace.freqs[n - 1];
    if model.f_r < first || model.f_r > last {
        return Err(CqedError::InvalidFit(format!(
            "fitted resonance {:.6e} Hz lies outside the measured span \
             [{:.6e}, {:.6e}] Hz",
            model.f_r, first, last
        )));
    }
    let linewidths = trace.span() / (model.f_r / model.q_l);
    if linewidths < MIN_LINEWIDTHS {
        return Err(CqedError::InvalidFit(format!(
            "trace spans only {linewidths:.2} linewidths around the dip; \
             need at least {MIN_LINEWIDTHS}"
        )));
    }
    let q_i = model.implied_q_i().ok_or_else(|| {
        CqedError::InvalidFit(format!(
            "Q_l = {:.3e}, |Q_c| = {:.3e}, φ = {:.4} rad imply nonpositive \
             internal loss (1/Q_i = {:.3e})",
            model.q_l,
            model.abs_q_c,
            model.phi,
            1.0 / model.q_l - model.phi.cos() / model.abs_q_c
        ))
    })?;

    if !lm_result.converged {
        return Err(CqedError::Convergence(format!(
            "model refinement did not converge within {} iterations",
            lm_result.iterations
        )));
    }

    let stderr = match lm::covariance(&lm_result.jtj, lm_result.cost, 2 * n) {
        Some(cov) => FitStandardErrors {
            f_r: cov[(0, 0)].max(0.0).sqrt(),
            q_l: cov[(1, 1)].max(0.0).sqrt(),
            abs_q_c: cov[(2, 2)].max(0.0).sqrt(),
            phi: cov[(3, 3)].max(0.0).sqrt(),
            a: cov[(4, 4)].max(0.0).sqrt(),
            alpha_env: cov[(5, 5)].max(0.0).sqrt(),
            tau: cov[(6, 6)].max(0.0).sqrt(),
        },
        None => FitStandardErrors {
            f_r: f64::NAN,
            q_l: f64::NAN,
            abs_q_c: f64::NAN,
            phi: f64::NAN,
            a: f64::NAN,
            alpha_env: f64::NAN,
            tau: f64::NAN,
        },
    };

    Ok(ResonanceFitResult {
        model,
        q_i,
        stderr,
        residual_rms: (lm_result.cost / n as f64).sqrt(),
    })
}
