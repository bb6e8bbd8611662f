//! QND itinerant-photon detection statistics.
//!
//! A photon stored in the cavity imprints a phase on the qubit through the
//! dispersive interaction: after an interrogation time t with n photons the
//! superposition acquires φ = 2·n·ξ·t. Ramsey interferometry converts that
//! phase into an excited-state probability P_e = (1 − cos φ)/2, with the
//! pulse convention fixed so that no photon means no click. Repeating the
//! (non-demolition) measurement N times and declaring a detection on ≥ k
//! clicks suppresses dark counts exponentially: with per-shot dark-click
//! probability ε and a unanimity rule k = N, the false-positive rate is
//! exactly ε^N.
//!
//! Readout errors are folded into the per-shot click probability,
//! p_click = P_e·(1 − ε_eg) + (1 − P_e)·ε_ge, and the k-of-N statistics are
//! exact binomial tail sums. A seeded Monte-Carlo path cross-checks the
//! analytics and carries Wilson confidence intervals.
//!
//! The photon number is held constant across repetitions (no cavity decay):
//! the protocol models the ideal QND limit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constants::TWO_PI;
use crate::error::{CqedError, Result};

/// Parameters of the repeated Ramsey interrogation protocol.
#[derive(Debug, Clone, Copy)]
pub struct QndProtocol {
    /// Dispersive phase rate ξ in radians per second (per the 2n factor in
    /// φ = 2·n·ξ·t).
    pub xi: f64,
    /// Ramsey interrogation time t in seconds.
    pub interrogation_time: f64,
    /// Photon number present during interrogation (0 probes dark counts).
    pub n_photons: u32,
    /// Number of repeated interrogations N ≥ 1.
    pub repetitions: u32,
    /// P(read e | qubit in g): dark-click probability per shot.
    pub readout_error_ge: f64,
    /// P(read g | qubit in e): missed-click probability per shot.
    pub readout_error_eg: f64,
    /// Detection threshold k: declare a photon on ≥ k clicks out of N.
    pub decision_threshold: u32,
}

impl QndProtocol {
    pub fn validate(&self) -> Result<()> {
        if !self.xi.is_finite() {
            return Err(CqedError::Validation(format!(
                "phase rate must be finite, got {} rad/s",
                self.xi
            )));
        }
        if !(self.interrogation_time >= 0.0) || !self.interrogation_time.is_finite() {
            return Err(CqedError::Validation(format!(
                "interrogation time must be nonnegative, got {} s",
                self.interrogation_time
            )));
        }
        for (name, p) in [
            ("readout_error_ge", self.readout_error_ge),
            ("readout_error_eg", self.readout_error_eg),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CqedError::Validation(format!(
                    "{name} must lie in [0, 1], got {p}"
                )));
            }
        }
        if self.repetitions < 1 {
            return Err(CqedError::Validation(
                "need at least one repetition".into(),
            ));
        }
        if self.decision_threshold < 1 || self.decision_threshold > self.repetitions {
            return Err(CqedError::Validation(format!(
                "decision threshold must lie in 1..=N = {}, got {}",
                self.repetitions, self.decision_threshold
            )));
        }
        Ok(())
    }
}

/// Phase imprinted by the photons: total (unwrapped) and reduced mod 2π.
#[derive(Debug, Clone, Copy)]
pub struct AccumulatedPhase {
    /// φ = 2·n·ξ·t in radians.
    pub total: f64,
    /// φ mod 2π, in [0, 2π).
    pub wrapped: f64,
}

/// Phase the qubit superposition accumulates during one interrogation.
pub fn accumulated_phase(protocol: &QndProtocol) -> Result<AccumulatedPhase> {
    protocol.validate()?;
    let total = 2.0 * protocol.n_photons as f64 * protocol.xi * protocol.interrogation_time;
    Ok(AccumulatedPhase {
        total,
        wrapped: total.rem_euclid(TWO_PI),
    })
}

/// Excited-state probability after the closing Ramsey pulse:
/// P_e = (1 − cos φ)/2. The second π/2 pulse is the inverse of the first,
/// so zero accumulated phase returns the qubit to the ground state.
pub fn ramsey_probability(phi: f64) -> f64 {
    (1.0 - phi.cos()) / 2.0
}

/// Per-shot click probability at a given photon number, readout errors
/// folded in.
fn click_probability(protocol: &QndProtocol, n: u32) -> f64 {
    let phi = 2.0 * n as f64 * protocol.xi * protocol.interrogation_time;
    let p_e = ramsey_probability(phi);
    p_e * (1.0 - protocol.readout_error_eg) + (1.0 - p_e) * protocol.readout_error_ge
}

/// Exact binomial upper tail P(X ≥ k) for X ~ Bin(n, p).
///
/// Evaluated by a multiplicative term recurrence from the j = k term; for
/// p > 1/2 the complement is summed instead so the recurrence never divides
/// by a tiny survival probability.
pub fn binomial_tail(n: u32, k: u32, p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    // Closed forms for the extreme thresholds keep them exact (the
    // complement route below would lose the unanimity identity
    // P(X ≥ n) = pⁿ to cancellation).
    if k == n {
        return p.powi(n as i32);
    }
    if k == 1 {
        return 1.0 - (1.0 - p).powi(n as i32);
    }
    if p > 0.5 {
        // P(X ≥ k) = 1 − P(failures ≥ n − k + 1); with 1 < k < n the
        // complement threshold stays interior, so this cannot recurse into
        // the closed forms above.
        return 1.0 - binomial_tail(n, n - k + 1, 1.0 - p);
    }
    let q = 1.0 - p;
    // term = C(n, k)·p^k, built with interleaved factors to keep magnitudes
    // tame, then scaled by q^(n−k).
    let mut term = 1.0;
    for i in 1..=k {
        term *= (n - k + i) as f64 / i as f64 * p;
    }
    term *= q.powi((n - k) as i32);
    let mut sum = term;
    for j in k..n {
        term *= (n - j) as f64 / (j + 1) as f64 * (p / q);
        sum += term;
    }
    sum.min(1.0)
}

/// Empirical rate with a Wilson 95% confidence interval.
#[derive(Debug, Clone, Copy)]
pub struct RateEstimate {
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval (z = 1.96) for `successes` in `trials`.
pub fn wilson_interval(successes: u64, trials: u64) -> RateEstimate {
    let z = 1.96_f64;
    let n = trials as f64;
    let p_hat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p_hat + z2 / (2.0 * n)) / denom;
    let half = z * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    RateEstimate {
        rate: p_hat,
        ci_low: (center - half).max(0.0),
        ci_high: (center + half).min(1.0),
    }
}

/// Monte-Carlo cross-check of the detection statistics.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarloStats {
    pub shots: u64,
    pub seed: u64,
    pub false_positive: RateEstimate,
    pub efficiency: RateEstimate,
}

/// Detection statistics of the k-of-N protocol.
#[derive(Debug, Clone, Copy)]
pub struct DetectionStats {
    /// Per-shot click probability with the signal photons present.
    pub p_click_signal: f64,
    /// Per-shot click probability with no photon (dark clicks).
    pub p_click_dark: f64,
    /// P(≥ k clicks of N | n = 0).
    pub false_positive_rate: f64,
    /// P(≥ k clicks of N | n = n_photons).
    pub detection_efficiency: f64,
    /// Present when a Monte-Carlo run was attached.
    pub monte_carlo: Option<MonteCarloStats>,
}

/// Exact analytic detection statistics: binomial tails of the per-shot
/// click probabilities with and without the signal photons.
pub fn detection_statistics(protocol: &QndProtocol) -> Result<DetectionStats> {
    protocol.validate()?;
    let p_signal = click_probability(protocol, protocol.n_photons);
    let p_dark = click_probability(protocol, 0);
    Ok(DetectionStats {
        p_click_signal: p_signal,
        p_click_dark: p_dark,
        false_positive_rate: binomial_tail(protocol.repetitions, protocol.decision_threshold, p_dark),
        detection_efficiency: binomial_tail(
            protocol.repetitions,
            protocol.decision_threshold,
            p_signal,
        ),
        monte_carlo: None,
    })
}

/// Monte-Carlo detection statistics: `shots` simulated dark sequences (for
/// the false-positive rate) followed by `shots` signal sequences (for the
/// efficiency), drawn from a single ChaCha8 stream seeded with `seed` —
/// N uniform draws per sequence, dark pass first. Deterministic for a given
/// (seed, shots) pair; the analytic numbers are included alongside.
pub fn run_monte_carlo(protocol: &QndProtocol, shots: u64, seed: u64) -> Result<DetectionStats> {
    protocol.validate()?;
    if shots < 1 {
        return Err(CqedError::Validation("need at least one shot".into()));
    }
    let mut stats = detection_statistics(protocol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut run_pass = |p_click: f64| -> u64 {
        let mut detections = 0;
        for _ in 0..shots {
            let mut clicks = 0;
            for _ in 0..protocol.repetitions {
                if rng.random::<f64>() < p_click {
                    clicks += 1;
                }
            }
            if clicks >= protocol.decision_threshold {
                detections += 1;
            }
        }
        detections
    };
    let dark_detections = run_pass(stats.p_click_dark);
    let signal_detections = run_pass(stats.p_click_signal);

    stats.monte_carlo = Some(MonteCarloStats {
        shots,
        seed,
        false_positive: wilson_interval(dark_detections, shots),
        efficiency: wilson_interval(signal_detections, shots),
    });
    Ok(stats)
}

/// Header for [`qnd_csv_row`].
pub fn qnd_csv_header() -> &'static str {
    "N,k,FP_analytic,FP_mc,eff_analytic,eff_mc,ci_lo,ci_hi"
}

/// One protocol's statistics as a CSV row; the confidence interval is the
/// Wilson interval of the Monte-Carlo false-positive rate. Monte-Carlo
/// columns are NaN when only analytics were computed.
pub fn qnd_csv_row(protocol: &QndProtocol, stats: &DetectionStats) -> String {
    let (fp_mc, eff_mc, ci_lo, ci_hi) = match &stats.monte_carlo {
        Some(mc) => (
            mc.false_positive.rate,
            mc.efficiency.rate,
            mc.false_positive.ci_low,
            mc.false_positive.ci_high,
        ),
        None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
    };
    format!(
        "{},{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
        protocol.repetitions,
        protocol.decision_threshold,
        stats.false_positive_rate,
        fp_mc,
        stats.detection_efficiency,
        eff_mc,
        ci_lo,
        ci_hi
    )
}

/// Human-readable summary of the detection statistics.
pub fn qnd_report_text(protocol: &QndProtocol, stats: &DetectionStats) -> String {
    let mut text = format!(
        "QND detection, {}-of-{} rule\n  p_click (signal) = {:.6e}\n  \
         p_click (dark)   = {:.6e}\n  false positive    = {:.6e}\n  \
         efficiency        = {:.6e}\n",
        protocol.decision_threshold,
        protocol.repetitions,
        stats.p_click_signal,
        stats.p_click_dark,
        stats.false_positive_rate,
        stats.detection_efficiency
    );
    if let Some(mc) = &stats.monte_carlo {
        text.push_str(&format!(
            "  monte carlo ({} shots, seed {})\n    FP  = {:.6e}  [{:.6e}, {:.6e}]\n    \
             eff = {:.6e}  [{:.6e}, {:.6e}]\n",
            mc.shots,
            mc.seed,
            mc.false_positive.rate,
            mc.false_positive.ci_low,
            mc.false_positive.ci_high,
            mc.efficiency.rate,
            mc.efficiency.ci_low,
            mc.efficiency.ci_high
        ));
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(actual: f64, expected: f64, rel_tol: f64) {
        let scale = expected.abs().max(1e-300);
        assert!(
            (actual - expected).abs() / scale <= rel_tol,
            "got {actual:e}, want {expected:e} (rel tol {rel_tol})"
        );
    }

    /// π-phase protocol: one photon flips the qubit deterministically.
    fn pi_phase_protocol() -> QndProtocol {
        QndProtocol {
            xi: std::f64::consts::FRAC_PI_2,
            interrogation_time: 1.0,
            n_photons: 1,
            repetitions: 5,
            readout_error_ge: 0.1,
            readout_error_eg: 0.05,
            decision_threshold: 5,
        }
    }

    #[test]
    fn phase_accumulation_is_linear_in_photon_number() {
        let base = pi_phase_protocol();
        let none = QndProtocol {
            n_photons: 0,
            ..base
        };
        assert_eq!(accumulated_phase(&none).unwrap().total, 0.0);

        // One photon at ξt = π/2 → φ = π.
        let one = accumulated_phase(&base).unwrap();
        assert_close(one.total, std::f64::consts::PI, 1e-15);
        assert_close(one.wrapped, std::f64::consts::PI, 1e-15);

        // Two photons exactly double the phase; wrapped value folds to 0.
        let two = accumulated_phase(&QndProtocol {
            n_photons: 2,
            ..base
        })
        .unwrap();
        assert_close(two.total, 2.0 * one.total, 1e-15);
        assert!(two.wrapped < 1e-12 || TWO_PI - two.wrapped < 1e-12);
    }

    #[test]
    fn ramsey_fringe_values() {
        assert_eq!(ramsey_probability(0.0), 0.0);
        assert_close(ramsey_probability(std::f64::consts::PI), 1.0, 1e-15);
        assert_close(ramsey_probability(std::f64::consts::FRAC_PI_2), 0.5, 1e-15);
        // 2π-periodic and even.
        for phi in [0.3, 1.1, 2.9] {
            assert_close(
                ramsey_probability(phi),
                ramsey_probability(phi + TWO_PI),
                1e-12,
            );
            assert_close(ramsey_probability(phi), ramsey_probability(-phi), 1e-15);
        }
    }

    #[test]
    fn unanimity_false_positive_is_error_to_the_nth() {
        // ε_ge = 0.1, 5-of-5 → 10⁻⁵ exactly.
        let protocol = pi_phase_protocol();
        let stats = detection_statistics(&protocol).unwrap();
        assert_close(stats.p_click_dark, 0.1, 1e-15);
        assert_close(stats.false_positive_rate, 1e-5, 1e-12);

        // log FP(N) = N·log ε for N = 1..10.
        for n in 1..=10u32 {
            let p = QndProtocol {
                repetitions: n,
                decision_threshold: n,
                ..protocol
            };
            let fp = detection_statistics(&p).unwrap().false_positive_rate;
            assert_close(fp, 0.1f64.powi(n as i32), 1e-12);
        }
    }

    #[test]
    fn majority_rule_false_positive_matches_binomial_sum() {
        // ε_ge = 0.1, 4-of-7: Σ_{j=4..7} C(7,j)·0.1^j·0.9^(7−j) = 2.728×10⁻³.
        let protocol = QndProtocol {
            repetitions: 7,
            decision_threshold: 4,
            ..pi_phase_protocol()
        };
        let stats = detection_statistics(&protocol).unwrap();
        assert_close(stats.false_positive_rate, 2.728e-3, 1e-4);
    }

    #[test]
    fn perfect_readout_pi_phase_is_an_ideal_detector() {
        let protocol = QndProtocol {
            readout_error_ge: 0.0,
            readout_error_eg: 0.0,
            ..pi_phase_protocol()
        };
        let stats = detection_statistics(&protocol).unwrap();
        assert_eq!(stats.false_positive_rate, 0.0);
        assert_close(stats.detection_efficiency, 1.0, 1e-15);
    }

    #[test]
    fn efficiency_degrades_with_missed_click_probability() {
        let mut previous = f64::INFINITY;
        for eps_eg in [0.0, 0.05, 0.1, 0.2, 0.4] {
            let protocol = QndProtocol {
                readout_error_eg: eps_eg,
                ..pi_phase_protocol()
            };
            let eff = detection_statistics(&protocol)
                .unwrap()
                .detection_efficiency;
            assert!(
                eff <= previous,
                "efficiency should not increase with ε_eg (ε = {eps_eg})"
            );
            previous = eff;
        }
    }

    #[test]
    fn binomial_tail_edge_cases() {
        assert_eq!(binomial_tail(5, 0, 0.3), 1.0);
        assert_eq!(binomial_tail(5, 6, 0.3), 0.0);
        assert_eq!(binomial_tail(5, 3, 0.0), 0.0);
        assert_eq!(binomial_tail(5, 3, 1.0), 1.0);
        // Complement path (p > 1/2) against a direct small case:
        // P(X ≥ 2), X ~ Bin(2, 0.8) = 0.64.
        assert_close(binomial_tail(2, 2, 0.8), 0.64, 1e-15);
        // Symmetric sanity: P(X ≥ 1 | n = 1) = p.
        assert_close(binomial_tail(1, 1, 0.37), 0.37, 1e-15);
    }

    #[test]
    fn monte_carlo_is_deterministic_per_seed() {
        let protocol = pi_phase_protocol();
        let a = run_monte_carlo(&protocol, 10_000, 99).unwrap();
        let b = run_monte_carlo(&protocol, 10_000, 99).unwrap();
        let (mca, mcb) = (a.monte_carlo.unwrap(), b.monte_carlo.unwrap());
        assert_eq!(mca.false_positive.rate, mcb.false_positive.rate);
        assert_eq!(mca.efficiency.rate, mcb.efficiency.rate);
        let c = run_monte_carlo(&protocol, 10_000, 100).unwrap();
        // Different seed: almost surely a different empirical efficiency.
        assert_ne!(
            mca.efficiency.rate,
            c.monte_carlo.unwrap().efficiency.rate
        );
    }

    #[test]
    fn single_shot_rates_are_binary() {
        let protocol = pi_phase_protocol();
        let stats = run_monte_carlo(&protocol, 1, 5).unwrap();
        let mc = stats.monte_carlo.unwrap();
        assert!(mc.false_positive.rate == 0.0 || mc.false_positive.rate == 1.0);
        assert!(mc.efficiency.rate == 0.0 || mc.efficiency.rate == 1.0);
    }

    #[test]
    fn large_monte_carlo_agrees_with_analytics() {
        // Protocol tuned so FP_analytic ≈ 10⁻³: ε_ge = 0.018, 2-of-3.
        let protocol = QndProtocol {
            repetitions: 3,
            decision_threshold: 2,
            readout_error_ge: 0.018,
            ..pi_phase_protocol()
        };
        let stats = run_monte_carlo(&protocol, 1_000_000, 12).unwrap();
        let mc = stats.monte_carlo.unwrap();
        let fp = stats.false_positive_rate;
        let sigma = (fp * (1.0 - fp) / 1e6).sqrt();
        assert!(
            (mc.false_positive.rate - fp).abs() < 3.0 * sigma,
            "MC FP {} vs analytic {} (3σ = {})",
            mc.false_positive.rate,
            fp,
            3.0 * sigma
        );
        // The Wilson interval should cover the analytic value.
        assert!(mc.false_positive.ci_low <= fp && fp <= mc.false_positive.ci_high);
        let eff = stats.detection_efficiency;
        let sigma_eff = (eff * (1.0 - eff) / 1e6).sqrt();
        assert!((mc.efficiency.rate - eff).abs() < 3.0 * sigma_eff);
    }

    #[test]
    fn monte_carlo_error_shrinks_with_shot_count() {
        let protocol = QndProtocol {
            repetitions: 3,
            decision_threshold: 2,
            readout_error_ge: 0.05,
            ..pi_phase_protocol()
        };
        let fp = detection_statistics(&protocol).unwrap().false_positive_rate;
        for (shots, seed) in [(1_000u64, 21u64), (10_000, 22), (100_000, 23)] {
            let mc = run_monte_carlo(&protocol, shots, seed)
                .unwrap()
                .monte_carlo
                .unwrap();
            let sigma = (fp * (1.0 - fp) / shots as f64).sqrt();
            assert!(
                (mc.false_positive.rate - fp).abs() <= 3.0 * sigma,
                "{} shots: err {} beyond 3σ = {}",
                shots,
                (mc.false_positive.rate - fp).abs(),
                3.0 * sigma
            );
        }
    }

    #[test]
    fn csv_and_report_are_deterministic() {
        let protocol = pi_phase_protocol();
        let stats = run_monte_carlo(&protocol, 1000, 4).unwrap();
        assert_eq!(
            qnd_csv_row(&protocol, &stats),
            qnd_csv_row(&protocol, &stats)
        );
        assert_eq!(
            qnd_csv_header().split(',').count(),
            qnd_csv_row(&protocol, &stats).split(',').count()
        );
        assert!(qnd_report_text(&protocol, &stats).contains("monte carlo"));
        let analytic = detection_statistics(&protocol).unwrap();
        let row = qnd_csv_row(&protocol, &analytic);
        assert!(row.contains("NaN"), "analytic-only row marks MC columns NaN");
    }

    #[test]
    fn invalid_protocols_are_rejected() {
        let base = pi_phase_protocol();
        assert!(QndProtocol {
            readout_error_ge: 1.2,
            ..base
        }
        .validate()
        .is_err());
        assert!(QndProtocol {
            repetitions: 0,
            decision_threshold: 0,
            ..base
        }
        .validate()
        .is_err());
        assert!(QndProtocol {
            decision_threshold: 6,
            ..base
        }
        .validate()
        .is_err());
        assert!(QndProtocol {
            interrogation_time: -1.0,
            ..base
        }
        .validate()
        .is_err());
        assert!(run_monte_carlo(&base, 0, 1).is_err());
    }
}
