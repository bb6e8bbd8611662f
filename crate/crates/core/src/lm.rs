//! Dense Levenberg-Marquardt least-squares minimizer for the small
//! (≤ 10 parameter) fitting problems in this crate.
//!
//! Minimizes ½·Σ r_i(x)² over x with a numerically differentiated Jacobian
//! (forward differences). The damping term uses Marquardt's scaling
//! (λ·diag(JᵀJ)), so the step is invariant under rescaling of individual
//! parameters as long as the supplied `scales` keep the finite-difference
//! steps sensible. No bounds: callers parametrize so that transient
//! excursions outside the physical domain still evaluate.

use nalgebra::{DMatrix, DVector};

use crate::error::{CqedError, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the cost improves by less than this relative amount.
    pub ftol: f64,
    /// Stop when the step is smaller than xtol·(scale) in every coordinate.
    pub xtol: f64,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            ftol: 1e-12,
            xtol: 1e-12,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    /// Parameter vector at the last accepted step.
    pub params: DVector<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub iterations: usize,
    /// JᵀJ at the solution; feeds the covariance estimate.
    pub jtj: DMatrix<f64>,
    /// False when the iteration or damping budget ran out first.
    pub converged: bool,
}

/// Forward-difference Jacobian of `residuals` at `x`, with steps
/// √ε·max(|x_i|, scale_i).
fn numeric_jacobian<F>(
    residuals: &F,
    x: &DVector<f64>,
    r0: &DVector<f64>,
    scales: &DVector<f64>,
) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let m = r0.len();
    let n = x.len();
    let sqrt_eps = f64::EPSILON.sqrt();
    let mut jacobian = DMatrix::<f64>::zeros(m, n);
    let mut probe = x.clone();
    for j in 0..n {
        let h = sqrt_eps * x[j].abs().max(scales[j].abs()).max(1e-300);
        let saved = probe[j];
        probe[j] = saved + h;
        let r1 = residuals(&probe);
        probe[j] = saved;
        for i in 0..m {
            jacobian[(i, j)] = (r1[i] - r0[i]) / h;
        }
    }
    jacobian
}

/// Run Levenberg-Marquardt from `x0`. `scales` gives the characteristic
/// magnitude of each parameter (used for difference steps and the step-size
/// stop test); it must be strictly positive elementwise.
///
/// Returns the best point found even when the iteration budget runs out
/// (`converged = false` then); errors only on invalid inputs or a residual
/// function that returns non-finite values at the starting point.
pub fn minimize<F>(
    residuals: F,
    x0: &DVector<f64>,
    scales: &DVector<f64>,
    opts: &LmOptions,
) -> Result<LmResult>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x0.len();
    if n == 0 {
        return Err(CqedError::Validation("no parameters to fit".into()));
    }
    if scales.len() != n || scales.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(CqedError::Validation(
            "parameter scales must be positive and match the parameter count".into(),
        ));
    }

    let mut x = x0.clone();
    let mut r = residuals(&x);
    if r.len() < n {
        return Err(CqedError::Validation(format!(
            "{} residuals cannot determine {} parameters",
            r.len(),
            n
        )));
    }
    let mut cost = r.dot(&r);
    if !cost.is_finite() {
        return Err(CqedError::Convergence(
            "residuals are not finite at the starting point".into(),
        ));
    }

    let mut lambda = opts.initial_lambda;
    let mut converged = false;
    let mut iterations = 0;

    'outer: for iter in 0..opts.max_iterations {
        iterations = iter + 1;
        let jacobian = numeric_jacobian(&residuals, &x, &r, scales);
        let jtj = jacobian.transpose() * &jacobian;
        let gradient = jacobian.transpose() * &r;

        // Inner loop: raise λ until a step is accepted or damping saturates.
        loop {
            let mut damped = jtj.clone();
            for i in 0..n {
                // Floor the Marquardt scaling so flat directions still move.
                let d = jtj[(i, i)].max(1e-30);
                damped[(i, i)] += lambda * d;
            }
            let step = match damped.cholesky() {
                Some(chol) => chol.solve(&(-&gradient)),
                None => {
                    // Singular even with damping: raise λ and retry.
                    lambda *= 10.0;
                    if lambda > 1e14 {
                        break 'outer;
                    }
                    continue;
                }
            };

            let x_new = &x + &step;
            let r_new = residuals(&x_new);
            let cost_new = r_new.dot(&r_new);

            if cost_new.is_finite() && cost_new < cost {
                let improvement = (cost - cost_new) / cost.max(f64::MIN_POSITIVE);
                let tiny_step = (0..n).all(|i| step[i].abs() <= opts.xtol * scales[i]);
                x = x_new;
                r = r_new;
                cost = cost_new;
                lambda = (lambda * 0.3).max(1e-12);
                if improvement < opts.ftol || tiny_step {
                    converged = true;
                    break 'outer;
                }
                break; // next outer iteration with a fresh Jacobian
            }

            // Rejected step already below parameter resolution: raising λ
            // only shrinks it further, so the iterate is a stationary point
            // to within xtol (typical at a noise-floor minimum, where no
            // direction improves the cost).
            if (0..n).all(|i| step[i].abs() <= opts.xtol * scales[i]) {
                converged = true;
                break 'outer;
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                // Cannot improve in any damped direction: treat as converged
                // when the gradient is already negligible, else give up.
                converged = gradient.amax() <= 1e-8 * (1.0 + cost);
                break 'outer;
            }
        }
    }

    // Recompute JᵀJ at the final point so the covariance matches `params`.
    let jacobian = numeric_jacobian(&residuals, &x, &r, scales);
    let jtj = jacobian.transpose() * &jacobian;

    Ok(LmResult {
        params: x,
        cost,
        iterations,
        jtj,
        converged,
    })
}

/// Parameter covariance estimate σ²·(JᵀJ)⁻¹ with σ² = cost/(m − n), where m
/// is the residual count. `None` when the problem has no degrees of freedom
/// left or JᵀJ is singular.
pub fn covariance(jtj: &DMatrix<f64>, cost: f64, residual_count: usize) -> Option<DMatrix<f64>> {
    let n = jtj.nrows();
    if residual_count <= n {
        return None;
    }
    let sigma2 = cost / (residual_count - n) as f64;
    jtj.clone().try_inverse().map(|inv| inv * sigma2)
}
