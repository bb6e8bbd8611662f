//! Algebraic (Kåsa) circle fit in the complex plane.
//!
//! Minimizes Σ (x² + y² − A·x − B·y − C)² over A, B, C, which is linear
//! least squares; the center is (A/2, B/2) and r² = C + (A/2)² + (B/2)².
//! Fast and non-iterative, accurate enough to seed the phase fit; the final
//! model refinement absorbs its small bias.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CqedError, Result};

/// A fitted circle: center and radius.
#[derive(Debug, Clone, Copy)]
pub struct CircleFit {
    pub center: Complex64,
    pub radius: f64,
}

impl CircleFit {
    /// Sum of squared radial residuals Σ(|z − center| − r)².
    pub fn radial_residual_sum(&self, points: &[Complex64]) -> f64 {
        points
            .iter()
            .map(|z| {
                let d = (z - self.center).norm() - self.radius;
                d * d
            })
            .sum()
    }

    /// RMS radial residual over the points.
    pub fn radial_rms(&self, points: &[Complex64]) -> f64 {
        (self.radial_residual_sum(points) / points.len() as f64).sqrt()
    }
}

/// Least-squares circle through complex points. Needs ≥ 3 non-collinear
/// points; collinear input makes the normal system singular.
pub fn kasa_circle(points: &[Complex64]) -> Result<CircleFit> {
    if points.len() < 3 {
        return Err(CqedError::Validation(format!(
            "circle fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len();
    let design = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => points[i].re,
        1 => points[i].im,
        _ => 1.0,
    });
    let rhs = DVector::from_iterator(n, points.iter().map(|z| z.norm_sqr()));
    let svd = design.svd(true, true);
    // A rank-deficient design means collinear points: the pseudo-inverse
    // would silently return some minimum-norm circle, so reject instead.
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_min > 1e-10 * s_max) {
        return Err(CqedError::Singularity(
            "circle fit is degenerate (collinear points)".into(),
        ));
    }
    let sol = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| CqedError::Singularity(format!("circle fit failed: {e}")))?;
    let center = Complex64::new(sol[0] / 2.0, sol[1] / 2.0);
    let r_sq = sol[2] + center.norm_sqr();
    if !(r_sq > 0.0) {
        return Err(CqedError::Singularity(
            "circle fit produced a nonpositive radius".into(),
        ));
    }
    Ok(CircleFit {
        center,
        radius: r_sq.sqrt(),
    })
}
