use super::{solve_least_squares, CrossingPoint, FitError, FitResult, LeastSquaresProblem};
use crate::model::{FLUX_QUANTUM, PLANCK};

/// ε per unit flux per nA, in GHz.
const EPS_GHZ_PER_NA: f64 = 2.0 * 1e-9 * FLUX_QUANTUM / PLANCK / 1e9;

/// Fit gap Δ and persistent current I to a set of crossing points.
///
/// Each point contributes the residual √(Δ² + ε(x)²) − ω_j. Parameters are
/// `delta` (rad/s) and `persistent_current` (A).
pub fn fit_spectrum(points: &[CrossingPoint]) -> Result<FitResult, FitError> {
    if points.is_empty() {
        return Err(FitError::InsufficientData("no crossing points".into()));
    }
    let first = points[0].mode_omega;
    if points.iter().all(|p| (p.mode_omega - first).abs() <= 1e-12 * first.abs()) {
        return Err(FitError::UnderDetermined);
    }

    let xs: Vec<f64> = points.iter().map(|p| p.flux).collect();
    let ws: Vec<f64> = points
        .iter()
        .map(|p| p.mode_omega / std::f64::consts::TAU / 1e9)
        .collect();

    // E² = Δ² + c² I² x² is linear in (Δ², I²)
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &w) in xs.iter().zip(&ws) {
        let u = (EPS_GHZ_PER_NA * x).powi(2);
        s11 += 1.0;
        s12 += u;
        s22 += u * u;
        b1 += w * w;
        b2 += w * w * u;
    }
    let det = s11 * s22 - s12 * s12;
    let (d2, i2) = if det.abs() > 0.0 {
        ((b1 * s22 - b2 * s12) / det, (s11 * b2 - s12 * b1) / det)
    } else {
        (f64::NAN, f64::NAN)
    };
    let initial = if d2 > 0.0 && i2 > 0.0 {
        vec![d2.sqrt(), i2.sqrt()]
    } else {
        vec![ws.iter().cloned().fold(f64::INFINITY, f64::min) * 0.8, 100.0]
    };

    let problem = LeastSquaresProblem::new(initial, |p| {
        xs.iter()
            .zip(&ws)
            .map(|(&x, &w)| p[0].hypot(EPS_GHZ_PER_NA * p[1] * x) - w)
            .collect()
    })
    .with_bounds(vec![1e-6, 1e-6], vec![1e4, 1e6])
    .with_names(["delta", "persistent_current"]);
    let mut fit = solve_least_squares(&problem)?;
    fit.rescale(0, "delta", std::f64::consts::TAU * 1e9);
    fit.rescale(1, "persistent_current", 1e-9);
    Ok(fit)
}
