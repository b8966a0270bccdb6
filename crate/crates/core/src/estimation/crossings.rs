use serde::{Deserialize, Serialize};

use super::FitError;
use crate::trace::PhaseTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Negative,
    Positive,
}

/// Flux at which the qubit transition is resonant with a mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingPoint {
    pub flux: f64,
    /// rad/s
    pub mode_omega: f64,
    pub side: Side,
}

/// Noise level from the median absolute first difference.
fn noise_sigma(phases: &[f64]) -> f64 {
    if phases.len() < 3 {
        return 0.0;
    }
    let mut d: Vec<f64> = phases.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    d.sort_by(|a, b| a.total_cmp(b));
    d[d.len() / 2] / (0.6745 * std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy)]
struct Run {
    sign: f64,
    start: usize,
    end: usize,
}

fn runs_above(phases: &[f64], threshold: f64) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    for (i, &p) in phases.iter().enumerate() {
        if p.abs() <= threshold {
            continue;
        }
        let sign = p.signum();
        match runs.last_mut() {
            Some(r) if r.end + 1 == i && r.sign == sign => r.end = i,
            _ => runs.push(Run { sign, start: i, end: i }),
        }
    }
    runs
}

/// Zero of the phase between two runs: linear interpolation across a single
/// sign change, otherwise a straight-line regression over the gap.
fn locate_zero(flux: &[f64], phase: &[f64], lo: usize, hi: usize) -> f64 {
    let changes: Vec<usize> = (lo..hi)
        .filter(|&i| phase[i] == 0.0 || phase[i].signum() != phase[i + 1].signum())
        .collect();
    if changes.len() == 1 {
        let i = changes[0];
        if phase[i] == 0.0 {
            return flux[i];
        }
        let t = phase[i] / (phase[i] - phase[i + 1]);
        return flux[i] + t * (flux[i + 1] - flux[i]);
    }
    let n = (hi - lo + 1) as f64;
    let (mx, my) = (lo..=hi).fold((0.0, 0.0), |(sx, sy), i| (sx + flux[i], sy + phase[i]));
    let (mx, my) = (mx / n, my / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in lo..=hi {
        sxy += (flux[i] - mx) * (phase[i] - my);
        sxx += (flux[i] - mx) * (flux[i] - mx);
    }
    if sxy == 0.0 {
        return mx;
    }
    mx - my * sxx / sxy
}

/// Locate the resonance fluxes of `mode_omega` in a phase trace.
///
/// A crossing shows up as two adjacent lobes of opposite sign whose zero lies
/// between them; on the positive-flux side the phase falls through zero with
/// increasing flux, on the negative side it rises. Lobes are samples whose
/// magnitude exceeds max(8σ, 0.1·max|φ|) with σ the estimated noise level.
pub fn detect_crossings(trace: &PhaseTrace, mode_omega: f64) -> Result<Vec<CrossingPoint>, FitError> {
    let mut flux = trace.fluxes();
    let mut phase = trace.phases();
    if flux.len() >= 2 && flux[1] < flux[0] {
        flux.reverse();
        phase.reverse();
    }
    let peak = phase.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    if peak == 0.0 {
        return Err(FitError::FeatureNotFound);
    }
    let threshold = (8.0 * noise_sigma(&phase)).max(0.1 * peak);
    let runs = runs_above(&phase, threshold);

    let mut out = Vec::new();
    for pair in runs.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.sign == b.sign {
            continue;
        }
        let zero = locate_zero(&flux, &phase, a.end, b.start);
        let falling = a.sign > 0.0;
        let side = if zero > 0.0 { Side::Positive } else { Side::Negative };
        let expected_falling = side == Side::Positive;
        if falling == expected_falling {
            out.push(CrossingPoint {
                flux: zero,
                mode_omega,
                side,
            });
        }
    }
    if out.is_empty() {
        Err(FitError::FeatureNotFound)
    } else {
        Ok(out)
    }
}
