use super::{
    detect_crossings, solve_least_squares, FitError, FitParameter, FitResult, FitWarning,
    FixedGroup, LeastSquaresProblem, ModeFitOptions,
};
use crate::model::ResonatorMode;
use crate::trace::PhaseTrace;
use crate::units::mhz;

/// Which quantity a dispersive fit frees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispersiveFree {
    /// Integer qubit count over 1..=max_count, coupling fixed.
    Count,
    /// Bare coupling to the mode, with the count fixed.
    Coupling { count: usize },
}

/// Fit a far-detuned trace with tan φ = −2n g_ε²/(κ δ).
///
/// Reports `n` or `g_bare` (rad/s). The coupling held fixed in
/// [`DispersiveFree::Count`] is `fixed.bare_coupling`.
pub fn fit_dispersive(
    trace: &PhaseTrace,
    mode: &ResonatorMode,
    fixed: &FixedGroup,
    free: DispersiveFree,
    opts: &ModeFitOptions,
) -> Result<FitResult, FitError> {
    match detect_crossings(trace, mode.omega) {
        Ok(_) => return Err(FitError::ResonantContamination),
        Err(FitError::FeatureNotFound) => {}
        Err(e) => return Err(e),
    }
    let fluxes = trace.fluxes();
    let phases = trace.phases();
    let unit = fixed.profile(&fluxes, mode.omega, 1.0);
    if unit.detuning.iter().any(|&d| d == 0.0) {
        return Err(FitError::ResonantContamination);
    }
    // tan φ_i = −c_i · n g² with c_i = 2 (Δ/E)²/(κ δ)
    let c: Vec<f64> = unit
        .g_eps
        .iter()
        .zip(&unit.detuning)
        .map(|(u, d)| 2.0 * u * u / (mode.kappa * d))
        .collect();
    let residual_for = |n_g2: f64| -> Vec<f64> {
        c.iter()
            .zip(&phases)
            .map(|(ci, p)| (-ci * n_g2).atan() - p)
            .collect()
    };
    let norm = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();

    match free {
        DispersiveFree::Count => {
            let g2 = fixed.bare_coupling * fixed.bare_coupling;
            let norms: Vec<f64> = opts
                .execution
                .map_range(opts.max_count, |k| norm(&residual_for((k + 1) as f64 * g2)));
            let best = norms.iter().cloned().fold(f64::INFINITY, f64::min);
            let ties: Vec<usize> = (0..norms.len()).filter(|&k| norms[k] <= best * 1.01).collect();
            let chosen = ties[0];
            let mut warnings = Vec::new();
            if ties.len() > 1 {
                let alt = ties[1..]
                    .iter()
                    .copied()
                    .min_by(|&a, &b| norms[a].total_cmp(&norms[b]))
                    .unwrap();
                warnings.push(FitWarning::AmbiguousCount {
                    chosen: vec![chosen + 1],
                    alternative: vec![alt + 1],
                    relative_gap: (norms[chosen] - norms[alt]).abs() / norms[chosen].max(f64::MIN_POSITIVE),
                });
            }
            Ok(FitResult {
                parameters: vec![FitParameter {
                    name: "n".into(),
                    value: (chosen + 1) as f64,
                    uncertainty: 0.0,
                }],
                residual_norm: norms[chosen],
                iterations: norms.len(),
                converged: true,
                gradient_cosine: 0.0,
                warnings,
            })
        }
        DispersiveFree::Coupling { count } => {
            if count == 0 {
                return Err(FitError::InvalidProblem("count must be at least 1".into()));
            }
            let n = count as f64;
            // small-angle linear estimate of n g²
            let num: f64 = c.iter().zip(&phases).map(|(ci, p)| -ci * p.tan()).sum();
            let den: f64 = c.iter().map(|ci| ci * ci).sum();
            let g0 = if num > 0.0 { (num / den / n).sqrt() / mhz(1.0) } else { 1.0 };
            let problem = LeastSquaresProblem::new(vec![g0], |p| {
                let g = mhz(p[0]);
                residual_for(n * g * g)
            })
            .with_bounds(vec![1e-6], vec![1e4])
            .with_names(["g_bare"])
            .with_settings(opts.settings);
            let mut fit = solve_least_squares(&problem)?;
            fit.rescale(0, "g_bare", mhz(1.0));
            Ok(fit)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FluxBias, QubitParams, CouplingGeometry};
    use crate::semiclassical::{steady_state_field, CouplingRule, DriveSpec, Ensemble, QubitGroup};
    use crate::units::{ghz, khz, to_mhz};

    fn s_group(n: usize, coupling: CouplingRule) -> QubitGroup {
        let q = QubitParams::with_default_relaxation("S", ghz(5.6), 74e-9, mhz(53.0)).unwrap();
        QubitGroup::new(q, n, coupling)
    }

    fn trace(g: &QubitGroup, mode: &ResonatorMode) -> PhaseTrace {
        let ens = Ensemble::single(g.clone()).unwrap();
        let drive = DriveSpec::default_for(mode);
        let flux: Vec<f64> = (0..401).map(|i| -0.04 + 2e-4 * i as f64).collect();
        let phase: Vec<f64> = flux
            .iter()
            .map(|&x| steady_state_field(&ens, mode, FluxBias::new(x).unwrap(), &drive).unwrap().phase_shift)
            .collect();
        PhaseTrace::from_phases(mode.index, &flux, &phase).unwrap()
    }

    #[test]
    fn count_at_fundamental() {
        let mode = ResonatorMode::new(1, ghz(2.594), khz(55.5)).unwrap();
        let geom = CouplingGeometry::new(0.5e-12, 11e-9).unwrap();
        let g = s_group(10, CouplingRule::from_geometry(geom));
        let fixed = FixedGroup::from_group(&g, &mode).unwrap();
        let fit = fit_dispersive(&trace(&g, &mode), &mode, &fixed, DispersiveFree::Count, &ModeFitOptions::default()).unwrap();
        assert_eq!(fit.value("n"), 10.0);
    }

    #[test]
    fn coupling_at_second_harmonic() {
        let mode = ResonatorMode::new(2, ghz(5.202), khz(216.0)).unwrap();
        let g = s_group(10, CouplingRule::fixed(2, mhz(0.4)));
        let fixed = FixedGroup::from_group(&g, &mode).unwrap();
        let free = DispersiveFree::Coupling { count: 10 };
        let fit = fit_dispersive(&trace(&g, &mode), &mode, &fixed, free, &ModeFitOptions::default()).unwrap();
        assert!((to_mhz(fit.value("g_bare")) - 0.4).abs() < 0.04);
    }

    #[test]
    fn resonant_trace_is_rejected() {
        let mode = ResonatorMode::new(3, 3.0 * ghz(2.594), khz(715.0)).unwrap();
        let g = s_group(8, CouplingRule::fixed(3, mhz(1.2)));
        let fixed = FixedGroup::from_group(&g, &mode).unwrap();
        assert_eq!(
            fit_dispersive(&trace(&g, &mode), &mode, &fixed, DispersiveFree::Count, &ModeFitOptions::default()),
            Err(FitError::ResonantContamination)
        );
    }

    #[test]
    fn phase_magnitude_grows_with_count() {
        let mode = ResonatorMode::new(1, ghz(2.594), khz(55.5)).unwrap();
        let one = trace(&s_group(1, CouplingRule::fixed(1, mhz(0.7))), &mode);
        let ten = trace(&s_group(10, CouplingRule::fixed(1, mhz(0.7))), &mode);
        for (a, b) in one.phases().iter().zip(ten.phases()) {
            assert!(a.abs() < b.abs());
        }
    }
}
