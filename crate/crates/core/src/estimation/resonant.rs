use num_complex::Complex64;

use super::{
    detect_crossings, solve_least_squares, FitError, FitParameter, FitResult, FitWarning,
    LeastSquaresProblem, SolverSettings,
};
use crate::exec::Execution;
use crate::model::{ResonatorMode, FLUX_QUANTUM, HBAR};
use crate::semiclassical::QubitGroup;
use crate::trace::PhaseTrace;
use crate::units::mhz;

/// Qubit-group quantities held fixed while fitting counts and dephasing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedGroup {
    /// rad/s
    pub delta: f64,
    /// A
    pub persistent_current: f64,
    /// Bare coupling to the probed mode, rad/s.
    pub bare_coupling: f64,
}

impl FixedGroup {
    pub fn new(delta: f64, persistent_current: f64, bare_coupling: f64) -> Self {
        FixedGroup {
            delta,
            persistent_current,
            bare_coupling,
        }
    }

    pub fn from_group(group: &QubitGroup, mode: &ResonatorMode) -> Result<Self, FitError> {
        Ok(FixedGroup {
            delta: group.qubit.delta,
            persistent_current: group.qubit.persistent_current,
            bare_coupling: group.coupling.bare_coupling(&group.qubit, mode)?,
        })
    }

    /// (g_ε, δ) at every flux for unit bare coupling scaled by `g_bare`.
    pub(crate) fn profile(&self, fluxes: &[f64], mode_omega: f64, g_bare: f64) -> Profile {
        let mut g_eps = Vec::with_capacity(fluxes.len());
        let mut detuning = Vec::with_capacity(fluxes.len());
        for &x in fluxes {
            let eps = 2.0 * self.persistent_current * x * FLUX_QUANTUM / HBAR;
            let e = self.delta.hypot(eps);
            g_eps.push(self.delta / e * g_bare);
            detuning.push(e - mode_omega);
        }
        Profile { g_eps, detuning }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Profile {
    pub g_eps: Vec<f64>,
    pub detuning: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct ModeFitOptions {
    /// Integer counts are searched over 1..=max_count (0..=max_count per
    /// group for two-group fits).
    pub max_count: usize,
    pub execution: Execution,
    pub settings: SolverSettings,
}

impl Default for ModeFitOptions {
    fn default() -> Self {
        ModeFitOptions {
            max_count: 40,
            execution: Execution::default(),
            settings: SolverSettings::default(),
        }
    }
}

/// arg(κ/2 + Σ n_k g_k²/(Γ_k + iδ_k)) at sample `i`.
fn model_phase(kappa: f64, terms: &[(f64, &Profile)], gammas: &[f64], i: usize) -> f64 {
    let mut d = Complex64::new(0.5 * kappa, 0.0);
    for ((n, p), &gamma) in terms.iter().zip(gammas) {
        let g = p.g_eps[i];
        d += n * g * g / Complex64::new(gamma, p.detuning[i]);
    }
    d.im.atan2(d.re)
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

fn finish(result: Result<FitResult, FitError>) -> Option<FitResult> {
    match result {
        Ok(r) => Some(r),
        Err(FitError::MaxIterations { best: Some(b), .. }) => Some(*b),
        Err(_) => None,
    }
}

const GAMMA_MIN_MHZ: f64 = 1e-2;
const GAMMA_MAX_MHZ: f64 = 1e5;

/// Continuous fit of the dephasing rates (MHz) of the groups with non-zero
/// count.
fn fit_gammas(
    counts: &[usize],
    profiles: &[&Profile],
    phases: &[f64],
    kappa: f64,
    settings: SolverSettings,
) -> Option<FitResult> {
    let terms: Vec<(f64, &Profile)> = counts
        .iter()
        .zip(profiles)
        .filter(|(n, _)| **n > 0)
        .map(|(&n, &p)| (n as f64, p))
        .collect();
    let residual = |g_mhz: &[f64]| -> Vec<f64> {
        let gammas: Vec<f64> = g_mhz.iter().map(|&g| mhz(g)).collect();
        (0..phases.len())
            .map(|i| model_phase(kappa, &terms, &gammas, i) - phases[i])
            .collect()
    };
    let sse = |p: &[f64]| residual(p).iter().map(|r| r * r).sum::<f64>();

    let grid = log_grid(1.0, 2000.0, 40);
    let mut start = vec![50.0; terms.len()];
    let sweeps = if terms.len() == 1 { 1 } else { 3 };
    for _ in 0..sweeps {
        for k in 0..terms.len() {
            let mut best = (f64::INFINITY, start[k]);
            for &g in &grid {
                let mut p = start.clone();
                p[k] = g;
                let s = sse(&p);
                if s < best.0 {
                    best = (s, g);
                }
            }
            start[k] = best.1;
        }
    }

    let m = terms.len();
    let names: Vec<String> = (0..m).map(|k| format!("gamma_phi_{k}")).collect();
    let problem = LeastSquaresProblem::new(start, residual)
        .with_bounds(vec![GAMMA_MIN_MHZ; m], vec![GAMMA_MAX_MHZ; m])
        .with_names(names)
        .with_settings(settings);
    finish(solve_least_squares(&problem))
}

struct Candidate {
    counts: Vec<usize>,
    fit: FitResult,
}

/// Pick the minimal-residual candidate; counts whose residuals lie within 1%
/// of the best are ties and the smallest total count wins.
fn select(mut cands: Vec<Candidate>) -> Result<(Candidate, Option<FitWarning>), FitError> {
    cands.retain(|c| c.fit.residual_norm.is_finite());
    if cands.is_empty() {
        return Err(FitError::SingularJacobian);
    }
    let r_best = cands
        .iter()
        .map(|c| c.fit.residual_norm)
        .fold(f64::INFINITY, f64::min);
    let tied = |c: &Candidate| c.fit.residual_norm <= r_best * 1.01;
    let mut ties: Vec<usize> = (0..cands.len()).filter(|&i| tied(&cands[i])).collect();
    ties.sort_by_key(|&i| (cands[i].counts.iter().sum::<usize>(), cands[i].counts.clone()));
    let chosen = ties[0];
    let warning = if ties.len() > 1 {
        let alt = ties[1..]
            .iter()
            .copied()
            .min_by(|&a, &b| cands[a].fit.residual_norm.total_cmp(&cands[b].fit.residual_norm))
            .unwrap();
        let r_chosen = cands[chosen].fit.residual_norm;
        let r_alt = cands[alt].fit.residual_norm;
        log::warn!(
            "ambiguous count: {:?} and {:?} fit within 1%; keeping the smaller",
            cands[chosen].counts,
            cands[alt].counts
        );
        Some(FitWarning::AmbiguousCount {
            chosen: cands[chosen].counts.clone(),
            alternative: cands[alt].counts.clone(),
            relative_gap: if r_chosen > 0.0 { (r_chosen - r_alt).abs() / r_chosen } else { 0.0 },
        })
    } else {
        None
    };
    Ok((cands.swap_remove(chosen), warning))
}

/// Assemble the reported result: integer counts, then dephasing rates in rad/s
/// (NaN for an empty group).
fn report(c: Candidate, names: &[(&str, &str)], warning: Option<FitWarning>) -> FitResult {
    let mut params = Vec::new();
    let mut k = 0;
    for (&n, (n_name, g_name)) in c.counts.iter().zip(names) {
        params.push(FitParameter {
            name: (*n_name).into(),
            value: n as f64,
            uncertainty: 0.0,
        });
        let (value, uncertainty) = if n > 0 {
            let p = &c.fit.parameters[k];
            k += 1;
            (mhz(p.value), mhz(p.uncertainty))
        } else {
            (f64::NAN, f64::NAN)
        };
        params.push(FitParameter {
            name: (*g_name).into(),
            value,
            uncertainty,
        });
    }
    FitResult {
        parameters: params,
        residual_norm: c.fit.residual_norm,
        iterations: c.fit.iterations,
        converged: c.fit.converged,
        gradient_cosine: c.fit.gradient_cosine,
        warnings: warning.into_iter().collect(),
    }
}

/// Fit (n, Γφ) of one ensemble to a trace taken at `mode`.
///
/// n runs over 1..=max_count; for each n, Γφ is fitted continuously and the
/// n with the smallest residual is reported as parameters `n` and `gamma_phi`.
pub fn fit_resonant_mode(
    trace: &PhaseTrace,
    mode: &ResonatorMode,
    fixed: &FixedGroup,
    opts: &ModeFitOptions,
) -> Result<FitResult, FitError> {
    detect_crossings(trace, mode.omega)?;
    let fluxes = trace.fluxes();
    let phases = trace.phases();
    let profile = fixed.profile(&fluxes, mode.omega, fixed.bare_coupling);
    let cands: Vec<Candidate> = opts
        .execution
        .map_range(opts.max_count, |k| {
            let n = k + 1;
            fit_gammas(&[n], &[&profile], &phases, mode.kappa, opts.settings)
                .map(|fit| Candidate { counts: vec![n], fit })
        })
        .into_iter()
        .flatten()
        .collect();
    let (best, warning) = select(cands)?;
    Ok(report(best, &[("n", "gamma_phi")], warning))
}

/// Fit Γφ alone with the count held at `count`; parameter `gamma_phi`, rad/s.
pub fn fit_resonant_gamma(
    trace: &PhaseTrace,
    mode: &ResonatorMode,
    fixed: &FixedGroup,
    count: usize,
    settings: SolverSettings,
) -> Result<FitResult, FitError> {
    if count == 0 {
        return Err(FitError::InvalidProblem("count must be at least 1".into()));
    }
    detect_crossings(trace, mode.omega)?;
    let profile = fixed.profile(&trace.fluxes(), mode.omega, fixed.bare_coupling);
    let mut fit = fit_gammas(&[count], &[&profile], &trace.phases(), mode.kappa, settings)
        .ok_or(FitError::SingularJacobian)?;
    fit.rescale(0, "gamma_phi", mhz(1.0));
    Ok(fit)
}

/// Fit bare coupling and Γφ with the count held at `count`.
///
/// Parameters `g_bare` and `gamma_phi`, both rad/s. `fixed.bare_coupling` is
/// ignored.
pub fn fit_resonant_coupling(
    trace: &PhaseTrace,
    mode: &ResonatorMode,
    fixed: &FixedGroup,
    count: usize,
    settings: SolverSettings,
) -> Result<FitResult, FitError> {
    if count == 0 {
        return Err(FitError::InvalidProblem("count must be at least 1".into()));
    }
    detect_crossings(trace, mode.omega)?;
    let fluxes = trace.fluxes();
    let phases = trace.phases();
    let unit = fixed.profile(&fluxes, mode.omega, 1.0);
    let n = count as f64;
    let residual = |p: &[f64]| -> Vec<f64> {
        let (g, gamma) = (mhz(p[0]), mhz(p[1]));
        (0..phases.len())
            .map(|i| {
                let ge = unit.g_eps[i] * g;
                let d = Complex64::new(0.5 * mode.kappa, 0.0)
                    + n * ge * ge / Complex64::new(gamma, unit.detuning[i]);
                d.im.atan2(d.re) - phases[i]
            })
            .collect()
    };
    let sse = |p: &[f64]| residual(p).iter().map(|r| r * r).sum::<f64>();
    let mut start = [1.0, 50.0];
    let mut best = f64::INFINITY;
    for &g in &log_grid(0.05, 100.0, 24) {
        for &gamma in &log_grid(1.0, 2000.0, 24) {
            let s = sse(&[g, gamma]);
            if s < best {
                best = s;
                start = [g, gamma];
            }
        }
    }
    let problem = LeastSquaresProblem::new(start.to_vec(), residual)
        .with_bounds(vec![1e-4, GAMMA_MIN_MHZ], vec![1e4, GAMMA_MAX_MHZ])
        .with_names(["g_bare", "gamma_phi"])
        .with_settings(settings);
    let mut fit = solve_least_squares(&problem)?;
    fit.rescale(0, "g_bare", mhz(1.0));
    fit.rescale(1, "gamma_phi", mhz(1.0));
    Ok(fit)
}

/// Joint fit of two ensembles sharing one mode.
///
/// Counts (n_a, n_b) run over 0..=max_count each, excluding (0, 0). Reports
/// `n_a`, `gamma_phi_a`, `n_b`, `gamma_phi_b`; the rate of a group fitted with
/// zero members is NaN.
pub fn fit_two_modes(
    trace: &PhaseTrace,
    mode: &ResonatorMode,
    fixed_a: &FixedGroup,
    fixed_b: &FixedGroup,
    opts: &ModeFitOptions,
) -> Result<FitResult, FitError> {
    detect_crossings(trace, mode.omega)?;
    let fluxes = trace.fluxes();
    let phases = trace.phases();
    let pa = fixed_a.profile(&fluxes, mode.omega, fixed_a.bare_coupling);
    let pb = fixed_b.profile(&fluxes, mode.omega, fixed_b.bare_coupling);
    let side = opts.max_count + 1;
    let pairs: Vec<(usize, usize)> = (0..side * side)
        .map(|k| (k / side, k % side))
        .filter(|&(a, b)| a + b > 0)
        .collect();
    let cands: Vec<Candidate> = opts
        .execution
        .map(&pairs, |&(na, nb)| {
            fit_gammas(&[na, nb], &[&pa, &pb], &phases, mode.kappa, opts.settings)
                .map(|fit| Candidate { counts: vec![na, nb], fit })
        })
        .into_iter()
        .flatten()
        .collect();
    let (best, warning) = select(cands)?;
    Ok(report(
        best,
        &[("n_a", "gamma_phi_a"), ("n_b", "gamma_phi_b")],
        warning,
    ))
}
