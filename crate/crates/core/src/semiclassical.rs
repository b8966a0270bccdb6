//! Semiclassical cavity response of a resonator loaded with qubit ensembles.
//!
//! In the weak-drive, large-dephasing limit each qubit's coherence follows
//! the cavity field adiabatically and contributes a complex susceptibility
//! g²/(Γφ + iδ) to the field damping:
//!
//! ```text
//! d⟨a⟩/dt = −(κ/2 + Σ_i g_i²/(Γφ,i + iδ_i)) ⟨a⟩ + i f/2
//! ```
//!
//! The transmission phase is reported relative to the bare resonator,
//! φ = arg⟨a⟩_bare − arg⟨a⟩, which for a single group of n identical qubits is
//! tan φ = −2n g² δ / (κ(Γφ² + δ²) + 2n g² Γφ).

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    bare_coupling, transition_frequency, transversal_coupling, CouplingGeometry, FluxBias,
    ModelError, QubitParams, ResonatorMode,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemiclassicalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no coupling available for qubit `{label}` on mode {mode}: no geometry and no override")]
    MissingCoupling { label: String, mode: u32 },
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("effective damping has non-positive real part {0:e}; no stable steady state")]
    UnstableRegime(f64),
    #[error("dispersive phase formula is undefined at zero detuning")]
    ZeroDetuning,
    #[error("time step {dt:e} s exceeds the stability limit {limit:e} s")]
    StepTooLarge { dt: f64, limit: f64 },
}

/// How the bare coupling of a qubit to each mode is obtained.
///
/// A per-mode override (e.g. a measured capacitive coupling) wins over the
/// inductive geometry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CouplingRule {
    pub geometry: Option<CouplingGeometry>,
    /// Mode index → bare coupling, rad/s.
    pub overrides: BTreeMap<u32, f64>,
}

impl CouplingRule {
    pub fn from_geometry(geometry: CouplingGeometry) -> Self {
        CouplingRule {
            geometry: Some(geometry),
            overrides: BTreeMap::new(),
        }
    }

    /// Same bare coupling on every mode listed.
    pub fn fixed(mode: u32, g_bare: f64) -> Self {
        let mut overrides = BTreeMap::new();
        overrides.insert(mode, g_bare);
        CouplingRule {
            geometry: None,
            overrides,
        }
    }

    pub fn with_override(mut self, mode: u32, g_bare: f64) -> Self {
        self.overrides.insert(mode, g_bare);
        self
    }

    pub fn bare_coupling(
        &self,
        q: &QubitParams,
        mode: &ResonatorMode,
    ) -> Result<f64, SemiclassicalError> {
        if let Some(&g) = self.overrides.get(&mode.index) {
            return Ok(g);
        }
        match &self.geometry {
            Some(geom) => Ok(bare_coupling(geom, q, mode)),
            None => Err(SemiclassicalError::MissingCoupling {
                label: q.label.clone(),
                mode: mode.index,
            }),
        }
    }
}

/// `count` identical qubits sharing one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitGroup {
    pub qubit: QubitParams,
    pub count: usize,
    pub coupling: CouplingRule,
}

impl QubitGroup {
    pub fn new(qubit: QubitParams, count: usize, coupling: CouplingRule) -> Self {
        QubitGroup {
            qubit,
            count,
            coupling,
        }
    }
}

/// Qubits coupled to the resonator, stored as groups of identical members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    groups: Vec<QubitGroup>,
    g_qq: f64,
}

impl Ensemble {
    pub fn new(groups: Vec<QubitGroup>, g_qq: f64) -> Result<Self, SemiclassicalError> {
        if groups.is_empty() {
            return Err(SemiclassicalError::InvalidEnsemble(
                "at least one qubit group is required".into(),
            ));
        }
        if !(g_qq.is_finite() && g_qq >= 0.0) {
            return Err(SemiclassicalError::InvalidEnsemble(
                "g_qq must be non-negative".into(),
            ));
        }
        for g in &groups {
            g.qubit.validate()?;
            if g.qubit.gamma_phi <= 0.0 {
                return Err(SemiclassicalError::InvalidEnsemble(format!(
                    "qubit `{}` needs a positive dephasing rate",
                    g.qubit.label
                )));
            }
        }
        let min_gamma = groups
            .iter()
            .map(|g| g.qubit.gamma_phi)
            .fold(f64::INFINITY, f64::min);
        if g_qq > 0.0 && g_qq >= 0.1 * min_gamma {
            log::warn!(
                "g_qq = {g_qq:.3e} rad/s is not small against the smallest dephasing rate \
                 {min_gamma:.3e} rad/s; the first-order qubit-qubit correction is unreliable"
            );
        }
        Ok(Ensemble { groups, g_qq })
    }

    pub fn single(group: QubitGroup) -> Result<Self, SemiclassicalError> {
        Self::new(vec![group], 0.0)
    }

    pub fn groups(&self) -> &[QubitGroup] {
        &self.groups
    }

    pub fn g_qq(&self) -> f64 {
        self.g_qq
    }

    pub fn qubit_count(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    /// Expanded list of individual qubits, group order preserved.
    pub fn qubits(&self) -> impl Iterator<Item = &QubitParams> {
        self.groups
            .iter()
            .flat_map(|g| std::iter::repeat_n(&g.qubit, g.count))
    }

    /// Per-group quantities at one flux point.
    pub fn terms(
        &self,
        mode: &ResonatorMode,
        flux: FluxBias,
    ) -> Result<Vec<GroupTerm>, SemiclassicalError> {
        self.groups
            .iter()
            .map(|g| {
                let g_bare = g.coupling.bare_coupling(&g.qubit, mode)?;
                Ok(GroupTerm {
                    count: g.count,
                    g_eps: transversal_coupling(&g.qubit, flux, g_bare),
                    gamma_phi: g.qubit.gamma_phi,
                    gamma_1: g.qubit.gamma_1,
                    detuning: transition_frequency(&g.qubit, flux) - mode.omega,
                })
            })
            .collect()
    }
}

/// One group's contribution evaluated at a given flux and mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupTerm {
    pub count: usize,
    pub g_eps: f64,
    pub gamma_phi: f64,
    pub gamma_1: f64,
    /// δ = E − ω_j
    pub detuning: f64,
}

/// Drive of the probed mode; the drive frequency always equals the mode
/// frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    /// f, rad/s
    pub strength: f64,
}

impl DriveSpec {
    pub fn new(strength: f64) -> Result<Self, SemiclassicalError> {
        if strength.is_finite() && strength > 0.0 {
            Ok(DriveSpec { strength })
        } else {
            Err(SemiclassicalError::InvalidEnsemble(
                "drive strength must be positive".into(),
            ))
        }
    }

    /// f = 0.1 κ: roughly 0.01 photons in the bare resonator.
    pub fn default_for(mode: &ResonatorMode) -> Self {
        DriveSpec {
            strength: 0.1 * mode.kappa,
        }
    }
}

/// Limit on |⟨a⟩|² below which the response counts as weak-drive.
pub const WEAK_DRIVE_PHOTONS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityResponse {
    pub field: Complex64,
    /// rad, relative to the bare resonator
    pub phase_shift: f64,
    pub amplitude: f64,
    pub weak_drive: bool,
}

impl CavityResponse {
    fn from_field(field: Complex64, bare: Complex64) -> Self {
        let amplitude = field.norm();
        CavityResponse {
            field,
            phase_shift: (bare * field.conj()).arg(),
            amplitude,
            weak_drive: amplitude * amplitude < WEAK_DRIVE_PHOTONS,
        }
    }
}

/// Per-qubit damping contribution g²/(Γφ + iδ). Its real part is never negative.
pub fn qubit_susceptibility(g_eps: f64, gamma_phi: f64, detuning: f64) -> Complex64 {
    Complex64::new(g_eps * g_eps, 0.0) / Complex64::new(gamma_phi, detuning)
}

/// κ/2 + Σ n_k g_k²/(Γφ,k + iδ_k) for the given group terms.
pub fn damping_from_terms(kappa: f64, terms: &[GroupTerm]) -> Complex64 {
    terms.iter().fold(Complex64::new(0.5 * kappa, 0.0), |acc, t| {
        acc + (t.count as f64) * qubit_susceptibility(t.g_eps, t.gamma_phi, t.detuning)
    })
}

/// Effective (complex) field damping rate of `mode` at `flux`.
pub fn effective_damping(
    ens: &Ensemble,
    mode: &ResonatorMode,
    flux: FluxBias,
) -> Result<Complex64, SemiclassicalError> {
    Ok(damping_from_terms(mode.kappa, &ens.terms(mode, flux)?))
}

/// Stationary field for a given damping and drive.
pub fn response_from_damping(
    damping: Complex64,
    kappa: f64,
    drive: f64,
) -> Result<CavityResponse, SemiclassicalError> {
    if damping.re <= 0.0 {
        return Err(SemiclassicalError::UnstableRegime(damping.re));
    }
    let source = Complex64::new(0.0, 0.5 * drive);
    let field = source / damping;
    let bare = source / (0.5 * kappa);
    Ok(CavityResponse::from_field(field, bare))
}

/// Steady state of the driven cavity, d⟨a⟩/dt = 0.
pub fn steady_state_field(
    ens: &Ensemble,
    mode: &ResonatorMode,
    flux: FluxBias,
    drive: &DriveSpec,
) -> Result<CavityResponse, SemiclassicalError> {
    let damping = effective_damping(ens, mode, flux)?;
    response_from_damping(damping, mode.kappa, drive.strength)
}

/// Closed-form phase of n identical qubits, valid at any detuning.
pub fn phase_shift_resonant(n: usize, g_eps: f64, gamma_phi: f64, kappa: f64, detuning: f64) -> f64 {
    let a = 2.0 * n as f64 * g_eps * g_eps;
    let num = -a * detuning;
    let den = kappa * (gamma_phi * gamma_phi + detuning * detuning) + a * gamma_phi;
    // den > 0, so atan2 coincides with atan(num/den)
    num.atan2(den)
}

/// Far-detuned limit tan φ = −2n g²/(κ δ).
pub fn phase_shift_dispersive(
    n: usize,
    g_eps: f64,
    kappa: f64,
    detuning: f64,
) -> Result<f64, SemiclassicalError> {
    if detuning == 0.0 {
        return Err(SemiclassicalError::ZeroDetuning);
    }
    Ok((-2.0 * n as f64 * g_eps * g_eps / (kappa * detuning)).atan())
}

/// Stationary ⟨σz⟩ of a driven qubit including saturation by |⟨a⟩|².
pub fn sigma_z_saturation(g: f64, gamma_1: f64, gamma_phi: f64, detuning: f64, photon_sq: f64) -> f64 {
    let s = 4.0 * g * g / gamma_1 * gamma_phi * photon_sq
        / (gamma_phi * gamma_phi + detuning * detuning);
    -1.0 / (1.0 + s)
}

/// ⟨σ−⟩ to first order in the nearest-neighbour coupling g_qq.
pub fn sigma_minus_with_qq(
    g: f64,
    g_qq: f64,
    gamma_phi: f64,
    detuning: f64,
    field: Complex64,
) -> Complex64 {
    let z = Complex64::new(gamma_phi, detuning);
    let leading = Complex64::new(0.0, -g) * field / z;
    let correction = -2.0 * g_qq * g * field / (z * z);
    leading + correction
}

/// Relative size of the first-order g_qq term against the leading term.
pub fn qq_correction_ratio(g_qq: f64, gamma_phi: f64, detuning: f64) -> f64 {
    2.0 * g_qq / gamma_phi.hypot(detuning)
}

/// Time-integrate the field equation from ⟨a⟩(0) = 0 with a fixed-step RK4.
///
/// Returns `(t, ⟨a⟩(t))` samples including t = 0. The final step is shortened
/// so the trajectory ends exactly at `t_end`.
pub fn integrate_field(
    ens: &Ensemble,
    mode: &ResonatorMode,
    flux: FluxBias,
    drive: &DriveSpec,
    t_end: f64,
    dt: f64,
) -> Result<Vec<(f64, Complex64)>, SemiclassicalError> {
    let damping = effective_damping(ens, mode, flux)?;
    integrate_linear(damping, mode.kappa, drive.strength, t_end, dt)
}

pub(crate) fn integrate_linear(
    damping: Complex64,
    kappa: f64,
    drive: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<(f64, Complex64)>, SemiclassicalError> {
    let qubit_part = (damping - 0.5 * kappa).norm();
    let limit = 0.1 / (kappa + qubit_part);
    if !(dt > 0.0 && dt < limit) {
        return Err(SemiclassicalError::StepTooLarge { dt, limit });
    }
    let source = Complex64::new(0.0, 0.5 * drive);
    let rhs = |a: Complex64| -damping * a + source;

    let steps = (t_end / dt).ceil().max(0.0) as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let mut a = Complex64::new(0.0, 0.0);
    let mut t = 0.0;
    out.push((t, a));
    for k in 0..steps {
        let h = (t_end - t).min(dt);
        let k1 = rhs(a);
        let k2 = rhs(a + 0.5 * h * k1);
        let k3 = rhs(a + 0.5 * h * k2);
        let k4 = rhs(a + h * k3);
        a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = if k + 1 == steps { t_end } else { t + h };
        out.push((t, a));
    }
    Ok(out)
}
