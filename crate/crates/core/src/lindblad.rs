//! Master-equation steady state of the driven, dissipative Tavis-Cummings
//! system for up to three qubits, used as a brute-force check of the
//! semiclassical model.
//!
//! Frame: rotating at the drive frequency, which equals the cavity frequency.
//!
//! ```text
//! H = Σ_i (δ_i/2) σz_i + Σ_i g_i (σ+_i a + σ-_i a†) − (f/2)(a + a†)
//! ```
//!
//! Dissipators: κ on a, Γ1 on each σ-, and Γφ*/2 on each σz, so that the
//! transverse coherence decays at Γ1/2 + Γφ* = Γφ. The drive sign makes the
//! bare-cavity field +i f/κ, the same phase reference as the semiclassical
//! model.
//!
//! The density matrix is vectorised column-major, vec(AρB) = (Bᵀ ⊗ A) vec(ρ),
//! and the generator is assembled densely in units of κ.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::exec::Execution;
use crate::model::{FluxBias, ModelError, ResonatorMode};
use crate::semiclassical::{
    damping_from_terms, response_from_damping, DriveSpec, Ensemble, GroupTerm,
    SemiclassicalError,
};

/// Largest Hilbert-space dimension accepted, (N+1)·2^n.
pub const MAX_DIMENSION: usize = 64;
pub const MAX_QUBITS: usize = 3;
/// Largest population tolerated in the highest kept Fock level.
pub const TOP_FOCK_LIMIT: f64 = 1e-6;

const TRACE_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-12;
const POSITIVITY_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("Hilbert dimension {0} exceeds the dense limit {MAX_DIMENSION}")]
    DimensionTooLarge(usize),
    #[error("{0} qubits requested; the oracle handles at most {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("invalid truncated system: {0}")]
    InvalidSystem(String),
    #[error("generator kernel is not one-dimensional; steady state is not unique")]
    DegenerateKernel,
    #[error("top Fock level holds population {0:e}; raise the cutoff")]
    Truncation(f64),
    #[error("solved state violates a density-matrix invariant: {0}")]
    InvalidState(String),
    #[error(transparent)]
    Semiclassical(#[from] SemiclassicalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One qubit as seen by the oracle, already projected to the energy basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleQubit {
    /// δ = E − ω_drive, rad/s
    pub detuning: f64,
    /// Transverse coupling g_ε, rad/s
    pub coupling: f64,
    pub gamma_phi: f64,
    pub gamma_1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSystem {
    qubits: Vec<OracleQubit>,
    fock_cutoff: usize,
    kappa: f64,
    drive: f64,
}

impl TruncatedSystem {
    /// `fock_cutoff` is the highest photon number kept.
    pub fn new(
        qubits: Vec<OracleQubit>,
        fock_cutoff: usize,
        kappa: f64,
        drive: f64,
    ) -> Result<Self, OracleError> {
        if qubits.len() > MAX_QUBITS {
            return Err(OracleError::TooManyQubits(qubits.len()));
        }
        let dim = (fock_cutoff + 1) << qubits.len();
        if dim > MAX_DIMENSION {
            return Err(OracleError::DimensionTooLarge(dim));
        }
        if fock_cutoff == 0 {
            return Err(OracleError::InvalidSystem("Fock cutoff must be at least 1".into()));
        }
        if !(kappa.is_finite() && kappa > 0.0) || !(drive.is_finite() && drive >= 0.0) {
            return Err(OracleError::InvalidSystem(
                "kappa must be positive and drive non-negative".into(),
            ));
        }
        for q in &qubits {
            let ok = q.detuning.is_finite()
                && q.coupling.is_finite()
                && q.gamma_1 >= 0.0
                && q.gamma_phi >= 0.5 * q.gamma_1
                && q.gamma_phi > 0.0;
            if !ok {
                return Err(OracleError::InvalidSystem(format!(
                    "qubit rates must satisfy Γφ ≥ Γ1/2 ≥ 0 with Γφ > 0: {q:?}"
                )));
            }
        }
        Ok(TruncatedSystem {
            qubits,
            fock_cutoff,
            kappa,
            drive,
        })
    }

    /// Expand an ensemble at one flux point into individual oracle qubits.
    pub fn from_ensemble(
        ens: &Ensemble,
        mode: &ResonatorMode,
        flux: FluxBias,
        drive: &DriveSpec,
        fock_cutoff: usize,
    ) -> Result<Self, OracleError> {
        let n = ens.qubit_count();
        if n > MAX_QUBITS {
            return Err(OracleError::TooManyQubits(n));
        }
        let qubits = ens
            .terms(mode, flux)?
            .into_iter()
            .flat_map(|t| {
                std::iter::repeat_n(
                    OracleQubit {
                        detuning: t.detuning,
                        coupling: t.g_eps,
                        gamma_phi: t.gamma_phi,
                        gamma_1: t.gamma_1,
                    },
                    t.count,
                )
            })
            .collect();
        Self::new(qubits, fock_cutoff, mode.kappa, drive.strength)
    }

    pub fn qubits(&self) -> &[OracleQubit] {
        &self.qubits
    }

    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn drive(&self) -> f64 {
        self.drive
    }

    pub fn dimension(&self) -> usize {
        (self.fock_cutoff + 1) << self.qubits.len()
    }

    /// Same system with every qubit moved to detuning `delta`.
    pub fn with_detuning(&self, delta: f64) -> Self {
        let mut s = self.clone();
        for q in &mut s.qubits {
            q.detuning = delta;
        }
        s
    }

    pub fn with_drive(&self, drive: f64) -> Self {
        TruncatedSystem {
            drive,
            ..self.clone()
        }
    }

    pub fn with_fock_cutoff(&self, fock_cutoff: usize) -> Result<Self, OracleError> {
        Self::new(self.qubits.clone(), fock_cutoff, self.kappa, self.drive)
    }

    /// The semiclassical prediction for exactly this system.
    pub fn semiclassical_field(&self) -> Result<Complex64, OracleError> {
        let terms: Vec<GroupTerm> = self
            .qubits
            .iter()
            .map(|q| GroupTerm {
                count: 1,
                g_eps: q.coupling,
                gamma_phi: q.gamma_phi,
                gamma_1: q.gamma_1,
                detuning: q.detuning,
            })
            .collect();
        let damping = damping_from_terms(self.kappa, &terms);
        Ok(response_from_damping(damping, self.kappa, self.drive)?.field)
    }

    /// Bare-cavity field +i f/κ used as the phase reference.
    pub fn bare_field(&self) -> Complex64 {
        Complex64::new(0.0, self.drive / self.kappa)
    }
}

type CMat = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Operators on the truncated cavity ⊗ qubits space.
struct Operators {
    a: CMat,
    sigma_minus: Vec<CMat>,
    sigma_z: Vec<CMat>,
}

impl Operators {
    fn new(fock_cutoff: usize, n_qubits: usize) -> Self {
        let nc = fock_cutoff + 1;
        let nq = 1usize << n_qubits;
        let mut a_cav = CMat::zeros(nc, nc);
        for n in 1..nc {
            a_cav[(n - 1, n)] = c((n as f64).sqrt());
        }
        let a = a_cav.kronecker(&CMat::identity(nq, nq));

        // qubit basis: 0 = ground, 1 = excited
        let mut sm = CMat::zeros(2, 2);
        sm[(0, 1)] = c(1.0);
        let sz = CMat::from_diagonal(&DVector::from_vec(vec![c(-1.0), c(1.0)]));
        let embed = |op: &CMat, k: usize| -> CMat {
            let mut full = CMat::identity(nc, nc);
            for j in 0..n_qubits {
                let factor = if j == k { op.clone() } else { CMat::identity(2, 2) };
                full = full.kronecker(&factor);
            }
            full
        };
        Operators {
            a,
            sigma_minus: (0..n_qubits).map(|k| embed(&sm, k)).collect(),
            sigma_z: (0..n_qubits).map(|k| embed(&sz, k)).collect(),
        }
    }
}

/// Dense generator of the master equation acting on vec(ρ).
#[derive(Debug, Clone)]
pub struct Liouvillian {
    matrix: CMat,
    dim: usize,
    rate_scale: f64,
    fock_cutoff: usize,
    n_qubits: usize,
    kappa: f64,
    drive: f64,
}

impl Liouvillian {
    /// Generator in units of [`Self::rate_scale`] (i.e. dρ/dt = rate_scale · L ρ).
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn rate_scale(&self) -> f64 {
        self.rate_scale
    }

    /// Hilbert-space dimension D (the generator is D² × D²).
    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Number of generator pivots that vanish relative to the largest one
    /// under full-pivot LU.
    pub fn kernel_dimension(&self) -> usize {
        rank_deficiency(self.matrix.clone())
    }
}

fn rank_deficiency(m: CMat) -> usize {
    let n = m.nrows();
    let lu = m.full_piv_lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    diag.iter().filter(|&&d| d <= PIVOT_TOL * max).count()
}

/// Assemble the master-equation generator for `sys`.
pub fn build_liouvillian(sys: &TruncatedSystem) -> Result<Liouvillian, OracleError> {
    let dim = sys.dimension();
    if dim > MAX_DIMENSION {
        return Err(OracleError::DimensionTooLarge(dim));
    }
    let scale = sys.kappa;
    let ops = Operators::new(sys.fock_cutoff, sys.qubits.len());
    let a_dag = ops.a.adjoint();

    let mut h = CMat::zeros(dim, dim);
    let mut collapse: Vec<(f64, &CMat)> = vec![(sys.kappa / scale, &ops.a)];
    for (k, q) in sys.qubits.iter().enumerate() {
        let sm = &ops.sigma_minus[k];
        let sp = sm.adjoint();
        h += &ops.sigma_z[k] * c(0.5 * q.detuning / scale);
        h += (&sp * &ops.a + sm * &a_dag) * c(q.coupling / scale);
        collapse.push((q.gamma_1 / scale, sm));
        collapse.push((0.5 * (q.gamma_phi - 0.5 * q.gamma_1) / scale, &ops.sigma_z[k]));
    }
    h -= (&ops.a + &a_dag) * c(0.5 * sys.drive / scale);

    let id = CMat::identity(dim, dim);
    let minus_i = Complex64::new(0.0, -1.0);
    let mut l = (id.kronecker(&h) - h.transpose().kronecker(&id)) * minus_i;
    for (rate, op) in collapse {
        if rate == 0.0 {
            continue;
        }
        let op_dag_op = op.adjoint() * op;
        let jump = op.conjugate().kronecker(op);
        let anti = id.kronecker(&op_dag_op) + op_dag_op.transpose().kronecker(&id);
        l += (jump - anti * c(0.5)) * c(rate);
    }
    Ok(Liouvillian {
        matrix: l,
        dim,
        rate_scale: scale,
        fock_cutoff: sys.fock_cutoff,
        n_qubits: sys.qubits.len(),
        kappa: sys.kappa,
        drive: sys.drive,
    })
}

#[derive(Debug, Clone)]
pub struct SteadyStateResult {
    pub rho: CMat,
    /// ⟨a⟩ in the rotating frame
    pub field: Complex64,
    pub sigma_z: Vec<f64>,
    pub top_fock_population: f64,
    /// Phase relative to the bare cavity, same convention as the
    /// semiclassical model.
    pub phase_shift: f64,
}

/// Solve L ρ = 0 with Tr ρ = 1 by replacing the (0,0) population equation
/// with the trace condition.
pub fn steady_state(liouvillian: &Liouvillian) -> Result<SteadyStateResult, OracleError> {
    let d = liouvillian.dim;
    let n = d * d;
    let mut m = liouvillian.matrix.clone();
    for j in 0..n {
        m[(0, j)] = c(0.0);
    }
    for k in 0..d {
        m[(0, k * d + k)] = c(1.0);
    }
    let mut rhs = DVector::<Complex64>::zeros(n);
    rhs[0] = c(1.0);

    let lu = m.full_piv_lu();
    let u = lu.u();
    let pivots: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
    let max_pivot = pivots.iter().cloned().fold(0.0, f64::max);
    if pivots.iter().any(|&p| p <= PIVOT_TOL * max_pivot) {
        return Err(OracleError::DegenerateKernel);
    }
    let x = lu.solve(&rhs).ok_or(OracleError::DegenerateKernel)?;
    let raw = CMat::from_column_slice(d, d, x.as_slice());

    let asym = (&raw - raw.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asym > 1e-8 {
        return Err(OracleError::InvalidState(format!(
            "solution is far from Hermitian ({asym:e})"
        )));
    }
    // remove rounding-level anti-Hermitian residue
    let rho = (&raw + raw.adjoint()) * c(0.5);
    validate_density_matrix(&rho)?;

    let ops = Operators::new(liouvillian.fock_cutoff, liouvillian.n_qubits);
    let expect = |op: &CMat| (op * &rho).trace();
    let field = expect(&ops.a);
    let sigma_z = ops.sigma_z.iter().map(|s| expect(s).re).collect();
    let nq = 1usize << liouvillian.n_qubits;
    let top = liouvillian.fock_cutoff * nq;
    let top_fock_population: f64 = (top..top + nq).map(|i| rho[(i, i)].re).sum();
    if top_fock_population > TOP_FOCK_LIMIT {
        return Err(OracleError::Truncation(top_fock_population));
    }
    let bare = Complex64::new(0.0, liouvillian.drive / liouvillian.kappa);
    Ok(SteadyStateResult {
        rho,
        field,
        sigma_z,
        top_fock_population,
        phase_shift: (bare * field.conj()).arg(),
    })
}

fn validate_density_matrix(rho: &CMat) -> Result<(), OracleError> {
    let tr = rho.trace();
    if (tr - c(1.0)).norm() > TRACE_TOL {
        return Err(OracleError::InvalidState(format!("trace {tr}")));
    }
    let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > HERMITIAN_TOL {
        return Err(OracleError::InvalidState(format!("anti-Hermitian part {herm:e}")));
    }
    let min_eig = rho
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -POSITIVITY_TOL {
        return Err(OracleError::InvalidState(format!("negative eigenvalue {min_eig:e}")));
    }
    Ok(())
}

/// Build and solve in one go.
pub fn solve(sys: &TruncatedSystem) -> Result<SteadyStateResult, OracleError> {
    steady_state(&build_liouvillian(sys)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonPoint {
    /// Flux (Φ0) or detuning (rad/s), whichever the comparison was run over.
    pub abscissa: f64,
    pub oracle_phase: f64,
    pub semiclassical_phase: f64,
    pub oracle_amplitude: f64,
    pub semiclassical_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyReport {
    pub points: Vec<ComparisonPoint>,
    pub max_phase_difference: f64,
    pub max_relative_amplitude_difference: f64,
    /// Largest |φ| seen by the oracle.
    pub peak_phase: f64,
}

impl DiscrepancyReport {
    fn from_points(points: Vec<ComparisonPoint>) -> Self {
        let max_phase_difference = points
            .iter()
            .map(|p| (p.oracle_phase - p.semiclassical_phase).abs())
            .fold(0.0, f64::max);
        let max_relative_amplitude_difference = points
            .iter()
            .map(|p| (p.oracle_amplitude - p.semiclassical_amplitude).abs() / p.semiclassical_amplitude)
            .fold(0.0, f64::max);
        let peak_phase = points.iter().map(|p| p.oracle_phase.abs()).fold(0.0, f64::max);
        DiscrepancyReport {
            points,
            max_phase_difference,
            max_relative_amplitude_difference,
            peak_phase,
        }
    }
}

fn compare_one(sys: &TruncatedSystem, abscissa: f64) -> Result<ComparisonPoint, OracleError> {
    let oracle = solve(sys)?;
    let semi = sys.semiclassical_field()?;
    let bare = sys.bare_field();
    Ok(ComparisonPoint {
        abscissa,
        oracle_phase: oracle.phase_shift,
        semiclassical_phase: (bare * semi.conj()).arg(),
        oracle_amplitude: oracle.field.norm(),
        semiclassical_amplitude: semi.norm(),
    })
}

fn warn_outside_regime(sys: &TruncatedSystem) {
    for q in &sys.qubits {
        if q.gamma_phi < 10.0 * q.coupling.abs() {
            log::warn!(
                "Γφ/g = {:.1} is below 10; the semiclassical model is not expected to hold",
                q.gamma_phi / q.coupling.abs()
            );
        }
    }
}

/// Oracle vs semiclassical over a flux grid (Φ0 units).
pub fn compare_semiclassical(
    ens: &Ensemble,
    mode: &ResonatorMode,
    drive: &DriveSpec,
    fock_cutoff: usize,
    fluxes: &[f64],
    exec: Execution,
) -> Result<DiscrepancyReport, OracleError> {
    let systems = fluxes
        .iter()
        .map(|&x| {
            let sys = TruncatedSystem::from_ensemble(ens, mode, FluxBias::new(x)?, drive, fock_cutoff)?;
            warn_outside_regime(&sys);
            Ok((x, sys))
        })
        .collect::<Result<Vec<_>, OracleError>>()?;
    let points = exec.map(&systems, |(x, sys)| compare_one(sys, *x));
    Ok(DiscrepancyReport::from_points(points.into_iter().collect::<Result<_, _>>()?))
}

/// Oracle vs semiclassical with every qubit swept through the given
/// detunings (rad/s), couplings held fixed.
pub fn compare_at_detunings(
    template: &TruncatedSystem,
    detunings: &[f64],
    exec: Execution,
) -> Result<DiscrepancyReport, OracleError> {
    warn_outside_regime(template);
    let points = exec.map(detunings, |&d| compare_one(&template.with_detuning(d), d));
    Ok(DiscrepancyReport::from_points(points.into_iter().collect::<Result<_, _>>()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semiclassical::phase_shift_resonant;
    use crate::units::mhz;

    fn supp_d_qubit(detuning: f64) -> OracleQubit {
        OracleQubit {
            detuning,
            coupling: mhz(4.9),
            gamma_phi: mhz(141.0),
            gamma_1: mhz(141.0),
        }
    }

    /// Left action of the generator on the functional ρ ↦ Tr(Oρ).
    fn adjoint_action(l: &Liouvillian, op: &CMat) -> DVector<Complex64> {
        let d = l.dimension();
        // Tr(Oρ) = Σ_ij O_ji ρ_ij = vec(Oᵀ) · vec(ρ)
        let w = DVector::from_iterator(d * d, op.transpose().iter().cloned());
        l.matrix().transpose() * w
    }

    fn functional(op: &CMat) -> DVector<Complex64> {
        DVector::from_iterator(op.len(), op.transpose().iter().cloned())
    }

    #[test]
    fn cavity_only_spectrum() {
        let sys = TruncatedSystem::new(vec![], 5, mhz(0.5), 0.0).unwrap();
        let l = build_liouvillian(&sys).unwrap();
        let ops = Operators::new(5, 0);
        // trace functional is a left null vector
        let trace = adjoint_action(&l, &CMat::identity(6, 6));
        assert!(trace.norm() < 1e-13);
        // ⟨a⟩ is a left eigenvector with eigenvalue −κ/2
        let lhs = adjoint_action(&l, &ops.a);
        let rhs = functional(&ops.a) * c(-0.5);
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn coherence_decays_at_gamma_phi() {
        let q = OracleQubit {
            detuning: mhz(30.0),
            coupling: 0.0,
            gamma_phi: mhz(50.0),
            gamma_1: mhz(20.0),
        };
        let sys = TruncatedSystem::new(vec![q], 1, mhz(1.0), 0.0).unwrap();
        let l = build_liouvillian(&sys).unwrap();
        let ops = Operators::new(1, 1);
        let lhs = adjoint_action(&l, &ops.sigma_minus[0]) * c(l.rate_scale());
        let expected = functional(&ops.sigma_minus[0]) * -Complex64::new(mhz(50.0), mhz(30.0));
        assert!((lhs - &expected).norm() < 1e-9 * expected.norm());
    }

    #[test]
    fn supp_d_generator_has_one_dimensional_kernel() {
        let sys = TruncatedSystem::new(vec![supp_d_qubit(mhz(100.0))], 6, mhz(0.46), 0.05 * mhz(0.46))
            .unwrap();
        let l = build_liouvillian(&sys).unwrap();
        // oracle: singular values
        let sv = l.matrix().clone().singular_values();
        let max = sv.max();
        let zeros = sv.iter().filter(|&&s| s < 1e-10 * max).count();
        assert_eq!(zeros, 1);
        assert_eq!(l.kernel_dimension(), 1);
    }

    #[test]
    fn degenerate_kernel_detected() {
        // no dissipation at all on an undriven qubit-only manifold is not allowed
        // by construction, so a zero-coupling qubit with zero decay and the
        // cavity gives two conserved populations.
        let q = OracleQubit {
            detuning: 0.0,
            coupling: 0.0,
            gamma_phi: mhz(10.0),
            gamma_1: 0.0,
        };
        let sys = TruncatedSystem::new(vec![q], 2, mhz(1.0), 0.0).unwrap();
        let l = build_liouvillian(&sys).unwrap();
        assert!(l.kernel_dimension() > 1);
        assert!(matches!(steady_state(&l), Err(OracleError::DegenerateKernel)));
    }

    #[test]
    fn cavity_only_coherent_state() {
        let kappa = mhz(0.5);
        let sys = TruncatedSystem::new(vec![], 6, kappa, 0.1 * kappa).unwrap();
        let r = solve(&sys).unwrap();
        assert!((r.field - Complex64::new(0.0, 0.1)).norm() < 1e-10);
        assert!((r.field.norm_sqr() - 0.01).abs() < 1e-10);
        assert!(r.phase_shift.abs() < 1e-10);
    }

    #[test]
    fn state_invariants_hold() {
        let sys = TruncatedSystem::new(vec![supp_d_qubit(mhz(60.0))], 6, mhz(0.46), 0.05 * mhz(0.46))
            .unwrap();
        let r = solve(&sys).unwrap();
        assert!((r.rho.trace() - c(1.0)).norm() < 1e-10);
        assert!(r.top_fock_population < 1e-6);
        assert!(r.sigma_z[0] < -0.999);
    }

    #[test]
    fn supp_d_phase_matches_closed_form() {
        let kappa = mhz(0.46);
        let template =
            TruncatedSystem::new(vec![supp_d_qubit(0.0)], 6, kappa, 0.05 * kappa).unwrap();
        let detunings: Vec<f64> = (0..41).map(|k| mhz(-700.0 + 35.0 * k as f64)).collect();
        let report = compare_at_detunings(&template, &detunings, Execution::default()).unwrap();
        for p in &report.points {
            let eq2 = phase_shift_resonant(1, mhz(4.9), mhz(141.0), kappa, p.abscissa);
            assert!((p.oracle_phase - eq2).abs() < 0.005, "{p:?}");
        }
        assert!(report.max_phase_difference < 0.01 * report.peak_phase);
    }

    #[test]
    fn two_identical_qubits_at_resonance_have_zero_phase() {
        let kappa = mhz(0.46);
        let sys = TruncatedSystem::new(vec![supp_d_qubit(0.0); 2], 6, kappa, 0.05 * kappa).unwrap();
        assert!(solve(&sys).unwrap().phase_shift.abs() < 1e-6);
    }

    #[test]
    fn collective_enhancement() {
        let kappa = mhz(0.46);
        let d = 3.0 * mhz(141.0);
        let pair = TruncatedSystem::new(vec![supp_d_qubit(d); 2], 6, kappa, 0.05 * kappa).unwrap();
        let mut single_q = supp_d_qubit(d);
        single_q.coupling *= 2f64.sqrt();
        let single = TruncatedSystem::new(vec![single_q], 6, kappa, 0.05 * kappa).unwrap();
        let p2 = solve(&pair).unwrap().phase_shift;
        let p1 = solve(&single).unwrap().phase_shift;
        assert!(((p2 - p1) / p1).abs() < 0.01, "{p2} {p1}");
    }

    #[test]
    fn fock_cutoff_converged() {
        let kappa = mhz(0.46);
        let sys = TruncatedSystem::new(vec![supp_d_qubit(mhz(80.0))], 6, kappa, 0.1 * kappa).unwrap();
        let a6 = solve(&sys).unwrap().field;
        let a8 = solve(&sys.with_fock_cutoff(8).unwrap()).unwrap().field;
        assert!((a6 - a8).norm() < 1e-8 * a8.norm());
    }

    #[test]
    fn decoupled_qubit_is_exact() {
        let kappa = mhz(0.46);
        let mut q = supp_d_qubit(0.0);
        q.coupling = 0.0;
        let template = TruncatedSystem::new(vec![q], 8, kappa, 0.1 * kappa).unwrap();
        let report = compare_at_detunings(&template, &[-1e8, 0.0, 3e8], Execution::Sequential).unwrap();
        assert!(report.max_phase_difference < 1e-12);
        assert!(report.max_relative_amplitude_difference < 1e-10, "{}", report.max_relative_amplitude_difference);
    }

    #[test]
    fn strong_drive_increases_discrepancy() {
        let kappa = mhz(1.0);
        let q = OracleQubit {
            detuning: 0.0,
            coupling: mhz(1.0),
            gamma_phi: mhz(50.0),
            gamma_1: mhz(50.0),
        };
        let detunings = [mhz(-50.0), mhz(25.0), mhz(60.0)];
        let weak = TruncatedSystem::new(vec![q], 14, kappa, 0.05 * kappa).unwrap();
        let strong = weak.with_drive(1.0 * kappa);
        let r_weak = compare_at_detunings(&weak, &detunings, Execution::default()).unwrap();
        let r_strong = compare_at_detunings(&strong, &detunings, Execution::default()).unwrap();
        assert!(
            r_strong.max_phase_difference > r_weak.max_phase_difference,
            "{} vs {}",
            r_strong.max_phase_difference,
            r_weak.max_phase_difference
        );
    }

    #[test]
    fn size_limits() {
        assert!(matches!(
            TruncatedSystem::new(vec![supp_d_qubit(0.0); 4], 2, 1.0, 0.0),
            Err(OracleError::TooManyQubits(4))
        ));
        assert!(matches!(
            TruncatedSystem::new(vec![supp_d_qubit(0.0); 3], 8, 1.0, 0.0),
            Err(OracleError::DimensionTooLarge(72))
        ));
    }

    #[test]
    fn truncation_is_flagged() {
        let kappa = mhz(1.0);
        let sys = TruncatedSystem::new(vec![], 3, kappa, 2.0 * kappa).unwrap();
        assert!(matches!(solve(&sys), Err(OracleError::Truncation(_))));
    }
}
