//! Physical constants and the closed-form single-qubit / resonator relations.
//!
//! Every frequency and rate in this crate is angular (rad/s). Conversion to
//! and from cyclic frequencies happens only at the I/O boundary, see
//! [`crate::units`].

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.62607e-34;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = PLANCK / TAU;
/// Magnetic flux quantum h/2e, Wb.
pub const FLUX_QUANTUM: f64 = 2.067834e-15;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.38065e-23;

/// Constants bundled as a value, for callers that want to pass them around.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub h: f64,
    pub flux_quantum: f64,
    pub boltzmann: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            hbar: HBAR,
            h: PLANCK,
            flux_quantum: FLUX_QUANTUM,
            boltzmann: BOLTZMANN,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("flux detuning {0} is outside the single-period window |x| < 0.5")]
    FluxOutOfRange(f64),
    #[error("mode frequency {mode_omega:.6e} rad/s lies below the qubit gap {delta:.6e} rad/s; no resonance")]
    NoCrossing { mode_omega: f64, delta: f64 },
}

fn require(cond: bool, name: &'static str, reason: impl Into<String>) -> Result<(), ModelError> {
    if cond {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            name,
            reason: reason.into(),
        })
    }
}

/// One flux qubit treated as a two-level artificial atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    /// Gap at the degeneracy point, rad/s.
    pub delta: f64,
    /// Persistent current, A.
    pub persistent_current: f64,
    /// Total dephasing rate of the transverse coherence, rad/s.
    pub gamma_phi: f64,
    /// Energy relaxation rate, rad/s.
    pub gamma_1: f64,
    pub label: String,
}

impl QubitParams {
    pub fn new(
        label: impl Into<String>,
        delta: f64,
        persistent_current: f64,
        gamma_phi: f64,
        gamma_1: f64,
    ) -> Result<Self, ModelError> {
        let q = QubitParams {
            delta,
            persistent_current,
            gamma_phi,
            gamma_1,
            label: label.into(),
        };
        q.validate()?;
        Ok(q)
    }

    /// Qubit with the relaxation rate defaulted to the dephasing rate.
    pub fn with_default_relaxation(
        label: impl Into<String>,
        delta: f64,
        persistent_current: f64,
        gamma_phi: f64,
    ) -> Result<Self, ModelError> {
        Self::new(label, delta, persistent_current, gamma_phi, gamma_phi)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        require(self.delta.is_finite() && self.delta > 0.0, "delta", "must be positive")?;
        require(
            self.persistent_current.is_finite() && self.persistent_current > 0.0,
            "persistent_current",
            "must be positive",
        )?;
        require(
            self.gamma_1.is_finite() && self.gamma_1 >= 0.0,
            "gamma_1",
            "must be non-negative",
        )?;
        require(
            self.gamma_phi.is_finite() && self.gamma_phi >= 0.5 * self.gamma_1,
            "gamma_phi",
            "must be at least gamma_1/2 (pure dephasing cannot be negative)",
        )?;
        Ok(())
    }

    /// Pure dephasing contribution Γφ* = Γφ − Γ1/2.
    pub fn pure_dephasing(&self) -> f64 {
        self.gamma_phi - 0.5 * self.gamma_1
    }
}

/// A single standing-wave mode of the resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorMode {
    pub index: u32,
    /// rad/s
    pub omega: f64,
    /// Photon loss rate (full linewidth), rad/s.
    pub kappa: f64,
}

impl ResonatorMode {
    pub fn new(index: u32, omega: f64, kappa: f64) -> Result<Self, ModelError> {
        let m = ResonatorMode { index, omega, kappa };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        require(self.index >= 1, "index", "mode index starts at 1")?;
        require(self.omega.is_finite() && self.omega > 0.0, "omega", "must be positive")?;
        require(self.kappa.is_finite() && self.kappa > 0.0, "kappa", "must be positive")?;
        require(
            self.kappa < 1e-3 * self.omega,
            "kappa",
            "resonator must be high-Q (kappa/omega < 1e-3)",
        )?;
        Ok(())
    }
}

/// Inductive coupling geometry between one qubit loop and the resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingGeometry {
    /// H
    pub mutual_inductance: f64,
    /// H
    pub resonator_inductance: f64,
}

impl CouplingGeometry {
    pub fn new(mutual_inductance: f64, resonator_inductance: f64) -> Result<Self, ModelError> {
        let g = CouplingGeometry {
            mutual_inductance,
            resonator_inductance,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        require(
            self.mutual_inductance.is_finite() && self.mutual_inductance > 0.0,
            "mutual_inductance",
            "must be positive",
        )?;
        require(
            self.resonator_inductance.is_finite() && self.resonator_inductance > 0.0,
            "resonator_inductance",
            "must be positive",
        )?;
        require(
            self.mutual_inductance < self.resonator_inductance,
            "mutual_inductance",
            "must be smaller than the resonator inductance",
        )?;
        Ok(())
    }
}

/// Flux detuning from the degeneracy point, (Φ − Φ0/2)/Φ0.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct FluxBias(f64);

impl FluxBias {
    pub const DEGENERACY: FluxBias = FluxBias(0.0);

    pub fn new(detuning: f64) -> Result<Self, ModelError> {
        if detuning.is_finite() && detuning.abs() < 0.5 {
            Ok(FluxBias(detuning))
        } else {
            Err(ModelError::FluxOutOfRange(detuning))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::ops::Neg for FluxBias {
    type Output = FluxBias;
    fn neg(self) -> FluxBias {
        FluxBias(-self.0)
    }
}

/// Energy bias ε = 2 I (Φ − Φ0/2)/ħ, rad/s.
pub fn energy_bias(q: &QubitParams, flux: FluxBias) -> f64 {
    2.0 * q.persistent_current * flux.0 * FLUX_QUANTUM / HBAR
}

/// Qubit transition frequency √(Δ² + ε²), rad/s.
pub fn transition_frequency(q: &QubitParams, flux: FluxBias) -> f64 {
    q.delta.hypot(energy_bias(q, flux))
}

/// Non-negative flux at which the qubit is resonant with `mode`.
///
/// The mirror solution is the negation of the returned value.
pub fn resonance_flux(q: &QubitParams, mode: &ResonatorMode) -> Result<FluxBias, ModelError> {
    if mode.omega < q.delta {
        return Err(ModelError::NoCrossing {
            mode_omega: mode.omega,
            delta: q.delta,
        });
    }
    // (ω − Δ)(ω + Δ) keeps precision when ω is close to Δ.
    let eps = ((mode.omega - q.delta) * (mode.omega + q.delta)).sqrt();
    FluxBias::new(eps * HBAR / (2.0 * q.persistent_current * FLUX_QUANTUM))
}

/// Bare inductive coupling g = M I √(ω / ħ L_r), rad/s.
pub fn bare_coupling(geom: &CouplingGeometry, q: &QubitParams, mode: &ResonatorMode) -> f64 {
    geom.mutual_inductance
        * q.persistent_current
        * (mode.omega / (HBAR * geom.resonator_inductance)).sqrt()
}

/// Transverse coupling (Δ/E)·g in the qubit energy eigenbasis.
pub fn transversal_coupling(q: &QubitParams, flux: FluxBias, g_bare: f64) -> f64 {
    q.delta / transition_frequency(q, flux) * g_bare
}

/// Bose-Einstein occupancy of `mode` at `temperature` (K).
pub fn thermal_photon_number(mode: &ResonatorMode, temperature: f64) -> Result<f64, ModelError> {
    require(
        temperature.is_finite() && temperature > 0.0,
        "temperature",
        "must be positive",
    )?;
    let x = HBAR * mode.omega / (BOLTZMANN * temperature);
    Ok(1.0 / x.exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{ghz, mhz};
    use proptest::prelude::*;

    fn qubit_s() -> QubitParams {
        QubitParams::with_default_relaxation("S", ghz(5.6), 74e-9, mhz(53.0)).unwrap()
    }

    fn mode(omega: f64) -> ResonatorMode {
        ResonatorMode::new(3, omega, mhz(0.715)).unwrap()
    }

    /// Independent root finder for E(x) = ω on x ≥ 0.
    fn bisect_resonance(q: &QubitParams, omega: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 0.499_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if transition_frequency(q, FluxBias::new(mid).unwrap()) < omega {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn constants_are_consistent() {
        assert!((PLANCK - TAU * HBAR).abs() / PLANCK < 1e-15);
        let e = 1.602177e-19;
        assert!((FLUX_QUANTUM - PLANCK / (2.0 * e)).abs() / FLUX_QUANTUM < 5e-6);
        assert_eq!(PhysicalConstants::default().flux_quantum, FLUX_QUANTUM);
    }

    #[test]
    fn energy_bias_examples() {
        let q = qubit_s();
        assert_eq!(energy_bias(&q, FluxBias::DEGENERACY), 0.0);
        let x = FluxBias::new(0.01168).unwrap();
        assert_eq!(energy_bias(&q, x), -energy_bias(&q, -x));
        // direct evaluation 2 I Φ0 x / h in Hz
        let direct = 2.0 * 74e-9 * FLUX_QUANTUM * 0.01168 / PLANCK;
        let eps_hz = energy_bias(&q, x) / TAU;
        assert!((eps_hz - direct).abs() / direct < 1e-12);
        assert!((eps_hz / 1e9 - 5.40).abs() < 0.01, "{eps_hz}");
    }

    #[test]
    fn transition_frequency_examples() {
        let q = qubit_s();
        assert_eq!(transition_frequency(&q, FluxBias::DEGENERACY), q.delta);
        // Δ = 5.6 GHz, ε = 5.403 GHz → E = 7.782 GHz = 3 × 2.594 GHz
        let e = ghz(5.6).hypot(ghz(5.403)) / TAU / 1e9;
        assert!((e - 7.782).abs() < 1e-3, "{e}");
        let far = FluxBias::new(0.49).unwrap();
        let ratio = transition_frequency(&q, far) / energy_bias(&q, far);
        assert!(ratio > 1.0 && ratio - 1.0 < 1e-3);
    }

    #[test]
    fn resonance_flux_examples() {
        let q = qubit_s();
        assert_eq!(resonance_flux(&q, &mode(ghz(5.6))).unwrap().value(), 0.0);

        let x = resonance_flux(&q, &mode(ghz(7.782))).unwrap().value();
        let oracle = bisect_resonance(&q, ghz(7.782));
        assert!((x - oracle).abs() < 1e-12, "{x} vs {oracle}");
        assert!((x - 0.01168).abs() / 0.01168 < 5e-3, "{x}");

        let low = ResonatorMode::new(1, ghz(2.594), mhz(0.0555)).unwrap();
        assert!(matches!(
            resonance_flux(&q, &low),
            Err(ModelError::NoCrossing { .. })
        ));
    }

    #[test]
    fn bare_coupling_golden_values() {
        let geom = CouplingGeometry::new(0.5e-12, 11e-9).unwrap();
        let g = bare_coupling(&geom, &qubit_s(), &mode(3.0 * ghz(2.594)));
        assert!((g / TAU / 1e6 - 1.2).abs() <= 0.1, "{}", g / TAU);

        let geom_d = CouplingGeometry::new(0.91e-12, 11e-9).unwrap();
        let qd = QubitParams::with_default_relaxation("D", ghz(3.0), 158e-9, mhz(141.0)).unwrap();
        let md = ResonatorMode::new(3, ghz(7.77), mhz(0.46)).unwrap();
        let gd = bare_coupling(&geom_d, &qd, &md);
        assert!((gd / TAU / 1e6 - 4.7).abs() <= 0.3, "{}", gd / TAU);

        let m4 = ResonatorMode::new(3, 4.0 * ghz(2.594), mhz(0.715)).unwrap();
        let g4 = bare_coupling(&geom, &qubit_s(), &m4);
        let g1 = bare_coupling(&geom, &qubit_s(), &mode(ghz(2.594)));
        assert!((g4 / g1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn transversal_coupling_examples() {
        let q = qubit_s();
        assert_eq!(transversal_coupling(&q, FluxBias::DEGENERACY, mhz(1.2)), mhz(1.2));
        // at the third-harmonic crossing E = 7.782 GHz
        let x = resonance_flux(&q, &mode(ghz(7.782))).unwrap();
        let ge = transversal_coupling(&q, x, mhz(1.2)) / TAU / 1e6;
        assert!((ge - 5.6 / 7.782 * 1.2).abs() < 1e-9);
        assert!((ge - 0.863).abs() < 1e-3);
        let far = transversal_coupling(&q, FluxBias::new(0.49).unwrap(), mhz(1.2));
        assert!(far < 0.03 * mhz(1.2));
    }

    #[test]
    fn thermal_occupancy() {
        let m1 = ResonatorMode::new(1, ghz(2.594), mhz(0.0555)).unwrap();
        let n = thermal_photon_number(&m1, 0.020).unwrap();
        assert!((n - 0.002).abs() / 0.002 < 0.2, "{n}");
        assert!(thermal_photon_number(&m1, 1e-4).unwrap() < 1e-100);
        let t = HBAR * m1.omega / (BOLTZMANN * 2f64.ln());
        assert!((thermal_photon_number(&m1, t).unwrap() - 1.0).abs() < 1e-12);
        assert!(thermal_photon_number(&m1, 0.0).is_err());
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(FluxBias::new(0.5).is_err());
        assert!(FluxBias::new(f64::NAN).is_err());
        assert!(QubitParams::new("x", ghz(5.0), 70e-9, mhz(10.0), mhz(30.0)).is_err());
        assert!(QubitParams::new("x", -1.0, 70e-9, mhz(10.0), mhz(10.0)).is_err());
        assert!(ResonatorMode::new(1, ghz(1.0), ghz(0.01)).is_err());
        assert!(CouplingGeometry::new(20e-9, 11e-9).is_err());
    }

    proptest! {
        #[test]
        fn energy_bias_is_linear(x in -0.4f64..0.4, s in 0.1f64..1.2, i in 10e-9f64..500e-9) {
            let q = QubitParams::with_default_relaxation("p", ghz(5.0), i, mhz(50.0)).unwrap();
            let qs = QubitParams { persistent_current: i * s, ..q.clone() };
            let base = energy_bias(&q, FluxBias::new(x).unwrap());
            let scaled_flux = energy_bias(&q, FluxBias::new(x * s).unwrap());
            let scaled_current = energy_bias(&qs, FluxBias::new(x).unwrap());
            let tol = 1e-12 * base.abs().max(1.0);
            prop_assert!((scaled_flux - s * base).abs() <= tol);
            prop_assert!((scaled_current - s * base).abs() <= tol);
        }

        #[test]
        fn resonance_round_trip(d in 1.0f64..10.0, extra in 0.0f64..8.0, i in 20e-9f64..300e-9) {
            let q = QubitParams::with_default_relaxation("p", ghz(d), i, mhz(50.0)).unwrap();
            let m = ResonatorMode::new(3, ghz(d + extra), mhz(0.5)).unwrap();
            if let Ok(x) = resonance_flux(&q, &m) {
                prop_assert!(x.value() >= 0.0);
                let e = transition_frequency(&q, x);
                prop_assert!((e - m.omega).abs() / m.omega < 1e-9);
                let e_neg = transition_frequency(&q, -x);
                prop_assert!((e_neg - m.omega).abs() / m.omega < 1e-9);
            }
        }

        #[test]
        fn transversal_not_above_bare(x in -0.45f64..0.45) {
            let q = qubit_s();
            let f = FluxBias::new(x).unwrap();
            let ge = transversal_coupling(&q, f, mhz(1.2));
            prop_assert!(ge <= mhz(1.2));
            if x.abs() > 1e-6 { prop_assert!(ge < mhz(1.2)); }
        }
    }
}
