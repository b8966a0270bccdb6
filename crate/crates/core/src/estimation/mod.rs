//! Inverse problems: recover resonator and qubit-ensemble parameters from
//! lineshapes and phase-vs-flux traces.

mod crossings;
mod dispersive;
mod lorentzian;
mod resonant;
mod solver;
mod spectrum;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelError;
use crate::semiclassical::SemiclassicalError;

pub use crossings::{detect_crossings, CrossingPoint, Side};
pub use dispersive::{fit_dispersive, DispersiveFree};
pub use lorentzian::{fit_lorentzian, lorentzian};
pub use resonant::{
    fit_resonant_coupling, fit_resonant_gamma, fit_resonant_mode, fit_two_modes, FixedGroup,
    ModeFitOptions,
};
pub use solver::{solve_least_squares, LeastSquaresProblem, SolverSettings};
pub use spectrum::fit_spectrum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("invalid fit problem: {0}")]
    InvalidProblem(String),
    #[error("no convergence after {iterations} iterations")]
    MaxIterations {
        iterations: usize,
        best: Option<Box<FitResult>>,
    },
    #[error("Jacobian is rank deficient at the solution")]
    SingularJacobian,
    #[error("residual function returned a non-finite value")]
    NonFiniteResidual,
    #[error("data are monotone or peak at the edge; no resonance to fit")]
    NoPeak,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no dispersive crossing feature found in the trace")]
    FeatureNotFound,
    #[error("all crossing points share one mode frequency; gap and current are not separable")]
    UnderDetermined,
    #[error("trace contains a resonant crossing; the dispersive formula does not apply")]
    ResonantContamination,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Semiclassical(#[from] SemiclassicalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FitWarning {
    /// Two integer counts fit within 1% in residual norm; the smaller one was kept.
    AmbiguousCount {
        chosen: Vec<usize>,
        alternative: Vec<usize>,
        relative_gap: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    /// 1σ from the linearised covariance; 0 for integer parameters.
    pub uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<FitParameter>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest cosine between residual and a Jacobian column at the end point.
    pub gradient_cosine: f64,
    pub warnings: Vec<FitWarning>,
}

impl FitResult {
    pub fn parameter(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Value of `name`; panics if the fit has no such parameter.
    pub fn value(&self, name: &str) -> f64 {
        self.parameter(name)
            .unwrap_or_else(|| panic!("fit has no parameter `{name}`"))
            .value
    }

    pub fn uncertainty(&self, name: &str) -> f64 {
        self.parameter(name)
            .unwrap_or_else(|| panic!("fit has no parameter `{name}`"))
            .uncertainty
    }

    /// Rescale one parameter (value and uncertainty) by `factor`.
    pub(crate) fn rescale(&mut self, idx: usize, name: &str, factor: f64) {
        let p = &mut self.parameters[idx];
        p.name = name.to_string();
        p.value *= factor;
        p.uncertainty *= factor.abs();
    }
}
