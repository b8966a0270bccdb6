//! Bounded Levenberg-Marquardt least squares.
//!
//! Damped Gauss-Newton steps with Marquardt diagonal scaling and the
//! gain-ratio damping update of Nielsen. Bounds are enforced by projecting
//! each trial point onto the box. The Jacobian is either supplied or taken
//! by central differences (one-sided at an active bound).

use nalgebra::{DMatrix, DVector};

use super::{FitError, FitParameter, FitResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Initial damping relative to the largest diagonal entry of JᵀJ.
    pub initial_damping: f64,
    /// Largest cosine between the residual and any Jacobian column at a
    /// converged point.
    pub gradient_tolerance: f64,
    /// Relative step size below which iteration stops.
    pub step_tolerance: f64,
    /// Residual norm treated as an exact fit.
    pub residual_tolerance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            max_iterations: 200,
            initial_damping: 1e-9,
            gradient_tolerance: 1e-8,
            step_tolerance: 1e-12,
            residual_tolerance: 1e-13,
        }
    }
}

type Residual<'a> = dyn Fn(&[f64]) -> Vec<f64> + Sync + 'a;
type Jacobian<'a> = dyn Fn(&[f64]) -> DMatrix<f64> + Sync + 'a;

/// A residual function with its starting point, box bounds and settings.
pub struct LeastSquaresProblem<'a> {
    residual: Box<Residual<'a>>,
    jacobian: Option<Box<Jacobian<'a>>>,
    initial: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    names: Vec<String>,
    settings: SolverSettings,
}

impl<'a> LeastSquaresProblem<'a> {
    pub fn new(initial: Vec<f64>, residual: impl Fn(&[f64]) -> Vec<f64> + Sync + 'a) -> Self {
        let n = initial.len();
        LeastSquaresProblem {
            residual: Box::new(residual),
            jacobian: None,
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            names: (0..n).map(|i| format!("p{i}")).collect(),
            initial,
            settings: SolverSettings::default(),
        }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(&[f64]) -> DMatrix<f64> + Sync + 'a) -> Self {
        self.jacobian = Some(Box::new(jac));
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn with_names<S: Into<String>>(mut self, names: impl IntoIterator<Item = S>) -> Self {
        self.names = names.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_settings(mut self, settings: SolverSettings) -> Self {
        self.settings = settings;
        self
    }

    fn validate(&self) -> Result<(), FitError> {
        let n = self.initial.len();
        if n == 0 {
            return Err(FitError::InvalidProblem("no parameters".into()));
        }
        if self.lower.len() != n || self.upper.len() != n || self.names.len() != n {
            return Err(FitError::InvalidProblem(
                "bounds and names must match the parameter count".into(),
            ));
        }
        for i in 0..n {
            let (lo, hi, x) = (self.lower[i], self.upper[i], self.initial[i]);
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(FitError::InvalidProblem(format!("inconsistent bounds on `{}`", self.names[i])));
            }
            if !(x.is_finite() && lo <= x && x <= hi) {
                return Err(FitError::InvalidProblem(format!(
                    "initial value of `{}` is outside its bounds",
                    self.names[i]
                )));
            }
        }
        Ok(())
    }

    fn residual(&self, x: &[f64]) -> Result<DVector<f64>, FitError> {
        let r = (self.residual)(x);
        if r.iter().any(|v| !v.is_finite()) {
            return Err(FitError::NonFiniteResidual);
        }
        Ok(DVector::from_vec(r))
    }

    fn jacobian(&self, x: &[f64], r0: &DVector<f64>) -> Result<DMatrix<f64>, FitError> {
        if let Some(jac) = &self.jacobian {
            return Ok(jac(x));
        }
        let m = r0.len();
        let n = x.len();
        let mut j = DMatrix::zeros(m, n);
        let mut xp = x.to_vec();
        for k in 0..n {
            let h = 6e-6 * x[k].abs().max(1e-3);
            let up = (x[k] + h).min(self.upper[k]);
            let down = (x[k] - h).max(self.lower[k]);
            xp[k] = up;
            let rp = self.residual(&xp)?;
            xp[k] = down;
            let rm = self.residual(&xp)?;
            xp[k] = x[k];
            let span = up - down;
            if span <= 0.0 {
                continue;
            }
            j.set_column(k, &((rp - rm) / span));
        }
        Ok(j)
    }
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Largest |cos| between r and a Jacobian column.
fn gradient_cosine(j: &DMatrix<f64>, r: &DVector<f64>) -> f64 {
    let rn = r.norm();
    if rn == 0.0 {
        return 0.0;
    }
    let g = j.transpose() * r;
    (0..j.ncols())
        .map(|k| {
            let cn = j.column(k).norm();
            if cn == 0.0 {
                0.0
            } else {
                g[k].abs() / (cn * rn)
            }
        })
        .fold(0.0, f64::max)
}

fn build_result(
    problem: &LeastSquaresProblem,
    x: &[f64],
    r: &DVector<f64>,
    j: &DMatrix<f64>,
    iterations: usize,
    converged: bool,
) -> Result<FitResult, FitError> {
    let m = r.len();
    let n = x.len();
    let jtj = j.transpose() * j;
    let cov = jtj.try_inverse().ok_or(FitError::SingularJacobian)?;
    let dof = m.saturating_sub(n);
    let variance = if dof > 0 { r.norm_squared() / dof as f64 } else { 0.0 };
    let parameters = (0..n)
        .map(|k| FitParameter {
            name: problem.names[k].clone(),
            value: x[k],
            uncertainty: (cov[(k, k)].max(0.0) * variance).sqrt(),
        })
        .collect();
    Ok(FitResult {
        parameters,
        residual_norm: r.norm(),
        iterations,
        converged,
        gradient_cosine: gradient_cosine(j, r),
        warnings: Vec::new(),
    })
}

/// Minimise ½‖r(x)‖² from the problem's initial guess.
pub fn solve_least_squares(problem: &LeastSquaresProblem) -> Result<FitResult, FitError> {
    problem.validate()?;
    let s = problem.settings;
    let n = problem.initial.len();
    let mut x = problem.initial.clone();
    let mut r = problem.residual(&x)?;
    if r.len() < n {
        return Err(FitError::InvalidProblem(format!(
            "{} residuals cannot determine {} parameters",
            r.len(),
            n
        )));
    }
    let mut j = problem.jacobian(&x, &r)?;
    let mut cost = 0.5 * r.norm_squared();

    let mut jtj = j.transpose() * &j;
    let mut grad = j.transpose() * &r;
    let max_diag = jtj.diagonal().max();
    if max_diag <= 0.0 {
        return Err(FitError::SingularJacobian);
    }
    let mut lambda = s.initial_damping * max_diag;
    let mut nu = 2.0;
    let mut iterations = 0;

    let is_converged = |j: &DMatrix<f64>, r: &DVector<f64>| {
        r.norm() <= s.residual_tolerance || gradient_cosine(j, r) <= s.gradient_tolerance
    };

    loop {
        if is_converged(&j, &r) {
            return build_result(problem, &x, &r, &j, iterations, true);
        }
        if iterations >= s.max_iterations {
            let best = build_result(problem, &x, &r, &j, iterations, false).ok();
            return Err(FitError::MaxIterations {
                iterations,
                best: best.map(Box::new),
            });
        }
        iterations += 1;

        // Marquardt scaling; a column with no sensitivity still gets damped
        let scale: Vec<f64> = jtj.diagonal().iter().map(|d| d.max(1e-12 * max_diag)).collect();
        let mut a = jtj.clone();
        for k in 0..n {
            a[(k, k)] += lambda * scale[k];
        }
        let step = match a.cholesky() {
            Some(ch) => ch.solve(&(-&grad)),
            None => {
                lambda *= nu;
                nu *= 2.0;
                if !lambda.is_finite() {
                    return Err(FitError::SingularJacobian);
                }
                continue;
            }
        };

        let mut trial = x.clone();
        for k in 0..n {
            trial[k] += step[k];
        }
        project(&mut trial, &problem.lower, &problem.upper);
        let actual_step: Vec<f64> = trial.iter().zip(&x).map(|(t, v)| t - v).collect();
        let step_norm = actual_step.iter().map(|d| d * d).sum::<f64>().sqrt();
        let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if step_norm <= s.step_tolerance * (x_norm + s.step_tolerance) {
            let converged = is_converged(&j, &r);
            return build_result(problem, &x, &r, &j, iterations, converged);
        }

        let r_trial = problem.residual(&trial)?;
        let cost_trial = 0.5 * r_trial.norm_squared();
        let h = DVector::from_vec(actual_step);
        // predicted reduction of the local quadratic model
        let jh = &j * &h;
        let predicted = -(grad.dot(&h) + 0.5 * jh.norm_squared());
        let rho = if predicted > 0.0 {
            (cost - cost_trial) / predicted
        } else {
            -1.0
        };

        if rho > 0.0 && cost_trial < cost {
            x = trial;
            r = r_trial;
            cost = cost_trial;
            j = problem.jacobian(&x, &r)?;
            jtj = j.transpose() * &j;
            grad = j.transpose() * &r;
            lambda *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
        } else {
            lambda *= nu;
            nu *= 2.0;
            if !lambda.is_finite() {
                let converged = is_converged(&j, &r);
                return build_result(problem, &x, &r, &j, iterations, converged);
            }
        }
    }
}
