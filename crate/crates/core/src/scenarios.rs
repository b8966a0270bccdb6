//! Built-in generate-then-fit round trips with the published parameter sets.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::config::SweepConfig;
use crate::estimation::{
    detect_crossings, fit_dispersive, fit_resonant_coupling, fit_resonant_mode, fit_spectrum,
    fit_two_modes, DispersiveFree, FitError, FitResult, FixedGroup, ModeFitOptions, SolverSettings,
};
use crate::exec::Execution;
use crate::model::{bare_coupling, CouplingGeometry};
use crate::sweep::{run_sweep, SweepError};
use crate::trace::PhaseTrace;
use crate::units::{to_ghz, to_mhz};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scenario {
    /// Ensemble S crossing ω3..ω5
    S,
    /// Ensembles A and B sharing ω3
    AB,
    /// One qubit with a large coupling at 7.77 GHz
    SingleQubit,
    /// Dispersive dip of ensemble S at the fundamental
    DispersiveW1,
    /// Dispersive dip of ensemble S at the second harmonic
    DispersiveW2,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::S,
        Scenario::AB,
        Scenario::SingleQubit,
        Scenario::DispersiveW1,
        Scenario::DispersiveW2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::S => "s",
            Scenario::AB => "ab",
            Scenario::SingleQubit => "single-qubit",
            Scenario::DispersiveW1 => "dispersive-w1",
            Scenario::DispersiveW2 => "dispersive-w2",
        }
    }

    /// Configuration used to generate the synthetic data.
    pub fn config_text(self) -> &'static str {
        match self {
            Scenario::S => S_CONFIG,
            Scenario::AB => AB_CONFIG,
            Scenario::SingleQubit => SINGLE_CONFIG,
            Scenario::DispersiveW1 => W1_CONFIG,
            Scenario::DispersiveW2 => W2_CONFIG,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let key = s.to_ascii_lowercase().replace(['_', ' '], "-").replace('ω', "w");
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == key)
            .ok_or_else(|| {
                let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
                format!("unknown scenario `{s}` (expected one of {})", names.join(", "))
            })
    }
}

const S_CONFIG: &str = "\
flux.start = -0.03
flux.stop = 0.03
flux.steps = 3001
sweep.modes = 3, 4, 5
geometry.mutual_inductance = 0.5pH
geometry.resonator_inductance = 11nH
group.S.delta = 5.6GHz
group.S.current = 74nA
group.S.gamma_phi = 53MHz
group.S.count = 8
noise.sigma = 0.5mrad
output.prefix = s
";

const AB_CONFIG: &str = "\
flux.start = -0.02
flux.stop = 0.02
flux.steps = 2001
sweep.modes = 3
geometry.mutual_inductance = 0.5pH
geometry.resonator_inductance = 11nH
group.A.delta = 5.3GHz
group.A.current = 76nA
group.A.gamma_phi = 54MHz
group.A.count = 4
group.B.delta = 6.1GHz
group.B.current = 72nA
group.B.gamma_phi = 41MHz
group.B.count = 4
noise.sigma = 0.5mrad
output.prefix = ab
";

const SINGLE_CONFIG: &str = "\
flux.start = -0.015
flux.stop = 0.015
flux.steps = 2001
sweep.modes = 3
resonator.3.frequency = 7.77GHz
resonator.3.kappa = 460kHz
geometry.mutual_inductance = 0.91pH
geometry.resonator_inductance = 11nH
group.D.delta = 3GHz
group.D.current = 158nA
group.D.gamma_phi = 141MHz
group.D.count = 1
group.D.coupling.3 = 4.9MHz
noise.sigma = 0.5mrad
output.prefix = single_qubit
";

const W1_CONFIG: &str = "\
flux.start = -0.03
flux.stop = 0.03
flux.steps = 1201
sweep.modes = 1
geometry.mutual_inductance = 0.5pH
geometry.resonator_inductance = 11nH
group.S.delta = 5.6GHz
group.S.current = 74nA
group.S.gamma_phi = 53MHz
group.S.count = 10
noise.sigma = 0.5mrad
output.prefix = dispersive_w1
";

const W2_CONFIG: &str = "\
flux.start = -0.03
flux.stop = 0.03
flux.steps = 1201
sweep.modes = 2
group.S.delta = 5.6GHz
group.S.current = 74nA
group.S.gamma_phi = 53MHz
group.S.count = 10
group.S.coupling.2 = 0.4MHz
noise.sigma = 0.5mrad
output.prefix = dispersive_w2
";

/// One recovered quantity against its target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub unit: String,
    pub recovered: f64,
    pub target: f64,
    /// Relative tolerance; 0 means exact.
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, unit: &str, recovered: f64, target: f64, tolerance: f64) -> Self {
        let pass = if tolerance == 0.0 {
            recovered == target
        } else {
            ((recovered - target) / target).abs() <= tolerance
        };
        Check {
            name: name.into(),
            unit: unit.into(),
            recovered,
            target,
            tolerance,
            pass,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub seed: u64,
    pub config_hash: String,
    pub checks: Vec<Check>,
    pub fits: Vec<(String, FitResult)>,
    #[serde(skip)]
    pub traces: Vec<PhaseTrace>,
    #[serde(skip)]
    pub config: Option<SweepConfig>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("{stage}: {source}")]
    Fit {
        stage: &'static str,
        source: FitError,
    },
}

fn stage(stage: &'static str) -> impl Fn(FitError) -> ScenarioError {
    move |source| ScenarioError::Fit { stage, source }
}

/// The scenario's configuration with the noise seed replaced.
pub fn scenario_config(scenario: Scenario, seed: u64) -> SweepConfig {
    let mut cfg = SweepConfig::parse(scenario.config_text()).expect("built-in scenario config is valid");
    cfg.seed = seed;
    cfg
}

/// Generate the scenario's traces, fit them and compare with the published
/// values.
pub fn reproduce_paper(scenario: Scenario, seed: u64, exec: Execution) -> Result<ScenarioReport, ScenarioError> {
    let cfg = scenario_config(scenario, seed);
    let traces = run_sweep(&cfg, exec)?;
    let opts = ModeFitOptions {
        execution: exec,
        ..Default::default()
    };
    let groups = cfg.ensemble.groups();
    let mut checks = Vec::new();
    let mut fits = Vec::new();

    match scenario {
        Scenario::S => {
            let mode = cfg.resonators[&3];
            let fixed = FixedGroup::from_group(&groups[0], &mode).map_err(stage("coupling"))?;
            let fit = fit_resonant_mode(&traces[0], &mode, &fixed, &opts).map_err(stage("resonant fit"))?;
            checks.push(Check::new("n_S", "", fit.value("n"), 8.0, 0.0));
            checks.push(Check::new("gamma_phi_S", "MHz", to_mhz(fit.value("gamma_phi")), 53.0, 0.05));
            fits.push(("resonant_mode3".to_string(), fit));

            let mut points = Vec::new();
            for t in &traces {
                let omega = cfg.resonators[&t.mode()].omega;
                points.extend(detect_crossings(t, omega).map_err(stage("crossing detection"))?);
            }
            let spec = fit_spectrum(&points).map_err(stage("spectrum fit"))?;
            checks.push(Check::new("delta_S", "GHz", to_ghz(spec.value("delta")), 5.6, 0.01));
            checks.push(Check::new("current_S", "nA", spec.value("persistent_current") * 1e9, 74.0, 0.01));
            fits.push(("spectrum".to_string(), spec));
        }
        Scenario::AB => {
            let mode = cfg.resonators[&3];
            let fa = FixedGroup::from_group(&groups[0], &mode).map_err(stage("coupling"))?;
            let fb = FixedGroup::from_group(&groups[1], &mode).map_err(stage("coupling"))?;
            let two = ModeFitOptions { max_count: 12, ..opts };
            let fit = fit_two_modes(&traces[0], &mode, &fa, &fb, &two).map_err(stage("two-group fit"))?;
            checks.push(Check::new("n_A", "", fit.value("n_a"), 4.0, 0.0));
            checks.push(Check::new("gamma_phi_A", "MHz", to_mhz(fit.value("gamma_phi_a")), 54.0, 0.05));
            checks.push(Check::new("n_B", "", fit.value("n_b"), 4.0, 0.0));
            checks.push(Check::new("gamma_phi_B", "MHz", to_mhz(fit.value("gamma_phi_b")), 41.0, 0.05));
            fits.push(("two_groups_mode3".to_string(), fit));
        }
        Scenario::SingleQubit => {
            let mode = cfg.resonators[&3];
            let g = &groups[0];
            let geometry = CouplingGeometry::new(0.91e-12, 11e-9).expect("valid geometry");
            checks.push(Check::new(
                "g_geometry",
                "MHz",
                to_mhz(bare_coupling(&geometry, &g.qubit, &mode)),
                4.7,
                0.3 / 4.7,
            ));
            let fixed = FixedGroup::from_group(g, &mode).map_err(stage("coupling"))?;
            let fit = fit_resonant_mode(&traces[0], &mode, &fixed, &opts).map_err(stage("resonant fit"))?;
            checks.push(Check::new("n", "", fit.value("n"), 1.0, 0.0));
            fits.push(("resonant_mode3".to_string(), fit));
            let free = fit_resonant_coupling(&traces[0], &mode, &fixed, 1, SolverSettings::default())
                .map_err(stage("coupling fit"))?;
            checks.push(Check::new("g_fitted", "MHz", to_mhz(free.value("g_bare")), 4.9, 0.05));
            checks.push(Check::new("gamma_phi", "MHz", to_mhz(free.value("gamma_phi")), 141.0, 0.05));
            fits.push(("coupling_mode3".to_string(), free));
        }
        Scenario::DispersiveW1 => {
            let mode = cfg.resonators[&1];
            let fixed = FixedGroup::from_group(&groups[0], &mode).map_err(stage("coupling"))?;
            let fit = fit_dispersive(&traces[0], &mode, &fixed, DispersiveFree::Count, &opts)
                .map_err(stage("dispersive fit"))?;
            checks.push(Check::new("n", "", fit.value("n"), 10.0, 0.0));
            fits.push(("dispersive_mode1".to_string(), fit));
        }
        Scenario::DispersiveW2 => {
            let mode = cfg.resonators[&2];
            let fixed = FixedGroup::from_group(&groups[0], &mode).map_err(stage("coupling"))?;
            let fit = fit_dispersive(&traces[0], &mode, &fixed, DispersiveFree::Coupling { count: 10 }, &opts)
                .map_err(stage("dispersive fit"))?;
            checks.push(Check::new("g_i2", "MHz", to_mhz(fit.value("g_bare")), 0.4, 0.10));
            fits.push(("dispersive_mode2".to_string(), fit));
        }
    }

    Ok(ScenarioReport {
        scenario,
        seed,
        config_hash: cfg.hash(),
        checks,
        fits,
        traces,
        config: Some(cfg),
    })
}
