//! Sweep configuration files.
//!
//! Flat `section.key = value` lines; `#` starts a comment. Numbers take SI
//! suffixes (`5.6GHz`, `74nA`, `0.5pH`, `0.5mrad`). Recognised keys:
//!
//! ```text
//! flux.start = -0.02            # Φ0 units from the degeneracy point
//! flux.stop = 0.02
//! flux.steps = 2001
//! sweep.modes = 3, 4, 5
//! resonator.3.frequency = 7.782GHz   # overrides the built-in table
//! resonator.3.kappa = 715kHz
//! geometry.mutual_inductance = 0.5pH
//! geometry.resonator_inductance = 11nH
//! group.S.delta = 5.6GHz
//! group.S.current = 74nA
//! group.S.gamma_phi = 53MHz
//! group.S.gamma_1 = 53MHz       # optional, defaults to gamma_phi
//! group.S.count = 8
//! group.S.coupling.2 = 0.4MHz   # optional per-mode bare coupling
//! ensemble.g_qq = 0
//! drive.relative = 0.1          # f/κ; or drive.strength = 71.5kHz
//! noise.sigma = 0.5mrad
//! noise.seed = 7
//! output.dir = out
//! output.prefix = trace
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{CouplingGeometry, ModelError, QubitParams, ResonatorMode};
use crate::semiclassical::{CouplingRule, DriveSpec, Ensemble, QubitGroup, SemiclassicalError};
use crate::units::{khz, parse_quantity, to_hz, Dimension, UnitError};

/// Measured fundamental, second harmonic as measured, higher modes as
/// multiples of the fundamental; loaded linewidths.
pub fn default_resonators() -> BTreeMap<u32, ResonatorMode> {
    let w1 = crate::units::ghz(2.594);
    let table = [
        (1, w1, khz(55.5)),
        (2, crate::units::ghz(5.202), khz(216.0)),
        (3, 3.0 * w1, khz(715.0)),
        (4, 4.0 * w1, khz(950.0)),
        (5, 5.0 * w1, khz(1400.0)),
    ];
    table
        .into_iter()
        .map(|(j, omega, kappa)| (j, ResonatorMode { index: j, omega, kappa }))
        .collect()
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}`: {source}")]
    Value {
        line: usize,
        key: String,
        source: UnitError,
    },
    #[error("line {line}: `{key}` is set twice")]
    Duplicate { line: usize, key: String },
    #[error("missing `{0}`")]
    Missing(String),
    #[error("`{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Semiclassical(#[from] SemiclassicalError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveSetting {
    /// f = factor·κ of the probed mode
    Relative(f64),
    /// f in rad/s
    Absolute(f64),
}

impl DriveSetting {
    pub fn for_mode(self, mode: &ResonatorMode) -> Result<DriveSpec, SemiclassicalError> {
        match self {
            DriveSetting::Relative(k) => DriveSpec::new(k * mode.kappa),
            DriveSetting::Absolute(f) => DriveSpec::new(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub flux_start: f64,
    pub flux_stop: f64,
    pub steps: usize,
    pub modes: Vec<u32>,
    pub resonators: BTreeMap<u32, ResonatorMode>,
    pub geometry: Option<CouplingGeometry>,
    /// Group names in file order, parallel to the ensemble's groups.
    pub group_names: Vec<String>,
    pub ensemble: Ensemble,
    pub drive: DriveSetting,
    /// rad
    pub noise_sigma: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub output_prefix: String,
}

#[derive(Debug, Default)]
struct GroupDraft {
    delta: Option<f64>,
    current: Option<f64>,
    gamma_phi: Option<f64>,
    gamma_1: Option<f64>,
    count: Option<usize>,
    couplings: BTreeMap<u32, f64>,
}

fn parse_int<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
    v.trim().parse().map_err(|_| ConfigError::Syntax {
        line,
        message: format!("`{key}` expects a non-negative integer, got `{v}`"),
    })
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut flux_start = None;
        let mut flux_stop = None;
        let mut steps = None;
        let mut modes: Option<Vec<u32>> = None;
        let mut resonators = default_resonators();
        let mut res_overrides: BTreeMap<u32, (Option<f64>, Option<f64>)> = BTreeMap::new();
        let mut mutual = None;
        let mut res_ind = None;
        let mut groups: Vec<(String, GroupDraft)> = Vec::new();
        let mut g_qq = 0.0;
        let mut drive_rel = None;
        let mut drive_abs = None;
        let mut noise_sigma = 0.0;
        let mut seed = 0u64;
        let mut output_dir = PathBuf::from(".");
        let mut output_prefix = "trace".to_string();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: "expected `section.key = value`".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("`{key}` has no value"),
                });
            }
            if seen.insert(key.to_string(), line).is_some() {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
            let q = |dim| {
                parse_quantity(value, dim).map_err(|source| ConfigError::Value {
                    line,
                    key: key.to_string(),
                    source,
                })
            };
            let unknown = || ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            };
            let parts: Vec<&str> = key.split('.').collect();
            match parts.as_slice() {
                ["flux", "start"] => flux_start = Some(q(Dimension::Dimensionless)?),
                ["flux", "stop"] => flux_stop = Some(q(Dimension::Dimensionless)?),
                ["flux", "steps"] => steps = Some(parse_int(line, key, value)?),
                ["sweep", "modes"] => {
                    modes = Some(
                        value
                            .split(',')
                            .map(|m| parse_int(line, key, m))
                            .collect::<Result<_, _>>()?,
                    )
                }
                ["resonator", j, field] => {
                    let j: u32 = parse_int(line, key, j)?;
                    let entry = res_overrides.entry(j).or_default();
                    match *field {
                        "frequency" => entry.0 = Some(q(Dimension::Frequency)?),
                        "kappa" => entry.1 = Some(q(Dimension::Frequency)?),
                        _ => return Err(unknown()),
                    }
                }
                ["geometry", "mutual_inductance"] => mutual = Some(q(Dimension::Inductance)?),
                ["geometry", "resonator_inductance"] => res_ind = Some(q(Dimension::Inductance)?),
                ["group", name, rest @ ..] => {
                    let pos = match groups.iter().position(|(n, _)| n == name) {
                        Some(p) => p,
                        None => {
                            groups.push((name.to_string(), GroupDraft::default()));
                            groups.len() - 1
                        }
                    };
                    let g = &mut groups[pos].1;
                    match rest {
                        ["delta"] => g.delta = Some(q(Dimension::Frequency)?),
                        ["current"] => g.current = Some(q(Dimension::Current)?),
                        ["gamma_phi"] => g.gamma_phi = Some(q(Dimension::Frequency)?),
                        ["gamma_1"] => g.gamma_1 = Some(q(Dimension::Frequency)?),
                        ["count"] => g.count = Some(parse_int(line, key, value)?),
                        ["coupling", j] => {
                            let j: u32 = parse_int(line, key, j)?;
                            g.couplings.insert(j, q(Dimension::Frequency)?);
                        }
                        _ => return Err(unknown()),
                    }
                }
                ["ensemble", "g_qq"] => g_qq = q(Dimension::Frequency)?,
                ["drive", "relative"] => drive_rel = Some(q(Dimension::Dimensionless)?),
                ["drive", "strength"] => drive_abs = Some(q(Dimension::Frequency)?),
                ["noise", "sigma"] => noise_sigma = q(Dimension::Angle)?,
                ["noise", "seed"] => seed = parse_int(line, key, value)?,
                ["output", "dir"] => output_dir = PathBuf::from(value),
                ["output", "prefix"] => output_prefix = value.to_string(),
                _ => return Err(unknown()),
            }
        }

        for (j, (freq, kappa)) in res_overrides {
            let base = resonators.get(&j).copied();
            let omega = freq.or(base.map(|m| m.omega)).ok_or_else(|| {
                ConfigError::Missing(format!("resonator.{j}.frequency"))
            })?;
            let kappa = kappa.or(base.map(|m| m.kappa)).ok_or_else(|| {
                ConfigError::Missing(format!("resonator.{j}.kappa"))
            })?;
            resonators.insert(j, ResonatorMode::new(j, omega, kappa)?);
        }

        let geometry = match (mutual, res_ind) {
            (Some(m), Some(l)) => Some(CouplingGeometry::new(m, l)?),
            (None, None) => None,
            (Some(_), None) => return Err(ConfigError::Missing("geometry.resonator_inductance".into())),
            (None, Some(_)) => return Err(ConfigError::Missing("geometry.mutual_inductance".into())),
        };

        if groups.is_empty() {
            return Err(ConfigError::Missing("group.<name>.*".into()));
        }
        let mut group_names = Vec::new();
        let mut built = Vec::new();
        for (name, d) in groups {
            let need = |v: Option<f64>, field: &str| {
                v.ok_or_else(|| ConfigError::Missing(format!("group.{name}.{field}")))
            };
            let gamma_phi = need(d.gamma_phi, "gamma_phi")?;
            let qubit = QubitParams::new(
                name.clone(),
                need(d.delta, "delta")?,
                need(d.current, "current")?,
                gamma_phi,
                d.gamma_1.unwrap_or(gamma_phi),
            )?;
            let count = d
                .count
                .ok_or_else(|| ConfigError::Missing(format!("group.{name}.count")))?;
            let mut rule = CouplingRule {
                geometry,
                overrides: BTreeMap::new(),
            };
            for (j, g) in d.couplings {
                rule = rule.with_override(j, g);
            }
            group_names.push(name);
            built.push(QubitGroup::new(qubit, count, rule));
        }
        let ensemble = Ensemble::new(built, g_qq)?;

        let drive = match (drive_rel, drive_abs) {
            (Some(_), Some(_)) => {
                return Err(invalid("drive", "set either drive.relative or drive.strength, not both"))
            }
            (_, Some(f)) => DriveSetting::Absolute(f),
            (Some(k), None) => DriveSetting::Relative(k),
            (None, None) => DriveSetting::Relative(0.1),
        };

        let cfg = SweepConfig {
            flux_start: flux_start.ok_or_else(|| ConfigError::Missing("flux.start".into()))?,
            flux_stop: flux_stop.ok_or_else(|| ConfigError::Missing("flux.stop".into()))?,
            steps: steps.ok_or_else(|| ConfigError::Missing("flux.steps".into()))?,
            modes: modes.ok_or_else(|| ConfigError::Missing("sweep.modes".into()))?,
            resonators,
            geometry,
            group_names,
            ensemble,
            drive,
            noise_sigma,
            seed,
            output_dir,
            output_prefix,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [("flux.start", self.flux_start), ("flux.stop", self.flux_stop)] {
            if !(v.is_finite() && v.abs() < 0.5) {
                return Err(invalid(name, "must lie strictly between -0.5 and 0.5"));
            }
        }
        if self.flux_start == self.flux_stop {
            return Err(invalid("flux.stop", "must differ from flux.start"));
        }
        if self.steps < 2 {
            return Err(invalid("flux.steps", "at least 2 points are required"));
        }
        if self.modes.is_empty() {
            return Err(invalid("sweep.modes", "list at least one mode"));
        }
        for j in &self.modes {
            if !self.resonators.contains_key(j) {
                return Err(invalid("sweep.modes", format!("mode {j} is not in the resonator table")));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(invalid("noise.sigma", "must be non-negative"));
        }
        let drive_ok = match self.drive {
            DriveSetting::Relative(k) => k.is_finite() && k > 0.0,
            DriveSetting::Absolute(f) => f.is_finite() && f > 0.0,
        };
        if !drive_ok {
            return Err(invalid("drive", "must be positive"));
        }
        for j in &self.modes {
            let mode = &self.resonators[j];
            for g in self.ensemble.groups() {
                g.coupling.bare_coupling(&g.qubit, mode)?;
            }
        }
        if self.output_prefix.is_empty() || self.output_prefix.contains(['/', '\\']) {
            return Err(invalid("output.prefix", "must be a plain file-name prefix"));
        }
        Ok(())
    }

    /// Evenly spaced flux grid, endpoints included.
    pub fn flux_grid(&self) -> Vec<f64> {
        let n = self.steps - 1;
        (0..self.steps)
            .map(|i| {
                if i == n {
                    self.flux_stop
                } else {
                    self.flux_start + (self.flux_stop - self.flux_start) * i as f64 / n as f64
                }
            })
            .collect()
    }

    /// Normalised rendering with every key spelled out; frequencies in Hz.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        let hz = |w: f64| format!("{}Hz", to_hz(w));
        let _ = writeln!(s, "flux.start = {}", self.flux_start);
        let _ = writeln!(s, "flux.stop = {}", self.flux_stop);
        let _ = writeln!(s, "flux.steps = {}", self.steps);
        let modes: Vec<String> = self.modes.iter().map(|m| m.to_string()).collect();
        let _ = writeln!(s, "sweep.modes = {}", modes.join(", "));
        for (j, m) in &self.resonators {
            let _ = writeln!(s, "resonator.{j}.frequency = {}", hz(m.omega));
            let _ = writeln!(s, "resonator.{j}.kappa = {}", hz(m.kappa));
        }
        if let Some(g) = &self.geometry {
            let _ = writeln!(s, "geometry.mutual_inductance = {}", g.mutual_inductance);
            let _ = writeln!(s, "geometry.resonator_inductance = {}", g.resonator_inductance);
        }
        for (name, g) in self.group_names.iter().zip(self.ensemble.groups()) {
            let _ = writeln!(s, "group.{name}.delta = {}", hz(g.qubit.delta));
            let _ = writeln!(s, "group.{name}.current = {}", g.qubit.persistent_current);
            let _ = writeln!(s, "group.{name}.gamma_phi = {}", hz(g.qubit.gamma_phi));
            let _ = writeln!(s, "group.{name}.gamma_1 = {}", hz(g.qubit.gamma_1));
            let _ = writeln!(s, "group.{name}.count = {}", g.count);
            for (j, c) in &g.coupling.overrides {
                let _ = writeln!(s, "group.{name}.coupling.{j} = {}", hz(*c));
            }
        }
        let _ = writeln!(s, "ensemble.g_qq = {}", hz(self.ensemble.g_qq()));
        match self.drive {
            DriveSetting::Relative(k) => {
                let _ = writeln!(s, "drive.relative = {k}");
            }
            DriveSetting::Absolute(f) => {
                let _ = writeln!(s, "drive.strength = {}", hz(f));
            }
        }
        let _ = writeln!(s, "noise.sigma = {}", self.noise_sigma);
        let _ = writeln!(s, "noise.seed = {}", self.seed);
        let _ = writeln!(s, "output.dir = {}", self.output_dir.display());
        let _ = writeln!(s, "output.prefix = {}", self.output_prefix);
        s
    }

    /// First 16 hex digits of the SHA-256 of the canonical text, excluding
    /// the output location.
    pub fn hash(&self) -> String {
        let text: String = self
            .canonical_text()
            .lines()
            .filter(|l| !l.starts_with("output."))
            .map(|l| format!("{l}\n"))
            .collect();
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}
