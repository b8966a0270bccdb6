//! Phase-vs-flux traces and their CSV representation.
//!
//! File layout:
//!
//! ```text
//! # qmeta phase trace
//! # mode = 3
//! # config_hash = 3f9a...
//! # seed = 7
//! # tool_version = 0.1.0
//! flux_phi0,phase_rad,amplitude
//! -2.0000000000000000e-2,1.2345678901234567e-3,9.9999999999999992e-2
//! ```
//!
//! Numbers are written with 17 significant digits so a radian-valued file
//! reads back bit-identical. With [`PhaseUnit::Degrees`] the phase column is
//! named `phase_deg`; reading converts back to radians.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace has no samples")]
    Empty,
    #[error("flux axis is not strictly monotone at sample {0}")]
    NonMonotone(usize),
    #[error("non-finite value at sample {0}")]
    NonFinite(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    /// Φ0 units, measured from the degeneracy point
    pub flux: f64,
    /// rad
    pub phase: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: Option<u64>,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    mode: u32,
    samples: Vec<TraceSample>,
    provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseUnit {
    #[default]
    Radians,
    Degrees,
}

impl PhaseUnit {
    fn column(self) -> &'static str {
        match self {
            PhaseUnit::Radians => "phase_rad",
            PhaseUnit::Degrees => "phase_deg",
        }
    }
}

fn check_samples(samples: &[TraceSample]) -> Result<(), TraceError> {
    if samples.is_empty() {
        return Err(TraceError::Empty);
    }
    for (i, s) in samples.iter().enumerate() {
        if !(s.flux.is_finite() && s.phase.is_finite() && s.amplitude.is_finite()) {
            return Err(TraceError::NonFinite(i));
        }
    }
    if samples.len() >= 2 {
        let increasing = samples[1].flux > samples[0].flux;
        for (i, w) in samples.windows(2).enumerate() {
            let ok = if increasing {
                w[1].flux > w[0].flux
            } else {
                w[1].flux < w[0].flux
            };
            if !ok {
                return Err(TraceError::NonMonotone(i + 1));
            }
        }
    }
    Ok(())
}

impl PhaseTrace {
    pub fn new(
        mode: u32,
        samples: Vec<TraceSample>,
        provenance: Provenance,
    ) -> Result<Self, TraceError> {
        check_samples(&samples)?;
        Ok(PhaseTrace {
            mode,
            samples,
            provenance,
        })
    }

    /// Trace built from parallel flux/phase slices with unit amplitude.
    pub fn from_phases(mode: u32, flux: &[f64], phase: &[f64]) -> Result<Self, TraceError> {
        let samples = flux
            .iter()
            .zip(phase)
            .map(|(&flux, &phase)| TraceSample {
                flux,
                phase,
                amplitude: 1.0,
            })
            .collect();
        Self::new(mode, samples, Provenance::default())
    }

    pub fn mode(&self) -> u32 {
        self.mode
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn fluxes(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.flux).collect()
    }

    pub fn phases(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.phase).collect()
    }

    /// Flux axis negated (order reversed to keep it monotone).
    pub fn mirrored(&self) -> Self {
        let samples = self
            .samples
            .iter()
            .rev()
            .map(|s| TraceSample {
                flux: -s.flux,
                ..*s
            })
            .collect();
        PhaseTrace {
            mode: self.mode,
            samples,
            provenance: self.provenance.clone(),
        }
    }

    /// Keep only samples satisfying `keep`; fails if nothing remains.
    pub fn filtered(&self, keep: impl Fn(&TraceSample) -> bool) -> Result<Self, TraceError> {
        let samples: Vec<_> = self.samples.iter().filter(|s| keep(s)).cloned().collect();
        Self::new(self.mode, samples, self.provenance.clone())
    }

    pub fn write_csv<W: Write>(&self, mut w: W, unit: PhaseUnit) -> std::io::Result<()> {
        writeln!(w, "# qmeta phase trace")?;
        writeln!(w, "# mode = {}", self.mode)?;
        writeln!(w, "# config_hash = {}", self.provenance.config_hash)?;
        match self.provenance.seed {
            Some(s) => writeln!(w, "# seed = {s}")?,
            None => writeln!(w, "# seed = none")?,
        }
        writeln!(w, "# tool_version = {}", self.provenance.tool_version)?;
        writeln!(w, "flux_phi0,{},amplitude", unit.column())?;
        for s in &self.samples {
            let phase = match unit {
                PhaseUnit::Radians => s.phase,
                PhaseUnit::Degrees => s.phase.to_degrees(),
            };
            writeln!(w, "{:.16e},{:.16e},{:.16e}", s.flux, phase, s.amplitude)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, TraceError> {
        let mut mode = None;
        let mut provenance = Provenance::default();
        let mut unit = None;
        let mut samples = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let text = line.trim();
            let err = |message: String| TraceError::Parse {
                line: line_no,
                message,
            };
            if text.is_empty() {
                continue;
            }
            if let Some(comment) = text.strip_prefix('#') {
                if let Some((key, value)) = comment.split_once('=') {
                    let value = value.trim();
                    match key.trim() {
                        "mode" => {
                            mode = Some(value.parse().map_err(|_| err(format!("bad mode `{value}`")))?)
                        }
                        "config_hash" => provenance.config_hash = value.to_string(),
                        "seed" => {
                            provenance.seed = match value {
                                "none" => None,
                                v => Some(v.parse().map_err(|_| err(format!("bad seed `{v}`")))?),
                            }
                        }
                        "tool_version" => provenance.tool_version = value.to_string(),
                        _ => {}
                    }
                }
                continue;
            }
            if unit.is_none() {
                unit = Some(match text {
                    "flux_phi0,phase_rad,amplitude" => PhaseUnit::Radians,
                    "flux_phi0,phase_deg,amplitude" => PhaseUnit::Degrees,
                    _ => return Err(err(format!("unexpected header `{text}`"))),
                });
                continue;
            }
            let fields: Vec<&str> = text.split(',').collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 columns, found {}", fields.len())));
            }
            let num = |s: &str| -> Result<f64, TraceError> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| err(format!("`{s}` is not a number")))
            };
            let flux = num(fields[0])?;
            let mut phase = num(fields[1])?;
            if unit == Some(PhaseUnit::Degrees) {
                phase = phase.to_radians();
            }
            let amplitude = num(fields[2])?;
            if let Some(prev) = samples.last() {
                let prev: &TraceSample = prev;
                let dir_ok = match samples.len() {
                    1 => flux != prev.flux,
                    _ => {
                        let inc = samples[1].flux > samples[0].flux;
                        if inc {
                            flux > prev.flux
                        } else {
                            flux < prev.flux
                        }
                    }
                };
                if !dir_ok {
                    return Err(err("flux axis is not strictly monotone".into()));
                }
            }
            samples.push(TraceSample {
                flux,
                phase,
                amplitude,
            });
        }
        if unit.is_none() {
            return Err(TraceError::Parse {
                line: 0,
                message: "missing header row".into(),
            });
        }
        let mode = mode.ok_or(TraceError::Parse {
            line: 0,
            message: "missing `# mode = ...` line".into(),
        })?;
        Self::new(mode, samples, provenance)
    }
}

pub fn export_trace(trace: &PhaseTrace, path: &Path, unit: PhaseUnit) -> Result<(), TraceError> {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf, unit)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn import_trace(path: &Path) -> Result<PhaseTrace, TraceError> {
    let file = fs::File::open(path)?;
    PhaseTrace::read_csv(BufReader::new(file))
}
