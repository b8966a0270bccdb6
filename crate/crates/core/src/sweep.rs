//! Synthetic flux sweeps: forward model plus seeded phase noise.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::config::{ConfigError, SweepConfig};
use crate::exec::Execution;
use crate::model::FluxBias;
use crate::semiclassical::{steady_state_field, SemiclassicalError};
use crate::trace::{export_trace, PhaseTrace, PhaseUnit, Provenance, TraceError, TraceSample, TOOL_VERSION};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Semiclassical(#[from] SemiclassicalError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("cannot create {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Per-mode seed; every flux index then gets its own ChaCha stream so the
/// noise does not depend on evaluation order.
fn mode_seed(seed: u64, mode: u32) -> u64 {
    seed ^ (u64::from(mode) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn noise_at(seed: u64, mode: u32, index: usize, dist: &Normal<f64>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(mode_seed(seed, mode));
    rng.set_stream(index as u64);
    dist.sample(&mut rng)
}

/// Evaluate every configured mode over the flux grid.
///
/// `amplitude` is |⟨a⟩| relative to the bare resonator. With
/// `noise_sigma = 0` the phases are exactly the forward model.
pub fn run_sweep(cfg: &SweepConfig, exec: Execution) -> Result<Vec<PhaseTrace>, SweepError> {
    cfg.validate()?;
    let grid = cfg.flux_grid();
    let provenance = Provenance {
        config_hash: cfg.hash(),
        seed: Some(cfg.seed),
        tool_version: TOOL_VERSION.to_string(),
    };
    let noise = if cfg.noise_sigma > 0.0 {
        Some(Normal::new(0.0, cfg.noise_sigma).expect("sigma validated"))
    } else {
        None
    };

    let mut traces = Vec::with_capacity(cfg.modes.len());
    for &j in &cfg.modes {
        let mode = cfg.resonators[&j];
        let drive = cfg.drive.for_mode(&mode)?;
        let bare = drive.strength / mode.kappa;
        let samples: Vec<Result<TraceSample, SweepError>> = exec.map_range(grid.len(), |i| {
            let flux = FluxBias::new(grid[i]).map_err(SemiclassicalError::from)?;
            let resp = steady_state_field(&cfg.ensemble, &mode, flux, &drive)?;
            let phase = match &noise {
                Some(dist) => resp.phase_shift + noise_at(cfg.seed, j, i, dist),
                None => resp.phase_shift,
            };
            Ok(TraceSample {
                flux: grid[i],
                phase,
                amplitude: resp.amplitude / bare,
            })
        });
        let samples = samples.into_iter().collect::<Result<Vec<_>, _>>()?;
        traces.push(PhaseTrace::new(j, samples, provenance.clone())?);
    }
    Ok(traces)
}

/// Path of the trace file for mode `j`: `<dir>/<prefix>_mode<j>.csv`.
pub fn trace_path(dir: &Path, prefix: &str, mode: u32) -> PathBuf {
    dir.join(format!("{prefix}_mode{mode}.csv"))
}

/// Write each trace to its own file under `dir`.
pub fn write_traces(
    traces: &[PhaseTrace],
    dir: &Path,
    prefix: &str,
    unit: PhaseUnit,
) -> Result<Vec<PathBuf>, SweepError> {
    std::fs::create_dir_all(dir).map_err(|source| SweepError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    traces
        .iter()
        .map(|t| {
            let path = trace_path(dir, prefix, t.mode());
            export_trace(t, &path, unit)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{resonance_flux, FluxBias};

    const S3: &str = "\
flux.start = -0.02
flux.stop = 0.02
flux.steps = 2001
sweep.modes = 3
geometry.mutual_inductance = 0.5pH
geometry.resonator_inductance = 11nH
group.S.delta = 5.6GHz
group.S.current = 74nA
group.S.gamma_phi = 53MHz
group.S.count = 8
";

    #[test]
    fn extrema_bracket_the_crossing() {
        let cfg = SweepConfig::parse(S3).unwrap();
        let trace = &run_sweep(&cfg, Execution::Sequential).unwrap()[0];
        let x0 = resonance_flux(&cfg.ensemble.groups()[0].qubit, &cfg.resonators[&3])
            .unwrap()
            .value();
        // on the positive side the phase swings from its maximum to its minimum
        let pos: Vec<&TraceSample> = trace.samples().iter().filter(|s| s.flux > 0.0).collect();
        let max = pos.iter().max_by(|a, b| a.phase.total_cmp(&b.phase)).unwrap();
        let min = pos.iter().min_by(|a, b| a.phase.total_cmp(&b.phase)).unwrap();
        assert!(max.flux < x0 && x0 < min.flux, "{} {} {}", max.flux, x0, min.flux);
        let neg: Vec<&TraceSample> = trace.samples().iter().filter(|s| s.flux < 0.0).collect();
        let max = neg.iter().max_by(|a, b| a.phase.total_cmp(&b.phase)).unwrap();
        let min = neg.iter().min_by(|a, b| a.phase.total_cmp(&b.phase)).unwrap();
        assert!(min.flux < -x0 && -x0 < max.flux);
        assert!((x0 - 0.01168).abs() / 0.01168 < 5e-3);
    }

    #[test]
    fn zero_qubits_give_flat_trace() {
        let cfg = SweepConfig::parse(&S3.replace("count = 8", "count = 0")).unwrap();
        let trace = &run_sweep(&cfg, Execution::Sequential).unwrap()[0];
        assert!(trace.samples().iter().all(|s| s.phase == 0.0 && s.amplitude == 1.0));
    }

    #[test]
    fn zero_noise_is_the_forward_model() {
        let cfg = SweepConfig::parse(&format!("{S3}noise.seed = 99\n")).unwrap();
        let trace = &run_sweep(&cfg, Execution::Parallel).unwrap()[0];
        let drive = cfg.drive.for_mode(&cfg.resonators[&3]).unwrap();
        for s in trace.samples() {
            let r = steady_state_field(&cfg.ensemble, &cfg.resonators[&3], FluxBias::new(s.flux).unwrap(), &drive)
                .unwrap();
            assert_eq!(s.phase, r.phase_shift);
        }
    }

    #[test]
    fn noise_is_independent_of_execution_order() {
        let cfg = SweepConfig::parse(&format!("{S3}noise.sigma = 0.5mrad\nnoise.seed = 7\n")).unwrap();
        let a = run_sweep(&cfg, Execution::Sequential).unwrap();
        let b = run_sweep(&cfg, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        let clean = run_sweep(&SweepConfig::parse(S3).unwrap(), Execution::Sequential).unwrap();
        let resid: Vec<f64> = a[0]
            .phases()
            .iter()
            .zip(clean[0].phases())
            .map(|(n, c)| n - c)
            .collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let sd = (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (resid.len() - 1) as f64).sqrt();
        assert!(mean.abs() < 5e-5);
        assert!((sd - 5e-4).abs() < 5e-5, "{sd}");
    }

    #[test]
    fn different_seeds_differ() {
        let base = format!("{S3}noise.sigma = 0.5mrad\n");
        let a = run_sweep(&SweepConfig::parse(&format!("{base}noise.seed = 1\n")).unwrap(), Execution::Sequential).unwrap();
        let b = run_sweep(&SweepConfig::parse(&format!("{base}noise.seed = 2\n")).unwrap(), Execution::Sequential).unwrap();
        assert_ne!(a[0].phases(), b[0].phases());
    }
}
