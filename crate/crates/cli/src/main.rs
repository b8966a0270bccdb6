//! `qmeta`: flux sweeps, fits and oracle checks from the command line.
//!
//! Data goes to files under `--out-dir`; progress and summaries go to stderr.
//! Exit status is 0 on success, 1 for invalid input and 2 when a fit does not
//! converge or a reproduction misses its targets.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};
use serde_json::json;

use qmeta::config::SweepConfig;
use qmeta::estimation::{
    detect_crossings, fit_dispersive, fit_lorentzian, fit_resonant_coupling, fit_resonant_mode,
    fit_spectrum, fit_two_modes, DispersiveFree, FitError, FitResult, FixedGroup, ModeFitOptions,
    SolverSettings,
};
use qmeta::lindblad::compare_semiclassical;
use qmeta::model::{thermal_photon_number, ResonatorMode};
use qmeta::scenarios::{reproduce_paper, Scenario};
use qmeta::sweep::{run_sweep, write_traces};
use qmeta::trace::{import_trace, PhaseTrace, PhaseUnit};
use qmeta::units::{parse_quantity, to_mhz, Dimension};
use qmeta::Execution;

#[derive(Parser)]
#[command(name = "qmeta", version, about = "Flux-qubit ensemble sweeps and fits")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Sweep configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Noise seed; overrides `noise.seed`
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `output.dir`
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Write phases in degrees instead of radians
    #[arg(long, global = true)]
    degrees: bool,
    /// Run everything on the calling thread
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate phase traces for the configured modes
    Sweep,
    /// Fit gap and persistent current to the crossings of several traces
    FitSpectrum {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Fit qubit count and dephasing of one group to a resonant trace
    FitMode {
        trace: PathBuf,
        /// Group in the configuration holding Δ, I and the coupling
        #[arg(long)]
        group: Option<String>,
        /// Free the coupling instead of the count, holding n at this value
        #[arg(long)]
        free_coupling: Option<usize>,
        #[arg(long, default_value_t = 40)]
        max_count: usize,
    },
    /// Joint fit of two groups sharing one resonant trace
    FitTwoModes {
        trace: PathBuf,
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        groups: Option<Vec<String>>,
        #[arg(long, default_value_t = 20)]
        max_count: usize,
    },
    /// Fit a far-detuned trace for the count or, with --free-coupling, the coupling
    FitDispersive {
        trace: PathBuf,
        #[arg(long)]
        group: Option<String>,
        #[arg(long)]
        free_coupling: Option<usize>,
        #[arg(long, default_value_t = 40)]
        max_count: usize,
    },
    /// Fit a Lorentzian to a two-column `frequency_hz,amplitude` file
    FitLorentzian { data: PathBuf },
    /// Compare the semiclassical phase with the master-equation steady state
    OracleCompare {
        #[arg(long, default_value_t = 6)]
        fock_cutoff: usize,
    },
    /// Generate and refit one of the built-in scenarios (or `all`)
    Reproduce { scenario: String },
    /// Thermal photon number of a mode
    Thermal {
        #[arg(long)]
        frequency: String,
        #[arg(long)]
        temperature: String,
    },
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    NotConverged(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::NotConverged(_) => 2,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(e.to_string())
}

impl From<FitError> for Failure {
    fn from(e: FitError) -> Self {
        match e {
            FitError::MaxIterations { .. } | FitError::SingularJacobian | FitError::NonFiniteResidual => {
                Failure::NotConverged(e.to_string())
            }
            other => Failure::Invalid(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

struct Context {
    global: Global,
    exec: Execution,
}

impl Context {
    fn config(&self) -> Result<SweepConfig, Failure> {
        let path = self
            .global
            .config
            .as_ref()
            .ok_or_else(|| Failure::Invalid("this command needs --config".into()))?;
        let mut cfg = SweepConfig::from_file(path).map_err(invalid)?;
        if let Some(seed) = self.global.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = &self.global.out_dir {
            cfg.output_dir = dir.clone();
        }
        Ok(cfg)
    }

    fn out_dir(&self) -> PathBuf {
        self.global.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    fn unit(&self) -> PhaseUnit {
        if self.global.degrees {
            PhaseUnit::Degrees
        } else {
            PhaseUnit::Radians
        }
    }

    fn write_json(&self, dir: &Path, name: &str, value: &serde_json::Value) -> Outcome {
        fs::create_dir_all(dir).map_err(invalid)?;
        let path = dir.join(name);
        let text = serde_json::to_string_pretty(value).map_err(invalid)? + "\n";
        fs::write(&path, text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        info!("wrote {}", path.display());
        Ok(())
    }
}

fn load(path: &Path) -> Result<PhaseTrace, Failure> {
    import_trace(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn mode_of(cfg: &SweepConfig, trace: &PhaseTrace) -> Result<ResonatorMode, Failure> {
    cfg.resonators
        .get(&trace.mode())
        .copied()
        .ok_or_else(|| invalid(format!("mode {} is not in the resonator table", trace.mode())))
}

fn group_index(cfg: &SweepConfig, name: Option<&str>) -> Result<usize, Failure> {
    match name {
        None => Ok(0),
        Some(n) => cfg
            .group_names
            .iter()
            .position(|g| g == n)
            .ok_or_else(|| invalid(format!("no group `{n}` in the configuration"))),
    }
}

fn fixed_group(cfg: &SweepConfig, idx: usize, mode: &ResonatorMode) -> Result<FixedGroup, Failure> {
    Ok(FixedGroup::from_group(&cfg.ensemble.groups()[idx], mode)?)
}

fn summarize(label: &str, fit: &FitResult) {
    let parts: Vec<String> = fit
        .parameters
        .iter()
        .map(|p| format!("{} = {:.6e} ± {:.2e}", p.name, p.value, p.uncertainty))
        .collect();
    info!("{label}: {} (residual {:.3e})", parts.join(", "), fit.residual_norm);
    if !fit.converged {
        warn!("{label}: solver stopped before meeting its tolerances");
    }
}

fn cmd_sweep(ctx: &Context) -> Outcome {
    let cfg = ctx.config()?;
    let traces = run_sweep(&cfg, ctx.exec).map_err(invalid)?;
    let paths = write_traces(&traces, &cfg.output_dir, &cfg.output_prefix, ctx.unit()).map_err(invalid)?;
    for p in paths {
        info!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_fit_spectrum(ctx: &Context, files: &[PathBuf]) -> Outcome {
    let cfg = ctx.config()?;
    let mut points = Vec::new();
    for f in files {
        let trace = load(f)?;
        let mode = mode_of(&cfg, &trace)?;
        let found = detect_crossings(&trace, mode.omega)?;
        info!("{}: {} crossing(s)", f.display(), found.len());
        points.extend(found);
    }
    let fit = fit_spectrum(&points)?;
    summarize("spectrum", &fit);
    ctx.write_json(&ctx.out_dir(), "fit_spectrum.json", &json!({ "crossings": points, "fit": fit }))
}

fn cmd_fit_mode(ctx: &Context, file: &Path, group: Option<&str>, free: Option<usize>, max_count: usize) -> Outcome {
    let cfg = ctx.config()?;
    let trace = load(file)?;
    let mode = mode_of(&cfg, &trace)?;
    let fixed = fixed_group(&cfg, group_index(&cfg, group)?, &mode)?;
    let fit = match free {
        Some(n) => fit_resonant_coupling(&trace, &mode, &fixed, n, SolverSettings::default())?,
        None => {
            let opts = ModeFitOptions { max_count, execution: ctx.exec, ..Default::default() };
            fit_resonant_mode(&trace, &mode, &fixed, &opts)?
        }
    };
    summarize("resonant mode", &fit);
    ctx.write_json(&ctx.out_dir(), "fit_mode.json", &json!({ "mode": mode.index, "fit": fit }))
}

fn cmd_fit_two(ctx: &Context, file: &Path, groups: Option<&[String]>, max_count: usize) -> Outcome {
    let cfg = ctx.config()?;
    let trace = load(file)?;
    let mode = mode_of(&cfg, &trace)?;
    let (ia, ib) = match groups {
        Some([a, b]) => (group_index(&cfg, Some(a))?, group_index(&cfg, Some(b))?),
        _ if cfg.group_names.len() >= 2 => (0, 1),
        _ => return Err(invalid("the configuration needs two groups")),
    };
    let fa = fixed_group(&cfg, ia, &mode)?;
    let fb = fixed_group(&cfg, ib, &mode)?;
    let opts = ModeFitOptions { max_count, execution: ctx.exec, ..Default::default() };
    let fit = fit_two_modes(&trace, &mode, &fa, &fb, &opts)?;
    summarize("two groups", &fit);
    ctx.write_json(&ctx.out_dir(), "fit_two_modes.json", &json!({ "mode": mode.index, "fit": fit }))
}

fn cmd_fit_dispersive(ctx: &Context, file: &Path, group: Option<&str>, free: Option<usize>, max_count: usize) -> Outcome {
    let cfg = ctx.config()?;
    let trace = load(file)?;
    let mode = mode_of(&cfg, &trace)?;
    let fixed = fixed_group(&cfg, group_index(&cfg, group)?, &mode)?;
    let free = match free {
        Some(count) => DispersiveFree::Coupling { count },
        None => DispersiveFree::Count,
    };
    let opts = ModeFitOptions { max_count, execution: ctx.exec, ..Default::default() };
    let fit = fit_dispersive(&trace, &mode, &fixed, free, &opts)?;
    summarize("dispersive", &fit);
    ctx.write_json(&ctx.out_dir(), "fit_dispersive.json", &json!({ "mode": mode.index, "fit": fit }))
}

fn read_lineshape(path: &Path) -> Result<(Vec<f64>, Vec<f64>), Failure> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let (mut f, mut a) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(|c: char| c.is_ascii_alphabetic()) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |s: &str| s.parse::<f64>().map_err(|_| invalid(format!("{}:{}: bad number `{s}`", path.display(), i + 1)));
        if cols.len() != 2 {
            return Err(invalid(format!("{}:{}: expected two columns", path.display(), i + 1)));
        }
        f.push(std::f64::consts::TAU * parse(cols[0])?);
        a.push(parse(cols[1])?);
    }
    Ok((f, a))
}

fn cmd_fit_lorentzian(ctx: &Context, file: &Path) -> Outcome {
    let (freqs, amps) = read_lineshape(file)?;
    let fit = fit_lorentzian(&freqs, &amps)?;
    info!(
        "linewidth {:.4} kHz at {:.6} GHz",
        to_mhz(fit.value("width")) * 1e3,
        to_mhz(fit.value("center")) * 1e-3
    );
    ctx.write_json(&ctx.out_dir(), "fit_lorentzian.json", &json!({ "fit": fit }))
}

fn cmd_oracle(ctx: &Context, fock_cutoff: usize) -> Outcome {
    let cfg = ctx.config()?;
    let mode = cfg.resonators[&cfg.modes[0]];
    let drive = cfg.drive.for_mode(&mode).map_err(invalid)?;
    let fluxes = cfg.flux_grid();
    let report = compare_semiclassical(&cfg.ensemble, &mode, &drive, fock_cutoff, &fluxes, ctx.exec)
        .map_err(invalid)?;
    info!(
        "max |Δφ| = {:.3e} rad, max relative amplitude difference {:.3e}, peak |φ| {:.3e} rad",
        report.max_phase_difference, report.max_relative_amplitude_difference, report.peak_phase
    );
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(invalid)?;
    let mut csv = String::from("flux_phi0,oracle_phase_rad,semiclassical_phase_rad,oracle_amplitude,semiclassical_amplitude\n");
    for p in &report.points {
        csv += &format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            p.abscissa, p.oracle_phase, p.semiclassical_phase, p.oracle_amplitude, p.semiclassical_amplitude
        );
    }
    let path = dir.join(format!("{}_oracle_mode{}.csv", cfg.output_prefix, mode.index));
    fs::write(&path, csv).map_err(invalid)?;
    info!("wrote {}", path.display());
    ctx.write_json(
        dir,
        &format!("{}_oracle_mode{}.json", cfg.output_prefix, mode.index),
        &json!({
            "mode": mode.index,
            "fock_cutoff": fock_cutoff,
            "max_phase_difference": report.max_phase_difference,
            "max_relative_amplitude_difference": report.max_relative_amplitude_difference,
            "peak_phase": report.peak_phase,
        }),
    )
}

fn cmd_reproduce(ctx: &Context, which: &str) -> Outcome {
    let scenarios: Vec<Scenario> = if which.eq_ignore_ascii_case("all") {
        Scenario::ALL.to_vec()
    } else {
        vec![which.parse().map_err(Failure::Invalid)?]
    };
    let seed = ctx.global.seed.unwrap_or(0);
    let dir = ctx.out_dir();
    let mut all_pass = true;
    for sc in scenarios {
        let report = reproduce_paper(sc, seed, ctx.exec).map_err(|e| Failure::NotConverged(e.to_string()))?;
        let cfg = report.config.as_ref().expect("reproduce returns its config");
        for p in write_traces(&report.traces, &dir, &cfg.output_prefix, ctx.unit()).map_err(invalid)? {
            info!("wrote {}", p.display());
        }
        for c in &report.checks {
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            let tol = if c.tolerance == 0.0 { "exact".to_string() } else { format!("±{:.0}%", 100.0 * c.tolerance) };
            let unit = if c.unit.is_empty() { String::new() } else { format!(" {}", c.unit) };
            info!(
                "[{sc}] {verdict} {} = {:.4}{unit} (target {}{unit}, {tol})",
                c.name, c.recovered, c.target
            );
        }
        all_pass &= report.passed();
        ctx.write_json(&dir, &format!("{}_report.json", sc.name().replace('-', "_")), &serde_json::to_value(&report).map_err(invalid)?)?;
    }
    if all_pass {
        Ok(())
    } else {
        Err(Failure::NotConverged("recovered parameters miss their targets".into()))
    }
}

fn cmd_thermal(ctx: &Context, frequency: &str, temperature: &str) -> Outcome {
    let omega = parse_quantity(frequency, Dimension::Frequency).map_err(invalid)?;
    let temp = parse_quantity(temperature, Dimension::Temperature).map_err(invalid)?;
    let mode = ResonatorMode::new(1, omega, 1e-6 * omega).map_err(invalid)?;
    let n = thermal_photon_number(&mode, temp).map_err(invalid)?;
    info!("n_th = {n:.6e}");
    ctx.write_json(
        &ctx.out_dir(),
        "thermal.json",
        &json!({ "frequency_hz": omega / std::f64::consts::TAU, "temperature_k": temp, "n_th": n }),
    )
}

fn run(cli: Cli) -> Outcome {
    let exec = if cli.global.sequential { Execution::Sequential } else { Execution::default() };
    let ctx = Context { global: cli.global, exec };
    match &cli.command {
        Command::Sweep => cmd_sweep(&ctx),
        Command::FitSpectrum { traces } => cmd_fit_spectrum(&ctx, traces),
        Command::FitMode { trace, group, free_coupling, max_count } => {
            cmd_fit_mode(&ctx, trace, group.as_deref(), *free_coupling, *max_count)
        }
        Command::FitTwoModes { trace, groups, max_count } => {
            cmd_fit_two(&ctx, trace, groups.as_deref(), *max_count)
        }
        Command::FitDispersive { trace, group, free_coupling, max_count } => {
            cmd_fit_dispersive(&ctx, trace, group.as_deref(), *free_coupling, *max_count)
        }
        Command::FitLorentzian { data } => cmd_fit_lorentzian(&ctx, data),
        Command::OracleCompare { fock_cutoff } => cmd_oracle(&ctx, *fock_cutoff),
        Command::Reproduce { scenario } => cmd_reproduce(&ctx, scenario),
        Command::Thermal { frequency, temperature } => cmd_thermal(&ctx, frequency, temperature),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Invalid(m) | Failure::NotConverged(m) => error!("{m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
