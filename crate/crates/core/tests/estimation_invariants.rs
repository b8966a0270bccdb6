use qmeta::config::SweepConfig;
use qmeta::estimation::{
    detect_crossings, fit_resonant_gamma, fit_resonant_mode, fit_spectrum, fit_two_modes,
    FixedGroup, ModeFitOptions, SolverSettings,
};
use qmeta::model::{transition_frequency, FluxBias};
use qmeta::sweep::run_sweep;
use qmeta::trace::PhaseTrace;
use qmeta::units::{mhz, to_ghz};
use qmeta::Execution;

fn s_config(count: usize, gamma_mhz: f64, sigma: &str, seed: u64) -> SweepConfig {
    SweepConfig::parse(&format!(
        "flux.start = -0.02
flux.stop = 0.02
flux.steps = 2001
sweep.modes = 3
geometry.mutual_inductance = 0.5pH
geometry.resonator_inductance = 11nH
group.S.delta = 5.6GHz
group.S.current = 74nA
group.S.gamma_phi = {gamma_mhz}MHz
group.S.count = {count}
noise.sigma = {sigma}
noise.seed = {seed}
"
    ))
    .unwrap()
}

fn trace_and_fixed(cfg: &SweepConfig) -> (PhaseTrace, FixedGroup) {
    let trace = run_sweep(cfg, Execution::default()).unwrap().remove(0);
    let fixed = FixedGroup::from_group(&cfg.ensemble.groups()[0], &cfg.resonators[&3]).unwrap();
    (trace, fixed)
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn noise_free_round_trip_is_exact() {
    let cfg = s_config(8, 53.0, "0", 0);
    let (trace, fixed) = trace_and_fixed(&cfg);
    let fit = fit_resonant_mode(&trace, &cfg.resonators[&3], &fixed, &ModeFitOptions::default()).unwrap();
    assert_eq!(fit.value("n"), 8.0);
    assert!(rel(fit.value("gamma_phi"), mhz(53.0)) < 1e-3);
}

#[test]
fn noisy_count_recovery_rate() {
    let opts = ModeFitOptions::default();
    let mut hits = 0;
    let mut covered = 0;
    for seed in 0..100 {
        let cfg = s_config(8, 53.0, "0.5mrad", seed);
        let (trace, fixed) = trace_and_fixed(&cfg);
        let fit = fit_resonant_mode(&trace, &cfg.resonators[&3], &fixed, &opts).unwrap();
        if fit.value("n") == 8.0 {
            hits += 1;
        }
        let at_truth = fit_resonant_gamma(&trace, &cfg.resonators[&3], &fixed, 8, SolverSettings::default()).unwrap();
        if (at_truth.value("gamma_phi") - mhz(53.0)).abs() <= at_truth.uncertainty("gamma_phi") {
            covered += 1;
        }
    }
    assert!(hits >= 95, "n recovered in {hits}/100 trials");
    assert!(covered >= 60, "1-sigma interval covered the truth in {covered}/100 trials");
}

fn detuning_at(cfg: &SweepConfig, x: f64) -> f64 {
    transition_frequency(&cfg.ensemble.groups()[0].qubit, FluxBias::new(x).unwrap()) - cfg.resonators[&3].omega
}

#[test]
fn periphery_fixes_count_independent_of_dephasing() {
    let gamma = mhz(53.0);
    let cfg = s_config(8, 53.0 * 1.2, "0", 0);
    let (trace, fixed) = trace_and_fixed(&cfg);
    let periphery = trace.filtered(|s| detuning_at(&cfg, s.flux).abs() > 5.0 * gamma).unwrap();
    let fit = fit_resonant_mode(&periphery, &cfg.resonators[&3], &fixed, &ModeFitOptions::default()).unwrap();
    assert_eq!(fit.value("n"), 8.0);
}

#[test]
fn centre_ties_dephasing_to_count() {
    let gamma = mhz(53.0);
    let cfg = s_config(8, 53.0, "0", 0);
    let (trace, fixed) = trace_and_fixed(&cfg);
    let centre = trace.filtered(|s| detuning_at(&cfg, s.flux).abs() < gamma).unwrap();
    let mode = &cfg.resonators[&3];
    let base = fit_resonant_gamma(&centre, mode, &fixed, 8, SolverSettings::default()).unwrap();
    assert!(rel(base.value("gamma_phi"), gamma) < 1e-6);
    for n in [7, 9] {
        let shifted = fit_resonant_gamma(&centre, mode, &fixed, n, SolverSettings::default()).unwrap();
        let change = rel(shifted.value("gamma_phi"), base.value("gamma_phi"));
        assert!(change > 0.05, "n = {n}: dephasing moved by {:.2}%", 100.0 * change);
    }
}

#[test]
fn split_ensembles_add_up_to_single_ensemble() {
    let s = s_config(8, 53.0, "0", 0);
    let (trace_s, fixed_s) = trace_and_fixed(&s);
    let single = fit_resonant_mode(&trace_s, &s.resonators[&3], &fixed_s, &ModeFitOptions::default()).unwrap();

    let ab = SweepConfig::parse(
        "flux.start = -0.02
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
",
    )
    .unwrap();
    let mode = ab.resonators[&3];
    let trace = run_sweep(&ab, Execution::default()).unwrap().remove(0);
    let fa = FixedGroup::from_group(&ab.ensemble.groups()[0], &mode).unwrap();
    let fb = FixedGroup::from_group(&ab.ensemble.groups()[1], &mode).unwrap();
    let opts = ModeFitOptions { max_count: 10, ..Default::default() };
    let two = fit_two_modes(&trace, &mode, &fa, &fb, &opts).unwrap();
    assert_eq!((two.value("n_a"), two.value("n_b")), (4.0, 4.0));
    assert!(rel(two.value("gamma_phi_a"), mhz(54.0)) < 1e-3);
    assert!(rel(two.value("gamma_phi_b"), mhz(41.0)) < 1e-3);
    assert_eq!(two.value("n_a") + two.value("n_b"), single.value("n"));
}

#[test]
fn spectrum_of_ensemble_a_from_three_harmonics() {
    let cfg = SweepConfig::parse(
        "flux.start = -0.035
flux.stop = 0.035
flux.steps = 3501
sweep.modes = 3, 4, 5
geometry.mutual_inductance = 0.5pH
geometry.resonator_inductance = 11nH
group.A.delta = 5.3GHz
group.A.current = 76nA
group.A.gamma_phi = 54MHz
group.A.count = 4
",
    )
    .unwrap();
    let traces = run_sweep(&cfg, Execution::default()).unwrap();
    let mut points = Vec::new();
    for t in &traces {
        let found = detect_crossings(t, cfg.resonators[&t.mode()].omega).unwrap();
        assert_eq!(found.len(), 2, "mode {}", t.mode());
        assert!((found[0].flux + found[1].flux).abs() < 1e-6);
        points.extend(found);
    }
    let fit = fit_spectrum(&points).unwrap();
    assert!(rel(to_ghz(fit.value("delta")), 5.3) < 1e-3, "{}", to_ghz(fit.value("delta")));
    assert!(rel(fit.value("persistent_current"), 76e-9) < 1e-3);
    assert!(fit.uncertainty("delta") >= 0.0);
}
