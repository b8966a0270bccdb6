use super::{solve_least_squares, FitError, FitResult, LeastSquaresProblem};

/// h / (1 + (2(ω − ω0)/κ)²) + b, with κ the full width at half maximum.
pub fn lorentzian(omega: f64, center: f64, width: f64, height: f64, baseline: f64) -> f64 {
    let u = 2.0 * (omega - center) / width;
    height / (1.0 + u * u) + baseline
}

fn is_monotone(ys: &[f64]) -> bool {
    ys.windows(2).all(|w| w[1] >= w[0]) || ys.windows(2).all(|w| w[1] <= w[0])
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Half-maximum crossing walking outward from `peak` in direction `step`.
fn half_crossing(xs: &[f64], excess: &[f64], peak: usize, forward: bool) -> Option<f64> {
    let half = 0.5 * excess[peak];
    let mut i = peak;
    loop {
        let next = if forward {
            if i + 1 >= xs.len() {
                return None;
            }
            i + 1
        } else {
            i.checked_sub(1)?
        };
        if excess[next] <= half {
            let t = (excess[i] - half) / (excess[i] - excess[next]);
            return Some(xs[i] + t * (xs[next] - xs[i]));
        }
        i = next;
    }
}

/// Fit a single Lorentzian peak (or dip) with a constant baseline.
///
/// Returns parameters `center` and `width` (rad/s, width as FWHM), `height`
/// and `baseline` in the units of `amplitudes`.
pub fn fit_lorentzian(freqs: &[f64], amplitudes: &[f64]) -> Result<FitResult, FitError> {
    if freqs.len() != amplitudes.len() {
        return Err(FitError::InvalidProblem("frequency and amplitude lengths differ".into()));
    }
    if freqs.len() < 8 {
        return Err(FitError::InsufficientData(format!(
            "{} samples, at least 8 required",
            freqs.len()
        )));
    }
    if freqs.iter().chain(amplitudes).any(|v| !v.is_finite()) {
        return Err(FitError::NonFiniteResidual);
    }
    if is_monotone(amplitudes) {
        return Err(FitError::NoPeak);
    }

    let n = freqs.len();
    let edge = (n / 10).max(2);
    let mut edges: Vec<f64> = amplitudes[..edge].to_vec();
    edges.extend_from_slice(&amplitudes[n - edge..]);
    let base0 = median(edges);

    let (imax, vmax) = amplitudes
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let (imin, vmin) = amplitudes
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let (peak, sign) = if vmax - base0 >= base0 - vmin { (imax, 1.0) } else { (imin, -1.0) };
    if peak == 0 || peak == n - 1 {
        return Err(FitError::NoPeak);
    }
    let excess: Vec<f64> = amplitudes.iter().map(|a| sign * (a - base0)).collect();
    let height0 = sign * excess[peak];

    let left = half_crossing(freqs, &excess, peak, false);
    let right = half_crossing(freqs, &excess, peak, true);
    let width0 = match (left, right) {
        (Some(l), Some(r)) => (r - l).abs(),
        (Some(l), None) => 2.0 * (freqs[peak] - l).abs(),
        (None, Some(r)) => 2.0 * (r - freqs[peak]).abs(),
        (None, None) => return Err(FitError::NoPeak),
    };
    let span = (freqs[n - 1] - freqs[0]).abs();
    if !(width0 > 0.0) || span < 3.0 * width0 {
        return Err(FitError::InsufficientData(
            "frequency span must cover at least three linewidths".into(),
        ));
    }

    // work in units of the initial width around the data midpoint
    let mid = 0.5 * (freqs[0] + freqs[n - 1]);
    let amp_scale = height0.abs();
    let us: Vec<f64> = freqs.iter().map(|f| (f - mid) / width0).collect();
    let ys: Vec<f64> = amplitudes.iter().map(|a| a / amp_scale).collect();
    let initial = vec![
        (freqs[peak] - mid) / width0,
        1.0,
        height0 / amp_scale,
        base0 / amp_scale,
    ];
    let u_span = us.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - us.iter().cloned().fold(f64::INFINITY, f64::min);
    let problem = LeastSquaresProblem::new(initial, |p| {
        us.iter()
            .zip(&ys)
            .map(|(&u, &y)| lorentzian(u, p[0], p[1], p[2], p[3]) - y)
            .collect()
    })
    .with_bounds(
        vec![f64::NEG_INFINITY, 1e-6, f64::NEG_INFINITY, f64::NEG_INFINITY],
        vec![f64::INFINITY, 10.0 * u_span, f64::INFINITY, f64::INFINITY],
    )
    .with_names(["center", "width", "height", "baseline"]);

    let mut fit = solve_least_squares(&problem)?;
    fit.rescale(0, "center", width0);
    fit.parameters[0].value += mid;
    fit.rescale(1, "width", width0);
    fit.rescale(2, "height", amp_scale);
    fit.rescale(3, "baseline", amp_scale);
    fit.residual_norm *= amp_scale;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{ghz, khz};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn grid(center: f64, width: f64, n: usize, half_span: f64) -> Vec<f64> {
        (0..n)
            .map(|i| center - half_span * width + 2.0 * half_span * width * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn recovers_fundamental_linewidth() {
        let (w0, k) = (ghz(2.594), khz(55.5));
        let xs = grid(w0, k, 101, 5.0);
        let ys: Vec<f64> = xs.iter().map(|&x| lorentzian(x, w0, k, 1.0, 0.05)).collect();
        let fit = fit_lorentzian(&xs, &ys).unwrap();
        assert!((fit.value("width") - k).abs() / k < 1e-3);
        assert!((fit.value("center") - w0).abs() < 1e-3 * k);
    }

    #[test]
    fn symmetric_data_centres_on_midpoint() {
        let xs: Vec<f64> = (0..41).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| lorentzian(x, 20.0, 4.0, 2.0, 0.0)).collect();
        let fit = fit_lorentzian(&xs, &ys).unwrap();
        assert!((fit.value("center") - 20.0).abs() < 1e-9);
    }

    #[test]
    fn dips_are_fitted_too() {
        let xs: Vec<f64> = (0..61).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| lorentzian(x, 33.0, 5.0, -0.7, 1.0)).collect();
        let fit = fit_lorentzian(&xs, &ys).unwrap();
        assert!((fit.value("height") + 0.7).abs() < 1e-8);
        assert!((fit.value("width") - 5.0).abs() < 1e-8);
    }

    #[test]
    fn noisy_linewidth_statistics() {
        let (w0, k) = (ghz(7.782), khz(715.0));
        let xs = grid(w0, k, 200, 5.0);
        let clean: Vec<f64> = xs.iter().map(|&x| lorentzian(x, w0, k, 1.0, 0.0)).collect();
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut worst = 0.0f64;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ys: Vec<f64> = clean.iter().map(|y| y + noise.sample(&mut rng)).collect();
            let fit = fit_lorentzian(&xs, &ys).unwrap();
            worst = worst.max((fit.value("width") - k).abs() / k);
        }
        assert!(worst < 0.02, "worst relative width error {worst}");
    }

    #[test]
    fn monotone_data_has_no_peak() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * 0.3).collect();
        assert_eq!(fit_lorentzian(&xs, &ys), Err(FitError::NoPeak));
    }

    #[test]
    fn too_few_samples() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [0.0, 1.0, 3.0, 1.0, 0.0];
        assert!(matches!(fit_lorentzian(&xs, &ys), Err(FitError::InsufficientData(_))));
    }

    #[test]
    fn narrow_window_rejected() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| lorentzian(x, 1.0, 3.0, 1.0, 0.0)).collect();
        assert!(fit_lorentzian(&xs, &ys).is_err());
    }
}
