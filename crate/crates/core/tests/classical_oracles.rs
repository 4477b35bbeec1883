use mph_core::classical::{
    self, fit_ar, fit_smoothing_params, linear_trend, ClassicalError, ClassicalForecaster as F, Method,
    SeasonalInit,
};
use mph_core::dataset::FeatureMatrix;
use mph_core::seed;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

const FIXTURE: [f64; 10] = [12.0, 15.0, 11.0, 18.0, 21.0, 17.0, 24.0, 22.0, 27.0, 30.0];

/// Textbook simple exponential smoothing: forecasts of y[1..=n].
fn ses_oracle(y: &[f64], alpha: f64) -> Vec<f64> {
    let mut level = y[0];
    let mut out = Vec::new();
    for &v in &y[1..] {
        out.push(level);
        level = alpha * v + (1.0 - alpha) * level;
    }
    out.push(level);
    out
}

/// Holt's linear method started from the first difference: forecasts of y[2..=n].
fn holt_oracle(y: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
    let (mut l, mut b) = (y[1], y[1] - y[0]);
    let mut out = Vec::new();
    for &v in &y[2..] {
        out.push(l + b);
        let l_new = alpha * v + (1.0 - alpha) * (l + b);
        b = beta * (l_new - l) + (1.0 - beta) * b;
        l = l_new;
    }
    out.push(l + b);
    out
}

fn one_step_forecasts(f: &F, y: &[f64], first: usize) -> Vec<f64> {
    (first..=y.len()).map(|t| f.forecast_one_step(&y[..t], None, None).unwrap()).collect()
}

#[test]
fn ses_matches_recursive_oracle() {
    for alpha in [0.1, 0.35, 0.8, 1.0] {
        let got = one_step_forecasts(&F::Ses { alpha }, &FIXTURE, 1);
        for (g, o) in got.iter().zip(ses_oracle(&FIXTURE, alpha)) {
            assert!((g - o).abs() <= 1e-12, "alpha {alpha}: {g} vs {o}");
        }
    }
}

#[test]
fn holt_matches_recursive_oracle() {
    for (alpha, beta) in [(0.2, 0.1), (0.5, 0.5), (0.9, 0.3)] {
        let got = one_step_forecasts(&F::Holt { alpha, beta }, &FIXTURE, 2);
        let oracle = holt_oracle(&FIXTURE, alpha, beta);
        assert_eq!(got.len(), oracle.len());
        for (g, o) in got.iter().zip(oracle) {
            assert!((g - o).abs() <= 1e-12, "({alpha}, {beta}): {g} vs {o}");
        }
    }
}

#[test]
fn holt_with_unit_smoothing_extrapolates_a_line() {
    let y: Vec<f64> = (0..12).map(|t| 2.0 * t as f64).collect();
    let f = F::Holt { alpha: 1.0, beta: 1.0 };
    for t in 2..=y.len() {
        assert_eq!(f.forecast_one_step(&y[..t], None, None).unwrap(), 2.0 * t as f64);
    }
}

#[test]
fn naive_and_moving_average_definitions() {
    assert_eq!(F::Naive.forecast_one_step(&FIXTURE, None, None).unwrap(), 30.0);
    let ma = F::MovingAverage { window: 3 };
    assert_eq!(ma.forecast_one_step(&FIXTURE, None, None).unwrap(), (22.0 + 27.0 + 30.0) / 3.0);
    assert_eq!(
        ma.forecast_one_step(&FIXTURE[..2], None, None),
        Err(ClassicalError::InsufficientHistory {
            method: Method::MovingAverage,
            required: 3,
            found: 2
        })
    );
}

/// Two-line theta forecast of `a + b t` after `n` points: half the exact line
/// plus half of SES (started at `a`) on the same line.
fn theta_on_line(a: f64, b: f64, n: usize, alpha: f64) -> f64 {
    let lag = b * (1.0 - alpha) / alpha * (1.0 - (1.0 - alpha).powi(n as i32 - 1));
    let ses_level = a + b * (n - 1) as f64 - lag;
    0.5 * (a + b * n as f64) + 0.5 * ses_level
}

#[test]
fn theta_closed_form_on_a_line() {
    let (a, b) = (4.0, 1.5);
    for n in [2usize, 5, 20, 60] {
        let y: Vec<f64> = (0..n).map(|t| a + b * t as f64).collect();
        let (ia, ib) = linear_trend(&y);
        assert!((ia - a).abs() <= 1e-9 && (ib - b).abs() <= 1e-9);
        for alpha in [0.05, 0.3, 0.7, 1.0] {
            let got = F::Theta { alpha }.forecast_one_step(&y, None, None).unwrap();
            let want = theta_on_line(a, b, n, alpha);
            assert!((got - want).abs() <= 1e-9, "n {n} alpha {alpha}: {got} vs {want}");
        }
        // With alpha = 1 the forecast trails the line by half a step.
        let got = F::Theta { alpha: 1.0 }.forecast_one_step(&y, None, None).unwrap();
        assert!((got - (a + b * n as f64 - b / 2.0)).abs() <= 1e-9);
    }
}

#[test]
fn theta_is_exact_on_a_constant_series() {
    let y = vec![7.5; 30];
    for alpha in [0.1, 0.5, 1.0] {
        assert!((F::Theta { alpha }.forecast_one_step(&y, None, None).unwrap() - 7.5).abs() <= 1e-12);
    }
}

#[test]
fn ar1_coefficient_is_recovered() {
    for (c, phi) in [(5.0, 0.6), (0.0, 0.9), (2.0, -0.5)] {
        let mut y = vec![40.0];
        for t in 1..80 {
            y.push(c + phi * y[t - 1]);
        }
        let m = fit_ar(&y, 1, 0, None).unwrap();
        assert!((m.phi[0] - phi).abs() <= 1e-6, "phi {phi}: {}", m.phi[0]);
        assert!((m.intercept - c).abs() <= 1e-6, "c {c}: {}", m.intercept);
    }
}

#[test]
fn arx_recovers_exogenous_effect() {
    let mut rng = seed::rng(4);
    let n = 120;
    let xcol: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.random_bool(0.3)))).collect();
    let mut y = vec![10.0];
    for t in 1..n {
        y.push(2.0 + 0.5 * y[t - 1] + 3.0 * xcol[t]);
    }
    let x = FeatureMatrix::from_columns(vec!["promotion".into()], &[xcol]).unwrap();
    let m = fit_ar(&y, 1, 0, Some(&x)).unwrap();
    assert!((m.phi[0] - 0.5).abs() <= 1e-6);
    assert!((m.beta[0] - 3.0).abs() <= 1e-6);
    assert_eq!(
        F::Arx { p: 1, d: 0 }.forecast_one_step(&y, None, None),
        Err(ClassicalError::MissingExog(Method::Arx))
    );
}

fn random_walk(n: usize, seed_value: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed_value);
    let mut y = vec![100.0];
    for _ in 1..n {
        let step: f64 = rng.sample(StandardNormal);
        y.push(y.last().unwrap() + step);
    }
    y
}

#[test]
fn ses_on_a_random_walk_prefers_heavy_updating() {
    for s in 0..3 {
        let F::Ses { alpha } = fit_smoothing_params(Method::Ses, &random_walk(500, s)).unwrap() else {
            panic!("SES tuning returns SES");
        };
        assert!(alpha >= 0.9, "seed {s}: alpha {alpha}");
    }
}

#[test]
fn holt_beats_ses_on_a_noisy_line() {
    let mut rng = seed::rng(8);
    let y: Vec<f64> = (0..200).map(|t| 3.0 * t as f64 + rng.sample::<f64, _>(StandardNormal)).collect();
    let ses = fit_smoothing_params(Method::Ses, &y).unwrap().in_sample_mae(&y, None).unwrap();
    let holt = fit_smoothing_params(Method::Holt, &y).unwrap().in_sample_mae(&y, None).unwrap();
    assert!(holt < ses, "holt {holt} vs ses {ses}");
}

#[test]
fn benchmark_scores_every_method() {
    let y = random_walk(120, 5);
    let x = FeatureMatrix::from_columns(vec!["one".into()], &[(0..120).map(|t| (t % 2) as f64).collect()]).unwrap();
    let holdout = classical::default_holdout(y.len());
    assert_eq!(holdout, 24);
    let scores = classical::benchmark(&Method::ALL, &y, Some(&x), holdout).unwrap();
    assert_eq!(scores.iter().map(|s| s.method).collect::<Vec<_>>(), Method::ALL.to_vec());
    assert!(scores.iter().all(|s| s.mae.is_finite() && s.mae >= 0.0));
    assert!(F::Naive.rolling_origin_mae(&y, None, y.len()).is_err());
}

proptest! {
    #[test]
    fn ses_with_unit_alpha_is_naive(y in proptest::collection::vec(-1e3f64..1e3, 1..40)) {
        let ses = F::Ses { alpha: 1.0 }.forecast_one_step(&y, None, None).unwrap();
        let naive = F::Naive.forecast_one_step(&y, None, None).unwrap();
        prop_assert_eq!(ses, naive);
        if y.len() > 1 {
            prop_assert_eq!(
                F::Ses { alpha: 1.0 }.in_sample_mae(&y, None).unwrap(),
                F::Naive.in_sample_mae(&y, None).unwrap()
            );
        }
    }

    #[test]
    fn flat_holt_winters_without_seasonal_updates_is_holt(
        y in proptest::collection::vec(0.0f64..500.0, 2..60),
        alpha in 0.01f64..1.0,
        beta in 0.01f64..1.0,
        period in 2usize..10,
    ) {
        let hw = F::HoltWintersAdditive { alpha, beta, gamma: 0.0, period, init: SeasonalInit::Flat };
        let holt = F::Holt { alpha, beta };
        for t in hw.min_history()..=y.len() {
            let a = hw.forecast_one_step(&y[..t], None, None).unwrap();
            let b = holt.forecast_one_step(&y[..t], None, None).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "t {}: {} vs {}", t, a, b);
        }
    }
}
