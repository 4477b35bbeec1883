//! Univariate comparison forecasters: naive, moving average, exponential
//! smoothing (simple, Holt, additive Holt-Winters), Theta and least-squares
//! autoregressions with optional exogenous regressors.
//!
//! Every method is expressed as a one-step forecast path: entry `t` of the
//! path forecasts `y[t]` from `y[..t]` with fixed parameters. Single
//! forecasts, in-sample MAE and rolling-origin MAE are all read off that path.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::FeatureMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum ClassicalError {
    #[error("{method} needs at least {required} observations, got {found}")]
    InsufficientHistory {
        method: Method,
        required: usize,
        found: usize,
    },
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("{0} requires exogenous regressors for the history and the forecast step")]
    MissingExog(Method),
    #[error("least-squares fit failed: {0}")]
    Fit(String),
}

pub type Result<T, E = ClassicalError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Naive,
    MovingAverage,
    Ses,
    Holt,
    HoltWintersAdditive,
    Theta,
    Ar,
    Arx,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Naive,
        Method::MovingAverage,
        Method::Ses,
        Method::Holt,
        Method::HoltWintersAdditive,
        Method::Ar,
        Method::Theta,
        Method::Arx,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Method::Naive => "Naive forecasting",
            Method::MovingAverage => "Moving average",
            Method::Ses => "Simple exponential smoothing",
            Method::Holt => "Holt's linear trend",
            Method::HoltWintersAdditive => "Holt-Winters additive",
            Method::Theta => "Theta",
            Method::Ar => "AR (ARIMA stand-in)",
            Method::Arx => "ARX (ARIMAX stand-in)",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeasonalInit {
    /// Level and seasonal indices from the first season, trend from the
    /// difference between the first two seasonal means.
    Classical,
    /// Zero seasonal indices with Holt's level/trend start.
    Flat,
}

pub const DEFAULT_WINDOW: usize = 7;
pub const DEFAULT_PERIOD: usize = 7;
pub const DEFAULT_AR_ORDER: usize = 7;

/// A classical method together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ClassicalForecaster {
    Naive,
    MovingAverage {
        window: usize,
    },
    Ses {
        alpha: f64,
    },
    Holt {
        alpha: f64,
        beta: f64,
    },
    HoltWintersAdditive {
        alpha: f64,
        beta: f64,
        gamma: f64,
        period: usize,
        init: SeasonalInit,
    },
    Theta {
        alpha: f64,
    },
    Ar {
        p: usize,
        d: usize,
    },
    Arx {
        p: usize,
        d: usize,
    },
}

/// Least-squares autoregression on a `d`-times differenced series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub p: usize,
    pub d: usize,
    pub intercept: f64,
    /// `phi[i]` multiplies lag `i + 1`.
    pub phi: Vec<f64>,
    /// Coefficients of the exogenous columns (empty for plain AR).
    pub beta: Vec<f64>,
}

/// Parameters estimated from data before the forecast path is run.
#[derive(Debug, Clone, PartialEq)]
enum Estimate {
    None,
    Trend { intercept: f64, slope: f64 },
    Ar(ArModel),
}

fn unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ClassicalError::Invalid(format!("{name} = {v} outside [0, 1]")))
    }
}

impl ClassicalForecaster {
    pub fn method(&self) -> Method {
        match self {
            ClassicalForecaster::Naive => Method::Naive,
            ClassicalForecaster::MovingAverage { .. } => Method::MovingAverage,
            ClassicalForecaster::Ses { .. } => Method::Ses,
            ClassicalForecaster::Holt { .. } => Method::Holt,
            ClassicalForecaster::HoltWintersAdditive { .. } => Method::HoltWintersAdditive,
            ClassicalForecaster::Theta { .. } => Method::Theta,
            ClassicalForecaster::Ar { .. } => Method::Ar,
            ClassicalForecaster::Arx { .. } => Method::Arx,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ClassicalForecaster::Naive => Ok(()),
            ClassicalForecaster::MovingAverage { window: 0 } => {
                Err(ClassicalError::Invalid("window must be at least 1".into()))
            }
            ClassicalForecaster::MovingAverage { .. } => Ok(()),
            ClassicalForecaster::Ses { alpha } | ClassicalForecaster::Theta { alpha } => unit("alpha", alpha),
            ClassicalForecaster::Holt { alpha, beta } => {
                unit("alpha", alpha)?;
                unit("beta", beta)
            }
            ClassicalForecaster::HoltWintersAdditive {
                alpha,
                beta,
                gamma,
                period,
                ..
            } => {
                unit("alpha", alpha)?;
                unit("beta", beta)?;
                unit("gamma", gamma)?;
                if period < 2 {
                    return Err(ClassicalError::Invalid("season length must be at least 2".into()));
                }
                Ok(())
            }
            ClassicalForecaster::Ar { p, d } | ClassicalForecaster::Arx { p, d } => {
                if p == 0 {
                    return Err(ClassicalError::Invalid("AR order p must be at least 1".into()));
                }
                if d > 1 {
                    return Err(ClassicalError::Invalid(format!("differencing order {d} not in {{0, 1}}")));
                }
                Ok(())
            }
        }
    }

    /// Shortest history for which a forecast is defined.
    pub fn min_history(&self) -> usize {
        match *self {
            ClassicalForecaster::Naive | ClassicalForecaster::Ses { .. } => 1,
            ClassicalForecaster::MovingAverage { window } => window,
            ClassicalForecaster::Holt { .. } | ClassicalForecaster::Theta { .. } => 2,
            ClassicalForecaster::HoltWintersAdditive { period, .. } => 2 * period,
            ClassicalForecaster::Ar { p, d } | ClassicalForecaster::Arx { p, d } => p + d + 1,
        }
    }

    fn check_history(&self, n: usize) -> Result<()> {
        let required = self.min_history();
        if n < required {
            return Err(ClassicalError::InsufficientHistory {
                method: self.method(),
                required,
                found: n,
            });
        }
        Ok(())
    }

    fn estimate(&self, series: &[f64], exog: Option<&FeatureMatrix>) -> Result<Estimate> {
        match *self {
            ClassicalForecaster::Theta { .. } => {
                let (intercept, slope) = linear_trend(series);
                Ok(Estimate::Trend { intercept, slope })
            }
            ClassicalForecaster::Ar { p, d } => fit_ar(series, p, d, None).map(Estimate::Ar),
            ClassicalForecaster::Arx { p, d } => {
                let x = exog.ok_or(ClassicalError::MissingExog(Method::Arx))?;
                fit_ar(series, p, d, Some(x)).map(Estimate::Ar)
            }
            _ => Ok(Estimate::None),
        }
    }

    /// Forecast of the observation following `history`.
    ///
    /// ARX needs `exog_history` aligned with `history` and `exog_next` for the
    /// forecast step; other methods ignore both.
    pub fn forecast_one_step(
        &self,
        history: &[f64],
        exog_history: Option<&FeatureMatrix>,
        exog_next: Option<&[f64]>,
    ) -> Result<f64> {
        self.validate()?;
        self.check_history(history.len())?;
        if self.method() == Method::Arx && (exog_history.is_none() || exog_next.is_none()) {
            return Err(ClassicalError::MissingExog(Method::Arx));
        }
        check_exog(exog_history, history.len())?;
        let est = self.estimate(history, exog_history)?;
        let mut x_rows: Option<Vec<&[f64]>> = exog_history.map(|x| x.rows().collect());
        if let (Some(rows), Some(next)) = (x_rows.as_mut(), exog_next) {
            rows.push(next);
        }
        let path = self.path(&est, history, x_rows.as_deref(), history.len() + 1);
        Ok(path[history.len()])
    }

    /// Mean absolute one-step error over every in-sample point with a defined forecast.
    pub fn in_sample_mae(&self, series: &[f64], exog: Option<&FeatureMatrix>) -> Result<f64> {
        self.validate()?;
        self.check_history(series.len())?;
        check_exog(exog, series.len())?;
        let est = self.estimate(series, exog)?;
        let rows: Option<Vec<&[f64]>> = exog.map(|x| x.rows().collect());
        let path = self.path(&est, series, rows.as_deref(), series.len());
        Ok(path_mae(series, &path, 0))
    }

    /// One-step MAE over the last `holdout` points.
    ///
    /// Data-estimated parameters (trend line, AR coefficients) come from the
    /// first `n - holdout` points and stay fixed; only the recursive state
    /// advances through the holdout.
    pub fn rolling_origin_mae(&self, series: &[f64], exog: Option<&FeatureMatrix>, holdout: usize) -> Result<f64> {
        self.validate()?;
        if holdout == 0 || holdout >= series.len() {
            return Err(ClassicalError::Invalid(format!(
                "holdout {holdout} must lie in [1, {})",
                series.len()
            )));
        }
        let n_train = series.len() - holdout;
        self.check_history(n_train)?;
        if self.method() == Method::Arx && exog.is_none() {
            return Err(ClassicalError::MissingExog(Method::Arx));
        }
        check_exog(exog, series.len())?;
        let train_exog = exog.map(|x| x.select_rows(&(0..n_train).collect::<Vec<_>>()));
        let est = self.estimate(&series[..n_train], train_exog.as_ref())?;
        let rows: Option<Vec<&[f64]>> = exog.map(|x| x.rows().collect());
        let path = self.path(&est, series, rows.as_deref(), series.len());
        Ok(path_mae(series, &path, n_train))
    }

    /// `out[t]` forecasts `y[t]` from `y[..t]`; NaN where undefined.
    /// `len` may exceed `y.len()` by one to include the next-step forecast.
    fn path(&self, est: &Estimate, y: &[f64], x: Option<&[&[f64]]>, len: usize) -> Vec<f64> {
        let n = y.len();
        let mut out = vec![f64::NAN; len];
        match *self {
            ClassicalForecaster::Naive => out[1..].copy_from_slice(&y[..len - 1]),
            ClassicalForecaster::MovingAverage { window } => {
                for t in window..len {
                    out[t] = y[t - window..t].iter().sum::<f64>() / window as f64;
                }
            }
            ClassicalForecaster::Ses { alpha } => ses_path(y, alpha, &mut out),
            ClassicalForecaster::Holt { alpha, beta } => {
                let mut level = y[0];
                let mut trend = y[1] - y[0];
                for t in 1..n {
                    if t >= 2 {
                        out[t] = level + trend;
                    }
                    let prev = level;
                    level = alpha * y[t] + (1.0 - alpha) * (level + trend);
                    trend = beta * (level - prev) + (1.0 - beta) * trend;
                }
                if len > n {
                    out[n] = level + trend;
                }
            }
            ClassicalForecaster::HoltWintersAdditive {
                alpha,
                beta,
                gamma,
                period: m,
                init,
            } => {
                let mut season = vec![0.0; m];
                let (mut level, mut trend, start, first_forecast) = match init {
                    SeasonalInit::Flat => (y[0], y[1] - y[0], 1, 2),
                    SeasonalInit::Classical => {
                        let mean1 = y[..m].iter().sum::<f64>() / m as f64;
                        let mean2 = y[m..2 * m].iter().sum::<f64>() / m as f64;
                        for i in 0..m {
                            season[i] = y[i] - mean1;
                        }
                        (mean1, (mean2 - mean1) / m as f64, m, 2 * m)
                    }
                };
                for t in start..n {
                    let s = season[t % m];
                    if t >= first_forecast {
                        out[t] = level + trend + s;
                    }
                    let (prev_level, prev_trend) = (level, trend);
                    level = alpha * (y[t] - s) + (1.0 - alpha) * (level + trend);
                    trend = beta * (level - prev_level) + (1.0 - beta) * trend;
                    season[t % m] = gamma * (y[t] - prev_level - prev_trend) + (1.0 - gamma) * s;
                }
                if len > n {
                    out[n] = level + trend + season[n % m];
                }
            }
            ClassicalForecaster::Theta { alpha } => {
                let Estimate::Trend { intercept, slope } = *est else {
                    unreachable!("theta path without a trend estimate")
                };
                let line = |t: usize| intercept + slope * t as f64;
                let z: Vec<f64> = y.iter().enumerate().map(|(t, v)| 2.0 * v - line(t)).collect();
                let mut ses = vec![f64::NAN; len];
                ses_path(&z, alpha, &mut ses);
                for t in 1..len {
                    out[t] = 0.5 * line(t) + 0.5 * ses[t];
                }
            }
            ClassicalForecaster::Ar { .. } | ClassicalForecaster::Arx { .. } => {
                let Estimate::Ar(model) = est else {
                    unreachable!("autoregressive path without coefficients")
                };
                for t in model.p + model.d..len {
                    if model.beta.is_empty() || x.is_some_and(|rows| t < rows.len()) {
                        out[t] = model.predict_at(y, x.map(|rows| rows[t]), t);
                    }
                }
            }
        }
        out
    }
}

fn ses_path(y: &[f64], alpha: f64, out: &mut [f64]) {
    let mut level = y[0];
    for t in 1..y.len() {
        out[t] = level;
        level = alpha * y[t] + (1.0 - alpha) * level;
    }
    if out.len() > y.len() {
        out[y.len()] = level;
    }
}

fn path_mae(y: &[f64], path: &[f64], from: usize) -> f64 {
    let (sum, count) = (from..y.len())
        .filter(|&t| path[t].is_finite())
        .fold((0.0, 0usize), |(s, c), t| (s + (y[t] - path[t]).abs(), c + 1));
    sum / count as f64
}

fn check_exog(exog: Option<&FeatureMatrix>, n: usize) -> Result<()> {
    match exog {
        Some(x) if x.n_rows() != n => Err(ClassicalError::Invalid(format!(
            "exogenous matrix has {} rows for {n} observations",
            x.n_rows()
        ))),
        _ => Ok(()),
    }
}

/// Ordinary least-squares line `a + b t` over `t = 0..n`.
pub fn linear_trend(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let y_mean = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, v) in y.iter().enumerate() {
        let dt = t as f64 - t_mean;
        sxy += dt * (v - y_mean);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (y_mean - slope * t_mean, slope)
}

impl ArModel {
    fn differenced(&self, y: &[f64], t: usize) -> f64 {
        if self.d == 1 {
            y[t] - y[t - 1]
        } else {
            y[t]
        }
    }

    /// Forecast of `y[t]` from `y[..t]` and the exogenous row for `t`.
    fn predict_at(&self, y: &[f64], x_t: Option<&[f64]>, t: usize) -> f64 {
        let mut w = self.intercept;
        for (i, phi) in self.phi.iter().enumerate() {
            w += phi * self.differenced(y, t - 1 - i);
        }
        if let Some(x) = x_t {
            w += self.beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
        }
        if self.d == 1 {
            y[t - 1] + w
        } else {
            w
        }
    }
}

/// Least-squares AR(`p`) with intercept on the `d`-times differenced series,
/// optionally with contemporaneous exogenous regressors. Rank-deficient
/// designs get the minimum-norm solution.
pub fn fit_ar(series: &[f64], p: usize, d: usize, exog: Option<&FeatureMatrix>) -> Result<ArModel> {
    if p == 0 || d > 1 {
        return Err(ClassicalError::Invalid(format!("need p >= 1 and d in {{0, 1}}, got p={p}, d={d}")));
    }
    let n = series.len();
    if n < p + d + 1 {
        return Err(ClassicalError::InsufficientHistory {
            method: if exog.is_some() { Method::Arx } else { Method::Ar },
            required: p + d + 1,
            found: n,
        });
    }
    check_exog(exog, n)?;
    let n_exog = exog.map_or(0, FeatureMatrix::n_cols);
    let shell = ArModel {
        p,
        d,
        intercept: 0.0,
        phi: vec![],
        beta: vec![],
    };
    let rows: Vec<usize> = (p + d..n).collect();
    let n_params = 1 + p + n_exog;
    let design = DMatrix::from_fn(rows.len(), n_params, |r, c| {
        let t = rows[r];
        match c {
            0 => 1.0,
            c if c <= p => shell.differenced(series, t - c),
            c => exog.expect("exogenous columns imply a matrix").get(t, c - 1 - p),
        }
    });
    let target = DVector::from_iterator(rows.len(), rows.iter().map(|&t| shell.differenced(series, t)));
    let svd = design.svd(true, true);
    let eps = svd.singular_values.max() * 1e-12;
    let coef = svd.solve(&target, eps).map_err(|e| ClassicalError::Fit(e.to_string()))?;
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(ClassicalError::Fit("non-finite coefficients".into()));
    }
    Ok(ArModel {
        p,
        d,
        intercept: coef[0],
        phi: coef.iter().skip(1).take(p).copied().collect(),
        beta: coef.iter().skip(1 + p).copied().collect(),
    })
}

/// The smoothing grid `0.01, 0.02, ..., 0.99`.
pub fn smoothing_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

/// Picks smoothing parameters by grid search on in-sample one-step MAE.
///
/// Ties resolve to the lexicographically smallest `(alpha, beta, gamma)`.
/// Methods without smoothing parameters return their defaults.
pub fn fit_smoothing_params(method: Method, series: &[f64]) -> Result<ClassicalForecaster> {
    let grid = smoothing_grid();
    let best = |candidates: Vec<ClassicalForecaster>| -> Result<ClassicalForecaster> {
        let losses: Vec<f64> = candidates
            .par_iter()
            .map(|c| c.in_sample_mae(series, None))
            .collect::<Result<_>>()?;
        let mut best = 0;
        for (i, l) in losses.iter().enumerate() {
            if *l < losses[best] {
                best = i;
            }
        }
        Ok(candidates[best])
    };
    match method {
        Method::Naive => Ok(ClassicalForecaster::Naive),
        Method::MovingAverage => Ok(ClassicalForecaster::MovingAverage { window: DEFAULT_WINDOW }),
        Method::Ar => Ok(ClassicalForecaster::Ar {
            p: DEFAULT_AR_ORDER,
            d: 0,
        }),
        Method::Arx => Ok(ClassicalForecaster::Arx {
            p: DEFAULT_AR_ORDER,
            d: 0,
        }),
        Method::Ses => best(grid.iter().map(|&alpha| ClassicalForecaster::Ses { alpha }).collect()),
        Method::Theta => best(grid.iter().map(|&alpha| ClassicalForecaster::Theta { alpha }).collect()),
        Method::Holt => best(
            grid.iter()
                .flat_map(|&alpha| grid.iter().map(move |&beta| ClassicalForecaster::Holt { alpha, beta }))
                .collect(),
        ),
        Method::HoltWintersAdditive => {
            let mut candidates = Vec::with_capacity(grid.len().pow(3));
            for &alpha in &grid {
                for &beta in &grid {
                    for &gamma in &grid {
                        candidates.push(ClassicalForecaster::HoltWintersAdditive {
                            alpha,
                            beta,
                            gamma,
                            period: DEFAULT_PERIOD,
                            init: SeasonalInit::Classical,
                        });
                    }
                }
            }
            best(candidates)
        }
    }
}

/// Rolling-origin score of one classical method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalScore {
    pub method: Method,
    pub forecaster: ClassicalForecaster,
    pub mae: f64,
}

/// Tunes each method on the first `n - holdout` points and scores it by
/// rolling-origin MAE over the last `holdout`. `exog` feeds ARX only.
pub fn benchmark(
    methods: &[Method],
    series: &[f64],
    exog: Option<&FeatureMatrix>,
    holdout: usize,
) -> Result<Vec<ClassicalScore>> {
    if holdout == 0 || holdout >= series.len() {
        return Err(ClassicalError::Invalid(format!("holdout {holdout} out of range")));
    }
    let train = &series[..series.len() - holdout];
    methods
        .iter()
        .map(|&method| {
            let forecaster = fit_smoothing_params(method, train)?;
            let x = if method == Method::Arx { exog } else { None };
            let mae = forecaster.rolling_origin_mae(series, x, holdout)?;
            Ok(ClassicalScore {
                method,
                forecaster,
                mae,
            })
        })
        .collect()
}

/// Holdout length for a series of `n` points: the final 20%, at least one point.
pub fn default_holdout(n: usize) -> usize {
    ((n as f64 * 0.2).round() as usize).max(1)
}
