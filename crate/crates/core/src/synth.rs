//! Seeded synthetic two-level hierarchies.
//!
//! Child `j` on day `t`:
//!
//! ```text
//! child_j[t] = max(0, base_j + beta_j * promo[t] + holiday_j * holiday[t] + dow_j[weekday(t)] + e_j[t])
//! e_j[t]     = rho * e_j[t-1] + noise_sd * eps
//! parent[t]  = max(0, sum_j child_j[t] + parent_noise_sd * eps)
//! ```
//!
//! The noise process starts from its stationary distribution. All draws come
//! from one ChaCha stream in a fixed order, so a config fully determines the
//! bundle.

use chrono::{Days, NaiveDate};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, HierarchyBundle};
use crate::seed;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_days: usize,
    pub n_children: usize,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    pub base_levels: Vec<f64>,
    pub promo_effects: Vec<f64>,
    pub holiday_effects: Vec<f64>,
    /// Additive weekday effects per child, Monday first.
    pub dow_profiles: Vec<[f64; 7]>,
    /// Innovation standard deviation of the AR(1) child noise.
    pub noise_sd: f64,
    pub ar1_rho: f64,
    pub parent_noise_sd: f64,
    pub promo_rate: f64,
    pub holiday_rate: f64,
    pub seed: u64,
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date")
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: String| Err(SynthError::Config(msg));
        if self.n_days < 30 {
            return fail(format!("n_days = {}, need at least 30", self.n_days));
        }
        if self.n_children == 0 {
            return fail("n_children must be at least 1".into());
        }
        for (name, len) in [
            ("base_levels", self.base_levels.len()),
            ("promo_effects", self.promo_effects.len()),
            ("holiday_effects", self.holiday_effects.len()),
            ("dow_profiles", self.dow_profiles.len()),
        ] {
            if len != self.n_children {
                return fail(format!("{name} has {len} entries, n_children is {}", self.n_children));
            }
        }
        let all_finite = self
            .base_levels
            .iter()
            .chain(&self.promo_effects)
            .chain(&self.holiday_effects)
            .chain(self.dow_profiles.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite {
            return fail("effects must be finite".into());
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return fail(format!("noise_sd = {}, must be >= 0", self.noise_sd));
        }
        if !(self.parent_noise_sd >= 0.0 && self.parent_noise_sd.is_finite()) {
            return fail(format!("parent_noise_sd = {}, must be >= 0", self.parent_noise_sd));
        }
        if !(0.0..1.0).contains(&self.ar1_rho) {
            return fail(format!("ar1_rho = {}, must lie in [0, 1)", self.ar1_rho));
        }
        for (name, p) in [("promo_rate", self.promo_rate), ("holiday_rate", self.holiday_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} = {p}, must lie in [0, 1]"));
            }
        }
        if self.start_date.checked_add_days(Days::new(self.n_days as u64)).is_none() {
            return fail("date range overflows the calendar".into());
        }
        Ok(())
    }
}

/// Desk-scale benchmark: 935 days, ten children with distinct promotion
/// responses in `[-20, 60]` and distinct weekday profiles.
pub fn default_benchmark_config(seed: u64) -> SynthConfig {
    let n = 10;
    let shape = [1.0, 0.6, 0.2, -0.1, -0.4, -0.8, -0.5];
    SynthConfig {
        n_days: 935,
        n_children: n,
        start_date: default_start(),
        base_levels: (0..n).map(|j| 40.0 + 12.0 * j as f64).collect(),
        promo_effects: (0..n).map(|j| -20.0 + 80.0 * j as f64 / (n - 1) as f64).collect(),
        holiday_effects: (0..n).map(|j| 25.0 - 6.0 * ((j * 7) % n) as f64).collect(),
        dow_profiles: (0..n)
            .map(|j| {
                let amp = 6.0 + 2.0 * j as f64;
                std::array::from_fn(|d| amp * shape[(d + j) % 7])
            })
            .collect(),
        noise_sd: 8.0,
        ar1_rho: 0.8,
        parent_noise_sd: 0.0,
        promo_rate: 0.2,
        holiday_rate: 0.05,
        seed,
    }
}

/// Stationary AR(1) path: `e[0] ~ N(0, sd^2 / (1 - rho^2))`, then
/// `e[t] = rho * e[t-1] + sd * eps[t]`.
pub fn ar1_noise<R: Rng>(n: usize, sd: f64, rho: f64, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let z: f64 = rng.sample(StandardNormal);
    let mut e = z * sd / (1.0 - rho * rho).sqrt();
    out.push(e);
    for _ in 1..n {
        let z: f64 = rng.sample(StandardNormal);
        e = rho * e + sd * z;
        out.push(e);
    }
    out
}

pub fn generate(config: &SynthConfig) -> Result<HierarchyBundle, SynthError> {
    config.validate()?;
    let n = config.n_days;
    let mut rng = seed::rng(config.seed);
    let dates: Vec<NaiveDate> = (0..n as u64)
        .map(|t| config.start_date + Days::new(t))
        .collect();
    let promotion: Vec<bool> = (0..n).map(|_| rng.random_bool(config.promo_rate)).collect();
    let holiday: Vec<bool> = (0..n).map(|_| rng.random_bool(config.holiday_rate)).collect();

    let children: Vec<Vec<f64>> = (0..config.n_children)
        .map(|j| {
            let noise = ar1_noise(n, config.noise_sd, config.ar1_rho, &mut rng);
            (0..n)
                .map(|t| {
                    let dow = crate::dataset::weekday_index(dates[t]);
                    let v = config.base_levels[j]
                        + config.promo_effects[j] * f64::from(u8::from(promotion[t]))
                        + config.holiday_effects[j] * f64::from(u8::from(holiday[t]))
                        + config.dow_profiles[j][dow]
                        + noise[t];
                    v.max(0.0)
                })
                .collect()
        })
        .collect();

    let parent: Vec<f64> = (0..n)
        .map(|t| {
            let total: f64 = children.iter().map(|c| c[t]).sum();
            if config.parent_noise_sd > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                (total + config.parent_noise_sd * z).max(0.0)
            } else {
                total
            }
        })
        .collect();

    Ok(HierarchyBundle::from_columns(dates, promotion, holiday, parent, children)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(n_children: usize) -> SynthConfig {
        SynthConfig {
            n_days: 40,
            n_children,
            start_date: default_start(),
            base_levels: (0..n_children).map(|j| 10.0 + j as f64).collect(),
            promo_effects: vec![0.0; n_children],
            holiday_effects: vec![0.0; n_children],
            dow_profiles: vec![[0.0; 7]; n_children],
            noise_sd: 0.0,
            ar1_rho: 0.0,
            parent_noise_sd: 0.0,
            promo_rate: 0.3,
            holiday_rate: 0.1,
            seed: 1,
        }
    }

    #[test]
    fn zero_effects_give_constant_children() {
        let b = generate(&quiet(3)).unwrap();
        assert!(b.coherent);
        for (j, c) in b.children.iter().enumerate() {
            assert!(c.target.iter().all(|&v| v == 10.0 + j as f64));
        }
        assert!(b.parent.target.iter().all(|&v| v == 33.0));
    }

    #[test]
    fn default_shape_and_distinct_promo_effects() {
        let c = default_benchmark_config(3);
        let b = generate(&c).unwrap();
        assert_eq!((b.n_rows(), b.n_children()), (935, 10));
        assert!(b.coherent);
        for i in 0..10 {
            for j in i + 1..10 {
                assert_ne!(c.promo_effects[i], c.promo_effects[j]);
                assert_ne!(c.dow_profiles[i], c.dow_profiles[j]);
            }
        }
        assert_eq!(c.promo_effects[0], -20.0);
        assert_eq!(c.promo_effects[9], 60.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = quiet(2);
        c.ar1_rho = 1.0;
        assert!(generate(&c).is_err());
        let mut c = quiet(2);
        c.n_days = 29;
        assert!(generate(&c).is_err());
        let mut c = quiet(2);
        c.base_levels.pop();
        assert!(generate(&c).is_err());
    }
}
