//! Tree-structured Parzen estimator style sampler.
//!
//! Past trials are split at a loss quantile into a "good" and a "bad" set.
//! Each dimension gets an independent density per set; candidates are drawn
//! from the good density and the one maximising good/bad is returned.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::space::{DimKind, Dimension, ParamSetting, ParamSpace, ParamValue};
use super::{HpoError, Trial};
use crate::seed;

/// Relative floor on kernel bandwidths.
const MIN_BANDWIDTH: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_startup: usize,
    pub gamma: f64,
    pub n_candidates: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_startup: 4,
            gamma: 0.25,
            n_candidates: 24,
        }
    }
}

/// Suggests the next setting to evaluate given the finished trials in `history`.
///
/// Failed trials (no loss) are ignored.
pub fn sampler_suggest(
    space: &ParamSpace,
    history: &[Trial],
    config: &SamplerConfig,
    seed: u64,
) -> Result<ParamSetting, HpoError> {
    if space.is_empty() {
        return Err(HpoError::Config("search space has no dimensions".into()));
    }
    if !(config.gamma > 0.0 && config.gamma < 1.0) {
        return Err(HpoError::Config(format!("gamma {} outside (0, 1)", config.gamma)));
    }
    if config.n_startup < 2 || config.n_candidates == 0 {
        return Err(HpoError::Config(
            "sampler needs n_startup >= 2 and n_candidates >= 1".into(),
        ));
    }
    let mut rng = seed::rng(seed);
    let mut finished: Vec<(&ParamSetting, f64)> = history
        .iter()
        .filter_map(|t| t.loss.map(|l| (&t.setting, l)))
        .collect();
    if finished.len() < config.n_startup {
        return Ok(space.sample_uniform(&mut rng));
    }

    // Stable sort: equal losses keep insertion order.
    finished.sort_by(|a, b| a.1.total_cmp(&b.1));
    let n = finished.len();
    let n_good = ((config.gamma * n as f64).ceil() as usize).clamp(1, n - 1);
    let (good, bad) = finished.split_at(n_good);

    let estimators: Vec<(DimDensity, DimDensity)> = space
        .dims()
        .iter()
        .map(|d| {
            let values = |set: &[(&ParamSetting, f64)]| -> Vec<ParamValue> {
                set.iter().filter_map(|(s, _)| s.get(&d.name).cloned()).collect()
            };
            (DimDensity::fit(d, &values(good)), DimDensity::fit(d, &values(bad)))
        })
        .collect();

    let mut best: Option<(f64, ParamSetting)> = None;
    for _ in 0..config.n_candidates {
        let mut cand = ParamSetting::new();
        let mut score = 0.0;
        for (d, (l, g)) in space.dims().iter().zip(&estimators) {
            let v = l.sample(d, &mut rng);
            score += l.log_density(d, &v) - g.log_density(d, &v);
            cand.insert(&d.name, v);
        }
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, cand));
        }
    }
    Ok(best.expect("n_candidates >= 1").1)
}

/// Per-dimension density of one trial set.
#[derive(Debug, Clone)]
pub(crate) enum DimDensity {
    /// Mixture of Gaussians truncated to `[low, high]` (internal scale).
    Parzen {
        low: f64,
        high: f64,
        centers: Vec<f64>,
        bandwidths: Vec<f64>,
    },
    /// Laplace-smoothed category frequencies.
    Categorical { weights: Vec<f64> },
    /// No observations: uniform over the dimension.
    Uniform,
}

impl DimDensity {
    pub(crate) fn fit(dim: &Dimension, values: &[ParamValue]) -> Self {
        match &dim.kind {
            DimKind::Categorical { choices } => {
                let mut counts = vec![1.0; choices.len()];
                for v in values {
                    if let Some(i) = choices.iter().position(|c| c == v) {
                        counts[i] += 1.0;
                    }
                }
                let total: f64 = counts.iter().sum();
                DimDensity::Categorical {
                    weights: counts.into_iter().map(|c| c / total).collect(),
                }
            }
            _ => {
                let (low, high) = dim.internal_bounds().expect("numeric dimension");
                let mut centers: Vec<f64> = values.iter().filter_map(|v| dim.to_internal(v)).collect();
                if centers.is_empty() {
                    return DimDensity::Uniform;
                }
                centers.sort_by(f64::total_cmp);
                let range = high - low;
                let floor = MIN_BANDWIDTH * range;
                let bandwidths = (0..centers.len())
                    .map(|i| {
                        let left = i.checked_sub(1).map(|j| centers[i] - centers[j]);
                        let right = centers.get(i + 1).map(|c| c - centers[i]);
                        let spacing = match (left, right) {
                            (None, None) => range,
                            (l, r) => l.unwrap_or(0.0).max(r.unwrap_or(0.0)),
                        };
                        spacing.clamp(floor, range)
                    })
                    .collect();
                DimDensity::Parzen {
                    low,
                    high,
                    centers,
                    bandwidths,
                }
            }
        }
    }

    pub(crate) fn sample<R: Rng>(&self, dim: &Dimension, rng: &mut R) -> ParamValue {
        match self {
            DimDensity::Uniform => dim.sample_uniform(rng),
            DimDensity::Categorical { weights } => {
                let DimKind::Categorical { choices } = &dim.kind else {
                    unreachable!("categorical density on numeric dimension")
                };
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (c, w) in choices.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return c.clone();
                    }
                }
                choices[choices.len() - 1].clone()
            }
            DimDensity::Parzen {
                low,
                high,
                centers,
                bandwidths,
            } => {
                let k = rng.random_range(0..centers.len());
                let mut x = centers[k];
                for _ in 0..64 {
                    let z: f64 = StandardNormal.sample(rng);
                    let cand = centers[k] + bandwidths[k] * z;
                    if cand >= *low && cand <= *high {
                        x = cand;
                        break;
                    }
                }
                dim.decode(x)
            }
        }
    }

    pub(crate) fn log_density(&self, dim: &Dimension, value: &ParamValue) -> f64 {
        match self {
            DimDensity::Uniform => match dim.internal_bounds() {
                Some((lo, hi)) => -(hi - lo).ln(),
                None => 0.0,
            },
            DimDensity::Categorical { weights } => {
                let DimKind::Categorical { choices } = &dim.kind else {
                    unreachable!("categorical density on numeric dimension")
                };
                choices
                    .iter()
                    .position(|c| c == value)
                    .map_or(f64::NEG_INFINITY, |i| weights[i].ln())
            }
            DimDensity::Parzen {
                low,
                high,
                centers,
                bandwidths,
            } => {
                let Some(x) = dim.to_internal(value) else {
                    return f64::NEG_INFINITY;
                };
                let m = centers.len() as f64;
                let p: f64 = centers
                    .iter()
                    .zip(bandwidths)
                    .map(|(&mu, &sd)| {
                        let mass = normal_cdf((high - mu) / sd) - normal_cdf((low - mu) / sd);
                        normal_pdf((x - mu) / sd) / (sd * mass.max(1e-300))
                    })
                    .sum::<f64>()
                    / m;
                p.max(1e-300).ln()
            }
        }
    }
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}
