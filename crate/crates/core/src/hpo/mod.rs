//! Hyperparameter optimization: a Parzen-estimator sampler screens candidate
//! settings on a single train/test split, then successive halving re-ranks
//! them under k-fold MAE with doubling row budgets.

mod halving;
mod parzen;
mod space;

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use halving::{successive_halving, BudgetedEvaluator, Evaluation, HalvingOutcome};
pub use parzen::{sampler_suggest, SamplerConfig};
pub use space::{DimKind, Dimension, ParamSetting, ParamSpace, ParamValue};

use crate::dataset::FeatureMatrix;
use crate::evaluation::{self, kfold_split, mae, EvalError, ModelScore};
use crate::learners::{self, Family};
use crate::seed;

#[derive(Debug, Error)]
pub enum HpoError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("every setting failed in halving round {round}")]
    AllFailed { round: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("trace export failed: {0}")]
    Export(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Sampler iteration scored on one train/test split.
    Screening,
    /// Successive-halving round scored by k-fold MAE.
    Halving,
    /// Full-budget k-fold re-score of the winner.
    Final,
}

/// One evaluated setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub setting: ParamSetting,
    /// MAE, or `None` when the evaluation failed.
    pub loss: Option<f64>,
    pub budget: f64,
    pub fold_losses: Vec<f64>,
    pub round: usize,
    pub stage: Stage,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpoConfig {
    /// Number of sampler suggestions handed to successive halving.
    pub n_settings: usize,
    pub initial_budget: f64,
    pub gamma: f64,
    /// Defaults to `max(4, n_settings / 4)`.
    pub n_startup: Option<usize>,
    pub n_candidates: usize,
    /// Held-out share of the single screening split.
    pub screening_test_fraction: f64,
}

impl Default for HpoConfig {
    fn default() -> Self {
        HpoConfig {
            n_settings: 16,
            initial_budget: 0.25,
            gamma: 0.25,
            n_startup: None,
            n_candidates: 24,
            screening_test_fraction: 0.2,
        }
    }
}

impl HpoConfig {
    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            n_startup: self.n_startup.unwrap_or((self.n_settings / 4).max(4)),
            gamma: self.gamma,
            n_candidates: self.n_candidates,
        }
    }

    pub fn validate(&self) -> Result<(), HpoError> {
        if self.n_settings < 2 {
            return Err(HpoError::Config("n_settings must be at least 2".into()));
        }
        if !(self.initial_budget > 0.0 && self.initial_budget <= 1.0) {
            return Err(HpoError::Config("initial_budget must lie in (0, 1]".into()));
        }
        if !(self.screening_test_fraction > 0.0 && self.screening_test_fraction < 1.0) {
            return Err(HpoError::Config(
                "screening_test_fraction must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Output of [`optimize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOutcome {
    pub family: Family,
    pub best: ParamSetting,
    /// Full-budget k-fold MAE of `best`.
    pub best_mae: f64,
    pub score: ModelScore,
    /// Held-out prediction for every row from the final k-fold re-score.
    pub oof_predictions: Vec<f64>,
    /// Lowest-loss setting of the screening stage.
    pub screening_best: Option<ParamSetting>,
    pub trace: Vec<Trial>,
}

/// Seed used for the final full-budget re-score inside [`optimize`].
pub fn final_seed(seed: u64) -> u64 {
    seed::derive(seed, &[5])
}

/// Tunes one learner family on `(x, y)`.
///
/// The k-fold plan is `kfold_split(n, k, seed)`, so every family optimized
/// with the same seed on the same rows shares its folds.
pub fn optimize(
    family: Family,
    space: &ParamSpace,
    x: &FeatureMatrix,
    y: &[f64],
    config: &HpoConfig,
    k: usize,
    seed: u64,
) -> Result<OptimizeOutcome, HpoError> {
    config.validate()?;
    if k < 2 {
        return Err(HpoError::Config("k must be at least 2".into()));
    }
    let n = y.len();
    if x.n_rows() != n {
        return Err(HpoError::Config(format!(
            "feature matrix has {} rows, target has {n}",
            x.n_rows()
        )));
    }
    let plan = kfold_split(n, k, seed)?;

    // Screening on a single seeded split.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, &[1])));
    let n_test = ((n as f64 * config.screening_test_fraction).round() as usize).clamp(1, n - 2);
    let (test_rows, train_rows) = order.split_at(n_test);
    let mut train_rows = train_rows.to_vec();
    let mut test_rows = test_rows.to_vec();
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    let x_train = x.select_rows(&train_rows);
    let y_train: Vec<f64> = train_rows.iter().map(|&r| y[r]).collect();
    let x_test = x.select_rows(&test_rows);
    let y_test: Vec<f64> = test_rows.iter().map(|&r| y[r]).collect();

    let sampler = config.sampler();
    let mut screening: Vec<Trial> = Vec::with_capacity(config.n_settings);
    for i in 0..config.n_settings {
        let setting = sampler_suggest(space, &screening, &sampler, seed::derive(seed, &[2, i as u64]))?;
        let fit_seed = seed::derive(seed, &[3, i as u64]);
        let outcome = learners::fit(family, &setting, &x_train, &y_train, 1.0, fit_seed)
            .and_then(|m| learners::predict(&m, &x_test))
            .map_err(|e| e.to_string())
            .and_then(|pred| mae(&y_test, &pred).map_err(|e| e.to_string()));
        let (loss, error) = match outcome {
            Ok(l) if l.is_finite() => (Some(l), None),
            Ok(l) => (None, Some(format!("non-finite loss {l}"))),
            Err(e) => (None, Some(e)),
        };
        screening.push(Trial {
            fold_losses: loss.into_iter().collect(),
            setting,
            loss,
            budget: 1.0,
            round: 0,
            stage: Stage::Screening,
            error,
        });
    }
    let screening_best = screening
        .iter()
        .filter_map(|t| t.loss.map(|l| (l, &t.setting)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, s)| s.clone());

    // Screening losses are not carried over: halving re-scores under k-fold.
    let settings: Vec<ParamSetting> = screening.iter().map(|t| t.setting.clone()).collect();
    let evaluator = |setting: &ParamSetting, budget: f64, s: u64| -> Result<Evaluation, String> {
        evaluation::cv_mae(family, setting, x, y, &plan, budget, s)
            .map(|score| Evaluation {
                loss: score.mae,
                fold_losses: score.fold_maes,
            })
            .map_err(|e| e.to_string())
    };
    let halving = successive_halving(&settings, &evaluator, config.initial_budget, seed::derive(seed, &[4]))?;

    let cv = evaluation::cross_validate(family, &halving.best, x, y, &plan, 1.0, final_seed(seed))?;
    let mut trace = screening;
    trace.extend(halving.trace);
    trace.push(Trial {
        setting: halving.best.clone(),
        loss: Some(cv.score.mae),
        budget: 1.0,
        fold_losses: cv.score.fold_maes.clone(),
        round: halving.round_sizes.len(),
        stage: Stage::Final,
        error: None,
    });
    Ok(OptimizeOutcome {
        family,
        best: halving.best,
        best_mae: cv.score.mae,
        score: cv.score,
        oof_predictions: cv.oof_predictions,
        screening_best,
        trace,
    })
}

/// Writes trials as CSV with columns `round, setting, budget, loss`.
///
/// `setting` is the JSON form of the setting; failed trials have an empty loss.
pub fn write_trace_csv<W: Write>(trials: &[Trial], writer: W) -> Result<(), HpoError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| HpoError::Export(e.to_string());
    wtr.write_record(["round", "setting", "budget", "loss"]).map_err(err)?;
    for t in trials {
        wtr.write_record([
            t.round.to_string(),
            t.setting.to_json(),
            t.budget.to_string(),
            t.loss.map(|l| l.to_string()).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    wtr.flush().map_err(|e| HpoError::Export(e.to_string()))
}
