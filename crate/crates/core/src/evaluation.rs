//! Shuffled k-fold cross-validation, MAE and best-model selection.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::FeatureMatrix;
use crate::hpo::ParamSetting;
use crate::learners::{self, Family, LearnerError};
use crate::seed;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}")]
    Invalid(String),
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: LearnerError,
    },
}

/// Mean absolute error.
pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    if actual.len() != predicted.len() {
        return Err(EvalError::Invalid(format!(
            "mae: {} actual values vs {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(EvalError::Invalid("mae of empty vectors".into()));
    }
    let total: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum();
    Ok(total / actual.len() as f64)
}

/// Assignment of every row to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn n_rows(&self) -> usize {
        self.assignments.len()
    }

    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n_rows()).filter(|&r| self.assignments[r] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n_rows()).filter(|&r| self.assignments[r] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded shuffle followed by a contiguous partition into `k` groups whose
/// sizes differ by at most one.
pub fn kfold_split(n_rows: usize, k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    if k < 2 {
        return Err(EvalError::Invalid(format!("k = {k}, need at least 2 folds")));
    }
    if k > n_rows {
        return Err(EvalError::Invalid(format!("k = {k} exceeds the {n_rows} rows")));
    }
    let mut perm: Vec<usize> = (0..n_rows).collect();
    perm.shuffle(&mut seed::rng(seed));
    let base = n_rows / k;
    let extra = n_rows % k;
    let mut assignments = vec![0; n_rows];
    let mut pos = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for &row in &perm[pos..pos + size] {
            assignments[row] = fold;
        }
        pos += size;
    }
    Ok(FoldPlan { k, assignments, seed })
}

/// Cross-validated MAE of one family and setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub family: Family,
    pub mae: f64,
    pub fold_maes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub score: ModelScore,
    /// Row `t` holds the prediction of the fold model that did not train on `t`.
    pub oof_predictions: Vec<f64>,
}

/// Runs `fit_predict(train_x, train_y, test_x, fold_seed)` on every fold.
///
/// Fold seeds derive from `(seed, fold)`; folds are evaluated in order.
pub fn cross_validate_with<F>(
    x: &FeatureMatrix,
    y: &[f64],
    plan: &FoldPlan,
    seed: u64,
    mut fit_predict: F,
) -> Result<(Vec<f64>, Vec<f64>), EvalError>
where
    F: FnMut(&FeatureMatrix, &[f64], &FeatureMatrix, u64) -> Result<Vec<f64>, LearnerError>,
{
    if plan.n_rows() != y.len() || x.n_rows() != y.len() {
        return Err(EvalError::Invalid(format!(
            "fold plan covers {} rows, data has {} features rows and {} targets",
            plan.n_rows(),
            x.n_rows(),
            y.len()
        )));
    }
    let mut oof = vec![f64::NAN; y.len()];
    let mut fold_maes = Vec::with_capacity(plan.k);
    for fold in 0..plan.k {
        let train = plan.train_rows(fold);
        let test = plan.test_rows(fold);
        let x_train = x.select_rows(&train);
        let y_train: Vec<f64> = train.iter().map(|&r| y[r]).collect();
        let x_test = x.select_rows(&test);
        let pred = fit_predict(&x_train, &y_train, &x_test, seed::derive(seed, &[fold as u64]))
            .map_err(|source| EvalError::Fold { fold, source })?;
        if pred.len() != test.len() {
            return Err(EvalError::Invalid(format!(
                "fold {fold}: {} predictions for {} rows",
                pred.len(),
                test.len()
            )));
        }
        let y_test: Vec<f64> = test.iter().map(|&r| y[r]).collect();
        fold_maes.push(mae(&y_test, &pred)?);
        for (&r, p) in test.iter().zip(pred) {
            oof[r] = p;
        }
    }
    Ok((fold_maes, oof))
}

pub fn cross_validate(
    family: Family,
    setting: &ParamSetting,
    x: &FeatureMatrix,
    y: &[f64],
    plan: &FoldPlan,
    budget: f64,
    seed: u64,
) -> Result<CvResult, EvalError> {
    let (fold_maes, oof_predictions) = cross_validate_with(x, y, plan, seed, |xt, yt, xv, s| {
        let model = learners::fit(family, setting, xt, yt, budget, s)?;
        learners::predict(&model, xv)
    })?;
    Ok(CvResult {
        score: ModelScore {
            family,
            mae: mean(&fold_maes),
            fold_maes,
        },
        oof_predictions,
    })
}

/// Mean of per-fold MAEs for `family` with `setting` at the given row budget.
pub fn cv_mae(
    family: Family,
    setting: &ParamSetting,
    x: &FeatureMatrix,
    y: &[f64],
    plan: &FoldPlan,
    budget: f64,
    seed: u64,
) -> Result<ModelScore, EvalError> {
    cross_validate(family, setting, x, y, plan, budget, seed).map(|cv| cv.score)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Winner of a score table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub family: Family,
    pub min_mae: f64,
    /// Spread between the worst and best family.
    pub range: f64,
}

/// Picks the family with the lowest MAE; ties go to the earlier family in
/// MLP, RF, GB, XGB order.
pub fn select_best(scores: &[(Family, f64)]) -> Result<Selection, EvalError> {
    let mut sorted = scores.to_vec();
    sorted.sort_by_key(|(f, _)| *f);
    let (&(first_family, first_mae), rest) = sorted
        .split_first()
        .ok_or_else(|| EvalError::Invalid("no scores to select from".into()))?;
    let mut best = (first_family, first_mae);
    let mut max = first_mae;
    for &(family, m) in rest {
        if m < best.1 {
            best = (family, m);
        }
        max = max.max(m);
    }
    Ok(Selection {
        family: best.0,
        min_mae: best.1,
        range: max - best.1,
    })
}
