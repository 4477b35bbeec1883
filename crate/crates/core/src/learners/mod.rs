//! Multi-feature regressors: perceptron network, random forest, gradient
//! boosting and second-order (XGB-style) boosting.
//!
//! All families share one entry point, [`fit`], which takes a
//! [`ParamSetting`] and a row budget. A budget below one trains on a seeded
//! uniform subsample of `ceil(budget * n)` rows.

mod boosting;
mod forest;
mod mlp;
mod tree;

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use boosting::{BoostParams, BoostedModel};
pub use forest::{Forest, ForestParams};
pub use mlp::{mlp_loss_gradient, Activation, MlpArchitecture, MlpModel, MlpParams};
pub use tree::{RegressionTree, TreeNode};

use crate::dataset::FeatureMatrix;
use crate::hpo::{Dimension, ParamSetting, ParamSpace, ParamValue};
use crate::seed;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("invalid hyperparameter: {0}")]
    Config(String),
    #[error("invalid training data: {0}")]
    Data(String),
    #[error("column mismatch: model trained on {expected:?}, got {found:?}")]
    Schema {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("model (de)serialization failed: {0}")]
    Serde(String),
}

pub type Result<T, E = LearnerError> = std::result::Result<T, E>;

/// Learner families in tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "MLP")]
    Mlp,
    #[serde(rename = "RF")]
    Rf,
    #[serde(rename = "GB")]
    Gb,
    #[serde(rename = "XGB")]
    XgbStyle,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Mlp, Family::Rf, Family::Gb, Family::XgbStyle];

    pub fn label(&self) -> &'static str {
        match self {
            Family::Mlp => "MLP",
            Family::Rf => "RF",
            Family::Gb => "GB",
            Family::XgbStyle => "XGB",
        }
    }

    /// Default search space for the family.
    pub fn default_space(&self) -> ParamSpace {
        let dims = match self {
            Family::Mlp => vec![
                Dimension::integer("hidden_layers", 1, 2),
                Dimension::log_integer("units", 4, 32),
                Dimension::log_uniform("learning_rate", 1e-4, 1e-1),
                Dimension::integer("epochs", 20, 100),
                Dimension::categorical("activation", vec!["relu".into(), "tanh".into()]),
                Dimension::log_uniform("l2", 1e-6, 1e-1),
            ],
            Family::Rf => vec![
                Dimension::integer("n_trees", 50, 500),
                Dimension::integer("max_depth", 2, 16),
                Dimension::integer("min_samples_leaf", 1, 20),
                Dimension::uniform("feature_fraction", 0.3, 1.0),
            ],
            Family::Gb | Family::XgbStyle => {
                let mut dims = vec![
                    Dimension::integer("n_trees", 50, 500),
                    Dimension::log_uniform("learning_rate", 0.01, 0.3),
                    Dimension::integer("max_depth", 2, 8),
                    Dimension::uniform("subsample", 0.5, 1.0),
                ];
                if *self == Family::XgbStyle {
                    dims.push(Dimension::uniform("lambda", 0.0, 10.0));
                    dims.push(Dimension::uniform("min_split_gain", 0.0, 5.0));
                }
                dims
            }
        };
        ParamSpace::new(dims).expect("default spaces are valid")
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Family {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mlp" => Ok(Family::Mlp),
            "rf" => Ok(Family::Rf),
            "gb" => Ok(Family::Gb),
            "xgb" | "xgbstyle" | "xgb_style" => Ok(Family::XgbStyle),
            other => Err(LearnerError::Config(format!("unknown learner family `{other}`"))),
        }
    }
}

/// Typed access to a [`ParamSetting`] with per-key validation.
pub(crate) struct Params<'a>(pub &'a ParamSetting);

impl Params<'_> {
    fn value(&self, name: &str) -> Option<&ParamValue> {
        self.0.get(name)
    }

    pub fn int(&self, name: &str, default: Option<i64>) -> Result<i64> {
        match self.value(name) {
            Some(v) => v
                .as_i64()
                .ok_or_else(|| LearnerError::Config(format!("`{name}` must be an integer, got {v}"))),
            None => default.ok_or_else(|| LearnerError::Config(format!("missing `{name}`"))),
        }
    }

    pub fn real(&self, name: &str, default: Option<f64>) -> Result<f64> {
        match self.value(name) {
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| LearnerError::Config(format!("`{name}` must be a number, got {v}"))),
            None => default.ok_or_else(|| LearnerError::Config(format!("missing `{name}`"))),
        }
    }

    pub fn text(&self, name: &str, default: Option<&str>) -> Result<String> {
        match self.value(name) {
            Some(ParamValue::Cat(s)) => Ok(s.clone()),
            Some(v) => Err(LearnerError::Config(format!("`{name}` must be a string, got {v}"))),
            None => default
                .map(str::to_string)
                .ok_or_else(|| LearnerError::Config(format!("missing `{name}`"))),
        }
    }

    pub fn count(&self, name: &str, min: i64, default: Option<i64>) -> Result<usize> {
        let v = self.int(name, default)?;
        if v < min {
            return Err(LearnerError::Config(format!("`{name}` = {v}, must be >= {min}")));
        }
        Ok(v as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedState {
    Mlp(MlpModel),
    Forest(Forest),
    Boosted(BoostedModel),
}

/// A fitted model of one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regressor {
    pub family: Family,
    pub setting: ParamSetting,
    pub columns: Vec<String>,
    pub state: FittedState,
}

impl Regressor {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| LearnerError::Serde(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| LearnerError::Serde(e.to_string()))
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.state {
            FittedState::Mlp(m) => m.predict_row(row),
            FittedState::Forest(f) => f.predict_row(row),
            FittedState::Boosted(b) => b.predict_row(row),
        }
    }
}

/// Row indices used for a fit at `budget`.
pub(crate) fn budget_rows(n: usize, budget: f64, seed: u64) -> Vec<usize> {
    let m = ((budget * n as f64).ceil() as usize).clamp(n.min(2), n);
    if m == n {
        return (0..n).collect();
    }
    let mut rows = index::sample(&mut seed::rng(seed), n, m).into_vec();
    rows.sort_unstable();
    rows
}

/// Trains a regressor. Deterministic in `(family, setting, x, y, budget, seed)`.
pub fn fit(
    family: Family,
    setting: &ParamSetting,
    x: &FeatureMatrix,
    y: &[f64],
    budget: f64,
    seed: u64,
) -> Result<Regressor> {
    if x.n_rows() != y.len() {
        return Err(LearnerError::Data(format!(
            "{} feature rows but {} targets",
            x.n_rows(),
            y.len()
        )));
    }
    if y.len() < 2 {
        return Err(LearnerError::Data("need at least two training rows".into()));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(LearnerError::Data(format!("target {i} is not finite")));
    }
    if !(budget > 0.0 && budget <= 1.0) {
        return Err(LearnerError::Config(format!("budget {budget} outside (0, 1]")));
    }

    let rows = budget_rows(y.len(), budget, seed::derive(seed, &[0]));
    let (x_fit, y_fit);
    let (x, y) = if rows.len() == y.len() {
        (x, y)
    } else {
        x_fit = x.select_rows(&rows);
        y_fit = rows.iter().map(|&r| y[r]).collect::<Vec<_>>();
        (&x_fit, y_fit.as_slice())
    };

    let train_seed = seed::derive(seed, &[1]);
    let state = match family {
        Family::Mlp => FittedState::Mlp(MlpModel::fit(&MlpParams::from_setting(setting)?, x, y, train_seed)?),
        Family::Rf => FittedState::Forest(Forest::fit(&ForestParams::from_setting(setting)?, x, y, train_seed)),
        Family::Gb => FittedState::Boosted(BoostedModel::fit(
            &BoostParams::first_order(setting)?,
            x,
            y,
            train_seed,
        )),
        Family::XgbStyle => FittedState::Boosted(BoostedModel::fit(
            &BoostParams::second_order(setting)?,
            x,
            y,
            train_seed,
        )),
    };
    Ok(Regressor {
        family,
        setting: setting.clone(),
        columns: x.column_names().to_vec(),
        state,
    })
}

/// Predicts every row of `x`, which must have the training columns in order.
pub fn predict(model: &Regressor, x: &FeatureMatrix) -> Result<Vec<f64>> {
    if x.column_names() != model.columns.as_slice() {
        return Err(LearnerError::Schema {
            expected: model.columns.clone(),
            found: x.column_names().to_vec(),
        });
    }
    let pred: Vec<f64> = x.rows().map(|r| model.predict_row(r)).collect();
    if let Some(i) = pred.iter().position(|p| !p.is_finite()) {
        return Err(LearnerError::Diverged(format!("non-finite prediction for row {i}")));
    }
    Ok(pred)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_order_and_labels() {
        assert!(Family::Mlp < Family::Rf && Family::Rf < Family::Gb && Family::Gb < Family::XgbStyle);
        assert_eq!("xgb".parse::<Family>().unwrap(), Family::XgbStyle);
        assert_eq!(serde_json::to_string(&Family::XgbStyle).unwrap(), "\"XGB\"");
        assert!("svm".parse::<Family>().is_err());
    }

    #[test]
    fn budget_rows_sizes() {
        assert_eq!(budget_rows(10, 1.0, 0).len(), 10);
        assert_eq!(budget_rows(10, 0.25, 0).len(), 3);
        assert_eq!(budget_rows(10, 0.01, 0).len(), 2);
        assert_eq!(budget_rows(10, 0.5, 4), budget_rows(10, 0.5, 4));
    }
}
