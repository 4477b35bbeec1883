use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::tree::{build_tree, BinnedData, RegressionTree, TreeParams};
use super::{LearnerError, Params, Result};
use crate::dataset::FeatureMatrix;
use crate::hpo::ParamSetting;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// Row share drawn (without replacement) for each tree.
    pub subsample: f64,
    pub min_samples_leaf: usize,
    /// L2 penalty on leaf weights; zero for first-order boosting.
    pub lambda: f64,
    pub min_split_gain: f64,
}

impl BoostParams {
    /// Gradient boosting: reads `n_trees`, `learning_rate`, `max_depth`,
    /// `subsample` (default 1) and `min_samples_leaf` (default 1).
    pub fn first_order(setting: &ParamSetting) -> Result<Self> {
        let p = Params(setting);
        let learning_rate = p.real("learning_rate", None)?;
        if learning_rate <= 0.0 {
            return Err(LearnerError::Config(format!(
                "`learning_rate` = {learning_rate}, must be positive"
            )));
        }
        let subsample = p.real("subsample", Some(1.0))?;
        if !(subsample > 0.0 && subsample <= 1.0) {
            return Err(LearnerError::Config(format!(
                "`subsample` = {subsample}, must lie in (0, 1]"
            )));
        }
        Ok(BoostParams {
            n_trees: p.count("n_trees", 0, None)?,
            learning_rate,
            max_depth: p.count("max_depth", 1, None)?,
            subsample,
            min_samples_leaf: p.count("min_samples_leaf", 1, Some(1))?,
            lambda: 0.0,
            min_split_gain: 0.0,
        })
    }

    /// Second-order boosting: the first-order keys plus `lambda` and
    /// `min_split_gain` (both default 0).
    pub fn second_order(setting: &ParamSetting) -> Result<Self> {
        let p = Params(setting);
        let lambda = p.real("lambda", Some(0.0))?;
        let min_split_gain = p.real("min_split_gain", Some(0.0))?;
        if lambda < 0.0 || min_split_gain < 0.0 {
            return Err(LearnerError::Config(
                "`lambda` and `min_split_gain` must be nonnegative".into(),
            ));
        }
        Ok(BoostParams {
            lambda,
            min_split_gain,
            ..Self::first_order(setting)?
        })
    }
}

/// Additive tree ensemble on squared loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub base_score: f64,
    pub learning_rate: f64,
    /// Raw leaf weights; predictions scale them by `learning_rate`.
    pub trees: Vec<RegressionTree>,
    /// Training MSE after the base score and after each tree.
    pub train_loss: Vec<f64>,
}

impl BoostedModel {
    pub fn fit(params: &BoostParams, x: &FeatureMatrix, y: &[f64], seed: u64) -> Self {
        let data = BinnedData::new(x);
        let n = y.len();
        let base_score = y.iter().sum::<f64>() / n as f64;
        let mut pred = vec![base_score; n];
        let hess = vec![1.0; n];
        let mut grad = vec![0.0; n];
        let mse = |pred: &[f64]| pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n as f64;
        let mut train_loss = vec![mse(&pred)];
        let tree_params = TreeParams {
            max_depth: Some(params.max_depth),
            min_samples_leaf: params.min_samples_leaf,
            lambda: params.lambda,
            min_split_gain: params.min_split_gain,
            feature_fraction: 1.0,
        };
        let n_sub = ((params.subsample * n as f64).ceil() as usize).clamp(1, n);
        let mut trees = Vec::with_capacity(params.n_trees);
        for t in 0..params.n_trees {
            let mut rng = seed::rng(seed::derive(seed, &[t as u64]));
            for ((g, p), target) in grad.iter_mut().zip(&pred).zip(y) {
                *g = p - target;
            }
            let rows = if n_sub == n {
                (0..n).collect()
            } else {
                let mut r = index::sample(&mut rng, n, n_sub).into_vec();
                r.sort_unstable();
                r
            };
            let tree = build_tree(&data, rows, &grad, &hess, &tree_params, &mut rng);
            for (r, p) in pred.iter_mut().enumerate() {
                *p += params.learning_rate * tree.predict_binned(&data, r);
            }
            train_loss.push(mse(&pred));
            trees.push(tree);
        }
        BoostedModel {
            base_score,
            learning_rate: params.learning_rate,
            trees,
            train_loss,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base_score
            + self.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setting(n_trees: i64, lr: f64) -> ParamSetting {
        ParamSetting::new()
            .with("n_trees", n_trees)
            .with("learning_rate", lr)
            .with("max_depth", 3i64)
    }

    #[test]
    fn rejects_nonpositive_learning_rate() {
        assert!(BoostParams::first_order(&setting(10, 0.0)).is_err());
        assert!(BoostParams::first_order(&setting(10, -0.1)).is_err());
        assert!(BoostParams::second_order(&setting(10, 0.1).with("lambda", -1.0)).is_err());
    }

    #[test]
    fn empty_ensemble_predicts_mean() {
        let x = FeatureMatrix::from_rows(vec!["a".into()], &[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let m = BoostedModel::fit(&BoostParams::first_order(&setting(0, 0.1)).unwrap(), &x, &[1.0, 2.0, 6.0], 0);
        assert_eq!(m.predict_row(&[10.0]), 3.0);
    }
}
