use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{build_tree, BinnedData, RegressionTree, TreeParams};
use super::{Params, Result};
use crate::dataset::FeatureMatrix;
use crate::hpo::ParamSetting;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or hit `min_samples_leaf`.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub feature_fraction: f64,
    pub bootstrap: bool,
}

impl ForestParams {
    /// Reads `n_trees`, `max_depth` (absent or 0 = unlimited),
    /// `min_samples_leaf`, `feature_fraction` and `bootstrap` (0/1, default 1).
    pub fn from_setting(setting: &ParamSetting) -> Result<Self> {
        let p = Params(setting);
        let feature_fraction = p.real("feature_fraction", Some(1.0))?;
        if !(feature_fraction > 0.0 && feature_fraction <= 1.0) {
            return Err(super::LearnerError::Config(format!(
                "`feature_fraction` = {feature_fraction}, must lie in (0, 1]"
            )));
        }
        let max_depth = p.count("max_depth", 0, Some(0))?;
        let bootstrap = p.count("bootstrap", 0, Some(1))?;
        if bootstrap > 1 {
            return Err(super::LearnerError::Config("`bootstrap` must be 0 or 1".into()));
        }
        Ok(ForestParams {
            n_trees: p.count("n_trees", 1, None)?,
            max_depth: (max_depth > 0).then_some(max_depth),
            min_samples_leaf: p.count("min_samples_leaf", 1, Some(1))?,
            feature_fraction,
            bootstrap: bootstrap == 1,
        })
    }
}

/// Bagged CART ensemble; predictions are the mean over trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
}

impl Forest {
    pub fn fit(params: &ForestParams, x: &FeatureMatrix, y: &[f64], seed: u64) -> Self {
        let data = BinnedData::new(x);
        let n = y.len();
        let grad: Vec<f64> = y.iter().map(|v| -v).collect();
        let hess = vec![1.0; n];
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
            lambda: 0.0,
            min_split_gain: 0.0,
            feature_fraction: params.feature_fraction,
        };
        let trees = (0..params.n_trees)
            .map(|t| {
                let mut rng = seed::rng(seed::derive(seed, &[t as u64]));
                let rows: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                build_tree(&data, rows, &grad, &hess, &tree_params, &mut rng)
            })
            .collect();
        Forest { trees }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }
}
