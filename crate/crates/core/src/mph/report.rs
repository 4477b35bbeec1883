//! Baseline comparisons attached to a report.

use serde::{Deserialize, Serialize};

use super::{fold_mae, MphError, Phase1, Result};
use crate::classical::{ClassicalForecaster, ClassicalScore, Method};
use crate::dataset::{HierarchyBundle, SeriesId};
use crate::evaluation::FoldPlan;
use crate::hier_baselines::{self, ParentComparison, Proportions};
use crate::learners::Family;

/// One Phase I parent family against the final MPH MAE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub family: Family,
    pub mae: f64,
    pub mph_mae: f64,
    pub improvement: i64,
}

/// Child-level accuracy of prorating the Phase I parent forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChildDisaggregation {
    pub series: SeriesId,
    /// The child's own Phase I MAE.
    pub phase1_mae: f64,
    pub ahp_mae: Option<f64>,
    pub pha_mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparisons {
    /// MPH against top-down (Phase I parent winner) and bottom-up (sum of
    /// held-out child forecasts), both scored on the shared folds.
    pub parent: ParentComparison,
    pub ml_models: Vec<ModelComparison>,
    pub child_top_down: Vec<ChildDisaggregation>,
    pub notes: Vec<String>,
}

pub(super) fn comparisons(
    bundle: &HierarchyBundle,
    p1: &Phase1,
    final_mae: f64,
    plan: &FoldPlan,
) -> Result<Comparisons> {
    let stage = "comparisons";
    let eval = |source| MphError::Eval { stage, source };
    let baseline = |source| MphError::Baseline { stage, source };
    let actual = &bundle.parent.target;

    let child_oof: Vec<Vec<f64>> = p1.children.iter().map(|c| c.oof_predictions.clone()).collect();
    let bottom_up_mae = if child_oof.is_empty() {
        f64::NAN
    } else {
        let summed = hier_baselines::bottom_up_parent(&child_oof).map_err(baseline)?;
        fold_mae(actual, &summed, plan).map_err(eval)?
    };
    let top_down_mae = p1.parent.selection.min_mae;
    let parent = if child_oof.is_empty() {
        ParentComparison {
            mph_mae: final_mae,
            top_down_mae,
            bottom_up_mae,
            improvement_vs_top_down: hier_baselines::improvement(top_down_mae, final_mae).map_err(baseline)?,
            improvement_vs_bottom_up: 0,
        }
    } else {
        hier_baselines::compare_parent(final_mae, top_down_mae, bottom_up_mae).map_err(baseline)?
    };

    let ml_models = p1
        .parent
        .scores
        .iter()
        .map(|s| {
            Ok(ModelComparison {
                family: s.family,
                mae: s.mae,
                mph_mae: final_mae,
                improvement: hier_baselines::improvement(s.mae, final_mae).map_err(baseline)?,
            })
        })
        .collect::<Result<_>>()?;

    let mut notes = Vec::new();
    let history = bundle.child_targets();
    let mut prorate = |name: &str, props: std::result::Result<Proportions, hier_baselines::BaselineError>| {
        match props {
            Ok(p) => Some(hier_baselines::top_down_children(&p1.parent.oof_predictions, &p)),
            Err(e) => {
                notes.push(format!("{name} proration unavailable: {e}"));
                None
            }
        }
    };
    let ahp = if history.is_empty() {
        None
    } else {
        prorate("AHP", hier_baselines::proportions_ahp(&history, actual))
    };
    let pha = if history.is_empty() {
        None
    } else {
        prorate("PHA", hier_baselines::proportions_pha(&history, actual))
    };
    let child_top_down = p1
        .children
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let target = &bundle.children[j].target;
            let score = |f: &Option<Vec<Vec<f64>>>| -> Result<Option<f64>> {
                f.as_ref().map(|f| fold_mae(target, &f[j], plan).map_err(eval)).transpose()
            };
            Ok(ChildDisaggregation {
                series: c.series,
                phase1_mae: c.selection.min_mae,
                ahp_mae: score(&ahp)?,
                pha_mae: score(&pha)?,
            })
        })
        .collect::<Result<_>>()?;

    Ok(Comparisons {
        parent,
        ml_models,
        child_top_down,
        notes,
    })
}

/// A classical method against the Phase I and Phase II parent MAEs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalRow {
    pub method: Method,
    pub forecaster: ClassicalForecaster,
    pub mae: f64,
    pub phase1_mae: f64,
    pub phase1_improvement: Option<i64>,
    pub phase2_mae: f64,
    pub phase2_improvement: Option<i64>,
}

/// Classical methods scored by rolling-origin one-step MAE over the final
/// `holdout` days. The ML columns are k-fold MAEs, so the two protocols differ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalComparison {
    pub holdout: usize,
    pub protocol: String,
    pub rows: Vec<ClassicalRow>,
}

impl ClassicalComparison {
    pub(super) fn new(holdout: usize, scores: Vec<ClassicalScore>) -> Self {
        ClassicalComparison {
            holdout,
            protocol: format!(
                "classical: rolling-origin one-step MAE over the last {holdout} days; MPH: shuffled k-fold MAE"
            ),
            rows: scores
                .into_iter()
                .map(|s| ClassicalRow {
                    method: s.method,
                    forecaster: s.forecaster,
                    mae: s.mae,
                    phase1_mae: f64::NAN,
                    phase1_improvement: None,
                    phase2_mae: f64::NAN,
                    phase2_improvement: None,
                })
                .collect(),
        }
    }

    pub(super) fn with_mph(mut self, parent: &ParentComparison) -> Self {
        for row in &mut self.rows {
            row.phase1_mae = parent.top_down_mae;
            row.phase2_mae = parent.mph_mae;
            row.phase1_improvement = hier_baselines::improvement(row.mae, parent.top_down_mae).ok();
            row.phase2_improvement = hier_baselines::improvement(row.mae, parent.mph_mae).ok();
        }
        self
    }

    pub fn row(&self, method: Method) -> Option<&ClassicalRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}
