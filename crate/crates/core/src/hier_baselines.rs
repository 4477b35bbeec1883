//! Top-down proration and bottom-up aggregation baselines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("{0}")]
    Invalid(String),
    #[error("parent history is zero at row {0}")]
    ZeroParent(usize),
}

pub type Result<T, E = BaselineError> = std::result::Result<T, E>;

/// Child shares of the parent, each in `[0, 1]` on coherent nonnegative data,
/// summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proportions {
    pub shares: Vec<f64>,
}

impl Proportions {
    /// Rescales raw shares to sum to one.
    fn normalized(raw: Vec<f64>) -> Result<Self> {
        let total: f64 = raw.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(BaselineError::Invalid(format!("shares sum to {total}")));
        }
        Ok(Proportions {
            shares: raw.into_iter().map(|s| s / total).collect(),
        })
    }
}

fn check_shapes(children: &[Vec<f64>], parent: &[f64]) -> Result<()> {
    if children.is_empty() {
        return Err(BaselineError::Invalid("no child series".into()));
    }
    if let Some(j) = children.iter().position(|c| c.len() != parent.len()) {
        return Err(BaselineError::Invalid(format!(
            "child {j} has {} rows, parent has {}",
            children[j].len(),
            parent.len()
        )));
    }
    if parent.is_empty() {
        return Err(BaselineError::Invalid("empty history".into()));
    }
    Ok(())
}

/// Sum of child forecasts.
pub fn bottom_up_parent(child_forecasts: &[Vec<f64>]) -> Result<Vec<f64>> {
    dataset::aggregate_children(child_forecasts).map_err(|e| BaselineError::Invalid(e.to_string()))
}

/// Average historical proportions: `share_j = mean_t(child_j[t] / parent[t])`.
pub fn proportions_ahp(child_history: &[Vec<f64>], parent_history: &[f64]) -> Result<Proportions> {
    check_shapes(child_history, parent_history)?;
    if let Some(t) = parent_history.iter().position(|&p| p == 0.0) {
        return Err(BaselineError::ZeroParent(t));
    }
    let n = parent_history.len() as f64;
    let raw = child_history
        .iter()
        .map(|c| c.iter().zip(parent_history).map(|(v, p)| v / p).sum::<f64>() / n)
        .collect();
    Proportions::normalized(raw)
}

/// Proportions of historical averages: `share_j = sum(child_j) / sum(parent)`.
pub fn proportions_pha(child_history: &[Vec<f64>], parent_history: &[f64]) -> Result<Proportions> {
    check_shapes(child_history, parent_history)?;
    let total: f64 = parent_history.iter().sum();
    if total <= 0.0 {
        return Err(BaselineError::Invalid("parent history sums to zero".into()));
    }
    let raw = child_history.iter().map(|c| c.iter().sum::<f64>() / total).collect();
    Proportions::normalized(raw)
}

/// Disaggregates a parent forecast: `child_j = share_j * parent`.
pub fn top_down_children(parent_forecast: &[f64], props: &Proportions) -> Vec<Vec<f64>> {
    props
        .shares
        .iter()
        .map(|s| parent_forecast.iter().map(|p| s * p).collect())
        .collect()
}

/// `round(100 * (baseline - value) / baseline)`, halves away from zero.
pub fn improvement(baseline: f64, value: f64) -> Result<i64> {
    if baseline.is_nan() || baseline <= 0.0 {
        return Err(BaselineError::Invalid(format!("baseline MAE {baseline} must be positive")));
    }
    Ok((100.0 * (baseline - value) / baseline).round() as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentComparison {
    pub mph_mae: f64,
    pub top_down_mae: f64,
    pub bottom_up_mae: f64,
    pub improvement_vs_top_down: i64,
    pub improvement_vs_bottom_up: i64,
}

/// Percent improvement of the MPH parent MAE over both baselines.
pub fn compare_parent(mph_mae: f64, top_down_mae: f64, bottom_up_mae: f64) -> Result<ParentComparison> {
    if mph_mae.is_nan() || mph_mae <= 0.0 {
        return Err(BaselineError::Invalid(format!("MPH MAE {mph_mae} must be positive")));
    }
    Ok(ParentComparison {
        mph_mae,
        top_down_mae,
        bottom_up_mae,
        improvement_vs_top_down: improvement(top_down_mae, mph_mae)?,
        improvement_vs_bottom_up: improvement(bottom_up_mae, mph_mae)?,
    })
}
