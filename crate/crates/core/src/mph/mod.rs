//! The two-phase pipeline.
//!
//! Phase I tunes every learner family on every series (children and parent),
//! keeps the family with the lowest k-fold MAE per series and records that
//! winner's predictions. Phase II appends those prediction vectors to the
//! parent's features and repeats the selection for the parent alone.
//!
//! All series and both phases share one fold plan, `kfold_split(n, k, seed)`,
//! so every MAE in a report is computed on the same splits.

mod report;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{
    ChildDisaggregation, ClassicalComparison, ClassicalRow, Comparisons, ModelComparison,
};

use crate::classical::{self, ClassicalError, Method};
use crate::dataset::{DatasetError, FeatureMatrix, HierarchyBundle, SeriesId};
use crate::evaluation::{self, kfold_split, select_best, EvalError, FoldPlan, Selection};
use crate::hier_baselines::{self, BaselineError};
use crate::hpo::{self, HpoConfig, HpoError, ParamSetting, ParamSpace, Trial};
use crate::learners::{self, Family};
use crate::seed;

#[derive(Debug, Error)]
pub enum MphError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{stage}, {series}: every family failed ({details})")]
    AllFamiliesFailed {
        stage: &'static str,
        series: SeriesId,
        details: String,
    },
    #[error("{stage}: {source}")]
    Dataset {
        stage: &'static str,
        #[source]
        source: DatasetError,
    },
    #[error("{stage}: {source}")]
    Eval {
        stage: &'static str,
        #[source]
        source: EvalError,
    },
    #[error("{stage}: {source}")]
    Baseline {
        stage: &'static str,
        #[source]
        source: BaselineError,
    },
    #[error("classical baselines: {0}")]
    Classical(#[from] ClassicalError),
    #[error("{stage}: {message}")]
    Refit { stage: &'static str, message: String },
}

pub type Result<T, E = MphError> = std::result::Result<T, E>;

/// Source of the Phase I prediction vectors fed to Phase II.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMode {
    /// The winner refit on all rows, predicting those same rows.
    InSample,
    /// Each row predicted by the fold model that did not train on it.
    #[default]
    OutOfFold,
}

impl PredictionMode {
    pub fn label(&self) -> &'static str {
        match self {
            PredictionMode::InSample => "in-sample",
            PredictionMode::OutOfFold => "out-of-fold",
        }
    }
}

impl std::str::FromStr for PredictionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "insample" => Ok(PredictionMode::InSample),
            "oof" | "outoffold" => Ok(PredictionMode::OutOfFold),
            other => Err(format!("unknown prediction mode `{other}` (expected insample or oof)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MphConfig {
    pub families: Vec<Family>,
    pub hpo: HpoConfig,
    pub k: usize,
    pub seed: u64,
    pub mode: PredictionMode,
    /// Score the classical univariate methods against the parent.
    pub classical_baselines: bool,
    /// Per-family replacements for [`Family::default_space`].
    pub spaces: BTreeMap<Family, ParamSpace>,
}

impl Default for MphConfig {
    fn default() -> Self {
        MphConfig {
            families: Family::ALL.to_vec(),
            hpo: HpoConfig::default(),
            k: 5,
            seed: 0,
            mode: PredictionMode::OutOfFold,
            classical_baselines: true,
            spaces: BTreeMap::new(),
        }
    }
}

impl MphConfig {
    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(MphError::Config("no learner families selected".into()));
        }
        if self.k < 2 {
            return Err(MphError::Config(format!("k = {}, need at least 2", self.k)));
        }
        self.hpo.validate().map_err(|e| MphError::Config(e.to_string()))
    }

    pub fn space(&self, family: Family) -> ParamSpace {
        self.spaces.get(&family).cloned().unwrap_or_else(|| family.default_space())
    }

    /// Families in tie-breaking order without duplicates.
    fn ordered_families(&self) -> Vec<Family> {
        let mut f = self.families.clone();
        f.sort();
        f.dedup();
        f
    }
}

/// Result of tuning one family on one series.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyOutcome {
    pub setting: ParamSetting,
    pub mae: f64,
    pub fold_maes: Vec<f64>,
    pub oof_predictions: Vec<f64>,
    pub trace: Vec<Trial>,
}

/// Produces per-family scores for a series. The pipeline uses
/// [`HpoScorer`]; tests substitute fixed tables.
pub trait FamilyScorer: Sync {
    fn score(
        &self,
        series: SeriesId,
        family: Family,
        x: &FeatureMatrix,
        y: &[f64],
    ) -> std::result::Result<FamilyOutcome, String>;

    /// Predictions of `setting` refit on all of `(x, y)` for the rows of `x`.
    fn in_sample(
        &self,
        family: Family,
        setting: &ParamSetting,
        x: &FeatureMatrix,
        y: &[f64],
    ) -> std::result::Result<Vec<f64>, String>;
}

/// Seed of the all-rows refit used for in-sample predictions.
pub fn in_sample_seed(seed: u64) -> u64 {
    seed::derive(seed, &[6])
}

/// Tunes each family with [`hpo::optimize`] under the shared fold plan.
pub struct HpoScorer<'a> {
    pub config: &'a MphConfig,
}

impl FamilyScorer for HpoScorer<'_> {
    fn score(
        &self,
        _series: SeriesId,
        family: Family,
        x: &FeatureMatrix,
        y: &[f64],
    ) -> std::result::Result<FamilyOutcome, String> {
        let c = self.config;
        let out = hpo::optimize(family, &c.space(family), x, y, &c.hpo, c.k, c.seed).map_err(|e: HpoError| e.to_string())?;
        Ok(FamilyOutcome {
            setting: out.best,
            mae: out.best_mae,
            fold_maes: out.score.fold_maes,
            oof_predictions: out.oof_predictions,
            trace: out.trace,
        })
    }

    fn in_sample(
        &self,
        family: Family,
        setting: &ParamSetting,
        x: &FeatureMatrix,
        y: &[f64],
    ) -> std::result::Result<Vec<f64>, String> {
        learners::fit(family, setting, x, y, 1.0, in_sample_seed(self.config.seed))
            .and_then(|m| learners::predict(&m, x))
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyScore {
    pub family: Family,
    pub mae: f64,
    pub fold_maes: Vec<f64>,
    pub setting: ParamSetting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyFailure {
    pub family: Family,
    pub error: String,
}

/// Winning family of a series and its recorded predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestForecast {
    pub series: SeriesId,
    pub family: Family,
    pub setting: ParamSetting,
    pub cv_mae: f64,
    pub predictions: Vec<f64>,
    pub prediction_mode: PredictionMode,
}

/// Score table and winner of one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesResult {
    pub series: SeriesId,
    pub scores: Vec<FamilyScore>,
    pub failures: Vec<FamilyFailure>,
    pub selection: Selection,
    pub best: BestForecast,
    /// Held-out predictions of the winner; equal to `best.predictions` in
    /// out-of-fold mode.
    #[serde(skip)]
    pub oof_predictions: Vec<f64>,
    /// HPO trials per family, in family order.
    #[serde(skip)]
    pub traces: Vec<(Family, Vec<Trial>)>,
}

impl SeriesResult {
    pub fn score(&self, family: Family) -> Option<&FamilyScore> {
        self.scores.iter().find(|s| s.family == family)
    }

    /// `(family, mae)` pairs as fed to [`select_best`].
    pub fn score_map(&self) -> Vec<(Family, f64)> {
        self.scores.iter().map(|s| (s.family, s.mae)).collect()
    }
}

/// Scores every family on one series and selects the winner.
pub fn run_series<S: FamilyScorer + ?Sized>(
    stage: &'static str,
    series: SeriesId,
    x: &FeatureMatrix,
    y: &[f64],
    families: &[Family],
    scorer: &S,
    mode: PredictionMode,
) -> Result<SeriesResult> {
    let outcomes: Vec<(Family, std::result::Result<FamilyOutcome, String>)> = families
        .par_iter()
        .map(|&f| (f, scorer.score(series, f, x, y)))
        .collect();
    let mut scores = Vec::new();
    let mut failures = Vec::new();
    let mut winners = BTreeMap::new();
    let mut traces = Vec::new();
    for (family, outcome) in outcomes {
        match outcome {
            Ok(o) if o.mae.is_finite() && o.oof_predictions.len() == y.len() => {
                scores.push(FamilyScore {
                    family,
                    mae: o.mae,
                    fold_maes: o.fold_maes,
                    setting: o.setting,
                });
                traces.push((family, o.trace));
                winners.insert(family, o.oof_predictions);
            }
            Ok(o) => failures.push(FamilyFailure {
                family,
                error: format!(
                    "unusable outcome: mae {}, {} predictions for {} rows",
                    o.mae,
                    o.oof_predictions.len(),
                    y.len()
                ),
            }),
            Err(error) => failures.push(FamilyFailure { family, error }),
        }
    }
    if scores.is_empty() {
        return Err(MphError::AllFamiliesFailed {
            stage,
            series,
            details: failures
                .iter()
                .map(|f| format!("{}: {}", f.family, f.error))
                .collect::<Vec<_>>()
                .join("; "),
        });
    }
    let selection = select_best(&scores.iter().map(|s| (s.family, s.mae)).collect::<Vec<_>>())
        .map_err(|source| MphError::Eval { stage, source })?;
    let winner = scores
        .iter()
        .find(|s| s.family == selection.family)
        .expect("selection comes from the score table");
    let oof_predictions = winners.remove(&selection.family).expect("winner has predictions");
    let predictions = match mode {
        PredictionMode::OutOfFold => oof_predictions.clone(),
        PredictionMode::InSample => scorer
            .in_sample(selection.family, &winner.setting, x, y)
            .map_err(|message| MphError::Refit { stage, message })?,
    };
    Ok(SeriesResult {
        series,
        best: BestForecast {
            series,
            family: selection.family,
            setting: winner.setting.clone(),
            cv_mae: winner.mae,
            predictions,
            prediction_mode: mode,
        },
        scores,
        failures,
        selection,
        oof_predictions,
        traces,
    })
}

/// Phase I results: children in index order, then the parent.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase1 {
    pub children: Vec<SeriesResult>,
    pub parent: SeriesResult,
}

impl Phase1 {
    pub fn forecasts(&self) -> Vec<BestForecast> {
        self.children
            .iter()
            .chain(std::iter::once(&self.parent))
            .map(|r| r.best.clone())
            .collect()
    }

    /// Same scores with predictions in `mode`, refitting winners if needed.
    fn with_mode<S: FamilyScorer + ?Sized>(
        &self,
        bundle: &HierarchyBundle,
        scorer: &S,
        mode: PredictionMode,
    ) -> Result<Phase1> {
        let convert = |r: &SeriesResult| -> Result<SeriesResult> {
            let mut r = r.clone();
            if r.best.prediction_mode != mode {
                r.best.predictions = match mode {
                    PredictionMode::OutOfFold => r.oof_predictions.clone(),
                    PredictionMode::InSample => {
                        let node = bundle.node(r.series).expect("series comes from the bundle");
                        scorer
                            .in_sample(r.best.family, &r.best.setting, &node.features, &node.target)
                            .map_err(|message| MphError::Refit {
                                stage: "phase I",
                                message,
                            })?
                    }
                };
                r.best.prediction_mode = mode;
            }
            Ok(r)
        };
        Ok(Phase1 {
            children: self.children.par_iter().map(convert).collect::<Result<_>>()?,
            parent: convert(&self.parent)?,
        })
    }
}

/// Phase I with a custom scorer.
pub fn phase1_with<S: FamilyScorer + ?Sized>(
    bundle: &HierarchyBundle,
    families: &[Family],
    scorer: &S,
    mode: PredictionMode,
) -> Result<Phase1> {
    if families.is_empty() {
        return Err(MphError::Config("no learner families selected".into()));
    }
    let mut results: Vec<SeriesResult> = bundle
        .series_ids()
        .par_iter()
        .map(|&id| {
            let node = bundle.node(id).expect("series id from bundle");
            run_series("phase I", id, &node.features, &node.target, families, scorer, mode)
        })
        .collect::<Result<_>>()?;
    let parent = results.pop().expect("bundle has a parent");
    Ok(Phase1 {
        children: results,
        parent,
    })
}

/// Phase I: per-series HPO, k-fold scoring and selection.
pub fn phase1(bundle: &HierarchyBundle, config: &MphConfig) -> Result<Phase1> {
    config.validate()?;
    phase1_with(bundle, &config.ordered_families(), &HpoScorer { config }, config.mode)
}

/// Appends `mph_child_0..mph_child_{n-1}` and `mph_parent` prediction columns.
pub fn augment_parent(parent_x: &FeatureMatrix, forecasts: &[BestForecast]) -> Result<FeatureMatrix> {
    let stage = "phase II augmentation";
    let mut children: Vec<&BestForecast> = forecasts.iter().filter(|f| !f.series.is_parent()).collect();
    children.sort_by_key(|f| f.series.index);
    let parents: Vec<&BestForecast> = forecasts.iter().filter(|f| f.series.is_parent()).collect();
    let invalid = |msg: String| MphError::Dataset {
        stage,
        source: DatasetError::Invalid(msg),
    };
    if parents.len() != 1 {
        return Err(invalid(format!("expected one parent forecast, got {}", parents.len())));
    }
    if children.iter().enumerate().any(|(j, f)| f.series.index != j) {
        return Err(invalid("child forecasts must be indexed 0..n-1 without gaps".into()));
    }
    let ordered: Vec<&BestForecast> = children.into_iter().chain(parents).collect();
    if let Some(f) = ordered.iter().find(|f| f.predictions.len() != parent_x.n_rows()) {
        return Err(invalid(format!(
            "{} forecast has {} rows, parent features have {}",
            f.series,
            f.predictions.len(),
            parent_x.n_rows()
        )));
    }
    let names: Vec<String> = ordered.iter().map(|f| format!("mph_{}", f.series)).collect();
    let columns: Vec<Vec<f64>> = ordered.iter().map(|f| f.predictions.clone()).collect();
    parent_x
        .with_appended_columns(&names, &columns)
        .map_err(|source| MphError::Dataset { stage, source })
}

/// Phase II with a custom scorer: selection on the augmented parent data.
pub fn phase2_with<S: FamilyScorer + ?Sized>(
    augmented_x: &FeatureMatrix,
    parent_y: &[f64],
    families: &[Family],
    scorer: &S,
) -> Result<SeriesResult> {
    run_series(
        "phase II",
        SeriesId::PARENT,
        augmented_x,
        parent_y,
        families,
        scorer,
        PredictionMode::OutOfFold,
    )
}

/// Phase II: the Phase I procedure on the augmented parent only.
pub fn phase2(augmented_x: &FeatureMatrix, parent_y: &[f64], config: &MphConfig) -> Result<SeriesResult> {
    config.validate()?;
    phase2_with(augmented_x, parent_y, &config.ordered_families(), &HpoScorer { config })
}

/// `round(100 * (baseline - final) / baseline)`, halves away from zero.
pub fn improvement(baseline: f64, final_mae: f64) -> Result<i64> {
    hier_baselines::improvement(baseline, final_mae).map_err(|source| MphError::Baseline {
        stage: "comparisons",
        source,
    })
}

/// Full output of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MphReport {
    pub mode: PredictionMode,
    pub seed: u64,
    pub k: usize,
    pub n_settings: usize,
    pub families: Vec<Family>,
    pub n_rows: usize,
    pub n_children: usize,
    pub coherent: bool,
    pub phase1_children: Vec<SeriesResult>,
    pub phase1_parent: SeriesResult,
    pub phase2_parent: SeriesResult,
    /// Minimum of the Phase II score table.
    pub final_mae: f64,
    pub comparisons: Comparisons,
    pub classical: Option<ClassicalComparison>,
    pub warnings: Vec<String>,
}

/// Runs Phase I once and completes the pipeline for each requested mode.
pub fn run_mph_modes(bundle: &HierarchyBundle, config: &MphConfig, modes: &[PredictionMode]) -> Result<Vec<MphReport>> {
    config.validate()?;
    let scorer = HpoScorer { config };
    let families = config.ordered_families();
    let base = phase1_with(bundle, &families, &scorer, PredictionMode::OutOfFold)?;
    let plan = kfold_split(bundle.n_rows(), config.k, config.seed).map_err(|source| MphError::Eval {
        stage: "fold plan",
        source,
    })?;
    let classical = if config.classical_baselines {
        Some(classical_comparison(bundle)?)
    } else {
        None
    };

    modes
        .iter()
        .map(|&mode| {
            let p1 = base.with_mode(bundle, &scorer, mode)?;
            let augmented = augment_parent(&bundle.parent.features, &p1.forecasts())?;
            let p2 = phase2_with(&augmented, &bundle.parent.target, &families, &scorer)?;
            let final_mae = p2.selection.min_mae;
            let comparisons = report::comparisons(bundle, &p1, final_mae, &plan)?;
            let mut warnings = Vec::new();
            if !bundle.coherent {
                warnings.push(
                    "parent demand differs from the sum of children; bottom-up and proration baselines assume coherence"
                        .to_string(),
                );
            }
            Ok(MphReport {
                mode,
                seed: config.seed,
                k: config.k,
                n_settings: config.hpo.n_settings,
                families: families.clone(),
                n_rows: bundle.n_rows(),
                n_children: bundle.n_children(),
                coherent: bundle.coherent,
                phase1_children: p1.children,
                phase1_parent: p1.parent,
                phase2_parent: p2,
                final_mae,
                classical: classical.clone().map(|c| c.with_mph(&comparisons.parent)),
                comparisons,
                warnings,
            })
        })
        .collect()
}

/// Phase I, augmentation, Phase II and baseline comparisons.
pub fn run_mph(bundle: &HierarchyBundle, config: &MphConfig) -> Result<MphReport> {
    Ok(run_mph_modes(bundle, config, &[config.mode])?.remove(0))
}

/// Rolling-origin scores of the classical methods on the parent series,
/// before the MPH columns are filled in.
fn classical_comparison(bundle: &HierarchyBundle) -> Result<ClassicalComparison> {
    let y = &bundle.parent.target;
    let holdout = classical::default_holdout(y.len());
    let scores = classical::benchmark(&Method::ALL, y, Some(&bundle.parent.features), holdout)?;
    Ok(ClassicalComparison::new(holdout, scores))
}

/// Mean of per-fold MAEs of a prediction vector under `plan`.
pub fn fold_mae(actual: &[f64], predicted: &[f64], plan: &FoldPlan) -> Result<f64, EvalError> {
    let mut total = 0.0;
    for fold in 0..plan.k {
        let rows = plan.test_rows(fold);
        let a: Vec<f64> = rows.iter().map(|&r| actual[r]).collect();
        let p: Vec<f64> = rows.iter().map(|&r| predicted[r]).collect();
        total += evaluation::mae(&a, &p)?;
    }
    Ok(total / plan.k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn improvement_examples() {
        assert_eq!(improvement(3068.0, 303.0).unwrap(), 90);
        assert_eq!(improvement(1672.0, 303.0).unwrap(), 82);
        assert_eq!(improvement(42.0, 42.0).unwrap(), 0);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("oof".parse::<PredictionMode>(), Ok(PredictionMode::OutOfFold));
        assert_eq!("InSample".parse::<PredictionMode>(), Ok(PredictionMode::InSample));
        assert_eq!("in-sample".parse::<PredictionMode>(), Ok(PredictionMode::InSample));
        assert!("both".parse::<PredictionMode>().is_err());
        assert_eq!(PredictionMode::default(), PredictionMode::OutOfFold);
    }

    fn forecast(series: SeriesId, v: f64, n: usize) -> BestForecast {
        BestForecast {
            series,
            family: Family::Gb,
            setting: ParamSetting::new(),
            cv_mae: 1.0,
            predictions: vec![v; n],
            prediction_mode: PredictionMode::OutOfFold,
        }
    }

    #[test]
    fn augmentation_appends_in_order() {
        let x = FeatureMatrix::from_rows(vec!["a".into()], &[vec![1.0], vec![2.0]]).unwrap();
        let f = vec![
            forecast(SeriesId::PARENT, 9.0, 2),
            forecast(SeriesId::child(1), 5.0, 2),
            forecast(SeriesId::child(0), 4.0, 2),
        ];
        let aug = augment_parent(&x, &f).unwrap();
        assert_eq!(aug.column_names(), ["a", "mph_child_0", "mph_child_1", "mph_parent"]);
        assert_eq!(aug.row(1), [2.0, 4.0, 5.0, 9.0]);

        let only_parent = augment_parent(&x, &f[..1]).unwrap();
        assert_eq!(only_parent.n_cols(), 2);
        assert!(augment_parent(&x, &[forecast(SeriesId::PARENT, 1.0, 3)]).is_err());
        assert!(augment_parent(&x, &f[1..]).is_err());
    }
}
