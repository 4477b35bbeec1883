//! Multi-phase hierarchical (MPH) demand forecasting for two-level product
//! hierarchies.
//!
//! Every series in the hierarchy (one parent, `n` children) is forecast
//! independently by a set of multi-feature learners whose hyperparameters are
//! tuned with a Parzen-estimator sampler followed by successive halving under
//! shuffled k-fold MAE. The winning child and parent forecasts are then
//! appended to the parent's inputs and the parent is re-modelled.
//!
//! Module map:
//!
//! - [`dataset`]: CSV ingest, calendar features, hierarchy coherence.
//! - [`learners`]: MLP, random forest, gradient boosting and second-order boosting.
//! - [`classical`]: univariate comparison baselines.
//! - [`hpo`]: search spaces, Parzen sampler, successive halving, `optimize`.
//! - [`evaluation`]: MAE, fold plans, cross-validation and model selection.
//! - [`hier_baselines`]: top-down proration and bottom-up aggregation.
//! - [`mph`]: the two-phase pipeline and its report.
//! - [`synth`]: seeded synthetic hierarchies.

pub mod classical;
pub mod dataset;
pub mod evaluation;
pub mod hier_baselines;
pub mod hpo;
pub mod learners;
pub mod mph;
pub mod seed;
pub mod synth;

pub use dataset::{FeatureMatrix, HierarchyBundle, SeriesId};
pub use evaluation::{FoldPlan, ModelScore};
pub use hpo::{ParamSetting, ParamSpace, ParamValue, Trial};
pub use learners::{Family, Regressor};
pub use mph::{MphConfig, MphReport, PredictionMode};
