use std::collections::BTreeMap;

use mph_core::dataset::{FeatureMatrix, HierarchyBundle, SeriesId};
use mph_core::evaluation::{kfold_split, select_best};
use mph_core::hpo::{HpoConfig, ParamSetting};
use mph_core::mph::{
    self, augment_parent, phase1_with, phase2_with, run_mph_modes, FamilyOutcome, FamilyScorer, MphConfig,
};
use mph_core::synth::{self, default_benchmark_config};
use mph_core::{Family, PredictionMode};

/// Scores read from a fixed table; predictions encode the series and family.
struct TableScorer {
    maes: BTreeMap<(SeriesId, Family), f64>,
}

fn encode(series: SeriesId, family: Family, in_sample: bool) -> f64 {
    let s = if series.is_parent() { 100.0 } else { series.index as f64 };
    s * 10.0 + family as u8 as f64 + if in_sample { 0.5 } else { 0.0 }
}

impl FamilyScorer for TableScorer {
    fn score(&self, series: SeriesId, family: Family, _x: &FeatureMatrix, y: &[f64]) -> Result<FamilyOutcome, String> {
        let mae = *self.maes.get(&(series, family)).ok_or("no score")?;
        Ok(FamilyOutcome {
            setting: ParamSetting::new().with("family", family.label()),
            mae,
            fold_maes: vec![mae],
            oof_predictions: vec![encode(series, family, false); y.len()],
            trace: Vec::new(),
        })
    }

    fn in_sample(&self, family: Family, _s: &ParamSetting, x: &FeatureMatrix, _y: &[f64]) -> Result<Vec<f64>, String> {
        Ok(vec![-(family as u8 as f64) - 0.5; x.n_rows()])
    }
}

fn fixture_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).take(4).map(|c| c.parse().unwrap()).collect())
        .collect()
}

/// The four family cells of a single-row parent table.
fn parent_row(text: &str) -> Vec<f64> {
    text.lines().nth(1).unwrap().split(',').take(4).map(|c| c.parse().unwrap()).collect()
}

fn ten_child_bundle() -> HierarchyBundle {
    let mut c = default_benchmark_config(0);
    c.n_days = 40;
    synth::generate(&c).unwrap()
}

fn table_scorer() -> TableScorer {
    let mut maes = BTreeMap::new();
    for (j, row) in fixture_rows(include_str!("fixtures/phase1_children.csv")).iter().enumerate() {
        for (f, &m) in Family::ALL.iter().zip(row) {
            maes.insert((SeriesId::child(j), *f), m);
        }
    }
    let parent = parent_row(include_str!("fixtures/phase1_parent.csv"));
    for (f, &m) in Family::ALL.iter().zip(&parent) {
        maes.insert((SeriesId::PARENT, *f), m);
    }
    TableScorer { maes }
}

#[test]
fn stub_scores_select_the_fixture_winners() {
    let bundle = ten_child_bundle();
    let p1 = phase1_with(&bundle, &Family::ALL, &table_scorer(), PredictionMode::OutOfFold).unwrap();
    let winners: Vec<&str> = p1.children.iter().map(|c| c.selection.family.label()).collect();
    assert_eq!(winners, ["RF", "RF", "RF", "MLP", "RF", "RF", "MLP", "RF", "MLP", "RF"]);
    let mins: Vec<f64> = p1.children.iter().map(|c| c.selection.min_mae).collect();
    assert_eq!(mins, [339.0, 381.0, 557.0, 681.0, 343.0, 385.0, 676.0, 421.0, 537.0, 363.0]);
    assert_eq!(
        (p1.parent.selection.family, p1.parent.selection.range, p1.parent.selection.min_mae),
        (Family::Gb, 904.0, 3068.0)
    );
    for r in p1.children.iter().chain([&p1.parent]) {
        assert_eq!(r.selection, select_best(&r.score_map()).unwrap());
        assert_eq!(r.best.family, r.selection.family);
        assert_eq!(r.best.predictions, vec![encode(r.series, r.best.family, false); bundle.n_rows()]);
    }
}

#[test]
fn augmentation_appends_children_then_parent() {
    let bundle = ten_child_bundle();
    let p1 = phase1_with(&bundle, &Family::ALL, &table_scorer(), PredictionMode::OutOfFold).unwrap();
    let mut forecasts = p1.forecasts();
    forecasts.reverse();
    let base = &bundle.parent.features;
    let aug = augment_parent(base, &forecasts).unwrap();
    assert_eq!(aug.n_cols(), base.n_cols() + bundle.n_children() + 1);
    assert_eq!(&aug.column_names()[..base.n_cols()], base.column_names());
    for r in 0..base.n_rows() {
        assert_eq!(&aug.row(r)[..base.n_cols()], base.row(r));
    }
    let extra: Vec<&str> = aug.column_names()[base.n_cols()..].iter().map(String::as_str).collect();
    assert_eq!(extra[0], "mph_child_0");
    assert_eq!(extra[9], "mph_child_9");
    assert_eq!(extra[10], "mph_parent");
    assert_eq!(aug.get(0, base.n_cols() + 3), encode(SeriesId::child(3), Family::Mlp, false));

    forecasts.retain(|f| f.series != SeriesId::child(4));
    assert!(augment_parent(base, &forecasts).is_err());
}

#[test]
fn in_sample_mode_refits_only_the_winners() {
    let bundle = ten_child_bundle();
    let p1 = phase1_with(&bundle, &Family::ALL, &table_scorer(), PredictionMode::InSample).unwrap();
    for r in p1.children.iter().chain([&p1.parent]) {
        assert_eq!(r.best.prediction_mode, PredictionMode::InSample);
        assert_eq!(r.best.predictions[0], -(r.best.family as u8 as f64) - 0.5);
        assert_eq!(r.oof_predictions[0], encode(r.series, r.best.family, false));
    }
}

#[test]
fn phase_two_final_mae_is_the_table_minimum() {
    let bundle = ten_child_bundle();
    let p1 = phase1_with(&bundle, &Family::ALL, &table_scorer(), PredictionMode::OutOfFold).unwrap();
    let aug = augment_parent(&bundle.parent.features, &p1.forecasts()).unwrap();
    let phase2 = parent_row(include_str!("fixtures/phase2.csv"));
    let mut maes = BTreeMap::new();
    for (f, &m) in Family::ALL.iter().zip(&phase2) {
        maes.insert((SeriesId::PARENT, *f), m);
    }
    let p2 = phase2_with(&aug, &bundle.parent.target, &Family::ALL, &TableScorer { maes }).unwrap();
    assert_eq!((p2.selection.family, p2.selection.min_mae, p2.selection.range), (Family::XgbStyle, 303.0, 307.0));
    let c = mph_core::hier_baselines::compare_parent(p2.selection.min_mae, p1.parent.selection.min_mae, 1672.0).unwrap();
    assert_eq!((c.improvement_vs_top_down, c.improvement_vs_bottom_up), (90, 82));
}

#[test]
fn failing_families_are_recorded_not_fatal() {
    let bundle = ten_child_bundle();
    let mut scorer = table_scorer();
    scorer.maes.retain(|(_, f), _| *f != Family::Rf);
    let p1 = phase1_with(&bundle, &Family::ALL, &scorer, PredictionMode::OutOfFold).unwrap();
    assert_eq!(p1.children[0].selection.family, Family::XgbStyle);
    assert_eq!(p1.children[0].failures.len(), 1);
    scorer.maes.clear();
    let err = phase1_with(&bundle, &Family::ALL, &scorer, PredictionMode::OutOfFold).unwrap_err();
    assert!(err.to_string().contains("phase I"), "{err}");
}

fn small_config(seed: u64) -> MphConfig {
    MphConfig {
        families: vec![Family::Rf, Family::Gb],
        hpo: HpoConfig {
            n_settings: 4,
            ..HpoConfig::default()
        },
        k: 3,
        seed,
        classical_baselines: true,
        ..MphConfig::default()
    }
}

fn small_bundle(seed: u64) -> HierarchyBundle {
    let mut c = default_benchmark_config(seed);
    c.n_days = 90;
    c.n_children = 3;
    c.base_levels.truncate(3);
    c.promo_effects.truncate(3);
    c.holiday_effects.truncate(3);
    c.dow_profiles.truncate(3);
    synth::generate(&c).unwrap()
}

#[test]
fn end_to_end_report_is_consistent() {
    let bundle = small_bundle(4);
    let config = small_config(4);
    let reports = run_mph_modes(&bundle, &config, &[PredictionMode::OutOfFold, PredictionMode::InSample]).unwrap();
    let plan = kfold_split(bundle.n_rows(), 3, 4).unwrap();
    for r in &reports {
        let min = r.phase2_parent.scores.iter().map(|s| s.mae).fold(f64::INFINITY, f64::min);
        assert_eq!(r.final_mae, min);
        assert_eq!(r.comparisons.parent.mph_mae, r.final_mae);
        assert_eq!(r.comparisons.parent.top_down_mae, r.phase1_parent.selection.min_mae);
        let summed = mph_core::dataset::aggregate_children(
            &r.phase1_children.iter().map(|c| c.oof_predictions.clone()).collect::<Vec<_>>(),
        )
        .unwrap();
        assert_eq!(r.comparisons.parent.bottom_up_mae, mph::fold_mae(&bundle.parent.target, &summed, &plan).unwrap());
        assert_eq!(r.phase1_children.len(), 3);
        assert!(r.classical.as_ref().unwrap().rows.len() == 8);
        for c in r.phase1_children.iter().chain([&r.phase1_parent]) {
            assert_eq!(c.selection, select_best(&c.score_map()).unwrap());
            assert_eq!(c.best.prediction_mode, r.mode);
        }
    }
    // Phase I scores are shared between modes; only the fed predictions differ.
    assert_eq!(reports[0].phase1_parent.scores, reports[1].phase1_parent.scores);
    assert_ne!(reports[0].phase1_parent.best.predictions, reports[1].phase1_parent.best.predictions);

    let single = mph::run_mph(&bundle, &config).unwrap();
    assert_eq!(single, reports[0]);
}

#[test]
fn report_json_round_trips() {
    let bundle = small_bundle(9);
    let mut config = small_config(9);
    config.classical_baselines = false;
    let report = mph::run_mph(&bundle, &config).unwrap();
    let text = serde_json::to_string(&report).unwrap();
    let back: mph_core::MphReport = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
}
