#![allow(dead_code)]

use std::path::Path;

use mph_cli::{DataSource, RunConfig};
use mph_core::hpo::HpoConfig;
use mph_core::synth::{default_benchmark_config, SynthConfig};
use mph_core::{Family, PredictionMode};

/// A three-child, 120-day hierarchy that runs the full pipeline in seconds.
pub fn small_synth(seed: u64) -> SynthConfig {
    let mut c = default_benchmark_config(seed);
    c.n_days = 120;
    c.n_children = 3;
    c.base_levels.truncate(3);
    c.promo_effects.truncate(3);
    c.holiday_effects.truncate(3);
    c.dow_profiles.truncate(3);
    c
}

pub fn small_run(seed: u64, out: &Path) -> RunConfig {
    RunConfig {
        data: DataSource::Synth(small_synth(seed)),
        families: vec![Family::Rf, Family::Gb, Family::XgbStyle],
        hpo: HpoConfig {
            n_settings: 4,
            ..HpoConfig::default()
        },
        k: 3,
        seed,
        mode: PredictionMode::OutOfFold,
        baselines: true,
        out: out.to_path_buf(),
    }
}
