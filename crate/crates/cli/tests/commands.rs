mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use mph_cli::{cmd_compare, cmd_report, cmd_run, cmd_synth, read_report, report_json, DataSource};
use mph_core::dataset::{load_csv, ColumnSchema};
use mph_core::synth::default_benchmark_config;

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let headers = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (headers, rows)
}

#[test]
fn run_writes_consistent_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let summary = cmd_run(&common::small_run(11, &out)).unwrap();

    for name in ["phase1_children", "phase1_parent", "phase2", "comparisons", "classical_comparison"] {
        for ext in ["md", "csv"] {
            let p = out.join(format!("{name}.{ext}"));
            assert!(p.is_file(), "{} missing", p.display());
            assert!(summary.written.contains(&p));
        }
    }
    assert!(out.join("traces/phase1_child_0_RF.csv").is_file());
    assert!(out.join("traces/phase1_parent_XGB.csv").is_file());
    assert!(out.join("traces/phase2_parent_GB.csv").is_file());

    let (headers, rows) = read_csv(&out.join("phase1_children.csv"));
    assert_eq!(headers, ["Series", "MLP", "RF", "GB", "XGB", "Best", "Range", "Min MAE"]);
    assert_eq!(rows.len(), 3);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], (i + 1).to_string());
        assert_eq!(row[1], "-");
        let cells: Vec<f64> = row[2..5].iter().map(|c| c.parse().unwrap()).collect();
        let min = cells.iter().copied().fold(f64::INFINITY, f64::min);
        let max = cells.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(row[7].parse::<f64>().unwrap(), min);
        assert_eq!(row[6].parse::<f64>().unwrap(), max - min);
        assert_eq!(row[7].parse::<f64>().unwrap(), summary.report.phase1_children[i].selection.min_mae);
    }

    let (headers, rows) = read_csv(&out.join("comparisons.csv"));
    assert_eq!(headers, ["baseline", "baseline_mae", "mph_mae", "improvement_pct"]);
    assert_eq!(rows[0][0], "Top-down");
    assert_eq!(rows[1][0], "Bottom-up");
    for row in &rows {
        row[3].parse::<i64>().unwrap();
        assert_eq!(row[2].parse::<f64>().unwrap(), summary.report.final_mae);
    }

    let md = fs::read_to_string(out.join("phase2.md")).unwrap();
    assert!(md.contains("| MLP | RF | GB | XGB | Best | Range | Min MAE |"));
    assert!(md.contains("out-of-fold predictions, seed 11, k = 3"));

    let text = fs::read_to_string(out.join("report.json")).unwrap();
    let back = read_report(&out.join("report.json")).unwrap();
    assert_eq!(report_json(&back).unwrap(), text);
    assert_eq!(back.final_mae, summary.report.final_mae);
    assert_eq!(back.phase2_parent.scores, summary.report.phase2_parent.scores);

    let again = dir.path().join("again");
    let rerendered = cmd_report(&out.join("report.json"), &again).unwrap();
    assert_eq!(rerendered.written.len(), 10);
    for p in &rerendered.written {
        let name = p.file_name().unwrap();
        assert_eq!(fs::read(p).unwrap(), fs::read(out.join(name)).unwrap(), "{name:?}");
    }
}

#[test]
fn run_reports_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = common::small_run(1, dir.path());
    config.data = DataSource::Csv {
        path: dir.path().join("missing.csv"),
        schema: None,
    };
    assert!(cmd_run(&config).is_err());
    let mut config = common::small_run(1, dir.path());
    config.k = 1;
    assert!(cmd_run(&config).unwrap_err().to_string().starts_with("config"));
}

#[test]
fn synth_writes_the_benchmark_hierarchy() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("nested/a.csv");
    let b = dir.path().join("b.csv");
    let bundle = cmd_synth(&default_benchmark_config(5), &a).unwrap();
    cmd_synth(&default_benchmark_config(5), &b).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!((bundle.n_rows(), bundle.n_children()), (935, 10));

    let loaded = load_csv(&a, &ColumnSchema::default()).unwrap();
    assert_eq!((loaded.n_rows(), loaded.n_children()), (935, 10));
    assert!(loaded.coherent);

    let mut noisy = default_benchmark_config(5);
    noisy.parent_noise_sd = 5.0;
    let c = dir.path().join("c.csv");
    cmd_synth(&noisy, &c).unwrap();
    assert!(!load_csv(&c, &ColumnSchema::default()).unwrap().coherent);
}

#[test]
fn compare_lists_one_column_per_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for seed in [2, 3] {
        let out = dir.path().join(format!("s{seed}"));
        let mut config = common::small_run(seed, &out);
        config.baselines = false;
        config.families = vec![mph_core::Family::Rf];
        cmd_run(&config).unwrap();
        paths.push(out.join("report.json"));
    }
    let one = cmd_compare(&paths[..1]).unwrap();
    assert_eq!(one.lines().next().unwrap().matches('|').count(), 3);
    let two = cmd_compare(&paths).unwrap();
    let header = two.lines().next().unwrap();
    assert!(header.contains("s2") && header.contains("s3"), "{header}");
    assert!(two.contains("| Seed | 2 | 3 |"));
    assert!(cmd_compare(&[]).is_err());
}

fn mph() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mph"));
    c.env_remove("MPH_SEED");
    c
}

#[test]
fn binary_synth_seed_sources() {
    let dir = tempfile::tempdir().unwrap();
    let by_flag = dir.path().join("flag.csv");
    let by_env = dir.path().join("env.csv");
    let s = mph().args(["synth", "--seed", "3", "--out"]).arg(&by_flag).status().unwrap();
    assert!(s.success());
    let s = mph().env("MPH_SEED", "3").args(["synth", "--out"]).arg(&by_env).status().unwrap();
    assert!(s.success());
    assert_eq!(fs::read(&by_flag).unwrap(), fs::read(&by_env).unwrap());

    let out = mph().args(["synth", "--out"]).arg(dir.path().join("x.csv")).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no seed"));
    let out = mph().env("MPH_SEED", "abc").args(["synth", "--out"]).arg(dir.path().join("x.csv")).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn binary_run_precedence_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let synth_path = dir.path().join("small.toml");
    fs::write(&synth_path, toml::to_string(&common::small_synth(0)).unwrap()).unwrap();
    let config_path = dir.path().join("run.toml");
    fs::write(
        &config_path,
        "seed = 1\nk = 3\nfamilies = [\"RF\"]\nbaselines = false\nout = \"res\"\n\n[data]\nsynth = \"small.toml\"\n\n[hpo]\nn_settings = 4\n",
    )
    .unwrap();

    let out = mph().env("MPH_SEED", "8").arg("run").arg("--config").arg(&config_path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("MPH MAE"));
    assert_eq!(read_report(&dir.path().join("res/report.json")).unwrap().seed, 8);

    let flagged = dir.path().join("flagged");
    let out = mph()
        .env("MPH_SEED", "8")
        .args(["run", "--seed", "4", "--mode", "insample", "--families", "RF,GB", "--out"])
        .arg(&flagged)
        .arg("--config")
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_report(&flagged.join("report.json")).unwrap();
    assert_eq!((r.seed, r.mode.label()), (4, "in-sample"));
    assert_eq!(r.phase1_parent.scores.len(), 2);

    let clash = mph().args(["run", "--data", "a.csv", "--synth", "benchmark", "--seed", "1"]).output().unwrap();
    assert_eq!(clash.status.code(), Some(2));
    let missing = mph().args(["run", "--synth", "benchmark"]).output().unwrap();
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("no seed"));
    let bad_family = mph().args(["run", "--synth", "benchmark", "--seed", "1", "--families", "SVM"]).output().unwrap();
    assert_eq!(bad_family.status.code(), Some(2));
}
