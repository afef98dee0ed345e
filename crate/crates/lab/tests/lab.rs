use matchkit::output::write_outputs;
use matchkit::{run, Experiment, ExperimentConfig, LabError, SamplerConfig, Summary};
use matchkit_core::sampling::{Contraction, DensitySpec};
use std::collections::HashSet;

fn small(exp: Experiment) -> ExperimentConfig {
    ExperimentConfig {
        experiment: exp,
        n_values: vec![32, 64],
        trials: 3,
        ..Default::default()
    }
}

#[test]
fn summary_statistics() {
    let s = Summary::of(&[1.0, 2.0, 3.0, 4.0, 5.0]);
    assert_eq!(s.mean, 3.0);
    assert!((s.se - (2.5f64 / 5.0).sqrt()).abs() < 1e-15);
    assert_eq!((s.q10, s.q50, s.q90), (1.4, 3.0, 4.6));
    assert_eq!((s.lower(), s.upper()), (3.0 - s.se, 3.0 + s.se));
    assert_eq!(Summary::of(&[7.0]).se, 0.0);
    let empty = Summary::of(&[]);
    assert_eq!(empty.count, 0);
    assert!(empty.mean.is_nan());
}

#[test]
fn log_log_slope_recovers_powers() {
    let x = [1.0, 2.0, 4.0, 8.0];
    let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
    assert!((matchkit::stats::log_log_slope(&x, &y) + 1.5).abs() < 1e-12);
}

#[test]
fn config_validation() {
    assert!(ExperimentConfig::default().validate().is_ok());
    let bad = [
        ExperimentConfig {
            n_values: vec![],
            ..Default::default()
        },
        ExperimentConfig {
            n_values: vec![8, 64],
            ..Default::default()
        },
        ExperimentConfig {
            n_values: vec![64, 64],
            ..Default::default()
        },
        ExperimentConfig {
            trials: 0,
            ..Default::default()
        },
    ];
    for cfg in bad {
        assert!(
            matches!(cfg.validate(), Err(LabError::Config(_))),
            "{cfg:?}"
        );
    }
    let mut cfg = ExperimentConfig::default();
    cfg.solver.cutoff = 200;
    assert!(cfg.validate().is_err());
    let mut cfg = ExperimentConfig::default();
    cfg.params.q = vec![1.0];
    assert!(cfg.validate().is_err());
    let mut cfg = ExperimentConfig::default();
    cfg.schedule.kappa1 = -1.0;
    assert!(cfg.validate().is_err());
}

#[test]
fn config_files_parse_strictly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(
        &path,
        r#"{"experiment":"map","seed":3,"density":{"kind":"sine","amplitude":0.5}}"#,
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.experiment, Experiment::Map);
    assert_eq!(cfg.density, DensitySpec::Sine { amplitude: 0.5 });
    assert_eq!(cfg.trials, 32);

    std::fs::write(&path, r#"{"experiment":"map","typo":1}"#).unwrap();
    assert!(matches!(
        ExperimentConfig::load(&path),
        Err(LabError::Config(_))
    ));
    std::fs::write(&path, r#"{"experiment":"nope"}"#).unwrap();
    assert!(ExperimentConfig::load(&path).is_err());

    for file in std::fs::read_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs")).unwrap() {
        let file = file.unwrap().path();
        ExperimentConfig::load(&file).unwrap_or_else(|e| panic!("{}: {e}", file.display()));
    }
}

#[test]
fn config_hash_tracks_content() {
    let a = ExperimentConfig::default();
    assert_eq!(a.hash(), ExperimentConfig::default().hash());
    assert_eq!(a.hash().len(), 64);
    let b = ExperimentConfig {
        seed: 1,
        ..Default::default()
    };
    let c = ExperimentConfig {
        sampler: SamplerConfig::Ifs {
            map: Contraction::Constant { center: [0.0, 0.0] },
            noise: DensitySpec::Uniform,
            burn_in: 10,
        },
        ..Default::default()
    };
    let hashes: HashSet<String> = [&a, &b, &c].iter().map(|c| c.hash()).collect();
    assert_eq!(hashes.len(), 3);
}

#[test]
fn quantization_resolution_is_even_and_sufficient() {
    let solver = ExperimentConfig::default().solver;
    for n in [16, 100, 256, 1000, 4096] {
        let r = solver.quantization_resolution(n);
        assert!(r % 2 == 0 && r * r >= 4 * n);
        assert!((r - 2) * (r - 2) < 4 * n);
    }
}

#[test]
fn runs_are_deterministic_and_complete() {
    for exp in Experiment::ALL {
        let cfg = small(exp);
        let a = run(&cfg, None).unwrap();
        let b = run(&cfg, None).unwrap();
        assert!(a.failures.is_empty(), "{exp}: {:?}", a.failures);
        assert_eq!(a.records.len(), 6);
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!((x.n, x.trial, x.seed), (y.n, y.trial, y.seed));
            assert_eq!(x.values, y.values, "{exp}");
            assert_eq!(x.flags, y.flags);
            assert!(x.is_finite(), "{exp}: {:?}", x.values);
        }
        let seeds: HashSet<u64> = a.records.iter().map(|r| r.seed).collect();
        assert_eq!(seeds.len(), 6);
        for &n in &cfg.n_values {
            let row = a.table.row(n).unwrap();
            assert_eq!(row.trials, 3);
        }
    }
}

#[test]
fn seeds_change_results() {
    let a = run(&small(Experiment::Cost), None).unwrap();
    let b = run(
        &ExperimentConfig {
            seed: 99,
            ..small(Experiment::Cost)
        },
        None,
    )
    .unwrap();
    assert_ne!(a.records[0].get("w2"), b.records[0].get("w2"));
}

#[test]
fn table_aggregates_trial_values() {
    let out = run(&small(Experiment::Cost), None).unwrap();
    let w2: Vec<f64> = out
        .records
        .iter()
        .filter(|r| r.n == 64)
        .map(|r| r.get("w2").unwrap())
        .collect();
    let s = out.table.summary(64, "w2").unwrap();
    assert_eq!(s.count, 3);
    assert!((s.mean - w2.iter().sum::<f64>() / 3.0).abs() < 1e-15);
    assert_eq!(out.table.mean(64, "w2"), Some(s.mean));
    assert!(out.table.summary(64, "missing").is_none());
}

#[test]
fn output_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&small(Experiment::Cost), None).unwrap();
    let paths = write_outputs(dir.path(), &out).unwrap();
    let names: Vec<String> = paths
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    for f in [
        "cost_rates.csv",
        "cost_stats.csv",
        "cost_trials.csv",
        "cost_trials.json",
        "cost_summary.json",
    ] {
        assert!(names.iter().any(|n| n == f), "{f} missing from {names:?}");
    }
    let rates = std::fs::read_to_string(dir.path().join("cost_rates.csv")).unwrap();
    let mut lines = rates.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("n,trials,mean_w2,se,ratio,se_ratio"));
    assert_eq!(lines.count(), 2);
    // numbers round-trip through the text form
    let trials = std::fs::read_to_string(dir.path().join("cost_trials.csv")).unwrap();
    let header: Vec<&str> = trials.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "w2").unwrap();
    let first: f64 = trials
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(col)
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(first, out.records[0].get("w2").unwrap());
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("cost_summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["config_hash"], out.config.hash());
}
