use crate::error::LabResult;
use crate::experiments::RunOutput;
use crate::stats::Summary;
use serde_json::json;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

/// `git describe --always --dirty`, or `"unknown"` outside a work tree.
pub fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

/// Shortest round-trip form; scientific notation outside `[1e-4, 1e15)`.
fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Writes `<exp>_rates.csv`, `<exp>_stats.csv`, `<exp>_trials.csv`, `<exp>_trials.json`
/// and `<exp>_summary.json` into `dir`; returns the paths.
pub fn write_outputs(dir: &Path, run: &RunOutput) -> LabResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let name = &run.table.experiment;
    let mut paths = Vec::new();

    let rates = dir.join(format!("{name}_rates.csv"));
    let mut w = csv::Writer::from_path(&rates)?;
    let mut header = vec!["n".to_string(), "trials".to_string()];
    for (mean, se, _) in &run.table.columns {
        header.push(mean.clone());
        header.push(se.clone());
    }
    w.write_record(&header)?;
    for row in &run.table.rows {
        let mut rec = vec![row.n.to_string(), row.trials.to_string()];
        for (_, _, key) in &run.table.columns {
            let s = row
                .values
                .get(key)
                .or_else(|| row.flags.get(key))
                .copied()
                .unwrap_or(Summary::of(&[]));
            rec.push(num(s.mean));
            rec.push(num(s.se));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    paths.push(rates);

    let stats = dir.join(format!("{name}_stats.csv"));
    let mut w = csv::Writer::from_path(&stats)?;
    w.write_record([
        "n", "quantity", "kind", "count", "mean", "se", "q10", "q50", "q90",
    ])?;
    for row in &run.table.rows {
        for (kind, map) in [("value", &row.values), ("flag", &row.flags)] {
            for (k, s) in map {
                w.write_record([
                    row.n.to_string(),
                    k.clone(),
                    kind.to_string(),
                    s.count.to_string(),
                    num(s.mean),
                    num(s.se),
                    num(s.q10),
                    num(s.q50),
                    num(s.q90),
                ])?;
            }
        }
    }
    w.flush()?;
    paths.push(stats);

    let trials = dir.join(format!("{name}_trials.csv"));
    let values: BTreeSet<&String> = run.records.iter().flat_map(|r| r.values.keys()).collect();
    let flags: BTreeSet<&String> = run.records.iter().flat_map(|r| r.flags.keys()).collect();
    let mut w = csv::Writer::from_path(&trials)?;
    let mut header: Vec<String> = vec!["n".into(), "trial".into(), "seed".into()];
    header.extend(values.iter().map(|k| k.to_string()));
    header.extend(flags.iter().map(|k| k.to_string()));
    w.write_record(&header)?;
    for r in &run.records {
        let mut rec = vec![r.n.to_string(), r.trial.to_string(), r.seed.to_string()];
        rec.extend(
            values
                .iter()
                .map(|k| r.values.get(*k).map_or(String::new(), |v| num(*v))),
        );
        rec.extend(
            flags
                .iter()
                .map(|k| r.flags.get(*k).map_or(String::new(), |v| v.to_string())),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    paths.push(trials);

    let records = dir.join(format!("{name}_trials.json"));
    std::fs::write(&records, serde_json::to_string_pretty(&run.records)?)?;
    paths.push(records);

    let summary = dir.join(format!("{name}_summary.json"));
    let doc = json!({
        "experiment": name,
        "config_hash": run.config.hash(),
        "git_describe": git_describe(),
        "config": run.config,
        "tables": [run.table],
        "failures": run.failures,
        "wall_seconds": run.wall,
    });
    std::fs::write(&summary, serde_json::to_string_pretty(&doc)?)?;
    paths.push(summary);
    Ok(paths)
}
