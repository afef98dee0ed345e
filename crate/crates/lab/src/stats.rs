use matchkit_core::elliptic::SolveReport;
use serde::Serialize;
use std::collections::BTreeMap;

/// Measurements of one trial.
#[derive(Clone, Debug, Default, Serialize)]
pub struct TrialRecord {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub values: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, bool>,
    pub reports: Vec<SolveReport>,
    /// Seconds; kept out of the CSV outputs so they stay reproducible.
    pub wall: f64,
}

impl TrialRecord {
    pub fn new(n: usize, trial: usize, seed: u64) -> Self {
        Self {
            n,
            trial,
            seed,
            ..Default::default()
        }
    }

    pub fn set(&mut self, key: &str, v: f64) {
        self.values.insert(key.to_string(), v);
    }

    pub fn flag(&mut self, key: &str, v: bool) {
        self.flags.insert(key.to_string(), v);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    /// Every measured quantity is finite.
    pub fn is_finite(&self) -> bool {
        self.values.values().all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    /// Standard error of the mean from the sample variance.
    pub se: f64,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                q10: f64::NAN,
                q50: f64::NAN,
                q90: f64::NAN,
                count: 0,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        };
        Self {
            mean,
            se,
            q10: q(0.1),
            q50: q(0.5),
            q90: q(0.9),
            count: n,
        }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.se
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.se
    }
}

/// Aggregates at one `n`.
#[derive(Clone, Debug, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub trials: usize,
    pub failed: usize,
    pub values: BTreeMap<String, Summary>,
    /// Frequencies of the boolean flags, as summaries of 0/1 samples.
    pub flags: BTreeMap<String, Summary>,
}

/// Per-n aggregates of an experiment, plus the columns of its headline CSV.
#[derive(Clone, Debug, Serialize)]
pub struct RateTable {
    pub experiment: String,
    /// `(mean column, se column, quantity)` of the headline CSV.
    pub columns: Vec<(String, String, String)>,
    pub rows: Vec<RateRow>,
}

impl RateTable {
    /// Folds records (already ordered by trial) into per-n rows.
    pub fn aggregate(
        experiment: &str,
        columns: Vec<(String, String, String)>,
        n_values: &[usize],
        records: &[TrialRecord],
        failures: &[(usize, usize)],
    ) -> Self {
        let rows = n_values
            .iter()
            .map(|&n| {
                let at: Vec<&TrialRecord> = records.iter().filter(|r| r.n == n).collect();
                let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
                let mut flags: BTreeMap<String, Vec<f64>> = BTreeMap::new();
                for r in &at {
                    for (k, v) in &r.values {
                        values.entry(k.clone()).or_default().push(*v);
                    }
                    for (k, v) in &r.flags {
                        flags
                            .entry(k.clone())
                            .or_default()
                            .push(if *v { 1.0 } else { 0.0 });
                    }
                }
                RateRow {
                    n,
                    trials: at.len(),
                    failed: failures.iter().filter(|f| f.0 == n).count(),
                    values: values
                        .into_iter()
                        .map(|(k, v)| (k, Summary::of(&v)))
                        .collect(),
                    flags: flags
                        .into_iter()
                        .map(|(k, v)| (k, Summary::of(&v)))
                        .collect(),
                }
            })
            .collect();
        Self {
            experiment: experiment.to_string(),
            columns,
            rows,
        }
    }

    pub fn row(&self, n: usize) -> Option<&RateRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    /// Summary of a value or flag at `n`.
    pub fn summary(&self, n: usize, key: &str) -> Option<Summary> {
        let row = self.row(n)?;
        row.values.get(key).or_else(|| row.flags.get(key)).copied()
    }

    pub fn mean(&self, n: usize, key: &str) -> Option<f64> {
        self.summary(n, key).map(|s| s.mean)
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
