use crate::error::{LabError, LabResult};
use matchkit_core::sampling::{Contraction, DensitySpec};
use matchkit_core::smoothing::Schedule;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Cost,
    Semidiscrete,
    Contractivity,
    Plan,
    Map,
    Fluctuation,
    Lq,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Cost,
        Experiment::Semidiscrete,
        Experiment::Contractivity,
        Experiment::Plan,
        Experiment::Map,
        Experiment::Fluctuation,
        Experiment::Lq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Cost => "cost",
            Experiment::Semidiscrete => "semidiscrete",
            Experiment::Contractivity => "contractivity",
            Experiment::Plan => "plan",
            Experiment::Map => "map",
            Experiment::Fluctuation => "fluctuation",
            Experiment::Lq => "lq",
        }
    }

    /// Stable id mixed into the per-trial seeds.
    pub fn id(self) -> u64 {
        Self::ALL.iter().position(|e| *e == self).unwrap() as u64 + 1
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = LabError;

    fn from_str(s: &str) -> LabResult<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = Self::ALL.iter().map(|e| e.name()).collect();
                LabError::Config(format!(
                    "unknown experiment '{s}'; valid: {}",
                    valid.join(", ")
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SamplerConfig {
    /// Independent draws from `density`.
    Iid,
    /// Chain `X_{k+1} = F(X_k) + theta_k`; `density` is ignored in favour of the invariant law.
    Ifs {
        map: Contraction,
        noise: DensitySpec,
        #[serde(default = "default_burn_in")]
        burn_in: usize,
    },
}

fn default_burn_in() -> usize {
    matchkit_core::sampling::DEFAULT_BURN_IN
}

impl SamplerConfig {
    /// Mixing exponent of the generator class: infinite for independent draws.
    pub fn eta(&self) -> f64 {
        match self {
            SamplerConfig::Iid => f64::INFINITY,
            SamplerConfig::Ifs { .. } => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Spectral cutoff `K`.
    pub cutoff: usize,
    /// Evaluation grid resolution `N`.
    pub resolution: usize,
    pub tol: f64,
    /// Quantization cells per atom for the semi-discrete problems.
    #[serde(default = "default_cells_per_atom")]
    pub cells_per_atom: usize,
}

fn default_cells_per_atom() -> usize {
    4
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cutoff: 100,
            resolution: 256,
            tol: matchkit_core::elliptic::DEFAULT_TOLERANCE,
            cells_per_atom: default_cells_per_atom(),
        }
    }
}

impl SolverConfig {
    /// Smallest even `N` with `N^2 >= cells_per_atom * n`.
    pub fn quantization_resolution(&self, n: usize) -> usize {
        let need = self.cells_per_atom.max(4) * n;
        let mut r = (need as f64).sqrt().ceil() as usize;
        while r * r < need {
            r += 1;
        }
        r + r % 2
    }
}

/// Experiment-specific knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// `m = ceil(m_ratio * n)` for the second cloud.
    pub m_ratio: f64,
    /// Exponents of the gradient norms.
    pub q: Vec<f64>,
    /// Combined atom budget of the plan distance.
    pub budget: usize,
    /// Also solve with the regularized coefficient `P_delta rho`.
    pub regularize: bool,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            m_ratio: 1.0,
            q: vec![2.0, 4.0],
            budget: 4000,
            regularize: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n_values: Vec<usize>,
    pub trials: usize,
    pub sampler: SamplerConfig,
    pub density: DensitySpec,
    pub schedule: Schedule,
    pub solver: SolverConfig,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub params: Params,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Cost,
            n_values: vec![256, 1024, 4096],
            trials: 32,
            sampler: SamplerConfig::Iid,
            density: DensitySpec::Uniform,
            schedule: Schedule::default(),
            solver: SolverConfig::default(),
            seed: 0x5EED,
            output: None,
            params: Params::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Desk-scale reduction used by `--quick`.
    pub fn quick(mut self) -> Self {
        self.n_values = vec![64, 256];
        self.trials = 8;
        self
    }

    pub fn validate(&self) -> LabResult<()> {
        if self.n_values.is_empty() {
            return Err(LabError::Config("n_values is empty".into()));
        }
        if self.n_values.iter().any(|&n| n < 16) {
            return Err(LabError::Config("every n must be at least 16".into()));
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LabError::Config(
                "n_values must be strictly increasing".into(),
            ));
        }
        if self.trials == 0 {
            return Err(LabError::Config("trials must be at least 1".into()));
        }
        self.schedule
            .validate()
            .map_err(|e| LabError::Config(e.to_string()))?;
        if self.solver.cutoff == 0 || self.solver.resolution == 0 || !(self.solver.tol > 0.0) {
            return Err(LabError::Config(format!(
                "invalid solver settings {:?}",
                self.solver
            )));
        }
        let max = matchkit_core::domain::Geometry::Torus.max_cutoff(self.solver.resolution);
        if self.solver.cutoff > max {
            return Err(LabError::Config(format!(
                "cutoff {} needs a grid finer than {} (max cutoff {max})",
                self.solver.cutoff, self.solver.resolution
            )));
        }
        if !(self.params.m_ratio >= 1.0) {
            return Err(LabError::Config("m_ratio must be at least 1".into()));
        }
        if self.params.q.iter().any(|q| !(2.0..=4.0).contains(q)) {
            return Err(LabError::Config("q must lie in [2, 4]".into()));
        }
        if self.params.budget < 2 {
            return Err(LabError::Config("atom budget must be at least 2".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}
