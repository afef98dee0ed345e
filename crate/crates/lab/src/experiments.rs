//! Trial definitions and the parallel driver.

use crate::config::{Experiment, ExperimentConfig, SamplerConfig};
use crate::error::{LabError, LabResult};
use crate::stats::{RateTable, TrialRecord};
use matchkit_core::domain::{spectral_to_grid, Geometry, Grid, SpectralField};
use matchkit_core::elliptic::{
    derivative_sup_norm, lq_gradient_norm, regularization_error, solve_divform, solve_screened,
    PotentialField,
};
use matchkit_core::sampling::{
    derive_seed, sample_ifs, sample_iid, DensityModel, IfsModel, PointCloud,
};
use matchkit_core::smoothing::{
    heat_smooth, heat_smooth_measure, rho_time_difference, sup_deviation, EmpiricalMeasure,
    SmoothedDensity,
};
use matchkit_core::transport::{
    build_plan_gamma, coupling_measure, gradient_at_cells, map_discrepancy, plan_distance,
    quantize_values, semidiscrete_map, solve_discrete_ot_sparse, DiscreteMeasure,
};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Inputs shared by all trials of a run.
pub struct Context {
    pub cfg: ExperimentConfig,
    /// Law of the samples: the configured density, or the invariant law of the chain.
    pub rho: DensityModel<f64>,
    pub ifs: Option<IfsModel<f64>>,
    pub rho_field: SpectralField<f64>,
    pub grid: Grid,
    /// `rho` as a divergence-form coefficient on the grid.
    pub rho_coeff: SmoothedDensity<f64>,
}

impl Context {
    pub fn new(cfg: &ExperimentConfig) -> LabResult<Self> {
        cfg.validate()?;
        let k = cfg.solver.cutoff;
        let grid = Grid::torus(cfg.solver.resolution);
        let density = DensityModel::from_spec(Geometry::Torus, &cfg.density)
            .map_err(|e| LabError::Config(e.to_string()))?;
        let (rho, ifs) = match &cfg.sampler {
            SamplerConfig::Iid => (density, None),
            SamplerConfig::Ifs { map, noise, .. } => {
                let noise = DensityModel::from_spec(Geometry::Torus, noise)
                    .map_err(|e| LabError::Config(e.to_string()))?;
                let model = IfsModel::new(map.clone(), noise)
                    .map_err(|e| LabError::Config(e.to_string()))?;
                let inv = model.invariant_density(k.min(32), 128)?;
                (inv, Some(model))
            }
        };
        let rho_field = rho.spectral(k)?;
        let rho_coeff = heat_smooth(&rho_field, 0.0, &grid)?;
        Ok(Self {
            cfg: cfg.clone(),
            rho,
            ifs,
            rho_field,
            grid,
            rho_coeff,
        })
    }

    pub fn sample(&self, n: usize, seed: u64) -> PointCloud<f64> {
        match (&self.ifs, &self.cfg.sampler) {
            (Some(model), SamplerConfig::Ifs { burn_in, .. }) => {
                sample_ifs(model, n, seed, *burn_in)
            }
            _ => sample_iid(&self.rho, n, seed),
        }
    }

    fn measure(&self, n: usize, seed: u64) -> LabResult<EmpiricalMeasure<f64>> {
        Ok(EmpiricalMeasure::new(
            Geometry::Torus,
            self.sample(n, seed).points,
        )?)
    }

    fn second_size(&self, n: usize) -> usize {
        (self.cfg.params.m_ratio * n as f64).ceil() as usize
    }

    fn t(&self, n: usize) -> LabResult<f64> {
        Ok(self.cfg.schedule.t(n)?)
    }

    fn smooth(&self, mu: &EmpiricalMeasure<f64>, t: f64) -> LabResult<SmoothedDensity<f64>> {
        Ok(heat_smooth_measure(
            mu,
            t,
            self.cfg.solver.cutoff,
            &self.grid,
        )?)
    }

    fn rho_at(&self, t: f64) -> LabResult<SmoothedDensity<f64>> {
        Ok(heat_smooth(&self.rho_field, t, &self.grid)?)
    }

    /// `f` with `-div(rho grad f) = mu^{n,t} - rho_t`.
    fn linearized_potential(
        &self,
        mu_t: &SmoothedDensity<f64>,
        rho_t: &SmoothedDensity<f64>,
        coeff: &SmoothedDensity<f64>,
    ) -> LabResult<PotentialField<f64>> {
        let rhs = mu_t.field.sub(&rho_t.field)?.into_mean_zero();
        Ok(solve_divform(coeff, &rhs, self.cfg.solver.tol)?)
    }
}

fn log_rate(n: usize) -> f64 {
    (n as f64).ln()
}

/// `log n sqrt(loglog n / log n)`, the rate of the plan and map theorems.
fn theorem_rate(n: usize) -> f64 {
    let l = log_rate(n);
    l * (l.ln() / l).sqrt()
}

/// Headline CSV columns `(mean, se, quantity)`.
pub fn columns(cfg: &ExperimentConfig) -> Vec<(String, String, String)> {
    let c = |a: &str, b: &str, k: &str| (a.to_string(), b.to_string(), k.to_string());
    match cfg.experiment {
        Experiment::Cost | Experiment::Semidiscrete => {
            vec![c("mean_w2", "se", "w2"), c("ratio", "se_ratio", "ratio")]
        }
        Experiment::Contractivity => vec![
            c("mean_w2", "se", "w2"),
            c("ratio", "se_ratio", "ratio"),
            c("w2_over_t", "se_w2_over_t", "w2_over_t"),
        ],
        Experiment::Plan => vec![
            c("mean_plan_distance", "se", "plan_distance"),
            c("relative_error", "se_relative_error", "relative_error"),
            c("ratio", "se_ratio", "ratio"),
        ],
        Experiment::Map => vec![
            c("mean_discrepancy", "se", "discrepancy"),
            c("relative_error", "se_relative_error", "relative_error"),
            c("ratio", "se_ratio", "ratio"),
        ],
        Experiment::Fluctuation => vec![
            c("freq_a", "se_a", "event_a"),
            c("freq_b", "se_b", "event_b"),
            c("freq_ab", "se_ab", "event_ab"),
            c("freq_bound", "se_bound", "bound"),
        ],
        Experiment::Lq => cfg
            .params
            .q
            .iter()
            .map(|q| {
                let k = format!("ratio_q{q}");
                (k.clone(), format!("se_{k}"), k)
            })
            .collect(),
    }
}

fn trial_cost(ctx: &Context, rec: &mut TrialRecord) -> LabResult<()> {
    let n = rec.n;
    let m = ctx.second_size(n);
    let x = ctx.sample(n, derive_seed(rec.seed, &[1]));
    let y = ctx.sample(m, derive_seed(rec.seed, &[2]));
    let mu = DiscreteMeasure::uniform(Geometry::Torus, x.points)?;
    let nu = DiscreteMeasure::uniform(Geometry::Torus, y.points)?;
    let sol = solve_discrete_ot_sparse(&mu, &nu)?;
    rec.set("w2", sol.cost);
    rec.set("ratio", n as f64 * sol.cost / log_rate(n));
    rec.set("m", m as f64);
    rec.set("duality_gap", sol.duality_gap());
    Ok(())
}

fn trial_semidiscrete(ctx: &Context, rec: &mut TrialRecord) -> LabResult<()> {
    let n = rec.n;
    let mu = ctx.measure(n, derive_seed(rec.seed, &[1]))?;
    let res = ctx.cfg.solver.quantization_resolution(n);
    let sd = semidiscrete_map(&ctx.rho, &mu, res)?;
    rec.set("w2", sd.cost);
    rec.set("ratio", n as f64 * sd.cost / log_rate(n));
    rec.set("cells", res as f64);
    rec.set("split_mass", sd.map.split_mass);
    if let Some(e) = sd.error_estimate() {
        rec.set("discretization_error", e);
    }
    Ok(())
}

fn trial_contractivity(ctx: &Context, rec: &mut TrialRecord) -> LabResult<()> {
    let n = rec.n;
    let mu = ctx.measure(n, derive_seed(rec.seed, &[1]))?;
    let t = ctx.t(n)?;
    let mu_t = ctx.smooth(&mu, t)?;
    // quantize P_t mu^n on the coarse grid, dropping modes the grid cannot carry
    let res = ctx.cfg.solver.quantization_resolution(n);
    let coarse = Grid::torus(res);
    let k = ctx.cfg.solver.cutoff.min(Geometry::Torus.max_cutoff(res));
    let values = spectral_to_grid(&mu_t.field.with_cutoff(k), &coarse);
    let smoothed = quantize_values(&coarse, &values)?;
    let atoms = DiscreteMeasure::uniform(Geometry::Torus, mu.atoms)?;
    let w2 = solve_discrete_ot_sparse(&smoothed, &atoms)?.cost;
    let inv_n = 1.0 / n as f64;
    let correction = t * rho_time_difference(
        &ctx.rho,
        t + inv_n,
        inv_n,
        1.0,
        ctx.cfg.solver.cutoff,
        &ctx.grid,
    )?;
    rec.set("t", t);
    rec.set("w2", w2);
    rec.set("correction", correction);
    rec.set("ratio", (w2 - correction) * n as f64 / log_rate(n).ln());
    rec.set("w2_over_t", w2 / t);
    Ok(())
}

fn trial_lq(ctx: &Context, rec: &mut TrialRecord) -> LabResult<()> {
    let n = rec.n;
    let mu = ctx.measure(n, derive_seed(rec.seed, &[1]))?;
    let t = ctx.t(n)?;
    let mu_t = ctx.smooth(&mu, t)?;
    let rho_t = ctx.rho_at(t)?;
    let f = ctx.linearized_potential(&mu_t, &rho_t, &ctx.rho_coeff)?;
    rec.reports.push(f.report.clone());
    let eta = ctx.cfg.sampler.eta();
    let normalizer = t.ln().abs() + log_rate(n).powf(1.0 / eta);
    rec.set("t", t);
    for &q in &ctx.cfg.params.q {
        let norm = lq_gradient_norm(&f, q, &ctx.grid)?;
        rec.set(&format!("norm_q{q}"), norm);
        rec.set(&format!("ratio_q{q}"), norm * n as f64 / normalizer);
    }
    Ok(())
}

fn trial_map(ctx: &Context, rec: &mut TrialRecord, arrows: Option<&Path>) -> LabResult<()> {
    let n = rec.n;
    let mu = ctx.measure(n, derive_seed(rec.seed, &[1]))?;
    let res = ctx.cfg.solver.quantization_resolution(n);
    let sd = semidiscrete_map(&ctx.rho, &mu, res)?;
    let t = ctx.t(n)?;
    let mu_t = ctx.smooth(&mu, t)?;
    let rho_t = ctx.rho_at(t)?;
    let f = ctx.linearized_potential(&mu_t, &rho_t, &ctx.rho_coeff)?;
    rec.reports.push(f.report.clone());
    let disc = map_discrepancy(&sd.map, &f)?;
    rec.set("w2", sd.cost);
    rec.set("discrepancy", disc);
    rec.set("relative_error", disc / sd.cost);
    rec.set("ratio", disc * n as f64 / theorem_rate(n));
    rec.set("split_mass", sd.map.split_mass);
    rec.flag("split_over_5pct", sd.map.split_mass > 0.05);
    if let Some(path) = arrows {
        let g = gradient_at_cells(&sd.map, &f)?;
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["cell_x", "cell_y", "target_x", "target_y", "exp_x", "exp_y"])?;
        for ((x, &j), v) in sd.map.cells.iter().zip(&sd.map.targets).zip(&g) {
            let y = &sd.map.atoms[j];
            let e = Geometry::Torus.exp_map(x, *v);
            w.write_record([x.x1, x.x2, y.x1, y.x2, e.x1, e.x2].map(|v| v.to_string()))?;
        }
        w.flush()?;
    }
    Ok(())
}

fn trial_plan(ctx: &Context, rec: &mut TrialRecord) -> LabResult<()> {
    let n = rec.n;
    let m = ctx.second_size(n);
    let x = ctx.measure(n, derive_seed(rec.seed, &[1]))?;
    let y = ctx.measure(m, derive_seed(rec.seed, &[2]))?;
    let mu = DiscreteMeasure::uniform(Geometry::Torus, x.atoms.clone())?;
    let nu = DiscreteMeasure::uniform(Geometry::Torus, y.atoms.clone())?;
    let sol = solve_discrete_ot_sparse(&mu, &nu)?;
    let pi = coupling_measure(&sol.coupling, &mu, &nu)?;
    let t = ctx.t(n)?;
    let mu_t = ctx.smooth(&x, t)?;
    let nu_t = ctx.smooth(&y, t)?;
    // exp(grad h) carries mu^{n,t} towards nu^{m,t}
    let rhs = nu_t.field.sub(&mu_t.field)?.into_mean_zero();
    let tol = ctx.cfg.solver.tol;
    let h = solve_divform(&ctx.rho_coeff, &rhs, tol)?;
    rec.reports.push(h.report.clone());
    let gamma = build_plan_gamma(&mu_t, &h)?;
    let budget = ctx.cfg.params.budget;
    let d = plan_distance(&pi, &gamma, budget)?;
    rec.set("w2", sol.cost);
    rec.set("plan_distance", d.value);
    rec.set("relative_error", d.value / sol.cost);
    rec.set("ratio", d.value * n as f64 / theorem_rate(n));
    rec.set("coarsening_level", d.level.map_or(0.0, |l| l as f64));
    rec.set("coarsening_cell", d.cell_size());
    rec.set("coarsening_variance", d.coarsening_variance);
    if ctx.cfg.params.regularize {
        let delta = ctx.cfg.schedule.delta(n)?;
        let rho_delta = ctx.rho_at(delta)?;
        let h_delta = solve_divform(&rho_delta, &rhs, tol)?;
        rec.reports.push(h_delta.report.clone());
        let (lhs, bound) =
            regularization_error(&h, &h_delta, &ctx.rho_coeff, &rho_delta, ctx.rho.lower())?;
        rec.set("energy_lhs", lhs);
        rec.set("energy_bound", bound);
        rec.flag("energy_ok", lhs <= bound);
        let gamma_delta = build_plan_gamma(&mu_t, &h_delta)?;
        let a = plan_distance(&gamma, &gamma_delta, budget)?.value;
        let b = plan_distance(&pi, &gamma_delta, budget)?.value;
        rec.set("regularization_distance", a);
        rec.set("plan_distance_delta", b);
        rec.flag("triangle_ok", d.value <= a + b + 2.0 * (a * b).sqrt());
    }
    Ok(())
}

fn trial_fluctuation(ctx: &Context, rec: &mut TrialRecord) -> LabResult<()> {
    let n = rec.n;
    let mu = ctx.measure(n, derive_seed(rec.seed, &[1]))?;
    let schedule = &ctx.cfg.schedule;
    let t = ctx.t(n)?;
    let delta = schedule.delta(n)?;
    let mu_t = ctx.smooth(&mu, t)?;
    let rho_t = ctx.rho_at(t)?;
    let rho_delta = ctx.rho_at(delta)?;
    let threshold: f64 = schedule.event_threshold(n);
    let dev = sup_deviation(&mu_t, &rho_t)?;
    let rhs = mu_t.field.sub(&rho_t.field)?;
    let tol = ctx.cfg.solver.tol;
    let u = solve_screened(&rho_delta, &rhs, tol)?;
    let du = derivative_sup_norm(&u, &ctx.grid);
    let f = solve_divform(&rho_delta, &rhs.into_mean_zero(), tol)?;
    let df = derivative_sup_norm(&f, &ctx.grid);
    rec.reports.push(u.report.clone());
    rec.reports.push(f.report.clone());
    let bound = log_rate(n).powf(-schedule.conclusion_exponent());
    let (a, b) = (dev <= threshold, du <= threshold);
    rec.set("deviation", dev);
    rec.set("screened_derivatives", du);
    rec.set("potential_derivatives", df);
    rec.flag("event_a", a);
    rec.flag("event_b", b);
    rec.flag("event_ab", a && b);
    rec.flag("bound", df <= bound);
    rec.flag("ab_implies_bound", !(a && b) || df <= bound);
    Ok(())
}

pub fn run_trial(
    ctx: &Context,
    n: usize,
    trial: usize,
    artifacts: Option<&Path>,
) -> LabResult<TrialRecord> {
    let exp = ctx.cfg.experiment;
    let seed = derive_seed(ctx.cfg.seed, &[exp.id(), n as u64, trial as u64]);
    let mut rec = TrialRecord::new(n, trial, seed);
    let start = Instant::now();
    match exp {
        Experiment::Cost => trial_cost(ctx, &mut rec)?,
        Experiment::Semidiscrete => trial_semidiscrete(ctx, &mut rec)?,
        Experiment::Contractivity => trial_contractivity(ctx, &mut rec)?,
        Experiment::Plan => trial_plan(ctx, &mut rec)?,
        Experiment::Map => {
            let arrows: Option<PathBuf> = (trial == 0 && n == ctx.cfg.n_values[0])
                .then(|| artifacts.map(|d| d.join(format!("map_arrows_n{n}.csv"))))
                .flatten();
            trial_map(ctx, &mut rec, arrows.as_deref())?
        }
        Experiment::Fluctuation => trial_fluctuation(ctx, &mut rec)?,
        Experiment::Lq => trial_lq(ctx, &mut rec)?,
    }
    rec.wall = start.elapsed().as_secs_f64();
    if !rec.is_finite() {
        return Err(LabError::Solver(matchkit_core::Error::InvalidArgument(
            format!("non-finite measurement in trial {trial} at n = {n}"),
        )));
    }
    Ok(rec)
}

/// Result of a full run.
#[derive(Debug)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub table: RateTable,
    pub records: Vec<TrialRecord>,
    pub failures: Vec<(usize, usize, String)>,
    pub wall: f64,
}

/// Runs every `(n, trial)` pair in parallel and folds the records in trial order.
/// Trials that fail are logged and left out of the aggregates.
pub fn run(cfg: &ExperimentConfig, artifacts: Option<&Path>) -> LabResult<RunOutput> {
    let start = Instant::now();
    let ctx = Context::new(cfg)?;
    let jobs: Vec<(usize, usize)> = cfg
        .n_values
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    let results: Vec<LabResult<TrialRecord>> = jobs
        .par_iter()
        .map(|&(n, t)| run_trial(&ctx, n, t, artifacts))
        .collect();
    let mut records = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    let mut last_error = None;
    for ((n, t), r) in jobs.into_iter().zip(results) {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                log::warn!("{} trial {t} at n = {n} failed: {e}", cfg.experiment);
                failures.push((n, t, e.to_string()));
                last_error = Some(e);
            }
        }
    }
    if records.is_empty() {
        return Err(last_error.unwrap_or_else(|| LabError::Config("no trials ran".into())));
    }
    let failed: Vec<(usize, usize)> = failures.iter().map(|f| (f.0, f.1)).collect();
    let table = RateTable::aggregate(
        cfg.experiment.name(),
        columns(cfg),
        &cfg.n_values,
        &records,
        &failed,
    );
    Ok(RunOutput {
        config: cfg.clone(),
        table,
        records,
        failures,
        wall: start.elapsed().as_secs_f64(),
    })
}
