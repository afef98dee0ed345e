//! Fast oracle checks behind the `selftest` subcommand.

use itertools::Itertools;
use matchkit_core::domain::{
    heat_kernel_images, heat_kernel_spectral, Geometry, Grid, Parity, SpectralField, TorusPoint,
};
use matchkit_core::elliptic::{solve_poisson, solve_screened};
use matchkit_core::sampling::{rng_from_seed, DensityModel};
use matchkit_core::smoothing::{heat_smooth, schedule_t, EmpiricalMeasure};
use matchkit_core::transport::{
    quantize_density, semidiscrete_map, solve_discrete_ot, DiscreteMeasure,
};
use rand::Rng;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_points(rng: &mut impl Rng, n: usize) -> Vec<TorusPoint<f64>> {
    (0..n)
        .map(|_| TorusPoint::new(rng.gen(), rng.gen()))
        .collect()
}

fn ot_brute_force() -> matchkit_core::Result<(bool, String)> {
    let mut rng = rng_from_seed(1);
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let n = rng.gen_range(1..=6);
        let x = random_points(&mut rng, n);
        let y = random_points(&mut rng, n);
        let sol = solve_discrete_ot(
            &DiscreteMeasure::uniform(Geometry::Torus, x.clone())?,
            &DiscreteMeasure::uniform(Geometry::Torus, y.clone())?,
        )?;
        let best = (0..n)
            .permutations(n)
            .map(|p| {
                p.iter()
                    .enumerate()
                    .map(|(i, &j)| Geometry::Torus.distance_sq(&x[i], &y[j]))
                    .sum::<f64>()
                    / n as f64
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((sol.cost - best).abs() / best.max(1e-300));
    }
    Ok((worst < 1e-12, format!("max relative error {worst:e}")))
}

fn poisson_mode() -> matchkit_core::Result<(bool, String)> {
    let mode = SpectralField::<f64>::single_mode(Geometry::Torus, 8, [2, -1], Parity::Sin)?;
    let g = solve_poisson(&mode)?;
    let lambda = 4.0 * PI * PI * 5.0;
    let err = g.field.max_abs_diff(&mode.scale(1.0 / lambda))?;
    Ok((err < 1e-12, format!("max coefficient error {err:e}")))
}

fn screened_mode() -> matchkit_core::Result<(bool, String)> {
    let grid = Grid::torus(32);
    let one = heat_smooth(
        &SpectralField::constant(Geometry::Torus, 8, 1.0),
        0.0,
        &grid,
    )?;
    let mode = SpectralField::<f64>::single_mode(Geometry::Torus, 8, [1, 0], Parity::Cos)?;
    let u = solve_screened(&one, &mode, 1e-12)?;
    let err = u
        .field
        .max_abs_diff(&mode.scale(1.0 / (1.0 + 4.0 * PI * PI)))?;
    Ok((err < 1e-12, format!("max coefficient error {err:e}")))
}

fn heat_kernel() -> matchkit_core::Result<(bool, String)> {
    let mut rng = rng_from_seed(2);
    let t = 1.0 / (4.0 * PI * PI);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let p = random_points(&mut rng, 2);
        let a = heat_kernel_spectral(Geometry::Torus, t, &p[0], &p[1]);
        let b = heat_kernel_images(Geometry::Torus, t, &p[0], &p[1]);
        worst = worst.max((a - b).abs());
    }
    Ok((worst < 1e-10, format!("max difference {worst:e}")))
}

fn quantization() -> matchkit_core::Result<(bool, String)> {
    let q = quantize_density(&DensityModel::<f64>::uniform(Geometry::Torus), 4)?;
    let ok = q.len() == 16 && q.weights.iter().all(|w| (w - 1.0 / 16.0).abs() < 1e-15);
    Ok((ok, format!("{} atoms", q.len())))
}

fn semidiscrete_single_atom() -> matchkit_core::Result<(bool, String)> {
    let x = TorusPoint::new(0.5, 0.5);
    let mu = EmpiricalMeasure::new(Geometry::Torus, vec![x])?;
    let n = 8;
    let sd = semidiscrete_map(&DensityModel::uniform(Geometry::Torus), &mu, n)?;
    let h = 1.0 / n as f64;
    let oracle: f64 = (0..n)
        .cartesian_product(0..n)
        .map(|(i, j)| {
            let c = TorusPoint::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            Geometry::Torus.distance_sq(&c, &x)
        })
        .sum::<f64>()
        * h
        * h;
    let err = (sd.cost - oracle).abs();
    Ok((err < 1e-14, format!("cost error {err:e}")))
}

fn schedule() -> matchkit_core::Result<(bool, String)> {
    let t: f64 = schedule_t(20, 2.0)?;
    let expected = 20f64.ln().powi(2) / 20.0;
    Ok((
        (t - expected).abs() < 1e-15 && (t - 0.4487).abs() < 1e-4,
        format!("t(20) = {t}"),
    ))
}

type CheckFn = fn() -> matchkit_core::Result<(bool, String)>;

/// Runs every check; solver errors count as failures.
pub fn run_all() -> Vec<Check> {
    let checks: [(&'static str, CheckFn); 7] = [
        ("ot_brute_force", ot_brute_force),
        ("poisson_mode", poisson_mode),
        ("screened_mode", screened_mode),
        ("heat_kernel", heat_kernel),
        ("quantization", quantization),
        ("semidiscrete_single_atom", semidiscrete_single_atom),
        ("schedule", schedule),
    ];
    checks
        .into_iter()
        .map(|(name, f)| match f() {
            Ok((passed, detail)) => Check {
                name,
                passed,
                detail,
            },
            Err(e) => Check {
                name,
                passed: false,
                detail: e.to_string(),
            },
        })
        .collect()
}
