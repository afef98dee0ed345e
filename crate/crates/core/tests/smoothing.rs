use matchkit_core::domain::{
    heat_kernel_in, spectral_to_grid, FourierMode, Geometry, Grid, Parity, SpectralField,
    TorusPoint,
};
use matchkit_core::sampling::{sample_iid, DensityModel, DensitySpec};
use matchkit_core::smoothing::{
    effective_cutoff, empirical_coeffs, heat_smooth, heat_smooth_measure, rho_smoothing_error,
    rho_time_difference, schedule_delta, schedule_t, sup_deviation, EmpiricalMeasure, Schedule,
};
use matchkit_core::Error;
use std::f64::consts::PI;

fn atoms() -> Vec<TorusPoint<f64>> {
    vec![
        TorusPoint::new(0.1, 0.7),
        TorusPoint::new(0.45, 0.2),
        TorusPoint::new(0.9, 0.95),
    ]
}

#[test]
fn empirical_coefficients_are_mode_averages() {
    for g in [Geometry::Torus, Geometry::Square] {
        let mu = EmpiricalMeasure::new(g, atoms()).unwrap();
        let f = empirical_coeffs(&mu, 4);
        for (i, c) in f.coeffs().iter().enumerate() {
            let mode: FourierMode = f.mode(i);
            let expect = mu.atoms.iter().map(|x| mode.eval(g, x)).sum::<f64>() / 3.0;
            assert!((c - expect).abs() < 1e-13, "{g:?} {mode:?}");
        }
    }
    assert!(EmpiricalMeasure::<f64>::new(Geometry::Torus, vec![]).is_err());
}

#[test]
fn smoothed_measure_is_a_kernel_average() {
    for g in [Geometry::Torus, Geometry::Square] {
        let mu = EmpiricalMeasure::new(g, atoms()).unwrap();
        let t = 0.01;
        let grid = Grid::new(g, 64);
        let cutoff = g.max_cutoff(64);
        assert!(effective_cutoff(g, t, cutoff) < cutoff);
        let sm = heat_smooth_measure(&mu, t, cutoff, &grid).unwrap();
        for (x, v) in grid.nodes::<f64>().iter().zip(&sm.grid_values).step_by(37) {
            let expect = mu
                .atoms
                .iter()
                .map(|y| heat_kernel_in(g, t, x, y).unwrap())
                .sum::<f64>()
                / 3.0;
            assert!((v - expect).abs() < 1e-9, "{g:?}: {v} vs {expect}");
        }
        assert!((grid.integrate(&sm.grid_values) - 1.0).abs() < 1e-12);
        assert!(sm.truncation_defect().is_none());
    }
}

#[test]
fn smoothing_damps_each_mode() {
    let f = SpectralField::<f64>::single_mode(Geometry::Torus, 3, [1, 1], Parity::Sin).unwrap();
    let grid = Grid::torus(16);
    let t = 0.02;
    let sm = heat_smooth(&f, t, &grid).unwrap();
    let factor = (-t * 8.0 * PI * PI).exp();
    assert!((sm.field.coeff([1, 1], Parity::Sin) - factor).abs() < 1e-14);
    assert!(matches!(
        heat_smooth(&f, -1.0, &grid),
        Err(Error::NonPositiveTime(_))
    ));
    let same = heat_smooth(&f, 0.0, &grid).unwrap();
    assert_eq!(same.field, f);
}

#[test]
fn truncation_defect_flags_negative_values() {
    let mu = EmpiricalMeasure::new(Geometry::Torus, vec![TorusPoint::new(0.5, 0.5)]).unwrap();
    let grid = Grid::torus(32);
    // a point mass truncated at a few modes rings below zero
    let sm = heat_smooth_measure(&mu, 1e-5, 6, &grid).unwrap();
    assert!(sm.truncation_defect().is_some());
}

#[test]
fn schedule_values() {
    let s = Schedule::default();
    s.validate().unwrap();
    let n = 1024;
    let l = (n as f64).ln();
    assert!((s.t::<f64>(n).unwrap() - l.powi(3) / n as f64).abs() < 1e-15);
    assert!((s.delta::<f64>(n).unwrap() - l.powf(-0.5)).abs() < 1e-15);
    assert!((s.event_threshold::<f64>(n) - l.powi(-2)).abs() < 1e-15);
    assert!((s.conclusion_exponent() - 0.5).abs() < 1e-15);
    assert!((schedule_t::<f64>(n, 0.0).unwrap() - 1.0 / 1024.0).abs() < 1e-18);
    assert!(schedule_t::<f64>(2, 1.0).is_err());
    assert!(schedule_delta::<f64>(1, 1.0).is_err());
    let bad = Schedule { upsilon: 1.0, ..s };
    assert!(bad.validate().is_err());
    assert!(Schedule { kappa1: 0.0, ..s }.validate().is_err());
}

#[test]
fn deviation_between_smoothings() {
    let cloud = sample_iid(&DensityModel::<f64>::uniform(Geometry::Torus), 64, 2);
    let mu = EmpiricalMeasure::from_cloud(&cloud);
    let grid = Grid::torus(32);
    let a = heat_smooth_measure(&mu, 0.05, 15, &grid).unwrap();
    let flat = heat_smooth(
        &SpectralField::constant(Geometry::Torus, 15, 1.0),
        0.05,
        &grid,
    )
    .unwrap();
    assert_eq!(sup_deviation(&a, &a).unwrap(), 0.0);
    let d = sup_deviation(&a, &flat).unwrap();
    let direct = a
        .grid_values
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    assert!((d - direct).abs() < 1e-12);
    let other = heat_smooth_measure(&mu, 0.05, 7, &grid).unwrap();
    assert!(matches!(sup_deviation(&a, &other), Err(Error::Mismatch(_))));
}

#[test]
fn density_smoothing_error_closed_form() {
    let a = 0.4;
    let rho = DensityModel::<f64>::from_spec(Geometry::Torus, &DensitySpec::Sine { amplitude: a })
        .unwrap();
    let grid = Grid::torus(64);
    let s = 0.003;
    let damp = 1.0 - (-4.0 * PI * PI * s).exp();
    // || a damp sin(2 pi x1) ||_q with int |sin|^2 = 1/2 and int |sin|^4 = 3/8
    let e2 = rho_smoothing_error(&rho, s, 2.0, 8, &grid).unwrap();
    let e4 = rho_smoothing_error(&rho, s, 4.0, 8, &grid).unwrap();
    assert!((e2 - a * damp / 2f64.sqrt()).abs() < 1e-12);
    assert!((e4 - a * damp * 0.375f64.powf(0.25)).abs() < 1e-12);
    let d = rho_time_difference(&rho, 0.0, s, 2.0, 8, &grid).unwrap();
    assert!((d - e2).abs() < 1e-12);
    assert!(rho_smoothing_error(&rho, 0.0, 2.0, 8, &grid).is_err());
    let uniform = DensityModel::<f64>::uniform(Geometry::Torus);
    assert_eq!(
        rho_smoothing_error(&uniform, s, 2.0, 8, &grid).unwrap(),
        0.0
    );
}

#[test]
fn density_smoothing_error_is_linear_in_time() {
    let rho = DensityModel::<f64>::from_spec(
        Geometry::Torus,
        &DensitySpec::Bump {
            concentration: 1.5,
            center: [0.3, 0.6],
        },
    )
    .unwrap();
    let grid = Grid::torus(64);
    let k = 16;
    for q in [1.0, 2.0, 4.0] {
        // || P_s rho - rho ||_q <= s || lap rho ||_q, and the ratio tends to that bound as s -> 0
        let lap = rho.spectral(k).unwrap().apply_multiplier(|lam| -lam);
        let bound = grid.lq_norm(&spectral_to_grid(&lap, &grid), q);
        let ratios: Vec<f64> = (4..=14)
            .map(|e| {
                let s = 2f64.powi(-e);
                rho_smoothing_error(&rho, s, q, k, &grid).unwrap() / s
            })
            .collect();
        assert!(
            ratios.iter().all(|r| *r <= bound * (1.0 + 1e-9)),
            "q={q}: {ratios:?} vs {bound}"
        );
        assert!(
            (ratios[10] - bound).abs() < 0.01 * bound,
            "q={q}: {} vs {bound}",
            ratios[10]
        );
        assert!(ratios[0] > 0.1 * bound);
    }
}

#[test]
fn single_precision_smoothing() {
    let mu =
        EmpiricalMeasure::new(Geometry::Torus, vec![TorusPoint::new(0.25f32, 0.75f32)]).unwrap();
    let grid = Grid::torus(32);
    let sm = heat_smooth_measure(&mu, 0.02f32, 15, &grid).unwrap();
    let f64_mu =
        EmpiricalMeasure::new(Geometry::Torus, vec![TorusPoint::new(0.25f64, 0.75f64)]).unwrap();
    let reference = heat_smooth_measure(&f64_mu, 0.02f64, 15, &grid).unwrap();
    let values = spectral_to_grid(&sm.field, &grid);
    for (a, b) in values.iter().zip(&reference.grid_values) {
        assert!((*a as f64 - b).abs() < 1e-4 * b.abs().max(1.0));
    }
}
