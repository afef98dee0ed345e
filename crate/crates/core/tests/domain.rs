use matchkit_core::domain::{
    exp_map, grid_to_spectral, heat_kernel, heat_kernel_images, heat_kernel_in,
    heat_kernel_spectral, heat_trace, hs_norm, spectral_to_grid, t_switch, torus_displacement,
    torus_distance, FourierMode, Geometry, Grid, Parity, SpectralField, TorusPoint,
};
use matchkit_core::Error;
use proptest::prelude::*;
use std::f64::consts::PI;

fn pt(a: f64, b: f64) -> TorusPoint<f64> {
    TorusPoint::new(a, b)
}

proptest! {
    #[test]
    fn distance_is_a_metric(a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.0..1.0f64, d in 0.0..1.0f64, e in 0.0..1.0f64, f in 0.0..1.0f64) {
        let (x, y, z) = (pt(a, b), pt(c, d), pt(e, f));
        let dxy = torus_distance(&x, &y);
        prop_assert!((dxy - torus_distance(&y, &x)).abs() < 1e-15);
        prop_assert!(dxy <= 0.5f64.sqrt() + 1e-15);
        prop_assert!(dxy <= torus_distance(&x, &z) + torus_distance(&z, &y) + 1e-12);
    }

    #[test]
    fn coordinates_wrap(a in -5.0..5.0f64, b in -5.0..5.0f64) {
        let x = pt(a, b);
        prop_assert!((0.0..1.0).contains(&x.x1) && (0.0..1.0).contains(&x.x2));
        prop_assert!(torus_distance(&x, &pt(a + 3.0, b - 2.0)) < 1e-12);
    }

    #[test]
    fn exp_map_inverts_displacement(a in 0.0..1.0f64, b in 0.0..1.0f64, v1 in -0.49..0.49f64, v2 in -0.49..0.49f64) {
        let x = pt(a, b);
        let y = exp_map(&x, [v1, v2]);
        let v = torus_displacement(&x, &y);
        prop_assert!((v[0] - v1).abs() < 1e-12 && (v[1] - v2).abs() < 1e-12);
        prop_assert!((torus_distance(&x, &y) - (v1 * v1 + v2 * v2).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn square_points_reflect(a in -0.9..1.9f64, b in -0.9..1.9f64) {
        let x = Geometry::Square.point(a, b);
        let fold = |c: f64| if c < 0.0 { -c } else if c > 1.0 { 2.0 - c } else { c };
        prop_assert!((x.x1 - fold(a)).abs() < 1e-12 && (x.x2 - fold(b)).abs() < 1e-12);
    }
}

#[test]
fn modes_are_orthonormal_under_quadrature() {
    for g in [Geometry::Torus, Geometry::Square] {
        let k = 3;
        let grid = Grid::new(g, 16);
        let nodes = grid.nodes::<f64>();
        let modes = SpectralField::<f64>::zeros(g, k).modes();
        for (i, a) in modes.iter().enumerate() {
            for b in &modes[i..] {
                let prod: Vec<f64> = nodes.iter().map(|x| a.eval(g, x) * b.eval(g, x)).collect();
                let ip = grid.integrate(&prod);
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-12, "{g:?} {a:?} {b:?}: {ip}");
            }
        }
    }
}

#[test]
fn mode_gradient_matches_differences() {
    let h = 1e-6;
    for (g, k, p) in [
        (Geometry::Torus, [2, -1], Parity::Cos),
        (Geometry::Torus, [1, 3], Parity::Sin),
        (Geometry::Square, [2, 1], Parity::Cos),
    ] {
        let m = FourierMode::new(g, k, p);
        let x = pt(0.31, 0.67);
        let (v, grad) = m.eval_grad(g, &x);
        assert!((v - m.eval(g, &x)).abs() < 1e-14);
        let d1 = (m.eval(g, &pt(x.x1 + h, x.x2)) - m.eval(g, &pt(x.x1 - h, x.x2))) / (2.0 * h);
        let d2 = (m.eval(g, &pt(x.x1, x.x2 + h)) - m.eval(g, &pt(x.x1, x.x2 - h))) / (2.0 * h);
        assert!(
            (d1 - grad[0]).abs() < 1e-6 && (d2 - grad[1]).abs() < 1e-6,
            "{k:?}"
        );
    }
}

#[test]
fn eigenvalues() {
    assert!((Geometry::Torus.eigenvalue::<f64>([1, 2]) - 4.0 * PI * PI * 5.0).abs() < 1e-10);
    assert!((Geometry::Square.eigenvalue::<f64>([1, 2]) - PI * PI * 5.0).abs() < 1e-10);
    assert!((Geometry::Torus.spectral_gap::<f64>() - 4.0 * PI * PI).abs() < 1e-12);
}

#[test]
fn grid_transform_round_trip() {
    for g in [Geometry::Torus, Geometry::Square] {
        let k = 5;
        let n = g.coeff_count(k);
        let coeffs: Vec<f64> = (0..n)
            .map(|i| ((i * 7 + 3) as f64).sin() / (1.0 + i as f64))
            .collect();
        let f = SpectralField::from_coeffs(g, k, coeffs).unwrap();
        let grid = Grid::new(g, 16);
        let values = spectral_to_grid(&f, &grid);
        for (x, v) in grid.nodes::<f64>().iter().zip(&values) {
            assert!((f.eval(x) - v).abs() < 1e-12);
        }
        let back = grid_to_spectral(&values, &grid, k).unwrap();
        assert!(back.max_abs_diff(&f).unwrap() < 1e-12, "{g:?}");
    }
}

#[test]
fn aliasing_cutoff_is_rejected() {
    let grid = Grid::torus(8);
    let values = vec![0.0; grid.len()];
    assert!(matches!(
        grid_to_spectral(&values, &grid, 4),
        Err(Error::CutoffTooLarge {
            cutoff: 4,
            max: 3,
            ..
        })
    ));
}

#[test]
fn field_json_round_trip() {
    let f = SpectralField::<f64>::single_mode(Geometry::Torus, 3, [1, -2], Parity::Sin)
        .unwrap()
        .scale(0.25);
    let back = SpectralField::<f64>::from_json(&f.to_json().unwrap()).unwrap();
    assert_eq!(f, back);
    assert!(
        SpectralField::<f64>::from_json(r#"{"cutoff":2,"coeffs":[1.0],"geometry":"torus"}"#)
            .is_err()
    );
}

#[test]
fn sobolev_norm_of_a_mode() {
    let f = SpectralField::<f64>::single_mode(Geometry::Torus, 4, [2, 1], Parity::Cos)
        .unwrap()
        .scale(3.0);
    let lam = Geometry::Torus.eigenvalue::<f64>([2, 1]);
    assert!((hs_norm(&f, 0.5) - 3.0 * lam.sqrt()).abs() < 1e-9);
    assert!((hs_norm(&f, 0.0) - 3.0).abs() < 1e-12);
}

fn one_dim_images(t: f64, d: f64, period: f64) -> f64 {
    (-50..=50)
        .map(|m| {
            let z = d + m as f64 * period;
            (-z * z / (4.0 * t)).exp()
        })
        .sum::<f64>()
        / (4.0 * PI * t).sqrt()
}

#[test]
fn kernel_representations_agree() {
    for g in [Geometry::Torus, Geometry::Square] {
        for t in [1e-3, 1e-2, 1.0 / (4.0 * PI * PI), 0.1, 1.0] {
            for (x, y) in [
                (pt(0.1, 0.2), pt(0.9, 0.7)),
                (pt(0.5, 0.5), pt(0.5, 0.5)),
                (pt(0.0, 0.3), pt(0.45, 0.95)),
            ] {
                let a = heat_kernel_spectral(g, t, &x, &y);
                let b = heat_kernel_images(g, t, &x, &y);
                assert!(
                    (a - b).abs() < 1e-10 * a.max(1.0),
                    "{g:?} t={t}: {a} vs {b}"
                );
            }
        }
    }
}

#[test]
fn kernel_matches_gaussian_sum() {
    let x = pt(0.12, 0.83);
    let y = pt(0.77, 0.05);
    for t in [5e-4, 0.02, 0.5] {
        let expect = one_dim_images(t, x.x1 - y.x1, 1.0) * one_dim_images(t, x.x2 - y.x2, 1.0);
        let got = heat_kernel(t, &x, &y).unwrap();
        assert!((got - expect).abs() < 1e-11 * expect.max(1.0), "t={t}");
    }
    assert!(t_switch::<f64>(Geometry::Torus) > 0.0);
}

#[test]
fn kernel_rejects_nonpositive_time() {
    let x = pt(0.0, 0.0);
    assert!(matches!(
        heat_kernel(0.0, &x, &x),
        Err(Error::NonPositiveTime(_))
    ));
    assert!(heat_kernel_in(Geometry::Square, -1.0, &x, &x).is_err());
    assert!(heat_trace::<f64>(Geometry::Torus, 0.0).is_err());
}

#[test]
fn kernel_is_a_probability_density() {
    for g in [Geometry::Torus, Geometry::Square] {
        let grid = Grid::new(g, 128);
        let y = g.point(0.3, 0.9);
        for t in [0.003, 0.05] {
            let vals: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|x| heat_kernel_in(g, t, x, &y).unwrap())
                .collect();
            assert!((grid.integrate(&vals) - 1.0).abs() < 1e-10, "{g:?} t={t}");
            assert!(vals.iter().all(|v| *v > 0.0));
        }
    }
}

#[test]
fn semigroup_property() {
    let grid = Grid::torus(96);
    let (x, y) = (pt(0.2, 0.4), pt(0.7, 0.1));
    let (s, t) = (0.01, 0.015);
    let vals: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|z| heat_kernel(s, &x, z).unwrap() * heat_kernel(t, z, &y).unwrap())
        .collect();
    let lhs = grid.integrate(&vals);
    let rhs = heat_kernel(s + t, &x, &y).unwrap();
    assert!((lhs - rhs).abs() < 1e-10 * rhs.max(1.0));
}

#[test]
fn trace_matches_diagonal_integral() {
    for t in [1e-3, 0.01, 0.1, 1.0] {
        // on the torus the diagonal is constant
        let diag = one_dim_images(t, 0.0, 1.0).powi(2);
        let tr = heat_trace(Geometry::Torus, t).unwrap();
        assert!((tr - diag).abs() < 1e-9 * diag, "t={t}");

        let grid = Grid::new(Geometry::Square, 256);
        let vals: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|x| heat_kernel_in(Geometry::Square, t, x, x).unwrap())
            .collect();
        let sq = heat_trace(Geometry::Square, t).unwrap();
        assert!(
            (grid.integrate(&vals) - sq).abs() < 1e-8 * sq,
            "square t={t}"
        );
    }
}
