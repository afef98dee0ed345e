use super::{Geometry, TorusPoint};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Time below which the heat kernel is evaluated by the image sum.
pub fn t_switch<S: Real>(geometry: Geometry) -> S {
    S::one() / geometry.spectral_gap::<S>()
}

/// Heat kernel of the unit flat torus.
pub fn heat_kernel<S: Real>(t: S, x: &TorusPoint<S>, y: &TorusPoint<S>) -> Result<S> {
    heat_kernel_in(Geometry::Torus, t, x, y)
}

pub fn heat_kernel_in<S: Real>(
    geometry: Geometry,
    t: S,
    x: &TorusPoint<S>,
    y: &TorusPoint<S>,
) -> Result<S> {
    if !(t > S::zero()) {
        return Err(Error::NonPositiveTime(t.to64()));
    }
    Ok(if t >= t_switch(geometry) {
        heat_kernel_spectral(geometry, t, x, y)
    } else {
        heat_kernel_images(geometry, t, x, y)
    })
}

/// Eigenfunction expansion `sum_k exp(-t lambda_k) phi_k(x) phi_k(y)`.
pub fn heat_kernel_spectral<S: Real>(
    geometry: Geometry,
    t: S,
    x: &TorusPoint<S>,
    y: &TorusPoint<S>,
) -> S {
    per_axis(geometry, x, y, |d| circle_spectral(t, d, geometry.period()))
}

/// Periodized Gaussian `sum_m (4 pi t)^{-1} exp(-|x - y + m|^2 / 4t)`.
pub fn heat_kernel_images<S: Real>(
    geometry: Geometry,
    t: S,
    x: &TorusPoint<S>,
    y: &TorusPoint<S>,
) -> S {
    per_axis(geometry, x, y, |d| circle_images(t, d, geometry.period()))
}

fn per_axis<S: Real>(
    geometry: Geometry,
    x: &TorusPoint<S>,
    y: &TorusPoint<S>,
    k: impl Fn(S) -> S,
) -> S {
    match geometry {
        Geometry::Torus => k(x.x1 - y.x1) * k(x.x2 - y.x2),
        // Neumann kernel on [0,1] is the sum of the direct and the reflected image.
        Geometry::Square => (k(x.x1 - y.x1) + k(x.x1 + y.x1)) * (k(x.x2 - y.x2) + k(x.x2 + y.x2)),
    }
}

/// Heat kernel of the circle of length `period`, theta series form.
fn circle_spectral<S: Real>(t: S, d: S, period: f64) -> S {
    let ell = S::of(period);
    let w = S::TAU() / ell;
    let floor = S::of(1e-18);
    let mut acc = S::one();
    let mut k = 1usize;
    loop {
        let kf = S::of_usize(k);
        let damp = (-(w * kf) * (w * kf) * t).exp();
        if damp < floor {
            break;
        }
        acc += S::of(2.0) * damp * (w * kf * d).cos();
        k += 1;
    }
    acc / ell
}

/// Heat kernel of the circle of length `period`, image form.
fn circle_images<S: Real>(t: S, d: S, period: f64) -> S {
    let ell = S::of(period);
    let d = d - (d / ell).round() * ell;
    // exp(-z^2 / 4t) < 1e-18 beyond 13 sqrt(t)
    let reach = (S::of(13.0) * t.sqrt() / ell).ceil().to_i64().unwrap_or(0) + 1;
    let four_t = S::of(4.0) * t;
    let mut acc = S::zero();
    for m in -reach..=reach {
        let z = d + S::of(m as f64) * ell;
        acc += (-(z * z) / four_t).exp();
    }
    acc / (S::PI() * four_t).sqrt()
}

/// Heat trace `sum_k exp(-t lambda_k)` over every eigenvalue, including the zero mode.
pub fn heat_trace<S: Real>(geometry: Geometry, t: S) -> Result<S> {
    if !(t > S::zero()) {
        return Err(Error::NonPositiveTime(t.to64()));
    }
    let w: S = geometry.frequency(1);
    let floor = S::of(1e-18);
    let mut axis = S::one();
    let mut k = 1usize;
    loop {
        let kf = S::of_usize(k);
        let damp = (-(w * kf) * (w * kf) * t).exp();
        if damp < floor {
            break;
        }
        axis += match geometry {
            Geometry::Torus => S::of(2.0) * damp,
            Geometry::Square => damp,
        };
        k += 1;
    }
    Ok(axis * axis)
}
