//! Flat torus (and Neumann square) geometry, Fourier basis, grids and the heat kernel.

mod fft;
mod grid;
mod heat;
pub(crate) mod spectral;

pub use grid::Grid;
pub use heat::{
    heat_kernel, heat_kernel_images, heat_kernel_in, heat_kernel_spectral, heat_trace, t_switch,
};
pub use spectral::{
    grid_to_spectral, hs_norm, spectral_to_grid, FourierMode, Parity, SpectralField,
};

pub(crate) use fft::Fft2;
pub(crate) use spectral::Spectrum;

use crate::scalar::{abs, Real};
use serde::{Deserialize, Serialize};

/// Underlying manifold. The square carries homogeneous Neumann conditions and is
/// represented internally as the even part of a doubled periodic box.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    #[default]
    Torus,
    Square,
}

impl Geometry {
    /// Period of the internal periodic box along each axis.
    pub fn period(self) -> f64 {
        match self {
            Geometry::Torus => 1.0,
            Geometry::Square => 2.0,
        }
    }

    /// Angular frequency of the integer wave number `k` along one axis.
    pub fn frequency<S: Real>(self, k: i64) -> S {
        S::of(std::f64::consts::TAU * k as f64 / self.period())
    }

    pub fn eigenvalue<S: Real>(self, k: [i64; 2]) -> S {
        let w1: S = self.frequency(k[0]);
        let w2: S = self.frequency(k[1]);
        w1 * w1 + w2 * w2
    }

    /// Smallest nonzero Laplace eigenvalue.
    pub fn spectral_gap<S: Real>(self) -> S {
        self.eigenvalue([1, 0])
    }

    /// Largest cutoff whose modes are not aliased on a grid of resolution `n`.
    pub fn max_cutoff(self, n: usize) -> usize {
        match self {
            Geometry::Torus => (n / 2).saturating_sub(1),
            Geometry::Square => n.saturating_sub(1),
        }
    }

    /// Number of real coefficients retained at cutoff `k`.
    pub fn coeff_count(self, k: usize) -> usize {
        match self {
            Geometry::Torus => (2 * k + 1) * (2 * k + 1),
            Geometry::Square => (k + 1) * (k + 1),
        }
    }

    pub fn point<S: Real>(self, x1: S, x2: S) -> TorusPoint<S> {
        match self {
            Geometry::Torus => TorusPoint::new(x1, x2),
            Geometry::Square => TorusPoint {
                x1: reflect(x1),
                x2: reflect(x2),
            },
        }
    }

    pub fn distance<S: Real>(self, x: &TorusPoint<S>, y: &TorusPoint<S>) -> S {
        self.distance_sq(x, y).sqrt()
    }

    pub fn distance_sq<S: Real>(self, x: &TorusPoint<S>, y: &TorusPoint<S>) -> S {
        match self {
            Geometry::Torus => {
                let a = wrapped_gap(x.x1, y.x1);
                let b = wrapped_gap(x.x2, y.x2);
                a * a + b * b
            }
            Geometry::Square => {
                let a = x.x1 - y.x1;
                let b = x.x2 - y.x2;
                a * a + b * b
            }
        }
    }

    /// Geodesic step from `x` along `v` (wrap-around on the torus, reflection on the square).
    pub fn exp_map<S: Real>(self, x: &TorusPoint<S>, v: [S; 2]) -> TorusPoint<S> {
        self.point(x.x1 + v[0], x.x2 + v[1])
    }
}

/// A point of the unit torus `[0,1)^2`; on the square geometry coordinates lie in `[0,1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct TorusPoint<S> {
    pub x1: S,
    pub x2: S,
}

impl<S: Real> TorusPoint<S> {
    /// Builds a point, reducing both coordinates mod 1.
    pub fn new(x1: S, x2: S) -> Self {
        Self {
            x1: wrap(x1),
            x2: wrap(x2),
        }
    }

    pub fn coords(&self) -> [S; 2] {
        [self.x1, self.x2]
    }

    /// Componentwise translation mod 1.
    pub fn translate(&self, v: [S; 2]) -> Self {
        Self::new(self.x1 + v[0], self.x2 + v[1])
    }
}

pub(crate) fn wrap<S: Real>(x: S) -> S {
    let r = x - x.floor();
    if r >= S::one() || r < S::zero() {
        S::zero()
    } else {
        r
    }
}

fn reflect<S: Real>(x: S) -> S {
    let two = S::of(2.0);
    let y = x - (x / two).floor() * two;
    if y > S::one() {
        two - y
    } else if y < S::zero() {
        S::zero()
    } else {
        y
    }
}

#[inline]
fn wrapped_gap<S: Real>(a: S, b: S) -> S {
    let d = abs(a - b);
    d.min(S::one() - d)
}

/// Geodesic distance on the unit flat torus.
pub fn torus_distance<S: Real>(x: &TorusPoint<S>, y: &TorusPoint<S>) -> S {
    Geometry::Torus.distance(x, y)
}

/// `(x + v) mod 1`.
pub fn exp_map<S: Real>(x: &TorusPoint<S>, v: [S; 2]) -> TorusPoint<S> {
    x.translate(v)
}

/// Signed displacement from `x` to the nearest periodic copy of `y`.
pub fn torus_displacement<S: Real>(x: &TorusPoint<S>, y: &TorusPoint<S>) -> [S; 2] {
    let half = S::of(0.5);
    let mut d = [y.x1 - x.x1, y.x2 - x.x2];
    for c in d.iter_mut() {
        if *c > half {
            *c -= S::one();
        } else if *c < -half {
            *c += S::one();
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_handles_tiny_negatives() {
        let x = wrap(-1e-20_f64);
        assert!((0.0..1.0).contains(&x));
        assert_eq!(wrap(1.0_f64), 0.0);
        assert_eq!(wrap(-0.25_f64), 0.75);
    }

    #[test]
    fn square_reflects() {
        let g = Geometry::Square;
        let p = g.exp_map(&g.point(0.9_f64, 0.1), [0.2, -0.3]);
        assert!((p.x1 - 0.9).abs() < 1e-15);
        assert!((p.x2 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn displacement_is_shortest() {
        let a = TorusPoint::new(0.95_f64, 0.5);
        let b = TorusPoint::new(0.05_f64, 0.5);
        let d = torus_displacement(&a, &b);
        assert!((d[0] - 0.1).abs() < 1e-12 && d[1] == 0.0);
    }
}
