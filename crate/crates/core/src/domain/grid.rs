use super::{Geometry, TorusPoint};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Evaluation lattice with spacing `1/N`.
///
/// On the torus the nodes are `(i/N, j/N)` for `0 <= i, j < N` with equal weights.
/// On the square they are the `(N+1)^2` vertices `0 <= i, j <= N` with trapezoid
/// weights, which integrate even trigonometric polynomials exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    pub geometry: Geometry,
    pub resolution: usize,
}

impl Grid {
    pub fn new(geometry: Geometry, resolution: usize) -> Self {
        assert!(resolution >= 1, "grid resolution must be positive");
        Self {
            geometry,
            resolution,
        }
    }

    pub fn torus(resolution: usize) -> Self {
        Self::new(Geometry::Torus, resolution)
    }

    /// Nodes per axis.
    pub fn side(&self) -> usize {
        match self.geometry {
            Geometry::Torus => self.resolution,
            Geometry::Square => self.resolution + 1,
        }
    }

    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Size of the periodic box the spectral transforms run on.
    pub(crate) fn box_size(&self) -> usize {
        match self.geometry {
            Geometry::Torus => self.resolution,
            Geometry::Square => 2 * self.resolution,
        }
    }

    pub fn spacing<S: Real>(&self) -> S {
        S::one() / S::of_usize(self.resolution)
    }

    /// Node with row index `i` (first coordinate) and column index `j`.
    pub fn node<S: Real>(&self, i: usize, j: usize) -> TorusPoint<S> {
        let h: S = self.spacing();
        TorusPoint {
            x1: S::of_usize(i) * h,
            x2: S::of_usize(j) * h,
        }
    }

    pub fn nodes<S: Real>(&self) -> Vec<TorusPoint<S>> {
        let s = self.side();
        let mut out = Vec::with_capacity(self.len());
        for i in 0..s {
            for j in 0..s {
                out.push(self.node(i, j));
            }
        }
        out
    }

    fn axis_weight(&self, i: usize) -> u64 {
        match self.geometry {
            Geometry::Torus => 1,
            Geometry::Square => {
                if i == 0 || i == self.resolution {
                    1
                } else {
                    2
                }
            }
        }
    }

    fn weight_norm(&self) -> u64 {
        let n = self.resolution as u64;
        match self.geometry {
            Geometry::Torus => n * n,
            Geometry::Square => 4 * n * n,
        }
    }

    /// Quadrature weight of every node; the weights sum to one.
    pub fn weights<S: Real>(&self) -> Vec<S> {
        let s = self.side();
        let norm = S::of(self.weight_norm() as f64);
        let mut out = Vec::with_capacity(self.len());
        for i in 0..s {
            for j in 0..s {
                out.push(S::of((self.axis_weight(i) * self.axis_weight(j)) as f64) / norm);
            }
        }
        out
    }

    /// Grid quadrature of `values` against the normalized reference measure.
    pub fn integrate<S: Real>(&self, values: &[S]) -> S {
        assert_eq!(values.len(), self.len(), "value count does not match grid");
        let s = self.side();
        let mut acc = S::zero();
        for i in 0..s {
            let wi = self.axis_weight(i);
            let mut row = S::zero();
            for j in 0..s {
                row += S::of(self.axis_weight(j) as f64) * values[i * s + j];
            }
            acc += S::of(wi as f64) * row;
        }
        acc / S::of(self.weight_norm() as f64)
    }

    /// `(integral of |f|^q)^(1/q)` by grid quadrature.
    pub fn lq_norm<S: Real>(&self, values: &[S], q: S) -> S {
        let powered: Vec<S> = values
            .iter()
            .map(|v| crate::scalar::abs(*v).powf(q))
            .collect();
        self.integrate(&powered).powf(S::one() / q)
    }

    /// Index of the node nearest to `x`.
    pub fn nearest<S: Real>(&self, x: &TorusPoint<S>) -> usize {
        let n = self.resolution;
        let idx = |c: S| -> usize {
            let r = (c * S::of_usize(n)).round().to_usize().unwrap_or(0);
            match self.geometry {
                Geometry::Torus => r % n,
                Geometry::Square => r.min(n),
            }
        };
        idx(x.x1) * self.side() + idx(x.x2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_integrates_to_one_exactly() {
        for g in [
            Grid::torus(7),
            Grid::new(Geometry::Square, 5),
            Grid::torus(256),
        ] {
            let ones = vec![1.0_f64; g.len()];
            assert_eq!(g.integrate(&ones), 1.0);
            assert_eq!(g.integrate(&vec![1.0_f32; g.len()]), 1.0);
        }
    }

    #[test]
    fn nearest_wraps() {
        let g = Grid::torus(4);
        assert_eq!(g.nearest(&TorusPoint::new(0.99_f64, 0.26)), 1);
    }
}
