use super::{quantize_values, solve_discrete_ot_sparse, DiscreteMeasure};
use crate::domain::{FourierMode, Geometry, Grid, SpectralField, TorusPoint};
use crate::elliptic::PotentialField;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::smoothing::SmoothedDensity;

/// Pointwise evaluation of a field through its nonzero coefficients only.
struct SparseField<S> {
    geometry: Geometry,
    terms: Vec<(FourierMode, S)>,
}

impl<S: Real> SparseField<S> {
    fn new(f: &SpectralField<S>) -> Self {
        let terms = f
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != S::zero())
            .map(|(i, c)| (f.mode(i), *c))
            .collect();
        Self {
            geometry: f.geometry(),
            terms,
        }
    }

    fn value(&self, x: &TorusPoint<S>) -> S {
        self.terms
            .iter()
            .map(|(m, c)| *c * m.eval(self.geometry, x))
            .sum()
    }

    fn value_grad(&self, x: &TorusPoint<S>) -> (S, [S; 2]) {
        let mut v = S::zero();
        let mut g = [S::zero(); 2];
        for (m, c) in &self.terms {
            let (a, d) = m.eval_grad(self.geometry, x);
            v += *c * a;
            g[0] += *c * d[0];
            g[1] += *c * d[1];
        }
        (v, g)
    }
}

#[derive(Clone, Debug)]
pub struct FlowResult<S> {
    /// Final particle positions, one per node of the particle grid.
    pub positions: Vec<TorusPoint<S>>,
    /// Push-forward of the source density: the positions weighted by the source mass.
    pub flowed: DiscreteMeasure<TorusPoint<S>, S>,
    /// Target density quantized on the particle grid.
    pub target: DiscreteMeasure<TorusPoint<S>, S>,
    /// Exact `W_2^2(flowed, target)`; `None` when not requested.
    pub w2_sq: Option<S>,
    /// Smallest interpolated density met along the particle paths.
    pub min_eta: S,
}

/// Moves the nodes of `grid` along `dx/ds = rho_delta grad h / ((1-s) mu + s nu)` for
/// `s` in `[0,1]` with classical RK4, where `h` solves `-div(rho_delta grad h) = nu - mu`.
/// The densities must stay above `lambda / 4` with `lambda = min rho_delta`.
pub fn flow_particles<S: Real>(
    mu: &SpectralField<S>,
    nu: &SpectralField<S>,
    h: &PotentialField<S>,
    rho_delta: &SpectralField<S>,
    grid: &Grid,
    steps: usize,
) -> Result<(Vec<TorusPoint<S>>, S)> {
    if steps == 0 {
        return Err(Error::InvalidArgument(
            "flow needs at least one step".into(),
        ));
    }
    let geometry = grid.geometry;
    for f in [mu, nu, &h.field, rho_delta] {
        if f.geometry() != geometry {
            return Err(Error::Mismatch(
                "flow inputs live on different geometries".into(),
            ));
        }
    }
    let mu = SparseField::new(mu);
    let nu = SparseField::new(nu);
    let h = SparseField::new(&h.field);
    let rho = SparseField::new(rho_delta);

    let nodes: Vec<TorusPoint<S>> = grid.nodes();
    // eta_s is affine in s, so its minimum over s sits at an endpoint
    let mut lambda = S::infinity();
    let mut floor = S::infinity();
    let mut floor_s = 0.0;
    for x in &nodes {
        lambda = lambda.min(rho.value(x));
        let (a, b) = (mu.value(x), nu.value(x));
        if a < floor {
            floor = a;
            floor_s = 0.0;
        }
        if b < floor {
            floor = b;
            floor_s = 1.0;
        }
    }
    let quarter = lambda / S::of(4.0);
    if !(floor >= quarter) {
        return Err(Error::FlowPositivity {
            s: floor_s,
            min: floor.to64(),
        });
    }

    let mut min_eta = floor;
    let mut velocity = |s: S, x: &TorusPoint<S>| -> Result<[S; 2]> {
        let eta = (S::one() - s) * mu.value(x) + s * nu.value(x);
        min_eta = min_eta.min(eta);
        if !(eta >= quarter) {
            return Err(Error::FlowPositivity {
                s: s.to64(),
                min: eta.to64(),
            });
        }
        let (_, g) = h.value_grad(x);
        let r = rho.value(x) / eta;
        Ok([r * g[0], r * g[1]])
    };

    let ds = S::one() / S::of_usize(steps);
    let half = S::of(0.5);
    let sixth = S::one() / S::of(6.0);
    let mut out = Vec::with_capacity(nodes.len());
    for x0 in &nodes {
        // integrate in unwrapped coordinates and reduce at the end
        let mut x = [x0.x1, x0.x2];
        let at = |p: [S; 2]| geometry.point(p[0], p[1]);
        let shift = |p: [S; 2], v: [S; 2], a: S| [p[0] + a * v[0], p[1] + a * v[1]];
        for k in 0..steps {
            let s = S::of_usize(k) * ds;
            let k1 = velocity(s, &at(x))?;
            let k2 = velocity(s + half * ds, &at(shift(x, k1, half * ds)))?;
            let k3 = velocity(s + half * ds, &at(shift(x, k2, half * ds)))?;
            let k4 = velocity(s + ds, &at(shift(x, k3, ds)))?;
            for c in 0..2 {
                x[c] += ds * sixth * (k1[c] + S::of(2.0) * (k2[c] + k3[c]) + k4[c]);
            }
        }
        out.push(at(x));
    }
    Ok((out, min_eta))
}

/// Flows the nodes of the source's grid and measures the exact `W_2^2` between the
/// push-forward of `mu` and the quantized `nu`.
pub fn flow_transport<S: Real>(
    mu: &SmoothedDensity<S>,
    nu: &SmoothedDensity<S>,
    h: &PotentialField<S>,
    rho_delta: &SpectralField<S>,
    steps: usize,
    measure: bool,
) -> Result<FlowResult<S>> {
    if mu.grid != nu.grid {
        return Err(Error::Mismatch("source and target grids differ".into()));
    }
    let (positions, min_eta) = flow_particles(&mu.field, &nu.field, h, rho_delta, &mu.grid, steps)?;
    let source = quantize_values(&mu.grid, &mu.grid_values)?;
    let target = quantize_values(&nu.grid, &nu.grid_values)?;
    let flowed = DiscreteMeasure::new(mu.grid.geometry, positions.clone(), source.weights)?;
    let w2_sq = if measure {
        Some(solve_discrete_ot_sparse(&flowed, &target)?.cost)
    } else {
        None
    };
    Ok(FlowResult {
        positions,
        flowed,
        target,
        w2_sq,
        min_eta,
    })
}
