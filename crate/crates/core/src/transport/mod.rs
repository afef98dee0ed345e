//! Exact discrete optimal transport, semi-discrete transport by quantization, the
//! linearized transport plan and its distance to optimal plans, and the Moser flow.

mod assignment;
mod flow;
mod plan;
mod pricing;
mod semidiscrete;
mod simplex;
mod sinkhorn;

pub use assignment::{solve_assignment, Assignment};
pub use flow::{flow_particles, flow_transport, FlowResult};
pub use plan::{
    build_plan_gamma, coupling_measure, gradient_at_cells, map_discrepancy, plan_distance,
    PlanDistance,
};
pub use semidiscrete::{
    cell_centers, quantize_density, quantize_values, semidiscrete_map, SemiDiscrete, TransportMap,
};
pub use sinkhorn::{sinkhorn_ot, SinkhornResult};

use crate::domain::{Geometry, TorusPoint};
use crate::error::{Error, Result};
use crate::scalar::{abs, Real};
use pricing::{BucketPricer, DensePricer, Pricer};
use serde::Serialize;
use simplex::NetworkSimplex;
use std::path::Path;

/// Dense cost matrices above this many entries are refused.
pub const MEMORY_GUARD: usize = 100_000_000;

/// Location of an atom: a point of the domain or a pair of points of the product space.
pub trait Atom<S: Real>: Clone + Send + Sync + std::fmt::Debug {
    /// Squared distance (`d^2` on points, `d^2 + d^2` on pairs).
    fn sq_dist(&self, other: &Self, geometry: Geometry) -> S;
    /// Upper bound of `sq_dist` on the given geometry.
    fn diameter_sq(geometry: Geometry) -> S;
}

impl<S: Real> Atom<S> for TorusPoint<S> {
    #[inline]
    fn sq_dist(&self, other: &Self, geometry: Geometry) -> S {
        geometry.distance_sq(self, other)
    }

    fn diameter_sq(geometry: Geometry) -> S {
        match geometry {
            Geometry::Torus => S::of(0.5),
            Geometry::Square => S::of(2.0),
        }
    }
}

/// Point of the product space with the metric `d^2(x,z) + d^2(y,w)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "S: Real")]
pub struct PointPair<S>(pub TorusPoint<S>, pub TorusPoint<S>);

impl<S: Real> Atom<S> for PointPair<S> {
    #[inline]
    fn sq_dist(&self, other: &Self, geometry: Geometry) -> S {
        geometry.distance_sq(&self.0, &other.0) + geometry.distance_sq(&self.1, &other.1)
    }

    fn diameter_sq(geometry: Geometry) -> S {
        S::of(2.0) * <TorusPoint<S> as Atom<S>>::diameter_sq(geometry)
    }
}

/// Weighted atoms summing to one.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure<A, S> {
    pub geometry: Geometry,
    pub atoms: Vec<A>,
    pub weights: Vec<S>,
}

impl<A: Atom<S>, S: Real> DiscreteMeasure<A, S> {
    pub fn new(geometry: Geometry, atoms: Vec<A>, weights: Vec<S>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} atoms with {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= S::zero())) {
            return Err(Error::InvalidArgument(format!("negative weight {w}")));
        }
        let total: S = weights.iter().copied().sum();
        if abs(total - S::one()).to64()
            > 1e-12_f64.max(S::epsilon().to64() * 4.0 * weights.len() as f64)
        {
            return Err(Error::MassMismatch(total.to64() - 1.0));
        }
        Ok(Self {
            geometry,
            atoms,
            weights,
        })
    }

    pub fn uniform(geometry: Geometry, atoms: Vec<A>) -> Result<Self> {
        let w = S::one() / S::of_usize(atoms.len());
        let weights = vec![w; atoms.len()];
        Self::new(geometry, atoms, weights)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    fn is_uniform(&self) -> bool {
        self.weights.iter().all(|w| *w == self.weights[0])
    }
}

/// Sparse transport plan between two discrete measures.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "S: Real")]
pub struct Coupling<S> {
    /// `(i, j, mass)` with positive mass.
    pub pairs: Vec<(usize, usize, S)>,
    pub cost: S,
}

impl<S: Real> Coupling<S> {
    /// Row and column sums.
    pub fn marginals(&self, n: usize, m: usize) -> (Vec<S>, Vec<S>) {
        let mut a = vec![S::zero(); n];
        let mut b = vec![S::zero(); m];
        for &(i, j, w) in &self.pairs {
            a[i] += w;
            b[j] += w;
        }
        (a, b)
    }

    /// Largest marginal violation against the given weights.
    pub fn marginal_error(&self, a: &[S], b: &[S]) -> S {
        let (ra, rb) = self.marginals(a.len(), b.len());
        ra.iter()
            .zip(a)
            .chain(rb.iter().zip(b))
            .map(|(x, y)| abs(*x - *y))
            .fold(S::zero(), S::max)
    }

    /// Writes `i,j,mass,cost_ij` rows.
    pub fn write_csv<A: Atom<S>>(
        &self,
        path: &Path,
        mu: &DiscreteMeasure<A, S>,
        nu: &DiscreteMeasure<A, S>,
    ) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(crate::sampling::csv_err)?;
        w.write_record(["i", "j", "mass", "cost_ij"])
            .map_err(crate::sampling::csv_err)?;
        for &(i, j, m) in &self.pairs {
            let c = mu.atoms[i].sq_dist(&nu.atoms[j], mu.geometry);
            w.write_record([
                i.to_string(),
                j.to_string(),
                m.to64().to_string(),
                c.to64().to_string(),
            ])
            .map_err(crate::sampling::csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Optimal value, plan and dual certificate of a discrete transport problem.
#[derive(Clone, Debug)]
pub struct OtSolution<S> {
    pub cost: S,
    pub coupling: Coupling<S>,
    /// Dual potentials with `f[i] + g[j] <= c(i,j)`.
    pub f: Vec<S>,
    pub g: Vec<S>,
    pub dual: S,
    pub pivots: usize,
}

impl<S: Real> OtSolution<S> {
    /// Primal minus dual objective.
    pub fn duality_gap(&self) -> S {
        self.cost - self.dual
    }
}

fn check_masses<A: Atom<S>, S: Real>(
    mu: &DiscreteMeasure<A, S>,
    nu: &DiscreteMeasure<A, S>,
) -> Result<()> {
    if mu.geometry != nu.geometry {
        return Err(Error::Mismatch(
            "measures live on different geometries".into(),
        ));
    }
    let a: S = mu.weights.iter().copied().sum();
    let b: S = nu.weights.iter().copied().sum();
    if abs(a - b).to64() > 1e-9 {
        return Err(Error::MassMismatch((a - b).to64()));
    }
    Ok(())
}

fn check_guard(n: usize, m: usize) -> Result<()> {
    let entries = n.saturating_mul(m);
    if entries > MEMORY_GUARD {
        return Err(Error::MemoryGuard(entries, MEMORY_GUARD));
    }
    Ok(())
}

/// Dense cost matrix, row-major.
pub fn cost_matrix<A: Atom<S>, S: Real>(
    mu: &DiscreteMeasure<A, S>,
    nu: &DiscreteMeasure<A, S>,
) -> Result<Vec<S>> {
    check_guard(mu.len(), nu.len())?;
    let mut c = Vec::with_capacity(mu.len() * nu.len());
    for x in &mu.atoms {
        for y in &nu.atoms {
            c.push(x.sq_dist(y, mu.geometry));
        }
    }
    Ok(c)
}

/// Exact `W_2^2` and an optimal coupling. Equal-size uniform problems are solved as
/// assignments; everything else by the network simplex on the dense cost matrix.
pub fn solve_discrete_ot<A: Atom<S>, S: Real>(
    mu: &DiscreteMeasure<A, S>,
    nu: &DiscreteMeasure<A, S>,
) -> Result<OtSolution<S>> {
    check_masses(mu, nu)?;
    if mu.len() == nu.len() && mu.is_uniform() && nu.is_uniform() {
        solve_uniform_assignment(mu, nu)
    } else {
        solve_discrete_ot_simplex(mu, nu)
    }
}

fn solve_uniform_assignment<A: Atom<S>, S: Real>(
    mu: &DiscreteMeasure<A, S>,
    nu: &DiscreteMeasure<A, S>,
) -> Result<OtSolution<S>> {
    let n = mu.len();
    let c = cost_matrix(mu, nu)?;
    let a = solve_assignment(&c, n)?;
    let w = S::one() / S::of_usize(n);
    let pairs = a
        .col_for_row
        .iter()
        .enumerate()
        .map(|(i, &j)| (i, j, w))
        .collect();
    let cost = a.cost * w;
    let dual = (a.u.iter().copied().sum::<S>() + a.v.iter().copied().sum::<S>()) * w;
    Ok(OtSolution {
        cost,
        coupling: Coupling { pairs, cost },
        f: a.u,
        g: a.v,
        dual,
        pivots: 0,
    })
}

/// Network simplex on the dense cost matrix regardless of the weights.
pub fn solve_discrete_ot_simplex<A: Atom<S>, S: Real>(
    mu: &DiscreteMeasure<A, S>,
    nu: &DiscreteMeasure<A, S>,
) -> Result<OtSolution<S>> {
    check_masses(mu, nu)?;
    let c = cost_matrix(mu, nu)?;
    let mut pricer = DensePricer::new(c, mu.len(), nu.len());
    run_column_generation(
        &mu.weights,
        &nu.weights,
        A::diameter_sq(mu.geometry),
        &mut pricer,
    )
}

/// Network simplex with column generation over a bucket grid; no dense matrix is formed,
/// so it scales to the semi-discrete problems (tens of thousands of cells).
pub fn solve_discrete_ot_sparse<S: Real>(
    mu: &DiscreteMeasure<TorusPoint<S>, S>,
    nu: &DiscreteMeasure<TorusPoint<S>, S>,
) -> Result<OtSolution<S>> {
    check_masses(mu, nu)?;
    let mut pricer = BucketPricer::new(mu.geometry, &mu.atoms, &nu.atoms);
    run_column_generation(
        &mu.weights,
        &nu.weights,
        <TorusPoint<S> as Atom<S>>::diameter_sq(mu.geometry),
        &mut pricer,
    )
}

fn run_column_generation<S: Real, P: Pricer<S>>(
    a: &[S],
    b: &[S],
    diameter: S,
    pricer: &mut P,
) -> Result<OtSolution<S>> {
    let n = a.len();
    let supply: Vec<S> = a.iter().copied().chain(b.iter().map(|w| -*w)).collect();
    let art = S::one() + diameter + diameter;
    let eps = S::epsilon() * S::of(64.0) * art;
    let mut ns = NetworkSimplex::new(&supply, art, eps);
    for (i, j, c) in pricer.initial() {
        ns.add_arc(i, n + j, c);
    }
    let mut clean = false;
    loop {
        let before = ns.pivots;
        if !ns.run() {
            return Err(Error::NotConverged {
                iterations: ns.pivots,
                residual: f64::INFINITY,
                tolerance: 0.0,
            });
        }
        if ns.pivots != before {
            clean = false;
        }
        let pi = ns.potentials();
        let fresh = pricer.price(&pi[..n], &pi[n..], eps);
        if fresh.is_empty() {
            if clean {
                break;
            }
            // recompute potentials from the tree and confirm optimality once more
            ns.refresh_potentials();
            clean = true;
            continue;
        }
        clean = false;
        for (i, j, c) in fresh {
            ns.add_arc(i, n + j, c);
        }
    }
    let residual_art = ns.artificial_flow();
    if residual_art.to64() > 1e-9 {
        return Err(Error::NotConverged {
            iterations: ns.pivots,
            residual: residual_art.to64(),
            tolerance: 1e-9,
        });
    }
    let pi = ns.potentials().to_vec();
    let f: Vec<S> = pi[..n].iter().map(|p| -*p).collect();
    let g: Vec<S> = pi[n..].to_vec();
    let mut pairs = Vec::new();
    let mut cost = S::zero();
    for (s, t, w, c) in ns.flows() {
        pairs.push((s, t - n, w));
        cost += w * c;
    }
    pairs.sort_by_key(|p| (p.0, p.1));
    let dual = a.iter().zip(&f).map(|(x, y)| *x * *y).sum::<S>()
        + b.iter().zip(&g).map(|(x, y)| *x * *y).sum::<S>();
    Ok(OtSolution {
        cost,
        coupling: Coupling { pairs, cost },
        f,
        g,
        dual,
        pivots: ns.pivots,
    })
}
