use super::semidiscrete::TransportMap;
use super::{quantize_values, solve_discrete_ot, Coupling, DiscreteMeasure, PointPair};
use crate::domain::{torus_displacement, Geometry, Grid, TorusPoint};
use crate::elliptic::{field_gradient, gradient, PotentialField};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::smoothing::SmoothedDensity;
use serde::Serialize;
use std::collections::BTreeMap;

/// `(Id, exp(grad h))` pushed forward from the smoothed density on its grid.
pub fn build_plan_gamma<S: Real>(
    mu_t: &SmoothedDensity<S>,
    h: &PotentialField<S>,
) -> Result<DiscreteMeasure<PointPair<S>, S>> {
    if h.geometry() != mu_t.grid.geometry {
        return Err(Error::Mismatch(
            "potential and density live on different geometries".into(),
        ));
    }
    let base = quantize_values(&mu_t.grid, &mu_t.grid_values)?;
    let g = gradient(h, &mu_t.grid);
    let geometry = mu_t.grid.geometry;
    let atoms = base
        .atoms
        .iter()
        .enumerate()
        .map(|(i, x)| PointPair(*x, geometry.exp_map(x, [g[0][i], g[1][i]])))
        .collect();
    DiscreteMeasure::new(geometry, atoms, base.weights)
}

/// A coupling of two point measures viewed as a measure on the product space.
pub fn coupling_measure<S: Real>(
    pi: &Coupling<S>,
    mu: &DiscreteMeasure<TorusPoint<S>, S>,
    nu: &DiscreteMeasure<TorusPoint<S>, S>,
) -> Result<DiscreteMeasure<PointPair<S>, S>> {
    let mut atoms = Vec::with_capacity(pi.pairs.len());
    let mut weights = Vec::with_capacity(pi.pairs.len());
    for &(i, j, m) in &pi.pairs {
        let (Some(x), Some(y)) = (mu.atoms.get(i), nu.atoms.get(j)) else {
            return Err(Error::Mismatch(format!(
                "coupling pair ({i}, {j}) outside the measures"
            )));
        };
        atoms.push(PointPair(*x, *y));
        weights.push(m);
    }
    // renormalize away the rounding of the solver's flows
    let total: S = weights.iter().copied().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    DiscreteMeasure::new(mu.geometry, atoms, weights)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "S: Real")]
pub struct PlanDistance<S> {
    /// Exact `W_2^2` between the (possibly coarsened) product measures.
    pub value: S,
    /// Cells per axis of the coarsening grid; `None` when no coarsening was needed.
    pub level: Option<usize>,
    /// Mass-weighted squared spread of the merged atoms around their barycenters, both sides.
    pub coarsening_variance: S,
    /// Atom counts after coarsening.
    pub atoms: (usize, usize),
}

impl<S> PlanDistance<S> {
    /// Side of a coarsening cell, zero without coarsening.
    pub fn cell_size(&self) -> f64 {
        self.level.map_or(0.0, |l| 1.0 / l as f64)
    }
}

fn cell_index<S: Real>(x: S, level: usize) -> usize {
    ((x * S::of_usize(level)).floor().to_usize().unwrap_or(0)).min(level - 1)
}

fn offset<S: Real>(geometry: Geometry, center: &TorusPoint<S>, x: &TorusPoint<S>) -> [S; 2] {
    match geometry {
        Geometry::Torus => torus_displacement(center, x),
        Geometry::Square => [x.x1 - center.x1, x.x2 - center.x2],
    }
}

struct Coarse<S> {
    measure: DiscreteMeasure<PointPair<S>, S>,
    variance: S,
}

/// Merges atoms sharing a cell of the `level^4` grid into their barycenter.
fn coarsen<S: Real>(m: &DiscreteMeasure<PointPair<S>, S>, level: usize) -> Coarse<S> {
    let geometry = m.geometry;
    let h = S::one() / S::of_usize(level);
    let half = S::of(0.5);
    let center = |a: usize, b: usize| {
        geometry.point((S::of_usize(a) + half) * h, (S::of_usize(b) + half) * h)
    };
    let mut cells: BTreeMap<[usize; 4], (S, [S; 4], S)> = BTreeMap::new();
    for (p, &w) in m.atoms.iter().zip(&m.weights) {
        let key = [
            cell_index(p.0.x1, level),
            cell_index(p.0.x2, level),
            cell_index(p.1.x1, level),
            cell_index(p.1.x2, level),
        ];
        let d0 = offset(geometry, &center(key[0], key[1]), &p.0);
        let d1 = offset(geometry, &center(key[2], key[3]), &p.1);
        let e = cells
            .entry(key)
            .or_insert((S::zero(), [S::zero(); 4], S::zero()));
        e.0 += w;
        for (acc, d) in e.1.iter_mut().zip([d0[0], d0[1], d1[0], d1[1]]) {
            *acc += w * d;
            e.2 += w * d * d;
        }
    }
    let mut atoms = Vec::with_capacity(cells.len());
    let mut weights = Vec::with_capacity(cells.len());
    let mut variance = S::zero();
    for (key, (w, s, sq)) in cells {
        if !(w > S::zero()) {
            continue;
        }
        let c0 = center(key[0], key[1]);
        let c1 = center(key[2], key[3]);
        atoms.push(PointPair(
            geometry.point(c0.x1 + s[0] / w, c0.x2 + s[1] / w),
            geometry.point(c1.x1 + s[2] / w, c1.x2 + s[3] / w),
        ));
        weights.push(w);
        variance += (sq - s.iter().map(|v| *v * *v).sum::<S>() / w).max(S::zero());
    }
    Coarse {
        measure: DiscreteMeasure {
            geometry,
            atoms,
            weights,
        },
        variance,
    }
}

const MAX_LEVEL: usize = 1 << 12;

/// `W_2^2` in the product metric between a coupling and an approximate plan. When the
/// two supports together exceed `budget` atoms both are merged onto the finest grid
/// of `level^4` cells that fits.
pub fn plan_distance<S: Real>(
    pi: &DiscreteMeasure<PointPair<S>, S>,
    gamma: &DiscreteMeasure<PointPair<S>, S>,
    budget: usize,
) -> Result<PlanDistance<S>> {
    if pi.len() + gamma.len() <= budget {
        let sol = solve_discrete_ot(pi, gamma)?;
        return Ok(PlanDistance {
            value: sol.cost,
            level: None,
            coarsening_variance: S::zero(),
            atoms: (pi.len(), gamma.len()),
        });
    }
    let fits = |level: usize| {
        let a = coarsen(pi, level);
        let b = coarsen(gamma, level);
        (a.measure.len() + b.measure.len() <= budget).then_some((a, b))
    };
    let Some(mut best) = fits(1).map(|m| (1, m)) else {
        return Err(Error::Budget {
            budget,
            atoms: pi.len() + gamma.len(),
        });
    };
    let (mut lo, mut hi) = (1, MAX_LEVEL);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        match fits(mid) {
            Some(m) => {
                lo = mid;
                best = (mid, m);
            }
            None => hi = mid,
        }
    }
    let (level, (a, b)) = best;
    let sol = solve_discrete_ot(&renormalized(a.measure), &renormalized(b.measure))?;
    Ok(PlanDistance {
        value: sol.cost,
        level: Some(level),
        coarsening_variance: a.variance + b.variance,
        atoms: (sol.f.len(), sol.g.len()),
    })
}

fn renormalized<S: Real>(
    mut m: DiscreteMeasure<PointPair<S>, S>,
) -> DiscreteMeasure<PointPair<S>, S> {
    let total: S = m.weights.iter().copied().sum();
    for w in m.weights.iter_mut() {
        *w /= total;
    }
    m
}

/// `grad h` at the quantization cells of `map`, from the odd nodes of a grid twice as fine.
pub fn gradient_at_cells<S: Real>(
    map: &TransportMap<S>,
    h: &PotentialField<S>,
) -> Result<Vec<[S; 2]>> {
    if h.geometry() != map.geometry {
        return Err(Error::Mismatch(
            "potential and map live on different geometries".into(),
        ));
    }
    let n = map.resolution;
    let mut r = 1;
    while h.geometry().max_cutoff(2 * n * r) < h.cutoff() {
        r += 2;
    }
    let grid = Grid::new(map.geometry, 2 * n * r);
    let g = field_gradient(&h.field, &grid);
    let side = grid.side();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let k = (2 * i + 1) * r * side + (2 * j + 1) * r;
            out.push([g[0][k], g[1][k]]);
        }
    }
    Ok(out)
}

/// `sum (cell, atom, mass) mass * d^2(atom, exp(cell, grad h(cell)))` over the optimal
/// plan, so cells whose mass is split count with each of their targets.
pub fn map_discrepancy<S: Real>(map: &TransportMap<S>, h: &PotentialField<S>) -> Result<S> {
    let g = gradient_at_cells(map, h)?;
    let geometry = map.geometry;
    let mut total = S::zero();
    for &(i, j, m) in &map.coupling.pairs {
        let y = geometry.exp_map(&map.cells[i], g[i]);
        total += m * geometry.distance_sq(&map.atoms[j], &y);
    }
    Ok(total)
}
