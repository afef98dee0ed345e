use super::{solve_discrete_ot_sparse, Coupling, DiscreteMeasure};
use crate::domain::{Geometry, Grid, TorusPoint};
use crate::error::{Error, Result};
use crate::sampling::DensityModel;
use crate::scalar::Real;
use crate::smoothing::EmpiricalMeasure;
use serde::Serialize;
use std::path::Path;

/// Centers `((i + 1/2)/N, (j + 1/2)/N)` of the `N x N` cells, index `i * N + j`.
pub fn cell_centers<S: Real>(geometry: Geometry, resolution: usize) -> Vec<TorusPoint<S>> {
    let h = S::one() / S::of_usize(resolution);
    let half = S::of(0.5);
    let mut out = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution {
            out.push(geometry.point((S::of_usize(i) + half) * h, (S::of_usize(j) + half) * h));
        }
    }
    out
}

fn normalized<S: Real>(values: Vec<S>) -> Result<Vec<S>> {
    if let Some(v) = values.iter().find(|v| !(**v >= S::zero())) {
        return Err(Error::NegativeDensity(v.to64()));
    }
    let total: S = values.iter().copied().sum();
    if !(total > S::zero()) {
        return Err(Error::InvalidArgument(
            "density vanishes on every cell".into(),
        ));
    }
    Ok(values.into_iter().map(|v| v / total).collect())
}

/// Midpoint quantization of a density onto the `N x N` cell centers.
pub fn quantize_density<S: Real>(
    rho: &DensityModel<S>,
    resolution: usize,
) -> Result<DiscreteMeasure<TorusPoint<S>, S>> {
    if resolution == 0 {
        return Err(Error::Resolution(
            "quantization needs at least one cell".into(),
        ));
    }
    let atoms = cell_centers(rho.geometry(), resolution);
    let weights = normalized(atoms.iter().map(|x| rho.eval(x)).collect())?;
    DiscreteMeasure::new(rho.geometry(), atoms, weights)
}

/// Quantization of nodal values: atoms at the grid nodes, weights proportional to
/// value times quadrature weight.
pub fn quantize_values<S: Real>(
    grid: &Grid,
    values: &[S],
) -> Result<DiscreteMeasure<TorusPoint<S>, S>> {
    if values.len() != grid.len() {
        return Err(Error::Mismatch(format!(
            "{} values on a grid of {} nodes",
            values.len(),
            grid.len()
        )));
    }
    let w: Vec<S> = grid.weights();
    let weights = normalized(values.iter().zip(&w).map(|(v, q)| *v * *q).collect())?;
    DiscreteMeasure::new(grid.geometry, grid.nodes(), weights)
}

/// Cell-to-atom assignment extracted from a discrete optimal plan.
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "S: Real")]
pub struct TransportMap<S> {
    pub geometry: Geometry,
    pub resolution: usize,
    pub cells: Vec<TorusPoint<S>>,
    pub weights: Vec<S>,
    pub atoms: Vec<TorusPoint<S>>,
    /// Majority-mass target atom of every cell.
    pub targets: Vec<usize>,
    /// Mass not sent to the majority target, summed over cells.
    pub split_mass: S,
    /// The underlying optimal plan, `(cell, atom, mass)`.
    pub coupling: Coupling<S>,
}

impl<S: Real> TransportMap<S> {
    fn from_coupling(
        geometry: Geometry,
        resolution: usize,
        cells: &DiscreteMeasure<TorusPoint<S>, S>,
        atoms: Vec<TorusPoint<S>>,
        coupling: Coupling<S>,
    ) -> Self {
        let nc = cells.len();
        let mut best = vec![(S::neg_infinity(), usize::MAX); nc];
        let mut sent = vec![S::zero(); nc];
        for &(i, j, m) in &coupling.pairs {
            sent[i] += m;
            if m > best[i].0 || (m == best[i].0 && j < best[i].1) {
                best[i] = (m, j);
            }
        }
        let mut split = S::zero();
        let mut targets = Vec::with_capacity(nc);
        for (i, (m, j)) in best.into_iter().enumerate() {
            if j == usize::MAX {
                // zero-weight cell: nearest atom
                let x = &cells.atoms[i];
                let jn = (0..atoms.len())
                    .min_by(|a, b| {
                        geometry
                            .distance_sq(x, &atoms[*a])
                            .partial_cmp(&geometry.distance_sq(x, &atoms[*b]))
                            .unwrap()
                    })
                    .unwrap_or(0);
                targets.push(jn);
            } else {
                split += sent[i] - m;
                targets.push(j);
            }
        }
        Self {
            geometry,
            resolution,
            cells: cells.atoms.clone(),
            weights: cells.weights.clone(),
            atoms,
            targets,
            split_mass: split,
            coupling,
        }
    }

    /// Mass received by every atom when each cell is sent entirely to its target.
    pub fn push_forward(&self) -> Vec<S> {
        let mut out = vec![S::zero(); self.atoms.len()];
        for (w, &j) in self.weights.iter().zip(&self.targets) {
            out[j] += *w;
        }
        out
    }

    /// `sum_cells weight * d^2(cell, target)`.
    pub fn map_cost(&self) -> S {
        self.cells
            .iter()
            .zip(&self.weights)
            .zip(&self.targets)
            .map(|((x, w), &j)| *w * self.geometry.distance_sq(x, &self.atoms[j]))
            .sum()
    }

    /// Writes `cell_x,cell_y,target_index` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(crate::sampling::csv_err)?;
        w.write_record(["cell_x", "cell_y", "target_index"])
            .map_err(crate::sampling::csv_err)?;
        for (x, j) in self.cells.iter().zip(&self.targets) {
            w.write_record([
                x.x1.to64().to_string(),
                x.x2.to64().to_string(),
                j.to_string(),
            ])
            .map_err(crate::sampling::csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Semi-discrete transport between a density and an empirical measure.
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "S: Real")]
pub struct SemiDiscrete<S> {
    /// Discrete optimal cost at resolution `N`.
    pub cost: S,
    /// Cost at resolution `N/2`, when that grid still satisfies the guard.
    pub coarse_cost: Option<S>,
    /// First-order extrapolation `2 c_N - c_{N/2}`.
    pub extrapolated: Option<S>,
    pub duality_gap: S,
    pub map: TransportMap<S>,
}

impl<S: Real> SemiDiscrete<S> {
    /// `|c_N - c_{N/2}|`, the reported discretization error.
    pub fn error_estimate(&self) -> Option<S> {
        self.coarse_cost.map(|c| crate::scalar::abs(self.cost - c))
    }
}

fn check_resolution(resolution: usize, n: usize) -> Result<()> {
    if resolution * resolution < 4 * n {
        return Err(Error::Resolution(format!(
            "{resolution}x{resolution} cells for {n} atoms; need at least 4 cells per atom"
        )));
    }
    Ok(())
}

/// Quantizes `rho` on `N x N` cells and solves the exact discrete problem to the atoms of `mu`.
pub fn semidiscrete_map<S: Real>(
    rho: &DensityModel<S>,
    mu: &EmpiricalMeasure<S>,
    resolution: usize,
) -> Result<SemiDiscrete<S>> {
    if rho.geometry() != mu.geometry {
        return Err(Error::Mismatch(
            "density and measure live on different geometries".into(),
        ));
    }
    check_resolution(resolution, mu.len())?;
    let target = DiscreteMeasure::uniform(mu.geometry, mu.atoms.clone())?;
    let cells = quantize_density(rho, resolution)?;
    let sol = solve_discrete_ot_sparse(&cells, &target)?;
    let coarse_cost =
        if resolution.is_multiple_of(2) && check_resolution(resolution / 2, mu.len()).is_ok() {
            let coarse = quantize_density(rho, resolution / 2)?;
            Some(solve_discrete_ot_sparse(&coarse, &target)?.cost)
        } else {
            None
        };
    let gap = sol.duality_gap();
    Ok(SemiDiscrete {
        cost: sol.cost,
        coarse_cost,
        extrapolated: coarse_cost.map(|c| sol.cost + sol.cost - c),
        duality_gap: gap,
        map: TransportMap::from_coupling(
            mu.geometry,
            resolution,
            &cells,
            mu.atoms.clone(),
            sol.coupling,
        ),
    })
}
