//! Empirical measures, heat-semigroup smoothing and the `t(n)`, `delta(n)` schedule.

use crate::domain::{spectral_to_grid, Geometry, Grid, SpectralField, TorusPoint};
use crate::error::{Error, Result};
use crate::sampling::{DensityModel, PointCloud};
use crate::scalar::{abs, Real};
use serde::{Deserialize, Serialize};

/// Uniform atomic measure `1/n sum delta_{X_i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure<S> {
    pub geometry: Geometry,
    pub atoms: Vec<TorusPoint<S>>,
}

impl<S: Real> EmpiricalMeasure<S> {
    pub fn new(geometry: Geometry, atoms: Vec<TorusPoint<S>>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument(
                "empirical measure needs at least one atom".into(),
            ));
        }
        Ok(Self { geometry, atoms })
    }

    pub fn from_cloud(cloud: &PointCloud<S>) -> Self {
        assert!(!cloud.is_empty(), "empty point cloud");
        Self {
            geometry: Geometry::Torus,
            atoms: cloud.points.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weight(&self) -> S {
        S::one() / S::of_usize(self.atoms.len())
    }
}

/// Fourier coefficients `1/n sum_j phi_k(X_j)` for every retained mode.
pub fn empirical_coeffs<S: Real>(mu: &EmpiricalMeasure<S>, cutoff: usize) -> SpectralField<S> {
    let n = mu.len();
    let inv = mu.weight();
    let kk = cutoff as i64;
    let mut f = SpectralField::zeros(mu.geometry, cutoff);
    match mu.geometry {
        Geometry::Torus => {
            // cos/sin tables: c1[a][j] = cos(2 pi a x1_j), a = 0..=K, and x2 for -K..=K
            let w = 2 * cutoff + 1;
            let mut c1 = vec![S::zero(); (cutoff + 1) * n];
            let mut s1 = vec![S::zero(); (cutoff + 1) * n];
            let mut c2 = vec![S::zero(); w * n];
            let mut s2 = vec![S::zero(); w * n];
            for (j, x) in mu.atoms.iter().enumerate() {
                for a in 0..=cutoff {
                    let th = S::TAU() * S::of_usize(a) * x.x1;
                    c1[a * n + j] = th.cos();
                    s1[a * n + j] = th.sin();
                }
                for b in 0..w {
                    let th = S::TAU() * S::of((b as i64 - kk) as f64) * x.x2;
                    c2[b * n + j] = th.cos();
                    s2[b * n + j] = th.sin();
                }
            }
            let sqrt2 = S::SQRT_2();
            let coeffs = f.coeffs_mut();
            coeffs[0] = S::one();
            for k1 in 0..=kk {
                let lo = if k1 == 0 { 1 } else { -kk };
                for k2 in lo..=kk {
                    let a = k1 as usize;
                    let b = (k2 + kk) as usize;
                    let (ca, sa) = (&c1[a * n..(a + 1) * n], &s1[a * n..(a + 1) * n]);
                    let (cb, sb) = (&c2[b * n..(b + 1) * n], &s2[b * n..(b + 1) * n]);
                    let mut cs = S::zero();
                    let mut sn = S::zero();
                    for j in 0..n {
                        // cos(u+v), sin(u+v)
                        cs += ca[j] * cb[j] - sa[j] * sb[j];
                        sn += sa[j] * cb[j] + ca[j] * sb[j];
                    }
                    let idx = if k1 == 0 {
                        1 + 2 * (k2 as usize - 1)
                    } else {
                        1 + 2 * cutoff + 2 * ((a - 1) * w + b)
                    };
                    coeffs[idx] = sqrt2 * cs * inv;
                    coeffs[idx + 1] = sqrt2 * sn * inv;
                }
            }
        }
        Geometry::Square => {
            let w = cutoff + 1;
            let mut t1 = vec![S::zero(); w * n];
            let mut t2 = vec![S::zero(); w * n];
            for (j, x) in mu.atoms.iter().enumerate() {
                for a in 0..w {
                    let scale = if a == 0 { S::one() } else { S::SQRT_2() };
                    t1[a * n + j] = scale * (S::PI() * S::of_usize(a) * x.x1).cos();
                    t2[a * n + j] = scale * (S::PI() * S::of_usize(a) * x.x2).cos();
                }
            }
            let coeffs = f.coeffs_mut();
            for a in 0..w {
                for b in 0..w {
                    let acc: S = (0..n).map(|j| t1[a * n + j] * t2[b * n + j]).sum();
                    coeffs[a * w + b] = acc * inv;
                }
            }
            coeffs[0] = S::one();
        }
    }
    f
}

/// Largest cutoff whose modes survive `exp(-t lambda) >= 1e-18`.
pub fn effective_cutoff<S: Real>(geometry: Geometry, t: S, cutoff: usize) -> usize {
    if t <= S::zero() {
        return cutoff;
    }
    let w1: f64 = geometry.frequency(1);
    let kmax = (41.5 / (t.to64() * w1 * w1)).sqrt().ceil() as usize + 1;
    kmax.min(cutoff)
}

/// `P_t` applied to a measure or density, with grid values.
#[derive(Clone, Debug)]
pub struct SmoothedDensity<S> {
    pub time: S,
    pub field: SpectralField<S>,
    pub grid: Grid,
    pub grid_values: Vec<S>,
}

impl<S: Real> SmoothedDensity<S> {
    fn build(field: SpectralField<S>, time: S, grid: Grid) -> Self {
        let grid_values = spectral_to_grid(&field, &grid);
        Self {
            time,
            field,
            grid,
            grid_values,
        }
    }

    pub fn min_value(&self) -> S {
        self.grid_values.iter().copied().fold(S::infinity(), S::min)
    }

    pub fn max_value(&self) -> S {
        self.grid_values
            .iter()
            .copied()
            .fold(S::neg_infinity(), S::max)
    }

    /// Minimum grid value when truncation made the smoothed field nonpositive somewhere.
    pub fn truncation_defect(&self) -> Option<S> {
        let m = self.min_value();
        (self.time > S::zero() && m <= S::zero()).then_some(m)
    }

    pub fn cutoff(&self) -> usize {
        self.field.cutoff()
    }
}

/// Multiplies every coefficient by `exp(-t lambda_k)`.
pub fn heat_smooth<S: Real>(f: &SpectralField<S>, t: S, grid: &Grid) -> Result<SmoothedDensity<S>> {
    if t < S::zero() {
        return Err(Error::NonPositiveTime(t.to64()));
    }
    let field = if t == S::zero() {
        f.clone()
    } else {
        f.apply_multiplier(|lam| (-t * lam).exp())
    };
    Ok(SmoothedDensity::build(field, t, *grid))
}

/// `P_t mu` for an empirical measure; modes killed by the semigroup are not summed.
pub fn heat_smooth_measure<S: Real>(
    mu: &EmpiricalMeasure<S>,
    t: S,
    cutoff: usize,
    grid: &Grid,
) -> Result<SmoothedDensity<S>> {
    if t < S::zero() {
        return Err(Error::NonPositiveTime(t.to64()));
    }
    let k = effective_cutoff(mu.geometry, t, cutoff);
    let base = empirical_coeffs(mu, k).with_cutoff(cutoff);
    let mut out = heat_smooth(&base, t, grid)?;
    out.field.coeffs_mut()[0] = S::one();
    Ok(out)
}

/// Exponents of the schedule `t = log^k2(n)/n`, `delta = log^-k1(n)` and the event
/// threshold `log^-upsilon(n)`; `kappa` is the Schauder exponent of the validity check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kappa1: f64,
    pub kappa2: f64,
    pub upsilon: f64,
    pub kappa: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            kappa1: 0.5,
            kappa2: 3.0,
            upsilon: 2.0,
            kappa: 1.0,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.kappa1 > 0.0 && self.kappa2 >= 0.0 && self.upsilon > 0.0 && self.kappa > 0.0;
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "schedule exponents out of range: {self:?}"
            )));
        }
        if self.upsilon <= (self.kappa + 2.0) * self.kappa1 {
            return Err(Error::InvalidArgument(format!(
                "schedule needs upsilon > (kappa + 2) kappa1, got {} <= {}",
                self.upsilon,
                (self.kappa + 2.0) * self.kappa1
            )));
        }
        Ok(())
    }

    /// Exponent of the derivative bound `log^-(upsilon - (kappa+2) kappa1)(n)`.
    pub fn conclusion_exponent(&self) -> f64 {
        self.upsilon - (self.kappa + 2.0) * self.kappa1
    }

    pub fn t<S: Real>(&self, n: usize) -> Result<S> {
        schedule_t(n, S::of(self.kappa2))
    }

    pub fn delta<S: Real>(&self, n: usize) -> Result<S> {
        schedule_delta(n, S::of(self.kappa1))
    }

    /// Threshold `log^-upsilon(n)` of the density deviation event.
    pub fn event_threshold<S: Real>(&self, n: usize) -> S {
        S::of((n as f64).ln().powf(-self.upsilon))
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "schedule needs n >= 3, got {n}"
        )));
    }
    Ok(())
}

/// `log^kappa2(n) / n`
pub fn schedule_t<S: Real>(n: usize, kappa2: S) -> Result<S> {
    check_n(n)?;
    let nf = S::of_usize(n);
    Ok(nf.ln().powf(kappa2) / nf)
}

/// `log^-kappa1(n)`
pub fn schedule_delta<S: Real>(n: usize, kappa1: S) -> Result<S> {
    check_n(n)?;
    Ok(S::of_usize(n).ln().powf(-kappa1))
}

/// Maximum of `|a - b|` over the shared grid.
pub fn sup_deviation<S: Real>(a: &SmoothedDensity<S>, b: &SmoothedDensity<S>) -> Result<S> {
    if a.grid != b.grid || a.cutoff() != b.cutoff() {
        return Err(Error::Mismatch(format!(
            "grids {:?}/{:?}, cutoffs {}/{}",
            a.grid,
            b.grid,
            a.cutoff(),
            b.cutoff()
        )));
    }
    Ok(a.grid_values
        .iter()
        .zip(&b.grid_values)
        .map(|(x, y)| abs(*x - *y))
        .fold(S::zero(), S::max))
}

/// `|| P_s rho - rho ||_{L^q}` by grid quadrature of the spectral representations.
pub fn rho_smoothing_error<S: Real>(
    rho: &DensityModel<S>,
    s: S,
    q: S,
    cutoff: usize,
    grid: &Grid,
) -> Result<S> {
    if !(s > S::zero()) {
        return Err(Error::NonPositiveTime(s.to64()));
    }
    let base = rho.spectral(cutoff)?;
    let diff = base.apply_multiplier(|lam| (-s * lam).exp() - S::one());
    Ok(grid.lq_norm(&spectral_to_grid(&diff, grid), q))
}

/// `|| P_a rho - P_b rho ||_{L^q}`; used by the contractivity correction.
pub fn rho_time_difference<S: Real>(
    rho: &DensityModel<S>,
    a: S,
    b: S,
    q: S,
    cutoff: usize,
    grid: &Grid,
) -> Result<S> {
    let base = rho.spectral(cutoff)?;
    let diff = base.apply_multiplier(|lam| (-a * lam).exp() - (-b * lam).exp());
    Ok(grid.lq_norm(&spectral_to_grid(&diff, grid), q))
}
