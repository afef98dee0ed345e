//! Spectral solvers for `-lap g = f`, `-div(rho grad h) = f` and `u - lap u = f / rho`.

use crate::domain::spectral::{box_to_grid, box_to_spectrum, spectrum_on_box};
use crate::domain::{Fft2, Geometry, Grid, SpectralField, Spectrum};
use crate::error::{Error, Result};
use crate::scalar::{abs, Real};
use crate::smoothing::SmoothedDensity;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub tolerance: f64,
}

/// Solution of one of the elliptic problems. The mean coefficient is zero for the
/// Poisson and divergence-form problems.
#[derive(Clone, Debug)]
pub struct PotentialField<S> {
    pub field: SpectralField<S>,
    pub rhs_id: String,
    pub report: SolveReport,
}

impl<S: Real> PotentialField<S> {
    /// Wraps a known field, e.g. a manufactured solution.
    pub fn exact(field: SpectralField<S>, rhs_id: impl Into<String>) -> Self {
        Self {
            field,
            rhs_id: rhs_id.into(),
            report: SolveReport {
                iterations: 0,
                residual: 0.0,
                tolerance: 0.0,
            },
        }
    }

    pub fn zero(geometry: Geometry, cutoff: usize) -> Self {
        Self::exact(SpectralField::zeros(geometry, cutoff), "zero")
    }

    pub fn geometry(&self) -> Geometry {
        self.field.geometry()
    }

    pub fn cutoff(&self) -> usize {
        self.field.cutoff()
    }
}

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

fn check_mean_zero<S: Real>(rhs: &SpectralField<S>) -> Result<()> {
    let scale = rhs.l2_norm().max(S::one());
    if abs(rhs.mean()) > S::of(1e-13) * scale {
        return Err(Error::NonZeroMean(rhs.mean().to64()));
    }
    Ok(())
}

fn inner<S: Real>(a: &[Complex<S>], b: &[Complex<S>]) -> S {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

fn norm<S: Real>(a: &[Complex<S>]) -> S {
    inner(a, a).sqrt()
}

/// `-lap g = rhs`, `g(0) = 0`.
pub fn solve_poisson<S: Real>(rhs: &SpectralField<S>) -> Result<PotentialField<S>> {
    check_mean_zero(rhs)?;
    let g = rhs
        .apply_multiplier(|lam| {
            if lam > S::zero() {
                S::one() / lam
            } else {
                S::zero()
            }
        })
        .into_mean_zero();
    let back = g.apply_multiplier(|lam| lam);
    let rn = rhs.l2_norm();
    let residual = if rn > S::zero() {
        (back.sub(&rhs.clone().into_mean_zero())?.l2_norm() / rn).to64()
    } else {
        0.0
    };
    Ok(PotentialField {
        field: g,
        rhs_id: "poisson".into(),
        report: SolveReport {
            iterations: 1,
            residual,
            tolerance: DEFAULT_TOLERANCE,
        },
    })
}

/// Pseudo-spectral `h -> -div(rho grad h)` on the modes `|k|_inf <= cutoff`.
///
/// Products are formed on the FFT box, so the operator is symmetric with respect to
/// the coefficient inner product whenever the box resolves `2K+1` modes.
pub struct DivFormOperator<S: Real> {
    geometry: Geometry,
    cutoff: usize,
    coeff: Vec<S>,
    fft: Fft2<S>,
    min: S,
    max: S,
    mean: S,
}

impl<S: Real> DivFormOperator<S> {
    pub fn new(rho: &SmoothedDensity<S>, cutoff: usize) -> Result<Self> {
        let geometry = rho.field.geometry();
        let m = rho.grid.box_size();
        if m < 2 * cutoff + 1 {
            return Err(Error::CutoffTooLarge {
                cutoff,
                max: (m - 1) / 2,
                resolution: rho.grid.resolution,
            });
        }
        let mut fft = Fft2::new(m);
        let coeff: Vec<S> = spectrum_on_box(&rho.field.to_spectrum(), &mut fft)
            .iter()
            .map(|c| c.re)
            .collect();
        let min = coeff.iter().copied().fold(S::infinity(), S::min);
        let max = coeff.iter().copied().fold(S::neg_infinity(), S::max);
        if !(min > S::zero()) {
            return Err(Error::NonCoercive(min.to64()));
        }
        let mean = coeff.iter().copied().sum::<S>() / S::of_usize(coeff.len());
        Ok(Self {
            geometry,
            cutoff,
            coeff,
            fft,
            min,
            max,
            mean,
        })
    }

    pub fn ellipticity_ratio(&self) -> S {
        self.max / self.min
    }

    pub fn min_coefficient(&self) -> S {
        self.min
    }

    pub(crate) fn apply(&mut self, h: &Spectrum<S>) -> Spectrum<S> {
        let mut out = Spectrum::zeros(self.geometry, self.cutoff);
        for axis in 0..2 {
            let mut g = h.clone();
            let geometry = self.geometry;
            for i in 0..g.data.len() {
                let w: S = geometry.frequency(g.wave(i)[axis]);
                g.data[i] *= Complex::new(S::zero(), w);
            }
            let mut boxed = spectrum_on_box(&g, &mut self.fft);
            for (v, r) in boxed.iter_mut().zip(&self.coeff) {
                *v = Complex::new(v.re * *r, S::zero());
            }
            let flux = box_to_spectrum(geometry, boxed, &mut self.fft, self.cutoff);
            for i in 0..out.data.len() {
                let w: S = geometry.frequency(out.wave(i)[axis]);
                out.data[i] += flux.data[i] * Complex::new(S::zero(), -w);
            }
        }
        out
    }

    /// Applies the operator to a real-basis field.
    pub fn apply_field(&mut self, h: &SpectralField<S>) -> SpectralField<S> {
        let sp = h.with_cutoff(self.cutoff).to_spectrum();
        SpectralField::from_spectrum(&self.apply(&sp))
    }

    fn precondition(&self, r: &Spectrum<S>) -> Spectrum<S> {
        let mut z = r.clone();
        for i in 0..z.data.len() {
            let lam: S = self.geometry.eigenvalue(z.wave(i));
            z.data[i] = if lam > S::zero() {
                z.data[i] / (lam * self.mean)
            } else {
                Complex::default()
            };
        }
        z
    }
}

/// Default iteration cap `10 ceil(sqrt(Lambda/lambda)) K`.
pub fn default_max_iter<S: Real>(op: &DivFormOperator<S>) -> usize {
    10 * op
        .ellipticity_ratio()
        .sqrt()
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(1)
        * op.cutoff.max(1)
}

/// `-div(rho grad h) = rhs` by preconditioned conjugate gradients.
pub fn solve_divform<S: Real>(
    rho: &SmoothedDensity<S>,
    rhs: &SpectralField<S>,
    tol: S,
) -> Result<PotentialField<S>> {
    let mut op = DivFormOperator::new(rho, rhs.cutoff())?;
    let max_iter = default_max_iter(&op);
    solve_divform_with(&mut op, rhs, tol, max_iter)
}

pub fn solve_divform_with<S: Real>(
    op: &mut DivFormOperator<S>,
    rhs: &SpectralField<S>,
    tol: S,
    max_iter: usize,
) -> Result<PotentialField<S>> {
    check_mean_zero(rhs)?;
    if rhs.geometry() != op.geometry {
        return Err(Error::Mismatch(
            "geometry of coefficient and right-hand side".into(),
        ));
    }
    let mut b = rhs.with_cutoff(op.cutoff).to_spectrum();
    let zero = b.index([0, 0]);
    b.data[zero] = Complex::default();
    let bn = norm(&b.data);
    let mut x = Spectrum::zeros(op.geometry, op.cutoff);
    let report = |iterations, residual: S| SolveReport {
        iterations,
        residual: residual.to64(),
        tolerance: tol.to64(),
    };
    if bn == S::zero() {
        return Ok(PotentialField {
            field: SpectralField::zeros(op.geometry, op.cutoff),
            rhs_id: "divform".into(),
            report: report(0, S::zero()),
        });
    }
    let mut iterations = 0;
    let mut residual = S::one();
    // a few restarts guard against drift of the recursive residual
    for _ in 0..4 {
        let ax = op.apply(&x);
        let mut r: Vec<Complex<S>> = b.data.iter().zip(&ax.data).map(|(u, v)| *u - *v).collect();
        residual = norm(&r) / bn;
        if residual <= tol {
            break;
        }
        let mut rs = Spectrum {
            geometry: op.geometry,
            cutoff: op.cutoff,
            data: r.clone(),
        };
        let mut p = op.precondition(&rs);
        let mut rz = inner(&r, &p.data);
        while iterations < max_iter {
            iterations += 1;
            let ap = op.apply(&p);
            let alpha = rz / inner(&p.data, &ap.data);
            for i in 0..r.len() {
                x.data[i] += p.data[i] * alpha;
                r[i] -= ap.data[i] * alpha;
            }
            if norm(&r) / bn <= tol * S::of(0.5) {
                break;
            }
            rs.data.copy_from_slice(&r);
            let z = op.precondition(&rs);
            let rz_new = inner(&r, &z.data);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..r.len() {
                p.data[i] = z.data[i] + p.data[i] * beta;
            }
        }
        if iterations >= max_iter {
            let ax = op.apply(&x);
            let r: Vec<Complex<S>> = b.data.iter().zip(&ax.data).map(|(u, v)| *u - *v).collect();
            residual = norm(&r) / bn;
            break;
        }
    }
    if !(residual <= tol) {
        return Err(Error::NotConverged {
            iterations,
            residual: residual.to64(),
            tolerance: tol.to64(),
        });
    }
    Ok(PotentialField {
        field: SpectralField::from_spectrum(&x).into_mean_zero(),
        rhs_id: "divform".into(),
        report: report(iterations, residual),
    })
}

/// `(I - lap) u = rhs / rho`, division on the grid followed by band-limit projection.
pub fn solve_screened<S: Real>(
    rho: &SmoothedDensity<S>,
    rhs: &SpectralField<S>,
    tol: S,
) -> Result<PotentialField<S>> {
    let geometry = rho.field.geometry();
    let cutoff = rhs.cutoff();
    let m = rho.grid.box_size();
    if m < 2 * cutoff + 1 {
        return Err(Error::CutoffTooLarge {
            cutoff,
            max: (m - 1) / 2,
            resolution: rho.grid.resolution,
        });
    }
    let mut fft = Fft2::new(m);
    let rb = spectrum_on_box(&rho.field.to_spectrum(), &mut fft);
    let min = rb.iter().map(|c| c.re).fold(S::infinity(), S::min);
    if !(min > S::zero()) {
        return Err(Error::NonCoercive(min.to64()));
    }
    let fb = spectrum_on_box(&rhs.to_spectrum(), &mut fft);
    let q: Vec<Complex<S>> = fb
        .iter()
        .zip(&rb)
        .map(|(f, r)| Complex::new(f.re / r.re, S::zero()))
        .collect();
    let proj = box_to_spectrum(geometry, q, &mut fft, cutoff);
    let mut u = proj.clone();
    for i in 0..u.data.len() {
        let lam: S = geometry.eigenvalue(u.wave(i));
        u.data[i] /= S::one() + lam;
    }
    let mut res = S::zero();
    for i in 0..u.data.len() {
        let lam: S = geometry.eigenvalue(u.wave(i));
        res += (u.data[i] * (S::one() + lam) - proj.data[i]).norm_sqr();
    }
    let pn = norm(&proj.data);
    let residual = if pn > S::zero() {
        res.sqrt() / pn
    } else {
        S::zero()
    };
    if !(residual <= tol) {
        return Err(Error::NotConverged {
            iterations: 1,
            residual: residual.to64(),
            tolerance: tol.to64(),
        });
    }
    Ok(PotentialField {
        field: SpectralField::from_spectrum(&u),
        rhs_id: "screened".into(),
        report: SolveReport {
            iterations: 1,
            residual: residual.to64(),
            tolerance: tol.to64(),
        },
    })
}

fn derivative_spectrum<S: Real>(f: &SpectralField<S>, order: [u32; 2]) -> Spectrum<S> {
    let mut sp = f.to_spectrum();
    let geometry = f.geometry();
    let i = Complex::new(S::zero(), S::one());
    for idx in 0..sp.data.len() {
        let k = sp.wave(idx);
        let mut factor = Complex::new(S::one(), S::zero());
        for (axis, &o) in order.iter().enumerate() {
            let w: S = geometry.frequency(k[axis]);
            for _ in 0..o {
                factor = factor * i * w;
            }
        }
        sp.data[idx] *= factor;
    }
    sp
}

fn eval_on_grid<S: Real>(sp: &Spectrum<S>, grid: &Grid, fft: &mut Fft2<S>) -> Vec<S> {
    box_to_grid(&spectrum_on_box(sp, fft), grid)
}

/// `(d1 h, d2 h)` on the grid.
pub fn gradient<S: Real>(h: &PotentialField<S>, grid: &Grid) -> [Vec<S>; 2] {
    field_gradient(&h.field, grid)
}

pub fn field_gradient<S: Real>(f: &SpectralField<S>, grid: &Grid) -> [Vec<S>; 2] {
    let mut fft = Fft2::new(grid.box_size());
    [
        eval_on_grid(&derivative_spectrum(f, [1, 0]), grid, &mut fft),
        eval_on_grid(&derivative_spectrum(f, [0, 1]), grid, &mut fft),
    ]
}

/// `(d11 h, d12 h, d22 h)` on the grid.
pub fn hessian<S: Real>(h: &PotentialField<S>, grid: &Grid) -> [Vec<S>; 3] {
    let mut fft = Fft2::new(grid.box_size());
    [
        eval_on_grid(&derivative_spectrum(&h.field, [2, 0]), grid, &mut fft),
        eval_on_grid(&derivative_spectrum(&h.field, [1, 1]), grid, &mut fft),
        eval_on_grid(&derivative_spectrum(&h.field, [0, 2]), grid, &mut fft),
    ]
}

/// `max(sup |grad u|, sup |hess u|_F)` over the grid.
pub fn derivative_sup_norm<S: Real>(u: &PotentialField<S>, grid: &Grid) -> S {
    let g = gradient(u, grid);
    let h = hessian(u, grid);
    let mut sup = S::zero();
    for i in 0..grid.len() {
        let gn = (g[0][i] * g[0][i] + g[1][i] * g[1][i]).sqrt();
        let hn = (h[0][i] * h[0][i] + S::of(2.0) * h[1][i] * h[1][i] + h[2][i] * h[2][i]).sqrt();
        sup = sup.max(gn).max(hn);
    }
    sup
}

/// `(integral |grad h|^q)^{2/q}` for `q` in `[2, 4]`.
pub fn lq_gradient_norm<S: Real>(h: &PotentialField<S>, q: S, grid: &Grid) -> Result<S> {
    if !(q >= S::of(2.0) && q <= S::of(4.0)) {
        return Err(Error::InvalidArgument(format!("q = {q} outside [2, 4]")));
    }
    let g = gradient(h, grid);
    let powered: Vec<S> = g[0]
        .iter()
        .zip(&g[1])
        .map(|(a, b)| (*a * *a + *b * *b).powf(q / S::of(2.0)))
        .collect();
    Ok(grid.integrate(&powered).powf(S::of(2.0) / q))
}

/// Energy estimate for swapping the coefficient `rho` for `rho_delta`:
/// returns `(integral |grad(h_delta - h)|^2, lambda^-2 integral |rho - rho_delta|^2 |grad h|^2)`.
pub fn regularization_error<S: Real>(
    h: &PotentialField<S>,
    h_delta: &PotentialField<S>,
    rho: &SmoothedDensity<S>,
    rho_delta: &SmoothedDensity<S>,
    lambda: S,
) -> Result<(S, S)> {
    if rho.grid != rho_delta.grid {
        return Err(Error::Mismatch("coefficient grids differ".into()));
    }
    let grid = rho.grid;
    let e = h_delta.field.sub(&h.field)?;
    let ge = field_gradient(&e, &grid);
    let gh = gradient(h, &grid);
    let lhs_vals: Vec<S> = ge[0]
        .iter()
        .zip(&ge[1])
        .map(|(a, b)| *a * *a + *b * *b)
        .collect();
    let rhs_vals: Vec<S> = (0..grid.len())
        .map(|i| {
            let d = rho.grid_values[i] - rho_delta.grid_values[i];
            d * d * (gh[0][i] * gh[0][i] + gh[1][i] * gh[1][i])
        })
        .collect();
    Ok((
        grid.integrate(&lhs_vals),
        grid.integrate(&rhs_vals) / (lambda * lambda),
    ))
}
