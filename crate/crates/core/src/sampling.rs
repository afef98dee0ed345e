//! Point-cloud generators: i.i.d. draws from a bounded density and Markov chains
//! driven by an iterated function system with additive noise.

use crate::domain::{
    grid_to_spectral, spectral_to_grid, Geometry, Grid, SpectralField, Spectrum, TorusPoint,
};
use crate::error::{Error, Result};
use crate::scalar::Real;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Resolution used to verify density bounds and normalization.
pub const CHECK_GRID: usize = 256;

/// Closed-form density families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DensitySpec {
    Uniform,
    /// `1 + a sin(2 pi x1)`
    Sine {
        amplitude: f64,
    },
    /// Product von Mises bump `exp(k (cos 2pi(x1-c1) + cos 2pi(x2-c2))) / I0(k)^2`.
    Bump {
        concentration: f64,
        center: [f64; 2],
    },
}

impl DensitySpec {
    pub fn label(&self) -> String {
        match self {
            DensitySpec::Uniform => "uniform".into(),
            DensitySpec::Sine { amplitude } => format!("sine(a={amplitude})"),
            DensitySpec::Bump {
                concentration,
                center,
            } => {
                format!("bump(k={concentration},c=({},{}))", center[0], center[1])
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Evaluator<S> {
    Uniform,
    Sine(S),
    Bump { kappa: S, center: [S; 2], norm: S },
    Spectral(Box<Spectrum<S>>, SpectralField<S>),
}

/// A probability density bounded by `lower <= rho <= upper`.
#[derive(Clone, Debug)]
pub struct DensityModel<S> {
    geometry: Geometry,
    eval: Evaluator<S>,
    lower: S,
    upper: S,
    label: String,
}

/// Modified Bessel function `I0` by its power series.
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut m = 1.0;
    while term > 1e-17 * sum {
        term *= q / (m * m);
        sum += term;
        m += 1.0;
    }
    sum
}

impl<S: Real> DensityModel<S> {
    pub fn uniform(geometry: Geometry) -> Self {
        Self {
            geometry,
            eval: Evaluator::Uniform,
            lower: S::one(),
            upper: S::one(),
            label: "uniform".into(),
        }
    }

    pub fn from_spec(geometry: Geometry, spec: &DensitySpec) -> Result<Self> {
        let model = match *spec {
            DensitySpec::Uniform => Self::uniform(geometry),
            DensitySpec::Sine { amplitude } => {
                if !(0.0..1.0).contains(&amplitude) {
                    return Err(Error::InvalidArgument(format!(
                        "sine amplitude {amplitude} not in [0,1)"
                    )));
                }
                Self {
                    geometry,
                    eval: Evaluator::Sine(S::of(amplitude)),
                    lower: S::of(1.0 - amplitude),
                    upper: S::of(1.0 + amplitude),
                    label: spec.label(),
                }
            }
            DensitySpec::Bump {
                concentration,
                center,
            } => {
                if geometry != Geometry::Torus || !(concentration >= 0.0) {
                    return Err(Error::InvalidArgument(
                        "bump density needs the torus and concentration >= 0".into(),
                    ));
                }
                let i0 = bessel_i0(concentration);
                let norm = i0 * i0;
                Self {
                    geometry,
                    eval: Evaluator::Bump {
                        kappa: S::of(concentration),
                        center: [S::of(center[0]), S::of(center[1])],
                        norm: S::of(norm),
                    },
                    lower: S::of((-2.0 * concentration).exp() / norm),
                    upper: S::of((2.0 * concentration).exp() / norm),
                    label: spec.label(),
                }
            }
        };
        model.verify()?;
        Ok(model)
    }

    /// Density given by a spectral expansion; bounds are read off the check grid.
    pub fn from_field(field: SpectralField<S>, label: impl Into<String>) -> Result<Self> {
        let grid = Grid::new(field.geometry(), CHECK_GRID.max(2 * field.cutoff() + 2));
        let values = spectral_to_grid(&field, &grid);
        let lower = values.iter().copied().fold(S::infinity(), S::min);
        let upper = values.iter().copied().fold(S::neg_infinity(), S::max);
        if !(lower > S::zero()) {
            return Err(Error::NegativeDensity(lower.to64()));
        }
        let model = Self {
            geometry: field.geometry(),
            eval: Evaluator::Spectral(Box::new(field.to_spectrum()), field),
            // Between grid nodes the band-limited field may slightly exceed the nodal range.
            lower: lower * S::of(0.999),
            upper: upper * S::of(1.001),
            label: label.into(),
        };
        model.verify()?;
        Ok(model)
    }

    fn verify(&self) -> Result<()> {
        let grid = Grid::new(self.geometry, CHECK_GRID);
        let values = self.grid_values(&grid);
        for v in &values {
            if *v < self.lower || *v > self.upper {
                return Err(Error::InvalidArgument(format!(
                    "density value {v} outside declared bounds [{}, {}]",
                    self.lower, self.upper
                )));
            }
        }
        let mass = grid.integrate(&values).to64();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "density integrates to {mass}"
            )));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn lower(&self) -> S {
        self.lower
    }

    pub fn upper(&self) -> S {
        self.upper
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.eval, Evaluator::Uniform)
    }

    pub fn eval(&self, x: &TorusPoint<S>) -> S {
        match &self.eval {
            Evaluator::Uniform => S::one(),
            Evaluator::Sine(a) => S::one() + *a * (S::TAU() * x.x1).sin(),
            Evaluator::Bump {
                kappa,
                center,
                norm,
            } => {
                let c =
                    (S::TAU() * (x.x1 - center[0])).cos() + (S::TAU() * (x.x2 - center[1])).cos();
                (*kappa * c).exp() / *norm
            }
            Evaluator::Spectral(sp, _) => sp.eval_at(x),
        }
    }

    pub fn grid_values(&self, grid: &Grid) -> Vec<S> {
        assert_eq!(grid.geometry, self.geometry, "geometry mismatch");
        match &self.eval {
            Evaluator::Spectral(_, f) => spectral_to_grid(f, grid),
            _ => grid.nodes::<S>().iter().map(|x| self.eval(x)).collect(),
        }
    }

    /// Spectral representation at `cutoff`, analysed on a grid fine enough to avoid aliasing.
    pub fn spectral(&self, cutoff: usize) -> Result<SpectralField<S>> {
        match &self.eval {
            Evaluator::Uniform => Ok(SpectralField::constant(self.geometry, cutoff, S::one())),
            Evaluator::Spectral(_, f) => Ok(f.with_cutoff(cutoff)),
            _ => {
                let mut n = CHECK_GRID;
                while self.geometry.max_cutoff(n) < cutoff {
                    n *= 2;
                }
                let grid = Grid::new(self.geometry, n);
                let mut f = grid_to_spectral(&self.grid_values(&grid), &grid, cutoff)?;
                // mass is one by construction; remove quadrature round-off
                f.coeffs_mut()[0] = S::one();
                Ok(f)
            }
        }
    }

    /// One draw by rejection against the uniform envelope scaled by `upper`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> TorusPoint<S> {
        loop {
            let x = self
                .geometry
                .point(S::of(rng.gen::<f64>()), S::of(rng.gen::<f64>()));
            let u = S::of(rng.gen::<f64>());
            if u * self.upper < self.eval(&x) {
                return x;
            }
        }
    }
}

/// How a cloud was generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Generator {
    Iid {
        density: String,
    },
    Ifs {
        map: String,
        noise: String,
        lipschitz: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud<S> {
    pub points: Vec<TorusPoint<S>>,
    pub generator: Generator,
    pub seed: u64,
    pub burn_in: usize,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    generator: Generator,
    seed: u64,
    n: usize,
    burn_in: usize,
}

impl<S: Real> PointCloud<S> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Writes `x1,x2` rows to `path` and the generator metadata next to it (`.json`).
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["x1", "x2"]).map_err(csv_err)?;
        for p in &self.points {
            w.write_record([p.x1.to64().to_string(), p.x2.to64().to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        let side = Sidecar {
            generator: self.generator.clone(),
            seed: self.seed,
            n: self.len(),
            burn_in: self.burn_in,
        };
        std::fs::write(
            path.with_extension("json"),
            serde_json::to_string_pretty(&side)?,
        )?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let side: Sidecar =
            serde_json::from_str(&std::fs::read_to_string(path.with_extension("json"))?)?;
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let mut points = Vec::with_capacity(side.n);
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let parse = |i: usize| -> Result<S> {
                rec.get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .map(S::of)
                    .ok_or_else(|| Error::InvalidArgument(format!("bad point row {rec:?}")))
            };
            points.push(TorusPoint::new(parse(0)?, parse(1)?));
        }
        Ok(Self {
            points,
            generator: side.generator,
            seed: side.seed,
            burn_in: side.burn_in,
        })
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Deterministic generator for a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a path of indices.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, p| splitmix64(acc ^ splitmix64(*p)))
}

/// `n` independent draws from `rho`.
pub fn sample_iid<S: Real>(rho: &DensityModel<S>, n: usize, seed: u64) -> PointCloud<S> {
    let mut rng = rng_from_seed(seed);
    let points = (0..n).map(|_| rho.draw(&mut rng)).collect();
    PointCloud {
        points,
        generator: Generator::Iid {
            density: rho.label().to_string(),
        },
        seed,
        burn_in: 0,
    }
}

/// Deterministic part of the chain. Both variants act coordinatewise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Contraction {
    /// `F(x) = c`
    Constant { center: [f64; 2] },
    /// `F(x) = c + (L / 2 pi) (sin 2 pi x1, sin 2 pi x2)`
    Sine { center: [f64; 2], lipschitz: f64 },
}

impl Contraction {
    pub fn lipschitz(&self) -> f64 {
        match self {
            Contraction::Constant { .. } => 0.0,
            Contraction::Sine { lipschitz, .. } => *lipschitz,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Contraction::Constant { center } => format!("constant({},{})", center[0], center[1]),
            Contraction::Sine { center, lipschitz } => {
                format!("sine(L={lipschitz},c=({},{}))", center[0], center[1])
            }
        }
    }

    /// Image of one coordinate (unreduced).
    #[inline]
    pub fn axis<S: Real>(&self, axis: usize, x: S) -> S {
        match self {
            Contraction::Constant { center } => S::of(center[axis]),
            Contraction::Sine { center, lipschitz } => {
                S::of(center[axis])
                    + S::of(lipschitz / std::f64::consts::TAU) * (S::TAU() * x).sin()
            }
        }
    }

    pub fn apply<S: Real>(&self, x: &TorusPoint<S>) -> TorusPoint<S> {
        TorusPoint::new(self.axis(0, x.x1), self.axis(1, x.x2))
    }
}

/// Markov chain `X_{k+1} = F(X_k) + theta_k mod 1` with `theta_k ~ h`.
#[derive(Clone, Debug)]
pub struct IfsModel<S> {
    pub map: Contraction,
    pub noise: DensityModel<S>,
}

impl<S: Real> IfsModel<S> {
    /// Validates `L < 1` and spot-checks the Lipschitz bound on 1000 random pairs.
    pub fn new(map: Contraction, noise: DensityModel<S>) -> Result<Self> {
        let l = map.lipschitz();
        if !(0.0..1.0).contains(&l) {
            return Err(Error::InvalidArgument(format!(
                "Lipschitz constant {l} must lie in [0,1)"
            )));
        }
        if noise.geometry() != Geometry::Torus {
            return Err(Error::InvalidArgument("chains live on the torus".into()));
        }
        let mut rng = rng_from_seed(0x1F5);
        for _ in 0..1000 {
            let x = TorusPoint::new(S::of(rng.gen::<f64>()), S::of(rng.gen::<f64>()));
            let y = TorusPoint::new(S::of(rng.gen::<f64>()), S::of(rng.gen::<f64>()));
            let lhs = crate::domain::torus_distance(&map.apply(&x), &map.apply(&y));
            let rhs = S::of(l) * crate::domain::torus_distance(&x, &y);
            if lhs > rhs + S::of(1e-6) {
                return Err(Error::InvalidArgument(format!(
                    "map violates Lipschitz bound {l}"
                )));
            }
        }
        Ok(Self { map, noise })
    }

    pub fn lipschitz(&self) -> f64 {
        self.map.lipschitz()
    }

    pub fn descriptor(&self) -> Generator {
        Generator::Ifs {
            map: self.map.label(),
            noise: self.noise.label().to_string(),
            lipschitz: self.lipschitz(),
        }
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, x: &TorusPoint<S>, rng: &mut R) -> TorusPoint<S> {
        let theta = self.noise.draw(rng);
        TorusPoint::new(
            self.map.axis(0, x.x1) + theta.x1,
            self.map.axis(1, x.x2) + theta.x2,
        )
    }

    /// Stationary law of the chain as a spectral density, by fixed-point iteration
    /// `rho <- h * (F # rho)` with push-forwards computed by grid quadrature.
    pub fn invariant_density(&self, cutoff: usize, resolution: usize) -> Result<DensityModel<S>> {
        let grid = Grid::torus(resolution);
        let h = self.noise.spectral(cutoff)?.to_spectrum();
        let m = resolution;
        let w = 2 * cutoff + 1;
        let kk = cutoff as i64;
        // phase[a][i] = exp(-2 pi i k_a F(x_i)) per axis
        let phases: Vec<Vec<Complex<S>>> = (0..2)
            .map(|axis| {
                let mut p = vec![Complex::default(); w * m];
                for a in 0..w {
                    let k = S::of((a as i64 - kk) as f64);
                    for i in 0..m {
                        let f = self.map.axis(axis, S::of_usize(i) / S::of_usize(m));
                        p[a * m + i] = Complex::from_polar(S::one(), -S::TAU() * k * f);
                    }
                }
                p
            })
            .collect();
        let mut rho = Spectrum::zeros(Geometry::Torus, cutoff);
        rho.set([0, 0], Complex::new(S::one(), S::zero()));
        let norm = S::one() / S::of_usize(m * m);
        for _ in 0..1000 {
            let values = spectral_to_grid(&SpectralField::from_spectrum(&rho), &grid);
            // tmp[b][i] = sum_j phase2[b][j] values[i][j]
            let mut tmp = vec![Complex::<S>::default(); w * m];
            for b in 0..w {
                for i in 0..m {
                    let row = &values[i * m..(i + 1) * m];
                    let ph = &phases[1][b * m..(b + 1) * m];
                    let mut acc = Complex::default();
                    for (v, p) in row.iter().zip(ph) {
                        acc += *p * *v;
                    }
                    tmp[b * m + i] = acc;
                }
            }
            let mut next = Spectrum::zeros(Geometry::Torus, cutoff);
            for a in 0..w {
                let ph = &phases[0][a * m..(a + 1) * m];
                for b in 0..w {
                    let t = &tmp[b * m..(b + 1) * m];
                    let mut acc = Complex::default();
                    for (p, v) in ph.iter().zip(t) {
                        acc += *p * *v;
                    }
                    let idx = a * w + b;
                    next.data[idx] = acc * norm * h.data[idx];
                }
            }
            next.set([0, 0], Complex::new(S::one(), S::zero()));
            let change = next
                .data
                .iter()
                .zip(&rho.data)
                .map(|(x, y)| (*x - *y).norm())
                .fold(S::zero(), S::max);
            rho = next;
            if change < S::of(1e-14) {
                return DensityModel::from_field(
                    SpectralField::from_spectrum(&rho),
                    "ifs-invariant",
                );
            }
        }
        Err(Error::NotConverged {
            iterations: 1000,
            residual: f64::NAN,
            tolerance: 1e-14,
        })
    }
}

/// Default number of discarded initial states.
pub const DEFAULT_BURN_IN: usize = 1000;

/// Runs the chain from a uniform start, discarding `burn_in` states.
pub fn sample_ifs<S: Real>(
    model: &IfsModel<S>,
    n: usize,
    seed: u64,
    burn_in: usize,
) -> PointCloud<S> {
    let mut rng = rng_from_seed(seed);
    let mut x = TorusPoint::new(S::of(rng.gen::<f64>()), S::of(rng.gen::<f64>()));
    for _ in 0..burn_in {
        x = model.step(&x, &mut rng);
    }
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        x = model.step(&x, &mut rng);
        points.push(x);
    }
    PointCloud {
        points,
        generator: model.descriptor(),
        seed,
        burn_in,
    }
}

/// Histogram estimate of the beta-mixing coefficient at a fixed lag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub lag: usize,
    pub value: f64,
    /// Expected value of the estimator for an independent pair with the same marginals.
    pub noise_floor: f64,
    pub bins_per_axis: usize,
    pub samples: usize,
    /// Fewer than ten samples per joint cell.
    pub undersampled: bool,
}

/// Total-variation distance between the empirical joint law of `(X_k, X_{k+lag})` and
/// the product of its marginals, on `bins^2 x bins^2` cells. A lower-bound diagnostic.
pub fn estimate_beta<S: Real>(
    model: &IfsModel<S>,
    lag: usize,
    samples: usize,
    bins: usize,
    seed: u64,
) -> Result<BetaEstimate> {
    let cells = bins * bins;
    if samples < cells * cells {
        return Err(Error::InsufficientSamples {
            samples,
            bins: cells * cells,
        });
    }
    let mut rng = rng_from_seed(seed);
    let mut x = TorusPoint::new(S::of(rng.gen::<f64>()), S::of(rng.gen::<f64>()));
    for _ in 0..DEFAULT_BURN_IN {
        x = model.step(&x, &mut rng);
    }
    let cell = |p: &TorusPoint<S>| {
        let c = |v: S| ((v * S::of_usize(bins)).floor().to_usize().unwrap_or(0)).min(bins - 1);
        c(p.x1) * bins + c(p.x2)
    };
    let mut window = std::collections::VecDeque::with_capacity(lag + 1);
    window.push_back(cell(&x));
    for _ in 0..lag {
        x = model.step(&x, &mut rng);
        window.push_back(cell(&x));
    }
    let mut joint = vec![0u64; cells * cells];
    for _ in 0..samples {
        let a = window[0];
        let b = window[lag];
        joint[a * cells + b] += 1;
        x = model.step(&x, &mut rng);
        window.push_back(cell(&x));
        window.pop_front();
    }
    let total = samples as f64;
    let mut p1 = vec![0.0; cells];
    let mut p2 = vec![0.0; cells];
    for a in 0..cells {
        for b in 0..cells {
            let v = joint[a * cells + b] as f64 / total;
            p1[a] += v;
            p2[b] += v;
        }
    }
    let mut tv = 0.0;
    let mut floor = 0.0;
    for a in 0..cells {
        for b in 0..cells {
            let q = p1[a] * p2[b];
            tv += (joint[a * cells + b] as f64 / total - q).abs();
            floor += (2.0 * q * (1.0 - q) / (std::f64::consts::PI * total)).sqrt();
        }
    }
    Ok(BetaEstimate {
        lag,
        value: 0.5 * tv,
        noise_floor: 0.5 * floor,
        bins_per_axis: bins,
        samples,
        undersampled: samples < 10 * cells * cells,
    })
}
