use super::{Fft2, Geometry, Grid, TorusPoint};
use crate::error::{Error, Result};
use crate::scalar::Real;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Cos,
    Sin,
}

/// One element of the real orthonormal Laplace eigenbasis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierMode {
    pub k: [i64; 2],
    pub parity: Parity,
    pub eigenvalue: f64,
}

impl FourierMode {
    pub fn new(geometry: Geometry, k: [i64; 2], parity: Parity) -> Self {
        Self {
            k,
            parity,
            eigenvalue: geometry.eigenvalue(k),
        }
    }

    /// Value of the normalized eigenfunction at `x`.
    pub fn eval<S: Real>(&self, geometry: Geometry, x: &TorusPoint<S>) -> S {
        let sqrt2 = S::SQRT_2();
        match geometry {
            Geometry::Torus => {
                if self.k == [0, 0] {
                    return match self.parity {
                        Parity::Cos => S::one(),
                        Parity::Sin => S::zero(),
                    };
                }
                let phase =
                    S::TAU() * (S::of(self.k[0] as f64) * x.x1 + S::of(self.k[1] as f64) * x.x2);
                match self.parity {
                    Parity::Cos => sqrt2 * phase.cos(),
                    Parity::Sin => sqrt2 * phase.sin(),
                }
            }
            Geometry::Square => {
                let axis = |k: i64, c: S| {
                    if k == 0 {
                        S::one()
                    } else {
                        sqrt2 * (S::PI() * S::of(k as f64) * c).cos()
                    }
                };
                axis(self.k[0], x.x1) * axis(self.k[1], x.x2)
            }
        }
    }
}

impl FourierMode {
    /// Value and gradient of the normalized eigenfunction at `x`.
    pub fn eval_grad<S: Real>(&self, geometry: Geometry, x: &TorusPoint<S>) -> (S, [S; 2]) {
        let sqrt2 = S::SQRT_2();
        let w1 = geometry.frequency::<S>(self.k[0]);
        let w2 = geometry.frequency::<S>(self.k[1]);
        match geometry {
            Geometry::Torus => {
                if self.k == [0, 0] {
                    return (self.eval(geometry, x), [S::zero(); 2]);
                }
                let phase = w1 * x.x1 + w2 * x.x2;
                let (s, c) = phase.sin_cos();
                match self.parity {
                    Parity::Cos => (sqrt2 * c, [-sqrt2 * w1 * s, -sqrt2 * w2 * s]),
                    Parity::Sin => (sqrt2 * s, [sqrt2 * w1 * c, sqrt2 * w2 * c]),
                }
            }
            Geometry::Square => {
                let axis = |k: i64, w: S, c: S| {
                    if k == 0 {
                        (S::one(), S::zero())
                    } else {
                        let (s, co) = (w * c).sin_cos();
                        (sqrt2 * co, -sqrt2 * w * s)
                    }
                };
                let (a, da) = axis(self.k[0], w1, x.x1);
                let (b, db) = axis(self.k[1], w2, x.x2);
                (a * b, [da * b, a * db])
            }
        }
    }
}

/// Truncated expansion in the real eigenbasis.
///
/// Torus layout: `(0,0,cos)`, then `k1 = 0, k2 = 1..=K`, then `k1 = 1..=K, k2 = -K..=K`,
/// each wave vector contributing a cosine then a sine coefficient, `(2K+1)^2` in total.
/// Square layout: cosine products `(k1, k2)` in `0..=K` row-major, `(K+1)^2` in total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    bound = "S: Real",
    try_from = "FieldRecord<S>",
    into = "FieldRecord<S>"
)]
pub struct SpectralField<S> {
    geometry: Geometry,
    cutoff: usize,
    coeffs: Vec<S>,
    mean_zero: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Real")]
struct FieldRecord<S> {
    cutoff: usize,
    coeffs: Vec<S>,
    geometry: Geometry,
}

impl<S: Real> TryFrom<FieldRecord<S>> for SpectralField<S> {
    type Error = Error;
    fn try_from(r: FieldRecord<S>) -> Result<Self> {
        SpectralField::from_coeffs(r.geometry, r.cutoff, r.coeffs)
    }
}

impl<S: Real> From<SpectralField<S>> for FieldRecord<S> {
    fn from(f: SpectralField<S>) -> Self {
        FieldRecord {
            cutoff: f.cutoff,
            coeffs: f.coeffs,
            geometry: f.geometry,
        }
    }
}

fn torus_index(cutoff: usize, k: [i64; 2], parity: Parity) -> Option<usize> {
    let kk = cutoff as i64;
    let p = match parity {
        Parity::Cos => 0,
        Parity::Sin => 1,
    };
    if k[0].abs() > kk || k[1].abs() > kk {
        return None;
    }
    if k == [0, 0] {
        return (p == 0).then_some(0);
    }
    if k[0] == 0 && k[1] > 0 {
        return Some(1 + 2 * (k[1] as usize - 1) + p);
    }
    if k[0] > 0 {
        let pair = (k[0] as usize - 1) * (2 * cutoff + 1) + (k[1] + kk) as usize;
        return Some(1 + 2 * cutoff + 2 * pair + p);
    }
    None
}

fn torus_mode(cutoff: usize, idx: usize) -> ([i64; 2], Parity) {
    if idx == 0 {
        return ([0, 0], Parity::Cos);
    }
    let parity = |r: usize| {
        if r.is_multiple_of(2) {
            Parity::Cos
        } else {
            Parity::Sin
        }
    };
    let r = idx - 1;
    if r < 2 * cutoff {
        return ([0, (r / 2 + 1) as i64], parity(r));
    }
    let r = r - 2 * cutoff;
    let pair = r / 2;
    let w = 2 * cutoff + 1;
    (
        [(pair / w + 1) as i64, (pair % w) as i64 - cutoff as i64],
        parity(r),
    )
}

impl<S: Real> SpectralField<S> {
    pub fn zeros(geometry: Geometry, cutoff: usize) -> Self {
        Self {
            geometry,
            cutoff,
            coeffs: vec![S::zero(); geometry.coeff_count(cutoff)],
            mean_zero: true,
        }
    }

    pub fn constant(geometry: Geometry, cutoff: usize, value: S) -> Self {
        let mut f = Self::zeros(geometry, cutoff);
        f.coeffs[0] = value;
        f.mean_zero = value == S::zero();
        f
    }

    pub fn from_coeffs(geometry: Geometry, cutoff: usize, coeffs: Vec<S>) -> Result<Self> {
        let want = geometry.coeff_count(cutoff);
        if coeffs.len() != want {
            return Err(Error::InvalidArgument(format!(
                "expected {want} coefficients for cutoff {cutoff}, got {}",
                coeffs.len()
            )));
        }
        let mean_zero = coeffs[0] == S::zero();
        Ok(Self {
            geometry,
            cutoff,
            coeffs,
            mean_zero,
        })
    }

    /// Field equal to a single basis function.
    pub fn single_mode(
        geometry: Geometry,
        cutoff: usize,
        k: [i64; 2],
        parity: Parity,
    ) -> Result<Self> {
        let mut f = Self::zeros(geometry, cutoff);
        let idx = f
            .index_of(k, parity)
            .ok_or_else(|| Error::InvalidArgument(format!("mode {k:?} {parity:?} not retained")))?;
        f.coeffs[idx] = S::one();
        f.mean_zero = idx != 0;
        Ok(f)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [S] {
        self.mean_zero = false;
        &mut self.coeffs
    }

    pub fn mean(&self) -> S {
        self.coeffs[0]
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean_zero && self.coeffs[0] == S::zero()
    }

    /// Drops the mean and tags the field as mean-zero.
    pub fn into_mean_zero(mut self) -> Self {
        self.coeffs[0] = S::zero();
        self.mean_zero = true;
        self
    }

    /// Canonical storage index of a mode; `None` if not retained or not canonical.
    pub fn index_of(&self, k: [i64; 2], parity: Parity) -> Option<usize> {
        match self.geometry {
            Geometry::Torus => torus_index(self.cutoff, k, parity),
            Geometry::Square => {
                let kk = self.cutoff as i64;
                if parity == Parity::Cos && (0..=kk).contains(&k[0]) && (0..=kk).contains(&k[1]) {
                    Some(k[0] as usize * (self.cutoff + 1) + k[1] as usize)
                } else {
                    None
                }
            }
        }
    }

    pub fn mode(&self, idx: usize) -> FourierMode {
        let (k, parity) = match self.geometry {
            Geometry::Torus => torus_mode(self.cutoff, idx),
            Geometry::Square => {
                let w = self.cutoff + 1;
                ([(idx / w) as i64, (idx % w) as i64], Parity::Cos)
            }
        };
        FourierMode::new(self.geometry, k, parity)
    }

    pub fn modes(&self) -> Vec<FourierMode> {
        (0..self.coeffs.len()).map(|i| self.mode(i)).collect()
    }

    pub fn coeff(&self, k: [i64; 2], parity: Parity) -> S {
        self.index_of(k, parity)
            .map_or(S::zero(), |i| self.coeffs[i])
    }

    /// Same function restricted (or zero-padded) to another cutoff.
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        let mut out = Self::zeros(self.geometry, cutoff);
        for idx in 0..out.coeffs.len() {
            let m = out.mode(idx);
            out.coeffs[idx] = self.coeff(m.k, m.parity);
        }
        out.mean_zero = self.mean_zero;
        out
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.geometry != other.geometry || self.cutoff != other.cutoff {
            return Err(Error::Mismatch(format!(
                "fields ({:?}, K={}) and ({:?}, K={})",
                self.geometry, self.cutoff, other.geometry, other.cutoff
            )));
        }
        Ok(())
    }

    /// `self + a * other`
    pub fn axpy(&self, a: S, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| *x + a * *y)
            .collect();
        Ok(Self {
            geometry: self.geometry,
            cutoff: self.cutoff,
            coeffs,
            mean_zero: self.mean_zero && other.mean_zero,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-S::one(), other)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(S::one(), other)
    }

    pub fn scale(&self, a: S) -> Self {
        Self {
            geometry: self.geometry,
            cutoff: self.cutoff,
            coeffs: self.coeffs.iter().map(|c| *c * a).collect(),
            mean_zero: self.mean_zero,
        }
    }

    /// Multiplies every coefficient by `g(eigenvalue)`.
    pub fn apply_multiplier(&self, g: impl Fn(S) -> S) -> Self {
        let mut out = self.clone();
        for (idx, c) in out.coeffs.iter_mut().enumerate() {
            let m = torus_or_square_eigen::<S>(self.geometry, self.cutoff, idx);
            *c *= g(m);
        }
        out.mean_zero = self.mean_zero;
        out
    }

    pub fn dot(&self, other: &Self) -> Result<S> {
        self.check_compatible(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| *a * *b)
            .sum())
    }

    /// L2 norm by Parseval.
    pub fn l2_norm(&self) -> S {
        self.coeffs.iter().map(|c| *c * *c).sum::<S>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<S> {
        self.check_compatible(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| crate::scalar::abs(*a - *b))
            .fold(S::zero(), S::max))
    }

    /// Direct evaluation at a point.
    pub fn eval(&self, x: &TorusPoint<S>) -> S {
        self.to_spectrum().eval_at(x)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub(crate) fn to_spectrum(&self) -> Spectrum<S> {
        let k = self.cutoff as i64;
        let mut sp = Spectrum::zeros(self.geometry, self.cutoff);
        match self.geometry {
            Geometry::Torus => {
                sp.set([0, 0], Complex::new(self.coeffs[0], S::zero()));
                let r = S::FRAC_1_SQRT_2();
                let mut idx = 1;
                while idx < self.coeffs.len() {
                    let (kv, _) = torus_mode(self.cutoff, idx);
                    let c = Complex::new(self.coeffs[idx] * r, -self.coeffs[idx + 1] * r);
                    sp.set(kv, c);
                    sp.set([-kv[0], -kv[1]], c.conj());
                    idx += 2;
                }
            }
            Geometry::Square => {
                for k1 in 0..=k {
                    for k2 in 0..=k {
                        let a = self.coeffs[(k1 * (k + 1) + k2) as usize]
                            * half_weight(k1)
                            * half_weight(k2);
                        let c = Complex::new(a, S::zero());
                        sp.set([k1, k2], c);
                        sp.set([-k1, k2], c);
                        sp.set([k1, -k2], c);
                        sp.set([-k1, -k2], c);
                    }
                }
            }
        }
        sp
    }

    pub(crate) fn from_spectrum(sp: &Spectrum<S>) -> Self {
        let mut f = Self::zeros(sp.geometry, sp.cutoff);
        let k = sp.cutoff as i64;
        match sp.geometry {
            Geometry::Torus => {
                f.coeffs[0] = sp.get([0, 0]).re;
                let s2 = S::SQRT_2();
                let mut idx = 1;
                while idx < f.coeffs.len() {
                    let (kv, _) = torus_mode(sp.cutoff, idx);
                    let c = sp.get(kv);
                    f.coeffs[idx] = s2 * c.re;
                    f.coeffs[idx + 1] = -s2 * c.im;
                    idx += 2;
                }
            }
            Geometry::Square => {
                for k1 in 0..=k {
                    for k2 in 0..=k {
                        f.coeffs[(k1 * (k + 1) + k2) as usize] =
                            sp.get([k1, k2]).re / (half_weight::<S>(k1) * half_weight::<S>(k2));
                    }
                }
            }
        }
        f.mean_zero = f.coeffs[0] == S::zero();
        f
    }
}

fn torus_or_square_eigen<S: Real>(geometry: Geometry, cutoff: usize, idx: usize) -> S {
    let k = match geometry {
        Geometry::Torus => torus_mode(cutoff, idx).0,
        Geometry::Square => [(idx / (cutoff + 1)) as i64, (idx % (cutoff + 1)) as i64],
    };
    geometry.eigenvalue(k)
}

fn half_weight<S: Real>(k: i64) -> S {
    if k == 0 {
        S::one()
    } else {
        S::FRAC_1_SQRT_2()
    }
}

/// Dense complex-exponential coefficients `c(k)`, `|k|_inf <= K`, on the periodic box
/// of the geometry: `f(x) = sum_k c(k) exp(i w_k . x)`.
#[derive(Clone, Debug)]
pub(crate) struct Spectrum<S> {
    pub geometry: Geometry,
    pub cutoff: usize,
    pub data: Vec<Complex<S>>,
}

impl<S: Real> Spectrum<S> {
    pub fn zeros(geometry: Geometry, cutoff: usize) -> Self {
        let w = 2 * cutoff + 1;
        Self {
            geometry,
            cutoff,
            data: vec![Complex::default(); w * w],
        }
    }

    pub fn width(&self) -> usize {
        2 * self.cutoff + 1
    }

    #[inline]
    pub fn index(&self, k: [i64; 2]) -> usize {
        let kk = self.cutoff as i64;
        ((k[0] + kk) as usize) * self.width() + (k[1] + kk) as usize
    }

    #[inline]
    pub fn get(&self, k: [i64; 2]) -> Complex<S> {
        self.data[self.index(k)]
    }

    #[inline]
    pub fn set(&mut self, k: [i64; 2], c: Complex<S>) {
        let i = self.index(k);
        self.data[i] = c;
    }

    /// Wave vector of the storage slot `i`.
    #[inline]
    pub fn wave(&self, i: usize) -> [i64; 2] {
        let w = self.width();
        let kk = self.cutoff as i64;
        [(i / w) as i64 - kk, (i % w) as i64 - kk]
    }

    /// Values of the spectrum folded onto an `m x m` box, ready for an inverse FFT.
    pub fn to_box(&self, m: usize) -> Vec<Complex<S>> {
        let mut out = vec![Complex::default(); m * m];
        let mm = m as i64;
        for (i, c) in self.data.iter().enumerate() {
            if c.re == S::zero() && c.im == S::zero() {
                continue;
            }
            let k = self.wave(i);
            let a = k[0].rem_euclid(mm) as usize;
            let b = k[1].rem_euclid(mm) as usize;
            out[a * m + b] += *c;
        }
        out
    }

    /// Reads the retained modes out of a forward-transformed, normalized box.
    pub fn from_box(geometry: Geometry, boxed: &[Complex<S>], m: usize, cutoff: usize) -> Self {
        debug_assert!(m > 2 * cutoff);
        let mut sp = Self::zeros(geometry, cutoff);
        let mm = m as i64;
        for i in 0..sp.data.len() {
            let k = sp.wave(i);
            let a = k[0].rem_euclid(mm) as usize;
            let b = k[1].rem_euclid(mm) as usize;
            sp.data[i] = boxed[a * m + b];
        }
        sp
    }

    /// Evaluates the real part of the expansion at `x`.
    pub fn eval_at(&self, x: &TorusPoint<S>) -> S {
        let kk = self.cutoff as i64;
        let w = self.width();
        let e1: Vec<Complex<S>> = (-kk..=kk)
            .map(|k| Complex::from_polar(S::one(), self.geometry.frequency::<S>(k) * x.x1))
            .collect();
        let e2: Vec<Complex<S>> = (-kk..=kk)
            .map(|k| Complex::from_polar(S::one(), self.geometry.frequency::<S>(k) * x.x2))
            .collect();
        let mut acc = S::zero();
        for a in 0..w {
            let row = &self.data[a * w..(a + 1) * w];
            let mut inner: Complex<S> = Complex::default();
            for (c, e) in row.iter().zip(&e2) {
                inner += *c * *e;
            }
            acc += (inner * e1[a]).re;
        }
        acc
    }
}

/// Grid values of an expansion (exact, modes are folded when the grid is coarse).
pub fn spectral_to_grid<S: Real>(field: &SpectralField<S>, grid: &Grid) -> Vec<S> {
    assert_eq!(field.geometry(), grid.geometry, "geometry mismatch");
    let mut fft = Fft2::new(grid.box_size());
    box_to_grid(&spectrum_on_box(&field.to_spectrum(), &mut fft), grid)
}

pub(crate) fn spectrum_on_box<S: Real>(sp: &Spectrum<S>, fft: &mut Fft2<S>) -> Vec<Complex<S>> {
    let mut a = sp.to_box(fft.size());
    fft.inverse(&mut a);
    a
}

pub(crate) fn box_to_grid<S: Real>(boxed: &[Complex<S>], grid: &Grid) -> Vec<S> {
    let m = grid.box_size();
    let s = grid.side();
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..s {
        for j in 0..s {
            out.push(boxed[i * m + j].re);
        }
    }
    out
}

/// Real grid values extended to the periodic box (even reflection on the square).
pub(crate) fn grid_to_box<S: Real>(values: &[S], grid: &Grid) -> Vec<Complex<S>> {
    let m = grid.box_size();
    let s = grid.side();
    let n = grid.resolution;
    let fold = |i: usize| match grid.geometry {
        crate::domain::Geometry::Torus => i,
        crate::domain::Geometry::Square => {
            if i <= n {
                i
            } else {
                2 * n - i
            }
        }
    };
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        let fi = fold(i);
        for j in 0..m {
            out.push(Complex::new(values[fi * s + fold(j)], S::zero()));
        }
    }
    out
}

/// Forward transform of box samples and projection onto `|k|_inf <= cutoff`.
pub(crate) fn box_to_spectrum<S: Real>(
    geometry: Geometry,
    mut boxed: Vec<Complex<S>>,
    fft: &mut Fft2<S>,
    cutoff: usize,
) -> Spectrum<S> {
    let m = fft.size();
    fft.forward(&mut boxed);
    let norm = S::one() / S::of_usize(m * m);
    let mut sp = Spectrum::from_box(geometry, &boxed, m, cutoff);
    for c in sp.data.iter_mut() {
        *c *= norm;
    }
    sp
}

/// Discrete Fourier analysis of grid values onto the modes `|k|_inf <= cutoff`.
pub fn grid_to_spectral<S: Real>(
    values: &[S],
    grid: &Grid,
    cutoff: usize,
) -> Result<SpectralField<S>> {
    let max = grid.geometry.max_cutoff(grid.resolution);
    if cutoff > max {
        return Err(Error::CutoffTooLarge {
            cutoff,
            max,
            resolution: grid.resolution,
        });
    }
    if values.len() != grid.len() {
        return Err(Error::InvalidArgument(format!(
            "{} values for a grid of {} nodes",
            values.len(),
            grid.len()
        )));
    }
    let mut fft = Fft2::new(grid.box_size());
    let sp = box_to_spectrum(grid.geometry, grid_to_box(values, grid), &mut fft, cutoff);
    Ok(SpectralField::from_spectrum(&sp))
}

/// Homogeneous Sobolev seminorm `(sum_{k != 0} lambda_k^{2 eps} f(k)^2)^{1/2}`.
pub fn hs_norm<S: Real>(f: &SpectralField<S>, eps: S) -> S {
    let two_eps = eps + eps;
    f.coeffs()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| {
            torus_or_square_eigen::<S>(f.geometry(), f.cutoff(), i).powf(two_eps) * *c * *c
        })
        .sum::<S>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_roundtrip() {
        for k in [0usize, 1, 3] {
            let f = SpectralField::<f64>::zeros(Geometry::Torus, k);
            for i in 0..f.coeffs().len() {
                let m = f.mode(i);
                assert_eq!(f.index_of(m.k, m.parity), Some(i));
            }
        }
    }

    #[test]
    fn spectrum_roundtrip() {
        for g in [Geometry::Torus, Geometry::Square] {
            let n = g.coeff_count(3);
            let coeffs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let f = SpectralField::from_coeffs(g, 3, coeffs).unwrap();
            let back = SpectralField::from_spectrum(&f.to_spectrum());
            assert!(f.max_abs_diff(&back).unwrap() < 1e-15);
        }
    }

    #[test]
    fn eval_matches_basis() {
        let g = Geometry::Torus;
        let f = SpectralField::<f64>::single_mode(g, 4, [2, -3], Parity::Sin).unwrap();
        let x = TorusPoint::new(0.3, 0.71);
        let m = FourierMode::new(g, [2, -3], Parity::Sin);
        assert!((f.eval(&x) - m.eval(g, &x)).abs() < 1e-13);
    }
}
