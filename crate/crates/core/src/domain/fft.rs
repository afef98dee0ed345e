use crate::scalar::Real;
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Square two-dimensional FFT (row-major, unnormalized in both directions).
pub(crate) struct Fft2<S: Real> {
    m: usize,
    fwd: Arc<dyn Fft<S>>,
    inv: Arc<dyn Fft<S>>,
    scratch: Vec<Complex<S>>,
}

impl<S: Real> Fft2<S> {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Self {
            m,
            fwd,
            inv,
            scratch: vec![Complex::default(); len],
        }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    /// `a[k] <- sum_j a[j] exp(-2 pi i j.k / m)`
    pub fn forward(&mut self, a: &mut [Complex<S>]) {
        let plan = Arc::clone(&self.fwd);
        self.run(plan.as_ref(), a);
    }

    /// `a[j] <- sum_k a[k] exp(+2 pi i j.k / m)`
    pub fn inverse(&mut self, a: &mut [Complex<S>]) {
        let plan = Arc::clone(&self.inv);
        self.run(plan.as_ref(), a);
    }

    fn run(&mut self, plan: &dyn Fft<S>, a: &mut [Complex<S>]) {
        debug_assert_eq!(a.len(), self.m * self.m);
        plan.process_with_scratch(a, &mut self.scratch);
        transpose(a, self.m);
        plan.process_with_scratch(a, &mut self.scratch);
        transpose(a, self.m);
    }
}

fn transpose<T: Copy>(a: &mut [T], m: usize) {
    for i in 0..m {
        for j in i + 1..m {
            a.swap(i * m + j, j * m + i);
        }
    }
}
