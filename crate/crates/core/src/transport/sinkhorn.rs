use super::{check_masses, cost_matrix, Atom, DiscreteMeasure};
use crate::error::{Error, Result};
use crate::scalar::{abs, Real};

/// Entropic transport between two discrete measures.
#[derive(Clone, Debug)]
pub struct SinkhornResult<S> {
    /// `sum P_ij c_ij` of the entropic plan (not the regularized objective).
    pub cost: S,
    /// Dense plan, row-major `n x m`.
    pub plan: Vec<S>,
    pub f: Vec<S>,
    pub g: Vec<S>,
    pub iterations: usize,
    pub marginal_error: S,
}

const TOLERANCE: f64 = 1e-9;
const ANNEAL_SWEEPS: usize = 50;

/// One pair of row and column updates; returns the row-marginal error.
fn sweep<S: Real>(c: &[S], la: &[S], lb: &[S], a: &[S], f: &mut [S], g: &mut [S], eps: S) -> S {
    let (n, m) = (f.len(), g.len());
    for i in 0..n {
        let row = &c[i * m..(i + 1) * m];
        let lse = log_sum_exp((0..m).map(|j| (g[j] - row[j]) / eps + lb[j]));
        // zero-weight atoms keep a finite potential so that no inf - inf appears
        f[i] = if la[i].is_finite() {
            -eps * lse
        } else {
            S::zero()
        };
    }
    for j in 0..m {
        let lse = log_sum_exp((0..n).map(|i| (f[i] - c[i * m + j]) / eps + la[i]));
        g[j] = if lb[j].is_finite() {
            -eps * lse
        } else {
            S::zero()
        };
    }
    (0..n)
        .map(|i| {
            let row: S = (0..m)
                .map(|j| ((f[i] + g[j] - c[i * m + j]) / eps + la[i] + lb[j]).exp())
                .sum();
            abs(row - a[i])
        })
        .fold(S::zero(), S::max)
}

fn log_sum_exp<S: Real>(xs: impl Iterator<Item = S> + Clone) -> S {
    let m = xs.clone().fold(S::neg_infinity(), S::max);
    if m == S::neg_infinity() {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<S>().ln()
}

/// Log-domain Sinkhorn iterations with regularization `eps`; stops once the row
/// marginals match to 1e-9 (columns are exact after every sweep).
pub fn sinkhorn_ot<A: Atom<S>, S: Real>(
    mu: &DiscreteMeasure<A, S>,
    nu: &DiscreteMeasure<A, S>,
    eps: S,
    iters: usize,
) -> Result<SinkhornResult<S>> {
    if !(eps > S::zero()) {
        return Err(Error::InvalidArgument(format!(
            "regularization must be positive, got {eps}"
        )));
    }
    check_masses(mu, nu)?;
    let (n, m) = (mu.len(), nu.len());
    let c = cost_matrix(mu, nu)?;
    let la: Vec<S> = mu.weights.iter().map(|w| w.ln()).collect();
    let lb: Vec<S> = nu.weights.iter().map(|w| w.ln()).collect();
    let mut f = vec![S::zero(); n];
    let mut g = vec![S::zero(); m];
    let mut err = S::infinity();
    let mut it = 0;
    // anneal the regularization from the largest cost down to eps, warm-starting the
    // potentials; only the final stage has to converge
    let c_max = c.iter().copied().fold(S::zero(), S::max);
    let mut stage = c_max.max(eps);
    loop {
        let last = stage <= eps;
        let budget = if last {
            iters
        } else {
            ANNEAL_SWEEPS.min(iters)
        };
        let mut k = 0;
        while k < budget {
            k += 1;
            err = sweep(&c, &la, &lb, &mu.weights, &mut f, &mut g, stage);
            if err.to64() <= TOLERANCE {
                break;
            }
        }
        it += k;
        if last {
            break;
        }
        stage = (stage * S::of(0.5)).max(eps);
    }
    if err.to64() > TOLERANCE {
        return Err(Error::NotConverged {
            iterations: it,
            residual: err.to64(),
            tolerance: TOLERANCE,
        });
    }
    let mut plan = vec![S::zero(); n * m];
    let mut cost = S::zero();
    for i in 0..n {
        for j in 0..m {
            let p = ((f[i] + g[j] - c[i * m + j]) / eps + la[i] + lb[j]).exp();
            plan[i * m + j] = p;
            cost += p * c[i * m + j];
        }
    }
    Ok(SinkhornResult {
        cost,
        plan,
        f,
        g,
        iterations: it,
        marginal_error: err,
    })
}
