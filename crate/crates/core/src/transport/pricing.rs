//! Candidate-arc generation for the column-generation network simplex.

use crate::domain::{Geometry, TorusPoint};
use crate::scalar::Real;

pub(crate) trait Pricer<S> {
    fn initial(&mut self) -> Vec<(usize, usize, S)>;
    /// Arcs `(i, j, c)` with `c + pi_src[i] - pi_dst[j] < -eps`, at most one per source.
    fn price(&mut self, pi_src: &[S], pi_dst: &[S], eps: S) -> Vec<(usize, usize, S)>;
}

pub(crate) struct DensePricer<S> {
    cost: Vec<S>,
    n: usize,
    m: usize,
}

impl<S: Real> DensePricer<S> {
    pub fn new(cost: Vec<S>, n: usize, m: usize) -> Self {
        Self { cost, n, m }
    }
}

impl<S: Real> Pricer<S> for DensePricer<S> {
    fn initial(&mut self) -> Vec<(usize, usize, S)> {
        let (n, m) = (self.n, self.m);
        let mut arcs = Vec::new();
        if n * m <= 4096 {
            for i in 0..n {
                for j in 0..m {
                    arcs.push((i, j, self.cost[i * m + j]));
                }
            }
            return arcs;
        }
        let k = m.min(4);
        let mut idx: Vec<usize> = (0..m).collect();
        for i in 0..n {
            let row = &self.cost[i * m..(i + 1) * m];
            idx.select_nth_unstable_by(k - 1, |a, b| {
                row[*a].partial_cmp(&row[*b]).unwrap().then(a.cmp(b))
            });
            for &j in &idx[..k] {
                arcs.push((i, j, row[j]));
            }
        }
        for j in 0..m {
            let (i, c) =
                (0..n)
                    .map(|i| (i, self.cost[i * m + j]))
                    .fold(
                        (0, S::infinity()),
                        |best, x| if x.1 < best.1 { x } else { best },
                    );
            arcs.push((i, j, c));
        }
        arcs
    }

    fn price(&mut self, pi_src: &[S], pi_dst: &[S], eps: S) -> Vec<(usize, usize, S)> {
        let m = self.m;
        let mut out = Vec::new();
        for (i, &p) in pi_src.iter().enumerate() {
            let row = &self.cost[i * m..(i + 1) * m];
            let mut best = -eps;
            let mut arg = usize::MAX;
            for (j, (&c, &q)) in row.iter().zip(pi_dst).enumerate() {
                let rc = c + p - q;
                if rc < best {
                    best = rc;
                    arg = j;
                }
            }
            if arg != usize::MAX {
                out.push((i, arg, row[arg]));
            }
        }
        out
    }
}

/// Spatial hash of the sink atoms; pricing only scans buckets that can hold a
/// violating arc, using `c(i,j) < f_i + max_j g_j`.
pub(crate) struct BucketPricer<'a, S> {
    geometry: Geometry,
    src: &'a [TorusPoint<S>],
    dst: &'a [TorusPoint<S>],
    side: usize,
    start: Vec<usize>,
    items: Vec<usize>,
}

impl<'a, S: Real> BucketPricer<'a, S> {
    pub fn new(geometry: Geometry, src: &'a [TorusPoint<S>], dst: &'a [TorusPoint<S>]) -> Self {
        let side = ((dst.len() as f64 / 2.0).sqrt().floor() as usize).max(1);
        let cells = side * side;
        let mut counts = vec![0usize; cells + 1];
        let key = |p: &TorusPoint<S>| Self::cell_of(side, p);
        for p in dst {
            counts[key(p) + 1] += 1;
        }
        for c in 0..cells {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut items = vec![0; dst.len()];
        for (j, p) in dst.iter().enumerate() {
            let c = key(p);
            items[fill[c]] = j;
            fill[c] += 1;
        }
        Self {
            geometry,
            src,
            dst,
            side,
            start: counts,
            items,
        }
    }

    fn axis_cell(side: usize, x: S) -> usize {
        ((x * S::of_usize(side)).floor().to_usize().unwrap_or(0)).min(side - 1)
    }

    fn cell_of(side: usize, p: &TorusPoint<S>) -> usize {
        Self::axis_cell(side, p.x1) * side + Self::axis_cell(side, p.x2)
    }

    /// Calls `visit(j)` for every sink in buckets within `span` buckets of `p`.
    fn for_each_near(&self, p: &TorusPoint<S>, span: usize, mut visit: impl FnMut(usize)) {
        let side = self.side;
        let range = |c: usize| -> Vec<usize> {
            match self.geometry {
                Geometry::Torus => {
                    if 2 * span + 1 >= side {
                        (0..side).collect()
                    } else {
                        (0..=2 * span)
                            .map(|d| (c + side + d - span) % side)
                            .collect()
                    }
                }
                Geometry::Square => (c.saturating_sub(span)..=(c + span).min(side - 1)).collect(),
            }
        };
        let r1 = range(Self::axis_cell(side, p.x1));
        let r2 = range(Self::axis_cell(side, p.x2));
        for &a in &r1 {
            for &b in &r2 {
                let c = a * side + b;
                for &j in &self.items[self.start[c]..self.start[c + 1]] {
                    visit(j);
                }
            }
        }
    }
}

impl<S: Real> Pricer<S> for BucketPricer<'_, S> {
    fn initial(&mut self) -> Vec<(usize, usize, S)> {
        let k = self.dst.len().min(6);
        let mut arcs = Vec::with_capacity(self.src.len() * k);
        let mut cand: Vec<(S, usize)> = Vec::new();
        for (i, p) in self.src.iter().enumerate() {
            let mut span = 1;
            loop {
                cand.clear();
                self.for_each_near(p, span, |j| {
                    cand.push((self.geometry.distance_sq(p, &self.dst[j]), j))
                });
                if cand.len() >= k || 2 * span + 1 >= self.side {
                    break;
                }
                span += 1;
            }
            cand.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            for &(c, j) in cand.iter().take(k) {
                arcs.push((i, j, c));
            }
        }
        arcs
    }

    fn price(&mut self, pi_src: &[S], pi_dst: &[S], eps: S) -> Vec<(usize, usize, S)> {
        let g_max = pi_dst.iter().copied().fold(S::neg_infinity(), S::max);
        let side = S::of_usize(self.side);
        let mut out = Vec::new();
        for (i, p) in self.src.iter().enumerate() {
            // violation needs c < f_i + g_j <= f_i + g_max, with f_i = -pi_src[i]
            let reach = g_max - pi_src[i];
            if reach <= eps {
                continue;
            }
            let r = reach.sqrt();
            let span = (r * side).ceil().to_usize().unwrap_or(self.side) + 1;
            let mut best = -eps;
            let mut arg = usize::MAX;
            let mut best_c = S::zero();
            let base = pi_src[i];
            self.for_each_near(p, span.min(self.side), |j| {
                let c = self.geometry.distance_sq(p, &self.dst[j]);
                let rc = c + base - pi_dst[j];
                if rc < best || (rc == best && arg != usize::MAX && j < arg) {
                    best = rc;
                    arg = j;
                    best_c = c;
                }
            });
            if arg != usize::MAX {
                out.push((i, arg, best_c));
            }
        }
        out
    }
}
