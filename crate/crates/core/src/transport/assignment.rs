//! Dense linear assignment by shortest augmenting paths (Jonker-Volgenant style),
//! ties broken towards the smallest column index.

use crate::error::{Error, Result};
use crate::scalar::Real;

pub struct Assignment<S> {
    /// Column assigned to each row.
    pub col_for_row: Vec<usize>,
    /// Row and column duals with `u[i] + v[j] <= c[i][j]`.
    pub u: Vec<S>,
    pub v: Vec<S>,
    pub cost: S,
}

/// Minimizes `sum_i c[i][sigma(i)]` over permutations of an `n x n` row-major matrix.
pub fn solve_assignment<S: Real>(cost: &[S], n: usize) -> Result<Assignment<S>> {
    if cost.len() != n * n {
        return Err(Error::InvalidArgument(format!(
            "cost matrix has {} entries, expected {}",
            cost.len(),
            n * n
        )));
    }
    const FREE: usize = usize::MAX;
    let inf = S::infinity();
    let mut u = vec![S::zero(); n];
    let mut v = vec![S::zero(); n];
    let mut col_for_row = vec![FREE; n];
    let mut row_for_col = vec![FREE; n];
    let mut shortest = vec![inf; n];
    let mut path = vec![FREE; n];
    let mut seen_row = vec![false; n];
    let mut seen_col = vec![false; n];
    let mut touched_rows = Vec::with_capacity(n);

    for cur in 0..n {
        shortest.iter_mut().for_each(|s| *s = inf);
        seen_col.iter_mut().for_each(|s| *s = false);
        for &r in &touched_rows {
            seen_row[r] = false;
        }
        touched_rows.clear();
        let mut min_val = S::zero();
        let mut i = cur;
        let sink;
        loop {
            seen_row[i] = true;
            touched_rows.push(i);
            let row = &cost[i * n..(i + 1) * n];
            let base = min_val - u[i];
            let mut lowest = inf;
            let mut best = FREE;
            for j in 0..n {
                if seen_col[j] {
                    continue;
                }
                let r = base + row[j] - v[j];
                if r < shortest[j] {
                    path[j] = i;
                    shortest[j] = r;
                }
                if shortest[j] < lowest {
                    lowest = shortest[j];
                    best = j;
                }
            }
            if best == FREE || lowest == inf {
                return Err(Error::InvalidArgument(
                    "assignment problem is infeasible".into(),
                ));
            }
            min_val = lowest;
            seen_col[best] = true;
            if row_for_col[best] == FREE {
                sink = best;
                break;
            }
            i = row_for_col[best];
        }
        u[cur] += min_val;
        for &r in &touched_rows {
            if r != cur {
                u[r] += min_val - shortest[col_for_row[r]];
            }
        }
        for j in 0..n {
            if seen_col[j] {
                v[j] -= min_val - shortest[j];
            }
        }
        let mut j = sink;
        loop {
            let i = path[j];
            row_for_col[j] = i;
            std::mem::swap(&mut col_for_row[i], &mut j);
            if i == cur {
                break;
            }
        }
    }
    let total = (0..n).map(|i| cost[i * n + col_for_row[i]]).sum();
    Ok(Assignment {
        col_for_row,
        u,
        v,
        cost: total,
    })
}
