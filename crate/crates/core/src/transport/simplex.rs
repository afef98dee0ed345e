//! Primal network simplex for uncapacitated transportation problems.
//!
//! Spanning-tree basis stored with parent/thread/successor arrays and updated in place;
//! block-search pivoting. Arcs may be appended between runs, which is how column
//! generation feeds candidate arcs in.

use crate::scalar::Real;

const NONE: usize = usize::MAX;
const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;

pub(crate) struct NetworkSimplex<S> {
    node_num: usize,
    root: usize,
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<S>,
    flow: Vec<S>,
    state: Vec<i8>,
    pi: Vec<S>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    dirty_revs: Vec<usize>,
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: S,
    next_arc: usize,
    eps: S,
    pub pivots: usize,
}

impl<S: Real> NetworkSimplex<S> {
    /// `supply[u] > 0` for sources, `< 0` for sinks; must sum to zero.
    /// `art_cost` must exceed every real arc cost.
    pub fn new(supply: &[S], art_cost: S, eps: S) -> Self {
        let node_num = supply.len();
        let root = node_num;
        let all = node_num + 1;
        let mut ns = Self {
            node_num,
            root,
            source: vec![0; node_num],
            target: vec![0; node_num],
            cost: vec![S::zero(); node_num],
            flow: vec![S::zero(); node_num],
            state: vec![STATE_TREE; node_num],
            pi: vec![S::zero(); all],
            parent: vec![NONE; all],
            pred: vec![NONE; all],
            pred_dir: vec![DIR_UP; all],
            thread: vec![0; all],
            rev_thread: vec![0; all],
            succ_num: vec![1; all],
            last_succ: vec![0; all],
            dirty_revs: Vec::new(),
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: S::zero(),
            next_arc: 0,
            eps,
            pivots: 0,
        };
        ns.thread[root] = 0;
        ns.rev_thread[0] = root;
        ns.succ_num[root] = all;
        ns.last_succ[root] = root - 1;
        for u in 0..node_num {
            let e = u;
            ns.parent[u] = root;
            ns.pred[u] = e;
            ns.thread[u] = u + 1;
            ns.rev_thread[u + 1] = u;
            ns.succ_num[u] = 1;
            ns.last_succ[u] = u;
            if supply[u] >= S::zero() {
                ns.pred_dir[u] = DIR_UP;
                ns.pi[u] = S::zero();
                ns.source[e] = u;
                ns.target[e] = root;
                ns.flow[e] = supply[u];
                ns.cost[e] = S::zero();
            } else {
                ns.pred_dir[u] = DIR_DOWN;
                ns.pi[u] = art_cost;
                ns.source[e] = root;
                ns.target[e] = u;
                ns.flow[e] = -supply[u];
                ns.cost[e] = art_cost;
            }
        }
        ns.thread[node_num - 1] = root;
        ns.rev_thread[root] = node_num - 1;
        ns
    }

    pub fn add_arc(&mut self, s: usize, t: usize, c: S) {
        self.source.push(s);
        self.target.push(t);
        self.cost.push(c);
        self.flow.push(S::zero());
        self.state.push(STATE_LOWER);
    }

    pub fn potentials(&self) -> &[S] {
        &self.pi[..self.node_num]
    }

    pub fn artificial_flow(&self) -> S {
        self.flow[..self.node_num].iter().copied().sum()
    }

    /// Real arcs carrying positive flow.
    pub fn flows(&self) -> impl Iterator<Item = (usize, usize, S, S)> + '_ {
        (self.node_num..self.source.len())
            .filter(|&e| self.flow[e] > S::zero())
            .map(|e| (self.source[e], self.target[e], self.flow[e], self.cost[e]))
    }

    fn block_size(&self) -> usize {
        ((self.source.len() as f64).sqrt() as usize).max(10)
    }

    fn find_entering_arc(&mut self) -> bool {
        let arc_num = self.source.len();
        let block = self.block_size();
        let mut cnt = block;
        let mut min = -self.eps;
        let mut min_arc = NONE;
        let mut e = self.next_arc;
        for _ in 0..arc_num {
            if e >= arc_num {
                e = 0;
            }
            let st = self.state[e];
            if st != STATE_TREE {
                let c = S::of(st as f64)
                    * (self.cost[e] + self.pi[self.source[e]] - self.pi[self.target[e]]);
                if c < min {
                    min = c;
                    min_arc = e;
                }
            }
            e += 1;
            cnt -= 1;
            if cnt == 0 {
                if min_arc != NONE {
                    break;
                }
                cnt = block;
            }
        }
        if min_arc == NONE {
            return false;
        }
        self.in_arc = min_arc;
        self.next_arc = if e >= arc_num { 0 } else { e };
        true
    }

    fn find_join_node(&mut self) {
        let mut u = self.source[self.in_arc];
        let mut v = self.target[self.in_arc];
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// Returns `false` when the cycle is unbounded.
    fn find_leaving_arc(&mut self) -> bool {
        let (first, second) = (self.source[self.in_arc], self.target[self.in_arc]);
        let mut delta = S::infinity();
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            let e = self.pred[u];
            if self.pred_dir[u] == DIR_UP {
                let d = self.flow[e];
                if d < delta {
                    delta = d;
                    self.u_out = u;
                    result = 1;
                }
            }
            u = self.parent[u];
        }
        u = second;
        while u != self.join {
            let e = self.pred[u];
            if self.pred_dir[u] == DIR_DOWN {
                let d = self.flow[e];
                if d <= delta {
                    delta = d;
                    self.u_out = u;
                    result = 2;
                }
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        self.delta = delta;
        result != 0
    }

    fn change_flow(&mut self) {
        let val = self.delta;
        if val > S::zero() {
            let e_in = self.in_arc;
            self.flow[e_in] += val;
            let mut u = self.source[e_in];
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= S::of(self.pred_dir[u] as f64) * val;
                u = self.parent[u];
            }
            u = self.target[e_in];
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += S::of(self.pred_dir[u] as f64) * val;
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = STATE_TREE;
        let out = self.pred[self.u_out];
        self.state[out] = STATE_LOWER;
        // leaving arc is exactly empty
        self.flow[out] = S::zero();
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let in_arc = self.in_arc;
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source[in_arc] {
                DIR_UP
            } else {
                DIR_DOWN
            };
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for i in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[i];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            let mut p = self.parent[u];
            while u != u_in {
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                // succ_num[u] - succ_num[p] is negative along the reversed stem
                tmp_sc = tmp_sc.wrapping_add(self.succ_num[u].wrapping_sub(self.succ_num[p]));
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
                p = self.parent[u];
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source[in_arc] {
                DIR_UP
            } else {
                DIR_DOWN
            };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in {
            join
        } else {
            NONE
        };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in]
            - self.pi[u_in]
            - S::of(self.pred_dir[u_in] as f64) * self.cost[self.in_arc];
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    /// Pivots until no arc in the current arc set has negative reduced cost.
    /// Returns `false` if an unbounded cycle was met (cannot happen with nonnegative costs).
    pub fn run(&mut self) -> bool {
        while self.find_entering_arc() {
            self.find_join_node();
            if !self.find_leaving_arc() {
                return false;
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
            self.pivots += 1;
        }
        true
    }

    /// Recomputes potentials from the tree, removing accumulated drift.
    pub fn refresh_potentials(&mut self) {
        self.pi[self.root] = S::zero();
        let mut u = self.thread[self.root];
        while u != self.root {
            let e = self.pred[u];
            let p = self.parent[u];
            self.pi[u] = if self.pred_dir[u] == DIR_UP {
                self.pi[p] - self.cost[e]
            } else {
                self.pi[p] + self.cost[e]
            };
            u = self.thread[u];
        }
    }
}
