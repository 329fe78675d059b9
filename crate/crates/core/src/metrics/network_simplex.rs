//! Exact discrete optimal transport by the primal network simplex method.
//!
//! Masses are scaled to integers so that pivots are exact; only the cost
//! side (potentials and reduced costs) is floating point.

use crate::error::{Result, SwarmError};
use crate::grid::{GridSpec, ScalarField, Vec2};

use super::check_masses;

pub const MAX_EXACT_CELLS: usize = 4096;

/// Integer units per unit of mass.
const SCALE: f64 = (1u64 << 42) as f64;

#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    pub source_grid: GridSpec,
    pub target_grid: GridSpec,
    /// Nonzero entries `(source cell, target cell, mass)`.
    pub entries: Vec<(usize, usize, f64)>,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.source_grid.len()];
        for &(i, _, w) in &self.entries {
            s[i] += w;
        }
        s
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.target_grid.len()];
        for &(_, j, w) in &self.entries {
            s[j] += w;
        }
        s
    }

    /// `Σ γ_ij ‖x_i - y_j‖²`.
    pub fn cost(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, w)| w * sq_dist(self.source_grid.center(i), self.target_grid.center(j)))
            .sum()
    }
}

fn sq_dist(a: Vec2, b: Vec2) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Exact `W₂` between the cell-center atomic measures of `ρ` and `μ`.
pub fn w2_exact_small(rho: &ScalarField, mu: &ScalarField) -> Result<(f64, TransportPlan)> {
    let grid = rho.grid();
    if grid.len() > MAX_EXACT_CELLS {
        return Err(SwarmError::InvalidArgument(format!(
            "exact transport limited to {MAX_EXACT_CELLS} cells, grid has {}",
            grid.len()
        )));
    }
    let (ma, mb) = check_masses(rho, mu)?;
    let vol = grid.cell_volume();
    let mean_mass = 0.5 * (ma + mb);
    let plan = |entries| TransportPlan { source_grid: grid.clone(), target_grid: grid.clone(), entries };
    if mean_mass <= 0.0 {
        return Ok((0.0, plan(Vec::new())));
    }

    let supply = integer_masses(rho.values(), vol / mean_mass);
    let demand = integer_masses(mu.values(), vol / mean_mass);
    let src: Vec<usize> = (0..supply.len()).filter(|&i| supply[i] > 0).collect();
    let dst: Vec<usize> = (0..demand.len()).filter(|&j| demand[j] > 0).collect();
    let xs: Vec<Vec2> = src.iter().map(|&i| grid.center(i)).collect();
    let ys: Vec<Vec2> = dst.iter().map(|&j| grid.center(j)).collect();

    let mut solver = Simplex::new(
        src.iter().map(|&i| supply[i]).collect(),
        dst.iter().map(|&j| demand[j]).collect(),
        |a, b| sq_dist(xs[a], ys[b]),
    );
    solver.solve()?;

    let unit = mean_mass / SCALE;
    let mut entries: Vec<(usize, usize, f64)> = solver
        .real_flows()
        .map(|(a, b, f)| (src[a], dst[b], f as f64 * unit))
        .collect();
    entries.sort_by_key(|&(i, j, _)| (i, j));
    let plan = plan(entries);
    Ok((plan.cost().max(0.0).sqrt(), plan))
}

/// Rounds `values · factor · SCALE` to integers summing exactly to `SCALE`;
/// the rounding defect goes to the largest entry.
fn integer_masses(values: &[f64], factor: f64) -> Vec<i64> {
    let mut out: Vec<i64> = values.iter().map(|v| (v * factor * SCALE).round() as i64).collect();
    let total: i64 = out.iter().sum();
    let defect = SCALE as i64 - total;
    if let Some((k, _)) = out.iter().enumerate().max_by_key(|(_, v)| **v) {
        out[k] += defect;
    }
    out
}

/// Uncapacitated transportation problem on a complete bipartite graph plus
/// an artificial root joined to every node.
struct Simplex<F: Fn(usize, usize) -> f64> {
    n: usize,
    m: usize,
    cost: F,
    big_m: f64,
    /// Basic arcs: (arc id, flow). Arc ids `< n·m` are real `(a, b)` arcs
    /// `a·m + b`; `n·m + k` is the artificial arc of node `k`.
    basis: Vec<(usize, i64)>,
    parent: Vec<usize>,
    /// Basis slot of the arc to the parent.
    pred: Vec<usize>,
    /// True when the tree arc points from the node up to its parent.
    up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    /// Tree adjacency: (neighbor, basis slot).
    adj: Vec<Vec<(usize, usize)>>,
    next_arc: usize,
}

impl<F: Fn(usize, usize) -> f64> Simplex<F> {
    fn new(supply: Vec<i64>, demand: Vec<i64>, cost: F) -> Self {
        let (n, m) = (supply.len(), demand.len());
        let mut max_cost: f64 = 0.0;
        for a in 0..n.min(64) {
            for b in 0..m {
                max_cost = max_cost.max(cost(a, b));
            }
        }
        for b in 0..m.min(64) {
            for a in 0..n {
                max_cost = max_cost.max(cost(a, b));
            }
        }
        let nodes = n + m + 1;
        let big_m = (max_cost + 1.0) * nodes as f64;
        let basis: Vec<(usize, i64)> =
            supply.iter().chain(&demand).enumerate().map(|(k, &f)| (n * m + k, f)).collect();
        let mut s = Self {
            n,
            m,
            cost,
            big_m,
            basis,
            parent: vec![0; nodes],
            pred: vec![usize::MAX; nodes],
            up: vec![false; nodes],
            depth: vec![0; nodes],
            pi: vec![0.0; nodes],
            adj: vec![Vec::new(); nodes],
            next_arc: 0,
        };
        for slot in 0..s.basis.len() {
            let (t, h, _) = s.arc(s.basis[slot].0);
            s.adj[t].push((h, slot));
            s.adj[h].push((t, slot));
        }
        let root = s.root();
        s.hang(root, root, usize::MAX);
        s
    }

    fn root(&self) -> usize {
        self.n + self.m
    }

    fn arc_count(&self) -> usize {
        self.n * self.m + self.n + self.m
    }

    /// `(tail, head, cost)` of an arc.
    fn arc(&self, id: usize) -> (usize, usize, f64) {
        let real = self.n * self.m;
        if id < real {
            let (a, b) = (id / self.m, id % self.m);
            (a, self.n + b, (self.cost)(a, b))
        } else {
            let k = id - real;
            if k < self.n {
                (k, self.root(), self.big_m)
            } else {
                (self.root(), k, self.big_m)
            }
        }
    }

    /// Re-derives parent links, depths and potentials for the subtree
    /// entered at `top`, which hangs from `parent` through basis `slot`.
    fn hang(&mut self, top: usize, parent: usize, slot: usize) {
        let root = self.root();
        if top == root {
            self.pi[root] = 0.0;
            self.depth[root] = 0;
        } else {
            self.link(top, parent, slot);
        }
        let mut stack = vec![top];
        while let Some(u) = stack.pop() {
            for k in 0..self.adj[u].len() {
                let (w, sl) = self.adj[u][k];
                if sl == self.pred[u] {
                    continue;
                }
                self.link(w, u, sl);
                stack.push(w);
            }
        }
    }

    fn link(&mut self, w: usize, u: usize, slot: usize) {
        let (t, _, c) = self.arc(self.basis[slot].0);
        self.parent[w] = u;
        self.pred[w] = slot;
        self.up[w] = t == w;
        self.depth[w] = self.depth[u] + 1;
        // zero reduced cost on tree arcs: π(head) = π(tail) + c
        self.pi[w] = if t == w { self.pi[u] - c } else { self.pi[u] + c };
    }

    fn reduced(&self, id: usize) -> f64 {
        let (t, h, c) = self.arc(id);
        c + self.pi[t] - self.pi[h]
    }

    /// Block-search pricing: the most negative reduced cost within the first
    /// block that contains any candidate.
    fn find_entering(&mut self, tol: f64) -> Option<usize> {
        let total = self.arc_count();
        let block = ((total as f64).sqrt() as usize).max(16);
        let mut best: Option<(usize, f64)> = None;
        let mut scanned = 0;
        let mut k = self.next_arc;
        while scanned < total {
            let rc = self.reduced(k);
            if rc < -tol && best.is_none_or(|(_, b)| rc < b) {
                best = Some((k, rc));
            }
            k += 1;
            if k == total {
                k = 0;
            }
            scanned += 1;
            if scanned % block == 0 && best.is_some() {
                break;
            }
        }
        self.next_arc = k;
        best.map(|(id, _)| id)
    }

    fn pivot(&mut self, entering: usize) {
        let (u, w, _) = self.arc(entering);
        let (mut a, mut b) = (u, w);
        while a != b {
            if self.depth[a] >= self.depth[b] {
                a = self.parent[a];
            } else {
                b = self.parent[b];
            }
        }
        let join = a;

        // cycle: u -> w (entering), w up to join, join down to u
        let mut delta = i64::MAX;
        let mut leaving: Option<usize> = None;
        let mut inner = u;
        let mut v = u;
        while v != join {
            // traversed parent -> v; backward when the arc points up
            if self.up[v] {
                let f = self.basis[self.pred[v]].1;
                if f < delta {
                    delta = f;
                    leaving = Some(v);
                }
            }
            v = self.parent[v];
        }
        let mut v = w;
        while v != join {
            // traversed v -> parent; backward when the arc points down
            if !self.up[v] {
                let f = self.basis[self.pred[v]].1;
                if f <= delta {
                    delta = f;
                    leaving = Some(v);
                    inner = w;
                }
            }
            v = self.parent[v];
        }
        let leaving = leaving.expect("uncapacitated cycle without a backward arc");

        if delta > 0 {
            let mut v = u;
            while v != join {
                let slot = self.pred[v];
                self.basis[slot].1 += if self.up[v] { -delta } else { delta };
                v = self.parent[v];
            }
            let mut v = w;
            while v != join {
                let slot = self.pred[v];
                self.basis[slot].1 += if self.up[v] { delta } else { -delta };
                v = self.parent[v];
            }
        }
        let slot = self.pred[leaving];
        let old_parent = self.parent[leaving];
        self.adj[leaving].retain(|&(_, sl)| sl != slot);
        self.adj[old_parent].retain(|&(_, sl)| sl != slot);
        self.basis[slot] = (entering, delta);
        self.adj[u].push((w, slot));
        self.adj[w].push((u, slot));
        let outer = if inner == u { w } else { u };
        self.hang(inner, outer, slot);
    }

    fn solve(&mut self) -> Result<()> {
        let nodes = self.n + self.m + 1;
        let cap = 200 * nodes + 10_000;
        let tol = 1e-12 * self.big_m.max(1.0);
        for _ in 0..cap {
            match self.find_entering(tol) {
                Some(id) => self.pivot(id),
                None => {
                    let artificial = self.n * self.m;
                    if self.basis.iter().any(|&(id, f)| id >= artificial && f > 0) {
                        return Err(SwarmError::InvalidArgument("transport problem is infeasible".into()));
                    }
                    return Ok(());
                }
            }
        }
        Err(SwarmError::SolverStall { iterations: cap })
    }

    fn real_flows(&self) -> impl Iterator<Item = (usize, usize, i64)> + '_ {
        let real = self.n * self.m;
        self.basis.iter().filter(move |&&(id, f)| id < real && f > 0).map(move |&(id, f)| (id / self.m, id % self.m, f))
    }
}
