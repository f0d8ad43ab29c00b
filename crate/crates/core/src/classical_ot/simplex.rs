//! Primal network simplex for the dense transportation problem.
//!
//! Nodes `0..m` are sources, `m..m+n` sinks, `m+n` an artificial root. Every node is
//! joined to the root by an artificial arc of large cost; the initial spanning tree is
//! made of those arcs. Pivots keep the tree strongly feasible (leaving-arc rule of
//! Cunningham), which rules out cycling; entering arcs are chosen by block search.

use crate::error::{Error, Result};

const EPS_REDUCED: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SimplexSolution {
    /// Flow on each real arc, row-major `m x n`.
    pub flow: Vec<f64>,
    /// Kantorovich potentials with `a_i + b_j <= c_ij`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub cost: f64,
    pub pivots: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    Up,
    Down,
}

struct Tree {
    m: usize,
    n: usize,
    cost: Vec<f64>,
    big_m: f64,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    adj: Vec<Vec<usize>>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    dir: Vec<Dir>,
    depth: Vec<usize>,
    pi: Vec<f64>,
}

impl Tree {
    fn n_real(&self) -> usize {
        self.m * self.n
    }

    fn root(&self) -> usize {
        self.m + self.n
    }

    fn ends(&self, arc: usize) -> (usize, usize) {
        let nr = self.n_real();
        if arc < nr {
            (arc / self.n, self.m + arc % self.n)
        } else {
            let k = arc - nr;
            if k < self.m {
                (k, self.root())
            } else {
                (self.root(), k)
            }
        }
    }

    fn arc_cost(&self, arc: usize) -> f64 {
        if arc < self.n_real() {
            self.cost[arc]
        } else {
            self.big_m
        }
    }

    fn reduced(&self, arc: usize) -> f64 {
        let (s, t) = self.ends(arc);
        self.arc_cost(arc) + self.pi[s] - self.pi[t]
    }

    /// Recomputes parent pointers, depths and potentials by a traversal from the root.
    fn rebuild(&mut self) {
        let root = self.root();
        let nn = root + 1;
        let mut seen = vec![false; nn];
        let mut stack = vec![root];
        seen[root] = true;
        self.depth[root] = 0;
        self.pi[root] = 0.0;
        while let Some(u) = stack.pop() {
            for idx in 0..self.adj[u].len() {
                let arc = self.adj[u][idx];
                let (s, t) = self.ends(arc);
                let v = if s == u { t } else { s };
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                self.parent[v] = u;
                self.pred[v] = arc;
                self.depth[v] = self.depth[u] + 1;
                let c = self.arc_cost(arc);
                if s == u {
                    self.dir[v] = Dir::Down;
                    self.pi[v] = self.pi[u] + c;
                } else {
                    self.dir[v] = Dir::Up;
                    self.pi[v] = self.pi[u] - c;
                }
                stack.push(v);
            }
        }
    }

    fn remove_adj(&mut self, arc: usize) {
        let (s, t) = self.ends(arc);
        for u in [s, t] {
            if let Some(pos) = self.adj[u].iter().position(|&a| a == arc) {
                self.adj[u].swap_remove(pos);
            }
        }
    }

    fn pivot(&mut self, enter: usize) {
        let (first, second) = self.ends(enter);
        let (mut u, mut v) = (first, second);
        while u != v {
            if self.depth[u] >= self.depth[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        let join = u;
        let mut delta = f64::INFINITY;
        let mut out_node = usize::MAX;
        let mut u = first;
        while u != join {
            if self.dir[u] == Dir::Up {
                let d = self.flow[self.pred[u]];
                if d < delta {
                    delta = d;
                    out_node = u;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != join {
            if self.dir[u] == Dir::Down {
                let d = self.flow[self.pred[u]];
                if d <= delta {
                    delta = d;
                    out_node = u;
                }
            }
            u = self.parent[u];
        }
        assert!(out_node != usize::MAX, "transportation problem is unbounded");
        if delta > 0.0 {
            self.flow[enter] += delta;
            let mut u = first;
            while u != join {
                let a = self.pred[u];
                self.flow[a] += if self.dir[u] == Dir::Up { -delta } else { delta };
                u = self.parent[u];
            }
            let mut u = second;
            while u != join {
                let a = self.pred[u];
                self.flow[a] += if self.dir[u] == Dir::Down { -delta } else { delta };
                u = self.parent[u];
            }
        }
        let leave = self.pred[out_node];
        self.flow[leave] = 0.0;
        self.in_tree[leave] = false;
        self.remove_adj(leave);
        self.in_tree[enter] = true;
        let (s, t) = self.ends(enter);
        self.adj[s].push(enter);
        self.adj[t].push(enter);
        self.rebuild();
    }
}

/// Minimizes `sum c_ij x_ij` subject to row sums `supply`, column sums `demand`,
/// `x >= 0`. Supplies and demands must be positive and balance to within `1e-9`
/// relative.
pub fn solve(cost: &[f64], supply: &[f64], demand: &[f64]) -> Result<SimplexSolution> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 || cost.len() != m * n {
        return Err(Error::DimensionMismatch(format!(
            "cost has {} entries for a {m} x {n} problem",
            cost.len()
        )));
    }
    let ts: f64 = supply.iter().sum();
    let td: f64 = demand.iter().sum();
    if (ts - td).abs() > 1e-9 * ts.max(td) {
        return Err(Error::Unbalanced { source_mass: ts, target_mass: td });
    }
    if supply.iter().chain(demand).any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidParameter("supplies and demands must be positive".into()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("costs must be finite".into()));
    }
    let cmax = cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    let nr = m * n;
    let nn = m + n + 1;
    let mut t = Tree {
        m,
        n,
        cost: cost.to_vec(),
        big_m: (cmax + 1.0) * (m + n) as f64,
        flow: vec![0.0; nr + m + n],
        in_tree: vec![false; nr + m + n],
        adj: vec![Vec::new(); nn],
        parent: vec![0; nn],
        pred: vec![0; nn],
        dir: vec![Dir::Up; nn],
        depth: vec![0; nn],
        pi: vec![0.0; nn],
    };
    for k in 0..m + n {
        let arc = nr + k;
        t.flow[arc] = if k < m { supply[k] } else { demand[k - m] };
        t.in_tree[arc] = true;
        let (s, d) = t.ends(arc);
        t.adj[s].push(arc);
        t.adj[d].push(arc);
    }
    t.rebuild();

    let total_arcs = nr + m + n;
    let block = ((total_arcs as f64).sqrt() as usize).max(10);
    let mut next = 0usize;
    let mut pivots = 0usize;
    let tol = EPS_REDUCED * (1.0 + cmax);
    loop {
        let mut best = usize::MAX;
        let mut best_val = -tol;
        let mut scanned = 0usize;
        let mut in_block = 0usize;
        while scanned < total_arcs {
            let arc = next;
            next += 1;
            if next == total_arcs {
                next = 0;
            }
            scanned += 1;
            in_block += 1;
            if !t.in_tree[arc] {
                let r = t.reduced(arc);
                if r < best_val {
                    best_val = r;
                    best = arc;
                }
            }
            if in_block == block {
                if best != usize::MAX {
                    break;
                }
                in_block = 0;
            }
        }
        if best == usize::MAX {
            break;
        }
        t.pivot(best);
        pivots += 1;
    }

    let art: f64 = t.flow[nr..].iter().sum();
    if art > 1e-9 * ts {
        return Err(Error::Numerical(format!("artificial flow {art:e} left at optimum")));
    }
    let flow = t.flow[..nr].to_vec();
    let total_cost = flow.iter().zip(cost).map(|(f, c)| f * c).sum();
    let a = (0..m).map(|i| -t.pi[i]).collect();
    let b = (0..n).map(|j| t.pi[m + j]).collect();
    Ok(SimplexSolution { flow, a, b, cost: total_cost, pivots })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_vertices() {
        // sources at +-0.5, sinks at +-1 on a line
        let xs = [0.5, -0.5];
        let ys = [1.0, -1.0];
        let c: Vec<f64> = xs.iter().flat_map(|x| ys.iter().map(move |y| (x - y) * (x - y))).collect();
        let s = solve(&c, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert!((s.cost - 0.25).abs() < 1e-14);
        assert!((s.flow[0] - 0.5).abs() < 1e-14 && (s.flow[3] - 0.5).abs() < 1e-14);
        let dual: f64 = 0.5 * (s.a[0] + s.a[1] + s.b[0] + s.b[1]);
        assert!((dual - s.cost).abs() < 1e-12);
    }

    #[test]
    fn rejects_unbalanced() {
        assert!(matches!(solve(&[1.0], &[1.0], &[0.5]), Err(Error::Unbalanced { .. })));
    }

    #[test]
    fn brute_force_three_by_three() {
        // permutation problem: LP optimum is the best permutation
        let c = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let s = solve(&c, &[1.0; 3], &[1.0; 3]).unwrap();
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let best = perms
            .iter()
            .map(|p| (0..3).map(|i| c[i * 3 + p[i]]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        assert!((s.cost - best).abs() < 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                assert!(s.a[i] + s.b[j] <= c[i * 3 + j] + 1e-12);
            }
        }
    }
}
