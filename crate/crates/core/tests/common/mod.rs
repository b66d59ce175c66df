//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use cycleflow_core::graph::{NodeId, OrientedGraph};
use cycleflow_core::solver::{ArcCapacity, QpSpec};
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Minimum cut by enumerating every node subset that contains all sources
/// and no sink.
pub fn brute_min_cut(
    g: &OrientedGraph,
    sources: &[NodeId],
    sinks: &[NodeId],
    caps: &[ArcCapacity],
) -> f64 {
    let n = g.node_count();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        let side = |v: NodeId| mask & (1 << v.0) != 0;
        if !sources.iter().all(|&s| side(s)) || sinks.iter().any(|&t| side(t)) {
            continue;
        }
        let cut: f64 = g
            .arcs()
            .iter()
            .zip(caps)
            .map(|(a, c)| match (side(a.tail), side(a.head)) {
                (true, false) => c.forward,
                (false, true) => c.backward,
                _ => 0.0,
            })
            .sum();
        best = best.min(cut);
    }
    best
}

/// Capacity of the cut defined by `side`.
pub fn cut_capacity(g: &OrientedGraph, side: &[bool], caps: &[ArcCapacity]) -> f64 {
    g.arcs()
        .iter()
        .zip(caps)
        .map(|(a, c)| match (side[a.tail.0], side[a.head.0]) {
            (true, false) => c.forward,
            (false, true) => c.backward,
            _ => 0.0,
        })
        .sum()
}

/// Rank by Gaussian elimination over the rationals.
pub fn rational_rank(rows: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|&v| BigRational::from_integer(v.into()))
                .collect()
        })
        .collect();
    let cols = a.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..a.len()).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        let inv = BigRational::one() / a[rank][c].clone();
        let pivot = a[rank].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != rank && !row[c].is_zero() {
                let f = row[c].clone() * inv.clone();
                for (x, pk) in row[c..cols].iter_mut().zip(&pivot[c..cols]) {
                    *x -= f.clone() * pk.clone();
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Weights of every simple undirected path between two nodes.
pub fn all_path_weights(g: &OrientedGraph, src: NodeId, dst: NodeId, w: &[f64]) -> Vec<f64> {
    fn go(
        g: &OrientedGraph,
        v: NodeId,
        dst: NodeId,
        w: &[f64],
        seen: &mut Vec<bool>,
        acc: f64,
        out: &mut Vec<f64>,
    ) {
        if v == dst {
            out.push(acc);
            return;
        }
        for &(arc, u) in g.incident(v) {
            if !seen[u.0] {
                seen[u.0] = true;
                go(g, u, dst, w, seen, acc + w[arc.0], out);
                seen[u.0] = false;
            }
        }
    }
    let mut seen = vec![false; g.node_count()];
    seen[src.0] = true;
    let mut out = Vec::new();
    go(g, src, dst, w, &mut seen, 0.0, &mut out);
    out
}

/// Exact optimum of a strictly convex QP by enumerating active sets: for
/// each choice of rows held at a bound, solve the equality KKT system and
/// keep the best feasible stationary point. Small problems only.
pub fn active_set_optimum(spec: &QpSpec) -> Option<(Vec<f64>, f64)> {
    use nalgebra::{DMatrix, DVector};
    let n = spec.num_vars();
    let k = spec.num_constraints();
    assert!(k <= 12, "enumeration is exponential in the row count");
    let mut best: Option<(Vec<f64>, f64)> = None;
    // each row: 0 free, 1 at lower, 2 at upper
    let total = 3usize.pow(k as u32);
    for code in 0..total {
        let mut c = code;
        let mut active = Vec::new();
        let mut skip = false;
        for i in 0..k {
            let s = c % 3;
            c /= 3;
            let eq = spec.upper[i] - spec.lower[i] < 1e-12;
            match s {
                0 if eq => skip = true,
                1 => active.push((i, spec.lower[i])),
                2 if !eq => active.push((i, spec.upper[i])),
                2 => skip = true,
                _ => {}
            }
        }
        if skip || active.len() > n {
            continue;
        }
        let na = active.len();
        let mut kkt = DMatrix::zeros(n + na, n + na);
        let mut rhs = DVector::zeros(n + na);
        kkt.view_mut((0, 0), (n, n)).copy_from(&spec.hessian);
        for j in 0..n {
            rhs[j] = -spec.linear[j];
        }
        for (r, &(i, b)) in active.iter().enumerate() {
            for j in 0..n {
                kkt[(n + r, j)] = spec.constraints[(i, j)];
                kkt[(j, n + r)] = spec.constraints[(i, j)];
            }
            rhs[n + r] = b;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        let x: Vec<f64> = sol.iter().take(n).copied().collect();
        if spec.max_violation(&x) > 1e-9 {
            continue;
        }
        let obj = spec.objective(&x);
        if best.as_ref().is_none_or(|(_, b)| obj < *b - 1e-12) {
            best = Some((x, obj));
        }
    }
    best
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Rank over GF(2) of arc-support bitmasks.
pub fn gf2_rank_bits(rows: &[u64]) -> usize {
    let mut pivots: Vec<u64> = Vec::new();
    for &r in rows {
        let mut r = r;
        for &p in &pivots {
            r = r.min(r ^ p);
        }
        if r != 0 {
            pivots.push(r);
            pivots.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    pivots.len()
}

pub fn support_bits(entries: &[i8]) -> u64 {
    entries
        .iter()
        .enumerate()
        .filter(|(_, e)| **e != 0)
        .fold(0, |acc, (j, _)| acc | 1 << j)
}

/// True if the arc subset `mask` forms one simple cycle: every touched node
/// has degree two and the arcs are connected.
pub fn is_simple_cycle(g: &OrientedGraph, mask: u64) -> bool {
    if mask == 0 {
        return false;
    }
    let mut deg = vec![0usize; g.node_count()];
    let arcs: Vec<usize> = (0..g.arc_count())
        .filter(|j| mask & (1 << j) != 0)
        .collect();
    for &j in &arcs {
        let a = &g.arcs()[j];
        deg[a.tail.0] += 1;
        deg[a.head.0] += 1;
    }
    if deg.iter().any(|&d| d != 0 && d != 2) {
        return false;
    }
    let mut uf = UnionFind::new(g.node_count());
    for &j in &arcs {
        let a = &g.arcs()[j];
        uf.union(a.tail.0, a.head.0);
    }
    let touched: Vec<usize> = (0..g.node_count()).filter(|&v| deg[v] > 0).collect();
    touched.iter().all(|&v| uf.find(v) == uf.find(touched[0]))
}

/// Minimum total weight of a cycle basis: every simple cycle by subset
/// enumeration, then greedy selection (cycle space is a matroid).
pub fn min_cycle_basis_weight(g: &OrientedGraph, w: &[f64]) -> f64 {
    let m = g.arc_count();
    assert!(
        m <= 16,
        "subset enumeration is exponential in the arc count"
    );
    let mut cycles: Vec<(f64, u64)> = (1u64..1 << m)
        .filter(|&mask| is_simple_cycle(g, mask))
        .map(|mask| {
            (
                (0..m).filter(|j| mask & (1 << j) != 0).map(|j| w[j]).sum(),
                mask,
            )
        })
        .collect();
    cycles.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut chosen = Vec::new();
    let mut total = 0.0;
    for (wt, mask) in cycles {
        chosen.push(mask);
        if gf2_rank_bits(&chosen) == chosen.len() {
            total += wt;
        } else {
            chosen.pop();
        }
    }
    total
}

pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, v: usize) -> usize {
        let mut r = v;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        self.parent[v] = r;
        r
    }

    /// False if `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        self.parent[ra] = rb;
        ra != rb
    }
}
