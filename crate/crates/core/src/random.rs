//! Seeded random instances for property tests and benchmarks.
//!
//! The seed comes from `CYCLEFLOW_SEED` when set.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{NodeId, OrientedGraph};
use crate::opf::{Bounds, Bus, Line, OpfProblem};
use crate::reduction::{particular_solution, ElementarySolutionSet, FlowProblem, QuadraticCost};

pub const SEED_VAR: &str = "CYCLEFLOW_SEED";

/// `CYCLEFLOW_SEED` if it parses, otherwise `default`.
pub fn seed_from_env(default: u64) -> u64 {
    std::env::var(SEED_VAR)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(default)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected graph with `n` nodes and `m ≥ n − 1` arcs, at most one arc per
/// node pair, random orientations.
pub fn connected_graph<R: Rng>(rng: &mut R, n: usize, m: usize) -> OrientedGraph {
    assert!(
        n >= 1 && m + 1 >= n && m <= n * (n - 1) / 2,
        "no simple connected graph with n={n}, m={m}"
    );
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pairs = BTreeSet::new();
    let mut arcs = Vec::with_capacity(m);
    let push = |arcs: &mut Vec<(usize, usize)>, a: usize, b: usize, rng: &mut R| {
        if rng.gen_bool(0.5) {
            arcs.push((a, b));
        } else {
            arcs.push((b, a));
        }
    };
    for i in 1..n {
        let j = rng.gen_range(0..i);
        let (a, b) = (order[i], order[j]);
        pairs.insert((a.min(b), a.max(b)));
        push(&mut arcs, a, b, rng);
    }
    let mut free: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|p| !pairs.contains(p))
        .collect();
    free.shuffle(rng);
    for &(a, b) in free.iter().take(m - arcs.len()) {
        push(&mut arcs, a, b, rng);
    }
    arcs.shuffle(rng);
    OrientedGraph::new(n, &arcs).expect("generated graph is valid")
}

/// Random graph size with `n ≤ max_n` and `m ≤ max_m`.
pub fn sized_graph<R: Rng>(rng: &mut R, min_n: usize, max_n: usize, max_m: usize) -> OrientedGraph {
    let n = rng.gen_range(min_n..=max_n);
    let hi = max_m.min(n * (n - 1) / 2).max(n - 1);
    let m = rng.gen_range(n - 1..=hi);
    connected_graph(rng, n, m)
}

/// Balanced integer injections in `[-max, max]`.
pub fn balanced_injections<R: Rng>(rng: &mut R, n: usize, max: i64) -> Vec<i64> {
    let mut f: Vec<i64> = (0..n).map(|_| rng.gen_range(-max..=max)).collect();
    let sum: i64 = f.iter().sum();
    let k = rng.gen_range(0..n);
    f[k] -= sum;
    f
}

/// Balanced real injections.
pub fn balanced_injections_f64<R: Rng>(rng: &mut R, n: usize, max: f64) -> Vec<f64> {
    let mut f: Vec<f64> = (0..n).map(|_| rng.gen_range(-max..=max)).collect();
    let mean = f.iter().sum::<f64>() / n as f64;
    for v in &mut f {
        *v -= mean;
    }
    f
}

/// Strictly convex quadratic-cost flow problem, feasible by construction:
/// the boxes are drawn around a flow that satisfies conservation.
pub fn flow_problem<R: Rng>(rng: &mut R, max_n: usize, max_m: usize) -> FlowProblem {
    let g = sized_graph(rng, 2, max_n, max_m);
    let n = g.node_count();
    let f = balanced_injections_f64(rng, n, 5.0);
    let elems = ElementarySolutionSet::all(&g, NodeId(n - 1)).expect("connected");
    let x0 = particular_solution(&elems, &f).expect("balanced");
    let lower = x0.iter().map(|x| x - rng.gen_range(0.2..3.0)).collect();
    let upper = x0.iter().map(|x| x + rng.gen_range(0.2..3.0)).collect();
    let costs = (0..g.arc_count())
        .map(|_| QuadraticCost::new(rng.gen_range(0.1..2.0), rng.gen_range(-2.0..2.0)))
        .collect();
    FlowProblem::new(g, lower, upper, costs, f).expect("generated problem is valid")
}

/// OPF instance with generators able to cover every load and wide line
/// limits, so it is always feasible.
pub fn opf_problem<R: Rng>(rng: &mut R, max_n: usize, max_horizon: usize) -> OpfProblem {
    let g = sized_graph(rng, 2, max_n, max_n * (max_n - 1) / 2);
    let n = g.node_count();
    let horizon = rng.gen_range(1..=max_horizon);
    let loads: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..horizon).map(|_| -rng.gen_range(0.0..4.0)).collect())
        .collect();
    let peak: f64 = (0..horizon)
        .map(|t| loads.iter().map(|l| -l[t]).sum::<f64>())
        .fold(0.0, f64::max);
    let big = rng.gen_range(0..n);
    let buses = loads
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            let has_gen = i == big || rng.gen_bool(0.5);
            let has_storage = rng.gen_bool(0.5);
            let cap = if i == big {
                peak + 1.0
            } else {
                rng.gen_range(0.5..3.0)
            };
            let smax = rng.gen_range(0.5..3.0);
            let rate = rng.gen_range(0.2..1.5);
            Bus {
                generation_cost: QuadraticCost::new(
                    rng.gen_range(0.1..2.0),
                    rng.gen_range(0.0..1.0),
                ),
                generation: if has_gen {
                    Bounds::new(0.0, cap)
                } else {
                    Bounds::ZERO
                },
                storage: if has_storage {
                    Bounds::new(0.0, smax)
                } else {
                    Bounds::ZERO
                },
                charge: if has_storage {
                    Bounds::new(-rate, rate)
                } else {
                    Bounds::ZERO
                },
                dissipation: if has_storage {
                    rng.gen_range(0.7..=1.0)
                } else {
                    1.0
                },
                initial_storage: if has_storage {
                    rng.gen_range(0.0..smax)
                } else {
                    0.0
                },
                loads: l,
            }
        })
        .collect();
    let limit = 2.0 * (peak + 3.0 * n as f64) + 1.0;
    let lines = (0..g.arc_count())
        .map(|_| Line {
            susceptance: rng.gen_range(1.0..5.0),
            flow: Bounds::new(-limit, limit),
            cost: QuadraticCost::new(rng.gen_range(0.0..0.5), 0.0),
        })
        .collect();
    OpfProblem::new(g, horizon, buses, lines, None).expect("generated problem is valid")
}
