//! Edmonds-Karp maximum flow on an oriented graph whose arcs may carry flow
//! in both directions, with a saturated-cut certificate.

use std::collections::VecDeque;

use thiserror::Error;

use crate::graph::{NodeId, OrientedGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaxFlowError {
    #[error("capacity vector has length {got}, expected {expected}")]
    CapacityLength { got: usize, expected: usize },
    #[error("capacities must be nonnegative")]
    NegativeCapacity,
    #[error("node {0} is both a source and a sink")]
    SourceIsSink(NodeId),
    #[error("node {0} is out of range")]
    BadNode(NodeId),
    #[error("unbounded flow: a source reaches a sink through infinite capacities")]
    Unbounded,
}

/// Capacity of an arc along (`forward`) and against (`backward`) its
/// orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcCapacity {
    pub forward: f64,
    pub backward: f64,
}

impl ArcCapacity {
    pub fn symmetric(c: f64) -> Self {
        Self {
            forward: c,
            backward: c,
        }
    }

    /// Capacity implied by a flow box `lower ≤ x ≤ upper` with `lower ≤ 0 ≤ upper`.
    pub fn from_box(lower: f64, upper: f64) -> Self {
        Self {
            forward: upper.max(0.0),
            backward: (-lower).max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxFlowResult {
    pub value: f64,
    /// Net flow on each arc, positive along its orientation.
    pub arc_flows: Vec<f64>,
    /// Nodes on the source side of the certified minimum cut.
    pub source_side: Vec<bool>,
    pub cut_capacity: f64,
}

struct Network {
    head: Vec<usize>,
    cap: Vec<f64>,
    flow: Vec<f64>,
    adj: Vec<Vec<usize>>,
}

impl Network {
    fn new(nodes: usize) -> Self {
        Self {
            head: Vec::new(),
            cap: Vec::new(),
            flow: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    // Adds the pair u->v (cap_uv) and v->u (cap_vu); returns the forward edge id.
    fn add_pair(&mut self, u: usize, v: usize, cap_uv: f64, cap_vu: f64) -> usize {
        let e = self.head.len();
        self.head.extend([v, u]);
        self.cap.extend([cap_uv, cap_vu]);
        self.flow.extend([0.0, 0.0]);
        self.adj[u].push(e);
        self.adj[v].push(e + 1);
        e
    }

    fn residual(&self, e: usize) -> f64 {
        self.cap[e] - self.flow[e]
    }

    fn bfs(&self, s: usize) -> Vec<Option<usize>> {
        let mut pred = vec![None; self.adj.len()];
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &e in &self.adj[u] {
                let v = self.head[e];
                if !seen[v] && self.residual(e) > 0.0 {
                    seen[v] = true;
                    pred[v] = Some(e);
                    q.push_back(v);
                }
            }
        }
        pred
    }

    fn reachable(&self, s: usize) -> Vec<bool> {
        let pred = self.bfs(s);
        (0..self.adj.len())
            .map(|v| v == s || pred[v].is_some())
            .collect()
    }

    fn run(&mut self, s: usize, t: usize) -> Result<f64, MaxFlowError> {
        let mut total = 0.0;
        loop {
            let pred = self.bfs(s);
            if pred[t].is_none() {
                return Ok(total);
            }
            let mut bottleneck = f64::INFINITY;
            let mut v = t;
            while v != s {
                let e = pred[v].unwrap();
                bottleneck = bottleneck.min(self.residual(e));
                v = self.head[e ^ 1];
            }
            if !bottleneck.is_finite() {
                return Err(MaxFlowError::Unbounded);
            }
            let mut v = t;
            while v != s {
                let e = pred[v].unwrap();
                self.flow[e] += bottleneck;
                self.flow[e ^ 1] -= bottleneck;
                v = self.head[e ^ 1];
            }
            total += bottleneck;
        }
    }
}

/// Maximum total flow from `sources` to `sinks` (unbounded terminals).
pub fn max_flow(
    g: &OrientedGraph,
    sources: &[NodeId],
    sinks: &[NodeId],
    caps: &[ArcCapacity],
) -> Result<MaxFlowResult, MaxFlowError> {
    let sup: Vec<_> = sources.iter().map(|&v| (v, f64::INFINITY)).collect();
    let dem: Vec<_> = sinks.iter().map(|&v| (v, f64::INFINITY)).collect();
    max_flow_with_terminals(g, &sup, &dem, caps)
}

/// Maximum flow where each source `(v, s)` may inject at most `s` and each
/// sink `(v, d)` may absorb at most `d`.
pub fn max_flow_with_terminals(
    g: &OrientedGraph,
    supplies: &[(NodeId, f64)],
    demands: &[(NodeId, f64)],
    caps: &[ArcCapacity],
) -> Result<MaxFlowResult, MaxFlowError> {
    let n = g.node_count();
    let m = g.arc_count();
    if caps.len() != m {
        return Err(MaxFlowError::CapacityLength {
            got: caps.len(),
            expected: m,
        });
    }
    if caps
        .iter()
        .any(|c| c.forward.is_nan() || c.backward.is_nan() || c.forward < 0.0 || c.backward < 0.0)
    {
        return Err(MaxFlowError::NegativeCapacity);
    }
    for &(v, amount) in supplies.iter().chain(demands) {
        if v.0 >= n {
            return Err(MaxFlowError::BadNode(v));
        }
        if amount.is_nan() || amount < 0.0 {
            return Err(MaxFlowError::NegativeCapacity);
        }
    }
    if let Some(&(v, _)) = supplies
        .iter()
        .find(|(v, _)| demands.iter().any(|(w, _)| w == v))
    {
        return Err(MaxFlowError::SourceIsSink(v));
    }
    let (s, t) = (n, n + 1);
    let mut net = Network::new(n + 2);
    for (a, c) in g.arcs().iter().zip(caps) {
        net.add_pair(a.tail.0, a.head.0, c.forward, c.backward);
    }
    for &(v, amount) in supplies {
        net.add_pair(s, v.0, amount, 0.0);
    }
    for &(v, amount) in demands {
        net.add_pair(v.0, t, amount, 0.0);
    }
    let value = net.run(s, t)?;
    let reach = net.reachable(s);
    let cut_capacity: f64 = (0..net.head.len())
        .filter(|&e| reach[net.head[e ^ 1]] && !reach[net.head[e]])
        .map(|e| net.cap[e])
        .sum();
    Ok(MaxFlowResult {
        value,
        arc_flows: (0..m).map(|j| net.flow[2 * j]).collect(),
        source_side: reach[..n].to_vec(),
        cut_capacity,
    })
}

/// True iff injections `f` are routable through arcs boxed by
/// `lower ≤ x ≤ upper`.
///
/// Each box is shifted to a one-directional capacity (`x = lower + x'`, or
/// `x = upper - x'` when only the upper bound is finite) and the shift moved
/// into the injections; the instance is feasible iff the resulting max flow
/// saturates every source.
pub fn capacity_feasible(
    g: &OrientedGraph,
    lower: &[f64],
    upper: &[f64],
    injections: &[f64],
) -> Result<bool, MaxFlowError> {
    let m = g.arc_count();
    if lower.len() != m || upper.len() != m {
        return Err(MaxFlowError::CapacityLength {
            got: lower.len().min(upper.len()),
            expected: m,
        });
    }
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Ok(false);
    }
    let mut f = injections.to_vec();
    let mut caps = Vec::with_capacity(m);
    for (a, (&lo, &hi)) in g.arcs().iter().zip(lower.iter().zip(upper)) {
        let shift = if lo.is_finite() {
            caps.push(ArcCapacity {
                forward: hi - lo,
                backward: 0.0,
            });
            lo
        } else if hi.is_finite() {
            caps.push(ArcCapacity {
                forward: 0.0,
                backward: f64::INFINITY,
            });
            hi
        } else {
            caps.push(ArcCapacity::symmetric(f64::INFINITY));
            0.0
        };
        f[a.tail.0] -= shift;
        f[a.head.0] += shift;
    }
    let supplies: Vec<_> = f
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, v)| (NodeId(i), *v))
        .collect();
    let demands: Vec<_> = f
        .iter()
        .enumerate()
        .filter(|(_, v)| **v < 0.0)
        .map(|(i, v)| (NodeId(i), -*v))
        .collect();
    let need: f64 = supplies.iter().map(|(_, v)| v).sum();
    let absorb: f64 = demands.iter().map(|(_, v)| v).sum();
    let scale = need.max(absorb).max(1.0);
    if (need - absorb).abs() > 1e-9 * scale {
        return Ok(false);
    }
    let res = max_flow_with_terminals(g, &supplies, &demands, &caps)?;
    Ok(res.value >= need - 1e-9 * scale)
}
