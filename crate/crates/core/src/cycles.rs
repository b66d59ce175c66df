//! Oriented cycle bases: the spanning-tree fundamental basis and the Horton
//! minimum-weight basis, plus an exact certificate against the incidence
//! matrix.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{ArcId, GraphError, IncidenceMatrix, NodeId, OrientedGraph, SpanningTree};
use crate::linalg::{gf2_rank, rational_rank, Gf2Basis, Gf2Row};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("entries must be -1, 0 or +1 (row {row}, column {col})")]
    BadEntry { row: usize, col: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisMethod {
    #[serde(rename = "tree")]
    SpanningTree,
    Horton,
    /// Loaded from a file without provenance.
    External,
}

/// A signed cycle vector over the arcs of a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrientedCycle {
    pub entries: Vec<i8>,
    /// Arcs with a nonzero entry, ascending.
    pub arcs: Vec<ArcId>,
    /// The non-tree arc that generated the cycle (tree bases only).
    pub defining_arc: Option<ArcId>,
}

impl OrientedCycle {
    fn from_entries(entries: Vec<i8>, defining_arc: Option<ArcId>) -> Self {
        let arcs = entries
            .iter()
            .enumerate()
            .filter(|(_, e)| **e != 0)
            .map(|(j, _)| ArcId(j))
            .collect();
        Self {
            entries,
            arcs,
            defining_arc,
        }
    }

    pub fn weight(&self, g: &OrientedGraph) -> f64 {
        self.arcs.iter().map(|a| g.arc(*a).weight).sum()
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleBasis {
    pub cycles: Vec<OrientedCycle>,
    pub arc_count: usize,
    pub method: BasisMethod,
}

impl CycleBasis {
    pub fn mu(&self) -> usize {
        self.cycles.len()
    }

    /// The μ×m oriented cycle matrix, rows are cycles.
    pub fn matrix(&self) -> Vec<Vec<i8>> {
        self.cycles.iter().map(|c| c.entries.clone()).collect()
    }

    pub fn entry(&self, cycle: usize, arc: usize) -> i8 {
        self.cycles[cycle].entries[arc]
    }

    pub fn total_weight(&self, g: &OrientedGraph) -> f64 {
        self.cycles.iter().map(|c| c.weight(g)).sum()
    }

    /// Builds a basis from raw matrix rows (e.g. a basis file).
    pub fn from_rows(
        rows: Vec<Vec<i8>>,
        arc_count: usize,
        defining_arcs: Option<Vec<Option<ArcId>>>,
        method: BasisMethod,
    ) -> Result<Self, BasisError> {
        for (i, r) in rows.iter().enumerate() {
            if r.len() != arc_count {
                return Err(BasisError::ShapeMismatch(format!(
                    "row {i} has {} entries, expected {arc_count}",
                    r.len()
                )));
            }
            if let Some(col) = r.iter().position(|e| !(-1..=1).contains(e)) {
                return Err(BasisError::BadEntry { row: i, col });
            }
        }
        let defs = defining_arcs.unwrap_or_else(|| vec![None; rows.len()]);
        if defs.len() != rows.len() {
            return Err(BasisError::ShapeMismatch("defining arc list length".into()));
        }
        Ok(Self {
            cycles: rows
                .into_iter()
                .zip(defs)
                .map(|(r, d)| OrientedCycle::from_entries(r, d))
                .collect(),
            arc_count,
            method,
        })
    }

    /// `Bᵀ z`: arc flows induced by cycle flows.
    pub fn lift_cycle_flows(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.mu());
        let mut x = vec![0.0; self.arc_count];
        for (c, &zc) in self.cycles.iter().zip(z) {
            for a in &c.arcs {
                x[a.0] += f64::from(c.entries[a.0]) * zc;
            }
        }
        x
    }

    /// Cycles (by index) that contain each arc.
    pub fn arc_membership(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.arc_count];
        for (i, c) in self.cycles.iter().enumerate() {
            for a in &c.arcs {
                out[a.0].push(i);
            }
        }
        out
    }
}

/// Fundamental cycle basis of a spanning tree: one cycle per non-tree arc,
/// the defining arc carrying +1 and the tree path signed by traversal.
pub fn fundamental_basis(g: &OrientedGraph, tree: &SpanningTree) -> Result<CycleBasis, BasisError> {
    if tree.arc_count_of_graph() != g.arc_count() || tree.parent.len() != g.node_count() {
        return Err(GraphError::InvalidTree("tree belongs to a different graph".into()).into());
    }
    let m = g.arc_count();
    let mut cycles = Vec::with_capacity(g.cycle_rank());
    for (j, arc) in g.arcs().iter().enumerate() {
        if tree.contains(ArcId(j)) {
            continue;
        }
        let mut entries = vec![0i8; m];
        entries[j] = 1;
        for step in tree.path(g, arc.head, arc.tail) {
            entries[step.arc.0] = step.sign();
        }
        cycles.push(OrientedCycle::from_entries(entries, Some(ArcId(j))));
    }
    Ok(CycleBasis {
        cycles,
        arc_count: m,
        method: BasisMethod::SpanningTree,
    })
}

/// Convenience: BFS tree rooted at node 0, then its fundamental basis.
pub fn tree_basis(g: &OrientedGraph) -> Result<CycleBasis, BasisError> {
    let tree = g.spanning_tree(NodeId(0))?;
    fundamental_basis(g, &tree)
}

struct Candidate {
    weight: f64,
    arcs: Vec<usize>,
}

/// Horton minimum-weight cycle basis using the stored arc weights.
///
/// Candidates are `P(v,x) + (x,y) + P(y,v)` over every node `v` and arc
/// `(x,y)`, with `P` taken from the Dijkstra tree of `v`. Non-simple
/// candidates are dropped, duplicates merged by arc set, and independent
/// cycles picked greedily over GF(2) in ascending `(weight, arc set)` order.
pub fn horton_basis(g: &OrientedGraph) -> Result<CycleBasis, BasisError> {
    if !g.is_connected() {
        return Err(GraphError::NotConnected.into());
    }
    let m = g.arc_count();
    let mu = g.cycle_rank();
    let per_root: Vec<Vec<Candidate>> = (0..g.node_count())
        .into_par_iter()
        .map(|v| horton_candidates(g, NodeId(v)))
        .collect::<Result<_, _>>()?;

    let mut unique: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for c in per_root.into_iter().flatten() {
        unique
            .entry(c.arcs)
            .and_modify(|w| *w = w.min(c.weight))
            .or_insert(c.weight);
    }
    let mut ordered: Vec<(f64, Vec<usize>)> = unique.into_iter().map(|(k, w)| (w, k)).collect();
    ordered.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

    let mut gf2 = Gf2Basis::new(m);
    let mut cycles = Vec::with_capacity(mu);
    for (_, arcs) in ordered {
        if cycles.len() == mu {
            break;
        }
        if gf2.insert(Gf2Row::from_support(m, &arcs)) {
            let ids: Vec<ArcId> = arcs.iter().map(|&a| ArcId(a)).collect();
            cycles.push(OrientedCycle::from_entries(orient_cycle(g, &ids), None));
        }
    }
    debug_assert_eq!(cycles.len(), mu);
    Ok(CycleBasis {
        cycles,
        arc_count: m,
        method: BasisMethod::Horton,
    })
}

fn horton_candidates(g: &OrientedGraph, root: NodeId) -> Result<Vec<Candidate>, GraphError> {
    let spt = g.shortest_path_tree(root, None)?;
    let n = g.node_count();
    let mut out = Vec::new();
    let mut mark = vec![false; n];
    for (j, arc) in g.arcs().iter().enumerate() {
        let (x, y) = (arc.tail, arc.head);
        if spt.pred[x.0] == Some(ArcId(j)) || spt.pred[y.0] == Some(ArcId(j)) {
            continue;
        }
        let px = spt.nodes_to_root(x);
        let py = spt.nodes_to_root(y);
        for v in &px {
            mark[v.0] = true;
        }
        let simple = py.iter().all(|v| *v == root || !mark[v.0]);
        for v in &px {
            mark[v.0] = false;
        }
        if !simple {
            continue;
        }
        let mut arcs: Vec<usize> = Vec::with_capacity(px.len() + py.len());
        for node in [x, y] {
            let mut cur = node;
            while let Some(a) = spt.pred[cur.0] {
                arcs.push(a.0);
                cur = g.arc(a).other(cur);
            }
        }
        arcs.push(j);
        arcs.sort_unstable();
        let weight = spt.dist[x.0] + spt.dist[y.0] + arc.weight;
        out.push(Candidate { weight, arcs });
    }
    Ok(out)
}

/// Signs for a simple cycle given by its arc set: the lowest arc is +1 and
/// the others follow the traversal that starts along it.
fn orient_cycle(g: &OrientedGraph, arcs: &[ArcId]) -> Vec<i8> {
    let mut entries = vec![0i8; g.arc_count()];
    let first = *arcs.iter().min().expect("cycle has arcs");
    let mut by_node: BTreeMap<NodeId, Vec<ArcId>> = BTreeMap::new();
    for &a in arcs {
        let arc = g.arc(a);
        by_node.entry(arc.tail).or_default().push(a);
        by_node.entry(arc.head).or_default().push(a);
    }
    let start = g.arc(first).tail;
    entries[first.0] = 1;
    let mut cur = g.arc(first).head;
    let mut prev = first;
    while cur != start {
        let next = *by_node[&cur]
            .iter()
            .find(|&&a| a != prev)
            .expect("simple cycle: every node has degree 2");
        let arc = g.arc(next);
        entries[next.0] = if arc.tail == cur { 1 } else { -1 };
        cur = arc.other(cur);
        prev = next;
    }
    entries
}

/// Exact certificate for a candidate basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisCertificate {
    /// `I · Bᵀ = 0` in integer arithmetic.
    pub orthogonality: bool,
    /// Rank equals μ = m - n + 1 over GF(2) and over the rationals.
    pub rank_ok: bool,
}

impl BasisCertificate {
    pub fn is_valid(&self) -> bool {
        self.orthogonality && self.rank_ok
    }
}

pub fn verify_basis(
    basis: &CycleBasis,
    inc: &IncidenceMatrix,
) -> Result<BasisCertificate, BasisError> {
    if basis.arc_count != inc.cols() {
        return Err(BasisError::ShapeMismatch(format!(
            "basis has {} columns, incidence has {}",
            basis.arc_count,
            inc.cols()
        )));
    }
    let rows: Vec<Vec<i64>> = basis
        .cycles
        .iter()
        .map(|c| c.entries.iter().map(|&e| i64::from(e)).collect())
        .collect();
    let orthogonality = rows.iter().all(|r| inc.mul(r).iter().all(|&v| v == 0));
    let mu = (inc.cols() + 1).saturating_sub(inc.rows());
    let supports: Vec<Vec<usize>> = basis
        .cycles
        .iter()
        .map(|c| c.arcs.iter().map(|a| a.0).collect())
        .collect();
    let rank_ok =
        rows.len() == mu && gf2_rank(&supports, inc.cols()) == mu && rational_rank(&rows) == mu;
    Ok(BasisCertificate {
        orthogonality,
        rank_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> OrientedGraph {
        OrientedGraph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn triangle_fundamental_cycle() {
        let g = triangle();
        let tree = SpanningTree::from_arcs(&g, NodeId(0), &[ArcId(0), ArcId(1)]).unwrap();
        let b = fundamental_basis(&g, &tree).unwrap();
        assert_eq!(b.matrix(), vec![vec![-1, -1, 1]]);
        assert_eq!(b.cycles[0].defining_arc, Some(ArcId(2)));
        let cert = verify_basis(&b, &g.incidence()).unwrap();
        assert!(cert.is_valid());
    }

    #[test]
    fn tree_graph_has_empty_basis() {
        let g = OrientedGraph::new(4, &[(0, 1), (1, 2), (1, 3)]).unwrap();
        let b = tree_basis(&g).unwrap();
        assert_eq!(b.mu(), 0);
        assert!(verify_basis(&b, &g.incidence()).unwrap().is_valid());
        assert_eq!(horton_basis(&g).unwrap().mu(), 0);
    }

    #[test]
    fn horton_triangle() {
        let g = triangle();
        let b = horton_basis(&g).unwrap();
        assert_eq!(b.mu(), 1);
        assert_eq!(b.total_weight(&g), 3.0);
        // lowest arc e1 is +1: v1 -> v2 -> v3 -> v1
        assert_eq!(b.matrix(), vec![vec![1, 1, -1]]);
    }

    #[test]
    fn horton_two_triangles_skips_outer_cycle() {
        // 0-1-2 and 0-2-3 share arc (0,2)
        let g = OrientedGraph::new(4, &[(0, 1), (1, 2), (0, 2), (2, 3), (0, 3)]).unwrap();
        let b = horton_basis(&g).unwrap();
        assert_eq!(b.mu(), 2);
        for c in &b.cycles {
            assert_eq!(c.len(), 3);
            assert!(c.arcs.contains(&ArcId(2)));
        }
        assert!(verify_basis(&b, &g.incidence()).unwrap().is_valid());
    }

    #[test]
    fn parallel_arcs_form_two_cycles() {
        let g = OrientedGraph::new(2, &[(0, 1), (0, 1)]).unwrap();
        for b in [tree_basis(&g).unwrap(), horton_basis(&g).unwrap()] {
            assert_eq!(b.mu(), 1);
            assert_eq!(b.cycles[0].len(), 2);
            assert!(verify_basis(&b, &g.incidence()).unwrap().is_valid());
        }
    }

    #[test]
    fn duplicated_row_fails_rank() {
        let g = OrientedGraph::new(4, &[(0, 1), (1, 2), (0, 2), (2, 3), (0, 3)]).unwrap();
        let mut b = tree_basis(&g).unwrap();
        b.cycles[1] = b.cycles[0].clone();
        let cert = verify_basis(&b, &g.incidence()).unwrap();
        assert!(cert.orthogonality);
        assert!(!cert.rank_ok);
    }

    #[test]
    fn flipped_sign_on_shared_arc_breaks_orthogonality() {
        let g = OrientedGraph::new(4, &[(0, 1), (1, 2), (0, 2), (2, 3), (0, 3)]).unwrap();
        let mut b = horton_basis(&g).unwrap();
        b.cycles[0].entries[2] = -b.cycles[0].entries[2];
        let cert = verify_basis(&b, &g.incidence()).unwrap();
        assert!(!cert.orthogonality);
        // support unchanged, so the GF(2) rank still holds; the signed rank
        // check also passes for this particular flip
        assert!(!cert.is_valid());
    }

    #[test]
    fn shape_mismatch() {
        let g = triangle();
        let b = CycleBasis::from_rows(vec![vec![1, 1]], 2, None, BasisMethod::External).unwrap();
        assert!(matches!(
            verify_basis(&b, &g.incidence()),
            Err(BasisError::ShapeMismatch(_))
        ));
        assert!(
            CycleBasis::from_rows(vec![vec![2, 0, 0]], 3, None, BasisMethod::External).is_err()
        );
    }

    #[test]
    fn lift_matches_matrix_transpose() {
        let g = triangle();
        let b = tree_basis(&g).unwrap();
        let x = b.lift_cycle_flows(&[2.5]);
        let expected: Vec<f64> = b.cycles[0]
            .entries
            .iter()
            .map(|&e| 2.5 * f64::from(e))
            .collect();
        assert_eq!(x, expected);
    }
}
