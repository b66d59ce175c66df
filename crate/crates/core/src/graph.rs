//! Oriented physical network: incidence matrix, spanning trees, shortest
//! paths and connectivity predicates.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;

use thiserror::Error;

/// Dense zero-based node index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

/// Dense zero-based arc index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArcId(pub usize);

impl fmt::Display for NodeId {
    // Human output uses 1-based labels (v1, v2, ...).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0 + 1)
    }
}

impl fmt::Display for ArcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0 + 1)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph has no nodes")]
    Empty,
    #[error("arc {arc} references node index {node} but the graph has {n} nodes")]
    NodeOutOfRange { arc: ArcId, node: usize, n: usize },
    #[error("arc {0} is a self-loop")]
    SelfLoop(ArcId),
    #[error("arcs {0} and {1} are symmetric (u,v)/(v,u)")]
    SymmetricArc(ArcId, ArcId),
    #[error("arc {0} has a negative or non-finite weight")]
    BadWeight(ArcId),
    #[error("graph is not connected")]
    NotConnected,
    #[error("node {0} is out of range")]
    BadNode(NodeId),
    #[error("invalid spanning tree: {0}")]
    InvalidTree(String),
    #[error("weight vector has length {got}, expected {expected}")]
    WeightLength { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub tail: NodeId,
    pub head: NodeId,
    pub weight: f64,
}

impl Arc {
    /// The endpoint that is not `node`.
    pub fn other(&self, node: NodeId) -> NodeId {
        if self.tail == node {
            self.head
        } else {
            self.tail
        }
    }
}

/// Oriented graph with a fixed, pre-specified arc orientation.
///
/// Parallel arcs with the same orientation are allowed; symmetric pairs
/// `(u,v)`, `(v,u)` and self-loops are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientedGraph {
    n: usize,
    arcs: Vec<Arc>,
    // adjacency[v] = (arc, neighbour), ascending by arc id
    adjacency: Vec<Vec<(ArcId, NodeId)>>,
}

impl OrientedGraph {
    /// Builds a graph from `(tail, head)` pairs with unit weights.
    pub fn new(n: usize, arcs: &[(usize, usize)]) -> Result<Self, GraphError> {
        Self::with_weights(n, arcs.iter().map(|&(t, h)| (t, h, 1.0)))
    }

    pub fn with_weights(
        n: usize,
        arcs: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut list = Vec::new();
        for (j, (t, h, w)) in arcs.into_iter().enumerate() {
            let id = ArcId(j);
            for node in [t, h] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { arc: id, node, n });
                }
            }
            if t == h {
                return Err(GraphError::SelfLoop(id));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(GraphError::BadWeight(id));
            }
            list.push(Arc {
                tail: NodeId(t),
                head: NodeId(h),
                weight: w,
            });
        }
        let mut seen = std::collections::HashMap::new();
        for (j, a) in list.iter().enumerate() {
            if let Some(&k) = seen.get(&(a.head, a.tail)) {
                return Err(GraphError::SymmetricArc(ArcId(k), ArcId(j)));
            }
            seen.entry((a.tail, a.head)).or_insert(j);
        }
        let mut adjacency = vec![Vec::new(); n];
        for (j, a) in list.iter().enumerate() {
            adjacency[a.tail.0].push((ArcId(j), a.head));
            adjacency[a.head.0].push((ArcId(j), a.tail));
        }
        Ok(Self {
            n,
            arcs: list,
            adjacency,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn arc(&self, id: ArcId) -> &Arc {
        &self.arcs[id.0]
    }

    /// Incident arcs of `v` with the neighbour across each, ascending by arc id.
    pub fn incident(&self, v: NodeId) -> &[(ArcId, NodeId)] {
        &self.adjacency[v.0]
    }

    pub fn weights(&self) -> Vec<f64> {
        self.arcs.iter().map(|a| a.weight).collect()
    }

    /// Dimension of the cycle space, `m - n + 1`, for a connected graph.
    pub fn cycle_rank(&self) -> usize {
        (self.arcs.len() + 1).saturating_sub(self.n)
    }

    fn check_node(&self, v: NodeId) -> Result<(), GraphError> {
        if v.0 < self.n {
            Ok(())
        } else {
            Err(GraphError::BadNode(v))
        }
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &(_, w) in &self.adjacency[v] {
                if !seen[w.0] {
                    seen[w.0] = true;
                    count += 1;
                    stack.push(w.0);
                }
            }
        }
        count == self.n
    }

    /// Connected with no articulation point (and at least 3 nodes, or a
    /// single arc bundle between 2 nodes).
    pub fn is_biconnected(&self) -> bool {
        if !self.is_connected() {
            return false;
        }
        match self.n {
            1 => return false,
            2 => return !self.arcs.is_empty(),
            _ => {}
        }
        self.articulation_points().is_empty()
    }

    /// Articulation points via iterative Hopcroft-Tarjan lowpoints.
    pub fn articulation_points(&self) -> Vec<NodeId> {
        let n = self.n;
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut is_cut = vec![false; n];
        let mut timer = 0;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            let mut root_children = 0;
            // (node, parent arc, next adjacency index)
            let mut stack: Vec<(usize, Option<ArcId>, usize)> = vec![(root, None, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(&mut (v, parent_arc, ref mut idx)) = stack.last_mut() {
                if *idx < self.adjacency[v].len() {
                    let (arc, w) = self.adjacency[v][*idx];
                    *idx += 1;
                    if Some(arc) == parent_arc {
                        continue;
                    }
                    if disc[w.0] == usize::MAX {
                        disc[w.0] = timer;
                        low[w.0] = timer;
                        timer += 1;
                        if v == root {
                            root_children += 1;
                        }
                        stack.push((w.0, Some(arc), 0));
                    } else {
                        low[v] = low[v].min(disc[w.0]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(p, _, _)) = stack.last() {
                        low[p] = low[p].min(low[v]);
                        if p != root && low[v] >= disc[p] {
                            is_cut[p] = true;
                        }
                    }
                }
            }
            if root_children > 1 {
                is_cut[root] = true;
            }
        }
        (0..n).filter(|&v| is_cut[v]).map(NodeId).collect()
    }

    /// Builds the oriented incidence matrix: +1 at the tail, -1 at the head.
    pub fn incidence(&self) -> IncidenceMatrix {
        let mut data = vec![0i8; self.n * self.arcs.len()];
        let m = self.arcs.len();
        for (j, a) in self.arcs.iter().enumerate() {
            data[a.tail.0 * m + j] = 1;
            data[a.head.0 * m + j] = -1;
        }
        IncidenceMatrix {
            rows: self.n,
            cols: m,
            data,
        }
    }

    /// Breadth-first spanning tree from `root`; ties resolved by ascending arc id.
    pub fn spanning_tree(&self, root: NodeId) -> Result<SpanningTree, GraphError> {
        self.check_node(root)?;
        let mut parent: Vec<Option<(NodeId, ArcId)>> = vec![None; self.n];
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::new();
        seen[root.0] = true;
        queue.push_back(root);
        let mut tree_arcs = Vec::with_capacity(self.n - 1);
        while let Some(v) = queue.pop_front() {
            for &(arc, w) in &self.adjacency[v.0] {
                if !seen[w.0] {
                    seen[w.0] = true;
                    parent[w.0] = Some((v, arc));
                    tree_arcs.push(arc);
                    queue.push_back(w);
                }
            }
        }
        if tree_arcs.len() + 1 != self.n {
            return Err(GraphError::NotConnected);
        }
        tree_arcs.sort();
        Ok(SpanningTree::assemble(self, root, tree_arcs, parent))
    }

    /// Shortest undirected path from `src` to `dst` (Dijkstra; heap ties go to
    /// the lower node id, equal-distance predecessors to the lower node id).
    /// `weights` defaults to the stored arc weights.
    pub fn shortest_path(
        &self,
        src: NodeId,
        dst: NodeId,
        weights: Option<&[f64]>,
    ) -> Result<Path, GraphError> {
        self.check_node(dst)?;
        let tree = self.shortest_path_tree(src, weights)?;
        tree.path_from_root(dst).ok_or(GraphError::NotConnected)
    }

    /// Dijkstra shortest-path tree rooted at `src`.
    pub fn shortest_path_tree(
        &self,
        src: NodeId,
        weights: Option<&[f64]>,
    ) -> Result<ShortestPathTree, GraphError> {
        self.check_node(src)?;
        let owned;
        let w = match weights {
            Some(w) => {
                if w.len() != self.arcs.len() {
                    return Err(GraphError::WeightLength {
                        got: w.len(),
                        expected: self.arcs.len(),
                    });
                }
                if let Some(j) = w.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(GraphError::BadWeight(ArcId(j)));
                }
                w
            }
            None => {
                owned = self.weights();
                &owned[..]
            }
        };
        let mut dist = vec![f64::INFINITY; self.n];
        let mut pred: Vec<Option<ArcId>> = vec![None; self.n];
        let mut done = vec![false; self.n];
        let mut heap = BinaryHeap::new();
        dist[src.0] = 0.0;
        heap.push(HeapEntry {
            dist: 0.0,
            node: src.0,
        });
        while let Some(HeapEntry { dist: d, node: v }) = heap.pop() {
            if done[v] {
                continue;
            }
            done[v] = true;
            for &(arc, u) in &self.adjacency[v] {
                let nd = d + w[arc.0];
                if done[u.0] {
                    continue;
                }
                if nd < dist[u.0] {
                    dist[u.0] = nd;
                    pred[u.0] = Some(arc);
                    heap.push(HeapEntry {
                        dist: nd,
                        node: u.0,
                    });
                } else if nd == dist[u.0] {
                    // equal distance: keep the lower-id predecessor node
                    let cur = pred[u.0].map(|a| self.arcs[a.0].other(u));
                    if cur.is_some_and(|c| v < c.0) {
                        pred[u.0] = Some(arc);
                    }
                }
            }
        }
        Ok(ShortestPathTree {
            root: src,
            dist,
            pred,
            arcs: self.arcs.clone(),
        })
    }
}

#[derive(Debug, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    // Min-heap on (dist, node).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One step of a path: the arc used and whether it was traversed along its
/// orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathStep {
    pub arc: ArcId,
    pub forward: bool,
}

impl PathStep {
    pub fn sign(&self) -> i8 {
        if self.forward {
            1
        } else {
            -1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub source: NodeId,
    pub target: NodeId,
    pub steps: Vec<PathStep>,
    pub weight: f64,
}

impl Path {
    // A root->node path flipped into node->root.
    fn reversed_into_forward(p: Path) -> Path {
        Path {
            source: p.target,
            target: p.source,
            steps: p
                .steps
                .iter()
                .rev()
                .map(|s| PathStep {
                    arc: s.arc,
                    forward: !s.forward,
                })
                .collect(),
            weight: p.weight,
        }
    }

    /// Nodes visited, starting at `source`.
    pub fn nodes(&self, g: &OrientedGraph) -> Vec<NodeId> {
        let mut out = vec![self.source];
        let mut cur = self.source;
        for s in &self.steps {
            cur = g.arc(s.arc).other(cur);
            out.push(cur);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ShortestPathTree {
    pub root: NodeId,
    pub dist: Vec<f64>,
    pub pred: Vec<Option<ArcId>>,
    arcs: Vec<Arc>,
}

impl ShortestPathTree {
    /// Path from `v` to the root, as a sequence of arcs starting at `v`.
    /// Returns `None` when `v` is unreachable.
    pub fn path_to_root(&self, v: NodeId) -> Option<Path> {
        if !self.dist[v.0].is_finite() {
            return None;
        }
        let mut steps = Vec::new();
        let mut cur = v;
        while let Some(arc) = self.pred[cur.0] {
            let a = &self.arcs[arc.0];
            steps.push(PathStep {
                arc,
                forward: a.tail == cur,
            });
            cur = a.other(cur);
        }
        Some(Path {
            source: v,
            target: self.root,
            steps,
            weight: self.dist[v.0],
        })
    }

    /// Path from the root to `v`.
    pub fn path_from_root(&self, v: NodeId) -> Option<Path> {
        self.path_to_root(v).map(Path::reversed_into_forward)
    }

    /// Nodes on the tree path between `v` and the root, `v` first.
    pub fn nodes_to_root(&self, v: NodeId) -> Vec<NodeId> {
        let mut out = vec![v];
        let mut cur = v;
        while let Some(arc) = self.pred[cur.0] {
            cur = self.arcs[arc.0].other(cur);
            out.push(cur);
        }
        out
    }
}

/// Rooted spanning tree.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    pub root: NodeId,
    /// Tree arcs, ascending.
    pub arcs: Vec<ArcId>,
    /// Parent node and connecting arc; `None` at the root.
    pub parent: Vec<Option<(NodeId, ArcId)>>,
    pub depth: Vec<usize>,
    in_tree: Vec<bool>,
}

impl SpanningTree {
    fn assemble(
        g: &OrientedGraph,
        root: NodeId,
        arcs: Vec<ArcId>,
        parent: Vec<Option<(NodeId, ArcId)>>,
    ) -> Self {
        let mut in_tree = vec![false; g.arc_count()];
        for a in &arcs {
            in_tree[a.0] = true;
        }
        let mut depth = vec![usize::MAX; g.node_count()];
        depth[root.0] = 0;
        fn fill(v: usize, parent: &[Option<(NodeId, ArcId)>], depth: &mut [usize]) -> usize {
            if depth[v] != usize::MAX {
                return depth[v];
            }
            let p = parent[v].expect("non-root node has a parent").0 .0;
            let d = fill(p, parent, depth) + 1;
            depth[v] = d;
            d
        }
        for v in 0..g.node_count() {
            fill(v, &parent, &mut depth);
        }
        Self {
            root,
            arcs,
            parent,
            depth,
            in_tree,
        }
    }

    /// Validates an arbitrary arc set as a spanning tree of `g` and roots it.
    pub fn from_arcs(g: &OrientedGraph, root: NodeId, arcs: &[ArcId]) -> Result<Self, GraphError> {
        g.check_node(root)?;
        let n = g.node_count();
        if arcs.len() + 1 != n {
            return Err(GraphError::InvalidTree(format!(
                "expected {} arcs, got {}",
                n - 1,
                arcs.len()
            )));
        }
        let mut member = vec![false; g.arc_count()];
        for a in arcs {
            if a.0 >= g.arc_count() {
                return Err(GraphError::InvalidTree(format!(
                    "arc index {} out of range",
                    a.0
                )));
            }
            if member[a.0] {
                return Err(GraphError::InvalidTree(format!("arc {a} listed twice")));
            }
            member[a.0] = true;
        }
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        seen[root.0] = true;
        let mut queue = VecDeque::from([root]);
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &(arc, w) in g.incident(v) {
                if member[arc.0] && !seen[w.0] {
                    seen[w.0] = true;
                    parent[w.0] = Some((v, arc));
                    reached += 1;
                    queue.push_back(w);
                }
            }
        }
        if reached != n {
            return Err(GraphError::InvalidTree(
                "arcs do not span the graph (cycle or disconnected)".into(),
            ));
        }
        let mut sorted = arcs.to_vec();
        sorted.sort();
        Ok(Self::assemble(g, root, sorted, parent))
    }

    pub fn contains(&self, arc: ArcId) -> bool {
        self.in_tree.get(arc.0).copied().unwrap_or(false)
    }

    pub fn arc_count_of_graph(&self) -> usize {
        self.in_tree.len()
    }

    /// Tree path from `from` to `to` as oriented steps.
    pub fn path(&self, g: &OrientedGraph, from: NodeId, to: NodeId) -> Vec<PathStep> {
        let mut up = Vec::new();
        let mut down = Vec::new();
        let (mut a, mut b) = (from, to);
        while self.depth[a.0] > self.depth[b.0] {
            let (p, arc) = self.parent[a.0].unwrap();
            up.push(PathStep {
                arc,
                forward: g.arc(arc).tail == a,
            });
            a = p;
        }
        while self.depth[b.0] > self.depth[a.0] {
            let (p, arc) = self.parent[b.0].unwrap();
            down.push(PathStep {
                arc,
                forward: g.arc(arc).tail == p,
            });
            b = p;
        }
        while a != b {
            let (pa, arc_a) = self.parent[a.0].unwrap();
            up.push(PathStep {
                arc: arc_a,
                forward: g.arc(arc_a).tail == a,
            });
            a = pa;
            let (pb, arc_b) = self.parent[b.0].unwrap();
            down.push(PathStep {
                arc: arc_b,
                forward: g.arc(arc_b).tail == pb,
            });
            b = pb;
        }
        up.extend(down.into_iter().rev());
        up
    }
}

/// Oriented incidence matrix, row-major, entries in {-1, 0, +1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i8>,
}

impl IncidenceMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<i8>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// `I x` for any numeric vector of length m.
    pub fn mul<T>(&self, x: &[T]) -> Vec<T>
    where
        T: Copy + num_traits::Zero + std::ops::Sub<Output = T> + std::ops::Add<Output = T>,
    {
        assert_eq!(x.len(), self.cols, "incidence multiply shape mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (&e, &v)| match e {
                        1 => acc + v,
                        -1 => acc - v,
                        _ => acc,
                    })
            })
            .collect()
    }
}
