//! Particular solutions by path tracing and the cycle-space reduction of the
//! minimum-cost flow problem.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Sub};

use num_traits::Zero;
use thiserror::Error;

use crate::cycles::{verify_basis, BasisError, CycleBasis};
use crate::graph::{ArcId, GraphError, NodeId, OrientedGraph};
use crate::solver::{
    self, AffineExpr, MaxFlowError, QpBuilder, QpError, QpSpec, SolveReport, SolverParams,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Solver(#[from] QpError),
    #[error(transparent)]
    MaxFlow(#[from] MaxFlowError),
    #[error("injections are unbalanced (sum {0:e})")]
    UnbalancedInjection(f64),
    #[error("no elementary solution for node {0}")]
    MissingElementaryColumn(NodeId),
    #[error("reference node {0} cannot be in the needed set")]
    ReferenceNeeded(NodeId),
    #[error("inputs not certified: {0}")]
    UncertifiedInputs(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(
        "arc {0} cannot satisfy its capacity box: its flow is fixed by the particular solution"
    )]
    FixedArcInfeasible(ArcId),
}

/// Convex quadratic arc cost `quadratic·x² + linear·x`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadraticCost {
    pub quadratic: f64,
    pub linear: f64,
}

impl QuadraticCost {
    pub fn new(quadratic: f64, linear: f64) -> Self {
        Self { quadratic, linear }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.quadratic * x * x + self.linear * x
    }
}

/// Numbers that injections and particular solutions can be expressed in.
pub trait FlowValue:
    Copy + Zero + PartialEq + From<i8> + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self>
{
    /// Balance test: exact for integers, scaled tolerance for floats.
    fn is_balanced(values: &[Self]) -> bool;
    fn to_f64(self) -> f64;
}

impl FlowValue for i64 {
    fn is_balanced(values: &[Self]) -> bool {
        values.iter().sum::<i64>() == 0
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl FlowValue for f64 {
    fn is_balanced(values: &[Self]) -> bool {
        let sum: f64 = values.iter().sum();
        let l1: f64 = values.iter().map(|v| v.abs()).sum();
        sum.abs() <= 1e-9 * l1
    }

    fn to_f64(self) -> f64 {
        self
    }
}

/// Minimum-cost flow problem over an oriented graph.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowProblem {
    pub graph: OrientedGraph,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub costs: Vec<QuadraticCost>,
    pub injections: Vec<f64>,
}

impl FlowProblem {
    pub fn new(
        graph: OrientedGraph,
        lower: Vec<f64>,
        upper: Vec<f64>,
        costs: Vec<QuadraticCost>,
        injections: Vec<f64>,
    ) -> Result<Self, ReductionError> {
        let p = Self {
            graph,
            lower,
            upper,
            costs,
            injections,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ReductionError> {
        let m = self.graph.arc_count();
        let n = self.graph.node_count();
        if self.lower.len() != m || self.upper.len() != m || self.costs.len() != m {
            return Err(ReductionError::ShapeMismatch(format!(
                "arc data must have {m} entries"
            )));
        }
        if self.injections.len() != n {
            return Err(ReductionError::ShapeMismatch(format!(
                "injections must have {n} entries"
            )));
        }
        for j in 0..m {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(ReductionError::Invalid(format!(
                    "arc {} has lower bound above upper bound",
                    ArcId(j)
                )));
            }
            let c = self.costs[j];
            if !(c.quadratic.is_finite() && c.quadratic >= 0.0 && c.linear.is_finite()) {
                return Err(ReductionError::Invalid(format!(
                    "arc {} cost must be convex with finite coefficients",
                    ArcId(j)
                )));
            }
        }
        if self.injections.iter().any(|v| !v.is_finite()) {
            return Err(ReductionError::Invalid("injections must be finite".into()));
        }
        if !f64::is_balanced(&self.injections) {
            return Err(ReductionError::UnbalancedInjection(
                self.injections.iter().sum(),
            ));
        }
        Ok(())
    }

    pub fn with_injections(&self, injections: Vec<f64>) -> Result<Self, ReductionError> {
        Self::new(
            self.graph.clone(),
            self.lower.clone(),
            self.upper.clone(),
            self.costs.clone(),
            injections,
        )
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.costs.iter().zip(x).map(|(c, &v)| c.eval(v)).sum()
    }

    /// Nodes with nonzero injection.
    pub fn terminals(&self) -> Vec<NodeId> {
        self.injections
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| NodeId(i))
            .collect()
    }

    /// Pre-solve guard: are the injections routable within the capacity box?
    pub fn check_capacity_feasibility(&self) -> Result<bool, ReductionError> {
        Ok(solver::capacity_feasible(
            &self.graph,
            &self.lower,
            &self.upper,
            &self.injections,
        )?)
    }

    /// The problem in arc space with explicit conservation rows.
    pub fn to_qp(&self) -> QpSpec {
        let m = self.graph.arc_count();
        let mut b = QpBuilder::new(m);
        for (j, c) in self.costs.iter().enumerate() {
            b.add_quadratic_term(&AffineExpr::var(j), c.quadratic, c.linear, 1.0);
        }
        let inc = self.graph.incidence();
        for i in 0..self.graph.node_count() {
            let mut e = AffineExpr::new();
            for (j, &v) in inc.row(i).iter().enumerate() {
                e.add_term(j, f64::from(v));
            }
            b.add_equality(e, self.injections[i]);
        }
        for j in 0..m {
            b.add_bounds(j, self.lower[j], self.upper[j]);
        }
        b.build()
    }

    /// Solves the full arc-space problem.
    pub fn solve_full(&self, params: &SolverParams) -> Result<FlowSolution, ReductionError> {
        let sol = solver::solve_qp(&self.to_qp(), params)?;
        Ok(FlowSolution {
            objective: self.objective(&sol.x),
            flows: sol.x,
            cycle_flows: None,
            report: sol.report,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub flows: Vec<f64>,
    pub cycle_flows: Option<Vec<f64>>,
    pub objective: f64,
    pub report: SolveReport,
}

/// Unit path flows from selected nodes to a common reference node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementarySolutionSet {
    pub reference: NodeId,
    pub arc_count: usize,
    pub columns: BTreeMap<NodeId, Vec<i8>>,
}

impl ElementarySolutionSet {
    /// Columns for every non-reference node.
    pub fn all(g: &OrientedGraph, reference: NodeId) -> Result<Self, ReductionError> {
        let needed: Vec<NodeId> = (0..g.node_count())
            .map(NodeId)
            .filter(|&v| v != reference)
            .collect();
        elementary_solutions(g, reference, &needed)
    }

    pub fn column(&self, v: NodeId) -> Option<&[i8]> {
        self.columns.get(&v).map(|c| c.as_slice())
    }
}

/// Default reference node: the highest-index node.
pub fn default_reference(g: &OrientedGraph) -> NodeId {
    NodeId(g.node_count() - 1)
}

/// Traces a unit flow from each needed node to `reference` along a fewest-arc
/// path; entries are +1 along the arc orientation and -1 against it.
pub fn elementary_solutions(
    g: &OrientedGraph,
    reference: NodeId,
    needed: &[NodeId],
) -> Result<ElementarySolutionSet, ReductionError> {
    if reference.0 >= g.node_count() {
        return Err(GraphError::BadNode(reference).into());
    }
    if needed.contains(&reference) {
        return Err(ReductionError::ReferenceNeeded(reference));
    }
    if !g.is_connected() {
        return Err(GraphError::NotConnected.into());
    }
    let unit = vec![1.0; g.arc_count()];
    let mut columns = BTreeMap::new();
    for &v in needed {
        let path = g.shortest_path(v, reference, Some(&unit))?;
        let mut col = vec![0i8; g.arc_count()];
        for s in &path.steps {
            col[s.arc.0] = s.sign();
        }
        columns.insert(v, col);
    }
    Ok(ElementarySolutionSet {
        reference,
        arc_count: g.arc_count(),
        columns,
    })
}

/// Superposes elementary columns: `xᵖ = Σ_{i ≠ ref} f_i x̄^{p,v_i}`.
pub fn particular_solution<T: FlowValue>(
    elems: &ElementarySolutionSet,
    f: &[T],
) -> Result<Vec<T>, ReductionError> {
    if !T::is_balanced(f) {
        let sum: f64 = f.iter().map(|v| v.to_f64()).sum();
        return Err(ReductionError::UnbalancedInjection(sum));
    }
    let mut x = vec![T::zero(); elems.arc_count];
    for (i, &fi) in f.iter().enumerate() {
        let v = NodeId(i);
        if v == elems.reference || fi == T::zero() {
            continue;
        }
        let col = elems
            .column(v)
            .ok_or(ReductionError::MissingElementaryColumn(v))?;
        for (xj, &c) in x.iter_mut().zip(col) {
            if c != 0 {
                *xj = *xj + fi * T::from(c);
            }
        }
    }
    Ok(x)
}

/// `x = Bᵀ z + xᵖ`.
pub fn lift(z: &[f64], basis: &CycleBasis, xp: &[f64]) -> Result<Vec<f64>, ReductionError> {
    if z.len() != basis.mu() || xp.len() != basis.arc_count {
        return Err(ReductionError::ShapeMismatch(format!(
            "z has {} entries (mu = {}), xp has {} (m = {})",
            z.len(),
            basis.mu(),
            xp.len(),
            basis.arc_count
        )));
    }
    let mut x = basis.lift_cycle_flows(z);
    for (a, b) in x.iter_mut().zip(xp) {
        *a += b;
    }
    Ok(x)
}

/// The minimum-cost flow problem over cycle flows `z ∈ ℝ^μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedFlowProblem {
    pub basis: CycleBasis,
    pub particular: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub costs: Vec<QuadraticCost>,
}

/// Certifies `basis` and `xp` against `problem` and builds the reduced problem.
pub fn reduce(
    problem: &FlowProblem,
    basis: &CycleBasis,
    xp: &[f64],
) -> Result<ReducedFlowProblem, ReductionError> {
    let inc = problem.graph.incidence();
    let cert = verify_basis(basis, &inc)?;
    if !cert.is_valid() {
        return Err(ReductionError::UncertifiedInputs(format!(
            "basis certificate failed (orthogonality {}, rank {})",
            cert.orthogonality, cert.rank_ok
        )));
    }
    if xp.len() != problem.graph.arc_count() {
        return Err(ReductionError::ShapeMismatch(
            "particular solution length".into(),
        ));
    }
    let residual = inc
        .mul(xp)
        .iter()
        .zip(&problem.injections)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = 1.0
        + problem
            .injections
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
    if residual > 1e-9 * scale {
        return Err(ReductionError::UncertifiedInputs(format!(
            "particular solution violates conservation by {residual:e}"
        )));
    }
    Ok(ReducedFlowProblem {
        basis: basis.clone(),
        particular: xp.to_vec(),
        lower: problem.lower.clone(),
        upper: problem.upper.clone(),
        costs: problem.costs.clone(),
    })
}

impl ReducedFlowProblem {
    pub fn mu(&self) -> usize {
        self.basis.mu()
    }

    pub fn lift(&self, z: &[f64]) -> Result<Vec<f64>, ReductionError> {
        lift(z, &self.basis, &self.particular)
    }

    pub fn objective(&self, z: &[f64]) -> Result<f64, ReductionError> {
        let x = self.lift(z)?;
        Ok(self.costs.iter().zip(&x).map(|(c, &v)| c.eval(v)).sum())
    }

    /// Arcs in no cycle; their flow is pinned to the particular solution.
    pub fn fixed_arcs(&self) -> Vec<ArcId> {
        self.basis
            .arc_membership()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_empty())
            .map(|(j, _)| ArcId(j))
            .collect()
    }

    /// Checks the pinned arcs against their boxes. For a tree network this
    /// is the whole problem.
    pub fn check_fixed_arcs(&self) -> Result<(), ReductionError> {
        for a in self.fixed_arcs() {
            let j = a.0;
            let x = self.particular[j];
            let tol = 1e-9 * (1.0 + x.abs());
            if x < self.lower[j] - tol || x > self.upper[j] + tol {
                return Err(ReductionError::FixedArcInfeasible(a));
            }
        }
        Ok(())
    }

    /// Affine expression of arc `j`'s flow in the cycle variables, offset by
    /// `first_var`.
    pub fn arc_expr(&self, j: usize, first_var: usize) -> AffineExpr {
        let mut e = AffineExpr::constant(self.particular[j]);
        for (k, c) in self.basis.cycles.iter().enumerate() {
            let s = c.entries[j];
            if s != 0 {
                e.add_term(first_var + k, f64::from(s));
            }
        }
        e
    }

    /// The QP over `z`. Rows for pinned arcs are omitted; see
    /// [`Self::check_fixed_arcs`].
    pub fn to_qp(&self) -> QpSpec {
        let mu = self.mu();
        let mut b = QpBuilder::new(mu);
        for (j, c) in self.costs.iter().enumerate() {
            let e = self.arc_expr(j, 0);
            b.add_quadratic_term(&e, c.quadratic, c.linear, 1.0);
            if !e.terms.is_empty() {
                b.add_constraint(e, self.lower[j], self.upper[j]);
            }
        }
        b.build()
    }

    pub fn solve(&self, params: &SolverParams) -> Result<FlowSolution, ReductionError> {
        self.check_fixed_arcs()?;
        let sol = solver::solve_qp(&self.to_qp(), params)?;
        let flows = self.lift(&sol.x)?;
        Ok(FlowSolution {
            objective: self.costs.iter().zip(&flows).map(|(c, &v)| c.eval(v)).sum(),
            flows,
            cycle_flows: Some(sol.x),
            report: sol.report,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycles::{fundamental_basis, tree_basis};
    use crate::graph::SpanningTree;

    fn triangle() -> OrientedGraph {
        OrientedGraph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn triangle_elementary_column() {
        let e = elementary_solutions(&triangle(), NodeId(2), &[NodeId(0)]).unwrap();
        assert_eq!(e.column(NodeId(0)).unwrap(), &[0, 0, 1]);
    }

    #[test]
    fn star_columns_have_one_entry() {
        let g = OrientedGraph::new(4, &[(0, 1), (2, 0), (0, 3)]).unwrap();
        let e = ElementarySolutionSet::all(&g, NodeId(0)).unwrap();
        for col in e.columns.values() {
            assert_eq!(col.iter().filter(|v| **v != 0).count(), 1);
        }
        assert_eq!(e.column(NodeId(2)).unwrap(), &[0, 1, 0]);
        assert_eq!(e.column(NodeId(1)).unwrap(), &[-1, 0, 0]);
    }

    #[test]
    fn reference_in_needed_rejected() {
        assert_eq!(
            elementary_solutions(&triangle(), NodeId(2), &[NodeId(2)]),
            Err(ReductionError::ReferenceNeeded(NodeId(2)))
        );
    }

    #[test]
    fn particular_solution_cases() {
        let g = triangle();
        let e = ElementarySolutionSet::all(&g, NodeId(2)).unwrap();
        assert_eq!(
            particular_solution(&e, &[0i64, 0, 0]).unwrap(),
            vec![0, 0, 0]
        );
        assert_eq!(
            particular_solution(&e, &[1i64, 0, -1]).unwrap(),
            vec![0, 0, 1]
        );
        assert!(matches!(
            particular_solution(&e, &[1i64, 0, 0]),
            Err(ReductionError::UnbalancedInjection(_))
        ));
        let partial = elementary_solutions(&g, NodeId(2), &[NodeId(0)]).unwrap();
        assert_eq!(
            particular_solution(&partial, &[1i64, 1, -2]),
            Err(ReductionError::MissingElementaryColumn(NodeId(1)))
        );
        let x = particular_solution(&e, &[0.5f64, 1.5, -2.0]).unwrap();
        assert_eq!(g.incidence().mul(&x), vec![0.5, 1.5, -2.0]);
    }

    #[test]
    fn lift_cases() {
        let g = triangle();
        let tree = SpanningTree::from_arcs(&g, NodeId(0), &[ArcId(0), ArcId(1)]).unwrap();
        let basis = fundamental_basis(&g, &tree).unwrap();
        let xp = [0.0, 0.0, 1.0];
        assert_eq!(lift(&[0.0], &basis, &xp).unwrap(), xp.to_vec());
        assert_eq!(lift(&[1.0], &basis, &xp).unwrap(), vec![-1.0, -1.0, 2.0]);
        assert!(matches!(
            lift(&[1.0, 2.0], &basis, &xp),
            Err(ReductionError::ShapeMismatch(_))
        ));
    }

    fn triangle_problem(caps: [f64; 3]) -> FlowProblem {
        FlowProblem::new(
            triangle(),
            caps.iter().map(|c| -c).collect(),
            caps.to_vec(),
            caps.iter()
                .map(|c| QuadraticCost::new(1.0 / (c * c), 0.0))
                .collect(),
            vec![1.0, 0.0, -1.0],
        )
        .unwrap()
    }

    #[test]
    fn triangle_reduced_problem_is_one_dimensional() {
        let caps = [2.0, 3.0, 5.0];
        let p = triangle_problem(caps);
        let g = &p.graph;
        let tree = SpanningTree::from_arcs(g, NodeId(0), &[ArcId(0), ArcId(1)]).unwrap();
        let basis = fundamental_basis(g, &tree).unwrap();
        let xp = [0.0, 0.0, 1.0];
        let r = reduce(&p, &basis, &xp).unwrap();
        assert_eq!(r.mu(), 1);
        // objective(z) = z²/c1² + z²/c2² + (z+1)²/c3²
        for z in [-1.0, 0.0, 0.3, 2.0] {
            let expected = z * z / 4.0 + z * z / 9.0 + (z + 1.0) * (z + 1.0) / 25.0;
            assert!((r.objective(&[z]).unwrap() - expected).abs() < 1e-14);
            let qp = r.to_qp();
            assert!((qp.objective(&[z]) - expected).abs() < 1e-12);
        }
        // x = (-z, -z, z+1); stationarity: z* = -c3⁻² / (c1⁻² + c2⁻² + c3⁻²)
        let inv: Vec<f64> = caps.iter().map(|c| 1.0 / (c * c)).collect();
        let z_star = -inv[2] / (inv[0] + inv[1] + inv[2]);
        let sol = r.solve(&SolverParams::default()).unwrap();
        assert!((sol.cycle_flows.unwrap()[0] - z_star).abs() < 1e-9);
    }

    #[test]
    fn tree_network_reduces_to_feasibility_check() {
        let g = OrientedGraph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let p = FlowProblem::new(
            g.clone(),
            vec![-1.0, -1.0],
            vec![1.0, 1.0],
            vec![QuadraticCost::new(1.0, 0.0); 2],
            vec![1.0, 0.0, -1.0],
        )
        .unwrap();
        let basis = tree_basis(&g).unwrap();
        let e = ElementarySolutionSet::all(&g, NodeId(2)).unwrap();
        let xp = particular_solution(&e, &p.injections).unwrap();
        let r = reduce(&p, &basis, &xp).unwrap();
        assert_eq!(r.mu(), 0);
        assert_eq!(r.fixed_arcs().len(), 2);
        let sol = r.solve(&SolverParams::default()).unwrap();
        assert_eq!(sol.flows, vec![1.0, 1.0]);
        let too_much = p.with_injections(vec![2.0, 0.0, -2.0]).unwrap();
        let xp = particular_solution(&e, &too_much.injections).unwrap();
        let r = reduce(&too_much, &basis, &xp).unwrap();
        assert_eq!(
            r.solve(&SolverParams::default()),
            Err(ReductionError::FixedArcInfeasible(ArcId(0)))
        );
    }

    #[test]
    fn reduce_rejects_uncertified_inputs() {
        let p = triangle_problem([1.0, 1.0, 1.0]);
        let basis = tree_basis(&p.graph).unwrap();
        assert!(matches!(
            reduce(&p, &basis, &[0.0, 0.0, 0.0]),
            Err(ReductionError::UncertifiedInputs(_))
        ));
        let mut bad = basis.clone();
        bad.cycles[0].entries[0] = -bad.cycles[0].entries[0];
        assert!(matches!(
            reduce(&p, &bad, &[0.0, 0.0, 1.0]),
            Err(ReductionError::UncertifiedInputs(_))
        ));
    }

    #[test]
    fn unbalanced_problem_rejected() {
        let r = FlowProblem::new(
            triangle(),
            vec![-1.0; 3],
            vec![1.0; 3],
            vec![QuadraticCost::new(1.0, 0.0); 3],
            vec![1.0, 0.0, 0.0],
        );
        assert!(matches!(r, Err(ReductionError::UnbalancedInjection(_))));
    }
}
