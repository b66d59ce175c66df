//! In-repo convex solvers: a box/affine QP solver and Edmonds-Karp max flow.

pub mod maxflow;
pub mod qp;

pub use maxflow::{
    capacity_feasible, max_flow, max_flow_with_terminals, ArcCapacity, MaxFlowError, MaxFlowResult,
};
pub use qp::{
    solve_qp, solve_qp_warm, AffineExpr, IterationRecord, QpBuilder, QpError, QpSolution, QpSpec,
    SolveReport, SolveStatus, SolverParams, WarmStart,
};
