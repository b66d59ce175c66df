//! Cycle-basis elimination of the flow-conservation constraint in optimal
//! network flow problems.
//!
//! Any arc flow `x` with `I x = f` can be written as `Bᵀ z + xᵖ`, where the
//! rows of `B` are an oriented cycle basis and `xᵖ` is a particular solution
//! built by tracing unit flows along paths. This crate builds both pieces,
//! solves the reduced minimum-cost flow and multi-period DC power flow
//! problems, and simulates a distributed consensus ADMM with one agent per
//! cycle.

pub mod admm;
pub mod cycles;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod opf;
pub mod random;
pub mod reduction;
pub mod solver;
