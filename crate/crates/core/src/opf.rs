//! Multi-period DC optimal power flow with storage, in full arc space and in
//! cycle space.
//!
//! Periods are 0-based in code. Storage `s(0)` is the given initial level
//! and `s(t+1) = λ s(t) + u(t)`; storage bounds apply to `s(1..=T)`.
//! Injections at a node are `δ + u + d`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cycles::{verify_basis, CycleBasis};
use crate::graph::{NodeId, OrientedGraph};
use crate::reduction::{ElementarySolutionSet, QuadraticCost};
use crate::solver::{self, AffineExpr, QpBuilder, QpError, QpSpec, SolveReport, SolverParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpfError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("horizon mismatch: {0}")]
    HorizonMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("inputs not certified: {0}")]
    UncertifiedInputs(String),
    #[error(transparent)]
    Solver(#[from] QpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const ZERO: Bounds = Bounds {
        lower: 0.0,
        upper: 0.0,
    };

    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    fn is_ordered(&self) -> bool {
        !self.lower.is_nan() && !self.upper.is_nan() && self.lower <= self.upper
    }

    pub fn violation(&self, v: f64) -> f64 {
        (self.lower - v).max(v - self.upper).max(0.0)
    }
}

/// Generation, storage and load at one bus. A missing generator or storage
/// unit is a `[0, 0]` box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub generation_cost: QuadraticCost,
    pub generation: Bounds,
    pub storage: Bounds,
    pub charge: Bounds,
    pub dissipation: f64,
    pub initial_storage: f64,
    /// Load per period, non-positive.
    pub loads: Vec<f64>,
}

impl Bus {
    pub fn load_only(loads: Vec<f64>) -> Self {
        Self {
            generation_cost: QuadraticCost::new(0.0, 0.0),
            generation: Bounds::ZERO,
            storage: Bounds::ZERO,
            charge: Bounds::ZERO,
            dissipation: 1.0,
            initial_storage: 0.0,
            loads,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub susceptance: f64,
    pub flow: Bounds,
    pub cost: QuadraticCost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpfProblem {
    pub graph: OrientedGraph,
    pub horizon: usize,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    /// Optional pin `s(T) = target` per bus.
    pub terminal_storage: Option<Vec<f64>>,
}

impl OpfProblem {
    pub fn new(
        graph: OrientedGraph,
        horizon: usize,
        buses: Vec<Bus>,
        lines: Vec<Line>,
        terminal_storage: Option<Vec<f64>>,
    ) -> Result<Self, OpfError> {
        let p = Self {
            graph,
            horizon,
            buses,
            lines,
            terminal_storage,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), OpfError> {
        let n = self.graph.node_count();
        let m = self.graph.arc_count();
        if self.horizon == 0 {
            return Err(OpfError::HorizonMismatch("horizon must be positive".into()));
        }
        if self.buses.len() != n {
            return Err(OpfError::ShapeMismatch(format!("expected {n} buses")));
        }
        if self.lines.len() != m {
            return Err(OpfError::ShapeMismatch(format!("expected {m} lines")));
        }
        for (i, b) in self.buses.iter().enumerate() {
            let v = NodeId(i);
            if b.loads.len() != self.horizon {
                return Err(OpfError::HorizonMismatch(format!(
                    "bus {v} has {} load periods, horizon is {}",
                    b.loads.len(),
                    self.horizon
                )));
            }
            if b.loads.iter().any(|d| !d.is_finite() || *d > 0.0) {
                return Err(OpfError::Invalid(format!(
                    "bus {v} loads must be finite and non-positive"
                )));
            }
            if !(b.dissipation > 0.0 && b.dissipation <= 1.0) {
                return Err(OpfError::Invalid(format!(
                    "bus {v} dissipation must lie in (0, 1]"
                )));
            }
            if !(b.generation.is_ordered() && b.storage.is_ordered() && b.charge.is_ordered()) {
                return Err(OpfError::Invalid(format!("bus {v} has unordered bounds")));
            }
            if b.storage.violation(b.initial_storage) > 0.0 {
                return Err(OpfError::Invalid(format!(
                    "bus {v} initial storage outside its bounds"
                )));
            }
            let c = b.generation_cost;
            if !(c.quadratic >= 0.0 && c.quadratic.is_finite() && c.linear.is_finite()) {
                return Err(OpfError::Invalid(format!(
                    "bus {v} generation cost must be convex"
                )));
            }
        }
        for (j, l) in self.lines.iter().enumerate() {
            if !(l.susceptance.is_finite() && l.susceptance != 0.0) {
                return Err(OpfError::Invalid(format!(
                    "line e{} needs a finite nonzero susceptance",
                    j + 1
                )));
            }
            if !l.flow.is_ordered() {
                return Err(OpfError::Invalid(format!(
                    "line e{} has unordered bounds",
                    j + 1
                )));
            }
            let c = l.cost;
            if !(c.quadratic >= 0.0 && c.quadratic.is_finite() && c.linear.is_finite()) {
                return Err(OpfError::Invalid(format!(
                    "line e{} cost must be convex",
                    j + 1
                )));
            }
        }
        if let Some(ts) = &self.terminal_storage {
            if ts.len() != n {
                return Err(OpfError::ShapeMismatch(format!(
                    "terminal storage needs {n} entries"
                )));
            }
        }
        Ok(())
    }

    pub fn load(&self, t: usize, i: usize) -> f64 {
        self.buses[i].loads[t]
    }

    /// `(1/T) Σ_t (Σ g(δ) + Σ φ(x))`.
    pub fn objective(&self, delta: &[Vec<f64>], flows: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for t in 0..self.horizon {
            for (b, &d) in self.buses.iter().zip(&delta[t]) {
                total += b.generation_cost.eval(d);
            }
            for (l, &x) in self.lines.iter().zip(&flows[t]) {
                total += l.cost.eval(x);
            }
        }
        total / self.horizon as f64
    }

    /// Full arc-space formulation with explicit conservation, dynamics and
    /// DC rows. Per period: `x`, `δ`, `u`, `s(t+1)`, `θ`.
    pub fn full_qp(&self) -> QpSpec {
        let n = self.graph.node_count();
        let m = self.graph.arc_count();
        let tt = self.horizon;
        let blk = m + 4 * n;
        let x = |t: usize, e: usize| t * blk + e;
        let dl = |t: usize, i: usize| t * blk + m + i;
        let u = |t: usize, i: usize| t * blk + m + n + i;
        let s = |t: usize, i: usize| t * blk + m + 2 * n + i;
        let th = |t: usize, i: usize| t * blk + m + 3 * n + i;
        let w = 1.0 / tt as f64;
        let reference = n - 1;
        let inc = self.graph.incidence();
        let mut b = QpBuilder::new(blk * tt);
        for t in 0..tt {
            for (i, bus) in self.buses.iter().enumerate() {
                let c = bus.generation_cost;
                b.add_quadratic_term(&AffineExpr::var(dl(t, i)), c.quadratic, c.linear, w);
            }
            for (e, line) in self.lines.iter().enumerate() {
                let c = line.cost;
                b.add_quadratic_term(&AffineExpr::var(x(t, e)), c.quadratic, c.linear, w);
            }
            for i in 0..n {
                let mut row = AffineExpr::new();
                for (e, &v) in inc.row(i).iter().enumerate() {
                    if v != 0 {
                        row.add_term(x(t, e), f64::from(v));
                    }
                }
                row.add_term(dl(t, i), -1.0).add_term(u(t, i), -1.0);
                b.add_equality(row, self.load(t, i));
            }
            for (i, bus) in self.buses.iter().enumerate() {
                let mut row = AffineExpr::var(s(t, i));
                row.add_term(u(t, i), -1.0);
                if t == 0 {
                    b.add_equality(row, bus.dissipation * bus.initial_storage);
                } else {
                    row.add_term(s(t - 1, i), -bus.dissipation);
                    b.add_equality(row, 0.0);
                }
            }
            for (e, line) in self.lines.iter().enumerate() {
                let arc = self.graph.arc(crate::graph::ArcId(e));
                let mut row = AffineExpr::new();
                row.add_term(th(t, arc.tail.0), line.susceptance)
                    .add_term(th(t, arc.head.0), -line.susceptance)
                    .add_term(x(t, e), -1.0);
                b.add_equality(row, 0.0);
            }
            b.add_equality(AffineExpr::var(th(t, reference)), 0.0);
            for (e, line) in self.lines.iter().enumerate() {
                b.add_bounds(x(t, e), line.flow.lower, line.flow.upper);
            }
            for (i, bus) in self.buses.iter().enumerate() {
                b.add_bounds(dl(t, i), bus.generation.lower, bus.generation.upper);
                b.add_bounds(u(t, i), bus.charge.lower, bus.charge.upper);
                b.add_bounds(s(t, i), bus.storage.lower, bus.storage.upper);
            }
        }
        if let Some(ts) = &self.terminal_storage {
            for (i, &target) in ts.iter().enumerate() {
                b.add_equality(AffineExpr::var(s(tt - 1, i)), target);
            }
        }
        b.build()
    }

    /// Solves the full formulation; the oracle for the reduced solve.
    pub fn solve_full(&self, params: &SolverParams) -> Result<OpfSolution, OpfError> {
        let n = self.graph.node_count();
        let m = self.graph.arc_count();
        let blk = m + 4 * n;
        let sol = solver::solve_qp(&self.full_qp(), params)?;
        let mut out = OpfSolution::empty(self);
        for t in 0..self.horizon {
            let v = &sol.x[t * blk..(t + 1) * blk];
            out.flows.push(v[..m].to_vec());
            out.delta.push(v[m..m + n].to_vec());
            out.charge.push(v[m + n..m + 2 * n].to_vec());
            out.storage.push(v[m + 2 * n..m + 3 * n].to_vec());
            out.theta.push(v[m + 3 * n..].to_vec());
        }
        out.objective = self.objective(&out.delta, &out.flows);
        out.report = sol.report;
        Ok(out)
    }
}

/// Trajectories indexed `[period][node or arc]`. `storage` has `T + 1`
/// rows, the first being the initial level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpfSolution {
    pub cycle_flows: Option<Vec<Vec<f64>>>,
    pub flows: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
    pub charge: Vec<Vec<f64>>,
    pub storage: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub objective: f64,
    #[serde(skip)]
    pub report: SolveReport,
}

impl OpfSolution {
    fn empty(p: &OpfProblem) -> Self {
        Self {
            cycle_flows: None,
            flows: Vec::with_capacity(p.horizon),
            delta: Vec::with_capacity(p.horizon),
            charge: Vec::with_capacity(p.horizon),
            storage: vec![p.buses.iter().map(|b| b.initial_storage).collect()],
            theta: Vec::with_capacity(p.horizon),
            objective: 0.0,
            report: SolveReport::default(),
        }
    }
}

/// The cycle-space formulation. Per period the variables are `z` (μ),
/// `δ` (n), `u` (n) and `θ` at every node but the reference (n − 1);
/// storage is unrolled from the dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedOpfProblem {
    pub problem: OpfProblem,
    pub basis: CycleBasis,
    pub elementary: ElementarySolutionSet,
}

pub fn reduce_opf(
    p: &OpfProblem,
    basis: &CycleBasis,
    elems: &ElementarySolutionSet,
) -> Result<ReducedOpfProblem, OpfError> {
    p.validate()?;
    let inc = p.graph.incidence();
    let cert = verify_basis(basis, &inc).map_err(|e| OpfError::UncertifiedInputs(e.to_string()))?;
    if !cert.is_valid() {
        return Err(OpfError::UncertifiedInputs(
            "cycle basis failed verification".into(),
        ));
    }
    let n = p.graph.node_count();
    let r = elems.reference;
    if r.0 >= n || elems.arc_count != p.graph.arc_count() {
        return Err(OpfError::UncertifiedInputs(
            "elementary solutions do not fit the graph".into(),
        ));
    }
    for i in (0..n).filter(|&i| i != r.0) {
        let col = elems.column(NodeId(i)).ok_or_else(|| {
            OpfError::UncertifiedInputs(format!("no elementary solution for {}", NodeId(i)))
        })?;
        let img = inc.mul(&col.iter().map(|&v| i64::from(v)).collect::<Vec<_>>());
        let ok = img.iter().enumerate().all(|(k, &v)| {
            v == if k == i {
                1
            } else if k == r.0 {
                -1
            } else {
                0
            }
        });
        if !ok {
            return Err(OpfError::UncertifiedInputs(format!(
                "elementary solution for {} is not a unit path flow",
                NodeId(i)
            )));
        }
    }
    Ok(ReducedOpfProblem {
        problem: p.clone(),
        basis: basis.clone(),
        elementary: elems.clone(),
    })
}

impl ReducedOpfProblem {
    fn n(&self) -> usize {
        self.problem.graph.node_count()
    }

    fn block(&self) -> usize {
        self.basis.mu() + 3 * self.n() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.block() * self.problem.horizon
    }

    /// Storage states removed by unrolling the dynamics.
    pub fn eliminated_storage_count(&self) -> usize {
        self.n() * self.problem.horizon
    }

    pub fn z_index(&self, t: usize, k: usize) -> usize {
        t * self.block() + k
    }

    pub fn delta_index(&self, t: usize, i: usize) -> usize {
        t * self.block() + self.basis.mu() + i
    }

    pub fn charge_index(&self, t: usize, i: usize) -> usize {
        t * self.block() + self.basis.mu() + self.n() + i
    }

    /// `None` at the reference node, where θ is pinned to zero.
    pub fn theta_index(&self, t: usize, i: usize) -> Option<usize> {
        let r = self.elementary.reference.0;
        let k = match i.cmp(&r) {
            std::cmp::Ordering::Less => i,
            std::cmp::Ordering::Equal => return None,
            std::cmp::Ordering::Greater => i - 1,
        };
        Some(t * self.block() + self.basis.mu() + 2 * self.n() + k)
    }

    /// `x_e(t) = (Bᵀ z(t))_e + Σ_{i ≠ ref} x̄ᵢ[e] (δᵢ + uᵢ + dᵢ)`.
    pub fn flow_expr(&self, t: usize, e: usize) -> AffineExpr {
        let mut ex = AffineExpr::new();
        for (k, c) in self.basis.cycles.iter().enumerate() {
            if c.entries[e] != 0 {
                ex.add_term(self.z_index(t, k), f64::from(c.entries[e]));
            }
        }
        for (&v, col) in &self.elementary.columns {
            let s = col[e];
            if s == 0 || v == self.elementary.reference {
                continue;
            }
            let s = f64::from(s);
            ex.add_term(self.delta_index(t, v.0), s)
                .add_term(self.charge_index(t, v.0), s)
                .add_constant(s * self.problem.load(t, v.0));
        }
        ex
    }

    /// `s(t+1) = λ^{t+1} s(0) + Σ_{k ≤ t} λ^{t-k} u(k)`.
    pub fn storage_expr(&self, t: usize, i: usize) -> AffineExpr {
        let bus = &self.problem.buses[i];
        let lam = bus.dissipation;
        let mut ex = AffineExpr::constant(lam.powi(t as i32 + 1) * bus.initial_storage);
        for k in 0..=t {
            ex.add_term(self.charge_index(k, i), lam.powi((t - k) as i32));
        }
        ex
    }

    pub fn to_qp(&self) -> QpSpec {
        let p = &self.problem;
        let n = self.n();
        let tt = p.horizon;
        let w = 1.0 / tt as f64;
        let mut b = QpBuilder::new(self.num_vars());
        for t in 0..tt {
            let flows: Vec<AffineExpr> = (0..p.graph.arc_count())
                .map(|e| self.flow_expr(t, e))
                .collect();
            for (i, bus) in p.buses.iter().enumerate() {
                let c = bus.generation_cost;
                b.add_quadratic_term(
                    &AffineExpr::var(self.delta_index(t, i)),
                    c.quadratic,
                    c.linear,
                    w,
                );
            }
            for (line, ex) in p.lines.iter().zip(&flows) {
                b.add_quadratic_term(ex, line.cost.quadratic, line.cost.linear, w);
            }
            let mut balance = AffineExpr::new();
            for i in 0..n {
                balance
                    .add_term(self.delta_index(t, i), 1.0)
                    .add_term(self.charge_index(t, i), 1.0);
            }
            let load: f64 = (0..n).map(|i| p.load(t, i)).sum();
            b.add_equality(balance, -load);
            for (e, (line, ex)) in p.lines.iter().zip(&flows).enumerate() {
                let arc = p.graph.arc(crate::graph::ArcId(e));
                let mut row = ex.clone();
                for k in row.terms.iter_mut() {
                    k.1 = -k.1;
                }
                row.constant = -row.constant;
                if let Some(ti) = self.theta_index(t, arc.tail.0) {
                    row.add_term(ti, line.susceptance);
                }
                if let Some(hi) = self.theta_index(t, arc.head.0) {
                    row.add_term(hi, -line.susceptance);
                }
                b.add_equality(row, 0.0);
                if !ex.terms.is_empty() {
                    b.add_constraint(ex.clone(), line.flow.lower, line.flow.upper);
                } else if line.flow.violation(ex.constant) > 0.0 {
                    // a flow fixed by the loads alone; keep the row so the
                    // solver reports infeasibility
                    b.add_constraint(ex.clone(), line.flow.lower, line.flow.upper);
                }
            }
            for (i, bus) in p.buses.iter().enumerate() {
                b.add_bounds(
                    self.delta_index(t, i),
                    bus.generation.lower,
                    bus.generation.upper,
                );
                b.add_bounds(self.charge_index(t, i), bus.charge.lower, bus.charge.upper);
                b.add_constraint(
                    self.storage_expr(t, i),
                    bus.storage.lower,
                    bus.storage.upper,
                );
            }
        }
        if let Some(ts) = &p.terminal_storage {
            for (i, &target) in ts.iter().enumerate() {
                b.add_equality(self.storage_expr(tt - 1, i), target);
            }
        }
        b.build()
    }

    /// Maps a reduced point back to full trajectories.
    pub fn lift(&self, v: &[f64]) -> Result<OpfSolution, OpfError> {
        if v.len() != self.num_vars() {
            return Err(OpfError::ShapeMismatch(format!(
                "expected {} reduced variables, got {}",
                self.num_vars(),
                v.len()
            )));
        }
        let p = &self.problem;
        let n = self.n();
        let mu = self.basis.mu();
        let mut out = OpfSolution::empty(p);
        let mut zs = Vec::with_capacity(p.horizon);
        for t in 0..p.horizon {
            let z = v[self.z_index(t, 0)..self.z_index(t, 0) + mu].to_vec();
            let delta: Vec<f64> = (0..n).map(|i| v[self.delta_index(t, i)]).collect();
            let charge: Vec<f64> = (0..n).map(|i| v[self.charge_index(t, i)]).collect();
            let mut x = self.basis.lift_cycle_flows(&z);
            for (&node, col) in &self.elementary.columns {
                let i = node.0;
                let f = delta[i] + charge[i] + p.load(t, i);
                for (xe, &c) in x.iter_mut().zip(col) {
                    if c != 0 {
                        *xe += f64::from(c) * f;
                    }
                }
            }
            let prev = &out.storage[t];
            let next: Vec<f64> = (0..n)
                .map(|i| p.buses[i].dissipation * prev[i] + charge[i])
                .collect();
            let theta: Vec<f64> = (0..n)
                .map(|i| self.theta_index(t, i).map_or(0.0, |k| v[k]))
                .collect();
            zs.push(z);
            out.flows.push(x);
            out.delta.push(delta);
            out.charge.push(charge);
            out.storage.push(next);
            out.theta.push(theta);
        }
        out.cycle_flows = Some(zs);
        out.objective = p.objective(&out.delta, &out.flows);
        Ok(out)
    }
}

pub fn solve_opf(rp: &ReducedOpfProblem, params: &SolverParams) -> Result<OpfSolution, OpfError> {
    let sol = solver::solve_qp(&rp.to_qp(), params)?;
    let mut out = rp.lift(&sol.x)?;
    out.report = sol.report;
    Ok(out)
}

/// Largest residual per constraint family, plus per-node conservation
/// residuals indexed `[period][node]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpfResiduals {
    pub conservation: f64,
    pub balance: f64,
    pub dynamics: f64,
    pub dc: f64,
    pub bounds: f64,
    pub terminal: f64,
    pub node_conservation: Vec<Vec<f64>>,
}

impl OpfResiduals {
    pub fn max(&self) -> f64 {
        [
            self.conservation,
            self.balance,
            self.dynamics,
            self.dc,
            self.bounds,
            self.terminal,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[allow(clippy::needless_range_loop)]
pub fn validate_opf_solution(p: &OpfProblem, sol: &OpfSolution) -> Result<OpfResiduals, OpfError> {
    let n = p.graph.node_count();
    let m = p.graph.arc_count();
    let tt = p.horizon;
    let rows_ok = |rows: &Vec<Vec<f64>>, count: usize, width: usize| {
        rows.len() == count && rows.iter().all(|r| r.len() == width)
    };
    if !(rows_ok(&sol.flows, tt, m)
        && rows_ok(&sol.delta, tt, n)
        && rows_ok(&sol.charge, tt, n)
        && rows_ok(&sol.storage, tt + 1, n)
        && rows_ok(&sol.theta, tt, n))
    {
        return Err(OpfError::ShapeMismatch(
            "trajectory dimensions do not match the problem".into(),
        ));
    }
    let inc = p.graph.incidence();
    let mut r = OpfResiduals {
        conservation: 0.0,
        balance: 0.0,
        dynamics: 0.0,
        dc: 0.0,
        bounds: 0.0,
        terminal: 0.0,
        node_conservation: Vec::with_capacity(tt),
    };
    for (i, b) in p.buses.iter().enumerate() {
        r.dynamics = r
            .dynamics
            .max((sol.storage[0][i] - b.initial_storage).abs());
    }
    for t in 0..tt {
        let ix = inc.mul(&sol.flows[t]);
        let mut per_node = Vec::with_capacity(n);
        let mut total = 0.0;
        for i in 0..n {
            let f = sol.delta[t][i] + sol.charge[t][i] + p.load(t, i);
            total += f;
            let res = (ix[i] - f).abs();
            r.conservation = r.conservation.max(res);
            per_node.push(res);
            let b = &p.buses[i];
            let dyn_res =
                (sol.storage[t + 1][i] - b.dissipation * sol.storage[t][i] - sol.charge[t][i])
                    .abs();
            r.dynamics = r.dynamics.max(dyn_res);
            r.bounds = r
                .bounds
                .max(b.generation.violation(sol.delta[t][i]))
                .max(b.charge.violation(sol.charge[t][i]))
                .max(b.storage.violation(sol.storage[t + 1][i]));
        }
        r.node_conservation.push(per_node);
        r.balance = r.balance.max(total.abs());
        for (e, line) in p.lines.iter().enumerate() {
            let arc = p.graph.arc(crate::graph::ArcId(e));
            let x = sol.flows[t][e];
            let dc = line.susceptance * (sol.theta[t][arc.tail.0] - sol.theta[t][arc.head.0]) - x;
            r.dc = r.dc.max(dc.abs());
            r.bounds = r.bounds.max(line.flow.violation(x));
        }
    }
    if let Some(ts) = &p.terminal_storage {
        for (i, &target) in ts.iter().enumerate() {
            r.terminal = r.terminal.max((sol.storage[tt][i] - target).abs());
        }
    }
    Ok(r)
}
