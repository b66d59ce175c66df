//! Cycle-based cyber layer and a synchronous consensus ADMM with one agent
//! per basis cycle.
//!
//! Agent `a` keeps copies of the cycle flows of itself and its neighbors.
//! Each round it solves its local penalized problem, sends `y + w` for every
//! copied index to that index's owner, the owner averages and broadcasts the
//! consensus value, and the agent updates its scaled duals.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cycles::{verify_basis, CycleBasis};
use crate::graph::{ArcId, OrientedGraph};
use crate::reduction::{
    particular_solution, ElementarySolutionSet, FlowProblem, QuadraticCost, ReductionError,
};
use crate::solver::{self, AffineExpr, QpBuilder, QpError, SolverParams, WarmStart};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdmmError {
    #[error("inputs not certified: {0}")]
    UncertifiedInputs(String),
    #[error("local problem of agent {agent} is infeasible")]
    LocalInfeasible { agent: usize },
    #[error("local solve of agent {agent} failed: {source}")]
    LocalSolve { agent: usize, source: QpError },
    #[error("agent {from} cannot send to non-neighbor {to}")]
    NotNeighbor { from: usize, to: usize },
    #[error("no convergence within {} rounds", .0.trace.rounds.len())]
    MaxRounds(Box<AdmmOutcome>),
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}

/// One cyber agent: a basis cycle, its arcs and its neighbors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agent {
    pub index: usize,
    pub arcs: Vec<ArcId>,
    pub neighbors: Vec<usize>,
    /// Sorted cycle indices copied by this agent: itself and its neighbors.
    pub coords: Vec<usize>,
}

impl Agent {
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn position(&self, cycle: usize) -> Option<usize> {
        self.coords.binary_search(&cycle).ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyberLayer {
    pub agents: Vec<Agent>,
    /// Cycles containing each arc.
    pub registry: Vec<Vec<usize>>,
    pub bridges: Vec<ArcId>,
    pub particular: Vec<f64>,
    pub basis: CycleBasis,
}

pub fn build_cyber_layer(
    g: &OrientedGraph,
    basis: &CycleBasis,
    xp: &[f64],
) -> Result<CyberLayer, AdmmError> {
    let cert = verify_basis(basis, &g.incidence())
        .map_err(|e| AdmmError::UncertifiedInputs(e.to_string()))?;
    if !cert.is_valid() {
        return Err(AdmmError::UncertifiedInputs(
            "cycle basis failed verification".into(),
        ));
    }
    if xp.len() != g.arc_count() {
        return Err(AdmmError::UncertifiedInputs(
            "particular solution length".into(),
        ));
    }
    let registry = basis.arc_membership();
    let bridges = registry
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_empty())
        .map(|(j, _)| ArcId(j))
        .collect();
    let agents = basis
        .cycles
        .iter()
        .enumerate()
        .map(|(a, c)| {
            let mut nb = BTreeSet::new();
            for arc in &c.arcs {
                nb.extend(registry[arc.0].iter().copied().filter(|&k| k != a));
            }
            let neighbors: Vec<usize> = nb.into_iter().collect();
            let mut coords = neighbors.clone();
            let at = coords.partition_point(|&k| k < a);
            coords.insert(at, a);
            Agent {
                index: a,
                arcs: c.arcs.clone(),
                neighbors,
                coords,
            }
        })
        .collect();
    Ok(CyberLayer {
        agents,
        registry,
        bridges,
        particular: xp.to_vec(),
        basis: basis.clone(),
    })
}

impl CyberLayer {
    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    /// Number of agents holding a copy of cycle `k`.
    pub fn holders(&self, k: usize) -> usize {
        self.agents[k].neighbors.len() + 1
    }

    pub fn is_connected(&self) -> bool {
        let n = self.agents.len();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(a) = stack.pop() {
            for &b in &self.agents[a].neighbors {
                if !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Rebroadcast of new injections: recomputes the particular solution.
    pub fn set_injections(
        &mut self,
        elems: &ElementarySolutionSet,
        f: &[f64],
    ) -> Result<(), AdmmError> {
        self.particular = particular_solution(elems, f)?;
        Ok(())
    }

    /// Lifts consensus cycle flows to arc flows.
    pub fn lift(&self, z: &[f64]) -> Vec<f64> {
        let mut x = self.basis.lift_cycle_flows(z);
        for (a, b) in x.iter_mut().zip(&self.particular) {
            *a += b;
        }
        x
    }
}

/// One weighted arc cost inside an agent's local objective.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalArcTerm {
    pub arc: ArcId,
    pub weight: f64,
    pub cost: QuadraticCost,
    /// `(position in the agent's copy vector, basis sign)`.
    pub coeffs: Vec<(usize, f64)>,
}

impl LocalArcTerm {
    pub fn flow(&self, y: &[f64], xp: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(p, s)| s * y[p]).sum::<f64>() + xp[self.arc.0]
    }

    fn flow_expr(&self, xp: &[f64]) -> AffineExpr {
        let mut e = AffineExpr::constant(xp[self.arc.0]);
        for &(p, s) in &self.coeffs {
            e.add_term(p, s);
        }
        e
    }
}

/// `θ_a(y) = Σ_{e ∈ cycle a} φ_e(x_e(y)) / |cycles containing e|`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCost {
    pub agent: usize,
    pub terms: Vec<LocalArcTerm>,
}

impl LocalCost {
    pub fn eval(&self, y: &[f64], xp: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight * t.cost.eval(t.flow(y, xp)))
            .sum()
    }
}

pub fn split_costs(layer: &CyberLayer, costs: &[QuadraticCost]) -> Vec<LocalCost> {
    layer
        .agents
        .iter()
        .map(|agent| LocalCost {
            agent: agent.index,
            terms: agent
                .arcs
                .iter()
                .map(|&arc| {
                    let holders = &layer.registry[arc.0];
                    LocalArcTerm {
                        arc,
                        weight: 1.0 / holders.len() as f64,
                        cost: costs[arc.0],
                        coeffs: holders
                            .iter()
                            .map(|&k| {
                                let p = agent.position(k).expect("arc holders are neighbors");
                                (p, f64::from(layer.basis.entry(k, arc.0)))
                            })
                            .collect(),
                    }
                })
                .collect(),
        })
        .collect()
}

/// Global cost over arcs that lie in at least one cycle.
pub fn non_bridge_cost(layer: &CyberLayer, costs: &[QuadraticCost], x: &[f64]) -> f64 {
    layer
        .registry
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_empty())
        .map(|(j, _)| costs[j].eval(x[j]))
        .sum()
}

/// Copies of `z` held by an agent, read from a global vector.
pub fn local_copies(agent: &Agent, z: &[f64]) -> Vec<f64> {
    agent.coords.iter().map(|&k| z[k]).collect()
}

/// Minimizes `θ_a(y) + Σ_k (ρ_k/2)(y_k − target_k)²` subject to the agent's
/// arc boxes. Coordinates without a target carry no penalty.
#[allow(clippy::too_many_arguments)]
pub fn local_subproblem(
    agent: &Agent,
    cost: &LocalCost,
    lower: &[f64],
    upper: &[f64],
    xp: &[f64],
    targets: &[Option<f64>],
    rho: &[f64],
    params: &SolverParams,
    warm: Option<&WarmStart>,
) -> Result<(Vec<f64>, Vec<f64>), AdmmError> {
    let mut b = QpBuilder::new(agent.dim());
    for t in &cost.terms {
        let e = t.flow_expr(xp);
        b.add_quadratic_term(&e, t.cost.quadratic, t.cost.linear, t.weight);
        b.add_constraint(e, lower[t.arc.0], upper[t.arc.0]);
    }
    for (p, target) in targets.iter().enumerate() {
        if let Some(v) = target {
            let mut e = AffineExpr::var(p);
            e.add_constant(-v);
            b.add_quadratic_term(&e, 0.5 * rho[p], 0.0, 1.0);
        }
    }
    match solver::solve_qp_warm(&b.build(), params, warm) {
        Ok(sol) => Ok((sol.x, sol.y)),
        Err(QpError::Infeasible(_)) => Err(AdmmError::LocalInfeasible { agent: agent.index }),
        Err(source) => Err(AdmmError::LocalSolve {
            agent: agent.index,
            source,
        }),
    }
}

/// A consensus message: a value for cycle index `cycle`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub from: usize,
    pub cycle: usize,
    pub value: f64,
}

/// In-process message bus. Only cyber-layer neighbors may exchange
/// messages; delivery is ordered by ascending sender.
#[derive(Debug, Clone)]
pub struct MessageBus {
    allowed: Vec<Vec<usize>>,
    inbox: Vec<Vec<Message>>,
    log: BTreeSet<(usize, usize)>,
}

impl MessageBus {
    pub fn new(layer: &CyberLayer) -> Self {
        let n = layer.agent_count();
        Self {
            allowed: layer.agents.iter().map(|a| a.neighbors.clone()).collect(),
            inbox: vec![Vec::new(); n],
            log: BTreeSet::new(),
        }
    }

    pub fn send(
        &mut self,
        from: usize,
        to: usize,
        cycle: usize,
        value: f64,
    ) -> Result<(), AdmmError> {
        if from != to && self.allowed[from].binary_search(&to).is_err() {
            return Err(AdmmError::NotNeighbor { from, to });
        }
        self.log.insert((from, to));
        self.inbox[to].push(Message { from, cycle, value });
        Ok(())
    }

    /// Drains an agent's inbox in ascending sender order.
    pub fn receive(&mut self, to: usize) -> Vec<Message> {
        let mut msgs = std::mem::take(&mut self.inbox[to]);
        msgs.sort_by_key(|m| (m.from, m.cycle));
        msgs
    }

    /// Every `(sender, recipient)` pair seen so far.
    pub fn access_log(&self) -> &BTreeSet<(usize, usize)> {
        &self.log
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmParams {
    pub rho: f64,
    /// Scale each index's penalty by the diagonal curvature of its cycle.
    pub curvature_scaling: bool,
    /// Bound on copy disagreement and on the per-round consensus change.
    pub tolerance: f64,
    pub max_rounds: usize,
    pub local: SolverParams,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            rho: 1.0,
            curvature_scaling: true,
            tolerance: 1e-8,
            max_rounds: 10_000,
            local: SolverParams {
                eps_abs: 1e-10,
                eps_rel: 1e-10,
                ..SolverParams::default()
            },
        }
    }
}

/// Injections taking effect at `round`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub round: usize,
    pub injections: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub phase: usize,
    /// True on the first round after an injection switch.
    pub switched: bool,
    /// Per agent: largest gap between its copies and the consensus values.
    pub disagreement: Vec<f64>,
    /// Largest change of a consensus value in this round.
    pub dual_residual: f64,
    pub objective: f64,
    /// Per arc: `|x(k) − x*|` against the phase reference.
    pub arc_error: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundTrace {
    pub rounds: Vec<RoundRecord>,
}

impl RoundTrace {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmOutcome {
    pub trace: RoundTrace,
    /// Consensus cycle flows after the last round.
    pub z: Vec<f64>,
    /// Every agent's copies after the last round.
    pub copies: Vec<Vec<f64>>,
    pub flows: Vec<f64>,
    /// First converged round of each phase, if any.
    pub converged_at: Vec<Option<usize>>,
    /// Distinct `(sender, recipient)` pairs carried by the message bus.
    pub links: Vec<(usize, usize)>,
}

fn penalties(layer: &CyberLayer, costs: &[QuadraticCost], params: &AdmmParams) -> Vec<f64> {
    (0..layer.agent_count())
        .map(|k| {
            if !params.curvature_scaling {
                return params.rho;
            }
            let h: f64 = layer.agents[k]
                .arcs
                .iter()
                .map(|a| 2.0 * costs[a.0].quadratic)
                .sum();
            params.rho * if h > 0.0 { h } else { 1.0 }
        })
        .collect()
}

type LocalResult = Result<(Vec<f64>, Vec<f64>), AdmmError>;

/// Runs synchronous rounds through `schedule` until the last phase
/// converges. `references` holds the centralized arc flows of each phase.
/// `threads` sets the worker count for the local solves.
pub fn run(
    problem: &FlowProblem,
    layer: &CyberLayer,
    elems: &ElementarySolutionSet,
    params: &AdmmParams,
    schedule: &[ScheduleEntry],
    references: &[Vec<f64>],
    threads: usize,
) -> Result<AdmmOutcome, AdmmError> {
    if schedule.is_empty() || schedule[0].round != 0 {
        return Err(AdmmError::Schedule(
            "the first entry must start at round 0".into(),
        ));
    }
    if schedule.windows(2).any(|w| w[1].round <= w[0].round) {
        return Err(AdmmError::Schedule(
            "rounds must be strictly increasing".into(),
        ));
    }
    if references.len() != schedule.len() {
        return Err(AdmmError::Schedule(
            "one reference per schedule entry is required".into(),
        ));
    }
    if !(params.rho > 0.0 && params.tolerance > 0.0) {
        return Err(AdmmError::Params(
            "rho and tolerance must be positive".into(),
        ));
    }
    let m = problem.graph.arc_count();
    if references.iter().any(|r| r.len() != m)
        || schedule
            .iter()
            .any(|s| s.injections.len() != problem.graph.node_count())
    {
        return Err(AdmmError::Schedule(
            "reference or injection length mismatch".into(),
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| AdmmError::Params(e.to_string()))?;

    let mut layer = layer.clone();
    let mu = layer.agent_count();
    let costs = split_costs(&layer, &problem.costs);
    let rho = penalties(&layer, &problem.costs, params);
    let local_rho: Vec<Vec<f64>> = layer
        .agents
        .iter()
        .map(|a| a.coords.iter().map(|&k| rho[k]).collect())
        .collect();
    let mut bus = MessageBus::new(&layer);
    let mut copies: Vec<Vec<f64>> = layer.agents.iter().map(|a| vec![0.0; a.dim()]).collect();
    let mut duals = copies.clone();
    let mut warm: Vec<Option<WarmStart>> = vec![None; mu];
    let mut z = vec![0.0; mu];
    let mut trace = RoundTrace::default();
    let mut converged_at = vec![None; schedule.len()];
    let mut phase = 0;
    let mut phase_start = true;
    layer.set_injections(elems, &schedule[0].injections)?;

    for round in 0..params.max_rounds {
        if phase + 1 < schedule.len() && schedule[phase + 1].round == round {
            phase += 1;
            layer.set_injections(elems, &schedule[phase].injections)?;
            phase_start = true;
        }
        let xp = &layer.particular;

        let solved: Vec<LocalResult> = pool.install(|| {
            layer
                .agents
                .par_iter()
                .map(|agent| {
                    let a = agent.index;
                    let targets: Vec<Option<f64>> = agent
                        .coords
                        .iter()
                        .enumerate()
                        .map(|(p, &k)| (layer.holders(k) > 1).then(|| z[k] - duals[a][p]))
                        .collect();
                    local_subproblem(
                        agent,
                        &costs[a],
                        &problem.lower,
                        &problem.upper,
                        xp,
                        &targets,
                        &local_rho[a],
                        &params.local,
                        warm[a].as_ref(),
                    )
                })
                .collect()
        });
        for (a, res) in solved.into_iter().enumerate() {
            let (y, mult) = res?;
            warm[a] = Some(WarmStart {
                x: y.clone(),
                y: mult,
            });
            copies[a] = y;
        }

        for agent in &layer.agents {
            let a = agent.index;
            for (p, &k) in agent.coords.iter().enumerate() {
                bus.send(a, k, k, copies[a][p] + duals[a][p])?;
            }
        }
        let z_prev = z.clone();
        for (k, zk) in z.iter_mut().enumerate() {
            let msgs = bus.receive(k);
            *zk = msgs.iter().map(|m| m.value).sum::<f64>() / msgs.len() as f64;
        }
        for agent in &layer.agents {
            for &a in &agent.neighbors {
                bus.send(agent.index, a, agent.index, z[agent.index])?;
            }
        }
        let mut disagreement = vec![0.0; mu];
        for agent in &layer.agents {
            let a = agent.index;
            for msg in bus.receive(a) {
                let p = agent
                    .position(msg.cycle)
                    .expect("broadcast from a neighbor");
                let gap = copies[a][p] - msg.value;
                duals[a][p] += gap;
                disagreement[a] = f64::max(disagreement[a], gap.abs());
            }
            let own = agent.position(a).expect("own coordinate");
            let gap = copies[a][own] - z[a];
            duals[a][own] += gap;
            disagreement[a] = f64::max(disagreement[a], gap.abs());
        }
        let dual_residual = (0..mu)
            .map(|k| (z[k] - z_prev[k]).abs())
            .fold(0.0, f64::max);

        let flows = layer.lift(&z);
        let reference = &references[phase];
        trace.rounds.push(RoundRecord {
            round,
            phase,
            switched: phase_start && phase > 0,
            objective: problem.objective(&flows),
            arc_error: flows
                .iter()
                .zip(reference)
                .map(|(a, b)| (a - b).abs())
                .collect(),
            disagreement,
            dual_residual,
        });
        phase_start = false;

        let record = trace.rounds.last().expect("just pushed");
        let primal = record.disagreement.iter().copied().fold(0.0, f64::max);
        let converged = primal <= params.tolerance && dual_residual <= params.tolerance;
        if converged && converged_at[phase].is_none() {
            converged_at[phase] = Some(round);
        }
        if converged && phase + 1 == schedule.len() {
            return Ok(AdmmOutcome {
                trace,
                flows,
                z,
                copies,
                converged_at,
                links: links(&bus),
            });
        }
    }
    let flows = layer.lift(&z);
    Err(AdmmError::MaxRounds(Box::new(AdmmOutcome {
        trace,
        z,
        copies,
        flows,
        converged_at,
        links: links(&bus),
    })))
}

fn links(bus: &MessageBus) -> Vec<(usize, usize)> {
    bus.access_log().iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycles::{horton_basis, tree_basis};
    use crate::reduction::{default_reference, reduce};

    fn two_triangles() -> OrientedGraph {
        // shared arc e3 = (0, 2)
        OrientedGraph::new(4, &[(0, 1), (1, 2), (0, 2), (2, 3), (0, 3)]).unwrap()
    }

    fn problem(g: OrientedGraph, caps: &[f64], f: Vec<f64>) -> FlowProblem {
        FlowProblem::new(
            g,
            caps.iter().map(|c| -c).collect(),
            caps.to_vec(),
            caps.iter()
                .map(|c| QuadraticCost::new(1.0 / (c * c), 0.0))
                .collect(),
            f,
        )
        .unwrap()
    }

    fn setup(p: &FlowProblem) -> (CyberLayer, ElementarySolutionSet) {
        let basis = horton_basis(&p.graph).unwrap();
        let elems = ElementarySolutionSet::all(&p.graph, default_reference(&p.graph)).unwrap();
        let xp = particular_solution(&elems, &p.injections).unwrap();
        (build_cyber_layer(&p.graph, &basis, &xp).unwrap(), elems)
    }

    fn centralized(p: &FlowProblem, layer: &CyberLayer) -> Vec<f64> {
        let elems = ElementarySolutionSet::all(&p.graph, default_reference(&p.graph)).unwrap();
        let xp = particular_solution(&elems, &p.injections).unwrap();
        reduce(p, &layer.basis, &xp)
            .unwrap()
            .solve(&SolverParams::default())
            .unwrap()
            .flows
    }

    #[test]
    fn two_triangles_layer() {
        let g = two_triangles();
        let basis = horton_basis(&g).unwrap();
        let layer = build_cyber_layer(&g, &basis, &[0.0; 5]).unwrap();
        assert_eq!(layer.agent_count(), 2);
        assert_eq!(layer.agents[0].neighbors, vec![1]);
        assert_eq!(layer.agents[1].neighbors, vec![0]);
        assert_eq!(layer.registry[2], vec![0, 1]);
        assert!(layer.bridges.is_empty());
        assert!(layer.is_connected());
    }

    #[test]
    fn tree_layer_is_all_bridges() {
        let g = OrientedGraph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let basis = tree_basis(&g).unwrap();
        let layer = build_cyber_layer(&g, &basis, &[0.0; 2]).unwrap();
        assert_eq!(layer.agent_count(), 0);
        assert_eq!(layer.bridges, vec![ArcId(0), ArcId(1)]);
    }

    #[test]
    fn split_weights() {
        let g = two_triangles();
        let basis = horton_basis(&g).unwrap();
        let layer = build_cyber_layer(&g, &basis, &[0.0; 5]).unwrap();
        let costs = vec![QuadraticCost::new(1.0, 0.5); 5];
        let local = split_costs(&layer, &costs);
        for lc in &local {
            for t in &lc.terms {
                let w = if t.arc == ArcId(2) { 0.5 } else { 1.0 };
                assert_eq!(t.weight, w);
            }
        }
        let z = [0.7, -1.3];
        let xp = [1.0, 0.0, -2.0, 0.5, 0.25];
        let mut x = basis.lift_cycle_flows(&z);
        for (a, b) in x.iter_mut().zip(&xp) {
            *a += b;
        }
        let total: f64 = layer
            .agents
            .iter()
            .zip(&local)
            .map(|(a, lc)| lc.eval(&local_copies(a, &z), &xp))
            .sum();
        assert!((total - non_bridge_cost(&layer, &costs, &x)).abs() < 1e-12);
    }

    #[test]
    fn local_closed_form_and_box_face() {
        let g = OrientedGraph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let basis = horton_basis(&g).unwrap();
        let xp = [0.0, 0.0, 1.0];
        let layer = build_cyber_layer(&g, &basis, &xp).unwrap();
        let costs = vec![QuadraticCost::new(1.0, 0.0); 3];
        let local = split_costs(&layer, &costs);
        let agent = &layer.agents[0];
        let wide = [-10.0; 3];
        let up = [10.0; 3];
        let params = SolverParams::default();
        // Σ (±y + xp)² with entries (1,1,-1): 3y² - 2y + 1 → y = 1/3
        let (y, _) = local_subproblem(
            agent,
            &local[0],
            &wide,
            &up,
            &xp,
            &[None],
            &[1.0],
            &params,
            None,
        )
        .unwrap();
        assert!((y[0] - 1.0 / 3.0).abs() < 1e-9);
        // box |x_1| ≤ 0.1 binds: y = 0.1
        let up = [0.1, 10.0, 10.0];
        let lo = [-0.1, -10.0, -10.0];
        let (y, _) = local_subproblem(
            agent,
            &local[0],
            &lo,
            &up,
            &xp,
            &[None],
            &[1.0],
            &params,
            None,
        )
        .unwrap();
        assert!((y[0] - 0.1).abs() < 1e-9);
        // huge penalty pins the copy to its target
        let (y, _) = local_subproblem(
            agent,
            &local[0],
            &wide,
            &[10.0; 3],
            &xp,
            &[Some(2.0)],
            &[1e6],
            &params,
            None,
        )
        .unwrap();
        assert!((y[0] - 2.0).abs() < 1e-3);
        // x_1 = y ≤ 10 and x_3 = 1 − y = −10 conflict
        assert_eq!(
            local_subproblem(
                agent,
                &local[0],
                &wide,
                &[10.0, 10.0, -10.0],
                &xp,
                &[None],
                &[1.0],
                &params,
                None
            ),
            Err(AdmmError::LocalInfeasible { agent: 0 })
        );
    }

    #[test]
    fn bus_rejects_non_neighbors() {
        // two triangles joined at a node share no arc
        let g = OrientedGraph::new(5, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)]).unwrap();
        let basis = horton_basis(&g).unwrap();
        let layer = build_cyber_layer(&g, &basis, &[0.0; 6]).unwrap();
        assert!(!layer.is_connected());
        let mut bus = MessageBus::new(&layer);
        assert_eq!(
            bus.send(0, 1, 0, 1.0),
            Err(AdmmError::NotNeighbor { from: 0, to: 1 })
        );
        bus.send(0, 0, 0, 1.0).unwrap();
        assert_eq!(
            bus.access_log().iter().copied().collect::<Vec<_>>(),
            vec![(0, 0)]
        );
    }

    #[test]
    fn single_cycle_converges_immediately() {
        let g = OrientedGraph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let p = problem(g, &[2.0, 3.0, 5.0], vec![1.0, 0.0, -1.0]);
        let (layer, elems) = setup(&p);
        let reference = centralized(&p, &layer);
        let sched = [ScheduleEntry {
            round: 0,
            injections: p.injections.clone(),
        }];
        let out = run(
            &p,
            &layer,
            &elems,
            &AdmmParams::default(),
            &sched,
            std::slice::from_ref(&reference),
            1,
        )
        .unwrap();
        assert!(out.trace.len() <= 2);
        for (a, b) in out.flows.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn two_triangles_match_centralized_with_switch() {
        let p = problem(
            two_triangles(),
            &[2.0, 3.0, 4.0, 5.0, 6.0],
            vec![3.0, 0.0, -1.0, -2.0],
        );
        let (layer, elems) = setup(&p);
        let r1 = centralized(&p, &layer);
        let p2 = p.with_injections(vec![1.0, 1.0, 0.0, -2.0]).unwrap();
        let r2 = centralized(&p2, &layer);
        let sched = [
            ScheduleEntry {
                round: 0,
                injections: p.injections.clone(),
            },
            ScheduleEntry {
                round: 30,
                injections: p2.injections.clone(),
            },
        ];
        let out = run(
            &p,
            &layer,
            &elems,
            &AdmmParams::default(),
            &sched,
            &[r1, r2.clone()],
            2,
        )
        .unwrap();
        assert!(out.trace.rounds[30].switched);
        let inc = p.graph.incidence();
        assert!(inc
            .mul(&out.flows)
            .iter()
            .zip(&p2.injections)
            .all(|(a, b)| (a - b).abs() < 1e-9));
        for (a, b) in out.flows.iter().zip(&r2) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        assert!(out.converged_at[1].is_some());
    }
}
