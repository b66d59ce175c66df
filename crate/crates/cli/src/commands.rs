use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use cycleflow_core::admm::{self, AdmmError, AdmmOutcome, AdmmParams, ScheduleEntry};
use cycleflow_core::cycles::{horton_basis, tree_basis, verify_basis, CycleBasis};
use cycleflow_core::graph::{NodeId, OrientedGraph};
use cycleflow_core::io::{self, DocumentKind, Problem};
use cycleflow_core::opf::{self, OpfProblem};
use cycleflow_core::reduction::{
    default_reference, elementary_solutions, particular_solution, reduce as reduce_flow,
    ElementarySolutionSet, FlowProblem, ReductionError,
};
use cycleflow_core::solver::{max_flow, ArcCapacity, QpError, SolveReport, SolverParams};
use serde::Serialize;

use crate::failure::Failure;
use crate::{
    BasisArgs, BasisSource, MaxflowArgs, Method, OpfArgs, ReduceArgs, SimulateArgs, SolveArgs,
    SolverArgs, ValidateArgs,
};

type Outcome = Result<(), Failure>;

const TOLERANCE: f64 = 1e-6;

fn emit(out: &Option<PathBuf>, text: &str) -> Outcome {
    match out {
        Some(path) => Ok(io::write_file(path, text)?),
        None => {
            print_line(text.trim_end());
            Ok(())
        }
    }
}

// a closed pipe on stdout is not an error
fn print_line(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn flow_problem(path: &Path) -> Result<FlowProblem, Failure> {
    match io::load_problem(path)? {
        Problem::Flow(p) => Ok(p),
        Problem::Opf(_) => Err(Failure::invalid(
            "cli::WrongKind",
            format!(
                "{} holds an OPF problem, expected a flow problem",
                path.display()
            ),
        )),
    }
}

fn opf_problem(path: &Path) -> Result<OpfProblem, Failure> {
    match io::load_problem(path)? {
        Problem::Opf(p) => Ok(p),
        Problem::Flow(_) => Err(Failure::invalid(
            "cli::WrongKind",
            format!(
                "{} holds a flow problem, expected an OPF problem",
                path.display()
            ),
        )),
    }
}

fn node(g: &OrientedGraph, index: usize) -> Result<NodeId, Failure> {
    if index < g.node_count() {
        Ok(NodeId(index))
    } else {
        Err(Failure::invalid(
            "GraphError::BadNode",
            format!(
                "node index {index} is out of range for {} nodes",
                g.node_count()
            ),
        ))
    }
}

fn reference_node(g: &OrientedGraph, flag: Option<usize>) -> Result<NodeId, Failure> {
    match flag {
        Some(i) => node(g, i),
        None => Ok(default_reference(g)),
    }
}

fn compute_basis(g: &OrientedGraph, method: Method) -> Result<CycleBasis, Failure> {
    Ok(match method {
        Method::Tree => tree_basis(g)?,
        Method::Horton => horton_basis(g)?,
    })
}

fn basis_for(g: &OrientedGraph, src: &BasisSource) -> Result<CycleBasis, Failure> {
    match &src.basis {
        Some(path) => {
            let b = io::load_basis(path)?;
            certify(&b, g)?;
            Ok(b)
        }
        None => compute_basis(g, src.method),
    }
}

fn certify(b: &CycleBasis, g: &OrientedGraph) -> Outcome {
    let cert = verify_basis(b, &g.incidence())?;
    if b.mu() != g.cycle_rank() {
        return Err(Failure::invalid(
            "cli::UncertifiedBasis",
            format!(
                "basis has {} cycles, the graph has cycle rank {}",
                b.mu(),
                g.cycle_rank()
            ),
        ));
    }
    if !cert.is_valid() {
        return Err(Failure::invalid(
            "cli::UncertifiedBasis",
            format!(
                "orthogonality {}, rank {}",
                cert.orthogonality, cert.rank_ok
            ),
        ));
    }
    Ok(())
}

/// Elementary columns for every terminal of every phase, except the reference.
fn terminal_solutions(
    g: &OrientedGraph,
    reference: NodeId,
    phases: &[&[f64]],
) -> Result<ElementarySolutionSet, Failure> {
    let needed: BTreeSet<NodeId> = phases
        .iter()
        .flat_map(|f| {
            f.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, _)| NodeId(i))
        })
        .filter(|&v| v != reference)
        .collect();
    let needed: Vec<NodeId> = needed.into_iter().collect();
    Ok(elementary_solutions(g, reference, &needed)?)
}

fn solver_params(a: &SolverArgs) -> SolverParams {
    let mut p = SolverParams::default();
    if let Some(v) = a.max_iterations {
        p.max_iterations = v;
    }
    if let Some(v) = a.eps_abs {
        p.eps_abs = v;
    }
    if let Some(v) = a.eps_rel {
        p.eps_rel = v;
    }
    p
}

fn write_solver_trace(path: &Path, report: &SolveReport) -> Outcome {
    let mut buf = Vec::new();
    report.write_trace(&mut buf).expect("writing to memory");
    io::write_file(path, &String::from_utf8(buf).expect("ascii trace"))?;
    Ok(())
}

fn unconverged_report(e: &ReductionError) -> Option<&SolveReport> {
    match e {
        ReductionError::Solver(q @ QpError::MaxIterations(_)) => q.report(),
        _ => None,
    }
}

pub fn basis(a: BasisArgs) -> Outcome {
    let g = io::load_graph(&a.input)?;
    let b = compute_basis(&g, a.method)?;
    emit(&a.out, &io::basis_to_json(&b))
}

pub fn reduce(a: ReduceArgs) -> Outcome {
    let p = flow_problem(&a.problem)?;
    let g = &p.graph;
    let b = basis_for(g, &a.basis)?;
    let elems = terminal_solutions(g, reference_node(g, a.basis.ref_node)?, &[&p.injections])?;
    let xp = particular_solution(&elems, &p.injections)?;
    let rp = reduce_flow(&p, &b, &xp)?;
    emit(&a.out, &io::reduced_to_json(&rp))
}

pub fn solve(a: SolveArgs) -> Outcome {
    let p = flow_problem(&a.problem)?;
    let params = solver_params(&a.solver);
    let result = match &a.reduced {
        Some(path) => {
            let g = &p.graph;
            let b = io::load_basis(path)?;
            certify(&b, g)?;
            let elems = terminal_solutions(g, reference_node(g, a.ref_node)?, &[&p.injections])?;
            let xp = particular_solution(&elems, &p.injections)?;
            reduce_flow(&p, &b, &xp)?.solve(&params)
        }
        None => p.solve_full(&params),
    };
    let sol = match result {
        Ok(s) => s,
        Err(e) => {
            if let (Some(path), Some(report)) = (&a.trace, unconverged_report(&e)) {
                write_solver_trace(path, report)?;
            }
            return Err(e.into());
        }
    };
    if let Some(path) = &a.trace {
        write_solver_trace(path, &sol.report)?;
    }
    emit(&a.out, &io::solution_to_json(&sol))
}

#[derive(Serialize)]
struct MaxFlowDoc {
    format: u32,
    kind: &'static str,
    value: f64,
    cut_capacity: f64,
    sources: Vec<usize>,
    sinks: Vec<usize>,
    source_side: Vec<usize>,
    arc_flows: Vec<f64>,
}

pub fn maxflow(a: MaxflowArgs) -> Outcome {
    let p = flow_problem(&a.problem)?;
    let g = &p.graph;
    let pick = |flag: &Option<Vec<usize>>, positive: bool| -> Result<Vec<NodeId>, Failure> {
        match flag {
            Some(list) => list.iter().map(|&i| node(g, i)).collect(),
            None => Ok(p
                .injections
                .iter()
                .enumerate()
                .filter(|(_, v)| if positive { **v > 0.0 } else { **v < 0.0 })
                .map(|(i, _)| NodeId(i))
                .collect()),
        }
    };
    let sources = pick(&a.sources, true)?;
    let sinks = pick(&a.sinks, false)?;
    if sources.is_empty() || sinks.is_empty() {
        return Err(Failure::invalid(
            "cli::NoTerminals",
            "both a source and a sink are required",
        ));
    }
    let caps: Vec<ArcCapacity> = p
        .lower
        .iter()
        .zip(&p.upper)
        .map(|(&lo, &hi)| ArcCapacity::from_box(lo, hi))
        .collect();
    let r = max_flow(g, &sources, &sinks, &caps)?;
    let doc = MaxFlowDoc {
        format: io::FORMAT,
        kind: "max-flow",
        value: r.value,
        cut_capacity: r.cut_capacity,
        sources: sources.iter().map(|v| v.0).collect(),
        sinks: sinks.iter().map(|v| v.0).collect(),
        source_side: (0..g.node_count()).filter(|&v| r.source_side[v]).collect(),
        arc_flows: r.arc_flows,
    };
    emit(&a.out, &to_json(&doc))
}

pub fn opf(a: OpfArgs) -> Outcome {
    let p = opf_problem(&a.problem)?;
    let params = solver_params(&a.solver);
    let sol = if a.full {
        p.solve_full(&params)?
    } else {
        let g = &p.graph;
        let b = basis_for(g, &a.basis)?;
        let elems = ElementarySolutionSet::all(g, reference_node(g, a.basis.ref_node)?)?;
        opf::solve_opf(&opf::reduce_opf(&p, &b, &elems)?, &params)?
    };
    let residuals = opf::validate_opf_solution(&p, &sol)?;
    emit(&a.out, &io::opf_solution_to_json(&sol, Some(&residuals)))
}

#[derive(Serialize)]
struct SimulationDoc {
    format: u32,
    kind: &'static str,
    converged: bool,
    rounds: usize,
    agents: usize,
    converged_at: Vec<Option<usize>>,
    objective: f64,
    flows: Vec<f64>,
    cycle_flows: Vec<f64>,
}

fn admm_params(a: &SimulateArgs) -> AdmmParams {
    let mut p = AdmmParams::default();
    if let Some(v) = a.rho {
        p.rho = v;
    }
    if let Some(v) = a.tolerance {
        p.tolerance = v;
    }
    if let Some(v) = a.max_rounds {
        p.max_rounds = v;
    }
    p.curvature_scaling = !a.no_curvature_scaling;
    p
}

pub fn simulate(a: SimulateArgs) -> Outcome {
    let base = flow_problem(&a.problem)?;
    let g = &base.graph;
    let schedule = match &a.schedule {
        Some(path) => io::load_schedule(path)?,
        None => vec![ScheduleEntry {
            round: 0,
            injections: base.injections.clone(),
        }],
    };
    let mut phases = Vec::with_capacity(schedule.len());
    for (k, e) in schedule.iter().enumerate() {
        let q = base.with_injections(e.injections.clone())?;
        if !q.check_capacity_feasibility()? {
            return Err(Failure::invalid(
                "cli::CapacityInfeasible",
                format!(
                    "phase {k} (round {}) cannot be routed within the capacity box",
                    e.round
                ),
            ));
        }
        phases.push(q);
    }
    let b = basis_for(g, &a.basis)?;
    let injections: Vec<&[f64]> = schedule.iter().map(|e| e.injections.as_slice()).collect();
    let elems = terminal_solutions(g, reference_node(g, a.basis.ref_node)?, &injections)?;
    let references = match &a.reference {
        Some(path) => io::parse_reference(&io::read_text(path)?)?,
        None => {
            let mut refs = Vec::with_capacity(phases.len());
            for q in &phases {
                let xp = particular_solution(&elems, &q.injections)?;
                refs.push(
                    reduce_flow(q, &b, &xp)?
                        .solve(&SolverParams::default())?
                        .flows,
                );
            }
            refs
        }
    };
    if let Some(path) = &a.save_reference {
        io::write_file(path, &io::reference_to_json(&references))?;
    }
    let xp = particular_solution(&elems, &phases[0].injections)?;
    let layer = admm::build_cyber_layer(g, &b, &xp)?;
    let result = admm::run(
        &phases[0],
        &layer,
        &elems,
        &admm_params(&a),
        &schedule,
        &references,
        a.threads,
    );
    let (out, converged) = match result {
        Ok(out) => (out, true),
        Err(AdmmError::MaxRounds(out)) => (*out, false),
        Err(e) => return Err(e.into()),
    };
    if let Some(path) = &a.trace {
        io::emit_trace(&out.trace, path)?;
    }
    if !converged {
        return Err(AdmmError::MaxRounds(Box::new(out)).into());
    }
    let last = schedule.len() - 1;
    emit(
        &a.out,
        &to_json(&summary(&phases[last], &out, layer.agent_count())),
    )
}

fn summary(p: &FlowProblem, out: &AdmmOutcome, agents: usize) -> SimulationDoc {
    SimulationDoc {
        format: io::FORMAT,
        kind: "simulation",
        converged: true,
        rounds: out.trace.len(),
        agents,
        converged_at: out.converged_at.clone(),
        objective: p.objective(&out.flows),
        flows: out.flows.clone(),
        cycle_flows: out.z.clone(),
    }
}

fn check(name: &str, ok: bool, message: impl FnOnce() -> String) -> Outcome {
    if ok {
        Ok(())
    } else {
        Err(Failure::invalid(name, message()))
    }
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn validate_flow_solution(flows: &[f64], p: &FlowProblem) -> Outcome {
    check(
        "validate::Shape",
        flows.len() == p.graph.arc_count(),
        || format!("{} flows for {} arcs", flows.len(), p.graph.arc_count()),
    )?;
    let net = p.graph.incidence().mul(flows);
    let scale = 1.0 + max_abs(p.injections.iter().copied());
    for (i, (x, f)) in net.iter().zip(&p.injections).enumerate() {
        check(
            "validate::Conservation",
            (x - f).abs() <= TOLERANCE * scale,
            || format!("node {} is off balance by {:e}", NodeId(i), x - f),
        )?;
    }
    for (j, x) in flows.iter().enumerate() {
        let (lo, hi) = (p.lower[j], p.upper[j]);
        check(
            "validate::Bounds",
            *x >= lo - TOLERANCE && *x <= hi + TOLERANCE,
            || format!("arc e{} carries {x} outside [{lo}, {hi}]", j + 1),
        )?;
    }
    Ok(())
}

fn validate_schedule(entries: &[ScheduleEntry], p: Option<&FlowProblem>) -> Outcome {
    check("validate::Schedule", entries[0].round == 0, || {
        "the first entry must start at round 0".into()
    })?;
    check(
        "validate::Schedule",
        entries.windows(2).all(|w| w[0].round < w[1].round),
        || "rounds must be strictly increasing".into(),
    )?;
    if let Some(p) = p {
        for e in entries {
            if !p
                .with_injections(e.injections.clone())?
                .check_capacity_feasibility()?
            {
                return Err(Failure::invalid(
                    "cli::CapacityInfeasible",
                    format!(
                        "injections at round {} cannot be routed within the capacity box",
                        e.round
                    ),
                ));
            }
        }
    }
    Ok(())
}

pub fn validate(a: ValidateArgs) -> Outcome {
    let text = io::read_text(&a.file)?;
    let kind = io::detect_kind(&text)?;
    let flow = |path: &Option<PathBuf>| -> Result<Option<FlowProblem>, Failure> {
        path.as_deref().map(flow_problem).transpose()
    };
    let summary = match kind {
        DocumentKind::Graph => {
            let g = io::parse_graph(&text)?;
            check("GraphError::NotConnected", g.is_connected(), || {
                "graph is not connected".into()
            })?;
            format!(
                "graph: {} nodes, {} arcs, cycle rank {}",
                g.node_count(),
                g.arc_count(),
                g.cycle_rank()
            )
        }
        DocumentKind::Flow => {
            let p = match io::parse_problem(&text)? {
                Problem::Flow(p) => p,
                Problem::Opf(_) => unreachable!("kind is flow"),
            };
            if !p.check_capacity_feasibility()? {
                return Err(Failure::invalid(
                    "cli::CapacityInfeasible",
                    "injections cannot be routed within the capacity box",
                ));
            }
            format!(
                "flow problem: {} nodes, {} arcs",
                p.graph.node_count(),
                p.graph.arc_count()
            )
        }
        DocumentKind::Opf => {
            let p = io::parse_problem(&text)?;
            let horizon = match &p {
                Problem::Opf(o) => o.horizon,
                Problem::Flow(_) => unreachable!("kind is opf"),
            };
            format!(
                "opf problem: {} nodes, {} arcs, {horizon} periods",
                p.graph().node_count(),
                p.graph().arc_count()
            )
        }
        DocumentKind::Basis => {
            let b = io::parse_basis(&text)?;
            match &a.problem {
                Some(path) => {
                    certify(&b, &io::load_graph(path)?)?;
                    format!("basis: {} cycles, certified", b.mu())
                }
                None => format!("basis: {} cycles", b.mu()),
            }
        }
        DocumentKind::Schedule => {
            let s = io::parse_schedule(&text)?;
            validate_schedule(&s, flow(&a.problem)?.as_ref())?;
            format!("schedule: {} phases", s.len())
        }
        DocumentKind::Reference => {
            let phases = io::parse_reference(&text)?;
            if let Some(p) = flow(&a.problem)? {
                let problems = match &a.schedule {
                    Some(path) => {
                        let s = io::load_schedule(path)?;
                        check("validate::Shape", s.len() == phases.len(), || {
                            format!(
                                "{} reference phases for {} schedule entries",
                                phases.len(),
                                s.len()
                            )
                        })?;
                        s.into_iter()
                            .map(|e| p.with_injections(e.injections))
                            .collect::<Result<Vec<_>, _>>()?
                    }
                    None => vec![p; phases.len()],
                };
                for (k, (x, p)) in phases.iter().zip(&problems).enumerate() {
                    validate_flow_solution(x, p).map_err(|f| Failure {
                        message: format!("phase {k}: {}", f.message),
                        ..f
                    })?;
                }
            }
            format!("reference: {} phases", phases.len())
        }
        DocumentKind::FlowSolution => {
            let s = io::parse_solution(&text)?;
            if let Some(p) = flow(&a.problem)? {
                validate_flow_solution(&s.flows, &p)?;
            }
            format!("flow solution: objective {}", s.objective)
        }
        DocumentKind::OpfSolution => {
            let s = io::parse_opf_solution(&text)?;
            if let Some(path) = &a.problem {
                let p = opf_problem(path)?;
                let r = opf::validate_opf_solution(&p, &s.solution)?;
                check("validate::Residual", r.max() <= TOLERANCE, || {
                    format!("largest residual {:e}", r.max())
                })?;
            }
            format!("opf solution: objective {}", s.solution.objective)
        }
    };
    print_line(&format!("ok: {summary}"));
    Ok(())
}
