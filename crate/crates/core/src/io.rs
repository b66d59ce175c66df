//! JSON documents, CSV traces and the bundled fixtures.
//!
//! Every document carries `"format": 1`. Node and arc indices are 0-based.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admm::{RoundTrace, ScheduleEntry};
use crate::cycles::{BasisMethod, CycleBasis};
use crate::graph::{GraphError, OrientedGraph};
use crate::opf::{Bus, Line, OpfError, OpfProblem, OpfResiduals, OpfSolution};
use crate::reduction::{FlowProblem, QuadraticCost, ReducedFlowProblem, ReductionError};
use crate::solver::SolveStatus;

pub const FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid field `{0}`: {1}")]
    Validation(String, String),
    #[error("trace is empty")]
    EmptyTrace,
}

impl IoError {
    fn invalid(field: &str, reason: impl Into<String>) -> Self {
        IoError::Validation(field.to_string(), reason.into())
    }

    /// `(field, reason)` for validation failures.
    pub fn field(&self) -> Option<(&str, &str)> {
        match self {
            IoError::Validation(f, r) => Some((f, r)),
            _ => None,
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    fs::write(path, contents).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn check_format(v: &serde_json::Value) -> Result<(), IoError> {
    match v.get("format").and_then(|f| f.as_u64()) {
        Some(1) => Ok(()),
        Some(other) => Err(IoError::invalid(
            "format",
            format!("unsupported version {other}"),
        )),
        None => Err(IoError::invalid("format", "missing")),
    }
}

fn from_value<T: for<'de> Deserialize<'de>>(v: serde_json::Value) -> Result<T, IoError> {
    serde_json::from_value(v).map_err(|e| IoError::Parse(e.to_string()))
}

fn parse_value(text: &str) -> Result<serde_json::Value, IoError> {
    serde_json::from_str(text).map_err(|e| IoError::Parse(e.to_string()))
}

/// An arc as `[tail, head]` or `{"tail": t, "head": h, "weight": w?}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArcEntry {
    Pair([usize; 2]),
    Object {
        tail: usize,
        head: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight: Option<f64>,
    },
}

impl ArcEntry {
    fn ends(&self) -> (usize, usize) {
        match *self {
            ArcEntry::Pair([t, h]) => (t, h),
            ArcEntry::Object { tail, head, .. } => (tail, head),
        }
    }

    fn weight(&self) -> Option<f64> {
        match *self {
            ArcEntry::Pair(_) => None,
            ArcEntry::Object { weight, .. } => weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub nodes: usize,
    pub arcs: Vec<ArcEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl GraphDoc {
    pub fn from_graph(g: &OrientedGraph) -> Self {
        let w = g.weights();
        Self {
            nodes: g.node_count(),
            arcs: g
                .arcs()
                .iter()
                .map(|a| ArcEntry::Pair([a.tail.0, a.head.0]))
                .collect(),
            weights: w.iter().any(|&x| x != 1.0).then_some(w),
        }
    }

    pub fn to_graph(&self) -> Result<OrientedGraph, IoError> {
        let inline = self.arcs.iter().any(|a| a.weight().is_some());
        let res = match &self.weights {
            Some(_) if inline => {
                return Err(IoError::invalid(
                    "graph.weights",
                    "weights given both per arc and as an array",
                ))
            }
            None if inline => OrientedGraph::with_weights(
                self.nodes,
                self.arcs.iter().map(|a| {
                    let (t, h) = a.ends();
                    (t, h, a.weight().unwrap_or(1.0))
                }),
            ),
            None => OrientedGraph::new(
                self.nodes,
                &self.arcs.iter().map(ArcEntry::ends).collect::<Vec<_>>(),
            ),
            Some(w) => {
                if w.len() != self.arcs.len() {
                    return Err(IoError::invalid("graph.weights", "one weight per arc"));
                }
                OrientedGraph::with_weights(
                    self.nodes,
                    self.arcs.iter().zip(w).map(|(a, &x)| {
                        let (t, h) = a.ends();
                        (t, h, x)
                    }),
                )
            }
        };
        res.map_err(graph_error)
    }
}

fn graph_error(e: GraphError) -> IoError {
    let field = match e {
        GraphError::BadWeight(_) | GraphError::WeightLength { .. } => "graph.weights",
        GraphError::Empty => "graph.nodes",
        _ => "graph.arcs",
    };
    IoError::invalid(field, e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowProblemDoc {
    pub format: u32,
    pub kind: String,
    pub graph: GraphDoc,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub costs: Vec<QuadraticCost>,
    pub injections: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpfProblemDoc {
    pub format: u32,
    pub kind: String,
    pub graph: GraphDoc,
    pub horizon: usize,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    #[serde(default)]
    pub terminal_storage: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GraphOnlyDoc {
    format: u32,
    kind: String,
    graph: GraphDoc,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Flow(FlowProblem),
    Opf(OpfProblem),
}

impl Problem {
    pub fn graph(&self) -> &OrientedGraph {
        match self {
            Problem::Flow(p) => &p.graph,
            Problem::Opf(p) => &p.graph,
        }
    }
}

fn flow_error(e: ReductionError) -> IoError {
    match e {
        ReductionError::UnbalancedInjection(_) => IoError::invalid("injections", "unbalanced"),
        ReductionError::Invalid(r) if r.contains("cost") => IoError::invalid("costs", r),
        ReductionError::Invalid(r) if r.contains("injections") => IoError::invalid("injections", r),
        ReductionError::Invalid(r) => IoError::invalid("lower", r),
        other => IoError::invalid("problem", other.to_string()),
    }
}

fn opf_error(e: OpfError) -> IoError {
    match e {
        OpfError::HorizonMismatch(r) => IoError::invalid("horizon", r),
        OpfError::ShapeMismatch(r) if r.contains("buses") => IoError::invalid("buses", r),
        OpfError::ShapeMismatch(r) if r.contains("lines") => IoError::invalid("lines", r),
        OpfError::ShapeMismatch(r) => IoError::invalid("terminal_storage", r),
        OpfError::Invalid(r) if r.starts_with("line") => IoError::invalid("lines", r),
        OpfError::Invalid(r) => IoError::invalid("buses", r),
        other => IoError::invalid("problem", other.to_string()),
    }
}

impl FlowProblemDoc {
    pub fn from_problem(p: &FlowProblem) -> Self {
        Self {
            format: FORMAT,
            kind: "flow".into(),
            graph: GraphDoc::from_graph(&p.graph),
            lower: p.lower.clone(),
            upper: p.upper.clone(),
            costs: p.costs.clone(),
            injections: p.injections.clone(),
        }
    }

    pub fn to_problem(&self) -> Result<FlowProblem, IoError> {
        let g = self.graph.to_graph()?;
        let m = g.arc_count();
        for (field, len) in [
            ("lower", self.lower.len()),
            ("upper", self.upper.len()),
            ("costs", self.costs.len()),
        ] {
            if len != m {
                return Err(IoError::invalid(
                    field,
                    format!("expected {m} entries, found {len}"),
                ));
            }
        }
        if self.injections.len() != g.node_count() {
            return Err(IoError::invalid(
                "injections",
                format!(
                    "expected {} entries, found {}",
                    g.node_count(),
                    self.injections.len()
                ),
            ));
        }
        FlowProblem::new(
            g,
            self.lower.clone(),
            self.upper.clone(),
            self.costs.clone(),
            self.injections.clone(),
        )
        .map_err(flow_error)
    }
}

impl OpfProblemDoc {
    pub fn from_problem(p: &OpfProblem) -> Self {
        Self {
            format: FORMAT,
            kind: "opf".into(),
            graph: GraphDoc::from_graph(&p.graph),
            horizon: p.horizon,
            buses: p.buses.clone(),
            lines: p.lines.clone(),
            terminal_storage: p.terminal_storage.clone(),
        }
    }

    pub fn to_problem(&self) -> Result<OpfProblem, IoError> {
        let g = self.graph.to_graph()?;
        OpfProblem::new(
            g,
            self.horizon,
            self.buses.clone(),
            self.lines.clone(),
            self.terminal_storage.clone(),
        )
        .map_err(opf_error)
    }
}

fn kind(v: &serde_json::Value) -> Result<String, IoError> {
    v.get("kind")
        .and_then(|k| k.as_str())
        .map(str::to_string)
        .ok_or_else(|| IoError::invalid("kind", "missing"))
}

pub fn parse_problem(text: &str) -> Result<Problem, IoError> {
    let v = parse_value(text)?;
    check_format(&v)?;
    match kind(&v)?.as_str() {
        "flow" => Ok(Problem::Flow(
            from_value::<FlowProblemDoc>(v)?.to_problem()?,
        )),
        "opf" => Ok(Problem::Opf(from_value::<OpfProblemDoc>(v)?.to_problem()?)),
        other => Err(IoError::invalid(
            "kind",
            format!("expected flow or opf, found {other}"),
        )),
    }
}

pub fn load_problem(path: &Path) -> Result<Problem, IoError> {
    parse_problem(&read_text(path)?)
}

/// Any document with a `graph` field: graph, flow or OPF files. A bare
/// `{"nodes": n, "arcs": [...]}` object is read as a graph; its `format`
/// field is optional.
pub fn parse_graph(text: &str) -> Result<OrientedGraph, IoError> {
    let v = parse_value(text)?;
    if v.get("kind").is_none() && v.get("nodes").is_some() {
        if v.get("format").is_some() {
            check_format(&v)?;
        }
        return from_value::<GraphDoc>(v)?.to_graph();
    }
    check_format(&v)?;
    match kind(&v)?.as_str() {
        "graph" => from_value::<GraphOnlyDoc>(v)?.graph.to_graph(),
        "flow" | "opf" => Ok(parse_problem(&v.to_string())?.graph().clone()),
        other => Err(IoError::invalid(
            "kind",
            format!("no graph in a {other} document"),
        )),
    }
}

pub fn load_graph(path: &Path) -> Result<OrientedGraph, IoError> {
    parse_graph(&read_text(path)?)
}

pub fn graph_to_json(g: &OrientedGraph) -> String {
    pretty(&GraphOnlyDoc {
        format: FORMAT,
        kind: "graph".into(),
        graph: GraphDoc::from_graph(g),
    })
}

pub fn problem_to_json(p: &Problem) -> String {
    match p {
        Problem::Flow(p) => pretty(&FlowProblemDoc::from_problem(p)),
        Problem::Opf(p) => pretty(&OpfProblemDoc::from_problem(p)),
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("documents serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisDoc {
    pub format: u32,
    pub method: BasisMethod,
    pub arc_count: usize,
    pub mu: usize,
    /// One row of `{-1, 0, 1}` entries per cycle.
    pub cycles: Vec<Vec<i8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defining_arcs: Option<Vec<Option<usize>>>,
}

impl BasisDoc {
    pub fn from_basis(b: &CycleBasis) -> Self {
        let defining: Vec<Option<usize>> = b
            .cycles
            .iter()
            .map(|c| c.defining_arc.map(|a| a.0))
            .collect();
        Self {
            format: FORMAT,
            method: b.method,
            arc_count: b.arc_count,
            mu: b.mu(),
            cycles: b.matrix(),
            defining_arcs: defining.iter().any(Option::is_some).then_some(defining),
        }
    }

    pub fn to_basis(&self) -> Result<CycleBasis, IoError> {
        if self.format != FORMAT {
            return Err(IoError::invalid(
                "format",
                format!("unsupported version {}", self.format),
            ));
        }
        if self.mu != self.cycles.len() {
            return Err(IoError::invalid(
                "mu",
                "does not match the number of cycles",
            ));
        }
        let defining = self
            .defining_arcs
            .as_ref()
            .map(|d| d.iter().map(|a| a.map(crate::graph::ArcId)).collect());
        CycleBasis::from_rows(self.cycles.clone(), self.arc_count, defining, self.method)
            .map_err(|e| IoError::invalid("cycles", e.to_string()))
    }
}

pub fn basis_to_json(b: &CycleBasis) -> String {
    pretty(&BasisDoc::from_basis(b))
}

pub fn parse_basis(text: &str) -> Result<CycleBasis, IoError> {
    let v = parse_value(text)?;
    check_format(&v)?;
    from_value::<BasisDoc>(v)?.to_basis()
}

pub fn load_basis(path: &Path) -> Result<CycleBasis, IoError> {
    parse_basis(&read_text(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedDoc {
    pub format: u32,
    pub kind: String,
    pub mu: usize,
    pub basis: BasisDoc,
    pub particular: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub costs: Vec<QuadraticCost>,
}

impl ReducedDoc {
    pub fn from_reduced(r: &ReducedFlowProblem) -> Self {
        Self {
            format: FORMAT,
            kind: "reduced".into(),
            mu: r.mu(),
            basis: BasisDoc::from_basis(&r.basis),
            particular: r.particular.clone(),
            lower: r.lower.clone(),
            upper: r.upper.clone(),
            costs: r.costs.clone(),
        }
    }
}

pub fn reduced_to_json(r: &ReducedFlowProblem) -> String {
    pretty(&ReducedDoc::from_reduced(r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub format: u32,
    pub kind: String,
    pub status: SolveStatus,
    pub objective: f64,
    pub iterations: usize,
    pub flows: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle_flows: Option<Vec<f64>>,
}

pub fn solution_to_json(s: &crate::reduction::FlowSolution) -> String {
    pretty(&SolutionDoc {
        format: FORMAT,
        kind: "flow-solution".into(),
        status: s.report.status,
        objective: s.objective,
        iterations: s.report.iterations,
        flows: s.flows.clone(),
        cycle_flows: s.cycle_flows.clone(),
    })
}

pub fn parse_solution(text: &str) -> Result<SolutionDoc, IoError> {
    let v = parse_value(text)?;
    check_format(&v)?;
    from_value(v)
}

/// OPF trajectories with their constraint residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpfSolutionDoc {
    pub format: u32,
    pub kind: String,
    pub status: SolveStatus,
    #[serde(flatten)]
    pub solution: OpfSolution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<OpfResiduals>,
}

pub fn opf_solution_to_json(s: &OpfSolution, residuals: Option<&OpfResiduals>) -> String {
    pretty(&OpfSolutionDoc {
        format: FORMAT,
        kind: "opf-solution".into(),
        status: s.report.status,
        solution: s.clone(),
        residuals: residuals.cloned(),
    })
}

pub fn parse_opf_solution(text: &str) -> Result<OpfSolutionDoc, IoError> {
    let v = parse_value(text)?;
    check_format(&v)?;
    from_value(v)
}

/// What a JSON document holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentKind {
    Graph,
    Flow,
    Opf,
    Basis,
    Schedule,
    Reference,
    FlowSolution,
    OpfSolution,
}

/// Classifies a document by its `kind` field, or by shape for documents
/// without one.
pub fn detect_kind(text: &str) -> Result<DocumentKind, IoError> {
    let v = parse_value(text)?;
    if v.is_array() {
        return Ok(DocumentKind::Schedule);
    }
    if let Some(k) = v.get("kind").and_then(|k| k.as_str()) {
        return match k {
            "graph" => Ok(DocumentKind::Graph),
            "flow" => Ok(DocumentKind::Flow),
            "opf" => Ok(DocumentKind::Opf),
            "flow-solution" => Ok(DocumentKind::FlowSolution),
            "opf-solution" => Ok(DocumentKind::OpfSolution),
            other => Err(IoError::invalid(
                "kind",
                format!("unknown document kind {other}"),
            )),
        };
    }
    if v.get("nodes").is_some() {
        Ok(DocumentKind::Graph)
    } else if v.get("cycles").is_some() {
        Ok(DocumentKind::Basis)
    } else if v.get("entries").is_some() {
        Ok(DocumentKind::Schedule)
    } else if v.get("phases").is_some() {
        Ok(DocumentKind::Reference)
    } else {
        Err(IoError::invalid("kind", "missing"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum ScheduleFile {
    Bare(Vec<ScheduleEntry>),
    Versioned {
        format: u32,
        entries: Vec<ScheduleEntry>,
    },
}

/// Accepts a bare array of entries or `{"format": 1, "entries": [...]}`.
pub fn parse_schedule(text: &str) -> Result<Vec<ScheduleEntry>, IoError> {
    let file: ScheduleFile =
        serde_json::from_str(text).map_err(|e| IoError::Parse(e.to_string()))?;
    let entries = match file {
        ScheduleFile::Bare(e) => e,
        ScheduleFile::Versioned { format, entries } => {
            if format != FORMAT {
                return Err(IoError::invalid(
                    "format",
                    format!("unsupported version {format}"),
                ));
            }
            entries
        }
    };
    if entries.is_empty() {
        return Err(IoError::invalid("entries", "schedule is empty"));
    }
    if entries[0].round != 0 {
        return Err(IoError::invalid(
            "entries",
            "the first entry must start at round 0",
        ));
    }
    if entries.windows(2).any(|w| w[1].round <= w[0].round) {
        return Err(IoError::invalid(
            "entries",
            "rounds must be strictly increasing",
        ));
    }
    Ok(entries)
}

pub fn load_schedule(path: &Path) -> Result<Vec<ScheduleEntry>, IoError> {
    parse_schedule(&read_text(path)?)
}

pub fn schedule_to_json(entries: &[ScheduleEntry]) -> String {
    pretty(&ScheduleFile::Versioned {
        format: FORMAT,
        entries: entries.to_vec(),
    })
}

/// Centralized arc flows, one vector per schedule phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDoc {
    pub format: u32,
    pub phases: Vec<Vec<f64>>,
}

pub fn parse_reference(text: &str) -> Result<Vec<Vec<f64>>, IoError> {
    let v = parse_value(text)?;
    check_format(&v)?;
    Ok(from_value::<ReferenceDoc>(v)?.phases)
}

pub fn reference_to_json(phases: &[Vec<f64>]) -> String {
    pretty(&ReferenceDoc {
        format: FORMAT,
        phases: phases.to_vec(),
    })
}

/// Writes one row per round and agent:
/// `round,phase,switch,agent,disagreement,dual_residual,objective,err_0,...`.
pub fn write_trace<W: Write>(trace: &RoundTrace, mut w: W) -> Result<(), IoError> {
    let io = |source| IoError::Io {
        path: "trace".into(),
        source,
    };
    if trace.is_empty() {
        return Err(IoError::EmptyTrace);
    }
    let m = trace.rounds[0].arc_error.len();
    let mut header = String::from("round,phase,switch,agent,disagreement,dual_residual,objective");
    for j in 0..m {
        header.push_str(&format!(",err_{j}"));
    }
    writeln!(w, "{header}").map_err(io)?;
    for r in &trace.rounds {
        let errs: String = r.arc_error.iter().map(|e| format!(",{e}")).collect();
        for (a, d) in r.disagreement.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}{}",
                r.round,
                r.phase,
                u8::from(r.switched),
                a,
                d,
                r.dual_residual,
                r.objective,
                errs
            )
            .map_err(io)?;
        }
    }
    Ok(())
}

pub fn trace_to_csv(trace: &RoundTrace) -> Result<String, IoError> {
    let mut buf = Vec::new();
    write_trace(trace, &mut buf)?;
    Ok(String::from_utf8(buf).expect("trace is ASCII"))
}

/// Writes the trace CSV to `path`. An empty trace is an error and leaves no
/// file behind.
pub fn emit_trace(trace: &RoundTrace, path: &Path) -> Result<(), IoError> {
    let csv = trace_to_csv(trace)?;
    write_file(path, &csv)
}

/// Bundled fixtures.
pub mod fixtures {
    use super::*;

    pub const IEEE30_JSON: &str = include_str!("../fixtures/ieee30.json");
    pub const ELEVEN_NODE_JSON: &str = include_str!("../fixtures/eleven_node.json");
    pub const ELEVEN_NODE_SCHEDULE_JSON: &str =
        include_str!("../fixtures/eleven_node_schedule.json");
    pub const TRIANGLE_JSON: &str = include_str!("../fixtures/triangle.json");
    pub const OPF_SMALL_JSON: &str = include_str!("../fixtures/opf_small.json");

    /// SHA-256 of `ieee30.json`.
    pub const IEEE30_SHA256: &str =
        "24902b6e455d4957a12db7bd5b09f3fa4342aea4b3f9a31833ef779cd0a8e1a5";

    /// Max flow from {v1, v4} to {v9, v11} on the 11-node example under its
    /// capacity box.
    pub const ELEVEN_NODE_MAX_FLOW: f64 = 82.0;

    pub fn ieee30() -> OrientedGraph {
        parse_graph(IEEE30_JSON).expect("bundled fixture")
    }

    fn flow(text: &str) -> FlowProblem {
        match parse_problem(text).expect("bundled fixture") {
            Problem::Flow(p) => p,
            Problem::Opf(_) => unreachable!("fixture is a flow problem"),
        }
    }

    pub fn eleven_node() -> FlowProblem {
        flow(ELEVEN_NODE_JSON)
    }

    pub fn eleven_node_schedule() -> Vec<ScheduleEntry> {
        parse_schedule(ELEVEN_NODE_SCHEDULE_JSON).expect("bundled fixture")
    }

    pub fn triangle() -> FlowProblem {
        flow(TRIANGLE_JSON)
    }

    pub fn opf_small() -> OpfProblem {
        match parse_problem(OPF_SMALL_JSON).expect("bundled fixture") {
            Problem::Opf(p) => p,
            Problem::Flow(_) => unreachable!("fixture is an OPF problem"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admm::RoundRecord;
    use crate::cycles::horton_basis;

    #[test]
    fn triangle_problem_loads() {
        let p = fixtures::triangle();
        assert_eq!(p.graph.node_count(), 3);
        assert_eq!(p.graph.arc_count(), 3);
    }

    #[test]
    fn ieee30_dimensions() {
        let g = fixtures::ieee30();
        assert_eq!((g.node_count(), g.arc_count()), (30, 41));
    }

    #[test]
    fn unbalanced_injections_name_the_field() {
        let text = TRIANGLE_UNBALANCED;
        let err = parse_problem(text).unwrap_err();
        assert_eq!(err.field(), Some(("injections", "unbalanced")));
    }

    const TRIANGLE_UNBALANCED: &str = r#"{"format": 1, "kind": "flow",
        "graph": {"nodes": 3, "arcs": [[0, 1], [1, 2], [0, 2]]},
        "lower": [-1, -1, -1], "upper": [1, 1, 1],
        "costs": [{"quadratic": 1, "linear": 0}, {"quadratic": 1, "linear": 0}, {"quadratic": 1, "linear": 0}],
        "injections": [1, 0, 0]}"#;

    #[test]
    fn field_errors() {
        let bad_arc = TRIANGLE_UNBALANCED.replace("[0, 2]]", "[0, 7]]");
        assert_eq!(
            parse_problem(&bad_arc).unwrap_err().field().unwrap().0,
            "graph.arcs"
        );
        let short = TRIANGLE_UNBALANCED.replace("\"lower\": [-1, -1, -1]", "\"lower\": [-1]");
        assert_eq!(
            parse_problem(&short).unwrap_err().field().unwrap().0,
            "lower"
        );
        let v2 = TRIANGLE_UNBALANCED.replace("\"format\": 1", "\"format\": 2");
        assert_eq!(parse_problem(&v2).unwrap_err().field().unwrap().0, "format");
        assert!(matches!(parse_problem("{"), Err(IoError::Parse(_))));
    }

    #[test]
    fn problem_round_trip() {
        for text in [
            fixtures::TRIANGLE_JSON,
            fixtures::ELEVEN_NODE_JSON,
            fixtures::OPF_SMALL_JSON,
        ] {
            let p = parse_problem(text).unwrap();
            let again = parse_problem(&problem_to_json(&p)).unwrap();
            assert_eq!(p, again);
        }
    }

    #[test]
    fn basis_round_trip() {
        let g = fixtures::ieee30();
        let b = horton_basis(&g).unwrap();
        let again = parse_basis(&basis_to_json(&b)).unwrap();
        assert_eq!(b, again);
    }

    #[test]
    fn schedule_forms() {
        let bare = r#"[{"round": 0, "injections": [1, -1]}]"#;
        assert_eq!(parse_schedule(bare).unwrap().len(), 1);
        let s = fixtures::eleven_node_schedule();
        assert_eq!(s[1].round, 50);
        assert_eq!(parse_schedule(&schedule_to_json(&s)).unwrap(), s);
        assert!(parse_schedule(r#"[{"round": 3, "injections": []}]"#).is_err());
    }

    fn record(round: usize, agents: usize) -> RoundRecord {
        RoundRecord {
            round,
            phase: 0,
            switched: false,
            disagreement: vec![0.5; agents],
            dual_residual: 0.25,
            objective: 1.0,
            arc_error: vec![0.0, 1.5],
        }
    }

    #[test]
    fn trace_rows() {
        let trace = RoundTrace {
            rounds: vec![record(0, 3)],
        };
        let csv = trace_to_csv(&trace).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[0],
            "round,phase,switch,agent,disagreement,dual_residual,objective,err_0,err_1"
        );
        assert_eq!(lines[1], "0,0,0,0,0.5,0.25,1,0,1.5");
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn empty_trace_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        assert!(matches!(
            emit_trace(&RoundTrace::default(), &path),
            Err(IoError::EmptyTrace)
        ));
        assert!(!path.exists());
    }
}
