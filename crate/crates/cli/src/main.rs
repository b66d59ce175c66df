mod commands;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  invalid input, failed validation, infeasible problem or I/O error
  2  a solver stopped before converging

Node indices in files and flags are 0-based; messages label nodes v1, v2, ...";

#[derive(Debug, Parser)]
#[command(name = "cycleflow", version, about = "Cycle-basis reduction of network flow problems", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute an oriented cycle basis of a graph or problem file.
    Basis(BasisArgs),
    /// Reduce a flow problem to cycle-flow variables.
    Reduce(ReduceArgs),
    /// Solve a flow problem in arc space or over a cycle basis.
    Solve(SolveArgs),
    /// Maximum flow between terminal sets under the capacity box.
    Maxflow(MaxflowArgs),
    /// Solve a multi-period OPF problem.
    Opf(OpfArgs),
    /// Run the distributed consensus solver over an injection schedule.
    Simulate(SimulateArgs),
    /// Check a document, optionally against a problem file.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Fundamental cycles of a BFS spanning tree
    Tree,
    /// Minimum-weight basis from Horton candidates
    Horton,
}

#[derive(Debug, Args)]
pub struct BasisSource {
    /// Cycle basis file; computed from the graph when absent
    #[arg(long, value_name = "FILE")]
    pub basis: Option<PathBuf>,
    /// Basis construction used when no basis file is given
    #[arg(long, value_enum, default_value_t = Method::Horton)]
    pub method: Method,
    /// Reference node for elementary solutions (default: the last node)
    #[arg(long, value_name = "N")]
    pub ref_node: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Iteration limit of the QP solver
    #[arg(long, value_name = "N")]
    pub max_iterations: Option<usize>,
    /// Absolute tolerance of the QP solver
    #[arg(long, value_name = "EPS")]
    pub eps_abs: Option<f64>,
    /// Relative tolerance of the QP solver
    #[arg(long, value_name = "EPS")]
    pub eps_rel: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BasisArgs {
    /// Graph, flow or OPF problem file
    pub input: PathBuf,
    /// Basis construction
    #[arg(long, value_enum, default_value_t = Method::Horton)]
    pub method: Method,
    /// Write the basis here instead of stdout
    #[arg(short, long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    /// Flow problem file
    pub problem: PathBuf,
    #[command(flatten)]
    pub basis: BasisSource,
    /// Write the reduced problem here instead of stdout
    #[arg(short, long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Flow problem file
    pub problem: PathBuf,
    /// Solve over the cycle basis in this file instead of in arc space
    #[arg(long, value_name = "BASIS")]
    pub reduced: Option<PathBuf>,
    /// Reference node for elementary solutions (default: the last node)
    #[arg(long, value_name = "N")]
    pub ref_node: Option<usize>,
    /// Write the per-iteration residual trace as CSV
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the solution here instead of stdout
    #[arg(short, long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MaxflowArgs {
    /// Flow problem file
    pub problem: PathBuf,
    /// Source nodes, comma separated (default: nodes with positive injection)
    #[arg(long, value_delimiter = ',', value_name = "N,...")]
    pub sources: Option<Vec<usize>>,
    /// Sink nodes, comma separated (default: nodes with negative injection)
    #[arg(long, value_delimiter = ',', value_name = "N,...")]
    pub sinks: Option<Vec<usize>>,
    /// Write the result here instead of stdout
    #[arg(short, long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OpfArgs {
    /// OPF problem file
    pub problem: PathBuf,
    #[command(flatten)]
    pub basis: BasisSource,
    /// Solve the arc-space formulation instead of the reduced one
    #[arg(long)]
    pub full: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the solution here instead of stdout
    #[arg(short, long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Flow problem file
    pub problem: PathBuf,
    #[command(flatten)]
    pub basis: BasisSource,
    /// Injection schedule (default: the problem's injections from round 0)
    #[arg(long, value_name = "FILE")]
    pub schedule: Option<PathBuf>,
    /// Centralized arc flows per phase (computed when absent)
    #[arg(long, value_name = "FILE")]
    pub reference: Option<PathBuf>,
    /// Write the centralized reference flows used for the trace
    #[arg(long, value_name = "FILE")]
    pub save_reference: Option<PathBuf>,
    /// Write the per-round, per-agent trace as CSV
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
    /// Worker threads for the local solves
    #[arg(long, default_value_t = 1, value_name = "N")]
    pub threads: usize,
    /// Base consensus penalty
    #[arg(long, value_name = "RHO")]
    pub rho: Option<f64>,
    /// Use the same penalty for every cycle
    #[arg(long)]
    pub no_curvature_scaling: bool,
    /// Convergence tolerance on disagreement and consensus change
    #[arg(long, value_name = "EPS")]
    pub tolerance: Option<f64>,
    /// Round limit
    #[arg(long, value_name = "N")]
    pub max_rounds: Option<usize>,
    /// Write the summary here instead of stdout
    #[arg(short, long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Any document: graph, problem, basis, schedule, reference or solution
    pub file: PathBuf,
    /// Problem to check the document against
    #[arg(long, value_name = "FILE")]
    pub problem: Option<PathBuf>,
    /// Schedule whose phases a reference file is checked against
    #[arg(long, value_name = "FILE", requires = "problem")]
    pub schedule: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { failure::INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Basis(a) => commands::basis(a),
        Command::Reduce(a) => commands::reduce(a),
        Command::Solve(a) => commands::solve(a),
        Command::Maxflow(a) => commands::maxflow(a),
        Command::Opf(a) => commands::opf(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Validate(a) => commands::validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
