use std::fmt::{self, Debug};
use std::process::ExitCode;

use cycleflow_core::admm::AdmmError;
use cycleflow_core::cycles::BasisError;
use cycleflow_core::graph::GraphError;
use cycleflow_core::io::IoError;
use cycleflow_core::opf::OpfError;
use cycleflow_core::reduction::ReductionError;
use cycleflow_core::solver::{MaxFlowError, QpError};

pub const INVALID: u8 = 1;
pub const NOT_CONVERGED: u8 = 2;

/// A command failure: exit code plus the error's module and variant name.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub name: String,
    pub message: String,
}

impl Failure {
    pub fn invalid(name: &str, message: impl Into<String>) -> Self {
        Self {
            code: INVALID,
            name: name.into(),
            message: message.into(),
        }
    }

    fn from_error<E: Debug + fmt::Display>(module: &str, code: u8, e: &E) -> Self {
        Self {
            code,
            name: format!("{module}::{}", variant(e)),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.name, self.message)
    }
}

fn variant<E: Debug>(e: &E) -> String {
    let d = format!("{e:?}");
    d.split(['(', ' ', '{'])
        .next()
        .unwrap_or_default()
        .to_string()
}

fn qp_code(e: &QpError) -> u8 {
    match e {
        QpError::MaxIterations(_) => NOT_CONVERGED,
        _ => INVALID,
    }
}

impl From<QpError> for Failure {
    fn from(e: QpError) -> Self {
        Failure::from_error("QpError", qp_code(&e), &e)
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e.field() {
            Some((field, reason)) => {
                Failure::invalid("IoError::Validation", format!("field `{field}`: {reason}"))
            }
            None => Failure::from_error("IoError", INVALID, &e),
        }
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        Failure::from_error("GraphError", INVALID, &e)
    }
}

impl From<BasisError> for Failure {
    fn from(e: BasisError) -> Self {
        match e {
            BasisError::Graph(g) => g.into(),
            other => Failure::from_error("BasisError", INVALID, &other),
        }
    }
}

impl From<MaxFlowError> for Failure {
    fn from(e: MaxFlowError) -> Self {
        Failure::from_error("MaxFlowError", INVALID, &e)
    }
}

impl From<ReductionError> for Failure {
    fn from(e: ReductionError) -> Self {
        match e {
            ReductionError::Graph(g) => g.into(),
            ReductionError::Basis(b) => b.into(),
            ReductionError::Solver(q) => q.into(),
            ReductionError::MaxFlow(m) => m.into(),
            other => Failure::from_error("ReductionError", INVALID, &other),
        }
    }
}

impl From<OpfError> for Failure {
    fn from(e: OpfError) -> Self {
        match e {
            OpfError::Solver(q) => q.into(),
            other => Failure::from_error("OpfError", INVALID, &other),
        }
    }
}

impl From<AdmmError> for Failure {
    fn from(e: AdmmError) -> Self {
        match e {
            AdmmError::Reduction(r) => r.into(),
            AdmmError::MaxRounds(_) => Failure::from_error("AdmmError", NOT_CONVERGED, &e),
            AdmmError::LocalSolve { ref source, .. } => {
                let code = qp_code(source);
                Failure::from_error("AdmmError", code, &e)
            }
            other => Failure::from_error("AdmmError", INVALID, &other),
        }
    }
}
