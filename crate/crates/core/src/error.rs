use thiserror::Error;

use crate::model::DagViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (bad index, malformed vector, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid DAG: {}", format_violations(.0))]
    InvalidDag(Vec<DagViolation>),

    #[error("incomplete data for family of `{node}`: column `{column}` has missing values")]
    IncompleteData { node: String, column: String },

    #[error("impossible evidence: p(evidence) = 0")]
    ImpossibleEvidence,

    #[error("oracle infeasible: joint state space of {states} exceeds the enumeration guard")]
    OracleInfeasible { states: u128 },

    #[error("infeasible start: {0}")]
    InfeasibleStart(String),

    #[error("degenerate baseline: p({target}) = 0 under the posterior-mean network")]
    DegenerateBaseline { target: String },

    #[error("degenerate labels: both classes must be present")]
    DegenerateLabels,

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("csv error at line {line}{}: {message}", column.as_ref().map(|c| format!(", column {c}")).unwrap_or_default())]
    Csv {
        line: u64,
        column: Option<String>,
        message: String,
    },

    #[error("model document format version {found} is not supported (expected {expected}.x)")]
    Version { found: String, expected: u32 },

    #[error("model document checksum mismatch: stored {stored}, computed {computed}")]
    Checksum { stored: String, computed: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}

fn format_violations(v: &[DagViolation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
