use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error("action `{verb}` requires skill `{skill}`")]
    NotQualified { verb: &'static str, skill: &'static str },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("invalid snapshot: {0}")]
    Snapshot(String),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("scenario is invalid:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<crate::scenario::Diagnostic>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("goal file error: {0}")]
    Parse(String),
    #[error("goal does not match scenario: {0}")]
    Mismatch(String),
}

/// Failure of a decision policy. Transport failures are retriable.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("generation service transport failure: {0}")]
    Transport(String),
    #[error("generation service returned an unusable response: {0}")]
    BadResponse(String),
    #[error("recorded fixture exhausted or mismatched: {0}")]
    Fixture(String),
}

impl PolicyError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, PolicyError::Transport(_))
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid session config: {0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
