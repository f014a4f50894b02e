use thiserror::Error;

/// Every failure the engine can report.
///
/// Each variant carries a stable machine-readable code (see [`Error::code`])
/// which the CLI prints as a prefix and the HTTP service returns in its
/// error body.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("action universe must contain at least one action")]
    EmptyUniverse,
    #[error("duplicate action name `{0}`")]
    DuplicateAction(String),
    #[error("action name must be non-empty")]
    EmptyActionName,
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("universe supports at most {max} actions, got {got}")]
    UniverseTooLarge { max: usize, got: usize },
    #[error("alternatives belong to different action universes")]
    UniverseMismatch,
    #[error("interval is empty: lower bound {inf} is not contained in upper bound {sup}")]
    EmptyInterval { inf: String, sup: String },

    #[error("containment check exceeds guard: {0}")]
    GuardExceeded(String),
    #[error("variable `{0}` has no binding")]
    UnboundVariable(String),
    #[error("cannot parse expression `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error("subject id `{0}` is not a valid identifier")]
    InvalidSubject(String),
    #[error("duplicate subject `{0}`")]
    DuplicateSubject(String),
    #[error("group must contain at least one subject")]
    EmptyGroup,
    #[error("relationship graph is incomplete: pair ({0}, {1}) has no relation")]
    IncompleteGraph(String, String),
    #[error("relation between {0} and {1} given more than once")]
    DuplicateRelation(String, String),
    #[error("subject {0} cannot be related to itself")]
    SelfRelation(String),
    #[error("relationship graph over {{{0}}} is not decomposable")]
    NotDecomposable(String),
    #[error("unknown subject `{0}`")]
    UnknownSubject(String),
    #[error("cannot remove `{0}`: a group keeps at least one subject")]
    LastSubjectRemoval(String),

    #[error("decision interval for {subject} is not well-formed: {inf} is not contained in {sup}")]
    NotSolvable {
        subject: String,
        inf: String,
        sup: String,
    },
    #[error("influence matrix is incomplete: {0}")]
    MatrixIncomplete(String),

    #[error("choice {choice} for {subject} lies outside its interval {interval}")]
    ChoiceOutsideInterval {
        subject: String,
        choice: String,
        interval: String,
    },
    #[error("stage order violation: {0}")]
    StageOrderViolation(String),
    #[error("invalid scenario: {0}")]
    Schema(String),
}

impl Error {
    /// Stable identifier used by the CLI and HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyUniverse => "EmptyUniverse",
            Error::DuplicateAction(_) => "DuplicateAction",
            Error::EmptyActionName => "EmptyActionName",
            Error::UnknownAction(_) => "UnknownAction",
            Error::UniverseTooLarge { .. } => "UniverseTooLarge",
            Error::UniverseMismatch => "UniverseMismatch",
            Error::EmptyInterval { .. } => "EmptyInterval",
            Error::GuardExceeded(_) => "GuardExceeded",
            Error::UnboundVariable(_) => "UnboundVariable",
            Error::Parse { .. } => "ParseError",
            Error::InvalidSubject(_) => "InvalidSubject",
            Error::DuplicateSubject(_) => "DuplicateSubject",
            Error::EmptyGroup => "EmptyGroup",
            Error::IncompleteGraph(..) => "IncompleteGraph",
            Error::DuplicateRelation(..) => "DuplicateRelation",
            Error::SelfRelation(_) => "SelfRelation",
            Error::NotDecomposable(_) => "NotDecomposable",
            Error::UnknownSubject(_) => "UnknownSubject",
            Error::LastSubjectRemoval(_) => "LastSubjectRemoval",
            Error::NotSolvable { .. } => "NotSolvable",
            Error::MatrixIncomplete(_) => "MatrixIncomplete",
            Error::ChoiceOutsideInterval { .. } => "ChoiceOutsideInterval",
            Error::StageOrderViolation(_) => "StageOrderViolation",
            Error::Schema(_) => "SchemaError",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
