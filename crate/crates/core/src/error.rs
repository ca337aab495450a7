use std::path::PathBuf;

use thiserror::Error;

use crate::condexpr::{KindMismatch, ParseError};
use crate::constraints::Violation;
use crate::model::{UnitPath, ValidationReport};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Placeholders left unresolved in one unit's fragment.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct UnboundAt {
    pub path: Option<UnitPath>,
    pub names: Vec<String>,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown document type '{0}'")]
    UnknownDocType(String),
    #[error("unknown instance '{0}'")]
    UnknownInstance(String),
    #[error("unknown session '{0}'")]
    UnknownSession(String),
    #[error("no unit at '{0}'")]
    NotFound(UnitPath),
    #[error("unit '{0}' is not atomic")]
    NotAtomic(UnitPath),
    #[error("generic document failed validation: {0}")]
    ValidationFailed(ValidationReport),
    #[error("edit rejected: {0}")]
    EditRejected(String),
    #[error("{} violation(s) outstanding", .0.len())]
    ViolationsOutstanding(Vec<Violation>),
    #[error(transparent)]
    KindMismatch(#[from] KindMismatch),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("unbound placeholder(s): {}", format_unbound(.0))]
    UnboundPlaceholder(Vec<UnboundAt>),
    #[error("fragment '{0}' is unreadable")]
    FragmentUnreadable(String),
    #[error("bad filter: {0}")]
    BadFilter(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("corrupt store record {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_unbound(items: &[UnboundAt]) -> String {
    items
        .iter()
        .map(|u| match &u.path {
            Some(p) => format!("{} in '{p}'", u.names.join(", ")),
            None => u.names.join(", "),
        })
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl Error {
    /// Stable machine-readable name, one per variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnknownDocType(_) => "unknown_doc_type",
            Error::UnknownInstance(_) => "unknown_instance",
            Error::UnknownSession(_) => "unknown_session",
            Error::NotFound(_) => "unit_not_found",
            Error::NotAtomic(_) => "not_atomic",
            Error::ValidationFailed(_) => "validation_failed",
            Error::EditRejected(_) => "edit_rejected",
            Error::ViolationsOutstanding(_) => "violations_outstanding",
            Error::KindMismatch(_) => "kind_mismatch",
            Error::Parse(_) => "parse_error",
            Error::UnboundPlaceholder(_) => "unbound_placeholder",
            Error::FragmentUnreadable(_) => "fragment_unreadable",
            Error::BadFilter(_) => "bad_filter",
            Error::Invalid(_) => "invalid",
            Error::Corrupt { .. } => "corrupt_store",
            Error::Io { .. } => "io_error",
        }
    }
}

/// Wire form of an error, as returned by the service.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violations: Option<Vec<Violation>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ValidationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unbound: Option<Vec<UnboundAt>>,
}

impl ErrorBody {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        ErrorBody {
            code: code.to_string(),
            message: message.into(),
            violations: None,
            report: None,
            unbound: None,
        }
    }
}

impl From<&Error> for ErrorBody {
    fn from(e: &Error) -> Self {
        let mut body = ErrorBody::new(e.code(), e.to_string());
        match e {
            Error::ViolationsOutstanding(v) => body.violations = Some(v.clone()),
            Error::ValidationFailed(r) => body.report = Some(r.clone()),
            Error::UnboundPlaceholder(u) => body.unbound = Some(u.clone()),
            _ => {}
        }
        body
    }
}
