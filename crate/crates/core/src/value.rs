//! Parameter values and kinds shared by bindings, conditions and rendering.

use std::cmp::Ordering;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Names that are always available to conditions and fragments without
/// being declared by a generic document.
pub const BUILTIN_PARAMS: [&str; 5] = [
    "Party1.Name",
    "Party1.Address",
    "Party2.Name",
    "Party2.Address",
    "Date",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    String,
    Integer,
    Date,
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamKind::String => "string",
            ParamKind::Integer => "integer",
            ParamKind::Date => "date",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Value {
    String(String),
    Integer(i64),
    Date(NaiveDate),
}

impl Value {
    pub fn kind(&self) -> ParamKind {
        match self {
            Value::String(_) => ParamKind::String,
            Value::Integer(_) => ParamKind::Integer,
            Value::Date(_) => ParamKind::Date,
        }
    }

    /// Ordering between two values of the same kind; `None` on a kind mismatch.
    pub fn compare(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::String(a), Value::String(b)) => Some(a.cmp(b)),
            (Value::Integer(a), Value::Integer(b)) => Some(a.cmp(b)),
            (Value::Date(a), Value::Date(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }

    /// Text used when the value is substituted into a fragment.
    pub fn to_document_text(&self) -> String {
        match self {
            Value::String(s) => s.clone(),
            Value::Integer(i) => i.to_string(),
            Value::Date(d) => format_long_date(*d),
        }
    }

    /// Parses a value of the given kind from its plain textual form
    /// (decimal integer, ISO-8601 date, or verbatim string).
    pub fn parse_as(kind: ParamKind, text: &str) -> Result<Value, String> {
        match kind {
            ParamKind::String => Ok(Value::String(text.to_string())),
            ParamKind::Integer => text
                .trim()
                .parse::<i64>()
                .map(Value::Integer)
                .map_err(|_| format!("'{text}' is not an integer")),
            ParamKind::Date => NaiveDate::parse_from_str(text.trim(), "%Y-%m-%d")
                .map(Value::Date)
                .map_err(|_| format!("'{text}' is not a YYYY-MM-DD date")),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::String(s) => f.write_str(s),
            Value::Integer(i) => write!(f, "{i}"),
            Value::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
        }
    }
}

/// `3 May 1994` style.
pub fn format_long_date(d: NaiveDate) -> String {
    d.format("%-d %B %Y").to_string()
}

pub fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-')
}

/// Matches `[A-Za-z_][A-Za-z0-9_.-]*`.
pub fn is_valid_ident(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if is_ident_start(c) => chars.all(is_ident_char),
        _ => false,
    }
}

pub fn is_builtin(name: &str) -> bool {
    BUILTIN_PARAMS.contains(&name)
}
