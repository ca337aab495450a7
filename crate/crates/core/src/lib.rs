//! Constraint-driven contract assembly.
//!
//! Generic documents describe a contract type as a tree of units with
//! alternative text versions, parameters and structural constraints.
//! Drafting sessions build document instances from them under constraint
//! checking; instances are rendered back to full text and can be queried.

pub mod assembly;
pub mod condexpr;
pub mod constraints;
pub mod error;
pub mod fixtures;
pub mod model;
pub mod query;
pub mod render;
pub mod store;
pub mod value;

pub use assembly::{CheckResult, Edit, EditOutcome, Engine, LogEntry, RenderFormat, Rendered, Session, SessionStage};
pub use condexpr::{eval_cond, parse_cond, CondExpr, Env, Tri};
pub use constraints::{check, suggest_remedies, Constraint, Remedy, RemedyAction, Stage, Violation, ViolationKind};
pub use error::{Error, ErrorBody, Result};
pub use model::{DocumentInstance, GenericDocument, UnitPath, ValidationReport};
pub use query::{expand, run_query, QueryFilter};
pub use render::{export_markup, render_document, substitute, RenderedDocument};
pub use store::Store;
pub use value::{ParamKind, Value};
