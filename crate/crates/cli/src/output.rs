//! Human-readable printing. With `--json` the response body is printed as is.

use draftsman_core::model::{Inclusion, UnitTemplate, ValidationReport};
use draftsman_core::store::{Finding, InstanceSummary, IntegrityReport};
use draftsman_core::constraints::Antecedent;
use draftsman_core::{Constraint, CondExpr, GenericDocument, Remedy, RemedyAction, Session, Violation};
use serde::Serialize;

/// `println!` that ignores a closed stdout, e.g. when piped into `head`.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! say_raw {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

pub(crate) use {say, say_raw};

#[derive(Debug, Clone, Copy)]
pub struct Out {
    pub json: bool,
}

impl Out {
    pub fn value<T: Serialize>(&self, v: &T) {
        match serde_json::to_string_pretty(v) {
            Ok(s) => say!("{s}"),
            Err(e) => eprintln!("error: cannot encode output: {e}"),
        }
    }

    pub fn emit<T: Serialize>(&self, v: &T, human: impl FnOnce()) {
        if self.json {
            self.value(v);
        } else {
            human();
        }
    }
}

pub fn summaries(hits: &[InstanceSummary]) {
    for h in hits {
        let date = h.date.map_or("undated".to_string(), |d| d.to_string());
        say!("{}: {}  ({}, {}, {:?})", h.id, h.display_name, h.doc_type, date, h.status);
    }
}

pub fn violations(vs: &[Violation], remedies: &[Vec<Remedy>]) {
    for (i, v) in vs.iter().enumerate() {
        let pending = if v.pending { " (pending)" } else { "" };
        say!("{:?}{pending}: {}", v.kind, v.message);
        for r in remedies.get(i).into_iter().flatten() {
            let action = match &r.action {
                RemedyAction::Include(p) => format!("include {p}"),
                RemedyAction::Exclude(p) => format!("exclude {p}"),
                RemedyAction::SetParameter(n) => format!("set ${n}"),
            };
            say!("  remedy: {action}  ({})", r.rationale);
        }
    }
}

pub fn report(r: &ValidationReport) {
    for e in &r.errors {
        say!("error [{}]: {}", e.code, e.message);
    }
    for w in &r.warnings {
        eprintln!("warning [{}]: {}", w.code, w.message);
    }
}

pub fn findings(r: &IntegrityReport) {
    if r.is_clean() {
        say!("store is consistent");
    }
    for f in &r.findings {
        let line = match f {
            Finding::DanglingFragment { doc_type, fragment, path, version } => {
                format!("{doc_type}: {path} version {version} points at missing fragment {fragment}")
            }
            Finding::UnreadableRecord { file, message } => format!("{file}: {message}"),
            Finding::UnknownDocType { instance, doc_type } => format!("{instance}: unknown document type {doc_type}"),
            Finding::UnknownUnit { instance, path } => format!("{instance}: unknown unit {path}"),
            Finding::BadVersion { instance, path, version } => format!("{instance}: {path} has no version {version}"),
            Finding::CounterBehind { prefix, counter, highest } => {
                format!("counter {prefix} at {counter} but {prefix}{highest} exists")
            }
        };
        say!("{line}");
    }
}

pub fn generic(g: &GenericDocument) {
    say!("{} ({})", g.doc_type, g.category);
    for p in &g.params {
        say!("  param ${}: {}", p.name, p.kind);
    }
    outline(&g.parts, "");
    for c in &g.constraints {
        say!("  constraint: {}", constraint(c));
    }
}

fn constraint(c: &Constraint) -> String {
    let when = |w: &Option<CondExpr>| w.as_ref().map_or(String::new(), |w| format!(" when {w}"));
    match c {
        Constraint::Forces { antecedent, consequent, when: w } => {
            let a = match antecedent {
                Antecedent::Unit(p) => p.to_string(),
                Antecedent::Data(e) => format!("({e})"),
            };
            format!("{a} forces {consequent}{}", when(w))
        }
        Constraint::Incompatible { a, b, when: w } => format!("{a} incompatible with {b}{}", when(w)),
        Constraint::ExclusiveOr { a, b, when: w } => format!("exactly one of {a}, {b}{}", when(w)),
        Constraint::Refers { from, to } => format!("{from} refers to {to}"),
        Constraint::Data { expr, message } => format!("{expr}  ({message})"),
    }
}

fn outline(units: &[UnitTemplate], prefix: &str) {
    let mut sorted: Vec<_> = units.iter().collect();
    sorted.sort_by_key(|u| u.order);
    for (i, u) in sorted.into_iter().enumerate() {
        let number = format!("{prefix}{}", i + 1);
        let inc = match u.inclusion {
            Inclusion::Compulsory => "",
            Inclusion::Optional => " [optional]",
        };
        let versions = match u.versions.len() {
            0 => String::new(),
            1 => "  1 version".to_string(),
            n => format!("  {n} versions"),
        };
        let indent = "  ".repeat(number.matches('.').count() + 1);
        say!("{indent}{number} {}{inc}{versions}", u.label);
        outline(&u.children, &format!("{number}."));
    }
}

pub fn session(s: &Session) {
    let d = &s.draft;
    say!("session {}", s.session_id);
    say!("draft {}: {} ({})", d.id, d.display_name, s.doc_type);
    say!("stage {:?}, autocheck {}", s.stage, if s.autocheck { "on" } else { "off" });
    for (i, p) in d.parties.iter().enumerate() {
        say!("party {}: {}, {}", i + 1, p.name, p.address);
    }
    if let Some(date) = d.date {
        say!("date {date}");
    }
    for b in &d.bindings {
        say!("${} = {}", b.name, b.value);
    }
    for p in &d.included_optional {
        say!("included {p}");
    }
    for (p, v) in &d.selections {
        say!("version {v} of {p}");
    }
    say!("{} edits", s.edit_log.len());
}
