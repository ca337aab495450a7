//! Structural constraints over a generic document and their checking
//! against a (possibly partial) instance.
//!
//! Required units are the least fixpoint of three rules: compulsory units
//! under an active parent, `forces` whose antecedent holds, and `refers`
//! from an active unit. A unit is active when it is included, required, or
//! an ancestor of a required unit. Conditions that evaluate to unknown add
//! nothing to the fixpoint and surface as pending items instead.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::condexpr::{eval_cond, free_refs, CondExpr, Env, Tri};
use crate::error::Result;
use crate::model::{document_env, resolve_unit, DocumentInstance, GenericDocument, UnitPath};
use crate::value::is_builtin;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Antecedent {
    Unit(UnitPath),
    Data(CondExpr),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    Forces {
        antecedent: Antecedent,
        consequent: UnitPath,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        when: Option<CondExpr>,
    },
    Incompatible {
        a: UnitPath,
        b: UnitPath,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        when: Option<CondExpr>,
    },
    ExclusiveOr {
        a: UnitPath,
        b: UnitPath,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        when: Option<CondExpr>,
    },
    Refers {
        from: UnitPath,
        to: UnitPath,
    },
    Data {
        expr: CondExpr,
        message: String,
    },
}

impl Constraint {
    pub fn forces(a: UnitPath, b: UnitPath) -> Self {
        Constraint::Forces {
            antecedent: Antecedent::Unit(a),
            consequent: b,
            when: None,
        }
    }

    pub fn forces_if(cond: CondExpr, b: UnitPath) -> Self {
        Constraint::Forces {
            antecedent: Antecedent::Data(cond),
            consequent: b,
            when: None,
        }
    }

    /// Every unit path the constraint mentions.
    pub fn paths(&self) -> Vec<&UnitPath> {
        match self {
            Constraint::Forces {
                antecedent,
                consequent,
                ..
            } => match antecedent {
                Antecedent::Unit(a) => vec![a, consequent],
                Antecedent::Data(_) => vec![consequent],
            },
            Constraint::Incompatible { a, b, .. } | Constraint::ExclusiveOr { a, b, .. } => vec![a, b],
            Constraint::Refers { from, to } => vec![from, to],
            Constraint::Data { .. } => vec![],
        }
    }

    /// The two sides of a symmetric constraint.
    pub fn pair(&self) -> Option<(&UnitPath, &UnitPath)> {
        match self {
            Constraint::Incompatible { a, b, .. } | Constraint::ExclusiveOr { a, b, .. } => Some((a, b)),
            _ => None,
        }
    }

    fn guard(&self) -> Option<&CondExpr> {
        match self {
            Constraint::Forces { when, .. }
            | Constraint::Incompatible { when, .. }
            | Constraint::ExclusiveOr { when, .. } => when.as_ref(),
            _ => None,
        }
    }

    fn conditions(&self) -> Vec<&CondExpr> {
        let mut out: Vec<&CondExpr> = self.guard().into_iter().collect();
        match self {
            Constraint::Forces {
                antecedent: Antecedent::Data(e),
                ..
            } => out.push(e),
            Constraint::Data { expr, .. } => out.push(expr),
            _ => {}
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    MissingCompulsory,
    ForcesUnsatisfied,
    IncompatiblePair,
    ExclusiveOrUnsatisfied,
    DanglingReference,
    DataViolation,
    MissingParameter,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Unit(UnitPath),
    Param(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Compulsory,
    Constraint { index: usize, constraint: Constraint },
    Parameter { scope: Option<UnitPath> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub subjects: Vec<Subject>,
    pub source: Source,
    pub message: String,
    pub pending: bool,
}

impl Violation {
    pub fn unit_subjects(&self) -> impl Iterator<Item = &UnitPath> {
        self.subjects.iter().filter_map(|s| match s {
            Subject::Unit(p) => Some(p),
            Subject::Param(_) => None,
        })
    }

    /// Same violation regardless of message wording.
    pub fn same_as(&self, other: &Violation) -> bool {
        self.kind == other.kind
            && self.subjects == other.subjects
            && self.source == other.source
            && self.pending == other.pending
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Interactive,
    Finalize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemedyAction {
    Include(UnitPath),
    Exclude(UnitPath),
    SetParameter(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Remedy {
    pub action: RemedyAction,
    pub rationale: String,
}

// ---------------------------------------------------------------------------
// Evaluation context

struct Ctx<'a> {
    g: &'a GenericDocument,
    inst: &'a DocumentInstance,
    env: Env,
    /// Per constraint: (guard, data antecedent / data expression).
    values: Vec<(Tri, Tri)>,
    required: BTreeMap<UnitPath, ReqSource>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReqSource {
    Compulsory,
    Constraint(usize),
}

impl<'a> Ctx<'a> {
    fn new(g: &'a GenericDocument, inst: &'a DocumentInstance) -> Result<Self> {
        let env = document_env(g, inst);
        let mut values = Vec::with_capacity(g.constraints.len());
        for c in &g.constraints {
            let guard = match c.guard() {
                Some(e) => eval_cond(e, &env)?,
                None => Tri::True,
            };
            let data = match c {
                Constraint::Forces {
                    antecedent: Antecedent::Data(e),
                    ..
                }
                | Constraint::Data { expr: e, .. } => eval_cond(e, &env)?,
                _ => Tri::True,
            };
            values.push((guard, data));
        }
        let mut ctx = Ctx {
            g,
            inst,
            env,
            values,
            required: BTreeMap::new(),
        };
        ctx.close();
        Ok(ctx)
    }

    fn included(&self, p: &UnitPath) -> bool {
        self.inst.is_included(p)
    }

    fn active(&self, p: &UnitPath) -> bool {
        self.included(p)
            || self.required.contains_key(p)
            || self
                .required
                .range(p.clone()..)
                .take_while(|(k, _)| p.covers(k))
                .next()
                .is_some()
    }

    fn parent_active(&self, p: &UnitPath) -> bool {
        p.parent().is_none_or(|parent| self.active(&parent))
    }

    fn require(&mut self, p: &UnitPath, src: ReqSource) -> bool {
        if self.required.contains_key(p) {
            return false;
        }
        self.required.insert(p.clone(), src);
        true
    }

    fn close(&mut self) {
        let tree: Vec<(UnitPath, bool)> = self
            .g
            .walk()
            .into_iter()
            .map(|(p, u)| (p, u.is_compulsory()))
            .collect();
        loop {
            let mut changed = false;
            for (p, compulsory) in &tree {
                if *compulsory && !self.required.contains_key(p) && self.parent_active(p) {
                    changed |= self.require(p, ReqSource::Compulsory);
                }
            }
            for i in 0..self.g.constraints.len() {
                let (guard, data) = self.values[i];
                match &self.g.constraints[i] {
                    Constraint::Forces {
                        antecedent,
                        consequent,
                        ..
                    } if guard == Tri::True => {
                        let fires = match antecedent {
                            Antecedent::Unit(a) => self.active(a),
                            Antecedent::Data(_) => data == Tri::True,
                        };
                        if fires {
                            let consequent = consequent.clone();
                            changed |= self.require(&consequent, ReqSource::Constraint(i));
                        }
                    }
                    Constraint::Refers { from, to } if self.active(from) => {
                        let to = to.clone();
                        changed |= self.require(&to, ReqSource::Constraint(i));
                    }
                    _ => {}
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn unbound_refs(&self, c: &Constraint) -> Vec<String> {
        c.conditions()
            .into_iter()
            .flat_map(free_refs)
            .filter(|r| !self.env.contains_key(r))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

pub fn required_units(g: &GenericDocument, inst: &DocumentInstance) -> Result<BTreeSet<UnitPath>> {
    Ok(Ctx::new(g, inst)?.required.into_keys().collect())
}

fn units(paths: &[&UnitPath]) -> Vec<Subject> {
    paths.iter().map(|p| Subject::Unit((*p).clone())).collect()
}

pub fn check(g: &GenericDocument, inst: &DocumentInstance, stage: Stage) -> Result<Vec<Violation>> {
    let ctx = Ctx::new(g, inst)?;
    let mut out = Vec::new();

    for (p, _) in g.walk() {
        if ctx.required.get(&p) == Some(&ReqSource::Compulsory) && !ctx.included(&p) {
            out.push(Violation {
                kind: ViolationKind::MissingCompulsory,
                message: format!("compulsory unit '{p}' is not included"),
                subjects: vec![Subject::Unit(p)],
                source: Source::Compulsory,
                pending: false,
            });
        }
    }

    for (index, c) in g.constraints.iter().enumerate() {
        let (guard, data) = ctx.values[index];
        let source = Source::Constraint {
            index,
            constraint: c.clone(),
        };
        let pending_item = |kind, subjects, what: &str| Violation {
            kind,
            subjects,
            source: source.clone(),
            message: format!(
                "{what} cannot be decided yet: {} not entered",
                ctx.unbound_refs(c).join(", ")
            ),
            pending: true,
        };
        match c {
            Constraint::Forces {
                antecedent,
                consequent,
                ..
            } => {
                if ctx.included(consequent) {
                    continue;
                }
                let ante = match antecedent {
                    Antecedent::Unit(a) => Tri::from_bool(ctx.active(a)),
                    Antecedent::Data(_) => data,
                };
                match guard.and(ante) {
                    Tri::True => out.push(Violation {
                        kind: ViolationKind::ForcesUnsatisfied,
                        subjects: vec![Subject::Unit(consequent.clone())],
                        message: match antecedent {
                            Antecedent::Unit(a) => {
                                format!("'{a}' is included, so '{consequent}' must be included")
                            }
                            Antecedent::Data(e) => {
                                format!("because {e}, '{consequent}' must be included")
                            }
                        },
                        source: source.clone(),
                        pending: false,
                    }),
                    Tri::Unknown => out.push(pending_item(
                        ViolationKind::ForcesUnsatisfied,
                        vec![Subject::Unit(consequent.clone())],
                        &format!("whether '{consequent}' is required"),
                    )),
                    Tri::False => {}
                }
            }
            Constraint::Incompatible { a, b, .. } => {
                if !(ctx.included(a) && ctx.included(b)) {
                    continue;
                }
                let mut subjects = [a, b];
                subjects.sort();
                match guard {
                    Tri::True => out.push(Violation {
                        kind: ViolationKind::IncompatiblePair,
                        subjects: units(&subjects),
                        message: format!("'{}' and '{}' cannot both appear", subjects[0], subjects[1]),
                        source: source.clone(),
                        pending: false,
                    }),
                    Tri::Unknown => out.push(pending_item(
                        ViolationKind::IncompatiblePair,
                        units(&subjects),
                        &format!("whether '{}' and '{}' may both appear", subjects[0], subjects[1]),
                    )),
                    Tri::False => {}
                }
            }
            Constraint::ExclusiveOr { a, b, .. } => {
                if !(ctx.parent_active(a) && ctx.parent_active(b)) {
                    continue;
                }
                let count = usize::from(ctx.included(a)) + usize::from(ctx.included(b));
                if count == 1 {
                    continue;
                }
                let mut subjects = [a, b];
                subjects.sort();
                match guard {
                    Tri::True => out.push(Violation {
                        kind: ViolationKind::ExclusiveOrUnsatisfied,
                        subjects: units(&subjects),
                        message: format!(
                            "exactly one of '{}' and '{}' must be included ({count} are)",
                            subjects[0], subjects[1]
                        ),
                        source: source.clone(),
                        pending: false,
                    }),
                    Tri::Unknown => out.push(pending_item(
                        ViolationKind::ExclusiveOrUnsatisfied,
                        units(&subjects),
                        &format!("whether one of '{}' and '{}' is required", subjects[0], subjects[1]),
                    )),
                    Tri::False => {}
                }
            }
            Constraint::Refers { from, to } => {
                if ctx.active(from) && !ctx.included(to) {
                    out.push(Violation {
                        kind: ViolationKind::DanglingReference,
                        subjects: vec![Subject::Unit(to.clone())],
                        message: format!("'{from}' refers to '{to}', which is not included"),
                        source: source.clone(),
                        pending: false,
                    });
                }
            }
            Constraint::Data { expr, message } => {
                let subjects = free_refs(expr).into_iter().map(Subject::Param).collect();
                match data {
                    Tri::False => out.push(Violation {
                        kind: ViolationKind::DataViolation,
                        subjects,
                        message: message.clone(),
                        source: source.clone(),
                        pending: false,
                    }),
                    Tri::Unknown => {
                        out.push(pending_item(ViolationKind::DataViolation, subjects, &format!("'{message}'")))
                    }
                    Tri::True => {}
                }
            }
        }
    }

    if stage == Stage::Finalize {
        missing_parameters(&ctx, &mut out);
    }
    Ok(out)
}

fn missing_parameters(ctx: &Ctx<'_>, out: &mut Vec<Violation>) {
    let (g, inst) = (ctx.g, ctx.inst);
    let missing = |name: &str, scope: Option<UnitPath>, out: &mut Vec<Violation>| {
        let message = match &scope {
            Some(p) => format!("a value for ${name} is required by '{p}'"),
            None => format!("a value for ${name} is required"),
        };
        out.push(Violation {
            kind: ViolationKind::MissingParameter,
            subjects: vec![Subject::Param(name.to_string())],
            source: Source::Parameter { scope },
            message,
            pending: false,
        });
    };
    for name in ["Party1.Name", "Party2.Name", "Date"] {
        debug_assert!(is_builtin(name));
        if !ctx.env.contains_key(name) {
            missing(name, None, out);
        }
    }
    for spec in g.params.iter().filter(|s| s.required) {
        if !ctx.env.contains_key(&spec.name) {
            missing(&spec.name, None, out);
        }
    }
    for (p, unit) in g.walk() {
        if !inst.is_included(&p) {
            continue;
        }
        let mut names: Vec<&str> = unit.params.iter().filter(|s| s.required).map(|s| s.name.as_str()).collect();
        let version = inst.selections.get(&p).copied();
        if let Some(v) = version.and_then(|v| unit.version(v)) {
            names.extend(v.params.iter().filter(|s| s.required).map(|s| s.name.as_str()));
        }
        if names.is_empty() {
            continue;
        }
        let env = crate::model::effective_bindings(g, inst, &p, version.unwrap_or(0));
        let mut seen = BTreeSet::new();
        for name in names {
            if seen.insert(name) && !env.contains_key(name) {
                missing(name, Some(p.clone()), out);
            }
        }
    }
}

pub fn suggest_remedies(v: &Violation, g: &GenericDocument, inst: &DocumentInstance) -> Vec<Remedy> {
    let compulsory = |p: &UnitPath| resolve_unit(g, p).map(|u| u.is_compulsory()).unwrap_or(false);
    let include = |p: &UnitPath, why: &str| Remedy {
        action: RemedyAction::Include(p.clone()),
        rationale: format!("include '{p}' {why}"),
    };
    let exclude = |p: &UnitPath, why: &str| Remedy {
        action: RemedyAction::Exclude(p.clone()),
        rationale: format!("exclude '{p}' {why}"),
    };
    let set = |name: &str| Remedy {
        action: RemedyAction::SetParameter(name.to_string()),
        rationale: format!("enter a value for ${name}"),
    };
    let unit_subjects: Vec<&UnitPath> = v.unit_subjects().collect();

    if v.pending {
        let mut out: Vec<Remedy> = match &v.source {
            Source::Constraint { constraint, .. } => constraint
                .conditions()
                .into_iter()
                .flat_map(free_refs)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .filter(|r| !document_env(g, inst).contains_key(r))
                .map(|r| set(&r))
                .collect(),
            _ => vec![],
        };
        if v.kind == ViolationKind::ForcesUnsatisfied {
            out.extend(unit_subjects.iter().map(|p| include(p, "in case the condition holds")));
        }
        return out;
    }

    match v.kind {
        ViolationKind::MissingCompulsory => unit_subjects
            .iter()
            .map(|p| include(p, "because it is compulsory"))
            .collect(),
        ViolationKind::ForcesUnsatisfied => unit_subjects
            .iter()
            .map(|p| include(p, "as the constraint requires"))
            .collect(),
        ViolationKind::DanglingReference => unit_subjects
            .iter()
            .map(|p| include(p, "so the cross-reference resolves"))
            .collect(),
        ViolationKind::IncompatiblePair => unit_subjects
            .iter()
            .filter(|p| !compulsory(p))
            .map(|p| exclude(p, "to resolve the incompatibility"))
            .collect(),
        ViolationKind::ExclusiveOrUnsatisfied => {
            let included = unit_subjects.iter().filter(|p| inst.is_included(p)).count();
            if included == 0 {
                // Including one side can drag in the other through compulsory
                // descendants of a shared ancestor; offer only clean choices.
                let brings_one = |p: &UnitPath| {
                    let mut trial = inst.clone();
                    trial.include_unit(g, p).is_ok()
                        && unit_subjects.iter().filter(|q| trial.is_included(q)).count() == 1
                };
                unit_subjects
                    .iter()
                    .filter(|p| brings_one(p))
                    .map(|p| include(p, "so exactly one alternative is present"))
                    .collect()
            } else {
                unit_subjects
                    .iter()
                    .filter(|p| !compulsory(p))
                    .map(|p| exclude(p, "so exactly one alternative is present"))
                    .collect()
            }
        }
        ViolationKind::MissingParameter | ViolationKind::DataViolation => v
            .subjects
            .iter()
            .filter_map(|s| match s {
                Subject::Param(n) => Some(set(n)),
                Subject::Unit(_) => None,
            })
            .collect(),
    }
}

/// Warnings for conflicts visible from the constraint list alone.
pub(crate) fn trivial_conflicts(g: &GenericDocument, warn: &mut dyn FnMut(&str, String)) {
    let always = |p: &UnitPath| {
        p.lineage()
            .iter()
            .all(|a| resolve_unit(g, a).map(|u| u.is_compulsory()).unwrap_or(false))
    };
    for (i, c) in g.constraints.iter().enumerate() {
        if c.guard().is_some() {
            continue;
        }
        match c {
            Constraint::Incompatible { a, b, .. } if always(a) && always(b) => warn(
                "unsatisfiable",
                format!("constraint #{}: '{a}' and '{b}' are both compulsory but incompatible", i + 1),
            ),
            Constraint::ExclusiveOr { a, b, .. } if always(a) && always(b) => warn(
                "unsatisfiable",
                format!("constraint #{}: '{a}' and '{b}' are both compulsory but exclusive", i + 1),
            ),
            Constraint::Forces {
                antecedent: Antecedent::Unit(a),
                consequent,
                ..
            } if always(a) => {
                for (j, d) in g.constraints.iter().enumerate() {
                    if let Constraint::Incompatible { a: x, b: y, when: None } = d {
                        if (x == a && y == consequent) || (y == a && x == consequent) {
                            warn(
                                "unsatisfiable",
                                format!(
                                    "constraints #{} and #{}: compulsory '{a}' forces '{consequent}' which is incompatible with it",
                                    i + 1,
                                    j + 1
                                ),
                            );
                        }
                    }
                }
            }
            _ => {}
        }
    }
}

static XREF: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:sub-clause|clause|section)\s+(\d+(?:-\d+)*)\b").expect("valid regex")
});

/// Suggests `refers` constraints from textual references such as
/// "Sub-Clause 33-1" in fragment text. Advisory only.
pub fn scan_cross_references(g: &GenericDocument) -> Result<Vec<Constraint>> {
    let numbers: BTreeMap<String, UnitPath> = g.numbering().into_iter().collect();
    let declared: BTreeSet<(&UnitPath, &UnitPath)> = g
        .constraints
        .iter()
        .filter_map(|c| match c {
            Constraint::Refers { from, to } => Some((from, to)),
            _ => None,
        })
        .collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (path, unit) in g.walk() {
        for v in &unit.versions {
            let text = g.fragment_text(&v.fragment)?;
            for cap in XREF.captures_iter(text) {
                let Some(target) = numbers.get(&cap[1]) else {
                    continue;
                };
                if *target == path || declared.contains(&(&path, target)) {
                    continue;
                }
                if seen.insert((path.clone(), target.clone())) {
                    out.push(Constraint::Refers {
                        from: path.clone(),
                        to: target.clone(),
                    });
                }
            }
        }
    }
    Ok(out)
}
