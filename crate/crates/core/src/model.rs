//! Generic documents, their unit trees and text versions, and the
//! document instances drafted from them.
//!
//! A generic document is the template side: a tree of units whose tips
//! (atomic units) carry one or more alternative text versions. An instance
//! is skeletal: it records which atomic units were selected and at which
//! version, plus parties, date, parameter bindings and indexing data. The
//! text itself lives in fragments held by the generic document.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::condexpr::Env;
use crate::constraints::Constraint;
use crate::error::{Error, Result};
use crate::value::{is_builtin, is_valid_ident, ParamKind, Value};

pub const SCHEMA_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Paths

/// Label path from a top-level part down to a unit. Serialised as the labels
/// joined with `/`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnitPath(Vec<String>);

impl UnitPath {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::Invalid("unit path must have at least one label".into()));
        }
        for l in &labels {
            if let Some(problem) = label_problem(l) {
                return Err(Error::Invalid(format!("bad label '{l}': {problem}")));
            }
        }
        Ok(UnitPath(labels))
    }

    /// Parses `Part/Section/...`.
    pub fn parse(s: &str) -> Result<Self> {
        UnitPath::new(s.split('/'))
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn last(&self) -> &str {
        self.0.last().map(String::as_str).unwrap_or_default()
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn parent(&self) -> Option<UnitPath> {
        (self.0.len() > 1).then(|| UnitPath(self.0[..self.0.len() - 1].to_vec()))
    }

    pub fn child(&self, label: &str) -> UnitPath {
        let mut labels = self.0.clone();
        labels.push(label.to_string());
        UnitPath(labels)
    }

    /// Every prefix of this path, shortest first, ending with the path itself.
    pub fn lineage(&self) -> Vec<UnitPath> {
        (1..=self.0.len()).map(|n| UnitPath(self.0[..n].to_vec())).collect()
    }

    /// True when `other` is this path or lies beneath it.
    pub fn covers(&self, other: &UnitPath) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// True when `other` lies strictly beneath this path.
    pub fn is_ancestor_of(&self, other: &UnitPath) -> bool {
        other.0.len() > self.0.len() && self.covers(other)
    }

    fn child_unchecked(parent: Option<&UnitPath>, label: &str) -> UnitPath {
        match parent {
            Some(p) => p.child(label),
            None => UnitPath(vec![label.to_string()]),
        }
    }
}

fn label_problem(label: &str) -> Option<&'static str> {
    if label.trim().is_empty() {
        Some("empty label")
    } else if label.contains('/') {
        Some("labels may not contain '/'")
    } else {
        None
    }
}

impl fmt::Display for UnitPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("/"))
    }
}

impl fmt::Debug for UnitPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UnitPath({:?})", self.to_string())
    }
}

impl FromStr for UnitPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        UnitPath::parse(s)
    }
}

impl Serialize for UnitPath {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for UnitPath {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        UnitPath::parse(&text).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Generic document

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default)]
    pub required: bool,
    /// Value carried by the generic itself, e.g. `[$days=30]` on a version.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Value>,
}

impl ParamSpec {
    pub fn required(name: &str, kind: ParamKind) -> Self {
        ParamSpec {
            name: name.to_string(),
            kind,
            required: true,
            default: None,
        }
    }

    pub fn with_default(name: &str, value: Value) -> Self {
        ParamSpec {
            name: name.to_string(),
            kind: value.kind(),
            required: true,
            default: Some(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FragmentRef(pub String);

impl fmt::Display for FragmentRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub author: String,
    pub created: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextVersion {
    pub number: u32,
    pub fragment: FragmentRef,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<ParamSpec>,
    #[serde(default)]
    pub commentary: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inclusion {
    Compulsory,
    Optional,
}

/// One node of the unit tree. Exactly one of `children` and `versions` is
/// populated; a unit without children is atomic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitTemplate {
    pub label: String,
    pub inclusion: Inclusion,
    pub order: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<ParamSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<UnitTemplate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub versions: Vec<TextVersion>,
    #[serde(default)]
    pub commentary: String,
    #[serde(default)]
    pub keyword_suggestions: BTreeSet<String>,
}

impl UnitTemplate {
    pub fn is_atomic(&self) -> bool {
        self.children.is_empty()
    }

    pub fn is_compulsory(&self) -> bool {
        self.inclusion == Inclusion::Compulsory
    }

    pub fn version(&self, number: u32) -> Option<&TextVersion> {
        self.versions.iter().find(|v| v.number == number)
    }

    pub fn lowest_version(&self) -> Option<u32> {
        self.versions.iter().map(|v| v.number).min()
    }

    pub fn child(&self, label: &str) -> Option<&UnitTemplate> {
        self.children.iter().find(|c| c.label == label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenericDocument {
    pub doc_type: String,
    pub category: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<ParamSpec>,
    pub parts: Vec<UnitTemplate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<Constraint>,
    pub schema_version: u32,
    /// Fragment texts keyed by fragment id. The store keeps these as separate
    /// files; in memory and in import bundles they travel with the document.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fragments: BTreeMap<FragmentRef, String>,
}

/// Siblings sorted by their `order` value.
pub fn ordered(units: &[UnitTemplate]) -> Vec<&UnitTemplate> {
    let mut v: Vec<_> = units.iter().collect();
    v.sort_by(|a, b| a.order.cmp(&b.order).then_with(|| a.label.cmp(&b.label)));
    v
}

impl GenericDocument {
    pub fn fragment_text(&self, r: &FragmentRef) -> Result<&str> {
        self.fragments
            .get(r)
            .map(String::as_str)
            .ok_or_else(|| Error::FragmentUnreadable(r.0.clone()))
    }

    /// The child list under `parent`, or the parts list for `None`.
    pub fn children_of(&self, parent: Option<&UnitPath>) -> Result<&[UnitTemplate]> {
        match parent {
            None => Ok(&self.parts),
            Some(p) => Ok(&resolve_unit(self, p)?.children),
        }
    }

    /// Pre-order traversal honouring sibling order.
    pub fn walk(&self) -> Vec<(UnitPath, &UnitTemplate)> {
        fn go<'g>(
            parent: Option<&UnitPath>,
            units: &'g [UnitTemplate],
            out: &mut Vec<(UnitPath, &'g UnitTemplate)>,
        ) {
            for u in ordered(units) {
                let path = UnitPath::child_unchecked(parent, &u.label);
                out.push((path.clone(), u));
                go(Some(&path), &u.children, out);
            }
        }
        let mut out = Vec::new();
        go(None, &self.parts, &mut out);
        out
    }

    /// Derived section numbers (`N`, `N-M`, ...) over the full tree.
    pub fn numbering(&self) -> Vec<(String, UnitPath)> {
        fn go(
            prefix: &str,
            parent: Option<&UnitPath>,
            units: &[UnitTemplate],
            out: &mut Vec<(String, UnitPath)>,
        ) {
            for (i, u) in ordered(units).into_iter().enumerate() {
                let number = if prefix.is_empty() {
                    (i + 1).to_string()
                } else {
                    format!("{prefix}-{}", i + 1)
                };
                let path = UnitPath::child_unchecked(parent, &u.label);
                out.push((number.clone(), path.clone()));
                go(&number, Some(&path), &u.children, out);
            }
        }
        let mut out = Vec::new();
        go("", None, &self.parts, &mut out);
        out
    }

    fn next_fragment_ref(&self) -> FragmentRef {
        let used = self
            .fragments
            .keys()
            .cloned()
            .chain(self.walk().into_iter().flat_map(|(_, u)| {
                u.versions.iter().map(|v| v.fragment.clone()).collect::<Vec<_>>()
            }))
            .filter_map(|r| r.0.strip_prefix("tf").and_then(|n| n.parse::<u64>().ok()))
            .max()
            .unwrap_or(0);
        FragmentRef(format!("tf{}", used + 1))
    }
}

pub fn resolve_unit<'g>(g: &'g GenericDocument, p: &UnitPath) -> Result<&'g UnitTemplate> {
    let mut units = &g.parts;
    let mut found = None;
    for label in p.labels() {
        let u = units
            .iter()
            .find(|u| &u.label == label)
            .ok_or_else(|| Error::NotFound(p.clone()))?;
        units = &u.children;
        found = Some(u);
    }
    found.ok_or_else(|| Error::NotFound(p.clone()))
}

fn resolve_unit_mut<'g>(g: &'g mut GenericDocument, p: &UnitPath) -> Result<&'g mut UnitTemplate> {
    let mut units = &mut g.parts;
    let (last, init) = p.labels().split_last().ok_or_else(|| Error::NotFound(p.clone()))?;
    for label in init {
        let u = units
            .iter_mut()
            .find(|u| &u.label == label)
            .ok_or_else(|| Error::NotFound(p.clone()))?;
        units = &mut u.children;
    }
    units
        .iter_mut()
        .find(|u| &u.label == last)
        .ok_or_else(|| Error::NotFound(p.clone()))
}

/// Atomic units in traversal order, optionally restricted to a subtree.
pub fn atomic_units(g: &GenericDocument, within: Option<&UnitPath>) -> Result<Vec<UnitPath>> {
    if let Some(w) = within {
        resolve_unit(g, w)?;
    }
    Ok(g.walk()
        .into_iter()
        .filter(|(p, u)| u.is_atomic() && within.is_none_or(|w| w.covers(p)))
        .map(|(p, _)| p)
        .collect())
}

/// Input for a new text version of an atomic unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewVersion {
    pub text: String,
    #[serde(default)]
    pub params: Vec<ParamSpec>,
    #[serde(default)]
    pub commentary: String,
    #[serde(default)]
    pub author: String,
    pub created: NaiveDate,
}

/// Appends a version to an atomic unit. Versions are never replaced or
/// deduplicated; the new number is the previous maximum plus one.
pub fn add_version(
    g: &GenericDocument,
    p: &UnitPath,
    new: NewVersion,
) -> Result<(GenericDocument, u32)> {
    let mut out = g.clone();
    let fragment = out.next_fragment_ref();
    let unit = resolve_unit_mut(&mut out, p)?;
    if !unit.is_atomic() {
        return Err(Error::NotAtomic(p.clone()));
    }
    let number = unit.versions.iter().map(|v| v.number).max().unwrap_or(0) + 1;
    unit.versions.push(TextVersion {
        number,
        fragment: fragment.clone(),
        params: new.params,
        commentary: new.commentary,
        provenance: Provenance {
            author: new.author,
            created: new.created,
        },
    });
    out.fragments.insert(fragment, new.text);
    Ok((out, number))
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    #[serde(default)]
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }

    fn error(&mut self, code: &str, message: String) {
        self.errors.push(Issue {
            code: code.into(),
            message,
        });
    }

    fn warn(&mut self, code: &str, message: String) {
        self.warnings.push(Issue {
            code: code.into(),
            message,
        });
    }

    pub fn codes(&self) -> Vec<&str> {
        self.errors.iter().map(|i| i.code.as_str()).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<_> = self.errors.iter().map(|i| i.message.as_str()).collect();
        f.write_str(&msgs.join("; "))
    }
}

fn check_params(report: &mut ValidationReport, scope: &str, params: &[ParamSpec]) {
    let mut seen = BTreeSet::new();
    for p in params {
        if !is_valid_ident(&p.name) {
            report.error("bad_param_name", format!("{scope}: invalid parameter name '{}'", p.name));
        }
        if is_builtin(&p.name) {
            report.error(
                "bad_param_name",
                format!("{scope}: '{}' is a reserved built-in parameter", p.name),
            );
        }
        if !seen.insert(p.name.as_str()) {
            report.error("duplicate_param", format!("{scope}: parameter '{}' declared twice", p.name));
        }
        if let Some(d) = &p.default {
            if d.kind() != p.kind {
                report.error(
                    "bad_default",
                    format!("{scope}: default for '{}' is {} but kind is {}", p.name, d.kind(), p.kind),
                );
            }
        }
    }
}

fn check_siblings(report: &mut ValidationReport, parent: Option<&UnitPath>, units: &[UnitTemplate]) {
    let where_ = parent.map_or_else(|| "top level".to_string(), |p| format!("'{p}'"));
    let mut labels = BTreeSet::new();
    for u in units {
        if !labels.insert(u.label.as_str()) {
            report.error(
                "duplicate_label",
                format!("duplicate label '{}' under {where_}", u.label),
            );
        }
    }
    let mut orders: Vec<u32> = units.iter().map(|u| u.order).collect();
    orders.sort_unstable();
    if orders.iter().enumerate().any(|(i, o)| *o as usize != i + 1) {
        report.error(
            "order_not_permutation",
            format!("order values under {where_} are not a permutation of 1..{}", units.len()),
        );
    }
    for u in units {
        if let Some(problem) = label_problem(&u.label) {
            report.error("bad_label", format!("bad label '{}' under {where_}: {problem}", u.label));
            continue;
        }
        let path = UnitPath::child_unchecked(parent, &u.label);
        check_params(report, &format!("unit '{path}'"), &u.params);
        if u.is_atomic() {
            if u.versions.is_empty() {
                report.error("empty_versions", format!("atomic unit '{path}' has no versions"));
            }
            let mut numbers: Vec<u32> = u.versions.iter().map(|v| v.number).collect();
            numbers.sort_unstable();
            if numbers.iter().enumerate().any(|(i, n)| *n as usize != i + 1) {
                report.error(
                    "non_contiguous_versions",
                    format!("versions of '{path}' are not numbered contiguously from 1"),
                );
            }
            for v in &u.versions {
                check_params(report, &format!("'{path}' version {}", v.number), &v.params);
            }
        } else {
            if !u.versions.is_empty() {
                report.error(
                    "versions_on_interior",
                    format!("'{path}' has both children and versions"),
                );
            }
            check_siblings(report, Some(&path), &u.children);
        }
    }
}

pub fn validate_generic(g: &GenericDocument) -> ValidationReport {
    let mut report = ValidationReport::default();
    if g.doc_type.trim().is_empty() {
        report.error("bad_doc_type", "document type is empty".into());
    }
    if g.parts.is_empty() {
        report.error("no_parts", "generic document has no parts".into());
    }
    check_params(&mut report, "document", &g.params);
    check_siblings(&mut report, None, &g.parts);

    let mut refs = BTreeSet::new();
    for (path, u) in g.walk() {
        for v in &u.versions {
            if !refs.insert(&v.fragment) {
                report.error(
                    "duplicate_fragment_ref",
                    format!("fragment '{}' used by more than one version ('{path}')", v.fragment),
                );
            }
            if !g.fragments.contains_key(&v.fragment) {
                report.error(
                    "missing_fragment",
                    format!("'{path}' version {} has no fragment text '{}'", v.number, v.fragment),
                );
            }
        }
    }

    for (i, c) in g.constraints.iter().enumerate() {
        for p in c.paths() {
            if resolve_unit(g, p).is_err() {
                report.error(
                    "unresolved_path",
                    format!("constraint #{} refers to unknown unit '{p}'", i + 1),
                );
            }
        }
        if let Some((a, b)) = c.pair() {
            if a == b {
                report.error(
                    "self_relation",
                    format!("constraint #{} relates '{a}' to itself", i + 1),
                );
            } else if a.is_ancestor_of(b) || b.is_ancestor_of(a) {
                report.error(
                    "ancestor_relation",
                    format!("constraint #{} relates '{a}' to its own ancestor or descendant", i + 1),
                );
            }
        }
    }
    if report.is_clean() {
        crate::constraints::trivial_conflicts(g, &mut |code, msg| report.warn(code, msg));
    }
    report
}

// ---------------------------------------------------------------------------
// Instances

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Party {
    pub name: String,
    pub address: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

impl Party {
    pub fn new(name: &str, address: &str) -> Self {
        Party {
            name: name.into(),
            address: address.into(),
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingScope {
    Document,
    Unit(UnitPath),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBinding {
    pub scope: BindingScope,
    pub name: String,
    pub value: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagKind {
    Duty,
    Right,
}

impl FromStr for TagKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "duty" => Ok(TagKind::Duty),
            "right" => Ok(TagKind::Right),
            other => Err(Error::Invalid(format!("unknown tag kind '{other}'"))),
        }
    }
}

impl fmt::Display for TagKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TagKind::Duty => "duty",
            TagKind::Right => "right",
        })
    }
}

/// Duty/right index entry. Carries no semantics beyond retrieval.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Tag {
    pub kind: TagKind,
    pub party: u8,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderOverride {
    /// `None` reorders the top-level parts.
    pub parent: Option<UnitPath>,
    pub order: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Draft,
    Final,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentInstance {
    pub doc_type: String,
    pub id: String,
    pub display_name: String,
    pub parties: [Party; 2],
    pub date: Option<NaiveDate>,
    #[serde(default)]
    pub bindings: Vec<ParamBinding>,
    /// Selected version per included atomic unit.
    #[serde(default)]
    pub selections: BTreeMap<UnitPath, u32>,
    #[serde(default)]
    pub included_optional: BTreeSet<UnitPath>,
    #[serde(default)]
    pub order_overrides: Vec<OrderOverride>,
    #[serde(default)]
    pub keywords: BTreeMap<UnitPath, BTreeSet<String>>,
    #[serde(default)]
    pub tags: BTreeMap<UnitPath, BTreeSet<Tag>>,
    #[serde(default)]
    pub notes: String,
    pub status: Status,
}

impl DocumentInstance {
    /// A fresh draft: every compulsory atomic unit selected at its lowest
    /// version, keywords seeded from the generic's suggestions.
    pub fn new_draft(g: &GenericDocument, id: &str) -> Self {
        let mut inst = DocumentInstance {
            doc_type: g.doc_type.clone(),
            id: id.to_string(),
            display_name: id.to_string(),
            parties: Default::default(),
            date: None,
            bindings: Vec::new(),
            selections: BTreeMap::new(),
            included_optional: BTreeSet::new(),
            order_overrides: Vec::new(),
            keywords: BTreeMap::new(),
            tags: BTreeMap::new(),
            notes: String::new(),
            status: Status::Draft,
        };
        for part in ordered(&g.parts) {
            if part.is_compulsory() {
                let path = UnitPath::child_unchecked(None, &part.label);
                inst.fill(&path, part, &path);
            }
        }
        inst
    }

    pub fn is_included(&self, p: &UnitPath) -> bool {
        self.selections.contains_key(p)
            || self.selections.range(p.clone()..).take_while(|(k, _)| p.covers(k)).next().is_some()
    }

    pub fn binding(&self, scope: &BindingScope, name: &str) -> Option<&Value> {
        self.bindings
            .iter()
            .find(|b| &b.scope == scope && b.name == name)
            .map(|b| &b.value)
    }

    /// Inserts or replaces; bindings stay sorted by (scope, name).
    pub fn set_binding(&mut self, scope: BindingScope, name: &str, value: Value) {
        self.bindings.retain(|b| !(b.scope == scope && b.name == name));
        self.bindings.push(ParamBinding {
            scope,
            name: name.to_string(),
            value,
        });
        self.bindings
            .sort_by(|a, b| a.scope.cmp(&b.scope).then_with(|| a.name.cmp(&b.name)));
    }

    fn fill(&mut self, path: &UnitPath, unit: &UnitTemplate, target: &UnitPath) {
        if !unit.keyword_suggestions.is_empty() && !self.keywords.contains_key(path) {
            self.keywords.insert(path.clone(), unit.keyword_suggestions.clone());
        }
        if unit.is_atomic() {
            if let Some(v) = unit.lowest_version() {
                self.selections.entry(path.clone()).or_insert(v);
            }
            return;
        }
        for child in ordered(&unit.children) {
            let cp = path.child(&child.label);
            if child.is_compulsory() || cp.covers(target) || self.included_optional.contains(&cp) {
                self.fill(&cp, child, target);
            }
        }
    }

    /// Includes a unit together with its compulsory descendants and any
    /// ancestors it needs. Already-made version choices are kept.
    pub fn include_unit(&mut self, g: &GenericDocument, p: &UnitPath) -> Result<()> {
        resolve_unit(g, p)?;
        let lineage = p.lineage();
        let top = lineage
            .iter()
            .find(|a| !self.is_included(a))
            .unwrap_or(p)
            .clone();
        for a in &lineage {
            if !resolve_unit(g, a)?.is_compulsory() {
                self.included_optional.insert(a.clone());
            }
        }
        let top_unit = resolve_unit(g, &top)?;
        self.fill(&top, top_unit, p);
        // A unit with only optional children would otherwise stay empty:
        // take the first child in effective order until an atom is reached.
        let mut cur = p.clone();
        let mut unit = resolve_unit(g, p)?;
        while !self.is_included(&cur) {
            let Some(first) = self.children_in_order(Some(&cur), &unit.children).first().copied() else {
                break;
            };
            cur = cur.child(&first.label);
            if !first.is_compulsory() {
                self.included_optional.insert(cur.clone());
            }
            self.fill(&cur, first, &cur);
            unit = first;
        }
        Ok(())
    }

    /// Removes a unit and everything beneath it.
    pub fn exclude_unit(&mut self, g: &GenericDocument, p: &UnitPath) -> Result<()> {
        resolve_unit(g, p)?;
        self.selections.retain(|k, _| !p.covers(k));
        self.included_optional.retain(|k| !p.covers(k));
        self.keywords.retain(|k, _| !p.covers(k));
        self.tags.retain(|k, _| !p.covers(k));
        Ok(())
    }

    /// Children of `parent` in effective order (instance override if it is a
    /// valid permutation, else the generic's order values).
    pub fn children_in_order<'g>(
        &self,
        parent: Option<&UnitPath>,
        children: &'g [UnitTemplate],
    ) -> Vec<&'g UnitTemplate> {
        let over = self
            .order_overrides
            .iter()
            .find(|o| o.parent.as_ref() == parent)
            .filter(|o| is_permutation(&o.order, children));
        match over {
            Some(o) => o
                .order
                .iter()
                .filter_map(|l| children.iter().find(|c| &c.label == l))
                .collect(),
            None => ordered(children),
        }
    }

    pub fn all_keywords(&self) -> BTreeSet<String> {
        self.keywords.values().flatten().cloned().collect()
    }
}

pub fn is_permutation(order: &[String], children: &[UnitTemplate]) -> bool {
    let given: BTreeSet<&str> = order.iter().map(String::as_str).collect();
    let actual: BTreeSet<&str> = children.iter().map(|c| c.label.as_str()).collect();
    given.len() == order.len() && given == actual
}

fn apply_specs(env: &mut Env, specs: &[ParamSpec]) {
    for s in specs {
        if let Some(d) = &s.default {
            env.insert(s.name.clone(), d.clone());
        }
    }
}

fn apply_bindings(env: &mut Env, inst: &DocumentInstance, scope: &BindingScope) {
    for b in inst.bindings.iter().filter(|b| &b.scope == scope) {
        env.insert(b.name.clone(), b.value.clone());
    }
}

/// Built-ins plus document-level defaults and bindings.
pub fn document_env(g: &GenericDocument, inst: &DocumentInstance) -> Env {
    let mut env = Env::new();
    let [p1, p2] = &inst.parties;
    for (key, val) in [
        ("Party1.Name", &p1.name),
        ("Party1.Address", &p1.address),
        ("Party2.Name", &p2.name),
        ("Party2.Address", &p2.address),
    ] {
        if !val.trim().is_empty() {
            env.insert(key.to_string(), Value::String(val.clone()));
        }
    }
    if let Some(d) = inst.date {
        env.insert("Date".into(), Value::Date(d));
    }
    apply_specs(&mut env, &g.params);
    apply_bindings(&mut env, inst, &BindingScope::Document);
    env
}

/// Values visible to the fragment of version `v` of unit `p`. Nearest scope
/// wins: the version, then units from `p` up to its part, then the document,
/// then the built-ins. At each scope an instance binding beats a default
/// declared by the generic.
pub fn effective_bindings(
    g: &GenericDocument,
    inst: &DocumentInstance,
    p: &UnitPath,
    v: u32,
) -> Env {
    let mut env = document_env(g, inst);
    for a in p.lineage() {
        if let Ok(unit) = resolve_unit(g, &a) {
            apply_specs(&mut env, &unit.params);
            if a == *p {
                if let Some(ver) = unit.version(v) {
                    apply_specs(&mut env, &ver.params);
                }
            }
        }
        apply_bindings(&mut env, inst, &BindingScope::Unit(a));
    }
    env
}
