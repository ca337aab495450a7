//! Drafting sessions.
//!
//! A session owns a draft instance and an append-only log of the edits that
//! produced it. Replaying the log against the generic reproduces the session.
//! [`Engine`] wraps a [`Store`] and is the entry point used by the service
//! and the CLI.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::constraints::{check, suggest_remedies, Remedy, Stage, Violation};
use crate::error::{Error, Result};
use crate::model::{
    add_version, is_permutation, resolve_unit, validate_generic, BindingScope, DocumentInstance,
    GenericDocument, NewVersion, OrderOverride, ParamSpec, Party, Status, Tag, UnitPath,
};
use crate::query::{self, QueryFilter};
use crate::render::{export_markup, render_document, RenderedDocument};
use crate::store::{GenericSummary, InstanceSummary, IntegrityReport, Store};
use crate::value::{is_builtin, is_valid_ident, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStage {
    Meta,
    Compulsory,
    Optional,
    Review,
    Finalized,
}

impl SessionStage {
    fn next(self) -> Option<SessionStage> {
        match self {
            SessionStage::Meta => Some(SessionStage::Compulsory),
            SessionStage::Compulsory => Some(SessionStage::Optional),
            SessionStage::Optional => Some(SessionStage::Review),
            SessionStage::Review => Some(SessionStage::Finalized),
            SessionStage::Finalized => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Edit {
    SetParties {
        p1: Party,
        p2: Party,
    },
    SetDate {
        date: Option<NaiveDate>,
    },
    SetParam {
        scope: BindingScope,
        name: String,
        value: Value,
    },
    IncludeUnit {
        path: UnitPath,
    },
    ExcludeUnit {
        path: UnitPath,
    },
    ChooseVersion {
        path: UnitPath,
        version: u32,
    },
    CreateVersion {
        path: UnitPath,
        text: String,
        #[serde(default)]
        params: Vec<ParamSpec>,
        #[serde(default)]
        commentary: String,
        #[serde(default)]
        author: String,
    },
    Reorder {
        parent: Option<UnitPath>,
        order: Vec<String>,
    },
    SetKeywords {
        path: UnitPath,
        keywords: BTreeSet<String>,
    },
    SetTags {
        path: UnitPath,
        tags: BTreeSet<Tag>,
    },
    SetNotes {
        text: String,
    },
    ToggleAutocheck {
        on: bool,
    },
    SetDisplayName {
        name: String,
    },
    SetStage {
        stage: SessionStage,
    },
    /// Recorded by [`Engine::finalize`]; not accepted from clients.
    Finalize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub at: DateTime<Utc>,
    pub edit: Edit,
    /// Version number a `CreateVersion` received, so replay can select it
    /// without creating it again.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_version: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub doc_type: String,
    pub stage: SessionStage,
    pub draft: DocumentInstance,
    pub autocheck: bool,
    pub edit_log: Vec<LogEntry>,
    #[serde(default)]
    pub pending_unit_cursor: Option<UnitPath>,
}

fn reject<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::EditRejected(msg.into()))
}

impl Session {
    pub fn new(g: &GenericDocument, session_id: &str, draft_id: &str) -> Session {
        Session {
            session_id: session_id.to_string(),
            doc_type: g.doc_type.clone(),
            stage: SessionStage::Meta,
            draft: DocumentInstance::new_draft(g, draft_id),
            autocheck: false,
            edit_log: Vec::new(),
            pending_unit_cursor: None,
        }
    }

    pub fn is_finalized(&self) -> bool {
        self.stage == SessionStage::Finalized
    }

    /// Checks an edit against the session and generic without applying it.
    /// A `CreateVersion` that passes here cannot fail once the version has
    /// been appended.
    pub fn precheck(&self, g: &GenericDocument, edit: &Edit) -> Result<()> {
        if self.is_finalized() {
            return reject("session is finalized");
        }
        match edit {
            Edit::CreateVersion { path, params, .. } => {
                let unit = resolve_unit(g, path).map_err(|e| Error::EditRejected(e.to_string()))?;
                if !unit.is_atomic() {
                    return reject(format!("'{path}' is not atomic"));
                }
                let mut seen = BTreeSet::new();
                for s in params {
                    if !is_valid_ident(&s.name) || is_builtin(&s.name) {
                        return reject(format!("bad parameter name '{}'", s.name));
                    }
                    if !seen.insert(&s.name) {
                        return reject(format!("parameter '{}' declared twice", s.name));
                    }
                    if s.default.as_ref().is_some_and(|d| d.kind() != s.kind) {
                        return reject(format!("default for '{}' is not a {}", s.name, s.kind));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Applies one edit, appending it to the log. On error the session is
    /// unchanged. `created_version` must be the number the generic assigned
    /// when the edit is a `CreateVersion`; `g` must already contain it.
    pub fn apply(
        &mut self,
        g: &GenericDocument,
        edit: Edit,
        created_version: Option<u32>,
        at: DateTime<Utc>,
    ) -> Result<()> {
        self.precheck(g, &edit)?;
        let mut next = self.clone();
        next.apply_inner(g, &edit, created_version)?;
        next.edit_log.push(LogEntry {
            at,
            edit,
            created_version,
        });
        *self = next;
        Ok(())
    }

    fn apply_inner(&mut self, g: &GenericDocument, edit: &Edit, created: Option<u32>) -> Result<()> {
        let unit_of = |p: &UnitPath| resolve_unit(g, p).map_err(|e| Error::EditRejected(e.to_string()));
        match edit {
            Edit::SetParties { p1, p2 } => {
                self.draft.parties = [p1.clone(), p2.clone()];
            }
            Edit::SetDate { date } => self.draft.date = *date,
            Edit::SetParam { scope, name, value } => {
                let spec = declared_spec(g, scope, name)?;
                if spec.kind != value.kind() {
                    return reject(format!("'{name}' takes a {}, not a {}", spec.kind, value.kind()));
                }
                self.draft.set_binding(scope.clone(), name, value.clone());
            }
            Edit::IncludeUnit { path } => {
                unit_of(path)?;
                self.draft.include_unit(g, path)?;
                self.pending_unit_cursor = Some(path.clone());
            }
            Edit::ExcludeUnit { path } => {
                let unit = unit_of(path)?;
                if unit.is_compulsory() {
                    return reject(format!("'{path}' is compulsory"));
                }
                self.draft.exclude_unit(g, path)?;
                if self.pending_unit_cursor.as_ref().is_some_and(|c| path.covers(c)) {
                    self.pending_unit_cursor = None;
                }
            }
            Edit::ChooseVersion { path, version } => {
                let unit = unit_of(path)?;
                if !unit.is_atomic() {
                    return reject(format!("'{path}' is not atomic"));
                }
                if unit.version(*version).is_none() {
                    return reject(format!("'{path}' has no version {version}"));
                }
                self.draft.include_unit(g, path)?;
                self.draft.selections.insert(path.clone(), *version);
                self.pending_unit_cursor = Some(path.clone());
            }
            Edit::CreateVersion { path, .. } => {
                let Some(n) = created else {
                    return reject("version number not assigned");
                };
                if unit_of(path)?.version(n).is_none() {
                    return reject(format!("'{path}' has no version {n}"));
                }
                self.draft.include_unit(g, path)?;
                self.draft.selections.insert(path.clone(), n);
                self.pending_unit_cursor = Some(path.clone());
            }
            Edit::Reorder { parent, order } => {
                let children = g.children_of(parent.as_ref()).map_err(|e| Error::EditRejected(e.to_string()))?;
                if !is_permutation(order, children) {
                    return reject("order is not a permutation of the children");
                }
                self.draft.order_overrides.retain(|o| &o.parent != parent);
                self.draft.order_overrides.push(OrderOverride {
                    parent: parent.clone(),
                    order: order.clone(),
                });
                self.draft.order_overrides.sort_by(|a, b| a.parent.cmp(&b.parent));
            }
            Edit::SetKeywords { path, keywords } => {
                unit_of(path)?;
                if !self.draft.is_included(path) {
                    return reject(format!("'{path}' is not included"));
                }
                let kw: BTreeSet<String> = keywords
                    .iter()
                    .map(|k| k.trim().to_string())
                    .filter(|k| !k.is_empty())
                    .collect();
                if kw.is_empty() {
                    self.draft.keywords.remove(path);
                } else {
                    self.draft.keywords.insert(path.clone(), kw);
                }
            }
            Edit::SetTags { path, tags } => {
                unit_of(path)?;
                if !self.draft.is_included(path) {
                    return reject(format!("'{path}' is not included"));
                }
                if let Some(t) = tags.iter().find(|t| t.party != 1 && t.party != 2) {
                    return reject(format!("tag party must be 1 or 2, not {}", t.party));
                }
                if tags.is_empty() {
                    self.draft.tags.remove(path);
                } else {
                    self.draft.tags.insert(path.clone(), tags.clone());
                }
            }
            Edit::SetNotes { text } => self.draft.notes = text.clone(),
            Edit::ToggleAutocheck { on } => self.autocheck = *on,
            Edit::SetDisplayName { name } => {
                if name.trim().is_empty() {
                    return reject("display name is empty");
                }
                self.draft.display_name = name.clone();
            }
            Edit::SetStage { stage } => {
                let ok = *stage < self.stage || self.stage.next() == Some(*stage);
                if *stage == SessionStage::Finalized || !ok {
                    return reject(format!("cannot move from {:?} to {:?}", self.stage, stage));
                }
                self.stage = *stage;
            }
            Edit::Finalize => {
                if self.stage != SessionStage::Review {
                    return reject("finalize requires the review stage");
                }
                let outstanding = check(g, &self.draft, Stage::Finalize)?;
                if !outstanding.is_empty() {
                    return Err(Error::ViolationsOutstanding(outstanding));
                }
                render_document(g, &self.draft)?;
                self.draft.status = Status::Final;
                self.stage = SessionStage::Finalized;
            }
        }
        Ok(())
    }

    /// In-memory editing: `CreateVersion` appends to `g` directly. Returns
    /// the interactive check when autocheck is on, else nothing.
    pub fn edit(&mut self, g: &mut GenericDocument, edit: Edit) -> Result<Vec<Violation>> {
        let at = Utc::now();
        self.precheck(g, &edit)?;
        let created = match &edit {
            Edit::CreateVersion {
                path,
                text,
                params,
                commentary,
                author,
            } => {
                let (g2, n) = add_version(g, path, new_version(text, params, commentary, author, at))?;
                *g = g2;
                Some(n)
            }
            _ => None,
        };
        self.apply(g, edit, created, at)?;
        self.autocheck_result(g)
    }

    pub fn autocheck_result(&self, g: &GenericDocument) -> Result<Vec<Violation>> {
        if self.autocheck && !self.is_finalized() {
            check(g, &self.draft, Stage::Interactive)
        } else {
            Ok(Vec::new())
        }
    }

    /// Rebuilds a session from its log. `g` is the current generic, which
    /// already holds every version the log created.
    pub fn replay(g: &GenericDocument, session_id: &str, draft_id: &str, log: &[LogEntry]) -> Result<Session> {
        let mut s = Session::new(g, session_id, draft_id);
        for entry in log {
            s.apply(g, entry.edit.clone(), entry.created_version, entry.at)?;
        }
        Ok(s)
    }
}

fn new_version(text: &str, params: &[ParamSpec], commentary: &str, author: &str, at: DateTime<Utc>) -> NewVersion {
    NewVersion {
        text: text.to_string(),
        params: params.to_vec(),
        commentary: commentary.to_string(),
        author: author.to_string(),
        created: at.date_naive(),
    }
}

/// The spec a binding would satisfy: document parameters for the document
/// scope; for a unit scope, parameters of the unit, its ancestors, the
/// document, or any version at or below the unit.
fn declared_spec<'g>(g: &'g GenericDocument, scope: &BindingScope, name: &str) -> Result<&'g ParamSpec> {
    if is_builtin(name) {
        return reject(format!("'{name}' is set through parties and date"));
    }
    let found = match scope {
        BindingScope::Document => g.params.iter().find(|s| s.name == name),
        BindingScope::Unit(p) => {
            resolve_unit(g, p).map_err(|e| Error::EditRejected(e.to_string()))?;
            let mut found = None;
            for a in p.lineage().iter().rev() {
                let unit = resolve_unit(g, a)?;
                if let Some(s) = unit.params.iter().find(|s| s.name == name) {
                    found = Some(s);
                    break;
                }
            }
            found
                .or_else(|| {
                    g.walk()
                        .into_iter()
                        .filter(|(q, _)| p.covers(q))
                        .flat_map(|(_, u)| u.versions.iter())
                        .flat_map(|v| v.params.iter())
                        .find(|s| s.name == name)
                })
                .or_else(|| g.params.iter().find(|s| s.name == name))
        }
    };
    found.ok_or_else(|| Error::EditRejected(format!("no parameter '{name}' is declared for {scope:?}")))
}

// ---------------------------------------------------------------------------
// Engine

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub violations: Vec<Violation>,
    /// Remedies for `violations[i]` at index `i`.
    pub remedies: Vec<Vec<Remedy>>,
}

impl CheckResult {
    fn new(g: &GenericDocument, inst: &DocumentInstance, violations: Vec<Violation>) -> Self {
        let remedies = violations.iter().map(|v| suggest_remedies(v, g, inst)).collect();
        CheckResult {
            violations,
            remedies,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOutcome {
    pub session: Session,
    #[serde(flatten)]
    pub check: CheckResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderFormat {
    Text,
    Markup,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rendered {
    Text(RenderedDocument),
    Markup { markup: String },
}

/// Engine operations over a store. Edits to one session are serialised;
/// distinct sessions proceed in parallel.
pub struct Engine {
    store: Store,
    sessions: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Engine {
    pub fn new(store: Store) -> Engine {
        Engine {
            store,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn open(root: impl Into<std::path::PathBuf>) -> Result<Engine> {
        Ok(Engine::new(Store::open(root)?))
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn session_lock(&self, id: &str) -> Arc<Mutex<()>> {
        let mut map = self.sessions.lock().unwrap_or_else(|p| p.into_inner());
        map.entry(id.to_string()).or_default().clone()
    }

    pub fn list_generics(&self) -> Result<Vec<GenericSummary>> {
        self.store.list_generics()
    }

    pub fn get_generic(&self, doc_type: &str) -> Result<GenericDocument> {
        self.store.get_generic(doc_type)
    }

    pub fn import_generic(&self, g: &GenericDocument) -> Result<crate::model::ValidationReport> {
        self.store.put_generic(g)?;
        Ok(validate_generic(g))
    }

    pub fn start_session(&self, doc_type: &str, prefix: Option<&str>) -> Result<Session> {
        let g = self.store.get_generic(doc_type)?;
        let id = self.store.allocate_instance_id(prefix.unwrap_or("Q"))?;
        let session_id = uuid::Uuid::new_v4().simple().to_string();
        let s = Session::new(&g, &session_id, &id);
        self.store.put_session(&s)?;
        Ok(s)
    }

    pub fn get_session(&self, id: &str) -> Result<Session> {
        self.store.get_session(id)
    }

    pub fn list_sessions(&self) -> Result<Vec<String>> {
        self.store.list_sessions()
    }

    pub fn apply_edit(&self, session_id: &str, edit: Edit) -> Result<EditOutcome> {
        if edit == Edit::Finalize {
            return reject("finalize has its own operation");
        }
        let lock = self.session_lock(session_id);
        let _held = lock.lock().unwrap_or_else(|p| p.into_inner());
        let mut s = self.store.get_session(session_id)?;
        let mut g = self.store.get_generic(&s.doc_type)?;
        s.precheck(&g, &edit)?;
        let at = Utc::now();
        let created = match &edit {
            Edit::CreateVersion {
                path,
                text,
                params,
                commentary,
                author,
            } => {
                let (g2, n) = self
                    .store
                    .append_version(&s.doc_type, path, new_version(text, params, commentary, author, at))?;
                g = g2;
                Some(n)
            }
            _ => None,
        };
        s.apply(&g, edit, created, at)?;
        self.store.put_session(&s)?;
        let violations = s.autocheck_result(&g)?;
        Ok(EditOutcome {
            check: CheckResult::new(&g, &s.draft, violations),
            session: s,
        })
    }

    pub fn check_session(&self, session_id: &str) -> Result<CheckResult> {
        let s = self.store.get_session(session_id)?;
        let g = self.store.get_generic(&s.doc_type)?;
        let v = check(&g, &s.draft, Stage::Interactive)?;
        Ok(CheckResult::new(&g, &s.draft, v))
    }

    /// Persists the draft as a final instance. Fails with
    /// `ViolationsOutstanding` without touching the store otherwise.
    pub fn finalize(&self, session_id: &str) -> Result<DocumentInstance> {
        let lock = self.session_lock(session_id);
        let _held = lock.lock().unwrap_or_else(|p| p.into_inner());
        let mut s = self.store.get_session(session_id)?;
        let g = self.store.get_generic(&s.doc_type)?;
        s.apply(&g, Edit::Finalize, None, Utc::now())?;
        self.store.put_instance(&s.draft)?;
        self.store.put_session(&s)?;
        Ok(s.draft)
    }

    pub fn get_instance(&self, id: &str) -> Result<DocumentInstance> {
        self.store.get_instance(id)
    }

    pub fn list_instances(&self) -> Result<Vec<InstanceSummary>> {
        self.store.list_instances()
    }

    pub fn query(&self, f: &QueryFilter) -> Result<Vec<InstanceSummary>> {
        query::run_query(&self.store, f)
    }

    pub fn expand(&self, id: &str) -> Result<RenderedDocument> {
        query::expand(&self.store, id)
    }

    pub fn render(&self, id: &str, format: RenderFormat) -> Result<Rendered> {
        match format {
            RenderFormat::Text => self.expand(id).map(Rendered::Text),
            RenderFormat::Markup => {
                let inst = self.store.get_instance(id)?;
                let g = self.store.get_generic(&inst.doc_type)?;
                export_markup(&g, &inst).map(|markup| Rendered::Markup { markup })
            }
        }
    }

    pub fn fsck(&self) -> Result<IntegrityReport> {
        self.store.integrity_check()
    }
}
