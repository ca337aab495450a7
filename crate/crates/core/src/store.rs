//! File-backed persistence.
//!
//! Layout under the store root:
//!
//! ```text
//! store.json                          counters, schema_version
//! generics/<slug>/generic.json        generic document without fragment text
//! generics/<slug>/fragments/<id>.txt  one file per text version
//! instances/<id>.json
//! sessions/<id>.json
//! ```
//!
//! Every record is written to a temporary file and renamed into place.
//! Writers are serialised by an in-process mutex plus an exclusive lock on
//! `.lock`, so separate processes sharing a root also serialise.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::assembly::Session;
use crate::error::{Error, Result};
use crate::model::{
    add_version, resolve_unit, validate_generic, DocumentInstance, FragmentRef, GenericDocument,
    NewVersion, Party, Status, UnitPath, SCHEMA_VERSION,
};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct StoreMeta {
    schema_version: u32,
    counters: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenericSummary {
    pub doc_type: String,
    pub category: String,
    pub parts: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub id: String,
    pub display_name: String,
    pub doc_type: String,
    pub category: String,
    pub parties: [Party; 2],
    pub date: Option<chrono::NaiveDate>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    DanglingFragment { doc_type: String, fragment: String, path: UnitPath, version: u32 },
    UnreadableRecord { file: String, message: String },
    UnknownDocType { instance: String, doc_type: String },
    UnknownUnit { instance: String, path: UnitPath },
    BadVersion { instance: String, path: UnitPath, version: u32 },
    CounterBehind { prefix: String, counter: u64, highest: u64 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrityReport {
    pub findings: Vec<Finding>,
}

impl IntegrityReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Lowercase, every non-alphanumeric character replaced by `-`.
pub fn slug(doc_type: &str) -> String {
    doc_type
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect()
}

fn valid_record_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Canonical JSON: sorted keys, two-space indent, trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let v = serde_json::to_value(value).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut bytes = serde_json::to_vec_pretty(&v).map_err(|e| Error::Invalid(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().expect("record paths have a parent");
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("record");
    let tmp = dir.join(format!(".{name}.{}.{}.tmp", std::process::id(), uuid::Uuid::new_v4().simple()));
    let result = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(path, e)),
    };
    serde_json::from_slice(&bytes).map(Some).map_err(|e| Error::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub struct Store {
    root: PathBuf,
    writer: Mutex<()>,
}

struct WriteGuard<'a> {
    _local: std::sync::MutexGuard<'a, ()>,
    file: File,
}

impl Drop for WriteGuard<'_> {
    fn drop(&mut self) {
        let _ = self.file.unlock();
    }
}

impl Store {
    /// Opens a store, creating the directory layout if needed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store> {
        let root = root.into();
        for sub in ["generics", "instances", "sessions"] {
            let d = root.join(sub);
            fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        let store = Store {
            root,
            writer: Mutex::new(()),
        };
        if !store.meta_path().exists() {
            let _g = store.lock()?;
            if !store.meta_path().exists() {
                store.write_meta(&StoreMeta {
                    schema_version: SCHEMA_VERSION,
                    counters: BTreeMap::new(),
                })?;
            }
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn lock(&self) -> Result<WriteGuard<'_>> {
        let local = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let path = self.root.join(".lock");
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        file.lock().map_err(|e| Error::io(&path, e))?;
        Ok(WriteGuard { _local: local, file })
    }

    fn meta_path(&self) -> PathBuf {
        self.root.join("store.json")
    }

    fn read_meta(&self) -> Result<StoreMeta> {
        Ok(read_json(&self.meta_path())?.unwrap_or_default())
    }

    fn write_meta(&self, meta: &StoreMeta) -> Result<()> {
        write_atomic(&self.meta_path(), &canonical_json(meta)?)
    }

    fn generic_dir(&self, doc_type: &str) -> PathBuf {
        self.root.join("generics").join(slug(doc_type))
    }

    fn instance_path(&self, id: &str) -> PathBuf {
        self.root.join("instances").join(format!("{id}.json"))
    }

    fn session_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.json"))
    }

    // -- generics ----------------------------------------------------------

    pub fn put_generic(&self, g: &GenericDocument) -> Result<()> {
        let report = validate_generic(g);
        if !report.is_clean() {
            return Err(Error::ValidationFailed(report));
        }
        let _guard = self.lock()?;
        self.write_generic(g)
    }

    fn write_generic(&self, g: &GenericDocument) -> Result<()> {
        let dir = self.generic_dir(&g.doc_type);
        if let Some(existing) = read_json::<GenericDocument>(&dir.join("generic.json"))? {
            if existing.doc_type != g.doc_type {
                return Err(Error::Invalid(format!(
                    "'{}' collides with stored type '{}' (same directory name)",
                    g.doc_type, existing.doc_type
                )));
            }
        }
        for (r, text) in &g.fragments {
            if !valid_record_id(&r.0) {
                return Err(Error::Invalid(format!("fragment id '{r}' is not filesystem-safe")));
            }
            let path = dir.join("fragments").join(format!("{r}.txt"));
            if fs::read(&path).ok().as_deref() != Some(text.as_bytes()) {
                write_atomic(&path, text.as_bytes())?;
            }
        }
        let mut skeleton = g.clone();
        skeleton.fragments.clear();
        write_atomic(&dir.join("generic.json"), &canonical_json(&skeleton)?)
    }

    pub fn get_generic(&self, doc_type: &str) -> Result<GenericDocument> {
        let dir = self.generic_dir(doc_type);
        let mut g: GenericDocument = read_json(&dir.join("generic.json"))?
            .filter(|g: &GenericDocument| g.doc_type == doc_type)
            .ok_or_else(|| Error::UnknownDocType(doc_type.to_string()))?;
        let refs: Vec<FragmentRef> = g
            .walk()
            .into_iter()
            .flat_map(|(_, u)| u.versions.iter().map(|v| v.fragment.clone()).collect::<Vec<_>>())
            .collect();
        for r in refs {
            let path = dir.join("fragments").join(format!("{r}.txt"));
            // Missing or non-UTF-8 fragments are left out; rendering reports
            // them as unreadable and integrity_check lists them.
            if let Ok(bytes) = fs::read(&path) {
                if let Ok(text) = String::from_utf8(bytes) {
                    g.fragments.insert(r, text);
                }
            }
        }
        Ok(g)
    }

    pub fn list_generics(&self) -> Result<Vec<GenericSummary>> {
        let mut out = Vec::new();
        for dir in read_dir_sorted(&self.root.join("generics"))? {
            if let Some(g) = read_json::<GenericDocument>(&dir.join("generic.json"))? {
                out.push(GenericSummary {
                    doc_type: g.doc_type,
                    category: g.category,
                    parts: g.parts.len(),
                });
            }
        }
        out.sort_by(|a, b| a.doc_type.cmp(&b.doc_type));
        Ok(out)
    }

    /// Appends a version under the store lock so that concurrent creators on
    /// the same unit receive distinct consecutive numbers.
    pub fn append_version(
        &self,
        doc_type: &str,
        path: &UnitPath,
        new: NewVersion,
    ) -> Result<(GenericDocument, u32)> {
        let _guard = self.lock()?;
        let g = self.get_generic(doc_type)?;
        let (g2, number) = add_version(&g, path, new)?;
        let report = validate_generic(&g2);
        if !report.is_clean() {
            return Err(Error::ValidationFailed(report));
        }
        self.write_generic(&g2)?;
        Ok((g2, number))
    }

    // -- instances ---------------------------------------------------------

    pub fn put_instance(&self, inst: &DocumentInstance) -> Result<()> {
        if !valid_record_id(&inst.id) {
            return Err(Error::Invalid(format!("instance id '{}' is not filesystem-safe", inst.id)));
        }
        if !self.generic_dir(&inst.doc_type).join("generic.json").exists() {
            return Err(Error::UnknownDocType(inst.doc_type.clone()));
        }
        let _guard = self.lock()?;
        write_atomic(&self.instance_path(&inst.id), &canonical_json(inst)?)
    }

    pub fn get_instance(&self, id: &str) -> Result<DocumentInstance> {
        if !valid_record_id(id) {
            return Err(Error::UnknownInstance(id.to_string()));
        }
        read_json(&self.instance_path(id))?.ok_or_else(|| Error::UnknownInstance(id.to_string()))
    }

    pub fn all_instances(&self) -> Result<Vec<DocumentInstance>> {
        let mut out = Vec::new();
        for path in read_dir_sorted(&self.root.join("instances"))? {
            if path.extension().is_some_and(|e| e == "json") {
                if let Some(inst) = read_json::<DocumentInstance>(&path)? {
                    out.push(inst);
                }
            }
        }
        Ok(out)
    }

    /// Summaries ordered by date, then id.
    pub fn list_instances(&self) -> Result<Vec<InstanceSummary>> {
        let mut categories: BTreeMap<String, String> = BTreeMap::new();
        let mut out = Vec::new();
        for inst in self.all_instances()? {
            let category = match categories.get(&inst.doc_type) {
                Some(c) => c.clone(),
                None => {
                    let c = self
                        .get_generic(&inst.doc_type)
                        .map(|g| g.category)
                        .unwrap_or_default();
                    categories.insert(inst.doc_type.clone(), c.clone());
                    c
                }
            };
            out.push(summary(&inst, category));
        }
        sort_summaries(&mut out);
        Ok(out)
    }

    pub fn allocate_instance_id(&self, prefix: &str) -> Result<String> {
        if prefix.is_empty() || !prefix.chars().all(|c| c.is_ascii_uppercase()) {
            return Err(Error::Invalid(format!("id prefix '{prefix}' must match [A-Z]+")));
        }
        let _guard = self.lock()?;
        let mut meta = self.read_meta()?;
        let next = meta.counters.get(prefix).copied().unwrap_or(0) + 1;
        meta.counters.insert(prefix.to_string(), next);
        if meta.schema_version == 0 {
            meta.schema_version = SCHEMA_VERSION;
        }
        self.write_meta(&meta)?;
        Ok(format!("{prefix}{next}"))
    }

    // -- sessions ----------------------------------------------------------

    pub fn put_session(&self, s: &Session) -> Result<()> {
        if !valid_record_id(&s.session_id) {
            return Err(Error::Invalid(format!("session id '{}' is not filesystem-safe", s.session_id)));
        }
        let _guard = self.lock()?;
        write_atomic(&self.session_path(&s.session_id), &canonical_json(s)?)
    }

    pub fn get_session(&self, id: &str) -> Result<Session> {
        if !valid_record_id(id) {
            return Err(Error::UnknownSession(id.to_string()));
        }
        read_json(&self.session_path(id))?.ok_or_else(|| Error::UnknownSession(id.to_string()))
    }

    pub fn list_sessions(&self) -> Result<Vec<String>> {
        Ok(read_dir_sorted(&self.root.join("sessions"))?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .filter_map(|p| p.file_stem().and_then(|s| s.to_str()).map(str::to_string))
            .collect())
    }

    // -- integrity ---------------------------------------------------------

    pub fn integrity_check(&self) -> Result<IntegrityReport> {
        let mut findings = Vec::new();
        let mut generics: BTreeMap<String, GenericDocument> = BTreeMap::new();
        for dir in read_dir_sorted(&self.root.join("generics"))? {
            let file = dir.join("generic.json");
            let g = match read_json::<GenericDocument>(&file) {
                Ok(Some(g)) => g,
                Ok(None) => continue,
                Err(e) => {
                    findings.push(Finding::UnreadableRecord {
                        file: file.display().to_string(),
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            for (path, unit) in g.walk() {
                for v in &unit.versions {
                    let f = dir.join("fragments").join(format!("{}.txt", v.fragment));
                    let ok = fs::read(&f).map(|b| String::from_utf8(b).is_ok()).unwrap_or(false);
                    if !ok {
                        findings.push(Finding::DanglingFragment {
                            doc_type: g.doc_type.clone(),
                            fragment: v.fragment.0.clone(),
                            path: path.clone(),
                            version: v.number,
                        });
                    }
                }
            }
            generics.insert(g.doc_type.clone(), g);
        }

        let mut highest: BTreeMap<String, u64> = BTreeMap::new();
        for path in read_dir_sorted(&self.root.join("instances"))? {
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let inst = match read_json::<DocumentInstance>(&path) {
                Ok(Some(i)) => i,
                Ok(None) => continue,
                Err(e) => {
                    findings.push(Finding::UnreadableRecord {
                        file: path.display().to_string(),
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            if let Some((prefix, n)) = split_id(&inst.id) {
                let h = highest.entry(prefix.to_string()).or_insert(0);
                *h = (*h).max(n);
            }
            let Some(g) = generics.get(&inst.doc_type) else {
                findings.push(Finding::UnknownDocType {
                    instance: inst.id.clone(),
                    doc_type: inst.doc_type.clone(),
                });
                continue;
            };
            for (p, v) in &inst.selections {
                match resolve_unit(g, p) {
                    Err(_) => findings.push(Finding::UnknownUnit {
                        instance: inst.id.clone(),
                        path: p.clone(),
                    }),
                    Ok(u) if u.version(*v).is_none() => findings.push(Finding::BadVersion {
                        instance: inst.id.clone(),
                        path: p.clone(),
                        version: *v,
                    }),
                    Ok(_) => {}
                }
            }
        }

        let meta = self.read_meta()?;
        for (prefix, h) in highest {
            let counter = meta.counters.get(&prefix).copied().unwrap_or(0);
            if counter < h {
                findings.push(Finding::CounterBehind {
                    prefix,
                    counter,
                    highest: h,
                });
            }
        }
        Ok(IntegrityReport { findings })
    }
}

pub(crate) fn summary(inst: &DocumentInstance, category: String) -> InstanceSummary {
    InstanceSummary {
        id: inst.id.clone(),
        display_name: inst.display_name.clone(),
        doc_type: inst.doc_type.clone(),
        category,
        parties: inst.parties.clone(),
        date: inst.date,
        status: inst.status,
    }
}

/// Date ascending (undated last), then id with numeric suffixes compared
/// numerically.
pub(crate) fn sort_summaries(v: &mut [InstanceSummary]) {
    v.sort_by(|a, b| {
        let date = match (a.date, b.date) {
            (Some(x), Some(y)) => x.cmp(&y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        };
        date.then_with(|| id_key(&a.id).cmp(&id_key(&b.id)))
    });
}

fn id_key(id: &str) -> (String, u64, String) {
    match split_id(id) {
        Some((p, n)) => (p.to_string(), n, String::new()),
        None => (id.to_string(), 0, id.to_string()),
    }
}

fn split_id(id: &str) -> Option<(&str, u64)> {
    let digits = id.trim_start_matches(|c: char| c.is_ascii_uppercase());
    let prefix = &id[..id.len() - digits.len()];
    if prefix.is_empty() || digits.is_empty() {
        return None;
    }
    digits.parse().ok().map(|n| (prefix, n))
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = match fs::read_dir(dir) {
        Ok(rd) => rd,
        Err(e) if e.kind() == ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(dir, e)),
    };
    let mut out = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        if name.to_string_lossy().starts_with('.') {
            continue;
        }
        out.push(entry.path());
    }
    out.sort();
    Ok(out)
}
