//! Retrieval over the instance database.
//!
//! Filters are conjunctive. The surface syntax is a flat list of key/value
//! pairs shared by the CLI flags and the HTTP query string:
//! `doc_type, category, on, before, after, party_name, party_address, party,
//! keyword, contains, tag`. `keyword` and `contains` may repeat.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DocumentInstance, TagKind, UnitPath};
use crate::render::{render_document, RenderedDocument};
use crate::store::{sort_summaries, summary, InstanceSummary, Store};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DateRel {
    On,
    Before,
    After,
}

/// A calendar day or a whole month, as typed by the user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DateSpec {
    Day(NaiveDate),
    Month { year: i32, month: u32 },
}

impl DateSpec {
    pub fn parse(s: &str) -> Result<DateSpec> {
        let s = s.trim();
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Ok(DateSpec::Day(d));
        }
        let bad = || Error::BadFilter(format!("'{s}' is not a date (YYYY-MM-DD or YYYY-MM)"));
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        if !(1..=12).contains(&month) {
            return Err(bad());
        }
        Ok(DateSpec::Month { year, month })
    }

    fn first(&self) -> NaiveDate {
        match *self {
            DateSpec::Day(d) => d,
            DateSpec::Month { year, month } => NaiveDate::from_ymd_opt(year, month, 1).unwrap(),
        }
    }

    fn last(&self) -> NaiveDate {
        match *self {
            DateSpec::Day(d) => d,
            DateSpec::Month { year, month } => {
                let (ny, nm) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
                NaiveDate::from_ymd_opt(ny, nm, 1).unwrap().pred_opt().unwrap()
            }
        }
    }

    fn text(&self) -> String {
        match *self {
            DateSpec::Day(d) => d.to_string(),
            DateSpec::Month { year, month } => format!("{year:04}-{month:02}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagFilter {
    pub kind: TagKind,
    pub party: Option<u8>,
    pub label: Option<String>,
}

impl TagFilter {
    /// `kind[:party|*[:label]]`, e.g. `duty:2`, `right:*:payment`.
    pub fn parse(s: &str) -> Result<TagFilter> {
        let mut it = s.splitn(3, ':');
        let kind = it
            .next()
            .unwrap_or_default()
            .parse::<TagKind>()
            .map_err(|e| Error::BadFilter(e.to_string()))?;
        let party = match it.next() {
            None | Some("*") | Some("") => None,
            Some(p) => Some(parse_party(p)?),
        };
        let label = it.next().filter(|l| !l.is_empty() && *l != "*").map(str::to_string);
        Ok(TagFilter { kind, party, label })
    }

    fn text(&self) -> String {
        let party = self.party.map_or("*".to_string(), |p| p.to_string());
        match &self.label {
            Some(l) => format!("{}:{party}:{l}", self.kind),
            None if self.party.is_some() => format!("{}:{party}", self.kind),
            None => self.kind.to_string(),
        }
    }
}

fn once<T>(slot: &Option<T>, key: &str) -> Result<()> {
    match slot {
        Some(_) => Err(Error::BadFilter(format!("'{key}' given more than once"))),
        None => Ok(()),
    }
}

fn parse_party(s: &str) -> Result<u8> {
    match s.trim() {
        "1" => Ok(1),
        "2" => Ok(2),
        other => Err(Error::BadFilter(format!("party must be 1 or 2, not '{other}'"))),
    }
}

/// Parses `Path@N`, e.g. `Certificates and Payment/Payment Terms@3`.
pub fn parse_contains(s: &str) -> Result<(UnitPath, u32)> {
    let (p, n) = s
        .rsplit_once('@')
        .ok_or_else(|| Error::BadFilter(format!("'{s}' must have the form Path@N")))?;
    let path = UnitPath::parse(p).map_err(|e| Error::BadFilter(e.to_string()))?;
    let n: u32 = n
        .trim()
        .parse()
        .map_err(|_| Error::BadFilter(format!("'{n}' is not a version number")))?;
    Ok((path, n))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date_rel: Option<(DateRel, DateSpec)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub party_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub party_address: Option<String>,
    /// Pins `party_name` and `party_address` to party 1 or 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub party: Option<u8>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keywords: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains_version: Vec<(UnitPath, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<TagFilter>,
}

impl QueryFilter {
    pub fn is_empty(&self) -> bool {
        *self == QueryFilter::default()
    }

    /// Builds a filter from surface key/value pairs. Unknown keys and
    /// malformed values are `BadFilter`.
    pub fn from_params<K, V>(params: impl IntoIterator<Item = (K, V)>) -> Result<QueryFilter>
    where
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut f = QueryFilter::default();
        for (k, v) in params {
            let (k, v) = (k.as_ref(), v.as_ref());
            match k {
                "doc_type" => {
                    once(&f.doc_type, k)?;
                    f.doc_type = Some(v.to_string());
                }
                "category" => {
                    once(&f.category, k)?;
                    f.category = Some(v.to_string());
                }
                "on" | "before" | "after" => {
                    once(&f.date_rel, k)?;
                    let rel = match k {
                        "on" => DateRel::On,
                        "before" => DateRel::Before,
                        _ => DateRel::After,
                    };
                    f.date_rel = Some((rel, DateSpec::parse(v)?));
                }
                "party_name" => {
                    once(&f.party_name, k)?;
                    f.party_name = Some(v.to_string());
                }
                "party_address" => {
                    once(&f.party_address, k)?;
                    f.party_address = Some(v.to_string());
                }
                "party" => {
                    once(&f.party, k)?;
                    f.party = Some(parse_party(v)?);
                }
                "keyword" => f.keywords.push(v.to_string()),
                "contains" => f.contains_version.push(parse_contains(v)?),
                "tag" => {
                    once(&f.tag, k)?;
                    f.tag = Some(TagFilter::parse(v)?);
                }
                other => return Err(Error::BadFilter(format!("unknown filter key '{other}'"))),
            }
        }
        Ok(f)
    }

    /// Inverse of [`QueryFilter::from_params`].
    pub fn to_params(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        if let Some(t) = &self.doc_type {
            push("doc_type", t.clone());
        }
        if let Some(c) = &self.category {
            push("category", c.clone());
        }
        if let Some((rel, d)) = &self.date_rel {
            let k = match rel {
                DateRel::On => "on",
                DateRel::Before => "before",
                DateRel::After => "after",
            };
            push(k, d.text());
        }
        if let Some(n) = &self.party_name {
            push("party_name", n.clone());
        }
        if let Some(a) = &self.party_address {
            push("party_address", a.clone());
        }
        if let Some(p) = self.party {
            push("party", p.to_string());
        }
        for k in &self.keywords {
            push("keyword", k.clone());
        }
        for (p, n) in &self.contains_version {
            push("contains", format!("{p}@{n}"));
        }
        if let Some(t) = &self.tag {
            push("tag", t.text());
        }
        out
    }

    /// Whether one instance satisfies every present criterion. `category` is
    /// the category of the instance's generic.
    pub fn matches(&self, inst: &DocumentInstance, category: &str) -> bool {
        if self.doc_type.as_ref().is_some_and(|t| *t != inst.doc_type) {
            return false;
        }
        if self.category.as_ref().is_some_and(|c| !c.eq_ignore_ascii_case(category)) {
            return false;
        }
        if let Some((rel, spec)) = &self.date_rel {
            let Some(d) = inst.date else { return false };
            let ok = match rel {
                DateRel::Before => d < spec.first(),
                DateRel::After => d > spec.last(),
                DateRel::On => spec.first() <= d && d <= spec.last(),
            };
            if !ok {
                return false;
            }
        }
        let parties: Vec<_> = match self.party {
            Some(i) => vec![&inst.parties[usize::from(i) - 1]],
            None => inst.parties.iter().collect(),
        };
        if self.party_name.is_some() || self.party_address.is_some() {
            let hit = parties.iter().any(|p| {
                self.party_name.as_ref().is_none_or(|n| contains_ci(&p.name, n))
                    && self.party_address.as_ref().is_none_or(|a| contains_ci(&p.address, a))
            });
            if !hit {
                return false;
            }
        }
        if !self.keywords.is_empty() {
            let have: Vec<String> = inst.all_keywords().iter().map(|k| k.to_lowercase()).collect();
            if !self.keywords.iter().all(|k| have.contains(&k.to_lowercase())) {
                return false;
            }
        }
        if !self
            .contains_version
            .iter()
            .all(|(p, n)| inst.selections.get(p) == Some(n))
        {
            return false;
        }
        if let Some(t) = &self.tag {
            let hit = inst.tags.values().flatten().any(|tag| {
                tag.kind == t.kind
                    && t.party.is_none_or(|p| p == tag.party)
                    && t.label.as_ref().is_none_or(|l| tag.label.eq_ignore_ascii_case(l))
            });
            if !hit {
                return false;
            }
        }
        true
    }
}

fn contains_ci(hay: &str, needle: &str) -> bool {
    hay.to_lowercase().contains(&needle.to_lowercase())
}

/// Filters a set of instances. `category_of` maps a doc_type to its category.
pub fn filter_instances<'a>(
    instances: impl IntoIterator<Item = &'a DocumentInstance>,
    category_of: &BTreeMap<String, String>,
    f: &QueryFilter,
) -> Vec<InstanceSummary> {
    let mut out: Vec<InstanceSummary> = instances
        .into_iter()
        .filter_map(|inst| {
            let cat = category_of.get(&inst.doc_type).cloned().unwrap_or_default();
            f.matches(inst, &cat).then(|| summary(inst, cat))
        })
        .collect();
    sort_summaries(&mut out);
    out
}

/// Matching instance summaries ordered by date, then id.
pub fn run_query(store: &Store, f: &QueryFilter) -> Result<Vec<InstanceSummary>> {
    let instances = store.all_instances()?;
    let category_of: BTreeMap<String, String> = store
        .list_generics()?
        .into_iter()
        .map(|g| (g.doc_type, g.category))
        .collect();
    Ok(filter_instances(&instances, &category_of, f))
}

/// Full text of a stored instance.
pub fn expand(store: &Store, id: &str) -> Result<RenderedDocument> {
    let inst = store.get_instance(id)?;
    let g = store.get_generic(&inst.doc_type)?;
    render_document(&g, &inst)
}
