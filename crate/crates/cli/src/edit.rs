//! `draft edit` operations, one per [`Edit`] variant.

use std::collections::BTreeSet;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Subcommand, ValueEnum};
use draftsman_core::model::{BindingScope, Party, Tag, TagKind};
use draftsman_core::{Edit, ParamKind, SessionStage, UnitPath, Value};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Kind {
    String,
    Integer,
    Date,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Stage {
    Meta,
    Compulsory,
    Optional,
    Review,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
pub enum EditOp {
    /// Include an optional unit.
    Include { path: String },
    Exclude { path: String },
    /// Select a text version of an atomic unit.
    Choose { path: String, version: u32 },
    Parties {
        #[arg(long)]
        p1_name: String,
        #[arg(long, default_value = "")]
        p1_address: String,
        #[arg(long)]
        p2_name: String,
        #[arg(long, default_value = "")]
        p2_address: String,
    },
    /// YYYY-MM-DD, or `none` to clear.
    Date { date: String },
    /// Bind a parameter. Without --kind, integers and YYYY-MM-DD dates are
    /// recognised and anything else is a string.
    Param {
        name: String,
        value: String,
        /// Bind on this unit instead of the whole document.
        #[arg(long)]
        unit: Option<String>,
        #[arg(long, value_enum)]
        kind: Option<Kind>,
    },
    /// Add a new text version to an atomic unit of the generic.
    NewVersion {
        path: String,
        #[arg(long, conflicts_with = "file", required_unless_present = "file")]
        text: Option<String>,
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long, default_value = "")]
        commentary: String,
        #[arg(long, default_value = "")]
        author: String,
    },
    /// Order the children of `--parent` (top-level parts when omitted).
    Reorder {
        #[arg(long)]
        parent: Option<String>,
        #[arg(required = true)]
        labels: Vec<String>,
    },
    Keywords { path: String, keywords: Vec<String> },
    /// Tags as `duty:1:label` or `right:2:label`.
    Tags { path: String, tags: Vec<String> },
    Notes { text: String },
    Autocheck {
        #[arg(value_enum)]
        state: Switch,
    },
    /// Set the display name.
    Name { name: String },
    Stage {
        #[arg(value_enum)]
        stage: Stage,
    },
    /// Any edit as JSON, e.g. '{"op":"set_notes","text":"..."}'.
    Raw {
        #[arg(value_name = "JSON")]
        edit: String,
    },
}

fn unit(s: &str) -> Result<UnitPath, String> {
    s.parse::<UnitPath>().map_err(|e| e.to_string())
}

fn date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| format!("'{s}' is not a YYYY-MM-DD date"))
}

fn infer(text: &str) -> Value {
    if let Ok(i) = text.parse::<i64>() {
        Value::Integer(i)
    } else if let Ok(d) = date(text) {
        Value::Date(d)
    } else {
        Value::String(text.to_string())
    }
}

fn tag(s: &str) -> Result<Tag, String> {
    let mut it = s.splitn(3, ':');
    let kind = it.next().unwrap_or_default().parse::<TagKind>().map_err(|e| e.to_string())?;
    let party = match it.next() {
        Some("1") => 1,
        Some("2") => 2,
        _ => return Err(format!("tag '{s}' needs a party 1 or 2")),
    };
    let label = it.next().unwrap_or_default().to_string();
    Ok(Tag { kind, party, label })
}

impl EditOp {
    pub fn into_edit(self) -> Result<Edit, String> {
        Ok(match self {
            EditOp::Include { path } => Edit::IncludeUnit { path: unit(&path)? },
            EditOp::Exclude { path } => Edit::ExcludeUnit { path: unit(&path)? },
            EditOp::Choose { path, version } => Edit::ChooseVersion { path: unit(&path)?, version },
            EditOp::Parties { p1_name, p1_address, p2_name, p2_address } => Edit::SetParties {
                p1: Party::new(&p1_name, &p1_address),
                p2: Party::new(&p2_name, &p2_address),
            },
            EditOp::Date { date: d } if d == "none" => Edit::SetDate { date: None },
            EditOp::Date { date: d } => Edit::SetDate { date: Some(date(&d)?) },
            EditOp::Param { name, value, unit: u, kind } => {
                let scope = match u {
                    Some(p) => BindingScope::Unit(unit(&p)?),
                    None => BindingScope::Document,
                };
                let value = match kind {
                    None => infer(&value),
                    Some(k) => {
                        let k = match k {
                            Kind::String => ParamKind::String,
                            Kind::Integer => ParamKind::Integer,
                            Kind::Date => ParamKind::Date,
                        };
                        Value::parse_as(k, &value)?
                    }
                };
                Edit::SetParam { scope, name, value }
            }
            EditOp::NewVersion { path, text, file, commentary, author } => {
                let text = match (text, file) {
                    (Some(t), _) => t,
                    (None, Some(f)) => {
                        std::fs::read_to_string(&f).map_err(|e| format!("{}: {e}", f.display()))?
                    }
                    (None, None) => return Err("--text or --file is required".into()),
                };
                Edit::CreateVersion { path: unit(&path)?, text, params: Vec::new(), commentary, author }
            }
            EditOp::Reorder { parent, labels } => Edit::Reorder {
                parent: parent.as_deref().map(unit).transpose()?,
                order: labels,
            },
            EditOp::Keywords { path, keywords } => Edit::SetKeywords {
                path: unit(&path)?,
                keywords: keywords.into_iter().collect(),
            },
            EditOp::Tags { path, tags } => Edit::SetTags {
                path: unit(&path)?,
                tags: tags.iter().map(|t| tag(t)).collect::<Result<BTreeSet<_>, _>>()?,
            },
            EditOp::Notes { text } => Edit::SetNotes { text },
            EditOp::Autocheck { state } => Edit::ToggleAutocheck { on: matches!(state, Switch::On) },
            EditOp::Name { name } => Edit::SetDisplayName { name },
            EditOp::Stage { stage } => Edit::SetStage {
                stage: match stage {
                    Stage::Meta => SessionStage::Meta,
                    Stage::Compulsory => SessionStage::Compulsory,
                    Stage::Optional => SessionStage::Optional,
                    Stage::Review => SessionStage::Review,
                },
            },
            EditOp::Raw { edit } => serde_json::from_str(&edit).map_err(|e| format!("not an edit: {e}"))?,
        })
    }
}
