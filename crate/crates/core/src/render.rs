//! Reconstruction of full document text from a skeletal instance.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::condexpr::Env;
use crate::constraints::Constraint;
use crate::error::{Error, Result, UnboundAt};
use crate::model::{effective_bindings, DocumentInstance, GenericDocument, UnitPath, UnitTemplate};
use crate::value::{format_long_date, is_ident_char, is_ident_start};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TocEntry {
    pub number: String,
    pub path: UnitPath,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedDocument {
    pub text: String,
    pub toc: Vec<TocEntry>,
    pub warnings: Vec<String>,
}

/// Replaces `$name` placeholders in a single pass; `$$` yields `$`.
///
/// Identifiers are matched greedily; when the longest match is not bound,
/// shorter prefixes ending before a `.` or `-` are tried so that a
/// placeholder at the end of a sentence still resolves.
pub fn substitute(fragment: &str, env: &Env) -> Result<String> {
    let mut out = String::with_capacity(fragment.len());
    let mut unbound = BTreeSet::new();
    let mut rest = fragment;
    while let Some(i) = rest.find('$') {
        out.push_str(&rest[..i]);
        rest = &rest[i + 1..];
        if let Some(r) = rest.strip_prefix('$') {
            out.push('$');
            rest = r;
            continue;
        }
        if !rest.starts_with(is_ident_start) {
            out.push('$');
            continue;
        }
        let len = rest.find(|c: char| !is_ident_char(c)).unwrap_or(rest.len());
        let ident = &rest[..len];
        let mut cut = len;
        let hit = loop {
            if let Some(v) = env.get(&ident[..cut]) {
                break Some(v);
            }
            match ident[..cut].rfind(['.', '-']) {
                Some(j) if j > 0 => cut = j,
                _ => break None,
            }
        };
        match hit {
            Some(v) => {
                out.push_str(&v.to_document_text());
                rest = &rest[cut..];
            }
            None => {
                unbound.insert(ident.trim_end_matches(['.', '-']).to_string());
                rest = &rest[len..];
            }
        }
    }
    out.push_str(rest);
    if unbound.is_empty() {
        Ok(out)
    } else {
        Err(Error::UnboundPlaceholder(vec![UnboundAt {
            path: None,
            names: unbound.into_iter().collect(),
        }]))
    }
}

/// One visible unit in effective order.
enum Block<'g> {
    Part {
        number: String,
        path: UnitPath,
        unit: &'g UnitTemplate,
    },
    Unit {
        number: String,
        path: UnitPath,
        unit: &'g UnitTemplate,
    },
    End,
}

struct Layout<'g> {
    blocks: Vec<Block<'g>>,
    /// Substituted text per atomic path.
    texts: Vec<(UnitPath, u32, String)>,
    warnings: Vec<String>,
}

fn layout<'g>(g: &'g GenericDocument, inst: &DocumentInstance) -> Result<Layout<'g>> {
    fn go<'g>(
        g: &'g GenericDocument,
        inst: &DocumentInstance,
        parent: Option<&UnitPath>,
        prefix: &str,
        children: &'g [UnitTemplate],
        out: &mut Layout<'g>,
        unbound: &mut Vec<UnboundAt>,
    ) -> Result<()> {
        let visible = inst
            .children_in_order(parent, children)
            .into_iter()
            .filter(|u| {
                let p = match parent {
                    Some(pp) => pp.child(&u.label),
                    None => UnitPath::new([u.label.as_str()]).expect("validated label"),
                };
                inst.is_included(&p)
            });
        for (i, unit) in visible.enumerate() {
            let path = match parent {
                Some(pp) => pp.child(&unit.label),
                None => UnitPath::new([unit.label.as_str()]).expect("validated label"),
            };
            let number = if prefix.is_empty() {
                (i + 1).to_string()
            } else {
                format!("{prefix}-{}", i + 1)
            };
            out.blocks.push(if parent.is_none() {
                Block::Part {
                    number: number.clone(),
                    path: path.clone(),
                    unit,
                }
            } else {
                Block::Unit {
                    number: number.clone(),
                    path: path.clone(),
                    unit,
                }
            });
            if unit.is_atomic() {
                let v = inst.selections[&path];
                let Some(version) = unit.version(v) else {
                    return Err(Error::Invalid(format!(
                        "'{path}' selects version {v}, which does not exist"
                    )));
                };
                let text = g.fragment_text(&version.fragment)?;
                let env = effective_bindings(g, inst, &path, v);
                match substitute(text, &env) {
                    Ok(t) => out.texts.push((path.clone(), v, t)),
                    Err(Error::UnboundPlaceholder(items)) => unbound.extend(items.into_iter().map(|u| UnboundAt {
                        path: Some(path.clone()),
                        names: u.names,
                    })),
                    Err(e) => return Err(e),
                }
            } else {
                go(g, inst, Some(&path), &number, &unit.children, out, unbound)?;
            }
            out.blocks.push(Block::End);
        }
        Ok(())
    }

    let mut out = Layout {
        blocks: Vec::new(),
        texts: Vec::new(),
        warnings: Vec::new(),
    };
    for p in inst.selections.keys() {
        if crate::model::resolve_unit(g, p).is_err() {
            out.warnings.push(format!("selection '{p}' does not exist in '{}'", g.doc_type));
        }
    }
    for p in &inst.included_optional {
        if !inst.is_included(p) {
            out.warnings.push(format!("'{p}' was opted into but has no selected content"));
        }
    }
    let mut unbound = Vec::new();
    go(g, inst, None, "", &g.parts, &mut out, &mut unbound)?;
    if !unbound.is_empty() {
        return Err(Error::UnboundPlaceholder(unbound));
    }
    Ok(out)
}

fn title_lines(g: &GenericDocument, inst: &DocumentInstance) -> Vec<String> {
    let [p1, p2] = &inst.parties;
    let party = |p: &crate::model::Party| {
        if p.address.is_empty() {
            p.name.clone()
        } else {
            format!("{} of {}", p.name, p.address)
        }
    };
    vec![
        g.doc_type.clone(),
        inst.display_name.clone(),
        format!("Between {}", party(p1)),
        format!("and {}", party(p2)),
        match inst.date {
            Some(d) => format!("Dated {}", format_long_date(d)),
            None => "Undated".to_string(),
        },
    ]
}

fn part_heading(number: &str, label: &str) -> String {
    format!("PART {number}: {label}")
}

fn unit_heading(number: &str, label: &str) -> String {
    format!("{number} {label}")
}

pub fn render_document(g: &GenericDocument, inst: &DocumentInstance) -> Result<RenderedDocument> {
    let lay = layout(g, inst)?;
    let title = title_lines(g, inst);
    let mut text = format!("{}\n{}\n\n{}\n{}\n{}\n", title[0], title[1], title[2], title[3], title[4]);
    let mut toc = Vec::new();
    let mut texts = lay.texts.iter();
    for b in &lay.blocks {
        let (heading, number, path, unit) = match b {
            Block::Part { number, path, unit } => (part_heading(number, &unit.label), number, path, unit),
            Block::Unit { number, path, unit } => (unit_heading(number, &unit.label), number, path, unit),
            Block::End => continue,
        };
        text.push_str(if matches!(b, Block::Part { .. }) { "\n\n" } else { "\n" });
        text.push_str(&heading);
        text.push('\n');
        toc.push(TocEntry {
            number: number.clone(),
            path: path.clone(),
            label: unit.label.clone(),
        });
        if unit.is_atomic() {
            let (_, _, body) = texts.next().expect("one text per atomic block");
            text.push('\n');
            text.push_str(body.trim_end_matches('\n'));
            text.push('\n');
        }
    }
    Ok(RenderedDocument {
        text,
        toc,
        warnings: lay.warnings,
    })
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Nested-tag export: document > part > unit, with link elements for
/// cross-references between included units.
pub fn export_markup(g: &GenericDocument, inst: &DocumentInstance) -> Result<String> {
    let lay = layout(g, inst)?;
    let numbers: std::collections::BTreeMap<&UnitPath, &str> = lay
        .blocks
        .iter()
        .filter_map(|b| match b {
            Block::Part { number, path, .. } | Block::Unit { number, path, .. } => Some((path, number.as_str())),
            Block::End => None,
        })
        .collect();

    let mut out = String::new();
    out.push_str(&format!(
        "<document type=\"{}\" id=\"{}\" name=\"{}\"",
        escape(&g.doc_type),
        escape(&inst.id),
        escape(&inst.display_name)
    ));
    if let Some(d) = inst.date {
        out.push_str(&format!(" date=\"{}\"", d.format("%Y-%m-%d")));
    }
    out.push_str(">\n");
    out.push_str("<title>\n");
    for line in title_lines(g, inst) {
        out.push_str(&escape(&line));
        out.push('\n');
    }
    out.push_str("</title>\n");

    let mut texts = lay.texts.iter();
    let mut stack: Vec<&str> = Vec::new();
    for b in &lay.blocks {
        let (tag, number, path, unit, heading) = match b {
            Block::Part { number, path, unit } => ("part", number, path, unit, part_heading(number, &unit.label)),
            Block::Unit { number, path, unit } => ("unit", number, path, unit, unit_heading(number, &unit.label)),
            Block::End => {
                let tag = stack.pop().expect("balanced blocks");
                out.push_str(&format!("</{tag}>\n"));
                continue;
            }
        };
        stack.push(tag);
        out.push_str(&format!(
            "<{tag} number=\"{number}\" label=\"{}\"",
            escape(&unit.label)
        ));
        if let Some(v) = inst.selections.get(path) {
            out.push_str(&format!(" version=\"{v}\""));
        }
        if let Some(kw) = inst.keywords.get(path).filter(|k| !k.is_empty()) {
            let joined: Vec<_> = kw.iter().map(String::as_str).collect();
            out.push_str(&format!(" keywords=\"{}\"", escape(&joined.join(";"))));
        }
        if let Some(tags) = inst.tags.get(path).filter(|t| !t.is_empty()) {
            let joined: Vec<_> = tags
                .iter()
                .map(|t| format!("{}:{}:{}", t.kind, t.party, t.label))
                .collect();
            out.push_str(&format!(" tags=\"{}\"", escape(&joined.join(";"))));
        }
        out.push_str(">\n");
        out.push_str(&format!("<heading>{}</heading>\n", escape(&heading)));
        for c in &g.constraints {
            if let Constraint::Refers { from, to } = c {
                if from == path {
                    if let Some(target) = numbers.get(to) {
                        out.push_str(&format!(
                            "<link to=\"{target}\" path=\"{}\"/>\n",
                            escape(&to.to_string())
                        ));
                    }
                }
            }
        }
        if unit.is_atomic() {
            let (_, _, body) = texts.next().expect("one text per atomic block");
            out.push_str(&format!("<text>{}</text>\n", escape(body.trim_end_matches('\n'))));
        }
    }
    out.push_str("</document>\n");
    Ok(out)
}
