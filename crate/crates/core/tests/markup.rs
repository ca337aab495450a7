//! Markup export checked with an XML parser, and the plain render checked
//! against the unit tree.

use draftsman_core::fixtures::{self, path};
use draftsman_core::model::{effective_bindings, resolve_unit, BindingScope, DocumentInstance, GenericDocument, Party, UnitPath};
use draftsman_core::{export_markup, render_document, substitute, Value};

fn corpus() -> Vec<(GenericDocument, DocumentInstance)> {
    let g = fixtures::mf2();
    let mut out: Vec<_> = fixtures::instances(&g, ["R1", "R2", "R3"])
        .unwrap()
        .into_iter()
        .map(|i| (g.clone(), i))
        .collect();

    let mut q = DocumentInstance::new_draft(&g, "Q1");
    q.display_name = "Draft & <Test> \"Plant\"".into();
    q.parties = [Party::new("A & B Ltd", "UK"), Party::new("C", "UK")];
    q.set_binding(BindingScope::Document, "Engineer", Value::String("O'Neill".into()));
    q.include_unit(&g, &path("Assignment and Sub-Contracting")).unwrap();
    q.include_unit(&g, &path("Insurance")).unwrap();
    q.order_overrides.push(draftsman_core::model::OrderOverride {
        parent: Some(path("Time for Completion")),
        order: vec![
            "Rate of Progress".into(),
            "Delays by Sub-Contractors".into(),
            "Extension of Time for Completion".into(),
        ],
    });
    out.push((g.clone(), q));

    let e = fixtures::encodings();
    let mut i = DocumentInstance::new_draft(&e, "E1");
    i.parties = [Party::new("A", "UK"), Party::new("B", "UK")];
    out.push((e, i));
    out
}

fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

#[test]
fn markup_is_well_formed() {
    for (g, inst) in corpus() {
        let xml = export_markup(&g, &inst).unwrap();
        let doc = roxmltree::Document::parse(&xml).unwrap_or_else(|e| panic!("{}: {e}", inst.id));
        let root = doc.root_element();
        assert_eq!(root.tag_name().name(), "document");
        assert_eq!(root.attribute("name"), Some(inst.display_name.as_str()));
        assert_eq!(root.attribute("type"), Some(g.doc_type.as_str()));
        assert_eq!(export_markup(&g, &inst).unwrap(), xml);
    }
}

#[test]
fn markup_text_matches_plain_render() {
    for (g, inst) in corpus() {
        let plain = render_document(&g, &inst).unwrap().text;
        let xml = export_markup(&g, &inst).unwrap();
        let doc = roxmltree::Document::parse(&xml).unwrap();
        let mut text = String::new();
        for n in doc.descendants().filter(|n| n.is_text()) {
            text.push_str(n.text().unwrap());
            text.push(' ');
        }
        assert_eq!(words(&text), words(&plain), "{}", inst.id);
    }
}

#[test]
fn refers_becomes_a_link() {
    let g = fixtures::mf2();
    let inst = fixtures::instances(&g, ["R1", "R2", "R3"]).unwrap().remove(1);
    let xml = export_markup(&g, &inst).unwrap();
    let doc = roxmltree::Document::parse(&xml).unwrap();
    let unit = |label: &str| {
        doc.descendants()
            .find(|n| n.has_tag_name("unit") && n.attribute("label") == Some(label))
            .unwrap()
    };
    let rate = unit("Rate of Progress");
    let links: Vec<_> = rate.children().filter(|n| n.has_tag_name("link")).collect();
    assert_eq!(links.len(), 1);
    assert_eq!(links[0].attribute("to"), unit("Extension of Time for Completion").attribute("number"));
    assert_eq!(links[0].attribute("path"), Some("Time for Completion/Extension of Time for Completion"));
    // Nothing else links.
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("link")).count(), 1);
}

/// Included units in effective order, numbered from the tree by hand.
fn expected_numbering(g: &GenericDocument, inst: &DocumentInstance) -> Vec<(String, UnitPath)> {
    fn walk(
        inst: &DocumentInstance,
        parent: Option<&UnitPath>,
        children: &[draftsman_core::model::UnitTemplate],
        prefix: &str,
        out: &mut Vec<(String, UnitPath)>,
    ) {
        let mut k = 0;
        for c in inst.children_in_order(parent, children) {
            let p = match parent {
                Some(pp) => pp.child(&c.label),
                None => UnitPath::new([c.label.clone()]).unwrap(),
            };
            if !inst.is_included(&p) {
                continue;
            }
            k += 1;
            let number = if prefix.is_empty() { k.to_string() } else { format!("{prefix}-{k}") };
            out.push((number.clone(), p.clone()));
            walk(inst, Some(&p), &c.children, &number, out);
        }
    }
    let mut out = Vec::new();
    walk(inst, None, &g.parts, "", &mut out);
    out
}

#[test]
fn toc_follows_tree_and_bodies_appear_in_order() {
    for (g, inst) in corpus() {
        let r = render_document(&g, &inst).unwrap();
        let toc: Vec<(String, UnitPath)> = r.toc.iter().map(|e| (e.number.clone(), e.path.clone())).collect();
        assert_eq!(toc, expected_numbering(&g, &inst), "{}", inst.id);

        let mut at = 0;
        let mut bodies = Vec::new();
        for e in &r.toc {
            let unit = resolve_unit(&g, &e.path).unwrap();
            if !unit.is_atomic() {
                continue;
            }
            let v = inst.selections[&e.path];
            let frag = g.fragment_text(&unit.version(v).unwrap().fragment).unwrap();
            let body = substitute(frag, &effective_bindings(&g, &inst, &e.path, v)).unwrap();
            let found = r.text[at..].find(&body).unwrap_or_else(|| panic!("{} missing or out of order", e.path));
            at += found + body.len();
            bodies.push(body);
        }
        // Each selected body once; identical bodies appear once per unit.
        for b in &bodies {
            let units = bodies.iter().filter(|x| *x == b).count();
            assert_eq!(r.text.matches(b.as_str()).count(), units, "{}: {b}", inst.id);
        }
    }
}

#[test]
fn order_override_renumbers_markup() {
    let (g, q) = corpus().remove(3);
    let xml = export_markup(&g, &q).unwrap();
    let doc = roxmltree::Document::parse(&xml).unwrap();
    let rate = doc
        .descendants()
        .find(|n| n.attribute("label") == Some("Rate of Progress"))
        .unwrap();
    let part = rate.parent().unwrap();
    assert_eq!(part.attribute("label"), Some("Time for Completion"));
    assert_eq!(rate.attribute("number"), Some(format!("{}-1", part.attribute("number").unwrap()).as_str()));
}
