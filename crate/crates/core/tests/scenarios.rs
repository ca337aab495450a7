//! MF/2 fixture fidelity, the constraint scenarios, and rendering.

use chrono::NaiveDate;
use draftsman_core::assembly::{Edit, Session};
use draftsman_core::constraints::{check, suggest_remedies, RemedyAction, Stage, Subject, Violation, ViolationKind};
use draftsman_core::fixtures::{self, path};
use draftsman_core::model::{validate_generic, BindingScope, DocumentInstance, GenericDocument, Inclusion, Party};
use draftsman_core::{render_document, Value};

const BRACKETED: [&str; 10] = [
    "Assignment and Sub-Contracting",
    "Precedence of Documents",
    "Changes in Costs",
    "Variations",
    "Defects Liability",
    "Taking Over",
    "Performance Tests",
    "Accidents and Damage",
    "Insurance",
    "Disputes and Arbitration",
];

const UNBRACKETED: [&str; 10] = [
    "Definitions and Interpretations",
    "Engineer and Engineer's Representative",
    "Basis of Tender and Contract Price",
    "Purchaser's General Obligations",
    "Contractor's Obligations",
    "Suspension of Work, Delivery or Erection",
    "Tests on Completion",
    "Certificates and Payment",
    "Force Majeure",
    "Time for Completion",
];

fn session() -> (GenericDocument, Session) {
    let g = fixtures::mf2();
    let s = Session::new(&g, "s1", "Q1");
    (g, s)
}

fn kinds_and_units(vs: &[Violation]) -> Vec<(ViolationKind, Vec<String>, bool)> {
    vs.iter()
        .map(|v| {
            let subjects = v
                .subjects
                .iter()
                .map(|s| match s {
                    Subject::Unit(p) => p.last().to_string(),
                    Subject::Param(n) => format!("${n}"),
                })
                .collect();
            (v.kind, subjects, v.pending)
        })
        .collect()
}

fn apply_first_remedy(g: &GenericDocument, s: &mut Session, v: &Violation) {
    let remedies = suggest_remedies(v, g, &s.draft);
    let first = remedies.first().expect("a remedy is offered");
    let edit = match &first.action {
        RemedyAction::Include(p) => Edit::IncludeUnit { path: p.clone() },
        RemedyAction::Exclude(p) => Edit::ExcludeUnit { path: p.clone() },
        RemedyAction::SetParameter(n) => panic!("unexpected parameter remedy for {n}"),
    };
    let mut g2 = g.clone();
    s.edit(&mut g2, edit).unwrap();
}

#[test]
fn parts_list_matches_model_form() {
    let g = fixtures::mf2();
    assert!(validate_generic(&g).is_clean());
    assert_eq!(g.parts.len(), 20);
    for label in BRACKETED {
        let p = g.parts.iter().find(|p| p.label == label).unwrap();
        assert_eq!(p.inclusion, Inclusion::Optional, "{label}");
    }
    for label in UNBRACKETED {
        let p = g.parts.iter().find(|p| p.label == label).unwrap();
        assert_eq!(p.inclusion, Inclusion::Compulsory, "{label}");
    }
    let time = g.parts.iter().find(|p| p.label == "Time for Completion").unwrap();
    let ext = time.child("Extension of Time for Completion").unwrap();
    assert_eq!(ext.order, 1);
    assert_eq!(ext.versions.len(), 2);
    assert_eq!(time.child("Delays by Sub-Contractors").unwrap().order, 2);
    assert_eq!(g.params[0].name, "Engineer");
}

#[test]
fn new_session_holds_exactly_the_compulsory_parts() {
    let (_, s) = session();
    for label in UNBRACKETED {
        assert!(s.draft.is_included(&path(label)), "{label}");
    }
    for label in BRACKETED {
        assert!(!s.draft.is_included(&path(label)), "{label}");
    }
    assert!(s.draft.selections.values().all(|v| *v == 1));
    assert!(!s.autocheck);
}

#[test]
fn sub_contracting_forces_liability() {
    let (mut g, mut s) = session();
    s.edit(&mut g, Edit::SetParties { p1: Party::new("A", "UK"), p2: Party::new("B", "UK") }).unwrap();
    s.edit(&mut g, Edit::ToggleAutocheck { on: true }).unwrap();
    let vs = s
        .edit(&mut g, Edit::IncludeUnit { path: path("Assignment and Sub-Contracting") })
        .unwrap();
    assert_eq!(
        kinds_and_units(&vs),
        [(ViolationKind::ForcesUnsatisfied, vec!["Sub-Contractors Liability".to_string()], false)]
    );
    apply_first_remedy(&g, &mut s, &vs[0]);
    assert!(check(&g, &s.draft, Stage::Interactive).unwrap().is_empty());
}

#[test]
fn address_outside_uk_forces_foreign_currency_payments() {
    let (mut g, mut s) = session();
    let vs = s
        .edit(&mut g, Edit::SetParties { p1: Party::new("A", "UK"), p2: Party::new("B", "France") })
        .unwrap();
    assert!(vs.is_empty(), "autocheck is off");
    let vs = check(&g, &s.draft, Stage::Interactive).unwrap();
    assert_eq!(
        kinds_and_units(&vs),
        [(ViolationKind::ForcesUnsatisfied, vec!["Foreign Currency Payments".to_string()], false)]
    );
    apply_first_remedy(&g, &mut s, &vs[0]);
    assert!(check(&g, &s.draft, Stage::Interactive).unwrap().is_empty());

    // A UK supplier does not need the part.
    let (mut g, mut s) = session();
    s.edit(&mut g, Edit::SetParties { p1: Party::new("A", "UK"), p2: Party::new("B", "UK") }).unwrap();
    assert!(check(&g, &s.draft, Stage::Interactive).unwrap().is_empty());
}

#[test]
fn unknown_address_is_pending() {
    let (g, s) = session();
    let vs = check(&g, &s.draft, Stage::Interactive).unwrap();
    assert!(!vs.is_empty());
    assert!(vs.iter().all(|v| v.pending));
    let fcp = vs
        .iter()
        .find(|v| v.kind == ViolationKind::ForcesUnsatisfied)
        .unwrap();
    let remedies = suggest_remedies(fcp, &g, &s.draft);
    assert!(remedies
        .iter()
        .any(|r| r.action == RemedyAction::SetParameter("Party2.Address".into())));
}

#[test]
fn identical_parties_violate_data_constraint() {
    let (mut g, mut s) = session();
    s.edit(&mut g, Edit::SetParties { p1: Party::new("Acme", "UK"), p2: Party::new("Acme", "UK") }).unwrap();
    let vs = check(&g, &s.draft, Stage::Interactive).unwrap();
    assert_eq!(
        kinds_and_units(&vs),
        [(
            ViolationKind::DataViolation,
            vec!["$Party1.Name".to_string(), "$Party2.Name".to_string()],
            false
        )]
    );
    let remedies = suggest_remedies(&vs[0], &g, &s.draft);
    assert!(remedies
        .iter()
        .any(|r| r.action == RemedyAction::SetParameter("Party2.Name".into())));
    s.edit(&mut g, Edit::SetParties { p1: Party::new("Acme", "UK"), p2: Party::new("Brill", "UK") }).unwrap();
    assert!(check(&g, &s.draft, Stage::Interactive).unwrap().is_empty());
}

#[test]
fn excluding_compulsory_part_is_rejected() {
    let (mut g, mut s) = session();
    let err = s
        .edit(&mut g, Edit::ExcludeUnit { path: path("Definitions and Interpretations") })
        .unwrap_err();
    assert!(matches!(err, draftsman_core::Error::EditRejected(_)));
}

#[test]
fn engineer_only_required_at_finalize() {
    let (mut g, mut s) = session();
    s.edit(&mut g, Edit::SetParties { p1: Party::new("A", "UK"), p2: Party::new("B", "UK") }).unwrap();
    s.edit(&mut g, Edit::SetDate { date: NaiveDate::from_ymd_opt(1994, 5, 3) }).unwrap();
    assert!(check(&g, &s.draft, Stage::Interactive).unwrap().is_empty());
    let vs = check(&g, &s.draft, Stage::Finalize).unwrap();
    assert_eq!(
        kinds_and_units(&vs),
        [(ViolationKind::MissingParameter, vec!["$Engineer".to_string()], false)]
    );
}

fn drafted() -> (GenericDocument, DocumentInstance) {
    let g = fixtures::mf2();
    let mut inst = DocumentInstance::new_draft(&g, "Q1");
    inst.display_name = "Test Plant".into();
    inst.parties = [Party::new("A", "UK"), Party::new("B", "UK")];
    inst.date = NaiveDate::from_ymd_opt(1994, 5, 3);
    inst.set_binding(BindingScope::Document, "Engineer", Value::String("Frank".into()));
    (g, inst)
}

#[test]
fn equipment_clause_renders_default_days() {
    let (g, inst) = drafted();
    let r = render_document(&g, &inst).unwrap();
    assert!(r.text.contains("within 30 days after the Letter of Acceptance"));
    assert!(r.text.contains("shall be Frank, who"));
    assert!(r.text.contains("Dated 3 May 1994"));
}

#[test]
fn three_encodings_render_the_same_sentence() {
    let g = fixtures::encodings();
    assert!(validate_generic(&g).is_clean());
    let mut inst = DocumentInstance::new_draft(&g, "E1");
    inst.parties = [Party::new("A", "UK"), Party::new("B", "UK")];
    let text = render_document(&g, &inst).unwrap().text;
    assert_eq!(text.matches("within 30 days after the Letter of Acceptance").count(), 3);

    inst.selections.insert(path("As Versions"), 2);
    inst.set_binding(BindingScope::Unit(path("As Parameter")), "days", Value::Integer(60));
    inst.set_binding(BindingScope::Unit(path("As Sub-Sections/Time for List")), "days", Value::Integer(60));
    let text = render_document(&g, &inst).unwrap().text;
    assert_eq!(text.matches("within 60 days after the Letter of Acceptance").count(), 3);
}

#[test]
fn precedence_version_two() {
    let (g, mut inst) = drafted();
    inst.include_unit(&g, &path("Precedence of Documents")).unwrap();
    inst.selections.insert(path("Precedence of Documents"), 2);
    let r = render_document(&g, &inst).unwrap();
    assert!(r.text.contains("mutually explanatory of one another"));
    assert!(!r.text.contains("shall prevail over any other document"));
    assert_eq!(r, render_document(&g, &inst).unwrap());
}

#[test]
fn numbering_follows_part_section_scheme() {
    let (g, inst) = drafted();
    let r = render_document(&g, &inst).unwrap();
    assert!(r.text.contains("\n\nPART 1: Definitions and Interpretations\n"));
    assert!(r.text.contains("\n1-2 Singular and Plural\n"));
    // Ten compulsory parts, numbered compactly.
    assert!(r.text.contains("\n\nPART 10: Time for Completion\n"));
    assert!(r.text.contains("\n10-1 Extension of Time for Completion\n"));
    assert!(r.text.contains("\n10-3 Rate of Progress\n"));
    for e in &r.toc {
        let parts: Vec<&str> = e.number.split('-').collect();
        assert_eq!(parts.len(), e.path.depth());
        assert!(parts.iter().all(|n| n.parse::<u32>().is_ok()));
    }
}

#[test]
fn reordering_renumbers() {
    let (mut g, mut s) = session();
    let time = path("Time for Completion");
    s.edit(
        &mut g,
        Edit::Reorder {
            parent: Some(time),
            order: vec![
                "Rate of Progress".into(),
                "Extension of Time for Completion".into(),
                "Delays by Sub-Contractors".into(),
            ],
        },
    )
    .unwrap();
    s.draft.parties = [Party::new("A", "UK"), Party::new("B", "UK")];
    s.draft
        .set_binding(BindingScope::Document, "Engineer", Value::String("Frank".into()));
    let r = render_document(&g, &s.draft).unwrap();
    assert!(r.text.contains("\n10-1 Rate of Progress\n"));
    assert!(r.text.contains("\n10-2 Extension of Time for Completion\n"));
}

#[test]
fn declared_cross_reference_is_not_rediscovered() {
    let g = fixtures::mf2();
    // Rate of Progress cites "Sub-Clause 33-1", which names no unit here.
    assert!(draftsman_core::constraints::scan_cross_references(&g).unwrap().is_empty());
}
