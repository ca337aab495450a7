//! Acceptance run: one PASS/FAIL line per criterion, each checked against
//! its time budget. Exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use draftsman_core::assembly::{Edit, Engine, Session, SessionStage};
use draftsman_core::constraints::{check, suggest_remedies, RemedyAction, Source, Stage, Subject, Violation, ViolationKind};
use draftsman_core::fixtures::{self, path};
use draftsman_core::model::{validate_generic, BindingScope, DocumentInstance, GenericDocument, Inclusion, Party};
use draftsman_core::store::Store;
use draftsman_core::{expand, render_document, run_query, Error, QueryFilter, Value};
use rand::rngs::StdRng;
use rand::SeedableRng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const OPTIONAL_PARTS: [&str; 10] = [
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

fn fidelity() -> Outcome {
    let g = fixtures::mf2();
    ensure!(g.parts.len() == 20, "{} parts", g.parts.len());
    let optional: BTreeSet<&str> = g
        .parts
        .iter()
        .filter(|p| p.inclusion == Inclusion::Optional)
        .map(|p| p.label.as_str())
        .collect();
    ensure!(optional == BTreeSet::from(OPTIONAL_PARTS), "optional parts {optional:?}");
    let time = g.parts.iter().find(|p| p.label == "Time for Completion").ok_or("no Time for Completion")?;
    let ext = time.child("Extension of Time for Completion").ok_or("no Extension section")?;
    ensure!(ext.versions.len() == 2, "{} Extension versions", ext.versions.len());
    let report = validate_generic(&g);
    ensure!(report.is_clean(), "validation: {report}");

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let engine = Engine::open(dir.path()).map_err(|e| e.to_string())?;
    engine.import_generic(&g).map_err(|e| e.to_string())?;
    let s = engine.start_session(fixtures::MF2, None).map_err(|e| e.to_string())?;
    let included: BTreeSet<&str> = g
        .parts
        .iter()
        .filter(|p| s.draft.is_included(&path(&p.label)))
        .map(|p| p.label.as_str())
        .collect();
    let compulsory: BTreeSet<&str> = g
        .parts
        .iter()
        .filter(|p| p.inclusion == Inclusion::Compulsory)
        .map(|p| p.label.as_str())
        .collect();
    ensure!(included == compulsory && included.len() == 10, "session includes {included:?}");
    Ok("20 parts, 10 optional, 2 Extension versions, 10 pre-included".into())
}

fn subjects(v: &Violation) -> Vec<String> {
    v.subjects
        .iter()
        .map(|s| match s {
            Subject::Unit(p) => p.last().to_string(),
            Subject::Param(n) => format!("${n}"),
        })
        .collect()
}

fn expect_one(vs: &[Violation], kind: ViolationKind, subj: &[&str]) -> Result<(), String> {
    ensure!(vs.len() == 1, "expected one violation, got {:?}", vs.iter().map(|v| &v.message).collect::<Vec<_>>());
    ensure!(vs[0].kind == kind && subjects(&vs[0]) == subj && !vs[0].pending, "got {:?} {:?}", vs[0].kind, subjects(&vs[0]));
    Ok(())
}

fn remedy_edit(g: &GenericDocument, s: &Session, v: &Violation, p2: &Party) -> Result<Edit, String> {
    // A parameter remedy is applied by renaming the second party.
    let r = suggest_remedies(v, g, &s.draft)
        .into_iter()
        .find(|r| !matches!(&r.action, RemedyAction::SetParameter(n) if n != "Party2.Name"))
        .ok_or("no applicable remedy offered")?;
    Ok(match r.action {
        RemedyAction::Include(p) => Edit::IncludeUnit { path: p },
        RemedyAction::Exclude(p) => Edit::ExcludeUnit { path: p },
        RemedyAction::SetParameter(_) => {
            Edit::SetParties { p1: s.draft.parties[0].clone(), p2: p2.clone() }
        }
    })
}

fn scenario(parties: (Party, Party), include: Option<&str>, kind: ViolationKind, subj: &[&str]) -> Result<(), String> {
    let mut g = fixtures::mf2();
    let mut s = Session::new(&g, "s", "Q1");
    let e = |r: draftsman_core::Result<_>| r.map_err(|e: Error| e.to_string());
    e(s.edit(&mut g, Edit::SetParties { p1: parties.0, p2: parties.1 }))?;
    if let Some(p) = include {
        e(s.edit(&mut g, Edit::IncludeUnit { path: path(p) }))?;
    }
    let vs = e(check(&g, &s.draft, Stage::Interactive))?;
    expect_one(&vs, kind, subj)?;
    let fix = remedy_edit(&g, &s, &vs[0], &Party::new("Distinct Supplier Ltd", "UK"))?;
    e(s.edit(&mut g, fix))?;
    let after = e(check(&g, &s.draft, Stage::Interactive))?;
    ensure!(after.is_empty(), "{} violations after remedy", after.len());
    Ok(())
}

fn constraint_scenarios() -> Outcome {
    scenario(
        (Party::new("A", "UK"), Party::new("B", "UK")),
        Some("Assignment and Sub-Contracting"),
        ViolationKind::ForcesUnsatisfied,
        &["Sub-Contractors Liability"],
    )
    .map_err(|e| format!("(a) {e}"))?;
    scenario(
        (Party::new("A", "UK"), Party::new("B", "France")),
        None,
        ViolationKind::ForcesUnsatisfied,
        &["Foreign Currency Payments"],
    )
    .map_err(|e| format!("(b) {e}"))?;
    scenario(
        (Party::new("Acme", "UK"), Party::new("Acme", "UK")),
        None,
        ViolationKind::DataViolation,
        &["$Party1.Name", "$Party2.Name"],
    )
    .map_err(|e| format!("(c) {e}"))?;
    Ok("forces, forces-if and data scenarios each resolved by their remedy".into())
}

fn oracle() -> Outcome {
    let mut subsets = 0u64;
    let mut disagreements = 0u64;
    for seed in 0..200 {
        let case = common::random_case(seed);
        ensure!(case.atoms.len() <= 10 && case.g.constraints.len() <= 12, "seed {seed} out of bounds");
        for mask in 0..(1u32 << case.atoms.len()) {
            let inst = case.instance(mask);
            let v = check(&case.g, &inst, Stage::Interactive).map_err(|e| e.to_string())?;
            subsets += 1;
            let direct: BTreeSet<_> = v
                .iter()
                .filter_map(|x| match x.source {
                    Source::Constraint { index, .. } if case.is_direct(index) => Some((index, x.kind)),
                    _ => None,
                })
                .collect();
            if v.is_empty() != case.oracle_clean(mask) || direct != case.oracle_direct(mask) {
                disagreements += 1;
            }
        }
    }
    ensure!(disagreements == 0, "{disagreements} disagreements over {subsets} subsets");
    Ok(format!("200 generics, {subsets} subsets, 0 disagreements"))
}

fn rendering() -> Outcome {
    let g = fixtures::mf2();
    let mut inst = DocumentInstance::new_draft(&g, "Q1");
    inst.parties = [Party::new("A", "UK"), Party::new("B", "UK")];
    inst.set_binding(BindingScope::Document, "Engineer", Value::String("Frank".into()));
    let r = render_document(&g, &inst).map_err(|e| e.to_string())?;
    ensure!(r.text.contains("within 30 days after the Letter of Acceptance"), "days clause missing");
    for e in &r.toc {
        let parts: Vec<&str> = e.number.split('-').collect();
        ensure!(
            parts.len() == e.path.depth() && parts.iter().all(|n| n.parse::<u32>().is_ok()),
            "number {} for {}",
            e.number,
            e.path
        );
    }
    ensure!(r.text.contains("\n10-1 Extension of Time for Completion\n"), "10-1 heading missing");

    inst.include_unit(&g, &path("Precedence of Documents")).map_err(|e| e.to_string())?;
    inst.selections.insert(path("Precedence of Documents"), 2);
    let a = render_document(&g, &inst).map_err(|e| e.to_string())?;
    let b = render_document(&g, &inst).map_err(|e| e.to_string())?;
    ensure!(a.text.contains("mutually explanatory of one another"), "precedence v2 missing");
    ensure!(a == b, "double render differs");
    Ok("30-day clause, precedence v2, N-M numbering, byte-identical re-render".into())
}

fn query() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = Store::open(dir.path()).map_err(|e| e.to_string())?;
    fixtures::install(&store).map_err(|e| e.to_string())?;
    let f = QueryFilter::from_params([
        ("category", "research"),
        ("before", "1994-12"),
        ("party_address", "France"),
        ("contains", "Certificates and Payment/Payment Terms@3"),
    ])
    .map_err(|e| e.to_string())?;
    let hits: Vec<String> = run_query(&store, &f).map_err(|e| e.to_string())?.into_iter().map(|s| s.id).collect();
    ensure!(hits == ["R1"], "compound query returned {hits:?}");
    let all: Vec<String> = run_query(&store, &QueryFilter::default())
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|s| s.id)
        .collect();
    ensure!(all == ["R1", "R2", "R3"], "empty filter returned {all:?}");
    let doc = expand(&store, "R1").map_err(|e| e.to_string())?;
    ensure!(doc.text.lines().nth(1) == Some("Paris Plant 1992"), "title block {:?}", doc.text.lines().take(2).collect::<Vec<_>>());
    Ok("compound query [R1], all three by date, R1 titled Paris Plant 1992".into())
}

fn snapshot(root: &std::path::Path) -> Vec<(std::path::PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.file_name().unwrap().to_string_lossy().starts_with('.') {
                continue;
            }
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.clone(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn persistence() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = Store::open(dir.path()).map_err(|e| e.to_string())?;
    let ids = fixtures::install(&store).map_err(|e| e.to_string())?;
    for g in [fixtures::mf2(), fixtures::encodings()] {
        ensure!(store.get_generic(&g.doc_type).map_err(|e| e.to_string())? == g, "{} round trip", g.doc_type);
    }
    let g = fixtures::mf2();
    for inst in fixtures::instances(&g, [&ids[0], &ids[1], &ids[2]]).map_err(|e| e.to_string())? {
        ensure!(store.get_instance(&inst.id).map_err(|e| e.to_string())? == inst, "{} round trip", inst.id);
    }
    let before = snapshot(dir.path());
    for g in [fixtures::mf2(), fixtures::encodings()] {
        store.put_generic(&store.get_generic(&g.doc_type).unwrap()).map_err(|e| e.to_string())?;
    }
    for id in &ids {
        store.put_instance(&store.get_instance(id).unwrap()).map_err(|e| e.to_string())?;
    }
    ensure!(snapshot(dir.path()) == before, "rewrite changed bytes");
    let report = store.integrity_check().map_err(|e| e.to_string())?;
    ensure!(report.is_clean(), "integrity findings {:?}", report.findings);

    let q: Vec<String> = (0..6).map(|_| store.allocate_instance_id("Q").unwrap()).collect();
    ensure!(q[5] == "Q6", "sixth allocation {}", q[5]);

    // A second process allocating until killed, then a fresh handle.
    let mut seen: BTreeSet<u64> = (1..=6).collect();
    let mut child = Command::new(std::env::current_exe().map_err(|e| e.to_string())?)
        .env(CHILD_ENV, dir.path())
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let mut got = 0;
    while got < 20 {
        let Some(Ok(l)) = lines.next() else { break };
        let n: u64 = l.trim_start_matches('Q').parse().map_err(|_| format!("child said {l}"))?;
        ensure!(seen.insert(n), "Q{n} repeated");
        got += 1;
    }
    child.kill().map_err(|e| e.to_string())?;
    child.wait().map_err(|e| e.to_string())?;
    for l in lines.map_while(|l| l.ok()) {
        let n: u64 = l.trim_start_matches('Q').parse().map_err(|_| format!("child said {l}"))?;
        ensure!(seen.insert(n), "Q{n} repeated");
    }
    ensure!(got == 20, "child allocated only {got}");
    let reopened = Store::open(dir.path()).map_err(|e| e.to_string())?;
    let next: u64 = reopened.allocate_instance_id("Q").map_err(|e| e.to_string())?[1..].parse().unwrap();
    ensure!(next > *seen.last().unwrap(), "Q{next} after crash");
    Ok(format!("round trips equal, bytes stable, Q6, Q{next} after killed allocator"))
}

fn replay() -> Outcome {
    for seed in 0..50 {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut g = fixtures::mf2();
        let mut s = Session::new(&g, "s", "Q1");
        for _ in 0..30 {
            let edit = common::random_edit(&mut rng, &g);
            let _ = s.edit(&mut g, edit);
        }
        let r = Session::replay(&g, "s", "Q1", &s.edit_log).map_err(|e| e.to_string())?;
        ensure!(r == s, "seed {seed}: replay differs");
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let engine = Engine::open(dir.path()).map_err(|e| e.to_string())?;
    fixtures::install(engine.store()).map_err(|e| e.to_string())?;
    let id = engine.start_session(fixtures::MF2, None).map_err(|e| e.to_string())?.session_id;
    let mut edits = vec![
        Edit::SetParties { p1: Party::new("Southern Gas Board", "UK"), p2: Party::new("Solent Engineering Ltd", "UK") },
        Edit::SetDate { date: NaiveDate::from_ymd_opt(1995, 2, 1) },
        Edit::SetDisplayName { name: "Poole Plant 1995".into() },
    ];
    edits.extend(
        [SessionStage::Compulsory, SessionStage::Optional, SessionStage::Review].map(|stage| Edit::SetStage { stage }),
    );
    for e in edits {
        engine.apply_edit(&id, e).map_err(|e| e.to_string())?;
    }
    match engine.finalize(&id) {
        Err(Error::ViolationsOutstanding(v)) => {
            ensure!(
                v.len() == 1 && v[0].kind == ViolationKind::MissingParameter && subjects(&v[0]) == ["$Engineer"],
                "finalize blocked by {:?}",
                v.iter().map(|x| &x.message).collect::<Vec<_>>()
            );
        }
        other => return Err(format!("finalize without Engineer: {other:?}")),
    }
    engine
        .apply_edit(
            &id,
            Edit::SetParam { scope: BindingScope::Document, name: "Engineer".into(), value: Value::String("Frank".into()) },
        )
        .map_err(|e| e.to_string())?;
    let inst = engine.finalize(&id).map_err(|e| e.to_string())?;
    let g = engine.get_generic(fixtures::MF2).map_err(|e| e.to_string())?;
    let stored = engine.get_instance(&inst.id).map_err(|e| e.to_string())?;
    let recheck = check(&g, &stored, Stage::Finalize).map_err(|e| e.to_string())?;
    ensure!(recheck.is_empty(), "final instance re-checks with {} violations", recheck.len());
    let session = engine.get_session(&id).map_err(|e| e.to_string())?;
    let r = Session::replay(&g, &id, &session.draft.id, &session.edit_log).map_err(|e| e.to_string())?;
    ensure!(r == session, "finalized session replay differs");
    Ok("50 random logs replayed, finalize gated on $Engineer, final instance clean".into())
}

const CHILD_ENV: &str = "DRAFTSMAN_ACCEPTANCE_ALLOCATOR";

/// Name, time budget in seconds, check.
type Criterion = (&'static str, u64, fn() -> Outcome);

fn main() {
    if let Ok(root) = std::env::var(CHILD_ENV) {
        let store = Store::open(root).unwrap();
        loop {
            println!("{}", store.allocate_instance_id("Q").unwrap());
        }
    }
    // cargo passes harness flags such as --nocapture; nothing here uses them.
    let criteria: [Criterion; 7] = [
        ("MF/2 fixture fidelity", 1, fidelity),
        ("Constraint scenarios", 1, constraint_scenarios),
        ("Oracle equivalence", 60, oracle),
        ("Rendering", 1, rendering),
        ("Query scenario", 1, query),
        ("Persistence", 5, persistence),
        ("Session replay", 1, replay),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > Duration::from_secs(budget) => Err(format!("{detail}; over the {budget} s budget")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS  {name:<24} {:>8.3} s  (< {budget} s)  {detail}", took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<24} {:>8.3} s  (< {budget} s)  {why}", took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
