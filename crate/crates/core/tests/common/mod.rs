//! Random generics and an independent reading of the constraint semantics,
//! plus random session edits, shared by the oracle, session and acceptance
//! tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use draftsman_core::assembly::{Edit, SessionStage};
use draftsman_core::constraints::{Antecedent, Constraint, ViolationKind};
use draftsman_core::fixtures::path;
use draftsman_core::model::{
    atomic_units, BindingScope, DocumentInstance, FragmentRef, GenericDocument, Inclusion, ParamSpec,
    Party, Provenance, Tag, TagKind, TextVersion, UnitPath, UnitTemplate,
};
use draftsman_core::{parse_cond, Value};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Guard / data condition over three parameters: integers `x`, `y` and a
/// string `s`.
#[derive(Debug, Clone)]
pub enum Cond {
    Int(&'static str, &'static str, i64),
    Str(&'static str, String),
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

#[derive(Debug, Clone)]
pub struct Vals {
    pub x: i64,
    pub y: i64,
    pub s: String,
}

impl Cond {
    pub fn text(&self) -> String {
        match self {
            Cond::Int(v, op, n) => format!("${v} {op} {n}"),
            Cond::Str(op, s) => format!("$s {op} \"{s}\""),
            Cond::Not(c) => format!("not ({})", c.text()),
            Cond::And(a, b) => format!("({}) and ({})", a.text(), b.text()),
            Cond::Or(a, b) => format!("({}) or ({})", a.text(), b.text()),
        }
    }

    pub fn eval(&self, vals: &Vals) -> bool {
        match self {
            Cond::Int(v, op, n) => {
                let x = if *v == "x" { vals.x } else { vals.y };
                match *op {
                    "=" => x == *n,
                    "!=" => x != *n,
                    "<" => x < *n,
                    "<=" => x <= *n,
                    ">" => x > *n,
                    ">=" => x >= *n,
                    _ => unreachable!(),
                }
            }
            Cond::Str(op, s) => match *op {
                "=" => vals.s == *s,
                _ => vals.s != *s,
            },
            Cond::Not(c) => !c.eval(vals),
            Cond::And(a, b) => a.eval(vals) && b.eval(vals),
            Cond::Or(a, b) => a.eval(vals) || b.eval(vals),
        }
    }
}

fn random_cond(rng: &mut StdRng, depth: u32) -> Cond {
    let pick = if depth == 0 { rng.random_range(0..2) } else { rng.random_range(0..5) };
    match pick {
        0 => {
            let v = if rng.random_bool(0.5) { "x" } else { "y" };
            let ops = ["=", "!=", "<", "<=", ">", ">="];
            Cond::Int(v, ops[rng.random_range(0..ops.len())], rng.random_range(0..5))
        }
        1 => {
            let op = if rng.random_bool(0.5) { "=" } else { "!=" };
            let s = ["UK", "France"][rng.random_range(0..2)];
            Cond::Str(op, s.to_string())
        }
        2 => Cond::Not(Box::new(random_cond(rng, depth - 1))),
        3 => Cond::And(Box::new(random_cond(rng, depth - 1)), Box::new(random_cond(rng, depth - 1))),
        _ => Cond::Or(Box::new(random_cond(rng, depth - 1)), Box::new(random_cond(rng, depth - 1))),
    }
}

/// Constraint as the oracle sees it.
#[derive(Debug, Clone)]
pub enum Rule {
    Forces { a: UnitPath, b: UnitPath, when: Option<Cond> },
    ForcesIf { d: Cond, b: UnitPath },
    Incompatible { a: UnitPath, b: UnitPath, when: Option<Cond> },
    Xor { a: UnitPath, b: UnitPath, when: Option<Cond> },
    Refers { from: UnitPath, to: UnitPath },
    Data { d: Cond },
}

pub struct Case {
    pub g: GenericDocument,
    pub atoms: Vec<UnitPath>,
    pub units: Vec<(UnitPath, bool)>,
    pub rules: Vec<Rule>,
    pub vals: Vals,
}

fn leaf(label: String, order: u32, inclusion: Inclusion) -> UnitTemplate {
    UnitTemplate {
        label: label.clone(),
        inclusion,
        order,
        params: vec![],
        children: vec![],
        versions: vec![TextVersion {
            number: 1,
            fragment: FragmentRef(format!("f{}", label.to_lowercase())),
            params: vec![],
            commentary: String::new(),
            provenance: Provenance {
                author: "gen".into(),
                created: NaiveDate::from_ymd_opt(1994, 1, 1).unwrap(),
            },
        }],
        commentary: String::new(),
        keyword_suggestions: BTreeSet::new(),
    }
}

fn inclusion(rng: &mut StdRng) -> Inclusion {
    if rng.random_bool(0.3) {
        Inclusion::Compulsory
    } else {
        Inclusion::Optional
    }
}

fn guard(rng: &mut StdRng) -> Option<Cond> {
    rng.random_bool(0.4).then(|| random_cond(rng, 2))
}

/// A generic with at most 10 atomic units, flat or with one level of
/// grouping, and at most 12 constraints whose conditions are fully bound by
/// parameter defaults.
pub fn random_case(seed: u64) -> Case {
    let mut rng = StdRng::seed_from_u64(seed);
    let n_atoms = if rng.random_bool(0.5) { 10 } else { rng.random_range(1..=10) };
    let nested = rng.random_bool(0.5);

    let mut parts = Vec::new();
    let mut made = 0;
    let mut order = 1;
    while made < n_atoms {
        let group = nested && n_atoms - made >= 2 && rng.random_bool(0.5);
        if group {
            let k = rng.random_range(2..=(n_atoms - made).min(3));
            let children = (0..k)
                .map(|i| leaf(format!("U{}", made + i), i as u32 + 1, inclusion(&mut rng)))
                .collect();
            parts.push(UnitTemplate {
                label: format!("G{order}"),
                inclusion: inclusion(&mut rng),
                order,
                params: vec![],
                children,
                versions: vec![],
                commentary: String::new(),
                keyword_suggestions: BTreeSet::new(),
            });
            made += k;
        } else {
            parts.push(leaf(format!("U{made}"), order, inclusion(&mut rng)));
            made += 1;
        }
        order += 1;
    }
    // Shuffle order values so tree order differs from declaration order.
    let mut orders: Vec<u32> = (1..order).collect();
    for i in (1..orders.len()).rev() {
        let j = rng.random_range(0..=i);
        orders.swap(i, j);
    }
    for (p, o) in parts.iter_mut().zip(orders) {
        p.order = o;
    }

    let vals = Vals {
        x: rng.random_range(0..5),
        y: rng.random_range(0..5),
        s: ["UK", "France"][rng.random_range(0..2)].to_string(),
    };
    let mut g = GenericDocument {
        doc_type: format!("Random {seed}"),
        category: "test".into(),
        params: vec![
            ParamSpec::with_default("x", Value::Integer(vals.x)),
            ParamSpec::with_default("y", Value::Integer(vals.y)),
            ParamSpec::with_default("s", Value::String(vals.s.clone())),
        ],
        parts,
        constraints: vec![],
        schema_version: 1,
        fragments: BTreeMap::new(),
    };
    let walked: Vec<(UnitPath, bool, bool)> = g
        .walk()
        .into_iter()
        .map(|(p, u)| (p, u.is_atomic(), u.is_compulsory()))
        .collect();
    for (p, atomic, _) in &walked {
        if *atomic {
            g.fragments
                .insert(FragmentRef(format!("f{}", p.last().to_lowercase())), format!("Text of {}.", p.last()));
        }
    }
    let all: Vec<UnitPath> = walked.iter().map(|(p, _, _)| p.clone()).collect();
    let atoms: Vec<UnitPath> = walked.iter().filter(|w| w.1).map(|(p, _, _)| p.clone()).collect();
    let units: Vec<(UnitPath, bool)> = walked.iter().map(|(p, _, c)| (p.clone(), *c)).collect();

    let n_rules = rng.random_range(0..=12);
    let mut rules = Vec::new();
    let mut tries = 0;
    while rules.len() < n_rules && tries < 200 {
        tries += 1;
        let a = all[rng.random_range(0..all.len())].clone();
        let b = all[rng.random_range(0..all.len())].clone();
        let related = a.covers(&b) || b.covers(&a);
        let rule = match rng.random_range(0..6) {
            0 if a != b => Rule::Forces { a, b, when: guard(&mut rng) },
            1 => Rule::ForcesIf { d: random_cond(&mut rng, 2), b },
            2 if !related => Rule::Incompatible { a, b, when: guard(&mut rng) },
            3 if !related => Rule::Xor { a, b, when: guard(&mut rng) },
            4 if a != b => Rule::Refers { from: a, to: b },
            5 => Rule::Data { d: random_cond(&mut rng, 2) },
            _ => continue,
        };
        rules.push(rule);
    }
    let cond = |c: &Cond| parse_cond(&c.text()).expect("generated condition parses");
    g.constraints = rules
        .iter()
        .map(|r| match r {
            Rule::Forces { a, b, when } => Constraint::Forces {
                antecedent: Antecedent::Unit(a.clone()),
                consequent: b.clone(),
                when: when.as_ref().map(cond),
            },
            Rule::ForcesIf { d, b } => Constraint::Forces {
                antecedent: Antecedent::Data(cond(d)),
                consequent: b.clone(),
                when: None,
            },
            Rule::Incompatible { a, b, when } => Constraint::Incompatible {
                a: a.clone(),
                b: b.clone(),
                when: when.as_ref().map(cond),
            },
            Rule::Xor { a, b, when } => Constraint::ExclusiveOr {
                a: a.clone(),
                b: b.clone(),
                when: when.as_ref().map(cond),
            },
            Rule::Refers { from, to } => Constraint::Refers {
                from: from.clone(),
                to: to.clone(),
            },
            Rule::Data { d } => Constraint::Data {
                expr: cond(d),
                message: "data".into(),
            },
        })
        .collect();
    Case {
        g,
        atoms,
        units,
        rules,
        vals,
    }
}

impl Case {
    pub fn selected(&self, mask: u32) -> BTreeSet<UnitPath> {
        self.atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, p)| p.clone())
            .collect()
    }

    pub fn instance(&self, mask: u32) -> DocumentInstance {
        let mut inst = DocumentInstance::new_draft(&self.g, "T1");
        inst.parties = [Party::new("A", "UK"), Party::new("B", "France")];
        inst.selections = self.selected(mask).into_iter().map(|p| (p, 1)).collect();
        inst.included_optional.clear();
        inst.keywords.clear();
        inst
    }

    /// The declarative reading: does this selection satisfy everything?
    pub fn oracle_clean(&self, mask: u32) -> bool {
        let sel = self.selected(mask);
        let inc = |p: &UnitPath| sel.iter().any(|a| p.covers(a));
        let parent_inc = |p: &UnitPath| p.parent().is_none_or(|q| inc(&q));
        let holds = |c: &Option<Cond>| c.as_ref().is_none_or(|c| c.eval(&self.vals));
        for (p, compulsory) in &self.units {
            if *compulsory && parent_inc(p) && !inc(p) {
                return false;
            }
        }
        self.rules.iter().all(|r| match r {
            Rule::Forces { a, b, when } => !(holds(when) && inc(a)) || inc(b),
            Rule::ForcesIf { d, b } => !d.eval(&self.vals) || inc(b),
            Rule::Incompatible { a, b, when } => !(holds(when) && inc(a) && inc(b)),
            Rule::Xor { a, b, when } => {
                !(holds(when) && parent_inc(a) && parent_inc(b)) || (inc(a) != inc(b))
            }
            Rule::Refers { from, to } => !inc(from) || inc(to),
            Rule::Data { d } => d.eval(&self.vals),
        })
    }

    /// Constraint indices the oracle finds violated among the kinds whose
    /// violation does not depend on the required-units closure.
    pub fn oracle_direct(&self, mask: u32) -> BTreeSet<(usize, ViolationKind)> {
        let sel = self.selected(mask);
        let inc = |p: &UnitPath| sel.iter().any(|a| p.covers(a));
        let holds = |c: &Option<Cond>| c.as_ref().is_none_or(|c| c.eval(&self.vals));
        let mut out = BTreeSet::new();
        for (i, r) in self.rules.iter().enumerate() {
            match r {
                Rule::Incompatible { a, b, when } if holds(when) && inc(a) && inc(b) => {
                    out.insert((i, ViolationKind::IncompatiblePair));
                }
                Rule::Xor { a, b, when }
                    if a.depth() == 1 && b.depth() == 1 && holds(when) && inc(a) == inc(b) =>
                {
                    out.insert((i, ViolationKind::ExclusiveOrUnsatisfied));
                }
                Rule::Data { d } if !d.eval(&self.vals) => {
                    out.insert((i, ViolationKind::DataViolation));
                }
                _ => {}
            }
        }
        out
    }

    pub fn is_direct(&self, index: usize) -> bool {
        match &self.rules[index] {
            Rule::Incompatible { .. } | Rule::Data { .. } => true,
            Rule::Xor { a, b, .. } => a.depth() == 1 && b.depth() == 1,
            _ => false,
        }
    }
}

/// One random edit against the MF/2 fixture; may well be rejected.
pub fn random_edit(rng: &mut StdRng, g: &GenericDocument) -> Edit {
    let units: Vec<_> = g.walk().into_iter().map(|(p, _)| p).collect();
    let atoms = atomic_units(g, None).unwrap();
    let unit = units[rng.random_range(0..units.len())].clone();
    let atom = atoms[rng.random_range(0..atoms.len())].clone();
    match rng.random_range(0..14) {
        0 => Edit::IncludeUnit { path: unit },
        1 => Edit::ExcludeUnit { path: unit },
        2 => Edit::ChooseVersion { path: atom, version: rng.random_range(1..=4) },
        3 => Edit::SetParties {
            p1: Party::new(["A", "B"][rng.random_range(0..2)], "UK"),
            p2: Party::new("B", ["UK", "France", ""][rng.random_range(0..3)]),
        },
        4 => Edit::SetDate { date: NaiveDate::from_ymd_opt(1990 + rng.random_range(0..6), 1, 1) },
        5 => Edit::SetParam {
            scope: BindingScope::Document,
            name: "Engineer".into(),
            value: Value::String(["Frank", "Margaret"][rng.random_range(0..2)].into()),
        },
        6 => Edit::SetParam {
            scope: BindingScope::Unit(path("Contractor's Obligations/Contractor's Equipment")),
            name: "days".into(),
            value: Value::Integer(rng.random_range(7..90)),
        },
        7 => {
            let mut order: Vec<String> = g.parts.iter().map(|p| p.label.clone()).collect();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            Edit::Reorder { parent: None, order }
        }
        8 => Edit::SetKeywords { path: unit, keywords: [format!("kw{}", rng.random_range(0..5))].into() },
        9 => Edit::SetTags {
            path: unit,
            tags: [Tag { kind: TagKind::Duty, party: rng.random_range(1..=2), label: "x".into() }].into(),
        },
        10 => Edit::ToggleAutocheck { on: rng.random_bool(0.5) },
        11 => Edit::SetStage {
            stage: [SessionStage::Meta, SessionStage::Compulsory, SessionStage::Optional, SessionStage::Review]
                [rng.random_range(0..4)],
        },
        12 => Edit::CreateVersion {
            path: atom,
            text: format!("Text {}.", rng.random_range(0..1000)),
            params: vec![],
            commentary: "c".into(),
            author: "a".into(),
        },
        _ => Edit::SetNotes { text: format!("note {}", rng.random_range(0..10)) },
    }
}
