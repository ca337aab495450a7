//! Sample data: the MF/2 generic built from the model-form parts list, a
//! small generic showing three encodings of the Contractor's Equipment
//! clause, and three drafted instances R1 to R3.

use std::collections::BTreeSet;

use chrono::NaiveDate;

use crate::constraints::{Antecedent, Constraint};
use crate::condexpr::parse_cond;
use crate::error::Result;
use crate::model::{
    BindingScope, DocumentInstance, FragmentRef, GenericDocument, Inclusion, ParamSpec, Party,
    Provenance, Status, Tag, TagKind, TextVersion, UnitPath, UnitTemplate, SCHEMA_VERSION,
};
use crate::store::Store;
use crate::value::{ParamKind, Value};

pub const MF2: &str = "IEE MF/2";
pub const ENCODINGS: &str = "Contractor's Equipment Encodings";

pub const PRECEDENCE_V1: &str = "Unless otherwise provided in the Contract the Conditions as amended by the Letter of Acceptance shall prevail over any other document forming part of the Contract and in the case of conflict between the General Conditions the Special Conditions shall prevail. Subject thereto the Specification shall prevail over any other document forming part of the Contract.";
pub const PRECEDENCE_V2: &str = "The documents forming the Contract are to be taken as mutually explanatory of one another and in the case of ambiguities or discrepancies the same shall be explained and adjusted by the Engineer who shall thereupon issue to the Contractor appropriate instructions in writing.";
pub const RATE_V1: &str = "The Engineer shall notify the Contractor if the Engineer decides that the rate of progress of the Works or of any Section is too slow to meet the Time for Completion and that this is not due to a circumstance for which the Contractor is entitled to an extension of time under Sub-Clause 33-1.";
pub const RATE_V2: &str = "The Engineer may notify the Contractor if the Engineer considers that the rate of progress of the Works or of any Section is too slow to meet the Time for Completion and that this is not due to a circumstance for which the Contractor is entitled to an extension of time under Sub-Clause 33-1.";
pub const EQUIPMENT: &str = "The Contractor shall within $days days after the Letter of Acceptance provide to the Engineer a list of the Contractor's Equipment that the Contractor intends to use on the Site.";

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("fixture dates are valid")
}

pub fn path(s: &str) -> UnitPath {
    UnitPath::parse(s).expect("fixture paths are valid")
}

/// Collects units and fragment texts, handing out `tf1`, `tf2`, ...
struct Builder {
    fragments: Vec<(FragmentRef, String)>,
}

struct V<'a> {
    text: &'a str,
    params: Vec<ParamSpec>,
    commentary: &'a str,
    author: &'a str,
    created: NaiveDate,
}

fn model(text: &str) -> V<'_> {
    V {
        text,
        params: vec![],
        commentary: "",
        author: "IEE model form",
        created: date(1991, 1, 1),
    }
}

fn alt<'a>(text: &'a str, commentary: &'a str, created: NaiveDate) -> V<'a> {
    V {
        text,
        params: vec![],
        commentary,
        author: "drafter",
        created,
    }
}

impl Builder {
    fn new() -> Self {
        Builder { fragments: Vec::new() }
    }

    fn leaf(&mut self, label: &str, order: u32, inclusion: Inclusion, versions: Vec<V<'_>>) -> UnitTemplate {
        let versions = versions
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                let r = FragmentRef(format!("tf{}", self.fragments.len() + 1));
                self.fragments.push((r.clone(), v.text.to_string()));
                TextVersion {
                    number: i as u32 + 1,
                    fragment: r,
                    params: v.params,
                    commentary: v.commentary.to_string(),
                    provenance: Provenance {
                        author: v.author.to_string(),
                        created: v.created,
                    },
                }
            })
            .collect();
        UnitTemplate {
            label: label.to_string(),
            inclusion,
            order,
            params: vec![],
            children: vec![],
            versions,
            commentary: String::new(),
            keyword_suggestions: BTreeSet::new(),
        }
    }

    fn simple(&mut self, label: &str, order: u32, inclusion: Inclusion, text: &str) -> UnitTemplate {
        self.leaf(label, order, inclusion, vec![model(text)])
    }

    fn finish(self, mut g: GenericDocument) -> GenericDocument {
        g.fragments = self.fragments.into_iter().collect();
        g
    }
}

fn node(label: &str, order: u32, inclusion: Inclusion, children: Vec<UnitTemplate>) -> UnitTemplate {
    UnitTemplate {
        label: label.to_string(),
        inclusion,
        order,
        params: vec![],
        children,
        versions: vec![],
        commentary: String::new(),
        keyword_suggestions: BTreeSet::new(),
    }
}

fn with_commentary(mut u: UnitTemplate, text: &str) -> UnitTemplate {
    u.commentary = text.to_string();
    u
}

fn with_keywords(mut u: UnitTemplate, kw: &[&str]) -> UnitTemplate {
    u.keyword_suggestions = kw.iter().map(|k| k.to_string()).collect();
    u
}

/// The 20 parts of the model-form contract, ten of them optional.
pub fn mf2() -> GenericDocument {
    use Inclusion::{Compulsory as C, Optional as O};
    let mut b = Builder::new();

    let definitions = node(
        "Definitions and Interpretations",
        1,
        C,
        vec![
            b.simple("Definitions", 1, C, "In the Contract the following words and expressions shall have the meanings assigned to them, except where the context otherwise requires."),
            b.simple("Singular and Plural", 2, C, "Words importing the singular also include the plural and vice versa where the context requires."),
            b.simple("Headings and Marginal Notes", 3, C, "The headings and marginal notes in these Conditions shall not be deemed part thereof or be taken into consideration in the interpretation or construction thereof or of the Contract."),
        ],
    );
    let engineer = b.simple(
        "Engineer and Engineer's Representative",
        2,
        C,
        "The Engineer for the purposes of the Contract shall be $Engineer, who may from time to time delegate to the Engineer's Representative any of the powers vested in the Engineer.",
    );
    let assignment = with_commentary(
        node(
            "Assignment and Sub-Contracting",
            3,
            O,
            vec![
                b.simple("Assignment", 1, C, "Neither party shall, without the consent of the other, assign the Contract or any part thereof or any benefit or interest therein or thereunder."),
                b.simple("Sub-Contracting", 2, C, "The Contractor shall not sub-contract the whole of the Works. The Contractor shall not sub-contract any part of the Works without the consent of the Engineer."),
                with_commentary(
                    b.simple("Sub-Contractors Liability", 3, O, "The Contractor shall be responsible for the acts, defaults and neglects of any Sub-Contractor as fully as if they were the acts, defaults or neglects of the Contractor."),
                    "Required whenever sub-contracting is permitted.",
                ),
            ],
        ),
        "Include where the Contractor may assign or sub-contract.",
    );
    let precedence = with_commentary(
        b.leaf(
            "Precedence of Documents",
            4,
            O,
            vec![
                model(PRECEDENCE_V1),
                alt(
                    PRECEDENCE_V2,
                    "Preferred where the documents should be read together and any conflict resolved by the Engineer's instruction rather than by a fixed ranking.",
                    date(1992, 3, 10),
                ),
            ],
        ),
        "Ranks the contract documents against each other in case of conflict.",
    );
    let basis = b.simple("Basis of Tender and Contract Price", 5, C, "The Contractor shall be deemed to have satisfied himself as to the correctness and sufficiency of the Tender and of the Contract Price.");
    let costs = b.simple("Changes in Costs", 6, O, "The Contract Price shall be adjusted in respect of changes in the cost of labour and materials in accordance with the Special Conditions.");
    let purchaser = b.simple("Purchaser's General Obligations", 7, C, "The Purchaser shall provide the Contractor with access to the Site and with such information as the Contractor reasonably requires for the execution of the Works.");
    let mut equipment = b.leaf(
        "Contractor's Equipment",
        2,
        C,
        vec![V {
            params: vec![ParamSpec::with_default("days", Value::Integer(30))],
            ..model(EQUIPMENT)
        }],
    );
    equipment = with_keywords(equipment, &["equipment"]);
    let contractor = node(
        "Contractor's Obligations",
        8,
        C,
        vec![
            b.simple("General Obligations", 1, C, "The Contractor shall, subject to the provisions of the Contract, design, manufacture, deliver to Site, erect and test the Works."),
            equipment,
        ],
    );
    let suspension = b.simple("Suspension of Work, Delivery or Erection", 9, C, "The Contractor shall on the instructions of the Engineer suspend the progress of the Works or any part thereof for such time and in such manner as the Engineer may consider necessary.");
    let variations = b.simple("Variations", 10, O, "The Engineer shall have power to order any variation to the Works that does not substantially change the scope of the Works.");
    let defects = b.simple("Defects Liability", 11, O, "The Contractor shall be responsible for making good any defect in the Works arising from defective materials, workmanship or design which appears within the Defects Liability Period.");
    let tests = b.simple("Tests on Completion", 12, C, "On completion of erection the Works shall be subjected to the Tests on Completion specified in the Contract.");
    let taking_over = b.simple("Taking Over", 13, O, "The Works shall be taken over by the Purchaser when they have been completed and have passed the Tests on Completion.");
    let performance = b.simple("Performance Tests", 14, O, "Where the Contract provides for Performance Tests, these shall be carried out within a reasonable time after Taking Over.");
    let payment = with_keywords(
        with_commentary(
            b.leaf(
                "Payment Terms",
                1,
                C,
                vec![
                    model("The Purchaser shall pay the Contractor the Contract Price in the amounts and at the times set out in the Special Conditions."),
                    alt("The Purchaser shall pay the Contractor each certified sum within 30 days of the date of the certificate.", "Fixes a payment period instead of leaving it to the Special Conditions.", date(1991, 9, 2)),
                    alt("The Purchaser shall pay the Contractor in stage payments of equal amount on the milestones listed in the Schedule of Prices, each within 45 days of the Contractor's invoice.", "Milestone payments, used for staged plant deliveries.", date(1992, 2, 14)),
                ],
            ),
            "When and how the Contract Price is paid.",
        ),
        &["payment"],
    );
    let fcp = with_commentary(
        b.simple("Foreign Currency Payments", 2, O, "Payments due to the Contractor in a currency other than sterling shall be made in the currency and at the rate of exchange stated in the Special Conditions."),
        "Needed when the supplier operates from outside the UK.",
    );
    let certificates = node("Certificates and Payment", 15, C, vec![payment, fcp]);
    let accidents = b.simple("Accidents and Damage", 16, O, "The Contractor shall be liable for and shall indemnify the Purchaser against loss of or damage to property arising out of the execution of the Works.");
    let force = b.simple("Force Majeure", 17, C, "Neither party shall be liable for failure to perform its obligations under the Contract to the extent that the failure is due to Force Majeure.");
    let insurance = b.simple("Insurance", 18, O, "The Contractor shall insure the Works in the joint names of the Purchaser and the Contractor against loss or damage until Taking Over.");
    let disputes = b.simple("Disputes and Arbitration", 19, O, "Any dispute arising under the Contract shall be referred to arbitration in accordance with the Special Conditions.");
    let time = node(
        "Time for Completion",
        20,
        C,
        vec![
            b.leaf(
                "Extension of Time for Completion",
                1,
                C,
                vec![
                    model("If by reason of any variation ordered by the Engineer or of any act or default of the Purchaser the Contractor is delayed in the completion of the Works, the Time for Completion shall be extended by such period as may be fair and reasonable."),
                    alt("If the Contractor is delayed in the completion of the Works by any cause beyond his reasonable control, the Contractor shall be entitled to an extension of the Time for Completion, provided that notice is given to the Engineer within 14 days of the start of the delay.", "Wider grounds for extension, conditional on prompt notice.", date(1992, 11, 5)),
                ],
            ),
            b.simple("Delays by Sub-Contractors", 2, C, "Delay caused by a Sub-Contractor shall entitle the Contractor to an extension of time only where the delay is itself due to a cause for which an extension would be granted to the Contractor."),
            with_commentary(
                b.leaf(
                    "Rate of Progress",
                    3,
                    C,
                    vec![
                        model(RATE_V1),
                        alt(RATE_V2, "Makes notification discretionary and judged on the Engineer's view rather than a decision.", date(1993, 5, 20)),
                    ],
                ),
                "Lets the Engineer act on slow progress that is not covered by an extension of time.",
            ),
        ],
    );

    let parts = vec![
        definitions, engineer, assignment, precedence, basis, costs, purchaser, contractor, suspension, variations,
        defects, tests, taking_over, performance, certificates, accidents, force, insurance, disputes, time,
    ];
    let constraints = vec![
        Constraint::forces(
            path("Assignment and Sub-Contracting"),
            path("Assignment and Sub-Contracting/Sub-Contractors Liability"),
        ),
        Constraint::Forces {
            antecedent: Antecedent::Data(parse_cond(r#"$Party2.Address != "UK""#).expect("fixture condition")),
            consequent: path("Certificates and Payment/Foreign Currency Payments"),
            when: None,
        },
        Constraint::Data {
            expr: parse_cond("$Party1.Name != $Party2.Name").expect("fixture condition"),
            message: "the contracting parties must not be identical".to_string(),
        },
        Constraint::Refers {
            from: path("Time for Completion/Rate of Progress"),
            to: path("Time for Completion/Extension of Time for Completion"),
        },
    ];
    b.finish(GenericDocument {
        doc_type: MF2.to_string(),
        category: "research".to_string(),
        params: vec![ParamSpec::required("Engineer", ParamKind::String)],
        parts,
        constraints,
        schema_version: SCHEMA_VERSION,
        fragments: Default::default(),
    })
}

/// The same clause encoded three ways: as alternative versions, as a
/// parameter with a default, and split into two sub-sections.
pub fn encodings() -> GenericDocument {
    use Inclusion::Compulsory as C;
    let mut b = Builder::new();
    let as_versions = b.leaf(
        "As Versions",
        1,
        C,
        vec![
            model("The Contractor shall within 30 days after the Letter of Acceptance provide to the Engineer a list of the Contractor's Equipment that the Contractor intends to use on the Site."),
            alt("The Contractor shall within 60 days after the Letter of Acceptance provide to the Engineer a list of the Contractor's Equipment that the Contractor intends to use on the Site.", "Longer period for plant with long lead times.", date(1993, 1, 12)),
        ],
    );
    let as_parameter = b.leaf(
        "As Parameter",
        2,
        C,
        vec![V {
            params: vec![ParamSpec::with_default("days", Value::Integer(30))],
            ..model(EQUIPMENT)
        }],
    );
    let split = node(
        "As Sub-Sections",
        3,
        C,
        vec![
            b.simple("List of Equipment", 1, C, "The Contractor shall provide to the Engineer a list of the Contractor's Equipment that the Contractor intends to use on the Site."),
            b.leaf(
                "Time for List",
                2,
                C,
                vec![V {
                    params: vec![ParamSpec::with_default("days", Value::Integer(30))],
                    ..model("Such list will be provided within $days days after the Letter of Acceptance.")
                }],
            ),
        ],
    );
    b.finish(GenericDocument {
        doc_type: ENCODINGS.to_string(),
        category: "research".to_string(),
        params: vec![],
        parts: vec![as_versions, as_parameter, split],
        constraints: vec![],
        schema_version: SCHEMA_VERSION,
        fragments: Default::default(),
    })
}

struct Drafted<'a> {
    name: &'a str,
    date: NaiveDate,
    p1: Party,
    p2: Party,
    engineer: &'a str,
    payment_version: u32,
    include: &'a [&'a str],
    tag: Option<(TagKind, &'a str)>,
    keywords: &'a [&'a str],
}

fn draft(g: &GenericDocument, id: &str, d: Drafted<'_>) -> Result<DocumentInstance> {
    let mut inst = DocumentInstance::new_draft(g, id);
    inst.display_name = d.name.to_string();
    inst.date = Some(d.date);
    inst.parties = [d.p1, d.p2];
    inst.set_binding(BindingScope::Document, "Engineer", Value::String(d.engineer.to_string()));
    for p in d.include {
        inst.include_unit(g, &path(p))?;
    }
    let payment = path("Certificates and Payment/Payment Terms");
    inst.selections.insert(payment.clone(), d.payment_version);
    if let Some((kind, label)) = d.tag {
        inst.tags.insert(
            payment.clone(),
            [Tag {
                kind,
                party: 2,
                label: label.to_string(),
            }]
            .into(),
        );
    }
    if !d.keywords.is_empty() {
        inst.keywords
            .entry(payment)
            .or_default()
            .extend(d.keywords.iter().map(|k| k.to_string()));
    }
    inst.status = Status::Final;
    Ok(inst)
}

/// R1 to R3 against `g` (the MF/2 generic), with the given ids.
pub fn instances(g: &GenericDocument, ids: [&str; 3]) -> Result<Vec<DocumentInstance>> {
    let purchaser = || Party::new("Southern Gas Board", "UK");
    Ok(vec![
        draft(
            g,
            ids[0],
            Drafted {
                name: "Paris Plant 1992",
                date: date(1992, 6, 15),
                p1: purchaser(),
                p2: Party::new("Société Lyonnaise de Construction", "France"),
                engineer: "Frank",
                payment_version: 3,
                include: &["Precedence of Documents", "Certificates and Payment/Foreign Currency Payments", "Insurance"],
                tag: Some((TagKind::Duty, "pay stage invoices")),
                keywords: &["plant"],
            },
        )?,
        draft(
            g,
            ids[1],
            Drafted {
                name: "Southampton Plant 1993",
                date: date(1993, 4, 2),
                p1: purchaser(),
                p2: Party::new("Solent Engineering Ltd", "UK"),
                engineer: "Margaret",
                payment_version: 1,
                include: &["Defects Liability", "Taking Over"],
                tag: None,
                keywords: &["plant"],
            },
        )?,
        draft(
            g,
            ids[2],
            Drafted {
                name: "Oxford Plant 1994",
                date: date(1994, 12, 15),
                p1: purchaser(),
                p2: Party::new("Compagnie Générale des Turbines", "France"),
                engineer: "Frank",
                payment_version: 2,
                include: &["Certificates and Payment/Foreign Currency Payments", "Disputes and Arbitration"],
                tag: Some((TagKind::Right, "payment within 30 days")),
                keywords: &[],
            },
        )?,
    ])
}

/// Installs both generics and R1 to R3 (ids allocated with prefix `R`).
/// Returns the instance ids.
pub fn install(store: &Store) -> Result<Vec<String>> {
    let g = mf2();
    store.put_generic(&g)?;
    store.put_generic(&encodings())?;
    let ids = [
        store.allocate_instance_id("R")?,
        store.allocate_instance_id("R")?,
        store.allocate_instance_id("R")?,
    ];
    let insts = instances(&g, [&ids[0], &ids[1], &ids[2]])?;
    for inst in &insts {
        store.put_instance(inst)?;
    }
    Ok(ids.to_vec())
}
