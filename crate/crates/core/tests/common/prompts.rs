use std::collections::BTreeSet;

use intentforge_core::discriminator::render_fact;
use intentforge_core::pipeline::project_framework_version;
use intentforge_core::promptgen::{render_edit_prompt, Ablation, EditPromptInput, Granularity, PromptBundle};
use intentforge_core::source::file_skeleton;
use intentforge_core::{CodeGraph, EdgeKind, FactSubject, RelationEdge, ValidationIntention};

pub struct Inputs {
    pub focal: String,
    pub skeleton: String,
    pub version: String,
    pub desc: ValidationIntention,
    pub reference: String,
    pub facts: Vec<String>,
}

pub fn inputs(graph: &CodeGraph) -> Inputs {
    let node = |id: &str| graph.require(id).unwrap();
    let facts = [
        FactSubject::Node {
            id: "src/main/java/shop/Money.java#Money.Money plus(Money)".into(),
        },
        FactSubject::Edge {
            edge: RelationEdge::new(super::TOTAL, "src/main/java/shop/Item.java#Item.Money subtotal()", EdgeKind::Call),
        },
        FactSubject::Node {
            id: "src/main/java/shop/Cart.java#Cart.Discount discount".into(),
        },
    ]
    .iter()
    .map(|s| render_fact(s, graph).unwrap())
    .collect();
    Inputs {
        focal: node(super::TOTAL).body_text.clone(),
        skeleton: file_skeleton(graph, super::CART).unwrap(),
        version: project_framework_version(graph),
        desc: super::shop_intentions()[super::TOTAL_TEST].clone(),
        reference: node(super::SUBTOTAL_TEST).body_text.clone(),
        facts,
    }
}

pub fn edit(inp: &Inputs, granularity: Granularity, ablations: &[Ablation]) -> PromptBundle {
    let ablations: BTreeSet<Ablation> = ablations.iter().copied().collect();
    render_edit_prompt(&EditPromptInput {
        focal_code: &inp.focal,
        skeleton: &inp.skeleton,
        framework_version: &inp.version,
        desc: &inp.desc,
        reference_test: Some(&inp.reference),
        facts: &inp.facts,
        granularity,
        ablations: &ablations,
        system: None,
    })
}


pub const PREVIOUS: &str = "package shop;\n\nclass CartTest {\n    @Test\n    void total() {\n        assertEquals(320, new Cart().totl().cents());\n    }\n}";
pub const ERROR: &str = "[ERROR] src/test/java/shop/CartTest.java:[6,40] cannot find symbol\n  symbol:   method totl()";
pub const RETRY_FEEDBACK: &str = "The objective has 60 words; it must have at most 50.";

/// Every committed golden prompt paired with a fresh rendering of it.
pub fn all_goldens(graph: &CodeGraph) -> Vec<(String, String)> {
    use intentforge_core::promptgen::{render_intention_prompt, render_intention_retry_prompt, render_refine_prompt};
    let inp = inputs(graph);
    let mut out = Vec::new();
    for gran in Granularity::ALL {
        out.push((format!("edit_{}.txt", gran.as_str()), edit(&inp, gran, &[]).user));
    }
    let ablations: [(&str, &[Ablation]); 3] = [
        ("edit_no-ref.txt", &[Ablation::NoRef]),
        ("edit_no-fact.txt", &[Ablation::NoFact]),
        ("edit_no-ref_no-fact.txt", &[Ablation::NoRef, Ablation::NoFact]),
    ];
    for (name, a) in ablations {
        out.push((name.into(), edit(&inp, Granularity::Full, a).user));
    }
    let base = edit(&inp, Granularity::Full, &[]);
    out.push(("refine_none_captured.txt".into(), render_refine_prompt(&base, PREVIOUS, &[]).user));
    out.push(("refine_one_error.txt".into(), render_refine_prompt(&base, PREVIOUS, &[ERROR.into()]).user));
    let test = &graph.require(super::TOTAL_TEST).unwrap().body_text;
    let focal = &graph.require(super::TOTAL).unwrap().body_text;
    out.push(("intention.txt".into(), render_intention_prompt(test, focal, None).user));
    out.push((
        "intention_retry.txt".into(),
        render_intention_retry_prompt(test, focal, None, &[RETRY_FEEDBACK.into()]).user,
    ));
    out
}
