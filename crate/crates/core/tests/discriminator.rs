mod common;

use std::collections::BTreeSet;

use intentforge_core::discriminator::{
    explore, fact_occurrence, rank_facts, render_fact, score_facts, ExplorationSeed, OccurrenceScale,
};
use intentforge_core::retrieval::{semantic_sim, HashingEmbedder};
use intentforge_core::source::{extract_usages, parse_project, AdapterConfig};
use intentforge_core::{
    CodeGraph, CrucialFact, EdgeKind, EntityKind, EntityNode, FactSubject, RelationEdge, Span, ValidationIntention,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SERVER: &str = "src/main/java/demo/server/Server.java";
const TEST: &str = "src/test/java/demo/server/ServerTest.java";

fn proj() -> CodeGraph {
    parse_project(&common::fixtures().join("proj"), &AdapterConfig::default()).unwrap()
}

#[test]
fn explore_matches_bfs_oracle_on_fixture() {
    let g = proj();
    let seed_sets: [&[&str]; 4] = [
        &["src/main/java/demo/server/Server.java#Server.Server create(ThreadPool, Handler)"],
        &["src/test/java/demo/server/ServerTest.java#ServerTest.void igniteTwice()"],
        &[
            "src/main/java/demo/server/Server.java#Server.int ignite(int)",
            "src/test/java/demo/server/ServerTest.java#ServerTest.void create_withThreadPool()",
        ],
        &["src/main/java/demo/server/Handler.java#Handler"],
    ];
    for seeds in seed_sets {
        for depth in [1, 2] {
            let facts = explore::<f64>(&g, &ExplorationSeed::from_ids(seeds.iter().copied()), depth, &BTreeSet::new()).unwrap();
            assert_eq!(common::bfs::split(&facts), common::bfs::oracle(&g, seeds, depth, &BTreeSet::new()), "seeds {seeds:?} depth {depth}");
            let keys: BTreeSet<String> = facts.iter().map(|f| f.key()).collect();
            assert_eq!(keys.len(), facts.len(), "duplicate candidates");
        }
    }
}

#[test]
fn explore_matches_bfs_oracle_with_exclusions() {
    let g = proj();
    let exclude: BTreeSet<String> = [format!("{TEST}#ServerTest.void create_withThreadPool()")].into();
    let seeds = [format!("{SERVER}#Server.int ignite(int)")];
    let seeds: Vec<&str> = seeds.iter().map(String::as_str).collect();
    for depth in [1, 2] {
        let facts = explore::<f64>(&g, &ExplorationSeed::from_ids(seeds.clone()), depth, &exclude).unwrap();
        let (nodes, edges) = common::bfs::split(&facts);
        assert!(!nodes.iter().any(|n| exclude.contains(n)));
        assert!(!edges.iter().any(|e| exclude.contains(&e.src) || exclude.contains(&e.dst)));
        assert_eq!((nodes, edges), common::bfs::oracle(&g, &seeds, depth, &exclude));
    }
}

fn method(class: &str, i: usize) -> EntityNode {
    EntityNode {
        id: format!("{class}.java#{class}.void m{i}()"),
        kind: EntityKind::Method,
        simple_name: format!("m{i}"),
        signature: format!("void m{i}()"),
        declaration: format!("void m{i}()"),
        file_path: format!("{class}.java"),
        span: Span::new(i as u32 + 2, i as u32 + 2),
        body_text: format!("void m{i}() {{}}"),
        annotations: Vec::new(),
    }
}

fn random_graph(rng: &mut ChaCha8Rng) -> CodeGraph {
    let n = rng.gen_range(2..14);
    let class = EntityNode {
        id: "C.java#C".into(),
        kind: EntityKind::Class,
        simple_name: "C".into(),
        signature: "class C".into(),
        declaration: "class C".into(),
        file_path: "C.java".into(),
        span: Span::new(1, 20),
        body_text: "class C {}".into(),
        annotations: Vec::new(),
    };
    let mut nodes = vec![class];
    let mut edges = Vec::new();
    for i in 0..n {
        let m = method("C", i);
        if rng.gen_bool(0.3) {
            edges.push(RelationEdge::new("C.java#C", m.id.clone(), EdgeKind::Define));
        }
        nodes.push(m);
    }
    for _ in 0..rng.gen_range(0..2 * n) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            edges.push(RelationEdge::new(method("C", a).id, method("C", b).id, EdgeKind::Call));
        }
    }
    CodeGraph::new("/tmp/random", nodes, edges, Vec::new()).unwrap()
}

#[test]
fn explore_matches_bfs_oracle_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let g = random_graph(&mut rng);
        let ids: Vec<String> = g.nodes().iter().map(|n| n.id.clone()).collect();
        let count = rng.gen_range(1..3);
        let seeds: Vec<&str> = ids.choose_multiple(&mut rng, count).map(String::as_str).collect();
        let depth = rng.gen_range(1..4);
        let mut shuffled = seeds.clone();
        shuffled.reverse();
        let a = explore::<f64>(&g, &ExplorationSeed::from_ids(seeds.clone()), depth, &BTreeSet::new()).unwrap();
        let b = explore::<f64>(&g, &ExplorationSeed::from_ids(shuffled), depth, &BTreeSet::new()).unwrap();
        assert_eq!(a, b);
        assert_eq!(common::bfs::split(&a), common::bfs::oracle(&g, &seeds, depth, &BTreeSet::new()));
    }
}

#[test]
fn overloaded_constructor_reached_from_reference_test() {
    let g = proj();
    let seeds = ExplorationSeed::from_ids([format!("{TEST}#ServerTest.void igniteTwice()")]);
    let facts = explore::<f64>(&g, &seeds, 2, &BTreeSet::new()).unwrap();
    let (nodes, _) = common::bfs::split(&facts);
    assert!(nodes.contains(&format!("{SERVER}#Server.Server(ThreadPool)")));
    let rendered: Vec<&str> = facts.iter().map(|f| f.rendered.as_str()).collect();
    assert!(rendered.contains(&"Server(ThreadPool) is an overload of Server()"));
}

#[test]
fn seeds_include_constructors_of_the_focal_type() {
    let g = proj();
    let focal = format!("{SERVER}#Server.Server create(ThreadPool, Handler)");
    let reference = format!("{TEST}#ServerTest.void igniteTwice()");
    let seeds = ExplorationSeed::new(&g, &focal, Some(&reference)).unwrap();
    let ids: Vec<&str> = seeds.ids().collect();
    assert_eq!(
        ids,
        vec![
            format!("{SERVER}#Server.Server create(ThreadPool, Handler)"),
            format!("{SERVER}#Server.Server()"),
            format!("{SERVER}#Server.Server(ThreadPool)"),
            reference.clone(),
        ]
    );
}

#[test]
fn isolated_seed_has_no_candidates() {
    let g = parse_project(&common::fixtures().join("proj"), &AdapterConfig::default()).unwrap();
    let lonely = CodeGraph::new(g.project_root(), vec![g.require(&format!("{SERVER}#Server")).unwrap().clone()], vec![], vec![]).unwrap();
    let facts = explore::<f64>(&lonely, &ExplorationSeed::from_ids([format!("{SERVER}#Server")]), 2, &BTreeSet::new()).unwrap();
    assert!(facts.is_empty());
}

#[test]
fn unknown_seed_is_rejected() {
    let g = proj();
    let err = explore::<f64>(&g, &ExplorationSeed::from_ids(["nope#x"]), 2, &BTreeSet::new()).unwrap_err();
    assert!(matches!(err, intentforge_core::Error::UnknownEntity(_)));
}

#[test]
fn render_templates() {
    let g = proj();
    let port = FactSubject::Node {
        id: format!("{SERVER}#Server.int port"),
    };
    assert_eq!(render_fact(&port, &g).unwrap(), "Field int port declared in Server.java");
    let size = FactSubject::Node {
        id: "src/main/java/demo/server/ThreadPool.java#ThreadPool.int size()".into(),
    };
    let text = render_fact(&size, &g).unwrap();
    let body = &g.require("src/main/java/demo/server/ThreadPool.java#ThreadPool.int size()").unwrap().body_text;
    assert_eq!(body.lines().count(), 3);
    for line in body.lines() {
        assert!(text.contains(line));
    }
}

fn desc() -> ValidationIntention {
    common::shop_intentions()[common::TOTAL_TEST].clone()
}

/// Every score recomputed from its definition; top-k by sort over all.
fn brute_force_top(
    candidates: &[CrucialFact],
    desc: &ValidationIntention,
    usages: &[intentforge_core::source::Usage],
    beta: f64,
    k: usize,
) -> Vec<String> {
    let emb = HashingEmbedder::new();
    let d = desc.render();
    let alignments: Vec<f64> = usages.iter().map(|u| semantic_sim(&emb, &d, &u.text).unwrap()).collect();
    let tokens = |text: &str| -> Vec<String> {
        text.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '$'))
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect()
    };
    let mut raw = vec![0.0; candidates.len()];
    for (u, a) in usages.iter().zip(&alignments) {
        let toks = tokens(&u.text);
        let counts: Vec<usize> = candidates.iter().map(|f| toks.iter().filter(|t| **t == f.anchor).count()).collect();
        let total: usize = counts.iter().sum();
        if total > 0 {
            for (r, c) in raw.iter_mut().zip(&counts) {
                *r += a * (*c as f64 / total as f64);
            }
        }
    }
    let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut scored: Vec<(f64, String)> = candidates
        .iter()
        .zip(&raw)
        .map(|(f, r)| {
            let occu = if hi > lo { (r - lo) / (hi - lo) } else { 0.0 };
            let sim = semantic_sim(&emb, &f.rendered, &d).unwrap();
            (beta * sim + (1.0 - beta) * occu, f.key())
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, key)| key).collect()
}

fn shop_candidates() -> (CodeGraph, Vec<CrucialFact>, Vec<intentforge_core::source::Usage>) {
    let g = common::shop();
    let seeds = ExplorationSeed::new(&g, common::TOTAL, Some(common::SUBTOTAL_TEST)).unwrap();
    let exclude: BTreeSet<String> = [common::TOTAL_TEST.to_string()].into();
    let candidates = explore::<f64>(&g, &seeds, 2, &exclude).unwrap();
    let usages = extract_usages(&g, common::TOTAL, &exclude).unwrap();
    (g, candidates, usages)
}

#[test]
fn top_k_matches_exhaustive_scoring() {
    let (_g, candidates, usages) = shop_candidates();
    assert!(candidates.len() >= 6, "only {} candidates", candidates.len());
    assert!(!usages.is_empty());
    let emb = HashingEmbedder::new();
    let top = rank_facts(candidates.clone(), &desc(), &usages, &emb, 0.5, 3).unwrap();
    assert_eq!(top.len(), 3);
    let keys: Vec<String> = top.iter().map(|f| f.key()).collect();
    assert_eq!(keys, brute_force_top(&candidates, &desc(), &usages, 0.5, 3));
    for f in &top {
        assert!((f.likelihood - (0.5 * f.sim + 0.5 * f.occu)).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&f.likelihood));
    }
}

#[test]
fn ranking_ignores_candidate_order() {
    let (_g, candidates, usages) = shop_candidates();
    let emb = HashingEmbedder::new();
    let base = rank_facts(candidates.clone(), &desc(), &usages, &emb, 0.5, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let mut shuffled = candidates.clone();
        shuffled.shuffle(&mut rng);
        assert_eq!(rank_facts(shuffled, &desc(), &usages, &emb, 0.5, 3).unwrap(), base);
    }
}

#[test]
fn relative_frequencies_sum_to_one_per_usage() {
    let (_g, candidates, usages) = shop_candidates();
    for u in &usages {
        let single = [u.clone()];
        let total: f64 = candidates.iter().map(|f| fact_occurrence(f, &single, &[1.0], &candidates)).sum();
        assert!(total == 0.0 || (total - 1.0).abs() < 1e-12, "usage {} sums to {total}", u.enclosing_method);
    }
}

#[test]
fn raw_scale_keeps_unnormalized_occurrence() {
    let facts: Vec<CrucialFact> = ["a", "b"]
        .iter()
        .map(|s| CrucialFact::unscored(FactSubject::Node { id: s.to_string() }, s.to_string(), s.to_string()))
        .collect();
    let counts = vec![vec![1, 1], vec![2, 0]];
    let raw = score_facts(facts.clone(), &[0.0, 0.0], &counts, &[1.0, 0.5], &0.5, OccurrenceScale::Raw);
    let a = raw.iter().find(|f| f.anchor == "a").unwrap();
    assert_eq!((a.occu_raw, a.occu), (1.0, 1.0));
    let norm = score_facts(facts, &[0.0, 0.0], &counts, &[1.0, 0.5], &0.5, OccurrenceScale::Normalized);
    let b = norm.iter().find(|f| f.anchor == "b").unwrap();
    assert_eq!((b.occu_raw, b.occu), (0.5, 0.0));
}
