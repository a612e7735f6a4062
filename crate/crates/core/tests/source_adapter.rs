mod common;

use std::collections::BTreeSet;

use intentforge_core::source::{
    discover_tests, extract_usages, file_skeleton, pair_focal, parse_project, AdapterConfig, TestCase,
};
use intentforge_core::{EdgeKind, Error};

const SERVER: &str = "src/main/java/demo/server/Server.java";
const TEST: &str = "src/test/java/demo/server/ServerTest.java";

fn proj() -> intentforge_core::CodeGraph {
    parse_project(&common::fixtures().join("proj"), &AdapterConfig::default()).unwrap()
}

#[test]
fn fixture_graph_matches_hand_enumeration() {
    let (nodes, edges) = common::actual_graph(&proj());
    let (want_nodes, want_edges) = common::expected_graph("proj.expected");
    assert_eq!(nodes, want_nodes);
    assert_eq!(edges, want_edges);
}

#[test]
fn parsing_is_deterministic() {
    assert_eq!(proj(), proj());
}

#[test]
fn two_constructors_give_one_overload_edge() {
    let g = proj();
    let overloads: Vec<_> = g.edges().iter().filter(|e| e.kind == EdgeKind::Overload).collect();
    assert_eq!(overloads.len(), 1);
    assert_eq!(overloads[0].src, format!("{SERVER}#Server.Server(ThreadPool)"));
    assert_eq!(overloads[0].dst, format!("{SERVER}#Server.Server()"));
}

#[test]
fn single_class_single_method() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("A.java"), "class A {\n  void f() {}\n}\n").unwrap();
    let g = parse_project(dir.path(), &AdapterConfig::default()).unwrap();
    assert_eq!(g.nodes().len(), 2);
    assert_eq!(g.edges().len(), 1);
    assert_eq!(g.edges()[0].kind, EdgeKind::Define);
}

#[test]
fn empty_directory_is_empty_project() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        parse_project(dir.path(), &AdapterConfig::default()),
        Err(Error::EmptyProject(_))
    ));
}

#[test]
fn discovers_annotated_tests_only() {
    let g = proj();
    let tests = discover_tests(&g, &AdapterConfig::default());
    let ids: Vec<_> = tests.iter().map(|t| t.node.as_str()).collect();
    assert_eq!(
        ids,
        vec![
            format!("{TEST}#ServerTest.void create_withThreadPool()"),
            format!("{TEST}#ServerTest.void igniteTwice()"),
        ]
    );
    assert!(tests.iter().all(|t| t.framework_version == "4"));
}

#[test]
fn no_annotated_methods_gives_no_tests() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("A.java"), "class A { void f() {} }").unwrap();
    let g = parse_project(dir.path(), &AdapterConfig::default()).unwrap();
    assert!(discover_tests(&g, &AdapterConfig::default()).is_empty());
}

fn test_case(g: &intentforge_core::CodeGraph, name: &str) -> TestCase {
    discover_tests(g, &AdapterConfig::default())
        .into_iter()
        .find(|t| t.node.contains(name))
        .unwrap()
}

#[test]
fn name_rule_wins_over_last_call() {
    // The last non-assertion call is ignite(6758); the name points at create.
    let g = proj();
    let t = test_case(&g, "create_withThreadPool");
    assert_eq!(
        pair_focal(&g, &t, &AdapterConfig::default()).as_deref(),
        Some(format!("{SERVER}#Server.Server create(ThreadPool, Handler)").as_str())
    );
}

#[test]
fn last_call_rule_applies_without_name_match() {
    let g = proj();
    let t = test_case(&g, "igniteTwice");
    let cfg = AdapterConfig::default();
    let focal = pair_focal(&g, &t, &cfg);
    assert_eq!(focal.as_deref(), Some(format!("{SERVER}#Server.int ignite(int)").as_str()));
    assert_eq!(pair_focal(&g, &t, &cfg), focal);
}

#[test]
fn test_without_project_calls_has_no_focal() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("T.java"),
        "class T {\n  @Test\n  void nothing() {\n    assertTrue(Math.abs(-1) == 1);\n  }\n}\n",
    )
    .unwrap();
    let g = parse_project(dir.path(), &AdapterConfig::default()).unwrap();
    let t = discover_tests(&g, &AdapterConfig::default()).remove(0);
    assert_eq!(pair_focal(&g, &t, &AdapterConfig::default()), None);
}

#[test]
fn usages_count_call_sites_per_caller() {
    let g = proj();
    let ignite = format!("{SERVER}#Server.int ignite(int)");
    let usages = extract_usages(&g, &ignite, &BTreeSet::new()).unwrap();
    let got: Vec<_> = usages
        .iter()
        .map(|u| (u.enclosing_method.rsplit('#').next().unwrap(), u.call_count))
        .collect();
    assert_eq!(
        got,
        vec![
            ("TlsServer.void handle(String)", 1),
            ("ServerTest.void create_withThreadPool()", 1),
            ("ServerTest.void igniteTwice()", 3),
        ]
    );
}

#[test]
fn usages_match_brute_force_call_edge_scan() {
    let g = proj();
    for focal in g.nodes().iter().filter(|n| n.kind.is_callable()) {
        let mut expected: Vec<&str> = g
            .edges()
            .iter()
            .filter(|e| e.kind == EdgeKind::Call && e.dst == focal.id && e.src != focal.id)
            .map(|e| e.src.as_str())
            .collect();
        expected.sort();
        let got = extract_usages(&g, &focal.id, &BTreeSet::new()).unwrap();
        let got: Vec<&str> = got.iter().map(|u| u.enclosing_method.as_str()).collect();
        assert_eq!(got, expected, "{}", focal.id);
    }
}

#[test]
fn excluded_callers_are_dropped() {
    let g = proj();
    let create = format!("{SERVER}#Server.Server create(ThreadPool, Handler)");
    let only = format!("{TEST}#ServerTest.void create_withThreadPool()");
    assert_eq!(extract_usages(&g, &create, &BTreeSet::new()).unwrap().len(), 1);
    let exclude: BTreeSet<String> = [only].into_iter().collect();
    assert!(extract_usages(&g, &create, &exclude).unwrap().is_empty());
}

#[test]
fn never_called_focal_has_no_usages() {
    let g = proj();
    let size = "src/main/java/demo/server/ThreadPool.java#ThreadPool.int size()";
    assert!(extract_usages(&g, size, &BTreeSet::new()).unwrap().is_empty());
}

#[test]
fn skeleton_matches_golden() {
    let g = proj();
    let got = file_skeleton(&g, SERVER).unwrap();
    let golden = common::fixtures().join("skeletons/Server.java.txt");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden.parent().unwrap()).unwrap();
        std::fs::write(&golden, &got).unwrap();
    }
    assert_eq!(got, std::fs::read_to_string(&golden).unwrap());
    assert!(got.contains("public static Server create(ThreadPool pool, Handler handler) { ... }"));
    assert!(!got.contains("server.register(handler)"));
    assert_eq!(got.matches("{ ... }").count(), 7);
}

#[test]
fn empty_class_skeleton() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("E.java"), "public class E {\n}\n").unwrap();
    let g = parse_project(dir.path(), &AdapterConfig::default()).unwrap();
    assert_eq!(file_skeleton(&g, "E.java").unwrap(), "public class E { }\n");
}

#[test]
fn unknown_file_skeleton_is_an_error() {
    let g = proj();
    assert!(matches!(file_skeleton(&g, "Nope.java"), Err(Error::UnknownEntity(_))));
}
