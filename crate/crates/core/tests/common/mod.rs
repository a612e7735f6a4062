#![allow(dead_code)]

use std::path::PathBuf;

pub mod bfs;
pub mod prompts;
pub mod scenario;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Reads the hand-enumerated graph oracle: sorted `node Kind id` and
/// `edge Kind src -> dst` lines.
pub fn expected_graph(name: &str) -> (Vec<String>, Vec<String>) {
    let text = std::fs::read_to_string(fixtures().join(name)).unwrap();
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        if let Some(rest) = line.strip_prefix("node ") {
            nodes.push(rest.to_string());
        } else if let Some(rest) = line.strip_prefix("edge ") {
            edges.push(rest.to_string());
        }
    }
    nodes.sort();
    edges.sort();
    (nodes, edges)
}

pub fn actual_graph(graph: &intentforge_core::CodeGraph) -> (Vec<String>, Vec<String>) {
    let mut nodes: Vec<String> = graph
        .nodes()
        .iter()
        .map(|n| format!("{} {}", n.kind, n.id))
        .collect();
    let mut edges: Vec<String> = graph
        .edges()
        .iter()
        .map(|e| format!("{} {} -> {}", e.kind, e.src, e.dst))
        .collect();
    nodes.sort();
    edges.sort();
    (nodes, edges)
}

pub const CART: &str = "src/main/java/shop/Cart.java";
pub const TOTAL: &str = "src/main/java/shop/Cart.java#Cart.Money total()";
pub const TOTAL_TEST: &str = "src/test/java/shop/CartTest.java#CartTest.void total_sumsSubtotals()";
pub const SUBTOTAL_TEST: &str = "src/test/java/shop/ItemTest.java#ItemTest.void subtotal_multipliesPriceByQuantity()";

pub fn shop_at(root: &std::path::Path) -> intentforge_core::CodeGraph {
    intentforge_core::source::parse_project(root, &intentforge_core::source::AdapterConfig::default()).unwrap()
}

pub fn shop() -> intentforge_core::CodeGraph {
    shop_at(&fixtures().join("shop"))
}

pub fn shop_intentions() -> std::collections::BTreeMap<String, intentforge_core::ValidationIntention> {
    let text = std::fs::read_to_string(fixtures().join("shop.intentions.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn shop_pairs(graph: &intentforge_core::CodeGraph) -> Vec<intentforge_core::MethodTestPair> {
    intentforge_core::source::mine_pairs(
        graph,
        &intentforge_core::source::AdapterConfig::default(),
        &shop_intentions(),
    )
}

/// Compares against `fixtures/prompts/<name>`; `UPDATE_GOLDEN=1` rewrites it.
pub fn check_golden(name: &str, actual: &str) {
    let path = fixtures().join("prompts").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing golden {}: {e}", path.display()));
    assert!(expected == actual, "golden {name} differs:\n--- expected\n{expected}\n--- actual\n{actual}");
}

/// Answers requests in order from a fixed script, keeping what was asked.
pub struct Scripted {
    answers: std::sync::Mutex<std::collections::VecDeque<String>>,
    pub requests: std::sync::Mutex<Vec<intentforge_core::llm::CompletionRequest>>,
}

impl Scripted {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(answers: I) -> Self {
        Scripted {
            answers: std::sync::Mutex::new(answers.into_iter().map(Into::into).collect()),
            requests: std::sync::Mutex::new(Vec::new()),
        }
    }

    pub fn asked(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

impl intentforge_core::llm::CompletionProvider for Scripted {
    fn complete(&self, req: &intentforge_core::llm::CompletionRequest) -> intentforge_core::Result<String> {
        self.requests.lock().unwrap().push(req.clone());
        self.answers
            .lock()
            .unwrap()
            .pop_front()
            .ok_or_else(|| intentforge_core::Error::Provider("script exhausted".into()))
    }
}

/// A scratch copy of a fixture project, for tests that let the runner write into it.
pub fn copy_fixture(name: &str) -> tempfile::TempDir {
    let src = fixtures().join(name);
    let dir = tempfile::tempdir().unwrap();
    for entry in walkdir::WalkDir::new(&src) {
        let entry = entry.unwrap();
        let rel = entry.path().strip_prefix(&src).unwrap();
        let dst = dir.path().join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&dst).unwrap();
        } else {
            std::fs::copy(entry.path(), &dst).unwrap();
        }
    }
    dir
}

/// Every file under `root` with its contents, for before/after comparisons.
pub fn snapshot(root: &std::path::Path) -> std::collections::BTreeMap<PathBuf, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .into_iter()
        .map(|e| e.unwrap())
        .map(|e| {
            let bytes = if e.file_type().is_file() { std::fs::read(e.path()).unwrap() } else { Vec::new() };
            (e.path().strip_prefix(root).unwrap().to_path_buf(), bytes)
        })
        .collect()
}
