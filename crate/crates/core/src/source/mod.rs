//! Builds a [`CodeGraph`] from Java sources, discovers tests, pairs them with
//! focal methods, extracts focal-method usages and renders file skeletons.

mod java;
mod resolve;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::model::{
    CodeGraph, EdgeKind, EntityKind, EntityNode, MethodTestPair, RelationEdge, SourceFile, ValidationIntention,
};

pub(crate) use java::{call_sites, CallSite};
pub(crate) use resolve::Resolver;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterConfig {
    pub source_dirs: Vec<String>,
    pub test_dirs: Vec<String>,
    pub file_extensions: Vec<String>,
    pub test_annotations: Vec<String>,
    pub assertion_name_prefixes: Vec<String>,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        AdapterConfig {
            source_dirs: vec!["src/main/java".into()],
            test_dirs: vec!["src/test/java".into()],
            file_extensions: vec![".java".into()],
            test_annotations: vec!["Test".into()],
            assertion_name_prefixes: vec!["assert".into(), "verify".into(), "fail".into()],
        }
    }
}

impl AdapterConfig {
    fn has_extension(&self, path: &Path) -> bool {
        let name = path.to_string_lossy();
        self.file_extensions.iter().any(|ext| name.ends_with(ext.as_str()))
    }
}

fn relative(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// `(absolute path, relative path, is test source)` for every source file.
/// When none of the configured directories exist the whole root is scanned
/// and files under a `test` directory count as test sources.
fn source_files(root: &Path, config: &AdapterConfig) -> Vec<(PathBuf, String, bool)> {
    let mut found: BTreeMap<String, (PathBuf, bool)> = BTreeMap::new();
    let mut walk = |dir: &Path, is_test: Option<bool>| {
        for entry in WalkDir::new(dir).sort_by_file_name().into_iter().filter_map(|e| e.ok()) {
            if !entry.file_type().is_file() || !config.has_extension(entry.path()) {
                continue;
            }
            let rel = relative(root, entry.path());
            let test = is_test.unwrap_or_else(|| rel.split('/').any(|c| c == "test"));
            let slot = found.entry(rel).or_insert((entry.path().to_path_buf(), test));
            slot.1 |= test;
        }
    };
    let configured: Vec<(PathBuf, bool)> = config
        .source_dirs
        .iter()
        .map(|d| (root.join(d), false))
        .chain(config.test_dirs.iter().map(|d| (root.join(d), true)))
        .filter(|(d, _)| d.is_dir())
        .collect();
    if configured.is_empty() {
        walk(root, None);
    } else {
        for (dir, is_test) in configured {
            walk(&dir, Some(is_test));
        }
    }
    found
        .into_iter()
        .map(|(rel, (abs, test))| (abs, rel, test))
        .collect()
}

pub fn parse_project(root: &Path, config: &AdapterConfig) -> Result<CodeGraph> {
    let root_abs = root.canonicalize().unwrap_or_else(|_| root.to_path_buf());
    let files = source_files(&root_abs, config);
    let parsed: Vec<java::ParsedFile> = files
        .par_iter()
        .filter_map(|(abs, rel, is_test)| match std::fs::read_to_string(abs) {
            Ok(text) => java::parse_file(rel, &text, *is_test),
            Err(e) => {
                log::warn!("skipping unreadable file {}: {e}", abs.display());
                None
            }
        })
        .collect();
    if parsed.is_empty() || parsed.iter().all(|f| f.nodes.is_empty()) {
        return Err(Error::EmptyProject(root.to_path_buf()));
    }

    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut sources = Vec::new();
    let mut supers = Vec::new();
    for f in parsed {
        nodes.extend(f.nodes);
        edges.extend(f.defines);
        sources.push(f.file);
        supers.extend(f.supers);
    }

    let kind_of: HashMap<String, EntityKind> = nodes.iter().map(|n| (n.id.clone(), n.kind)).collect();
    let file_of: HashMap<String, String> =
        nodes.iter().map(|n| (n.id.clone(), n.file_path.clone())).collect();

    let mut type_edges = Vec::new();
    {
        let resolver = Resolver::new(&nodes, &edges, &sources);
        for s in &supers {
            let src_kind = kind_of[&s.type_id];
            for target in resolver.resolve_type(&s.name, &file_of[&s.type_id]) {
                let dst_kind = kind_of[target];
                let ok = match s.kind {
                    EdgeKind::Implement => dst_kind == EntityKind::Interface,
                    _ => src_kind == dst_kind,
                };
                if ok && target != s.type_id {
                    type_edges.push(RelationEdge::new(s.type_id.clone(), target, s.kind));
                }
            }
        }
        for n in nodes.iter().filter(|n| n.kind.is_callable()) {
            for p in n.param_types() {
                for target in resolver.resolve_type(&p, &n.file_path) {
                    type_edges.push(RelationEdge::new(n.id.clone(), target, EdgeKind::Param));
                }
            }
        }
    }
    edges.extend(type_edges);

    let call_edges: Vec<RelationEdge> = {
        let resolver = Resolver::new(&nodes, &edges, &sources);
        nodes
            .par_iter()
            .filter(|n| n.kind.is_callable())
            .flat_map_iter(|n| {
                call_sites(&n.body_text, &config.assertion_name_prefixes)
                    .iter()
                    .flat_map(|site| resolver.resolve_call(&n.id, site))
                    .map(|callee| RelationEdge::new(n.id.clone(), callee, EdgeKind::Call))
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    edges.extend(call_edges);
    edges.extend(overload_edges(&nodes, &edges));

    CodeGraph::new(root_abs, nodes, edges, sources)
}

/// One edge per pair of same-kind callables sharing a declaring type and a
/// simple name, from the later declaration to the earlier one.
fn overload_edges(nodes: &[EntityNode], edges: &[RelationEdge]) -> Vec<RelationEdge> {
    let by_id: HashMap<&str, &EntityNode> = nodes.iter().map(|n| (n.id.as_str(), n)).collect();
    let mut groups: BTreeMap<(&str, EntityKind, &str), Vec<&EntityNode>> = BTreeMap::new();
    for e in edges.iter().filter(|e| e.kind == EdgeKind::Define) {
        let Some(member) = by_id.get(e.dst.as_str()) else {
            continue;
        };
        if member.kind.is_callable() {
            groups
                .entry((e.src.as_str(), member.kind, member.simple_name.as_str()))
                .or_default()
                .push(member);
        }
    }
    let mut out = Vec::new();
    for mut group in groups.into_values() {
        group.sort_by(|a, b| (a.span, &a.id).cmp(&(b.span, &b.id)));
        for (j, later) in group.iter().enumerate() {
            for earlier in &group[..j] {
                out.push(RelationEdge::new(later.id.clone(), earlier.id.clone(), EdgeKind::Overload));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub node: String,
    pub class_file: String,
    pub framework_version: String,
}

/// Framework version used when imports do not reveal one.
pub const DEFAULT_FRAMEWORK_VERSION: &str = "5";

/// JUnit major version implied by a file's imports.
pub fn detect_framework_version(file: &SourceFile) -> Option<String> {
    let has = |needle: &str| file.imports.iter().any(|i| i.contains(needle));
    if has("org.junit.jupiter") {
        Some("5".into())
    } else if has("org.junit.") {
        Some("4".into())
    } else if has("junit.framework") {
        Some("3".into())
    } else {
        None
    }
}

pub fn discover_tests(graph: &CodeGraph, config: &AdapterConfig) -> Vec<TestCase> {
    let mut out: Vec<TestCase> = graph
        .nodes()
        .iter()
        .filter(|n| n.kind == EntityKind::Method && n.has_annotation(&config.test_annotations))
        .map(|n| TestCase {
            node: n.id.clone(),
            class_file: n.file_path.clone(),
            framework_version: graph
                .file(&n.file_path)
                .and_then(detect_framework_version)
                .unwrap_or_else(|| DEFAULT_FRAMEWORK_VERSION.to_string()),
        })
        .collect();
    out.sort_by(|a, b| a.node.cmp(&b.node));
    out
}

/// Outermost type enclosing `id` (or `id` itself when it is a top-level type).
fn outermost_type<'g>(graph: &'g CodeGraph, id: &str) -> Option<&'g EntityNode> {
    let mut current = graph.node(id)?;
    if !current.kind.is_type() {
        current = graph.declaring_type(id)?;
    }
    while let Some(outer) = graph.declaring_type(&current.id) {
        current = outer;
    }
    Some(current)
}

/// Callables outside test sources and outside any type that holds tests.
pub fn is_production(graph: &CodeGraph, id: &str, config: &AdapterConfig) -> bool {
    let Some(node) = graph.node(id) else {
        return false;
    };
    if !node.kind.is_callable() {
        return false;
    }
    if graph.file(&node.file_path).is_some_and(|f| f.is_test_source) {
        return false;
    }
    let Some(top) = outermost_type(graph, id) else {
        return true;
    };
    !graph.nodes().iter().any(|n| {
        n.kind == EntityKind::Method
            && n.file_path == top.file_path
            && n.has_annotation(&config.test_annotations)
            && outermost_type(graph, &n.id).is_some_and(|t| t.id == top.id)
    })
}

/// Test name reduced for matching against method names: `test`/`should`
/// prefixes and `Test` suffixes dropped, cut at the first underscore,
/// lowercased.
pub fn focal_name_hint(test_name: &str) -> String {
    let mut name = test_name;
    for prefix in ["test_", "test", "Test", "should"] {
        if let Some(rest) = name.strip_prefix(prefix) {
            if !rest.is_empty() {
                name = rest;
                break;
            }
        }
    }
    for suffix in ["_test", "Test"] {
        if let Some(rest) = name.strip_suffix(suffix) {
            if !rest.is_empty() {
                name = rest;
            }
        }
    }
    let head = name.split('_').find(|p| !p.is_empty()).unwrap_or(name);
    head.to_lowercase()
}

/// Resolved in-project call targets of `caller`, in call completion order.
fn resolved_calls(graph: &CodeGraph, caller: &EntityNode, config: &AdapterConfig) -> Vec<(CallSite, Vec<String>)> {
    let resolver = Resolver::new(graph.nodes(), graph.edges(), graph.files());
    call_sites(&caller.body_text, &config.assertion_name_prefixes)
        .into_iter()
        .map(|site| {
            let targets = resolver
                .resolve_call(&caller.id, &site)
                .into_iter()
                .map(str::to_string)
                .collect();
            (site, targets)
        })
        .collect()
}

/// Heuristic focal method of a test:
/// 1. the unique production method named like the test (narrowed to the
///    ones the test calls when the name is overloaded);
/// 2. the last production method called outside assertions;
/// 3. the production method called most often.
pub fn pair_focal(graph: &CodeGraph, test: &TestCase, config: &AdapterConfig) -> Option<String> {
    let test_node = graph.node(&test.node)?;
    let calls = resolved_calls(graph, test_node, config);
    let production = |id: &str| is_production(graph, id, config);

    let hint = focal_name_hint(&test_node.simple_name);
    let named: Vec<&EntityNode> = graph
        .nodes()
        .iter()
        .filter(|n| n.simple_name.to_lowercase() == hint && production(&n.id))
        .collect();
    let called: BTreeSet<&str> = calls
        .iter()
        .flat_map(|(_, targets)| targets.iter().map(String::as_str))
        .collect();
    match named.as_slice() {
        [only] => return Some(only.id.clone()),
        [] => {}
        many => {
            let narrowed: Vec<_> = many.iter().filter(|n| called.contains(n.id.as_str())).collect();
            if let [only] = narrowed.as_slice() {
                return Some(only.id.clone());
            }
        }
    }

    for (site, targets) in calls.iter().rev() {
        if site.assertion {
            continue;
        }
        if let Some(t) = targets.iter().find(|t| production(t)) {
            return Some(t.clone());
        }
    }

    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, targets) in &calls {
        for t in targets.iter().filter(|t| production(t)) {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    freq.into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(id, _)| id.to_string())
}

/// Stand-in intention for a pair nobody has described yet.
pub fn placeholder_intention(graph: &CodeGraph, focal: &str, test: &str) -> ValidationIntention {
    let name = |id: &str| graph.node(id).map_or(id.to_string(), |n| n.simple_name.clone());
    ValidationIntention {
        objective: format!("{PLACEHOLDER_MARK} `{}` exercised by `{}`.", name(focal), name(test)),
        preconditions: Vec::new(),
        expected_results: Vec::new(),
    }
}

const PLACEHOLDER_MARK: &str = "Check the behaviour of";

pub fn is_placeholder_intention(desc: &ValidationIntention) -> bool {
    desc.objective.starts_with(PLACEHOLDER_MARK) && desc.preconditions.is_empty() && desc.expected_results.is_empty()
}

/// One pair per discovered test that has a focal method. Intentions come
/// from `intentions` (keyed by test id) or are placeholders.
pub fn mine_pairs(
    graph: &CodeGraph,
    config: &AdapterConfig,
    intentions: &BTreeMap<String, ValidationIntention>,
) -> Vec<MethodTestPair> {
    discover_tests(graph, config)
        .iter()
        .filter_map(|t| {
            let focal = pair_focal(graph, t, config)?;
            let desc = intentions
                .get(&t.node)
                .cloned()
                .unwrap_or_else(|| placeholder_intention(graph, &focal, &t.node));
            Some(MethodTestPair {
                focal,
                test: t.node.clone(),
                desc,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub enclosing_method: String,
    pub text: String,
    pub call_count: usize,
}

/// Every method or constructor whose body calls `focal`, except `focal`
/// itself and anything in `exclude`, sorted by id.
pub fn extract_usages(graph: &CodeGraph, focal: &str, exclude: &BTreeSet<String>) -> Result<Vec<Usage>> {
    graph.require(focal)?;
    let resolver = Resolver::new(graph.nodes(), graph.edges(), graph.files());
    let callers: BTreeSet<&str> = graph
        .incoming(focal)
        .filter(|e| e.kind == EdgeKind::Call)
        .map(|e| e.src.as_str())
        .filter(|src| *src != focal && !exclude.contains(*src))
        .collect();
    Ok(callers
        .into_iter()
        .filter_map(|id| graph.node(id))
        .map(|caller| {
            let count = call_sites(&caller.body_text, &[])
                .iter()
                .filter(|site| resolver.resolve_call(&caller.id, site).contains(&focal))
                .count();
            Usage {
                enclosing_method: caller.id.clone(),
                text: caller.body_text.clone(),
                call_count: count.max(1),
            }
        })
        .collect())
}

/// Package, imports, and type declarations of `file` with member bodies
/// elided to `{ ... }`, in source order.
pub fn file_skeleton(graph: &CodeGraph, file: &str) -> Result<String> {
    let meta = graph
        .file(file)
        .ok_or_else(|| Error::UnknownEntity(file.to_string()))?;
    let mut out = String::new();
    if let Some(pkg) = &meta.package {
        out.push_str(&format!("package {pkg};\n\n"));
    }
    if !meta.imports.is_empty() {
        for imp in &meta.imports {
            out.push_str(imp);
            out.push('\n');
        }
        out.push('\n');
    }
    let mut top: Vec<&EntityNode> = graph
        .nodes_in_file(file)
        .filter(|n| n.kind.is_type() && graph.declaring_type(&n.id).is_none())
        .collect();
    top.sort_by(|a, b| (a.span, &a.id).cmp(&(b.span, &b.id)));
    for (i, ty) in top.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        render_type(graph, ty, 0, &mut out);
    }
    Ok(out)
}

fn render_type(graph: &CodeGraph, ty: &EntityNode, depth: usize, out: &mut String) {
    let indent = "    ".repeat(depth);
    let mut members: Vec<&EntityNode> = graph
        .outgoing(&ty.id)
        .filter(|e| e.kind == EdgeKind::Define)
        .filter_map(|e| graph.node(&e.dst))
        .collect();
    members.sort_by(|a, b| (a.span, &a.id).cmp(&(b.span, &b.id)));
    if members.is_empty() {
        out.push_str(&format!("{indent}{} {{ }}\n", ty.declaration));
        return;
    }
    out.push_str(&format!("{indent}{} {{\n", ty.declaration));
    let inner = "    ".repeat(depth + 1);
    let mut last_field: Option<(crate::model::Span, &str)> = None;
    for m in members {
        match m.kind {
            EntityKind::Class | EntityKind::Interface => render_type(graph, m, depth + 1, out),
            EntityKind::Field => {
                let key = (m.span, m.declaration.as_str());
                if last_field != Some(key) {
                    out.push_str(&format!("{inner}{}\n", m.declaration));
                    last_field = Some(key);
                }
            }
            EntityKind::Method | EntityKind::Constructor => {
                if m.body_text.is_empty() {
                    out.push_str(&format!("{inner}{};\n", m.declaration));
                } else {
                    out.push_str(&format!("{inner}{} {{ ... }}\n", m.declaration));
                }
            }
        }
    }
    out.push_str(&format!("{indent}}}\n"));
}
