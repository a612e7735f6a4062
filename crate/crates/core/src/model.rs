//! Project-wide data model: the code graph and the records that flow through
//! retrieval, discrimination, prompting and evaluation.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::trace::TraceEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityKind {
    Class,
    Interface,
    Method,
    Constructor,
    Field,
}

impl EntityKind {
    pub fn is_type(self) -> bool {
        matches!(self, EntityKind::Class | EntityKind::Interface)
    }

    pub fn is_callable(self) -> bool {
        matches!(self, EntityKind::Method | EntityKind::Constructor)
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            EntityKind::Class => "Class",
            EntityKind::Interface => "Interface",
            EntityKind::Method => "Method",
            EntityKind::Constructor => "Constructor",
            EntityKind::Field => "Field",
        };
        f.write_str(name)
    }
}

/// 1-based inclusive line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start_line: u32,
    pub end_line: u32,
}

impl Span {
    pub fn new(start_line: u32, end_line: u32) -> Self {
        Span {
            start_line,
            end_line,
        }
    }

    pub fn contains(&self, line: u32) -> bool {
        self.start_line <= line && line <= self.end_line
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityNode {
    pub id: String,
    pub kind: EntityKind,
    pub simple_name: String,
    /// `class Server`, `Server(ThreadPool)`, `Server ignite(int)`, `int port`.
    pub signature: String,
    /// Declaration header as written in source, whitespace-normalized.
    /// For fields this is the whole declaration statement.
    pub declaration: String,
    /// Project-relative path with `/` separators.
    pub file_path: String,
    pub span: Span,
    /// Full source text of methods, constructors and types; empty for fields
    /// and bodiless interface members.
    pub body_text: String,
    /// Annotation simple names without the `@`.
    pub annotations: Vec<String>,
}

impl EntityNode {
    pub fn has_annotation(&self, names: &[String]) -> bool {
        self.annotations.iter().any(|a| names.iter().any(|n| n == a))
    }

    /// Parameter types of a method/constructor signature, split on top-level commas.
    pub fn param_types(&self) -> Vec<String> {
        if !self.kind.is_callable() {
            return Vec::new();
        }
        split_params(&self.signature)
    }
}

pub(crate) fn split_params(signature: &str) -> Vec<String> {
    let Some(open) = signature.find('(') else {
        return Vec::new();
    };
    let Some(close) = signature.rfind(')') else {
        return Vec::new();
    };
    let inner = &signature[open + 1..close];
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut current = String::new();
    for ch in inner.chars() {
        match ch {
            '<' | '(' | '[' => {
                depth += 1;
                current.push(ch);
            }
            '>' | ')' | ']' => {
                depth -= 1;
                current.push(ch);
            }
            ',' if depth == 0 => {
                out.push(current.trim().to_string());
                current.clear();
            }
            _ => current.push(ch),
        }
    }
    if !current.trim().is_empty() {
        out.push(current.trim().to_string());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeKind {
    Define,
    Call,
    Param,
    Overload,
    Implement,
    Extend,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 6] = [
        EdgeKind::Define,
        EdgeKind::Call,
        EdgeKind::Param,
        EdgeKind::Overload,
        EdgeKind::Implement,
        EdgeKind::Extend,
    ];
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationEdge {
    pub src: String,
    pub dst: String,
    pub kind: EdgeKind,
}

impl RelationEdge {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, kind: EdgeKind) -> Self {
        RelationEdge {
            src: src.into(),
            dst: dst.into(),
            kind,
        }
    }
}

/// Per-file metadata the skeleton renderer needs but nodes do not carry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: String,
    pub package: Option<String>,
    pub imports: Vec<String>,
    pub is_test_source: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphRepr {
    project_root: PathBuf,
    nodes: Vec<EntityNode>,
    edges: Vec<RelationEdge>,
    #[serde(default)]
    files: Vec<SourceFile>,
}

/// Immutable, validated code graph of one project.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct CodeGraph {
    project_root: PathBuf,
    nodes: Vec<EntityNode>,
    edges: Vec<RelationEdge>,
    files: Vec<SourceFile>,
    by_id: HashMap<String, usize>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
}

impl PartialEq for CodeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.project_root == other.project_root
            && self.nodes == other.nodes
            && self.edges == other.edges
            && self.files == other.files
    }
}

impl TryFrom<GraphRepr> for CodeGraph {
    type Error = Error;

    fn try_from(repr: GraphRepr) -> Result<Self> {
        CodeGraph::new(repr.project_root, repr.nodes, repr.edges, repr.files)
    }
}

impl From<CodeGraph> for GraphRepr {
    fn from(graph: CodeGraph) -> Self {
        GraphRepr {
            project_root: graph.project_root,
            nodes: graph.nodes,
            edges: graph.edges,
            files: graph.files,
        }
    }
}

impl CodeGraph {
    /// Sorts, deduplicates and validates. Fails with `IndexIntegrity` on any
    /// invariant violation.
    pub fn new(
        project_root: impl Into<PathBuf>,
        mut nodes: Vec<EntityNode>,
        mut edges: Vec<RelationEdge>,
        mut files: Vec<SourceFile>,
    ) -> Result<Self> {
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        edges.sort();
        edges.dedup();
        files.sort();
        files.dedup();

        let mut by_id = HashMap::with_capacity(nodes.len());
        for (idx, node) in nodes.iter().enumerate() {
            if by_id.insert(node.id.clone(), idx).is_some() {
                return Err(Error::IndexIntegrity(format!("duplicate node id {}", node.id)));
            }
            if node.span.start_line > node.span.end_line {
                return Err(Error::IndexIntegrity(format!(
                    "node {} has start_line {} > end_line {}",
                    node.id, node.span.start_line, node.span.end_line
                )));
            }
        }

        let mut outgoing = vec![Vec::new(); nodes.len()];
        let mut incoming = vec![Vec::new(); nodes.len()];
        for (idx, edge) in edges.iter().enumerate() {
            let src = *by_id.get(&edge.src).ok_or_else(|| {
                Error::IndexIntegrity(format!("edge {:?} has unknown source {}", edge.kind, edge.src))
            })?;
            let dst = *by_id.get(&edge.dst).ok_or_else(|| {
                Error::IndexIntegrity(format!(
                    "edge {:?} has unknown destination {}",
                    edge.kind, edge.dst
                ))
            })?;
            check_edge_shape(edge, &nodes[src], &nodes[dst])?;
            outgoing[src].push(idx);
            incoming[dst].push(idx);
        }

        let graph = CodeGraph {
            project_root: project_root.into(),
            nodes,
            edges,
            files,
            by_id,
            outgoing,
            incoming,
        };
        graph.check_constructor_names()?;
        Ok(graph)
    }

    pub fn empty(project_root: impl Into<PathBuf>) -> Self {
        CodeGraph::new(project_root, Vec::new(), Vec::new(), Vec::new())
            .expect("empty graph is valid")
    }

    fn check_constructor_names(&self) -> Result<()> {
        for node in self.nodes.iter().filter(|n| n.kind == EntityKind::Constructor) {
            let owner = self
                .declaring_type(&node.id)
                .ok_or_else(|| Error::IndexIntegrity(format!("constructor {} has no declaring type", node.id)))?;
            if owner.simple_name != node.simple_name {
                return Err(Error::IndexIntegrity(format!(
                    "constructor {} does not match declaring type {}",
                    node.id, owner.simple_name
                )));
            }
        }
        Ok(())
    }

    pub fn project_root(&self) -> &std::path::Path {
        &self.project_root
    }

    pub fn nodes(&self) -> &[EntityNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RelationEdge] {
        &self.edges
    }

    pub fn files(&self) -> &[SourceFile] {
        &self.files
    }

    pub fn file(&self, path: &str) -> Option<&SourceFile> {
        self.files.iter().find(|f| f.path == path)
    }

    pub fn node(&self, id: &str) -> Option<&EntityNode> {
        self.by_id.get(id).map(|&idx| &self.nodes[idx])
    }

    pub fn require(&self, id: &str) -> Result<&EntityNode> {
        self.node(id)
            .ok_or_else(|| Error::UnknownEntity(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn outgoing(&self, id: &str) -> impl Iterator<Item = &RelationEdge> {
        let list = self.by_id.get(id).map(|&i| self.outgoing[i].as_slice()).unwrap_or(&[]);
        list.iter().map(move |&e| &self.edges[e])
    }

    pub fn incoming(&self, id: &str) -> impl Iterator<Item = &RelationEdge> {
        let list = self.by_id.get(id).map(|&i| self.incoming[i].as_slice()).unwrap_or(&[]);
        list.iter().map(move |&e| &self.edges[e])
    }

    /// Type that declares `id` through a `Define` edge.
    pub fn declaring_type(&self, id: &str) -> Option<&EntityNode> {
        self.incoming(id)
            .filter(|e| e.kind == EdgeKind::Define)
            .filter_map(|e| self.node(&e.src))
            .find(|n| n.kind.is_type())
    }

    pub fn nodes_in_file<'a>(&'a self, path: &'a str) -> impl Iterator<Item = &'a EntityNode> + 'a {
        self.nodes.iter().filter(move |n| n.file_path == path)
    }

    /// Incident edges of `node` restricted to `kinds`, paired with the far
    /// endpoint, sorted by `(edge, far id)`. A self-loop is reported once.
    pub fn neighbors(
        &self,
        node: &str,
        kinds: &[EdgeKind],
        direction: Direction,
    ) -> Result<Vec<(&RelationEdge, &EntityNode)>> {
        let idx = *self
            .by_id
            .get(node)
            .ok_or_else(|| Error::UnknownEntity(node.to_string()))?;
        let wanted: BTreeSet<EdgeKind> = kinds.iter().copied().collect();
        let mut edge_ids: BTreeSet<usize> = BTreeSet::new();
        if matches!(direction, Direction::Out | Direction::Both) {
            edge_ids.extend(self.outgoing[idx].iter().copied());
        }
        if matches!(direction, Direction::In | Direction::Both) {
            edge_ids.extend(self.incoming[idx].iter().copied());
        }
        let mut out: Vec<(&RelationEdge, &EntityNode)> = edge_ids
            .into_iter()
            .map(|e| &self.edges[e])
            .filter(|e| wanted.contains(&e.kind))
            .map(|e| {
                let far = if e.src == node { &e.dst } else { &e.src };
                (e, &self.nodes[self.by_id[far.as_str()]])
            })
            .collect();
        out.sort_by(|a, b| a.0.cmp(b.0).then_with(|| a.1.id.cmp(&b.1.id)));
        Ok(out)
    }
}

fn check_edge_shape(edge: &RelationEdge, src: &EntityNode, dst: &EntityNode) -> Result<()> {
    let bad = |why: &str| {
        Err(Error::IndexIntegrity(format!(
            "{:?} edge {} -> {}: {}",
            edge.kind, edge.src, edge.dst, why
        )))
    };
    match edge.kind {
        EdgeKind::Overload => {
            if !src.kind.is_callable() || !dst.kind.is_callable() {
                return bad("overload endpoints must be methods or constructors");
            }
            if src.simple_name != dst.simple_name {
                return bad("overload endpoints must share a simple name");
            }
            if src.signature == dst.signature {
                return bad("overload endpoints must have distinct signatures");
            }
        }
        EdgeKind::Implement => {
            if src.kind != EntityKind::Class || dst.kind != EntityKind::Interface {
                return bad("implement must connect a class to an interface");
            }
        }
        EdgeKind::Extend => {
            let ok = (src.kind == EntityKind::Class && dst.kind == EntityKind::Class)
                || (src.kind == EntityKind::Interface && dst.kind == EntityKind::Interface);
            if !ok {
                return bad("extend must connect class to class or interface to interface");
            }
        }
        EdgeKind::Define => {
            if !src.kind.is_type() {
                return bad("define must originate from a class or interface");
            }
        }
        EdgeKind::Call | EdgeKind::Param => {}
    }
    Ok(())
}

/// Structured validation-intention description. Only the objective is mandatory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIntention {
    pub objective: String,
    #[serde(default)]
    pub preconditions: Vec<String>,
    #[serde(default)]
    pub expected_results: Vec<String>,
}

impl ValidationIntention {
    pub fn new(
        objective: impl Into<String>,
        preconditions: Vec<String>,
        expected_results: Vec<String>,
    ) -> Result<Self> {
        let desc = ValidationIntention {
            objective: objective.into(),
            preconditions,
            expected_results,
        };
        desc.validate()?;
        Ok(desc)
    }

    pub fn objective_only(objective: impl Into<String>) -> Result<Self> {
        Self::new(objective, Vec::new(), Vec::new())
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.trim().is_empty() {
            return Err(Error::IndexIntegrity("intention objective is empty".into()));
        }
        Ok(())
    }

    /// Objective, then Preconditions, then Expected Results; empty optional
    /// sections are skipped.
    pub fn render(&self) -> String {
        self.render_filtered(true, true)
    }

    pub fn render_filtered(&self, preconditions: bool, expected_results: bool) -> String {
        let mut out = String::new();
        out.push_str("# Objective:\n");
        out.push_str(self.objective.trim());
        out.push('\n');
        if preconditions && !self.preconditions.is_empty() {
            out.push_str("# Preconditions:\n");
            push_numbered(&mut out, &self.preconditions);
        }
        if expected_results && !self.expected_results.is_empty() {
            out.push_str("# Expected Results:\n");
            push_numbered(&mut out, &self.expected_results);
        }
        while out.ends_with('\n') {
            out.pop();
        }
        out
    }
}

fn push_numbered(out: &mut String, items: &[String]) {
    for (i, item) in items.iter().enumerate() {
        out.push_str(&format!("{}. {}\n", i + 1, item.trim()));
    }
}

/// Historical (focal method, test, intention) triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodTestPair {
    pub focal: String,
    pub test: String,
    pub desc: ValidationIntention,
}

impl MethodTestPair {
    /// Total order used to break score ties.
    pub fn key(&self) -> (&str, &str) {
        (&self.test, &self.focal)
    }

    pub fn validate(&self, graph: &CodeGraph, test_annotations: &[String]) -> Result<()> {
        if self.focal == self.test {
            return Err(Error::IndexIntegrity(format!("pair focal equals test: {}", self.test)));
        }
        let focal = graph.node(&self.focal).ok_or_else(|| {
            Error::IndexIntegrity(format!("pair references unknown focal {}", self.focal))
        })?;
        if !focal.kind.is_callable() {
            return Err(Error::IndexIntegrity(format!("pair focal {} is not a method", self.focal)));
        }
        let test = graph.node(&self.test).ok_or_else(|| {
            Error::IndexIntegrity(format!("pair references unknown test {}", self.test))
        })?;
        if !test.has_annotation(test_annotations) {
            return Err(Error::IndexIntegrity(format!(
                "pair test {} carries no test annotation",
                self.test
            )));
        }
        self.desc.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FactSubject {
    Node { id: String },
    Edge { edge: RelationEdge },
}

impl FactSubject {
    /// Stable textual key used for deduplication and tie-breaking.
    pub fn key(&self) -> String {
        match self {
            FactSubject::Node { id } => format!("node:{id}"),
            FactSubject::Edge { edge } => {
                format!("edge:{}:{}->{}", edge.kind, edge.src, edge.dst)
            }
        }
    }

    /// Identifier counted in usages: the node itself, or an edge's destination.
    pub fn anchor_id(&self) -> &str {
        match self {
            FactSubject::Node { id } => id,
            FactSubject::Edge { edge } => &edge.dst,
        }
    }
}

/// A node or edge of the code graph, with its ranking scores once scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrucialFact<S> {
    pub subject: FactSubject,
    pub rendered: String,
    /// Simple name counted when measuring occurrence in usages.
    pub anchor: String,
    pub sim: S,
    pub occu_raw: S,
    pub occu: S,
    pub likelihood: S,
}

impl<S: Scalar> CrucialFact<S> {
    pub fn unscored(subject: FactSubject, rendered: String, anchor: String) -> Self {
        CrucialFact {
            subject,
            rendered,
            anchor,
            sim: S::zero(),
            occu_raw: S::zero(),
            occu: S::zero(),
            likelihood: S::zero(),
        }
    }

    pub fn key(&self) -> String {
        self.subject.key()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeStatus {
    CompilationFailure,
    ExecutionFailure,
    AssertionFailure,
    Pass,
}

impl OutcomeStatus {
    pub const ALL: [OutcomeStatus; 4] = [
        OutcomeStatus::CompilationFailure,
        OutcomeStatus::ExecutionFailure,
        OutcomeStatus::AssertionFailure,
        OutcomeStatus::Pass,
    ];
}

impl fmt::Display for OutcomeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutcome {
    pub focal: String,
    pub project: String,
    pub status: OutcomeStatus,
    pub test_text: String,
    pub outer_iterations: usize,
    /// Refinement rounds spent in the last outer iteration.
    pub refine_rounds: usize,
    pub trace: Vec<TraceEvent>,
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn node(id: &str, kind: EntityKind, name: &str, sig: &str) -> EntityNode {
        EntityNode {
            id: id.to_string(),
            kind,
            simple_name: name.to_string(),
            signature: sig.to_string(),
            declaration: sig.to_string(),
            file_path: "A.java".to_string(),
            span: Span::new(1, 1),
            body_text: String::new(),
            annotations: Vec::new(),
        }
    }

    fn diamond() -> CodeGraph {
        let nodes = vec![
            node("T", EntityKind::Class, "T", "class T"),
            node("A", EntityKind::Method, "a", "void a()"),
            node("B", EntityKind::Method, "f", "void f()"),
            node("C", EntityKind::Method, "f", "void f(int)"),
        ];
        let edges = vec![
            RelationEdge::new("T", "A", EdgeKind::Define),
            RelationEdge::new("T", "B", EdgeKind::Define),
            RelationEdge::new("T", "C", EdgeKind::Define),
            RelationEdge::new("A", "B", EdgeKind::Call),
            RelationEdge::new("A", "C", EdgeKind::Call),
            RelationEdge::new("C", "B", EdgeKind::Overload),
        ];
        CodeGraph::new("/p", nodes, edges, Vec::new()).unwrap()
    }

    #[test]
    fn neighbors_of_isolated_node_is_empty() {
        let g = CodeGraph::new(
            "/p",
            vec![node("X", EntityKind::Class, "X", "class X")],
            vec![],
            vec![],
        )
        .unwrap();
        assert!(g.neighbors("X", &EdgeKind::ALL, Direction::Both).unwrap().is_empty());
    }

    #[test]
    fn neighbors_single_call_edge() {
        let g = diamond();
        let out = g.neighbors("A", &[EdgeKind::Call], Direction::Out).unwrap();
        let ids: Vec<_> = out.iter().map(|(e, n)| (e.kind, n.id.as_str())).collect();
        assert_eq!(ids, vec![(EdgeKind::Call, "B"), (EdgeKind::Call, "C")]);
    }

    #[test]
    fn neighbors_diamond_matches_brute_force_scan() {
        let g = diamond();
        let kinds = [EdgeKind::Call, EdgeKind::Overload];
        let got = g.neighbors("B", &kinds, Direction::Both).unwrap();
        let expected: Vec<_> = g
            .edges()
            .iter()
            .filter(|e| kinds.contains(&e.kind) && (e.src == "B" || e.dst == "B"))
            .collect();
        assert_eq!(got.len(), 2);
        assert_eq!(got.len(), expected.len());
    }

    #[test]
    fn unknown_node_is_rejected() {
        let g = diamond();
        assert!(matches!(
            g.neighbors("nope", &EdgeKind::ALL, Direction::Both),
            Err(Error::UnknownEntity(_))
        ));
    }

    #[test]
    fn dangling_edge_is_integrity_error() {
        let err = CodeGraph::new(
            "/p",
            vec![node("X", EntityKind::Class, "X", "class X")],
            vec![RelationEdge::new("X", "Y", EdgeKind::Call)],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, Error::IndexIntegrity(_)));
    }

    #[test]
    fn overload_requires_distinct_signatures() {
        let err = CodeGraph::new(
            "/p",
            vec![
                node("T", EntityKind::Class, "T", "class T"),
                node("P", EntityKind::Method, "f", "void f()"),
                node("Q", EntityKind::Method, "f", "void f()"),
            ],
            vec![RelationEdge::new("P", "Q", EdgeKind::Overload)],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, Error::IndexIntegrity(_)));
    }

    #[test]
    fn params_split_on_top_level_commas() {
        assert_eq!(
            split_params("void f(Map<String, List<Integer>> m, int x)"),
            vec!["Map<String, List<Integer>> m", "int x"]
        );
        assert!(split_params("void f()").is_empty());
    }

    #[test]
    fn intention_renders_in_fixed_order() {
        let d = ValidationIntention::new(
            "Tests creating a server",
            vec!["A pool exists".into()],
            vec!["Server starts".into(), "Port is bound".into()],
        )
        .unwrap();
        assert_eq!(
            d.render(),
            "# Objective:\nTests creating a server\n# Preconditions:\n1. A pool exists\n# Expected Results:\n1. Server starts\n2. Port is bound"
        );
        assert_eq!(d.render_filtered(false, true).matches("# ").count(), 2);
    }

    #[test]
    fn empty_objective_is_rejected() {
        assert!(ValidationIntention::objective_only("  ").is_err());
    }
}
