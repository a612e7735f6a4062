//! Java front end over tree-sitter: declarations, inheritance clauses and
//! call sites.

use tree_sitter::{Node, Parser, Tree};

use crate::model::{EdgeKind, EntityKind, EntityNode, RelationEdge, SourceFile, Span};

/// Unresolved supertype reference of a declared type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct SuperRef {
    pub type_id: String,
    pub name: String,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone)]
pub(crate) struct ParsedFile {
    pub file: SourceFile,
    pub nodes: Vec<EntityNode>,
    pub defines: Vec<RelationEdge>,
    pub supers: Vec<SuperRef>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Qualifier {
    None,
    This,
    Super,
    Name(String),
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum CallKind {
    Method { name: String, qualifier: Qualifier },
    New { type_name: String },
    ThisCtor,
    SuperCtor,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct CallSite {
    pub kind: CallKind,
    pub arity: usize,
    /// Byte offset where the call expression ends; calls complete in this order.
    pub end: usize,
    /// True for assertion calls and calls chained onto them (`verify(m).f()`).
    pub assertion: bool,
}

fn parser() -> Parser {
    let mut p = Parser::new();
    p.set_language(&tree_sitter_java::LANGUAGE.into())
        .expect("tree-sitter-java grammar is compatible with the runtime");
    p
}

fn parse(text: &str) -> Option<Tree> {
    parser().parse(text, None)
}

fn text<'a>(node: Node<'_>, src: &'a str) -> &'a str {
    &src[node.byte_range()]
}

pub(crate) fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_comment(node: Node<'_>) -> bool {
    matches!(node.kind(), "line_comment" | "block_comment")
}

fn named_children<'t>(node: Node<'t>) -> Vec<Node<'t>> {
    let mut cursor = node.walk();
    node.named_children(&mut cursor)
        .filter(|c| !is_comment(*c))
        .collect()
}

fn span_of(node: Node<'_>) -> Span {
    Span::new(
        node.start_position().row as u32 + 1,
        node.end_position().row as u32 + 1,
    )
}

/// Source text of `node` with continuation lines dedented by the node's
/// starting column.
fn dedented(node: Node<'_>, src: &str) -> String {
    let col = node.start_position().column;
    let raw = text(node, src);
    let mut out = String::with_capacity(raw.len());
    for (i, line) in raw.split('\n').enumerate() {
        if i > 0 {
            out.push('\n');
            let strip = line
                .char_indices()
                .take_while(|(idx, c)| *idx < col && (*c == ' ' || *c == '\t'))
                .count();
            out.push_str(&line[strip..]);
        } else {
            out.push_str(line);
        }
    }
    out
}

fn annotations(node: Node<'_>, src: &str) -> Vec<String> {
    let mut out = Vec::new();
    for child in named_children(node) {
        if child.kind() != "modifiers" {
            continue;
        }
        for m in named_children(child) {
            if matches!(m.kind(), "marker_annotation" | "annotation") {
                if let Some(name) = m.child_by_field_name("name") {
                    let full = text(name, src);
                    out.push(full.rsplit('.').next().unwrap_or(full).to_string());
                }
            }
        }
    }
    out
}

/// Header text from the start of the declaration up to its body.
fn header(node: Node<'_>, body: Option<Node<'_>>, src: &str) -> String {
    let end = body.map(|b| b.start_byte()).unwrap_or(node.end_byte());
    let h = normalize_ws(&src[node.start_byte()..end]);
    h.trim_end_matches(';').trim_end().to_string()
}

fn param_types(params: Node<'_>, src: &str) -> Vec<String> {
    let mut out = Vec::new();
    for p in named_children(params) {
        match p.kind() {
            "formal_parameter" => {
                let ty = p
                    .child_by_field_name("type")
                    .map(|t| normalize_ws(text(t, src)))
                    .unwrap_or_default();
                let dims = p
                    .child_by_field_name("dimensions")
                    .map(|d| normalize_ws(text(d, src)).replace(' ', ""))
                    .unwrap_or_default();
                out.push(format!("{ty}{dims}"));
            }
            "spread_parameter" => {
                let ty = named_children(p)
                    .into_iter()
                    .find(|c| !matches!(c.kind(), "modifiers" | "variable_declarator"))
                    .map(|t| normalize_ws(text(t, src)))
                    .unwrap_or_default();
                out.push(format!("{ty}..."));
            }
            _ => {}
        }
    }
    out
}

struct FileWalker<'s> {
    path: String,
    src: &'s str,
    out: ParsedFile,
}

impl<'s> FileWalker<'s> {
    fn push_node(&mut self, node: EntityNode) -> bool {
        if self.out.nodes.iter().any(|n| n.id == node.id) {
            log::warn!("{}: duplicate declaration {} skipped", self.path, node.id);
            return false;
        }
        self.out.nodes.push(node);
        true
    }

    fn visit_type(&mut self, decl: Node<'_>, owner: Option<(&str, &str)>) {
        let src = self.src;
        let Some(name_node) = decl.child_by_field_name("name") else {
            return;
        };
        let name = text(name_node, src).to_string();
        let (kind, keyword) = match decl.kind() {
            "interface_declaration" => (EntityKind::Interface, "interface"),
            "enum_declaration" => (EntityKind::Class, "enum"),
            "record_declaration" => (EntityKind::Class, "record"),
            _ => (EntityKind::Class, "class"),
        };
        let path = match owner {
            Some((_, owner_path)) => format!("{owner_path}.{name}"),
            None => name.clone(),
        };
        let id = format!("{}#{}", self.path, path);
        let body = decl.child_by_field_name("body");
        let node = EntityNode {
            id: id.clone(),
            kind,
            simple_name: name.clone(),
            signature: format!("{keyword} {name}"),
            declaration: header(decl, body, src),
            file_path: self.path.clone(),
            span: span_of(decl),
            body_text: dedented(decl, src),
            annotations: annotations(decl, src),
        };
        if !self.push_node(node) {
            return;
        }
        if let Some((owner_id, _)) = owner {
            self.out
                .defines
                .push(RelationEdge::new(owner_id, id.clone(), EdgeKind::Define));
        }
        self.collect_supers(decl, &id);
        if let Some(body) = body {
            self.visit_body(body, &id, &path, &name);
        }
    }

    fn collect_supers(&mut self, decl: Node<'_>, id: &str) {
        let src = self.src;
        for child in named_children(decl) {
            let kind = match (decl.kind(), child.kind()) {
                (_, "superclass") => EdgeKind::Extend,
                ("interface_declaration", "extends_interfaces") => EdgeKind::Extend,
                (_, "super_interfaces") => EdgeKind::Implement,
                _ => continue,
            };
            let mut types = Vec::new();
            for c in named_children(child) {
                if c.kind() == "type_list" {
                    types.extend(named_children(c));
                } else {
                    types.push(c);
                }
            }
            for t in types {
                self.out.supers.push(SuperRef {
                    type_id: id.to_string(),
                    name: normalize_ws(text(t, src)),
                    kind,
                });
            }
        }
    }

    fn visit_body(&mut self, body: Node<'_>, owner_id: &str, owner_path: &str, owner_name: &str) {
        for member in named_children(body) {
            match member.kind() {
                "enum_body_declarations" => {
                    self.visit_body(member, owner_id, owner_path, owner_name)
                }
                "class_declaration" | "interface_declaration" | "enum_declaration"
                | "record_declaration" => self.visit_type(member, Some((owner_id, owner_path))),
                "method_declaration" => self.visit_callable(member, owner_id, owner_path, false),
                "constructor_declaration" => {
                    let name = member
                        .child_by_field_name("name")
                        .map(|n| text(n, self.src))
                        .unwrap_or_default();
                    if name == owner_name {
                        self.visit_callable(member, owner_id, owner_path, true);
                    }
                }
                "field_declaration" | "constant_declaration" => {
                    self.visit_field(member, owner_id, owner_path)
                }
                _ => {}
            }
        }
    }

    fn visit_callable(&mut self, decl: Node<'_>, owner_id: &str, owner_path: &str, ctor: bool) {
        let src = self.src;
        let Some(name_node) = decl.child_by_field_name("name") else {
            return;
        };
        let name = text(name_node, src).to_string();
        let params = decl
            .child_by_field_name("parameters")
            .map(|p| param_types(p, src))
            .unwrap_or_default()
            .join(", ");
        let signature = if ctor {
            format!("{name}({params})")
        } else {
            let ret = decl
                .child_by_field_name("type")
                .map(|t| normalize_ws(text(t, src)))
                .unwrap_or_default();
            let dims = decl
                .child_by_field_name("dimensions")
                .map(|d| normalize_ws(text(d, src)).replace(' ', ""))
                .unwrap_or_default();
            format!("{ret}{dims} {name}({params})")
        };
        let body = decl.child_by_field_name("body");
        let id = format!("{}#{}.{}", self.path, owner_path, signature);
        let node = EntityNode {
            id: id.clone(),
            kind: if ctor {
                EntityKind::Constructor
            } else {
                EntityKind::Method
            },
            simple_name: name,
            signature,
            declaration: header(decl, body, src),
            file_path: self.path.clone(),
            span: span_of(decl),
            body_text: if body.is_some() {
                dedented(decl, src)
            } else {
                String::new()
            },
            annotations: annotations(decl, src),
        };
        if self.push_node(node) {
            self.out
                .defines
                .push(RelationEdge::new(owner_id, id, EdgeKind::Define));
        }
    }

    fn visit_field(&mut self, decl: Node<'_>, owner_id: &str, owner_path: &str) {
        let src = self.src;
        let ty = decl
            .child_by_field_name("type")
            .map(|t| normalize_ws(text(t, src)))
            .unwrap_or_default();
        let declaration = normalize_ws(text(decl, src));
        let mut cursor = decl.walk();
        let declarators: Vec<Node<'_>> = decl
            .children_by_field_name("declarator", &mut cursor)
            .collect();
        for d in declarators {
            let Some(name_node) = d.child_by_field_name("name") else {
                continue;
            };
            let name = text(name_node, src).to_string();
            let dims = d
                .child_by_field_name("dimensions")
                .map(|x| normalize_ws(text(x, src)).replace(' ', ""))
                .unwrap_or_default();
            let signature = format!("{ty}{dims} {name}");
            let id = format!("{}#{}.{}", self.path, owner_path, signature);
            let node = EntityNode {
                id: id.clone(),
                kind: EntityKind::Field,
                simple_name: name,
                signature,
                declaration: declaration.clone(),
                file_path: self.path.clone(),
                span: span_of(decl),
                body_text: String::new(),
                annotations: annotations(decl, src),
            };
            if self.push_node(node) {
                self.out
                    .defines
                    .push(RelationEdge::new(owner_id, id, EdgeKind::Define));
            }
        }
    }
}

/// Parses one compilation unit. `path` is the project-relative path.
pub(crate) fn parse_file(path: &str, src: &str, is_test_source: bool) -> Option<ParsedFile> {
    let tree = parse(src)?;
    let root = tree.root_node();
    let mut walker = FileWalker {
        path: path.to_string(),
        src,
        out: ParsedFile {
            file: SourceFile {
                path: path.to_string(),
                package: None,
                imports: Vec::new(),
                is_test_source,
            },
            nodes: Vec::new(),
            defines: Vec::new(),
            supers: Vec::new(),
        },
    };
    for child in named_children(root) {
        match child.kind() {
            "package_declaration" => {
                walker.out.file.package = named_children(child)
                    .into_iter()
                    .find(|c| matches!(c.kind(), "scoped_identifier" | "identifier"))
                    .map(|c| text(c, src).to_string());
            }
            "import_declaration" => walker.out.file.imports.push(normalize_ws(text(child, src))),
            "class_declaration" | "interface_declaration" | "enum_declaration"
            | "record_declaration" => walker.visit_type(child, None),
            _ => {}
        }
    }
    Some(walker.out)
}

fn arity(args: Option<Node<'_>>) -> usize {
    args.map(|a| named_children(a).len()).unwrap_or(0)
}

fn is_assertion_name(name: &str, prefixes: &[String]) -> bool {
    prefixes.iter().any(|p| name.starts_with(p.as_str()))
}

fn collect_calls(node: Node<'_>, src: &str, prefixes: &[String], out: &mut Vec<CallSite>) {
    match node.kind() {
        "method_invocation" => {
            let name = node
                .child_by_field_name("name")
                .map(|n| text(n, src).to_string())
                .unwrap_or_default();
            let object = node.child_by_field_name("object");
            let qualifier = match object {
                None => Qualifier::None,
                Some(o) => match o.kind() {
                    "this" => Qualifier::This,
                    "super" => Qualifier::Super,
                    "identifier" | "scoped_identifier" | "field_access" => {
                        Qualifier::Name(text(o, src).to_string())
                    }
                    _ => Qualifier::Other,
                },
            };
            let chained_on_assertion = object.is_some_and(|o| {
                o.kind() == "method_invocation"
                    && o.child_by_field_name("name")
                        .is_some_and(|n| is_assertion_name(text(n, src), prefixes))
            });
            out.push(CallSite {
                assertion: is_assertion_name(&name, prefixes) || chained_on_assertion,
                kind: CallKind::Method { name, qualifier },
                arity: arity(node.child_by_field_name("arguments")),
                end: node.end_byte(),
            });
        }
        "object_creation_expression" => {
            if let Some(t) = node.child_by_field_name("type") {
                out.push(CallSite {
                    kind: CallKind::New {
                        type_name: normalize_ws(text(t, src)),
                    },
                    arity: arity(node.child_by_field_name("arguments")),
                    end: node.end_byte(),
                    assertion: false,
                });
            }
        }
        "explicit_constructor_invocation" => {
            let target = node.child_by_field_name("constructor").map(|c| c.kind());
            let kind = match target {
                Some("this") => Some(CallKind::ThisCtor),
                Some("super") => Some(CallKind::SuperCtor),
                _ => None,
            };
            if let Some(kind) = kind {
                out.push(CallSite {
                    kind,
                    arity: arity(node.child_by_field_name("arguments")),
                    end: node.end_byte(),
                    assertion: false,
                });
            }
        }
        _ => {}
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        collect_calls(child, src, prefixes, out);
    }
}

/// Call sites in the body of a method or constructor given its full source
/// text, ordered by where each call expression ends.
pub(crate) fn call_sites(member_text: &str, assertion_prefixes: &[String]) -> Vec<CallSite> {
    if member_text.is_empty() {
        return Vec::new();
    }
    let wrapped = format!("class __Wrap {{\n{member_text}\n}}");
    let Some(tree) = parse(&wrapped) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let root = tree.root_node();
    let member = named_children(root)
        .into_iter()
        .find(|c| c.kind() == "class_declaration")
        .and_then(|c| c.child_by_field_name("body"))
        .and_then(|b| {
            named_children(b)
                .into_iter()
                .find(|m| matches!(m.kind(), "method_declaration" | "constructor_declaration"))
        });
    if let Some(body) = member.and_then(|m| m.child_by_field_name("body")) {
        collect_calls(body, &wrapped, assertion_prefixes, &mut out);
    }
    out.sort_by_key(|c| c.end);
    out
}
