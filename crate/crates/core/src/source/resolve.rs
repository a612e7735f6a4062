//! Name-based resolution of type references and call sites against the
//! declarations of one project. No type inference: calls resolve by simple
//! name and arity, narrowed by receiver where the receiver is obvious.

use std::collections::{BTreeSet, HashMap};

use crate::model::{EdgeKind, EntityKind, EntityNode, RelationEdge, SourceFile};
use crate::source::java::{CallKind, CallSite, Qualifier};

pub(crate) struct Resolver<'a> {
    nodes: &'a [EntityNode],
    index: HashMap<&'a str, usize>,
    types_by_name: HashMap<&'a str, Vec<usize>>,
    methods_by_name: HashMap<&'a str, Vec<usize>>,
    ctors_of: HashMap<&'a str, Vec<usize>>,
    owner_of: HashMap<&'a str, &'a str>,
    supers_of: HashMap<&'a str, Vec<&'a str>>,
    files: HashMap<&'a str, &'a SourceFile>,
}

/// Base simple name of a written type: generics, arrays, varargs and
/// qualification removed.
pub(crate) fn base_type_name(written: &str) -> &str {
    let no_generics = written.split('<').next().unwrap_or(written);
    let trimmed = no_generics
        .trim()
        .trim_end_matches("...")
        .trim_end_matches("[]")
        .trim_end_matches("[]")
        .trim();
    let last = trimmed.rsplit('.').next().unwrap_or(trimmed);
    last.split_whitespace().last().unwrap_or(last)
}

/// Number of parameters of a callable and whether the last one is varargs.
fn param_shape(node: &EntityNode) -> (usize, bool) {
    let params = node.param_types();
    let varargs = params.last().is_some_and(|p| p.ends_with("..."));
    (params.len(), varargs)
}

fn arity_matches(node: &EntityNode, arity: usize) -> bool {
    let (n, varargs) = param_shape(node);
    n == arity || (varargs && arity + 1 >= n)
}

impl<'a> Resolver<'a> {
    pub fn new(nodes: &'a [EntityNode], edges: &'a [RelationEdge], files: &'a [SourceFile]) -> Self {
        let mut index = HashMap::new();
        let mut types_by_name: HashMap<&str, Vec<usize>> = HashMap::new();
        let mut methods_by_name: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            index.insert(n.id.as_str(), i);
            match n.kind {
                EntityKind::Class | EntityKind::Interface => {
                    types_by_name.entry(n.simple_name.as_str()).or_default().push(i)
                }
                EntityKind::Method => {
                    methods_by_name.entry(n.simple_name.as_str()).or_default().push(i)
                }
                _ => {}
            }
        }
        let mut ctors_of: HashMap<&str, Vec<usize>> = HashMap::new();
        let mut owner_of = HashMap::new();
        let mut supers_of: HashMap<&str, Vec<&str>> = HashMap::new();
        for e in edges {
            match e.kind {
                EdgeKind::Define => {
                    owner_of.insert(e.dst.as_str(), e.src.as_str());
                    if let Some(&i) = index.get(e.dst.as_str()) {
                        if nodes[i].kind == EntityKind::Constructor {
                            ctors_of.entry(e.src.as_str()).or_default().push(i);
                        }
                    }
                }
                EdgeKind::Extend | EdgeKind::Implement => {
                    supers_of.entry(e.src.as_str()).or_default().push(e.dst.as_str())
                }
                _ => {}
            }
        }
        let files = files.iter().map(|f| (f.path.as_str(), f)).collect();
        Resolver {
            nodes,
            index,
            types_by_name,
            methods_by_name,
            ctors_of,
            owner_of,
            supers_of,
            files,
        }
    }

    fn node(&self, id: &str) -> Option<&'a EntityNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    /// In-project type ids a written type name may refer to from `from_file`:
    /// same file first, then same package, then explicit or wildcard
    /// imports, else every type with that simple name.
    pub fn resolve_type(&self, written: &str, from_file: &str) -> Vec<&'a str> {
        let name = base_type_name(written);
        let Some(cands) = self.types_by_name.get(name) else {
            return Vec::new();
        };
        let cands: Vec<&EntityNode> = cands.iter().map(|&i| &self.nodes[i]).collect();
        if cands.len() == 1 {
            return vec![cands[0].id.as_str()];
        }
        let same_file: Vec<_> = cands.iter().filter(|n| n.file_path == from_file).collect();
        if !same_file.is_empty() {
            return same_file.iter().map(|n| n.id.as_str()).collect();
        }
        let from = self.files.get(from_file);
        let package_of = |path: &str| self.files.get(path).and_then(|f| f.package.clone());
        let from_pkg = from.and_then(|f| f.package.clone());
        let same_pkg: Vec<_> = cands
            .iter()
            .filter(|n| package_of(&n.file_path) == from_pkg)
            .collect();
        if !same_pkg.is_empty() {
            return same_pkg.iter().map(|n| n.id.as_str()).collect();
        }
        if let Some(file) = from {
            let imported: Vec<_> = cands
                .iter()
                .filter(|n| {
                    let pkg = package_of(&n.file_path).unwrap_or_default();
                    file.imports.iter().any(|imp| {
                        imp == &format!("import {pkg}.{name};") || imp == &format!("import {pkg}.*;")
                    })
                })
                .collect();
            if !imported.is_empty() {
                return imported.iter().map(|n| n.id.as_str()).collect();
            }
        }
        cands.iter().map(|n| n.id.as_str()).collect()
    }

    /// Type declaring `member`.
    pub fn owner(&self, member: &str) -> Option<&'a str> {
        self.owner_of.get(member).copied()
    }

    /// `ty`, its enclosing types, and all transitive supertypes.
    fn type_scope(&self, ty: &str) -> BTreeSet<&'a str> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&str> = Vec::new();
        if let Some(n) = self.node(ty) {
            stack.push(n.id.as_str());
        }
        while let Some(t) = stack.pop() {
            let Some(node) = self.node(t) else { continue };
            if !seen.insert(node.id.as_str()) {
                continue;
            }
            if let Some(sups) = self.supers_of.get(t) {
                stack.extend(sups.iter().copied());
            }
            if let Some(outer) = self.owner_of.get(t) {
                stack.push(outer);
            }
        }
        seen
    }

    fn supertypes(&self, ty: &str) -> BTreeSet<&'a str> {
        let mut scope = self.type_scope(ty);
        scope.remove(ty);
        scope
    }

    fn ctors_matching(&self, ty: &str, arity: usize) -> Vec<&'a str> {
        self.ctors_of
            .get(ty)
            .map(|list| {
                list.iter()
                    .map(|&i| &self.nodes[i])
                    .filter(|n| arity_matches(n, arity))
                    .map(|n| n.id.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Callables a call site inside `caller` may invoke, sorted by id.
    pub fn resolve_call(&self, caller: &str, site: &CallSite) -> Vec<&'a str> {
        let Some(caller_node) = self.node(caller) else {
            return Vec::new();
        };
        let owner = self.owner(caller);
        let mut out: Vec<&str> = match &site.kind {
            CallKind::New { type_name } => self
                .resolve_type(type_name, &caller_node.file_path)
                .into_iter()
                .flat_map(|t| self.ctors_matching(t, site.arity))
                .collect(),
            CallKind::ThisCtor => owner
                .map(|t| self.ctors_matching(t, site.arity))
                .unwrap_or_default(),
            CallKind::SuperCtor => owner
                .map(|t| {
                    self.supers_of
                        .get(t)
                        .into_iter()
                        .flatten()
                        .flat_map(|s| self.ctors_matching(s, site.arity))
                        .collect()
                })
                .unwrap_or_default(),
            CallKind::Method { name, qualifier } => {
                let all: Vec<&EntityNode> = self
                    .methods_by_name
                    .get(name.as_str())
                    .into_iter()
                    .flatten()
                    .map(|&i| &self.nodes[i])
                    .filter(|n| arity_matches(n, site.arity))
                    .collect();
                let scope: Option<BTreeSet<&str>> = match qualifier {
                    Qualifier::None | Qualifier::This => owner.map(|t| self.type_scope(t)),
                    Qualifier::Super => owner.map(|t| self.supertypes(t)),
                    Qualifier::Name(q) if q.chars().next().is_some_and(char::is_uppercase) => {
                        let types = self.resolve_type(q, &caller_node.file_path);
                        if types.is_empty() {
                            None
                        } else {
                            Some(types.into_iter().flat_map(|t| self.type_scope(t)).collect())
                        }
                    }
                    _ => None,
                };
                let narrowed: Vec<&EntityNode> = match &scope {
                    Some(scope) => all
                        .iter()
                        .copied()
                        .filter(|n| self.owner(&n.id).is_some_and(|o| scope.contains(o)))
                        .collect(),
                    None => Vec::new(),
                };
                let chosen = if narrowed.is_empty() { all } else { narrowed };
                chosen.into_iter().map(|n| n.id.as_str()).collect()
            }
        };
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_names_strip_decoration() {
        assert_eq!(base_type_name("java.util.List<Server>"), "List");
        assert_eq!(base_type_name("Server[]"), "Server");
        assert_eq!(base_type_name("Server..."), "Server");
        assert_eq!(base_type_name("final Server"), "Server");
        assert_eq!(base_type_name("Outer.Inner"), "Inner");
    }
}
