//! Readers for mutation-testing and line-coverage XML reports.

use std::collections::BTreeSet;

use roxmltree::{Document, Node, ParsingOptions};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EntityNode, Span};

/// Identity of one mutant across runs with the same mutation-tool setup.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MutantId {
    pub mutated_class: String,
    pub mutated_method: String,
    pub line: i64,
    pub mutator: String,
    pub index: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationSets {
    pub killed: BTreeSet<MutantId>,
    pub survived: BTreeSet<MutantId>,
}

fn parse_doc(text: &str) -> Result<Document<'_>> {
    let opts = ParsingOptions {
        allow_dtd: true,
        ..ParsingOptions::default()
    };
    Document::parse_with_options(text, opts).map_err(|e| Error::ReportParse(e.to_string()))
}

fn child_text<'a>(node: Node<'a, '_>, name: &str) -> Result<&'a str> {
    node.children()
        .find(|c| c.has_tag_name(name))
        .map(|c| c.text().unwrap_or("").trim())
        .ok_or_else(|| Error::ReportParse(format!("<mutation> without <{name}>")))
}

fn child_int(node: Node<'_, '_>, name: &str) -> Result<i64> {
    let text = child_text(node, name)?;
    text.parse()
        .map_err(|_| Error::ReportParse(format!("<{name}> is not an integer: {text:?}")))
}

/// `<mutations>` with `<mutation detected="true|false">` children. A mutant
/// reported both ways counts as killed.
pub fn parse_mutation_report(text: &str) -> Result<MutationSets> {
    let doc = parse_doc(text)?;
    let root = doc.root_element();
    if !root.has_tag_name("mutations") {
        return Err(Error::ReportParse(format!(
            "expected <mutations> root, found <{}>",
            root.tag_name().name()
        )));
    }
    let mut sets = MutationSets::default();
    for m in root.children().filter(Node::is_element) {
        if !m.has_tag_name("mutation") {
            return Err(Error::ReportParse(format!("unexpected <{}> in <mutations>", m.tag_name().name())));
        }
        let detected = match m.attribute("detected") {
            Some("true") => true,
            Some("false") => false,
            other => {
                return Err(Error::ReportParse(format!("bad detected attribute: {other:?}")));
            }
        };
        let id = MutantId {
            mutated_class: child_text(m, "mutatedClass")?.to_string(),
            mutated_method: child_text(m, "mutatedMethod")?.to_string(),
            line: child_int(m, "lineNumber")?,
            mutator: child_text(m, "mutator")?.to_string(),
            index: child_int(m, "index")?,
        };
        if detected {
            sets.survived.remove(&id);
            sets.killed.insert(id);
        } else if !sets.killed.contains(&id) {
            sets.survived.insert(id);
        }
    }
    Ok(sets)
}

/// Focal-method lines executed by a test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageProfile {
    pub file: String,
    pub span: Span,
    pub lines: BTreeSet<u32>,
}

impl CoverageProfile {
    /// Fails when a line lies outside the span.
    pub fn new(file: impl Into<String>, span: Span, lines: BTreeSet<u32>) -> Result<Self> {
        if let Some(l) = lines.iter().find(|&&l| !span.contains(l)) {
            return Err(Error::ReportParse(format!(
                "line {l} outside span {}-{}",
                span.start_line, span.end_line
            )));
        }
        Ok(CoverageProfile {
            file: file.into(),
            span,
            lines,
        })
    }
}

fn package_of<'a>(node: Node<'a, '_>) -> &'a str {
    node.ancestors()
        .find(|a| a.has_tag_name("package"))
        .and_then(|p| p.attribute("name"))
        .unwrap_or("")
}

/// Lines with `ci > 0` inside the focal span, from every `<sourcefile>`
/// whose package path and name end the focal's file path.
pub fn parse_coverage_report(text: &str, focal: &EntityNode) -> Result<CoverageProfile> {
    let doc = parse_doc(text)?;
    let root = doc.root_element();
    if !root.has_tag_name("report") {
        return Err(Error::ReportParse(format!(
            "expected <report> root, found <{}>",
            root.tag_name().name()
        )));
    }
    let focal_path = focal.file_path.replace('\\', "/");
    let mut found = false;
    let mut lines = BTreeSet::new();
    for sf in root.descendants().filter(|n| n.has_tag_name("sourcefile")) {
        let name = sf
            .attribute("name")
            .ok_or_else(|| Error::ReportParse("<sourcefile> without name".into()))?;
        let pkg = package_of(sf);
        let rel = if pkg.is_empty() {
            name.to_string()
        } else {
            format!("{}/{name}", pkg.trim_end_matches('/'))
        };
        if !(focal_path == rel || focal_path.ends_with(&format!("/{rel}"))) {
            continue;
        }
        found = true;
        for line in sf.children().filter(|c| c.has_tag_name("line")) {
            let attr = |a: &str| -> Result<u32> {
                let v = line
                    .attribute(a)
                    .ok_or_else(|| Error::ReportParse(format!("<line> without {a}")))?;
                v.parse()
                    .map_err(|_| Error::ReportParse(format!("<line {a}> is not a count: {v:?}")))
            };
            let nr = attr("nr")?;
            if attr("ci")? > 0 && focal.span.contains(nr) {
                lines.insert(nr);
            }
        }
    }
    if !found {
        return Err(Error::MissingCoverage(focal.file_path.clone()));
    }
    CoverageProfile::new(focal.file_path.clone(), focal.span, lines)
}
