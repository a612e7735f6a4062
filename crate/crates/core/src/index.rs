//! On-disk index: `graph.json` and `pairs.json`, both pretty-printed JSON with
//! sorted keys and sorted collections, so identical inputs give identical bytes.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CodeGraph, EntityKind, MethodTestPair};

pub const GRAPH_FILE: &str = "graph.json";
pub const PAIRS_FILE: &str = "pairs.json";

pub fn save_index(graph: &CodeGraph, pairs: &[MethodTestPair], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::IndexWrite {
        path: dir.to_path_buf(),
        source,
    })?;

    let mut sorted: Vec<&MethodTestPair> = pairs.iter().collect();
    sorted.sort_by(|a, b| (&a.focal, &a.test).cmp(&(&b.focal, &b.test)));
    sorted.dedup();

    write_sorted_json(&dir.join(GRAPH_FILE), graph)?;
    write_sorted_json(&dir.join(PAIRS_FILE), &sorted)
}

pub fn load_index(dir: &Path) -> Result<(CodeGraph, Vec<MethodTestPair>)> {
    let graph_path = dir.join(GRAPH_FILE);
    let graph_text = read(&graph_path)?;
    // Parse to a value first so that syntax errors and integrity errors stay distinct.
    let graph_value: serde_json::Value =
        serde_json::from_str(&graph_text).map_err(|e| Error::IndexRead {
            path: graph_path.clone(),
            reason: e.to_string(),
        })?;
    let graph: CodeGraph = serde_json::from_value(graph_value).map_err(|e| {
        let msg = e.to_string();
        if msg.starts_with("index integrity violation") {
            Error::IndexIntegrity(msg)
        } else {
            Error::IndexRead {
                path: graph_path.clone(),
                reason: msg,
            }
        }
    })?;

    let pairs_path = dir.join(PAIRS_FILE);
    let pairs_text = read(&pairs_path)?;
    let pairs: Vec<MethodTestPair> =
        serde_json::from_str(&pairs_text).map_err(|e| Error::IndexRead {
            path: pairs_path.clone(),
            reason: e.to_string(),
        })?;
    for pair in &pairs {
        check_pair(&graph, pair)?;
    }
    Ok((graph, pairs))
}

fn check_pair(graph: &CodeGraph, pair: &MethodTestPair) -> Result<()> {
    if pair.focal == pair.test {
        return Err(Error::IndexIntegrity(format!("pair focal equals test: {}", pair.test)));
    }
    let focal = graph
        .node(&pair.focal)
        .ok_or_else(|| Error::IndexIntegrity(format!("pair references unknown focal {}", pair.focal)))?;
    if !focal.kind.is_callable() {
        return Err(Error::IndexIntegrity(format!("pair focal {} is not a method", pair.focal)));
    }
    let test = graph
        .node(&pair.test)
        .ok_or_else(|| Error::IndexIntegrity(format!("pair references unknown test {}", pair.test)))?;
    if test.kind != EntityKind::Method || test.annotations.is_empty() {
        return Err(Error::IndexIntegrity(format!(
            "pair test {} is not an annotated method",
            pair.test
        )));
    }
    pair.desc
        .validate()
        .map_err(|_| Error::IndexIntegrity(format!("pair {} has an empty objective", pair.test)))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::IndexRead {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// serde_json's default `Map` is a `BTreeMap`, so going through `Value`
/// yields lexicographically sorted keys at every level.
pub(crate) fn to_sorted_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    let mut text = serde_json::to_string_pretty(&value)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn write_sorted_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = to_sorted_json(value)?;
    fs::write(path, text).map_err(|source| Error::IndexWrite {
        path: path.to_path_buf(),
        source,
    })
}
