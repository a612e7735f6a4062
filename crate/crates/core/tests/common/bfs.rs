use std::collections::{BTreeMap, BTreeSet};

use intentforge_core::{CodeGraph, CrucialFact, FactSubject, RelationEdge};

/// Plain frontier expansion over an undirected view of the edge list.
pub fn oracle(graph: &CodeGraph, seeds: &[&str], depth: usize, exclude: &BTreeSet<String>) -> (BTreeSet<String>, BTreeSet<RelationEdge>) {
    let usable = |e: &RelationEdge| !exclude.contains(&e.src) && !exclude.contains(&e.dst);
    let mut dist: BTreeMap<String, usize> = seeds
        .iter()
        .filter(|s| !exclude.contains(**s))
        .map(|s| (s.to_string(), 0))
        .collect();
    for d in 0..depth {
        let frontier: Vec<String> = dist.iter().filter(|(_, v)| **v == d).map(|(k, _)| k.clone()).collect();
        for node in frontier {
            for e in graph.edges().iter().filter(|e| usable(e)) {
                let other = if e.src == node {
                    &e.dst
                } else if e.dst == node {
                    &e.src
                } else {
                    continue;
                };
                dist.entry(other.clone()).or_insert(d + 1);
            }
        }
    }
    let nodes = dist.iter().filter(|(_, d)| **d > 0).map(|(k, _)| k.clone()).collect();
    let edges = graph
        .edges()
        .iter()
        .filter(|e| usable(e))
        .filter(|e| {
            let near = |id: &str| dist.get(id).is_some_and(|d| *d < depth);
            near(&e.src) || near(&e.dst)
        })
        .cloned()
        .collect();
    (nodes, edges)
}

pub fn split(facts: &[CrucialFact]) -> (BTreeSet<String>, BTreeSet<RelationEdge>) {
    let mut nodes = BTreeSet::new();
    let mut edges = BTreeSet::new();
    for f in facts {
        match &f.subject {
            FactSubject::Node { id } => {
                nodes.insert(id.clone());
            }
            FactSubject::Edge { edge } => {
                edges.insert(edge.clone());
            }
        }
    }
    (nodes, edges)
}

