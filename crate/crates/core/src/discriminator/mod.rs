//! Crucial-fact discrimination: explore the code graph around the focal
//! method and the reference test, then rank candidate facts by semantic
//! similarity to the intention and by weighted occurrence in usages.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;

use crate::error::{Error, Result};
use crate::model::{CodeGraph, CrucialFact, EdgeKind, EntityKind, EntityNode, FactSubject, RelationEdge, ValidationIntention};
use crate::retrieval::{check_unit_weight, min_max_normalize, semantic_sim, EmbeddingProvider};
use crate::scalar::Scalar;
use crate::source::Usage;

pub const DEFAULT_DEPTH: usize = 2;
pub const DEFAULT_TOP_K: usize = 3;
pub const DEFAULT_BETA: f64 = 0.5;
/// Body lines included when a method or constructor is rendered as a fact.
pub const RENDERED_BODY_LINES: usize = 10;

/// Starting points of exploration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplorationSeed {
    nodes: BTreeSet<String>,
}

impl ExplorationSeed {
    /// The focal method, the reference test when there is one, and, when the
    /// focal method is not itself a constructor, the constructors of its
    /// declaring type.
    pub fn new(graph: &CodeGraph, focal: &str, reference_test: Option<&str>) -> Result<Self> {
        let focal_node = graph.require(focal)?;
        let mut nodes = BTreeSet::new();
        nodes.insert(focal_node.id.clone());
        if let Some(test) = reference_test {
            nodes.insert(graph.require(test)?.id.clone());
        }
        if focal_node.kind != EntityKind::Constructor {
            if let Some(owner) = graph.declaring_type(focal) {
                for e in graph.outgoing(&owner.id).filter(|e| e.kind == EdgeKind::Define) {
                    if graph.node(&e.dst).is_some_and(|n| n.kind == EntityKind::Constructor) {
                        nodes.insert(e.dst.clone());
                    }
                }
            }
        }
        Ok(ExplorationSeed { nodes })
    }

    /// Seeds given directly; every id must exist when explored.
    pub fn from_ids<I, T>(ids: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        ExplorationSeed {
            nodes: ids.into_iter().map(Into::into).collect(),
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }
}

/// Breadth-first closure of the seeds over every edge kind in both
/// directions. Every node reached within `depth` hops (other than a seed)
/// and every edge examined from a node closer than `depth` becomes a
/// candidate. Nodes in `exclude` are never entered, and edges touching them
/// are never collected. Output is sorted by fact key.
pub fn explore<S: Scalar>(
    graph: &CodeGraph,
    seeds: &ExplorationSeed,
    depth: usize,
    exclude: &BTreeSet<String>,
) -> Result<Vec<CrucialFact<S>>> {
    for id in seeds.ids() {
        graph.require(id)?;
    }
    let mut dist: BTreeMap<&str, usize> = BTreeMap::new();
    let mut queue: VecDeque<&str> = VecDeque::new();
    for id in seeds.ids() {
        if !exclude.contains(id) {
            let id = graph.require(id)?.id.as_str();
            dist.insert(id, 0);
            queue.push_back(id);
        }
    }
    let mut edges: BTreeSet<&RelationEdge> = BTreeSet::new();
    while let Some(current) = queue.pop_front() {
        let d = dist[current];
        if d >= depth {
            continue;
        }
        for (edge, far) in graph.neighbors(current, &EdgeKind::ALL, crate::model::Direction::Both)? {
            if exclude.contains(&far.id) {
                continue;
            }
            edges.insert(edge);
            if !dist.contains_key(far.id.as_str()) {
                dist.insert(far.id.as_str(), d + 1);
                queue.push_back(far.id.as_str());
            }
        }
    }
    let mut facts = Vec::new();
    for (id, d) in &dist {
        if *d > 0 {
            let subject = FactSubject::Node { id: id.to_string() };
            facts.push(unscored(graph, subject)?);
        }
    }
    for edge in edges {
        let subject = FactSubject::Edge { edge: edge.clone() };
        facts.push(unscored(graph, subject)?);
    }
    facts.sort_by_key(|f| f.key());
    Ok(facts)
}

fn unscored<S: Scalar>(graph: &CodeGraph, subject: FactSubject) -> Result<CrucialFact<S>> {
    let rendered = render_fact(&subject, graph)?;
    let anchor = graph.require(subject.anchor_id())?.simple_name.clone();
    Ok(CrucialFact::unscored(subject, rendered, anchor))
}

fn file_name(path: &str) -> &str {
    Path::new(path)
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or(path)
}

/// Short name of an entity inside sentences: `Server`, `Server(ThreadPool)`,
/// `ignite(int)`, `port`.
fn label(node: &EntityNode) -> String {
    if node.kind.is_callable() {
        format!("{}({})", node.simple_name, node.param_types().join(", "))
    } else {
        node.simple_name.clone()
    }
}

pub fn render_fact(subject: &FactSubject, graph: &CodeGraph) -> Result<String> {
    match subject {
        FactSubject::Node { id } => {
            let node = graph.require(id)?;
            let mut out = format!(
                "{} {} declared in {}",
                node.kind,
                node.signature,
                file_name(&node.file_path)
            );
            if node.kind.is_callable() && !node.body_text.is_empty() {
                for line in node.body_text.lines().take(RENDERED_BODY_LINES) {
                    out.push('\n');
                    out.push_str(line);
                }
            }
            Ok(out)
        }
        FactSubject::Edge { edge } => {
            let a = label(graph.require(&edge.src)?);
            let dst = graph.require(&edge.dst)?;
            let b = label(dst);
            Ok(match edge.kind {
                EdgeKind::Define => {
                    format!("{a} declares {} {b}", dst.kind.to_string().to_lowercase())
                }
                EdgeKind::Call => format!("{a} calls {b}"),
                EdgeKind::Param => format!("{a} takes a parameter of type {b}"),
                EdgeKind::Overload => format!("{a} is an overload of {b}"),
                EdgeKind::Implement => format!("{a} implements {b}"),
                EdgeKind::Extend => format!("{a} extends {b}"),
            })
        }
    }
}

fn identifier_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[A-Za-z_$][A-Za-z0-9_$]*").expect("valid identifier regex"))
}

/// Whole-identifier occurrences of `anchor` in `text` (case-sensitive).
pub fn count_occurrences(anchor: &str, text: &str) -> usize {
    identifier_re()
        .find_iter(text)
        .filter(|m| m.as_str() == anchor)
        .count()
}

/// `counts[j][i]`: occurrences of fact `i`'s anchor in usage `j`.
pub fn occurrence_counts<S>(facts: &[CrucialFact<S>], usages: &[Usage]) -> Vec<Vec<usize>> {
    usages
        .iter()
        .map(|u| {
            let mut per_anchor: BTreeMap<&str, usize> = BTreeMap::new();
            for m in identifier_re().find_iter(&u.text) {
                *per_anchor.entry(m.as_str()).or_default() += 1;
            }
            facts
                .iter()
                .map(|f| per_anchor.get(f.anchor.as_str()).copied().unwrap_or(0))
                .collect()
        })
        .collect()
}

/// `sum_j as_j * counts[j][i] / sum_f counts[j][f]`, skipping usages where
/// no fact occurs.
pub fn occurrence_from_counts<S: Scalar>(i: usize, counts: &[Vec<usize>], alignments: &[S]) -> S {
    debug_assert_eq!(counts.len(), alignments.len());
    let mut total = S::zero();
    for (row, align) in counts.iter().zip(alignments) {
        let denom: usize = row.iter().sum();
        if denom == 0 {
            continue;
        }
        total = total + align.clone() * S::from_count(row[i]) / S::from_count(denom);
    }
    total
}

/// Raw occurrence frequency of `fact` over the usages, weighted by their
/// alignment scores. `fact` must be one of `all_facts`.
pub fn fact_occurrence<S: Scalar>(
    fact: &CrucialFact<S>,
    usages: &[Usage],
    alignments: &[S],
    all_facts: &[CrucialFact<S>],
) -> S {
    let Some(i) = all_facts.iter().position(|f| f.subject == fact.subject) else {
        return S::zero();
    };
    occurrence_from_counts(i, &occurrence_counts(all_facts, usages), alignments)
}

/// How raw occurrence enters the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OccurrenceScale {
    /// Min-max normalized across candidates before mixing with similarity.
    #[default]
    Normalized,
    /// The raw weighted sum, unnormalized.
    Raw,
}

/// Fills every score field and sorts by likelihood (descending), ties by
/// fact key. `sims[i]` belongs to `candidates[i]`; `counts` and
/// `alignments` are indexed by usage.
pub fn score_facts<S: Scalar>(
    candidates: Vec<CrucialFact<S>>,
    sims: &[S],
    counts: &[Vec<usize>],
    alignments: &[S],
    beta: &S,
    scale: OccurrenceScale,
) -> Vec<CrucialFact<S>> {
    let raw: Vec<S> = (0..candidates.len())
        .map(|i| occurrence_from_counts(i, counts, alignments))
        .collect();
    let occu = match scale {
        OccurrenceScale::Normalized => min_max_normalize(&raw),
        OccurrenceScale::Raw => raw.clone(),
    };
    let mut scored: Vec<CrucialFact<S>> = candidates
        .into_iter()
        .zip(sims.iter().zip(raw.into_iter().zip(occu)))
        .map(|(mut f, (sim, (occu_raw, occu)))| {
            f.sim = sim.clone();
            f.likelihood = beta.clone() * sim.clone() + (S::one() - beta.clone()) * occu.clone();
            f.occu_raw = occu_raw;
            f.occu = occu;
            f
        })
        .collect();
    sort_by_likelihood(&mut scored);
    scored
}

pub fn sort_by_likelihood<S: Scalar>(facts: &mut [CrucialFact<S>]) {
    facts.sort_by(|a, b| {
        b.likelihood
            .partial_cmp(&a.likelihood)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.key().cmp(&b.key()))
    });
}

/// Every candidate scored against the intention and usages, best first.
pub fn score_candidates(
    candidates: Vec<CrucialFact<f64>>,
    desc_tar: &ValidationIntention,
    usages: &[Usage],
    provider: &dyn EmbeddingProvider,
    beta: f64,
    scale: OccurrenceScale,
) -> Result<Vec<CrucialFact<f64>>> {
    check_unit_weight("beta", beta)?;
    let desc = desc_tar.render();
    let sims = candidates
        .par_iter()
        .map(|f| semantic_sim(provider, &f.rendered, &desc))
        .collect::<Result<Vec<f64>>>()?;
    let alignments = usages
        .par_iter()
        .map(|u| semantic_sim(provider, &desc, &u.text))
        .collect::<Result<Vec<f64>>>()?;
    let counts = occurrence_counts(&candidates, usages);
    Ok(score_facts(candidates, &sims, &counts, &alignments, &beta, scale))
}

/// The `k` most likely crucial facts.
pub fn rank_facts(
    candidates: Vec<CrucialFact<f64>>,
    desc_tar: &ValidationIntention,
    usages: &[Usage],
    provider: &dyn EmbeddingProvider,
    beta: f64,
    k: usize,
) -> Result<Vec<CrucialFact<f64>>> {
    if k == 0 {
        return Err(Error::Config("facts top-k must be at least 1".into()));
    }
    let mut scored = score_candidates(candidates, desc_tar, usages, provider, beta, OccurrenceScale::Normalized)?;
    scored.truncate(k);
    Ok(scored)
}
