//! Evaluation: outcome breakdowns, common mutation score, and coverage
//! overlap between a generated test and its ground truth.

mod reports;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use reports::{parse_coverage_report, parse_mutation_report, CoverageProfile, MutantId, MutationSets};

use crate::error::{Error, Result};
use crate::model::{GenerationOutcome, OutcomeStatus};
use crate::scalar::Scalar;

/// Jaccard index of two killed-mutant sets; 1 when both are empty.
pub fn cms_ratio<T: Ord, S: Scalar>(killed_g: &BTreeSet<T>, killed_t: &BTreeSet<T>) -> S {
    let inter = killed_g.intersection(killed_t).count();
    let union = killed_g.len() + killed_t.len() - inter;
    if union == 0 {
        return S::one();
    }
    S::from_count(inter) / S::from_count(union)
}

pub fn cms<T: Ord>(killed_g: &BTreeSet<T>, killed_t: &BTreeSet<T>) -> f64 {
    cms_ratio(killed_g, killed_t)
}

/// Mean over generated tests.
pub fn cms_aggregate<S: Scalar>(per_test: &[S]) -> Result<S> {
    if per_test.is_empty() {
        return Err(Error::EmptyAggregate);
    }
    let sum = per_test.iter().cloned().fold(S::zero(), |a, b| a + b);
    Ok(sum / S::from_count(per_test.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedMeans {
    pub tests: Vec<String>,
    pub mean_a: f64,
    pub mean_b: f64,
}

/// Means of both result maps over the tests they share; `None` when they
/// share none.
pub fn paired_subsets(results_a: &BTreeMap<String, f64>, results_b: &BTreeMap<String, f64>) -> Option<PairedMeans> {
    let shared: Vec<&String> = results_a.keys().filter(|k| results_b.contains_key(*k)).collect();
    if shared.is_empty() {
        return None;
    }
    let mean = |m: &BTreeMap<String, f64>| {
        let values: Vec<f64> = shared.iter().map(|k| m[*k]).collect();
        cms_aggregate(&values).expect("shared set is non-empty")
    };
    Some(PairedMeans {
        tests: shared.iter().map(|s| s.to_string()).collect(),
        mean_a: mean(results_a),
        mean_b: mean(results_b),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CoverageRelation {
    ExactMatch,
    FullCover,
    Partial,
    Disjoint,
}

impl CoverageRelation {
    /// Equality counts as covering too.
    pub fn is_full_cover(self) -> bool {
        matches!(self, CoverageRelation::ExactMatch | CoverageRelation::FullCover)
    }
}

pub fn coverage_relation_of_sets(gen: &BTreeSet<u32>, truth: &BTreeSet<u32>) -> CoverageRelation {
    if gen == truth {
        CoverageRelation::ExactMatch
    } else if gen.is_superset(truth) {
        CoverageRelation::FullCover
    } else if !gen.is_disjoint(truth) {
        CoverageRelation::Partial
    } else {
        CoverageRelation::Disjoint
    }
}

pub fn coverage_relation(gen: &CoverageProfile, truth: &CoverageProfile) -> CoverageRelation {
    coverage_relation_of_sets(&gen.lines, &truth.lines)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRates {
    pub exact_match_rate: f64,
    /// Includes exact matches.
    pub full_cover_rate: f64,
}

pub fn coverage_rates(relations: &[CoverageRelation]) -> Result<CoverageRates> {
    if relations.is_empty() {
        return Err(Error::EmptyAggregate);
    }
    let n = relations.len() as f64;
    let count = |f: &dyn Fn(CoverageRelation) -> bool| relations.iter().filter(|r| f(**r)).count() as f64;
    Ok(CoverageRates {
        exact_match_rate: count(&|r| r == CoverageRelation::ExactMatch) / n,
        full_cover_rate: count(&|r| r.is_full_cover()) / n,
    })
}

/// Counts and percentages (two decimals) of the four statuses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusBreakdown {
    pub total: usize,
    pub counts: BTreeMap<OutcomeStatus, usize>,
    /// Largest-remainder rounded so they sum to exactly 100 when `total > 0`.
    pub percentages: BTreeMap<OutcomeStatus, f64>,
}

impl StatusBreakdown {
    pub fn from_statuses<'a>(statuses: impl IntoIterator<Item = &'a OutcomeStatus>) -> Self {
        let mut counts: BTreeMap<OutcomeStatus, usize> = OutcomeStatus::ALL.iter().map(|s| (*s, 0)).collect();
        for s in statuses {
            *counts.entry(*s).or_default() += 1;
        }
        let total: usize = counts.values().sum();
        let percentages = percentages(&counts, total);
        StatusBreakdown {
            total,
            counts,
            percentages,
        }
    }
}

/// Hundredths of a percent, distributed by largest remainder.
fn percentages(counts: &BTreeMap<OutcomeStatus, usize>, total: usize) -> BTreeMap<OutcomeStatus, f64> {
    if total == 0 {
        return counts.keys().map(|s| (*s, 0.0)).collect();
    }
    const UNITS: usize = 10_000;
    let mut units: Vec<(OutcomeStatus, usize, usize)> = counts
        .iter()
        .map(|(s, c)| (*s, c * UNITS / total, c * UNITS % total))
        .collect();
    let assigned: usize = units.iter().map(|u| u.1).sum();
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by(|&a, &b| units[b].2.cmp(&units[a].2).then(a.cmp(&b)));
    for &i in order.iter().take(UNITS - assigned) {
        units[i].1 += 1;
    }
    units
        .into_iter()
        .map(|(s, u, _)| (s, u as f64 / 100.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeBreakdown {
    pub overall: StatusBreakdown,
    pub per_project: BTreeMap<String, StatusBreakdown>,
}

pub fn aggregate_outcomes(outcomes: &[GenerationOutcome]) -> OutcomeBreakdown {
    let mut by_project: BTreeMap<String, Vec<OutcomeStatus>> = BTreeMap::new();
    for o in outcomes {
        by_project.entry(o.project.clone()).or_default().push(o.status);
    }
    OutcomeBreakdown {
        overall: StatusBreakdown::from_statuses(outcomes.iter().map(|o| &o.status)),
        per_project: by_project
            .iter()
            .map(|(p, s)| (p.clone(), StatusBreakdown::from_statuses(s)))
            .collect(),
    }
}
