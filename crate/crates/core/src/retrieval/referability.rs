//! Reference availability (RA) and referability level (RL) of a test corpus.
//!
//! `sim(t_i, t_j)` is the min-max normalized BM25 score of `t_j` when `t_i` is
//! the query over the corpus without `t_i`. Normalization is per query.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::retrieval::bm25::{min_max_normalize, Bm25Corpus, Bm25Params};
use crate::retrieval::TokenizedDoc;
use crate::scalar::{Real, Scalar};

/// Dense pairwise similarity table; `get(i, i)` is never consulted.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<S> {
    rows: Vec<Vec<S>>,
}

impl<S: Scalar> SimilarityMatrix<S> {
    /// Builds from an arbitrary pairwise function, letting callers stipulate
    /// similarities directly.
    pub fn from_fn(n: usize, sim: impl Fn(usize, usize) -> S) -> Result<Self> {
        if n < 2 {
            return Err(Error::InsufficientCorpus(n));
        }
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { S::zero() } else { sim(i, j) })
                    .collect()
            })
            .collect();
        Ok(SimilarityMatrix { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.rows[i][j]
    }

    /// Number of other tests whose similarity to test `i` strictly exceeds `th`.
    fn referable_count(&self, i: usize, th: &S) -> usize {
        self.rows[i]
            .iter()
            .enumerate()
            .filter(|(j, s)| *j != i && *s > th)
            .count()
    }

    /// Fraction of tests with at least one other test above `th`.
    pub fn reference_availability(&self, th: &S) -> S {
        let hits = (0..self.len())
            .filter(|&i| self.referable_count(i, th) > 0)
            .count();
        S::from_count(hits) / S::from_count(self.len())
    }

    /// Average number of other tests above `th`.
    pub fn referability_level(&self, th: &S) -> S {
        let total: usize = (0..self.len()).map(|i| self.referable_count(i, th)).sum();
        S::from_count(total) / S::from_count(self.len())
    }
}

pub fn similarity_matrix(tests: &[TokenizedDoc]) -> Result<SimilarityMatrix<f64>> {
    similarity_matrix_with(tests, Bm25Params::default())
}

pub fn similarity_matrix_with<S: Real>(
    tests: &[TokenizedDoc],
    params: Bm25Params<S>,
) -> Result<SimilarityMatrix<S>> {
    Ok(normalize_rows(&raw_similarity_rows(tests, params)?))
}

/// Raw leave-one-out BM25 rows with the diagonal set to zero; callers that
/// want to transform raw scores before normalizing start here.
pub fn raw_similarity_rows<S: Real>(
    tests: &[TokenizedDoc],
    params: Bm25Params<S>,
) -> Result<Vec<Vec<S>>> {
    if tests.len() < 2 {
        return Err(Error::InsufficientCorpus(tests.len()));
    }
    let index = Bm25Corpus::new(tests, params)?;
    (0..tests.len())
        .into_par_iter()
        .map(|i| {
            let mut others = index.raw_scores_excluding(&tests[i], i)?;
            others.insert(i, S::zero());
            Ok(others)
        })
        .collect()
}

/// Normalizes each raw row over its off-diagonal cells.
pub fn normalize_rows<S: Scalar>(rows: &[Vec<S>]) -> SimilarityMatrix<S> {
    let rows = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let others: Vec<S> = row
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, s)| s.clone())
                .collect();
            let mut normalized = min_max_normalize(&others);
            normalized.insert(i, S::zero());
            normalized
        })
        .collect();
    SimilarityMatrix { rows }
}

pub fn reference_availability(tests: &[TokenizedDoc], th: f64) -> Result<f64> {
    Ok(similarity_matrix(tests)?.reference_availability(&th))
}

pub fn referability_level(tests: &[TokenizedDoc], th: f64) -> Result<f64> {
    Ok(similarity_matrix(tests)?.referability_level(&th))
}

/// Thresholds 0.1, 0.2, ..., 0.9.
pub fn threshold_grid() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

/// `(threshold, ra, rl)` for every threshold, sharing one similarity matrix.
pub fn referability_curve(tests: &[TokenizedDoc], thresholds: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    let m = similarity_matrix(tests)?;
    Ok(thresholds
        .iter()
        .map(|th| (*th, m.reference_availability(th), m.referability_level(th)))
        .collect())
}
