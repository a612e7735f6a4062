//! Okapi BM25 over tokenized code, with min-max normalization.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::retrieval::TokenizedDoc;
use crate::scalar::{Real, Scalar};

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params<S> {
    pub k1: S,
    pub b: S,
}

impl<S: Real> Default for Bm25Params<S> {
    fn default() -> Self {
        Bm25Params {
            k1: S::lit(DEFAULT_K1),
            b: S::lit(DEFAULT_B),
        }
    }
}

/// Inverted index over a fixed corpus.
///
/// Besides plain scoring it supports leave-one-out scoring, which scores a
/// query against the corpus with one document removed (document frequencies,
/// collection size and average length all adjusted) without rebuilding.
#[derive(Debug, Clone)]
pub struct Bm25Corpus<S> {
    params: Bm25Params<S>,
    doc_len: Vec<usize>,
    total_len: usize,
    postings: HashMap<String, Vec<(usize, usize)>>,
}

impl<S: Real> Bm25Corpus<S> {
    pub fn new(corpus: &[TokenizedDoc], params: Bm25Params<S>) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut postings: HashMap<String, Vec<(usize, usize)>> = HashMap::new();
        let mut doc_len = Vec::with_capacity(corpus.len());
        for (idx, doc) in corpus.iter().enumerate() {
            doc_len.push(doc.tokens.len());
            let mut tf: HashMap<&str, usize> = HashMap::new();
            for t in &doc.tokens {
                *tf.entry(t.as_str()).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term.to_string()).or_default().push((idx, count));
            }
        }
        for list in postings.values_mut() {
            list.sort_unstable();
        }
        let total_len = doc_len.iter().sum();
        Ok(Bm25Corpus {
            params,
            doc_len,
            total_len,
            postings,
        })
    }

    pub fn len(&self) -> usize {
        self.doc_len.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_len.is_empty()
    }

    /// Raw BM25 score of every corpus document.
    pub fn raw_scores(&self, query: &TokenizedDoc) -> Vec<S> {
        self.score(query, None)
    }

    /// Raw scores against the corpus without document `excluded`; the result
    /// has `len() - 1` entries in corpus order with `excluded` skipped.
    pub fn raw_scores_excluding(&self, query: &TokenizedDoc, excluded: usize) -> Result<Vec<S>> {
        if self.len() < 2 {
            return Err(Error::EmptyCorpus);
        }
        let mut scores = self.score(query, Some(excluded));
        scores.remove(excluded);
        Ok(scores)
    }

    fn score(&self, query: &TokenizedDoc, excluded: Option<usize>) -> Vec<S> {
        let mut scores = vec![S::zero(); self.len()];
        let (n_docs, total_len) = match excluded {
            Some(e) => (self.len() - 1, self.total_len - self.doc_len[e]),
            None => (self.len(), self.total_len),
        };
        let n = S::from_count(n_docs);
        let avgdl = S::from_count(total_len) / n;
        let half = S::lit(0.5);
        let one = S::one();
        let k1 = self.params.k1;
        let b = self.params.b;

        for term in &query.tokens {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let mut df = list.len();
            if let Some(e) = excluded {
                if list.binary_search_by_key(&e, |&(d, _)| d).is_ok() {
                    df -= 1;
                }
            }
            if df == 0 {
                continue;
            }
            let df = S::from_count(df);
            let idf = ((n - df + half) / (df + half) + one).ln();
            for &(doc, tf) in list {
                if Some(doc) == excluded {
                    continue;
                }
                let tf = S::from_count(tf);
                let len_ratio = S::from_count(self.doc_len[doc]) / avgdl;
                let denom = tf + k1 * (one - b + b * len_ratio);
                scores[doc] = scores[doc] + idf * (tf * (k1 + one)) / denom;
            }
        }
        scores
    }
}

/// Min-max normalization into `[0, 1]`. When every score is equal (including
/// the single-element case) all outputs are zero.
pub fn min_max_normalize<S: Scalar>(scores: &[S]) -> Vec<S> {
    let Some(first) = scores.first() else {
        return Vec::new();
    };
    let mut lo = first.clone();
    let mut hi = first.clone();
    for s in &scores[1..] {
        if *s < lo {
            lo = s.clone();
        }
        if *s > hi {
            hi = s.clone();
        }
    }
    if !(hi > lo) {
        return vec![S::zero(); scores.len()];
    }
    let range = hi - lo.clone();
    scores
        .iter()
        .map(|s| (s.clone() - lo.clone()) / range.clone())
        .collect()
}

pub fn bm25_normalized(query: &TokenizedDoc, corpus: &[TokenizedDoc]) -> Result<Vec<f64>> {
    bm25_normalized_with(query, corpus, Bm25Params::default())
}

pub fn bm25_normalized_with<S: Real>(
    query: &TokenizedDoc,
    corpus: &[TokenizedDoc],
    params: Bm25Params<S>,
) -> Result<Vec<S>> {
    let index = Bm25Corpus::new(corpus, params)?;
    Ok(min_max_normalize(&index.raw_scores(query)))
}
