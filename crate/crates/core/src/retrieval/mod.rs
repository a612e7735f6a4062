//! Lexical and semantic similarity, reference selection scoring, and the
//! corpus-level referability metrics.

mod bm25;
mod embedding;
mod referability;
mod tokenize;

pub use bm25::{
    bm25_normalized, bm25_normalized_with, min_max_normalize, Bm25Corpus, Bm25Params, DEFAULT_B,
    DEFAULT_K1,
};
pub use embedding::{
    clamp_similarity, cosine, semantic_sim, CachedEmbedder, EmbeddingProvider, EmbeddingVector,
    HashingEmbedder, HttpEmbedder, HttpEmbedderConfig, HASHING_DIM,
};
pub use referability::{
    normalize_rows, raw_similarity_rows, referability_curve, referability_level,
    reference_availability, similarity_matrix, similarity_matrix_with, threshold_grid,
    SimilarityMatrix,
};
pub use tokenize::{tokenize, tokenize_code, TokenizedDoc};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MethodTestPair, ValidationIntention};
use crate::scalar::Scalar;

/// Estimated referability of one historical pair for the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefScore<S> {
    pub focal: String,
    pub test: String,
    pub code_sim: S,
    pub desc_sim: S,
    #[serde(rename = "ref")]
    pub ref_score: S,
}

/// A pair together with the source text of its focal method.
#[derive(Debug, Clone, Copy)]
pub struct RefCandidate<'a> {
    pub pair: &'a MethodTestPair,
    pub focal_code: &'a str,
}

pub(crate) fn check_unit_weight(name: &str, w: f64) -> Result<()> {
    if w > 0.0 && w < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in (0, 1), got {w}")))
    }
}

/// `alpha * code_sim + (1 - alpha) * desc_sim`, evaluated as
/// `desc_sim + alpha * (code_sim - desc_sim)` so equal inputs come back unchanged.
pub fn combine_ref<S: Scalar>(alpha: &S, code_sim: &S, desc_sim: &S) -> S {
    desc_sim.clone() + alpha.clone() * (code_sim.clone() - desc_sim.clone())
}

/// Descending by score, ties by `(test, focal)`; stable.
pub fn rank_ref_scores<S: Scalar>(scores: &mut [RefScore<S>]) {
    scores.sort_by(|a, b| {
        b.ref_score
            .partial_cmp(&a.ref_score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| (&a.test, &a.focal).cmp(&(&b.test, &b.focal)))
    });
}

/// Combines precomputed similarity vectors (aligned with `candidates`) and ranks.
pub fn ref_scores_from_sims<S: Scalar>(
    candidates: &[RefCandidate<'_>],
    code_sims: &[S],
    desc_sims: &[S],
    alpha: &S,
) -> Vec<RefScore<S>> {
    let mut out: Vec<RefScore<S>> = candidates
        .iter()
        .zip(code_sims.iter().zip(desc_sims))
        .map(|(c, (code, desc))| RefScore {
            focal: c.pair.focal.clone(),
            test: c.pair.test.clone(),
            code_sim: code.clone(),
            desc_sim: desc.clone(),
            ref_score: combine_ref(alpha, code, desc),
        })
        .collect();
    rank_ref_scores(&mut out);
    out
}

/// Scores every candidate pair against the target focal method and
/// intention, highest first.
pub fn ref_score(
    m_tar: &str,
    desc_tar: &ValidationIntention,
    candidates: &[RefCandidate<'_>],
    alpha: f64,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<RefScore<f64>>> {
    check_unit_weight("alpha", alpha)?;
    if candidates.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let corpus: Vec<TokenizedDoc> = candidates
        .iter()
        .map(|c| TokenizedDoc::new(c.pair.focal.clone(), c.focal_code))
        .collect();
    let code_sims = bm25_normalized(&tokenize_code(m_tar), &corpus)?;
    let target_desc = desc_tar.render();
    let desc_sims = candidates
        .iter()
        .map(|c| semantic_sim(provider, &target_desc, &c.pair.desc.render()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ref_scores_from_sims(candidates, &code_sims, &desc_sims, &alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(focal: &str, test: &str, objective: &str) -> MethodTestPair {
        MethodTestPair {
            focal: focal.into(),
            test: test.into(),
            desc: ValidationIntention::objective_only(objective).unwrap(),
        }
    }

    #[test]
    fn identical_pair_ranks_first_with_score_one() {
        let desc = ValidationIntention::objective_only("Tests creating a server with a pool").unwrap();
        let p1 = pair("f1", "t1", "Tests creating a server with a pool");
        let p2 = pair("f2", "t2", "Tests parsing cron fields");
        let code1 = "public Server create(ThreadPool pool) { return new Server(pool); }";
        let code2 = "public Cron parse(String expr) { return parser.parse(expr); }";
        let cands = [
            RefCandidate { pair: &p2, focal_code: code2 },
            RefCandidate { pair: &p1, focal_code: code1 },
        ];
        for alpha in [0.1, 0.5, 0.9] {
            let out = ref_score(code1, &desc, &cands, alpha, &HashingEmbedder::new()).unwrap();
            assert_eq!(out[0].test, "t1");
            assert_eq!(out[0].ref_score, 1.0);
        }
    }

    #[test]
    fn eq3_direct_evaluation() {
        let r = combine_ref(&0.5f64, &0.6, &0.2);
        assert!((r - 0.4).abs() < 1e-15);
    }

    #[test]
    fn alpha_weighs_code_similarity() {
        let p1 = pair("f1", "t1", "x");
        let p2 = pair("f2", "t2", "y");
        let cands = [
            RefCandidate { pair: &p2, focal_code: "" },
            RefCandidate { pair: &p1, focal_code: "" },
        ];
        let out = ref_scores_from_sims(&cands, &[0.0f64, 1.0], &[1.0, 0.0], &0.7);
        assert_eq!(out[0].test, "t1");
        assert!((out[0].ref_score - 0.7).abs() < 1e-15);
        assert!((out[1].ref_score - 0.3).abs() < 1e-15);
    }

    #[test]
    fn ties_break_by_test_id() {
        let p1 = pair("f", "b", "x");
        let p2 = pair("f", "a", "x");
        let cands = [
            RefCandidate { pair: &p1, focal_code: "" },
            RefCandidate { pair: &p2, focal_code: "" },
        ];
        let out = ref_scores_from_sims(&cands, &[0.5, 0.5], &[0.5, 0.5], &0.5);
        assert_eq!(out[0].test, "a");
    }

    #[test]
    fn alpha_outside_open_interval_is_rejected() {
        let p = pair("f", "t", "x");
        let desc = ValidationIntention::objective_only("x").unwrap();
        let cands = [RefCandidate { pair: &p, focal_code: "" }];
        assert!(ref_score("", &desc, &cands, 1.0, &HashingEmbedder::new()).is_err());
        assert!(ref_score("", &desc, &cands, 0.0, &HashingEmbedder::new()).is_err());
    }

    #[test]
    fn empty_candidates_propagate_empty_corpus() {
        let desc = ValidationIntention::objective_only("x").unwrap();
        assert!(matches!(
            ref_score("", &desc, &[], 0.5, &HashingEmbedder::new()),
            Err(Error::EmptyCorpus)
        ));
    }
}
