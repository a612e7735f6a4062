//! Intention-driven, project-specific unit test generation.
//!
//! The crate indexes a Java project into a [`CodeGraph`], retrieves a
//! referable historical test for a target focal method, ranks crucial project
//! facts, prompts a completion provider to edit the reference into a new
//! test, and repairs the result against the project's own build commands.
//!
//! Scoring code is generic over [`scalar::Scalar`]; the aliases below fix the
//! scalar to `f64`, which is what the pipeline uses.

pub mod config;
pub mod discriminator;
pub mod error;
pub mod index;
pub mod llm;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod promptgen;
pub mod retrieval;
pub mod scalar;
pub mod source;
pub mod trace;

pub use error::{Error, Result};
pub use model::{
    CodeGraph, Direction, EdgeKind, EntityKind, EntityNode, FactSubject, GenerationOutcome,
    MethodTestPair, OutcomeStatus, RelationEdge, SourceFile, Span, ValidationIntention,
};

/// Exact rational scalar for oracle-grade evaluation of the scoring formulas.
pub type Exact = num::BigRational;

pub type RefScore = retrieval::RefScore<f64>;
pub type CrucialFact = model::CrucialFact<f64>;
pub type SimilarityMatrix = retrieval::SimilarityMatrix<f64>;
