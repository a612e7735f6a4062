//! The generation loop: retrieve a reference, collect crucial facts, ask
//! the model for a test, then compile, run and repair it.

mod runner;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use runner::{
    classify, extract_errors, run_phase, Phase, RunnerConfig, RunnerResult, TestFile, DEFAULT_ASSERTION_MARKERS,
    FALLBACK_TEST_CLASS, PLACEHOLDERS,
};

use crate::discriminator::{explore, score_candidates, ExplorationSeed, OccurrenceScale};
use crate::error::{Error, Result};
use crate::llm::{CompletionProvider, CompletionRequest};
use crate::model::{CodeGraph, GenerationOutcome, MethodTestPair, OutcomeStatus, ValidationIntention};
use crate::promptgen::{
    extract_test_code, render_edit_prompt, render_refine_prompt, Ablation, EditPromptInput, Granularity, PromptBundle,
};
use crate::retrieval::{ref_score, EmbeddingProvider, RefCandidate, RefScore};
use crate::source::{detect_framework_version, extract_usages, file_skeleton, DEFAULT_FRAMEWORK_VERSION};
use crate::trace::TraceEvent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub alpha: f64,
    pub beta: f64,
    pub top_k: usize,
    pub depth: usize,
    pub occurrence_scale: OccurrenceScale,
    pub max_outer: usize,
    pub max_refine: usize,
    pub granularity: Granularity,
    pub ablations: BTreeSet<Ablation>,
    /// Overrides the version detected from the project's test imports.
    pub framework_version: Option<String>,
    pub model_id: String,
    pub temperature: f64,
    pub system_prompt: Option<String>,
    pub runner: RunnerConfig,
    /// Real durations in the trace; off by default so replays compare equal.
    pub record_timings: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            alpha: 0.5,
            beta: crate::discriminator::DEFAULT_BETA,
            top_k: crate::discriminator::DEFAULT_TOP_K,
            depth: crate::discriminator::DEFAULT_DEPTH,
            occurrence_scale: OccurrenceScale::Normalized,
            max_outer: 5,
            max_refine: 4,
            granularity: Granularity::Full,
            ablations: BTreeSet::new(),
            framework_version: None,
            model_id: "default".into(),
            temperature: 0.0,
            system_prompt: None,
            runner: RunnerConfig::default(),
            record_timings: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        crate::retrieval::check_unit_weight("alpha", self.alpha)?;
        crate::retrieval::check_unit_weight("beta", self.beta)?;
        for (name, v) in [
            ("top_k", self.top_k),
            ("depth", self.depth),
            ("max_outer", self.max_outer),
            ("max_refine", self.max_refine),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        self.runner.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationTask {
    pub focal: String,
    pub desc: ValidationIntention,
    pub config: PipelineConfig,
}

/// Tests held out from a task: every indexed test paired with its focal method.
pub fn held_out_tests(focal: &str, pairs: &[MethodTestPair]) -> BTreeSet<String> {
    pairs
        .iter()
        .filter(|p| p.focal == focal)
        .map(|p| p.test.clone())
        .collect()
}

/// Most common framework version among the project's files, or the default.
pub fn project_framework_version(graph: &CodeGraph) -> String {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for f in graph.files() {
        if let Some(v) = detect_framework_version(f) {
            *counts.entry(v).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)))
        .map(|(v, _)| v)
        .unwrap_or_else(|| DEFAULT_FRAMEWORK_VERSION.to_string())
}

/// Everything fixed for the whole task.
struct Prepared<'a> {
    graph: &'a CodeGraph,
    task: &'a GenerationTask,
    focal_code: String,
    skeleton: String,
    framework_version: String,
    excluded: BTreeSet<String>,
    ranking: Vec<RefScore<f64>>,
    usages: Vec<crate::source::Usage>,
}

fn prepare<'a>(
    task: &'a GenerationTask,
    graph: &'a CodeGraph,
    pairs: &[MethodTestPair],
    embedder: &dyn EmbeddingProvider,
    trace: &mut Vec<TraceEvent>,
) -> Result<Prepared<'a>> {
    task.config.validate()?;
    let focal = graph.require(&task.focal)?;
    let excluded = held_out_tests(&task.focal, pairs);
    trace.push(TraceEvent::TaskStarted {
        focal: task.focal.clone(),
        project: graph.project_root().display().to_string(),
        excluded_tests: excluded.iter().cloned().collect(),
    });
    let ablations = &task.config.ablations;

    let ranking = if ablations.contains(&Ablation::NoRef) {
        Vec::new()
    } else {
        let candidates: Vec<RefCandidate<'_>> = pairs
            .iter()
            .filter(|p| !excluded.contains(&p.test) && p.focal != task.focal)
            .filter_map(|p| {
                graph.node(&p.focal).map(|n| RefCandidate {
                    pair: p,
                    focal_code: n.body_text.as_str(),
                })
            })
            .collect();
        if candidates.is_empty() {
            Vec::new()
        } else {
            ref_score(&focal.body_text, &task.desc, &candidates, task.config.alpha, embedder)?
        }
    };
    trace.push(TraceEvent::RetrievalRanking { scores: ranking.clone() });

    let usages = if ablations.contains(&Ablation::NoFact) {
        Vec::new()
    } else {
        extract_usages(graph, &task.focal, &excluded)?
    };
    trace.push(TraceEvent::UsagesExtracted {
        enclosing_methods: usages.iter().map(|u| u.enclosing_method.clone()).collect(),
    });

    Ok(Prepared {
        graph,
        task,
        focal_code: focal.body_text.clone(),
        skeleton: file_skeleton(graph, &focal.file_path)?,
        framework_version: task
            .config
            .framework_version
            .clone()
            .unwrap_or_else(|| project_framework_version(graph)),
        excluded,
        ranking,
        usages,
    })
}

impl Prepared<'_> {
    /// Reference for outer iteration `outer` (1-based): the `outer`-th best,
    /// or the last one once the ranking runs out.
    fn reference(&self, outer: usize) -> Option<&RefScore<f64>> {
        if self.ranking.is_empty() {
            return None;
        }
        self.ranking.get((outer - 1).min(self.ranking.len() - 1))
    }

    fn edit_prompt(&self, outer: usize, embedder: &dyn EmbeddingProvider, trace: &mut Vec<TraceEvent>) -> Result<PromptBundle> {
        let cfg = &self.task.config;
        let reference = self.reference(outer);
        trace.push(TraceEvent::ReferenceSelected {
            outer,
            focal: reference.map(|r| r.focal.clone()),
            test: reference.map(|r| r.test.clone()),
        });
        let reference_code = match reference {
            Some(r) => Some(self.graph.require(&r.test)?.body_text.clone()),
            None => None,
        };

        let facts: Vec<String> = if cfg.ablations.contains(&Ablation::NoFact) {
            Vec::new()
        } else {
            let seeds = ExplorationSeed::new(self.graph, &self.task.focal, reference.map(|r| r.test.as_str()))?;
            let candidates = explore::<f64>(self.graph, &seeds, cfg.depth, &self.excluded)?;
            let scored = score_candidates(
                candidates,
                &self.task.desc,
                &self.usages,
                embedder,
                cfg.beta,
                cfg.occurrence_scale,
            )?;
            let selected: Vec<_> = scored.iter().take(cfg.top_k).collect();
            let rendered = selected.iter().map(|f| f.rendered.clone()).collect();
            trace.push(TraceEvent::FactsRanked {
                outer,
                selected: selected.iter().map(|f| f.key()).collect(),
                candidates: scored.clone(),
            });
            rendered
        };

        let prompt = render_edit_prompt(&EditPromptInput {
            focal_code: &self.focal_code,
            skeleton: &self.skeleton,
            framework_version: &self.framework_version,
            desc: &self.task.desc,
            reference_test: reference_code.as_deref(),
            facts: &facts,
            granularity: cfg.granularity,
            ablations: &cfg.ablations,
            system: cfg.system_prompt.as_deref(),
        });
        Ok(prompt)
    }
}

/// The first edit prompt, without contacting a model or running anything.
pub fn dry_run(
    task: &GenerationTask,
    graph: &CodeGraph,
    pairs: &[MethodTestPair],
    embedder: &dyn EmbeddingProvider,
) -> Result<(PromptBundle, Vec<TraceEvent>)> {
    let mut trace = Vec::new();
    let prepared = prepare(task, graph, pairs, embedder, &mut trace)?;
    let prompt = prepared.edit_prompt(1, embedder, &mut trace)?;
    trace.push(prompt_event(1, 0, &prompt));
    Ok((prompt, trace))
}

fn prompt_event(outer: usize, round: usize, p: &PromptBundle) -> TraceEvent {
    TraceEvent::Prompt {
        outer,
        round,
        label: p.label,
        system: p.system.clone(),
        user: p.user.clone(),
    }
}

const MALFORMED_NOTE: &str = "The previous answer contained no fenced code block starting with \"package \".";

/// Runs the full loop for one task. A provider failure ends the run early
/// with the last classification (compilation failure when nothing ran yet).
pub fn generate(
    task: &GenerationTask,
    graph: &CodeGraph,
    pairs: &[MethodTestPair],
    llm: &dyn CompletionProvider,
    embedder: &dyn EmbeddingProvider,
) -> Result<GenerationOutcome> {
    let cfg = &task.config;
    let mut trace = Vec::new();
    let prepared = prepare(task, graph, pairs, embedder, &mut trace)?;
    let markers = cfg.runner.marker_regexes()?;
    let root = graph.project_root();

    let mut status = OutcomeStatus::CompilationFailure;
    let mut test_text = String::new();
    let mut outer_done = 0;
    let mut rounds_done = 0;

    let complete = |prompt: &PromptBundle, outer: usize, round: usize, trace: &mut Vec<TraceEvent>| {
        trace.push(prompt_event(outer, round, prompt));
        let mut request = CompletionRequest::new(cfg.model_id.clone(), prompt.system.clone(), prompt.user.clone());
        request.temperature = cfg.temperature;
        match llm.complete(&request) {
            Ok(text) => {
                trace.push(TraceEvent::Response {
                    outer,
                    round,
                    text: text.clone(),
                });
                Some(text)
            }
            Err(e) => {
                trace.push(TraceEvent::ProviderFailed {
                    outer,
                    round,
                    message: e.to_string(),
                });
                None
            }
        }
    };

    'outer: for outer in 1..=cfg.max_outer {
        outer_done = outer;
        rounds_done = 0;
        let edit = prepared.edit_prompt(outer, embedder, &mut trace)?;
        let Some(mut response) = complete(&edit, outer, 0, &mut trace) else {
            break 'outer;
        };
        let mut round = 0;
        loop {
            let (previous, errors) = match extract_test_code(&response) {
                Ok(code) => {
                    test_text = code.clone();
                    let (s, errors) = evaluate(root, &code, &cfg.runner, &markers, cfg.record_timings, outer, round, &mut trace)?;
                    status = s;
                    if status == OutcomeStatus::Pass {
                        break 'outer;
                    }
                    (code, errors)
                }
                Err(Error::MalformedOutput) => {
                    trace.push(TraceEvent::MalformedOutput { outer, round });
                    status = OutcomeStatus::CompilationFailure;
                    test_text = response.clone();
                    let previous = if response.trim().is_empty() {
                        "(empty answer)".to_string()
                    } else {
                        response.clone()
                    };
                    (previous, vec![MALFORMED_NOTE.to_string()])
                }
                Err(e) => return Err(e),
            };
            if round == cfg.max_refine {
                break;
            }
            round += 1;
            rounds_done = round;
            let refine = render_refine_prompt(&edit, &previous, &errors);
            match complete(&refine, outer, round, &mut trace) {
                Some(text) => response = text,
                None => break 'outer,
            }
        }
    }

    trace.push(TraceEvent::Finished {
        status,
        outer_iterations: outer_done,
        refine_rounds: rounds_done,
    });
    Ok(GenerationOutcome {
        focal: task.focal.clone(),
        project: root.display().to_string(),
        status,
        test_text,
        outer_iterations: outer_done,
        refine_rounds: rounds_done,
        trace,
    })
}

/// Compile, then execute when compilation succeeded; classify and collect
/// in-project diagnostics.
#[allow(clippy::too_many_arguments)]
fn evaluate(
    root: &Path,
    code: &str,
    runner: &RunnerConfig,
    markers: &[regex::Regex],
    record_timings: bool,
    outer: usize,
    round: usize,
    trace: &mut Vec<TraceEvent>,
) -> Result<(OutcomeStatus, Vec<String>)> {
    let file = TestFile::from_code(code, &runner.test_source_dir);
    let record = |mut r: RunnerResult, trace: &mut Vec<TraceEvent>| {
        if !record_timings {
            r.duration = 0.0;
        }
        trace.push(TraceEvent::Runner {
            outer,
            round,
            result: r,
        });
    };
    let compile = run_phase(
        root,
        Phase::Compile,
        &runner.compile_cmd,
        &file,
        Duration::from_secs(runner.compile_timeout_secs),
    )?;
    record(compile.clone(), trace);
    let execute = if compile.succeeded() {
        let r = run_phase(
            root,
            Phase::Execute,
            &runner.test_cmd,
            &file,
            Duration::from_secs(runner.execute_timeout_secs),
        )?;
        record(r.clone(), trace);
        Some(r)
    } else {
        None
    };
    let status = classify(&compile, execute.as_ref(), markers);
    let last = execute.as_ref().unwrap_or(&compile);
    let errors = if status == OutcomeStatus::Pass {
        Vec::new()
    } else {
        let mut errors = extract_errors(last, root);
        if last.timed_out {
            errors.push(format!("{:?} phase timed out", last.phase));
        }
        errors
    };
    trace.push(TraceEvent::Classified {
        outer,
        round,
        status,
        errors: errors.clone(),
    });
    Ok((status, errors))
}
