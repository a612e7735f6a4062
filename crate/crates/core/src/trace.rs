//! Stage events recorded during a generation run, stored as JSON Lines.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CrucialFact, OutcomeStatus};
use crate::pipeline::RunnerResult;
use crate::promptgen::PromptLabel;
use crate::retrieval::RefScore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    TaskStarted {
        focal: String,
        project: String,
        excluded_tests: Vec<String>,
    },
    RetrievalRanking {
        scores: Vec<RefScore<f64>>,
    },
    UsagesExtracted {
        enclosing_methods: Vec<String>,
    },
    ReferenceSelected {
        outer: usize,
        focal: Option<String>,
        test: Option<String>,
    },
    FactsRanked {
        outer: usize,
        candidates: Vec<CrucialFact<f64>>,
        selected: Vec<String>,
    },
    Prompt {
        outer: usize,
        round: usize,
        label: PromptLabel,
        system: Option<String>,
        user: String,
    },
    Response {
        outer: usize,
        round: usize,
        text: String,
    },
    MalformedOutput {
        outer: usize,
        round: usize,
    },
    Runner {
        outer: usize,
        round: usize,
        result: RunnerResult,
    },
    Classified {
        outer: usize,
        round: usize,
        status: OutcomeStatus,
        errors: Vec<String>,
    },
    ProviderFailed {
        outer: usize,
        round: usize,
        message: String,
    },
    IntentionAttempt {
        attempt: usize,
        violations: Vec<String>,
    },
    Finished {
        status: OutcomeStatus,
        outer_iterations: usize,
        refine_rounds: usize,
    },
}

pub fn to_jsonl(events: &[TraceEvent]) -> Result<String> {
    let mut out = String::new();
    for event in events {
        let line = serde_json::to_string(event)
            .map_err(|e| Error::Config(format!("trace serialization failed: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

pub fn from_jsonl(text: &str) -> Result<Vec<TraceEvent>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::IndexRead {
                path: format!("<trace line {}>", i + 1).into(),
                reason: e.to_string(),
            })
        })
        .collect()
}

pub fn write_trace(path: &Path, events: &[TraceEvent]) -> Result<()> {
    let text = to_jsonl(events)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceEvent>> {
    let text = fs::read_to_string(path).map_err(|e| Error::IndexRead {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    from_jsonl(&text)
}
