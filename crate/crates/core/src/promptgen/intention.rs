//! Reverse-engineering a validation intention from an existing test, and
//! the length and program-element limits such descriptions must respect.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{PromptBundle, PromptLabel, PromptSection};
use crate::error::{Error, Result};
use crate::llm::{CompletionProvider, CompletionRequest};
use crate::model::ValidationIntention;
use crate::trace::TraceEvent;

pub const MAX_OBJECTIVE_WORDS: usize = 50;
pub const MAX_PRE_EXP_WORDS: usize = 200;
/// Descriptions with at most this many distinct program elements are exempt
/// from the ratio limit.
pub const MAX_ELEMENTS_WITHOUT_RATIO: usize = 3;
pub const MAX_ELEMENT_RATIO: f64 = 0.1;

const DEFINITIONS: &str = "Objective: the purpose of the test case, i.e. the behaviour or property of the test item that executing it is meant to confirm.\nPreconditions: the state the test item and its environment must be in before the test case runs, including the inputs it is given.\nExpected Results: the observable outcome the test item should produce when it is exercised under the preconditions.";

const INSTRUCTION: &str = "Describe the validation intention of #Test Case#, which tests #Focal Method#, using the three components defined in #Component Definitions#. Objective is mandatory. Preconditions and Expected Results are optional; leave out a section that would be empty. Enclose every program element you mention (identifier, literal or code fragment) in backticks.";

const CONSTRAINTS: &str = "1. \"objective\" is limited to 50 words;\n2. the combined length of \"preconditions\" and \"expected results\" is limited to 200 words;\n3. the description shall contain minimized program elements.";

const OUTPUT_FORMAT: &str = "# Objective:\n<one paragraph>\n# Preconditions:\n1. <item>\n# Expected Results:\n1. <item>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstraintViolation {
    ObjectiveTooLong,
    PreExpTooLong,
    RatioTooHigh,
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl ConstraintViolation {
    fn feedback(self, report: &IntentionConstraintReport) -> String {
        match self {
            ConstraintViolation::ObjectiveTooLong => format!(
                "The objective has {} words; it must have at most {MAX_OBJECTIVE_WORDS}.",
                report.objective_words
            ),
            ConstraintViolation::PreExpTooLong => format!(
                "Preconditions and expected results have {} words together; they must have at most {MAX_PRE_EXP_WORDS}.",
                report.pre_exp_words
            ),
            ConstraintViolation::RatioTooHigh => format!(
                "The description mentions {} program elements; use at most {MAX_ELEMENTS_WITHOUT_RATIO} or far fewer relative to the test.",
                report.element_count
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentionConstraintReport {
    pub objective_words: usize,
    pub pre_exp_words: usize,
    pub element_ratio: f64,
    /// Distinct program elements in the description.
    pub element_count: usize,
    /// Description elements that also occur in the test.
    pub shared_elements: usize,
    /// Distinct `\w+` tokens of the test.
    pub test_elements: usize,
    pub violations: Vec<ConstraintViolation>,
}

impl IntentionConstraintReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn word_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\w+").expect("valid regex"))
}

fn backtick_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"`([^`]*)`").expect("valid regex"))
}

fn header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^\s*#+\s*\**\s*(objective|preconditions|expected\s+results)\s*\**\s*:?\s*\**\s*(.*)$")
            .expect("valid regex")
    })
}

fn item_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:\d+[.)]|[-*])\s+(.*)$").expect("valid regex"))
}

fn words(s: &str) -> usize {
    s.split_whitespace().count()
}

fn unique_tokens(text: &str) -> BTreeSet<&str> {
    word_re().find_iter(text).map(|m| m.as_str()).collect()
}

/// Lengths and program-element ratio of a rendered description against the
/// test it describes.
pub fn program_element_ratio(desc_text: &str, test_code: &str) -> IntentionConstraintReport {
    let (objective_words, pre_exp_words) = match parse_intention(desc_text) {
        Ok(d) => (
            words(&d.objective),
            d.preconditions.iter().chain(&d.expected_results).map(|s| words(s)).sum(),
        ),
        Err(_) => (words(desc_text), 0),
    };
    let desc_elements: BTreeSet<&str> = backtick_re()
        .captures_iter(desc_text)
        .flat_map(|c| word_re().find_iter(c.get(1).map_or("", |m| m.as_str())).map(|m| m.as_str()))
        .collect();
    let test_elements = unique_tokens(test_code);
    let shared = desc_elements.intersection(&test_elements).count();
    let element_ratio = if test_elements.is_empty() {
        0.0
    } else {
        shared as f64 / test_elements.len() as f64
    };
    let mut violations = Vec::new();
    if objective_words > MAX_OBJECTIVE_WORDS {
        violations.push(ConstraintViolation::ObjectiveTooLong);
    }
    if pre_exp_words > MAX_PRE_EXP_WORDS {
        violations.push(ConstraintViolation::PreExpTooLong);
    }
    // ratio >= 1/10, compared on integers
    if desc_elements.len() > MAX_ELEMENTS_WITHOUT_RATIO && !test_elements.is_empty() && 10 * shared >= test_elements.len()
    {
        violations.push(ConstraintViolation::RatioTooHigh);
    }
    IntentionConstraintReport {
        objective_words,
        pre_exp_words,
        element_ratio,
        element_count: desc_elements.len(),
        shared_elements: shared,
        test_elements: test_elements.len(),
        violations,
    }
}

pub fn check_intention(desc: &ValidationIntention, test_code: &str) -> IntentionConstraintReport {
    program_element_ratio(&desc.render(), test_code)
}

#[derive(Clone, Copy, PartialEq)]
enum Part {
    Objective,
    Pre,
    Exp,
}

/// Parses `# Objective:` / `# Preconditions:` / `# Expected Results:`
/// sections. Numbered or bulleted lines start list items; other lines
/// continue the current one. A surrounding code fence is ignored.
pub fn parse_intention(text: &str) -> Result<ValidationIntention> {
    let mut objective: Vec<String> = Vec::new();
    let mut pre: Vec<String> = Vec::new();
    let mut exp: Vec<String> = Vec::new();
    let mut part: Option<Part> = None;
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            continue;
        }
        let content = match header_re().captures(line) {
            Some(c) => {
                let name = c[1].to_ascii_lowercase();
                part = Some(match name.as_str() {
                    "objective" => Part::Objective,
                    "preconditions" => Part::Pre,
                    _ => Part::Exp,
                });
                c[2].trim().to_string()
            }
            None => line.to_string(),
        };
        let Some(p) = part else { continue };
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let list = match p {
            Part::Objective => {
                objective.push(trimmed.to_string());
                continue;
            }
            Part::Pre => &mut pre,
            Part::Exp => &mut exp,
        };
        match item_re().captures(&content) {
            Some(c) => list.push(c[1].trim().to_string()),
            None => match list.last_mut() {
                Some(last) => {
                    last.push(' ');
                    last.push_str(trimmed);
                }
                None => list.push(trimmed.to_string()),
            },
        }
    }
    let objective = objective.join(" ");
    if objective.trim().is_empty() {
        return Err(Error::MalformedOutput);
    }
    ValidationIntention::new(objective, pre, exp).map_err(|_| Error::MalformedOutput)
}

fn intention_sections(test_code: &str, focal_code: &str) -> Vec<PromptSection> {
    vec![
        PromptSection::new("Test Case", test_code.trim_end()),
        PromptSection::new("Focal Method", focal_code.trim_end()),
        PromptSection::new("Component Definitions", DEFINITIONS),
        PromptSection::new("Instruction", INSTRUCTION),
        PromptSection::new("Constraints", CONSTRAINTS),
        PromptSection::new("Output Format", OUTPUT_FORMAT),
    ]
}

pub fn render_intention_prompt(test_code: &str, focal_code: &str, system: Option<&str>) -> PromptBundle {
    PromptBundle::from_sections(
        system.map(str::to_string),
        PromptLabel::IntentionSynthesis,
        intention_sections(test_code, focal_code),
    )
}

/// The base prompt plus what was wrong with the previous answer.
pub fn render_intention_retry_prompt(
    test_code: &str,
    focal_code: &str,
    system: Option<&str>,
    feedback: &[String],
) -> PromptBundle {
    let mut sections = intention_sections(test_code, focal_code);
    let body = feedback.iter().map(|f| format!("- {f}")).collect::<Vec<_>>().join("\n");
    sections.push(PromptSection::new("Previous Attempt Problems", body));
    PromptBundle::from_sections(system.map(str::to_string), PromptLabel::IntentionSynthesis, sections)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentionSynthesis {
    pub intention: ValidationIntention,
    pub attempts: usize,
    pub report: IntentionConstraintReport,
    pub trace: Vec<TraceEvent>,
}

/// Asks the model for a description until one parses and meets every
/// limit, feeding the previous problems back into the next prompt.
pub fn synthesize_intention(
    provider: &dyn CompletionProvider,
    model_id: &str,
    system: Option<&str>,
    test_code: &str,
    focal_code: &str,
    max_attempts: usize,
) -> Result<IntentionSynthesis> {
    if max_attempts == 0 {
        return Err(Error::Config("max_attempts must be at least 1".into()));
    }
    let mut trace = Vec::new();
    let mut feedback: Vec<String> = Vec::new();
    let mut last_violations = String::new();
    for attempt in 1..=max_attempts {
        let prompt = if feedback.is_empty() {
            render_intention_prompt(test_code, focal_code, system)
        } else {
            render_intention_retry_prompt(test_code, focal_code, system, &feedback)
        };
        trace.push(TraceEvent::Prompt {
            outer: 0,
            round: attempt,
            label: prompt.label,
            system: prompt.system.clone(),
            user: prompt.user.clone(),
        });
        let request = CompletionRequest::new(model_id, prompt.system.clone(), prompt.user.clone());
        let text = provider.complete(&request)?;
        trace.push(TraceEvent::Response {
            outer: 0,
            round: attempt,
            text: text.clone(),
        });
        let (violations, next_feedback) = match parse_intention(&text) {
            Ok(intention) => {
                let report = check_intention(&intention, test_code);
                if report.is_ok() {
                    trace.push(TraceEvent::IntentionAttempt {
                        attempt,
                        violations: Vec::new(),
                    });
                    return Ok(IntentionSynthesis {
                        intention,
                        attempts: attempt,
                        report,
                        trace,
                    });
                }
                let names = report.violations.iter().map(|v| v.to_string()).collect();
                let feedback = report.violations.iter().map(|v| v.feedback(&report)).collect();
                (names, feedback)
            }
            Err(_) => (
                vec!["Unparsable".to_string()],
                vec!["The answer did not follow #Output Format#; it must contain an \"# Objective:\" section.".to_string()],
            ),
        };
        last_violations = violations.join(", ");
        trace.push(TraceEvent::IntentionAttempt { attempt, violations });
        feedback = next_feedback;
    }
    Err(Error::IntentionSynthesis {
        attempts: max_attempts,
        last_violations,
    })
}
