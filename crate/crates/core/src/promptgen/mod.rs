//! Prompt rendering for test editing and refinement, and extraction of the
//! generated test from model output.

mod intention;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ValidationIntention;

pub use intention::{
    check_intention, parse_intention, program_element_ratio, render_intention_prompt,
    render_intention_retry_prompt, synthesize_intention, ConstraintViolation, IntentionConstraintReport,
    IntentionSynthesis, MAX_ELEMENTS_WITHOUT_RATIO, MAX_ELEMENT_RATIO, MAX_OBJECTIVE_WORDS, MAX_PRE_EXP_WORDS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptLabel {
    Edit,
    Refine,
    IntentionSynthesis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSection {
    pub header: String,
    pub body: String,
}

impl PromptSection {
    fn new(header: &str, body: impl Into<String>) -> Self {
        PromptSection {
            header: header.to_string(),
            body: body.into(),
        }
    }
}

/// A rendered prompt. `user` is the concatenation of `sections`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: Option<String>,
    pub user: String,
    pub label: PromptLabel,
    pub sections: Vec<PromptSection>,
}

impl PromptBundle {
    fn from_sections(system: Option<String>, label: PromptLabel, sections: Vec<PromptSection>) -> Self {
        let user = sections
            .iter()
            .map(|s| format!("#{}:\n{}", s.header, s.body.trim_end()))
            .collect::<Vec<_>>()
            .join("\n\n");
        PromptBundle {
            system,
            user,
            label,
            sections,
        }
    }

    pub fn section(&self, header: &str) -> Option<&str> {
        self.sections.iter().find(|s| s.header == header).map(|s| s.body.as_str())
    }

    pub fn headers(&self) -> Vec<&str> {
        self.sections.iter().map(|s| s.header.as_str()).collect()
    }
}

pub const FOCAL_METHOD: &str = "Target Focal Method";
pub const FOCAL_CONTEXT: &str = "Target Focal Method Context";
pub const TARGET_TEST: &str = "Target Test Case";
pub const INTENTION_DESC: &str = "Target Validation Intention Desc";
pub const REFERABLE_TEST: &str = "Referable Test Case";
pub const CRUCIAL_KNOWLEDGE: &str = "Crucial Project Knowledge";
pub const INSTRUCTION: &str = "Instruction";
pub const REQUIREMENTS: &str = "Requirements";
pub const PREVIOUS_TEST: &str = "Previously Generated Test";
pub const ERROR_MESSAGES: &str = "Error Messages";

// The section names inside the instruction do not all match the headers
// above; models were prompted with exactly this text.
pub const EDIT_INSTRUCTION: &str = "Please generate ONE #Target Test Case# for #Target Focal Method# by strictly following #Target Test Case Description# and referring to #Referable Test Case# and #Relevant Project Information#.\nNOTE: #Crucial Project Knowledge# contains key facts about the project. These facts MUST be FULLY reflected in your generated #Target Test Case#.";

pub const REQUIREMENTS_TEXT: &str = "Your final output must contain only ONE test method annotated `@Test` and strictly adhere to the following format:\n1: Begin with the exact prefix: \"```package \".\n2: End with the exact suffix: \"```\".\nEnsure that no additional text appears before the prefix or after the suffix.";

pub const REVISION_INSTRUCTION: &str = "The #Previously Generated Test# does not pass; #Error Messages# lists the problems reported when compiling and running it. Please revise it into ONE corrected #Target Test Case# for #Target Focal Method# that fixes these problems while still following #Target Validation Intention Desc#.\nNOTE: #Crucial Project Knowledge# contains key facts about the project. These facts MUST be FULLY reflected in your generated #Target Test Case#.";

pub const NO_ERRORS_CAPTURED: &str = "(none captured)";

/// How much of the intention description goes into the edit prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    #[default]
    Full,
    Obj,
    ObjPre,
    ObjExp,
    None,
}

impl Granularity {
    pub const ALL: [Granularity; 5] = [
        Granularity::Full,
        Granularity::Obj,
        Granularity::ObjPre,
        Granularity::ObjExp,
        Granularity::None,
    ];

    /// `(preconditions, expected_results)`; `None` when the section is dropped.
    fn filter(self) -> Option<(bool, bool)> {
        match self {
            Granularity::Full => Some((true, true)),
            Granularity::Obj => Some((false, false)),
            Granularity::ObjPre => Some((true, false)),
            Granularity::ObjExp => Some((false, true)),
            Granularity::None => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Full => "full",
            Granularity::Obj => "obj",
            Granularity::ObjPre => "obj-pre",
            Granularity::ObjExp => "obj-exp",
            Granularity::None => "none",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Granularity {
    type Err = Error;

    /// Separators are optional: `objpre`, `obj-pre` and `obj_pre` all parse.
    fn from_str(s: &str) -> Result<Self> {
        let squashed: String = s.to_ascii_lowercase().chars().filter(|c| !matches!(c, '-' | '_')).collect();
        Granularity::ALL
            .into_iter()
            .find(|g| g.as_str().replace('-', "") == squashed)
            .ok_or_else(|| Error::Config(format!("unknown granularity {s:?} (full, obj, obj-pre, obj-exp, none)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    NoRef,
    NoFact,
}

impl Ablation {
    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::NoRef => "no-ref",
            Ablation::NoFact => "no-fact",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "no-ref" | "noref" => Ok(Ablation::NoRef),
            "no-fact" | "nofact" => Ok(Ablation::NoFact),
            _ => Err(Error::Config(format!("unknown ablation {s:?} (no-ref, no-fact)"))),
        }
    }
}

/// Everything the edit prompt is built from.
#[derive(Debug, Clone)]
pub struct EditPromptInput<'a> {
    pub focal_code: &'a str,
    pub skeleton: &'a str,
    pub framework_version: &'a str,
    pub desc: &'a ValidationIntention,
    /// Absent when no reference could be retrieved.
    pub reference_test: Option<&'a str>,
    pub facts: &'a [String],
    pub granularity: Granularity,
    pub ablations: &'a BTreeSet<Ablation>,
    pub system: Option<&'a str>,
}

fn numbered_facts(facts: &[String]) -> String {
    if facts.is_empty() {
        return "(none)".to_string();
    }
    facts
        .iter()
        .enumerate()
        .map(|(i, f)| format!("{}. {}", i + 1, f.trim_end()))
        .collect::<Vec<_>>()
        .join("\n")
}

fn content_sections(input: &EditPromptInput<'_>) -> Vec<PromptSection> {
    let mut sections = vec![
        PromptSection::new(FOCAL_METHOD, input.focal_code.trim_end()),
        PromptSection::new(FOCAL_CONTEXT, input.skeleton.trim_end()),
        PromptSection::new(
            TARGET_TEST,
            format!("// A JUnit {} test case to be generated", input.framework_version),
        ),
    ];
    if let Some((pre, exp)) = input.granularity.filter() {
        sections.push(PromptSection::new(INTENTION_DESC, input.desc.render_filtered(pre, exp)));
    }
    if !input.ablations.contains(&Ablation::NoRef) {
        if let Some(reference) = input.reference_test {
            sections.push(PromptSection::new(REFERABLE_TEST, reference.trim_end()));
        }
    }
    if !input.ablations.contains(&Ablation::NoFact) {
        sections.push(PromptSection::new(CRUCIAL_KNOWLEDGE, numbered_facts(input.facts)));
    }
    sections
}

pub fn render_edit_prompt(input: &EditPromptInput<'_>) -> PromptBundle {
    let mut sections = content_sections(input);
    sections.push(PromptSection::new(INSTRUCTION, EDIT_INSTRUCTION));
    sections.push(PromptSection::new(REQUIREMENTS, REQUIREMENTS_TEXT));
    PromptBundle::from_sections(input.system.map(str::to_string), PromptLabel::Edit, sections)
}

/// Edit prompt plus the failing test and its diagnostics, with the
/// instruction swapped for a revision request.
pub fn render_refine_prompt(edit: &PromptBundle, previous_test: &str, errors: &[String]) -> PromptBundle {
    let mut sections: Vec<PromptSection> = edit
        .sections
        .iter()
        .filter(|s| s.header != INSTRUCTION && s.header != REQUIREMENTS)
        .cloned()
        .collect();
    sections.push(PromptSection::new(PREVIOUS_TEST, previous_test.trim_end()));
    let errors = if errors.is_empty() {
        NO_ERRORS_CAPTURED.to_string()
    } else {
        errors.join("\n\n")
    };
    sections.push(PromptSection::new(ERROR_MESSAGES, errors));
    sections.push(PromptSection::new(INSTRUCTION, REVISION_INSTRUCTION));
    let requirements = edit.section(REQUIREMENTS).unwrap_or(REQUIREMENTS_TEXT);
    sections.push(PromptSection::new(REQUIREMENTS, requirements));
    PromptBundle::from_sections(edit.system.clone(), PromptLabel::Refine, sections)
}

const FENCE: &str = "```";

/// Text between the first ```` ``` ```` fence whose body starts with
/// `package ` and the next fence. One trailing newline before the closing
/// fence is dropped. A language tag on its own line after the opening fence
/// is tolerated.
pub fn extract_test_code(output: &str) -> Result<String> {
    let mut rest = output;
    while let Some(open) = rest.find(FENCE) {
        let after = &rest[open + FENCE.len()..];
        let body = if after.starts_with("package ") {
            Some(after)
        } else {
            after
                .split_once('\n')
                .filter(|(tag, tail)| {
                    tag.trim().chars().all(|c| c.is_ascii_alphanumeric()) && tail.starts_with("package ")
                })
                .map(|(_, tail)| tail)
        };
        let Some(close) = after.find(FENCE) else { break };
        if let Some(body) = body {
            if let Some(end) = body.find(FENCE) {
                let code = &body[..end];
                let code = code.strip_suffix('\n').unwrap_or(code);
                return Ok(code.to_string());
            }
        }
        rest = &after[close + FENCE.len()..];
    }
    Err(Error::MalformedOutput)
}
