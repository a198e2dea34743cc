use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::TestReport;
use crate::scenario::Mode;

pub const DEFAULT_CONTEXT: &str = include_str!("../../fixtures/prompts/context.md");
pub const CAEM_TASK: &str = include_str!("../../fixtures/prompts/caem_task.md");
pub const ACC_TASK: &str = include_str!("../../fixtures/prompts/acc_task.md");

pub fn default_task(mode: Mode) -> &'static str {
    match mode {
        Mode::Caem => CAEM_TASK,
        Mode::Acc => ACC_TASK,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromptKind {
    Specification,
    Correction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SectionLabel {
    Context,
    ScenarioDescription,
    LastVersionOfCode,
    TestResults,
    TaskDescription,
}

impl SectionLabel {
    pub fn title(self) -> &'static str {
        match self {
            SectionLabel::Context => "Context",
            SectionLabel::ScenarioDescription => "Scenario Description",
            SectionLabel::LastVersionOfCode => "Last Version of Code",
            SectionLabel::TestResults => "Test Results",
            SectionLabel::TaskDescription => "Task Description",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSection {
    pub label: SectionLabel,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub kind: PromptKind,
    pub sections: Vec<PromptSection>,
    pub rendered: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("prompt section `{}` is empty", .0.title())]
    EmptySection(SectionLabel),
}

fn assemble(kind: PromptKind, parts: Vec<(SectionLabel, String)>) -> Result<PromptBundle, PromptError> {
    let mut sections = Vec::with_capacity(parts.len());
    for (label, text) in parts {
        if text.trim().is_empty() {
            return Err(PromptError::EmptySection(label));
        }
        sections.push(PromptSection { label, text: text.trim_end().to_string() });
    }
    let rendered =
        sections.iter().map(|s| format!("## {}\n\n{}\n", s.label.title(), s.text)).collect::<Vec<_>>().join("\n");
    Ok(PromptBundle { kind, sections, rendered })
}

pub fn build_specification_prompt(context: &str, task: &str) -> Result<PromptBundle, PromptError> {
    assemble(
        PromptKind::Specification,
        vec![(SectionLabel::Context, context.to_string()), (SectionLabel::TaskDescription, task.to_string())],
    )
}

/// The task goes last so that it sits closest to the model's answer.
pub fn build_correction_prompt(
    context: &str,
    scenario_descriptions: &[(String, String)],
    last_code: &str,
    report: &TestReport,
    task: &str,
) -> Result<PromptBundle, PromptError> {
    let scenarios =
        scenario_descriptions.iter().map(|(id, text)| format!("{id}: {}", text.trim())).collect::<Vec<_>>().join("\n");
    assemble(
        PromptKind::Correction,
        vec![
            (SectionLabel::Context, context.to_string()),
            (SectionLabel::ScenarioDescription, scenarios),
            (SectionLabel::LastVersionOfCode, fenced(last_code)),
            (SectionLabel::TestResults, report.to_text()),
            (SectionLabel::TaskDescription, task.to_string()),
        ],
    )
}

fn fenced(code: &str) -> String {
    if code.trim().is_empty() {
        String::new()
    } else {
        format!("```\n{}\n```", code.trim_end())
    }
}

/// Rough token count used to catch prompts that cannot fit the model window.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}
