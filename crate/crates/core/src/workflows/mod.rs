//! The end-to-end agent workflows and the validators that gate their outputs.
//!
//! Every `run_*` function returns a [`WorkflowRun`]: the kernel transcript is
//! kept even when the run fails, so callers can show how far it got.

mod care;
mod deep;
mod imaging;
mod intake;
mod multimodal;
mod sections;
mod support;

pub use care::{
    make_research_plan, parse_research_plan, research_plan_schema, run_research_care, validate_caregiver_report, validate_research_plan,
    CaregiverReport, ResearchPlan, EVIDENCE_THIN,
};
pub use deep::{run_deep_research, validate_deep_research, DeepResearchOutput, MIN_ENHANCED_SECTIONS};
pub use imaging::{run_imaging, validate_imaging, validate_imaging_with, GuardrailRule, ImagingBrief, Resource, RESOURCES_HEADING};
pub use intake::{Intake, Persona};
pub use multimodal::{run_multimodal, MultimodalBrief};
pub use sections::SectionMap;
pub use support::{run_support_plan, validate_followup, CarePlanReport, FollowUpPlan};

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::kernel::{KernelError, RunTranscript};
use crate::provider::{MediaKind, ProviderError};

pub const REPUTABLE_DOMAINS: &[&str] = &["nia.nih.gov", "alz.org", "mayoclinic.org", "nih.gov", "cdc.gov", "who.int"];

pub const DISCLAIMER: &str = "This analysis is educational and not a medical diagnosis.";

pub const FORBIDDEN_PHRASES: &[&str] = &["the diagnosis is", "you have", "confirmed diagnosis", "is diagnostic of"];

pub const FOLLOW_UP_HEADINGS: [&str; 5] =
    ["Check-in Cadence", "Tracking Template", "Escalation Criteria", "Care Progression Planning", "Resource Refresher"];

pub const CAREGIVER_SECTIONS: [&str; 5] =
    ["Executive Summary", "Evidence Review", "Practical Care Tips", "Red-Flags and When to Seek Care", "Resources and Helplines"];

pub const IMAGING_HEADINGS: [&str; 5] =
    ["Imaging Modality", "Key Findings", "Diagnostic Assessment (Non-diagnostic)", "Red-Flag Symptoms", "Patient-Friendly Explanation"];

pub const DISCLAIMER_HEADING: &str = "Disclaimer";

/// Minimum caregiver-report length applied to live-provider runs.
pub const LIVE_MIN_WORDS: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct WorkflowConfig {
    pub run_id: String,
    pub allow_list: Vec<String>,
    pub forbidden_phrases: Vec<String>,
    /// Caregiver reports shorter than this are rejected.
    pub min_words: usize,
    pub crawl_depth: u32,
    pub search_results: usize,
    pub audience: String,
    pub focus_areas: Vec<String>,
}

impl Default for WorkflowConfig {
    fn default() -> Self {
        Self {
            run_id: "run".into(),
            allow_list: REPUTABLE_DOMAINS.iter().map(|s| s.to_string()).collect(),
            forbidden_phrases: FORBIDDEN_PHRASES.iter().map(|s| s.to_string()).collect(),
            min_words: 0,
            crawl_depth: 2,
            search_results: 5,
            audience: "family caregivers".into(),
            focus_areas: Vec::new(),
        }
    }
}

impl WorkflowConfig {
    pub fn with_run_id(mut self, run_id: impl Into<String>) -> Self {
        self.run_id = run_id.into();
        self
    }

    pub(crate) fn allow(&self) -> Vec<&str> {
        self.allow_list.iter().map(String::as_str).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum WorkflowError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Agent(#[from] KernelError),
    #[error("validation failed at `{offender}`: {reason}")]
    Validation { offender: String, reason: String },
    #[error("guardrail `{}` violated: {detail}", rule.id())]
    Guardrail { rule: GuardrailRule, detail: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("provider cannot accept {0} input")]
    UnsupportedMedia(MediaKind),
}

impl WorkflowError {
    pub fn code(&self) -> &'static str {
        match self {
            WorkflowError::InvalidInput(_) => "InvalidInput",
            WorkflowError::Agent(e) => e.code(),
            WorkflowError::Validation { .. } => "ValidationFailure",
            WorkflowError::Guardrail { .. } => "GuardrailViolation",

            WorkflowError::Provider(e) => e.code(),
            WorkflowError::UnsupportedMedia(_) => "UnsupportedMedia",
        }
    }

    /// The offending heading, field or guardrail rule id, when there is one.
    pub fn subject(&self) -> Option<&str> {
        match self {
            WorkflowError::Validation { offender, .. } => Some(offender),
            WorkflowError::Guardrail { rule, .. } => Some(rule.id()),

            WorkflowError::Agent(KernelError::ToolUnavailable { tool, .. })
            | WorkflowError::Agent(KernelError::ToolRejectedInput { tool, .. }) => Some(tool),
            WorkflowError::Agent(KernelError::AgentFailure { agent, .. })
            | WorkflowError::Agent(KernelError::OutputRejected { agent, .. }) => Some(agent),
            _ => None,
        }
    }

    pub(crate) fn validation(offender: impl Into<String>, reason: impl Into<String>) -> Self {
        WorkflowError::Validation { offender: offender.into(), reason: reason.into() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkflowRun<T> {
    pub transcript: RunTranscript,
    pub result: Result<T, WorkflowError>,
}

impl<T> WorkflowRun<T> {
    pub(crate) fn rejected(run_id: &str, pipeline: &[&str], who: &str, error: WorkflowError) -> Self {
        let mut transcript = RunTranscript::new(run_id, pipeline.iter().map(|s| s.to_string()).collect());
        transcript.fail(who, error.to_string());
        WorkflowRun { transcript, result: Err(error) }
    }

    /// Mark an otherwise completed transcript as failed by a post-run check.
    pub(crate) fn failed_check(mut transcript: RunTranscript, who: &str, error: WorkflowError) -> Self {
        transcript.fail(who, error.to_string());
        WorkflowRun { transcript, result: Err(error) }
    }

    pub fn is_ok(&self) -> bool {
        self.result.is_ok()
    }

    pub fn into_result(self) -> Result<T, WorkflowError> {
        self.result
    }
}

/// Matches `phrase` in `text` ignoring case and whitespace layout, only at word
/// boundaries.
pub fn contains_phrase(text: &str, phrase: &str) -> bool {
    let norm = |s: &str| s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ");
    let hay = norm(text);
    let needle = norm(phrase);
    if needle.is_empty() {
        return false;
    }
    let is_word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '\'');
    hay.match_indices(&needle).any(|(i, m)| {
        let before = hay[..i].chars().next_back();
        let after = hay[i + m.len()..].chars().next();
        !is_word(before) && !is_word(after)
    })
}
