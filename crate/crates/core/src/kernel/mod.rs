//! Agents, shared context, tools and sequential pipeline execution.
//!
//! A pipeline runs its stages strictly in order. Each stage sees the intake plus
//! every earlier stage's output (the handoff), and its own output is appended to
//! the shared context before the next stage starts.

mod agent;
mod context;
mod pipeline;
mod tools;
mod transcript;

pub use agent::{AgentDef, AgentRegistry};
pub use context::{ContextEntry, SharedContext};
pub use pipeline::{run_pipeline, run_pipeline_with_tools, Pipeline, PipelineRun, Stage, ToolInvocation};
pub use tools::{Tool, ToolError, ToolRegistry};
pub use transcript::{Failure, RunState, RunTranscript, StepRecord, ToolCallRecord, ToolOutcome};

use alloc::string::String;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("pipeline has no agents")]
    EmptyPipeline,
    #[error("invalid agent definition: {0}")]
    InvalidAgentDef(String),
    #[error("tool `{tool}` unavailable: {message}")]
    ToolUnavailable { tool: String, message: String },
    #[error("tool `{tool}` rejected its input: {message}")]
    ToolRejectedInput { tool: String, message: String },
    #[error("agent `{agent}` failed: {message}")]
    AgentFailure { agent: String, message: String },
    #[error("output of agent `{agent}` rejected: {reason}")]
    OutputRejected { agent: String, reason: String },
}

impl KernelError {
    pub fn code(&self) -> &'static str {
        match self {
            KernelError::EmptyPipeline => "EmptyPipeline",
            KernelError::InvalidAgentDef(_) => "InvalidAgentDef",
            KernelError::ToolUnavailable { .. } => "ToolUnavailable",
            KernelError::ToolRejectedInput { .. } => "ToolRejectedInput",
            KernelError::AgentFailure { .. } => "AgentFailure",
            KernelError::OutputRejected { .. } => "ValidationFailure",
        }
    }
}
