use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::content::Content;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Pending,
    Running,
    Completed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub tool_or_agent: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ToolOutcome {
    Ok { output: Value },
    Error { message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolCallRecord {
    pub tool: String,
    pub args_digest: String,
    pub outcome: ToolOutcome,
}

/// One executed stage. `output` is `None` only for the step that failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub agent_id: String,
    pub role: String,
    pub input_digest: String,
    pub output: Option<Content>,
    #[serde(default)]
    pub tool_calls: Vec<ToolCallRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTranscript {
    pub run_id: String,
    /// Agent ids of the pipeline, in execution order.
    pub pipeline: Vec<String>,
    pub steps: Vec<StepRecord>,
    pub status: RunState,
    pub failure: Option<Failure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
}

impl RunTranscript {
    pub fn new(run_id: impl Into<String>, pipeline: Vec<String>) -> Self {
        Self {
            run_id: run_id.into(),
            pipeline,
            steps: Vec::new(),
            status: RunState::Pending,
            failure: None,
            started_at: None,
            finished_at: None,
        }
    }

    pub fn fail(&mut self, tool_or_agent: impl Into<String>, message: impl Into<String>) {
        self.status = RunState::Failed;
        self.failure = Some(Failure { tool_or_agent: tool_or_agent.into(), message: message.into() });
    }

    pub fn completed_steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.steps.iter().filter(|s| s.output.is_some())
    }

    pub fn output_of(&self, agent_id: &str) -> Option<&Content> {
        self.steps.iter().find(|s| s.agent_id == agent_id).and_then(|s| s.output.as_ref())
    }

    pub fn final_output(&self) -> Option<&Content> {
        self.steps.last().and_then(|s| s.output.as_ref())
    }

    /// Structural invariants that hold for every finished transcript.
    pub fn check_invariants(&self) -> Result<(), &'static str> {
        match self.status {
            RunState::Completed => {
                if self.steps.len() != self.pipeline.len() {
                    return Err("completed run must have one step per agent");
                }
                if self.steps.iter().any(|s| s.output.as_ref().is_none_or(|o| o.is_blank())) {
                    return Err("completed run has an empty step output");
                }
            }
            RunState::Failed => {
                if self.failure.is_none() {
                    return Err("failed run without failure record");
                }
                let n = self.steps.len();
                if self.steps.iter().take(n.saturating_sub(1)).any(|s| s.output.is_none()) {
                    return Err("only the final step of a failed run may lack output");
                }
            }
            RunState::Pending | RunState::Running => {}
        }
        Ok(())
    }
}
