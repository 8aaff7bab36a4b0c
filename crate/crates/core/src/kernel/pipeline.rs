use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde_json::Value;

use super::{AgentDef, KernelError, RunState, RunTranscript, SharedContext, StepRecord, ToolCallRecord, ToolOutcome, ToolRegistry};
use crate::content::Content;
use crate::digest;
use crate::provider::{self, CompletionRequest, MediaItem, Message, Provider, DEFAULT_MAX_TOKENS};

/// A tool call a stage makes before its model call.
#[derive(Clone, Debug, PartialEq)]
pub struct ToolInvocation {
    pub tool: String,
    pub args: Value,
}

type ToolPlan<'a> = Box<dyn Fn(&SharedContext) -> Result<Vec<ToolInvocation>, String> + 'a>;
type OutputCheck<'a> = Box<dyn Fn(&Content) -> Result<(), String> + 'a>;

/// One agent invocation within a pipeline.
pub struct Stage<'a> {
    pub agent: AgentDef,
    pub task: String,
    pub attachments: Vec<MediaItem>,
    pub max_tokens: u32,
    tool_plan: Option<ToolPlan<'a>>,
    check: Option<OutputCheck<'a>>,
}

impl<'a> Stage<'a> {
    pub fn new(agent: AgentDef, task: impl Into<String>) -> Self {
        Self { agent, task: task.into(), attachments: Vec::new(), max_tokens: DEFAULT_MAX_TOKENS, tool_plan: None, check: None }
    }

    pub fn with_attachments(mut self, media: Vec<MediaItem>) -> Self {
        self.attachments = media;
        self
    }

    /// Decide, from the context so far, which tools to call before prompting.
    pub fn with_tool_plan(mut self, plan: impl Fn(&SharedContext) -> Result<Vec<ToolInvocation>, String> + 'a) -> Self {
        self.tool_plan = Some(Box::new(plan));
        self
    }

    /// Reject the stage output before it is handed off.
    pub fn with_check(mut self, check: impl Fn(&Content) -> Result<(), String> + 'a) -> Self {
        self.check = Some(Box::new(check));
        self
    }
}

/// Result of running a pipeline: always a transcript, plus the error if it failed.
#[derive(Debug)]
pub struct PipelineRun {
    pub transcript: RunTranscript,
    pub context: SharedContext,
    pub error: Option<KernelError>,
}

impl PipelineRun {
    pub fn is_completed(&self) -> bool {
        self.transcript.status == RunState::Completed
    }

    #[allow(clippy::result_large_err)]
    pub fn into_result(self) -> Result<(RunTranscript, SharedContext), (KernelError, RunTranscript)> {
        match self.error {
            None => Ok((self.transcript, self.context)),
            Some(e) => Err((e, self.transcript)),
        }
    }
}

pub struct Pipeline<'a, 't> {
    stages: Vec<Stage<'a>>,
    tools: Option<&'t ToolRegistry<'t>>,
}

impl<'a, 't> Pipeline<'a, 't> {
    pub fn new(stages: Vec<Stage<'a>>) -> Self {
        Self { stages, tools: None }
    }

    pub fn with_tools(mut self, tools: &'t ToolRegistry<'t>) -> Self {
        self.tools = Some(tools);
        self
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    fn preflight(&self) -> Result<(), KernelError> {
        if self.stages.is_empty() {
            return Err(KernelError::EmptyPipeline);
        }
        for stage in &self.stages {
            stage.agent.validate()?;
            for tool in &stage.agent.tools {
                if !self.tools.is_some_and(|r| r.contains(tool)) {
                    return Err(KernelError::ToolUnavailable {
                        tool: tool.clone(),
                        message: format!("required by agent `{}` but not registered", stage.agent.id),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn run(&self, run_id: &str, intake: BTreeMap<String, Value>, provider: &dyn Provider) -> PipelineRun {
        let ids = self.stages.iter().map(|s| s.agent.id.clone()).collect();
        let mut transcript = RunTranscript::new(run_id, ids);
        let mut context = SharedContext::new(intake);

        if let Err(e) = self.preflight() {
            let who = match &e {
                KernelError::ToolUnavailable { tool, .. } => tool.clone(),
                _ => "pipeline".into(),
            };
            transcript.fail(who, e.to_string());
            return PipelineRun { transcript, context, error: Some(e) };
        }

        transcript.status = RunState::Running;
        for (index, stage) in self.stages.iter().enumerate() {
            match self.run_stage(index, stage, &context, provider) {
                Ok(step) => {
                    let out = step.output.clone().expect("successful step has output");
                    context.append(stage.agent.id.clone(), out);
                    transcript.steps.push(step);
                }
                Err((who, e, step)) => {
                    transcript.steps.push(step);
                    transcript.fail(who, e.to_string());
                    return PipelineRun { transcript, context, error: Some(e) };
                }
            }
        }
        transcript.status = RunState::Completed;
        PipelineRun { transcript, context, error: None }
    }

    #[allow(clippy::type_complexity, clippy::result_large_err)]
    fn run_stage(
        &self,
        index: usize,
        stage: &Stage<'a>,
        context: &SharedContext,
        provider: &dyn Provider,
    ) -> Result<StepRecord, (String, KernelError, StepRecord)> {
        let agent = &stage.agent;
        let mut step = StepRecord {
            agent_id: agent.id.clone(),
            role: agent.role.clone(),
            input_digest: context.digest(),
            output: None,
            tool_calls: Vec::new(),
        };
        let agent_err = |message: String| KernelError::AgentFailure { agent: agent.id.clone(), message };

        let invocations = match &stage.tool_plan {
            Some(plan) => match plan(context) {
                Ok(v) => v,
                Err(msg) => return Err((agent.id.clone(), agent_err(msg), step)),
            },
            None => Vec::new(),
        };

        let mut tool_text = String::new();
        for inv in invocations {
            if !agent.tools.contains(&inv.tool) {
                let e = agent_err(format!("tool `{}` is not declared by this agent", inv.tool));
                return Err((agent.id.clone(), e, step));
            }
            let registry = self.tools.expect("preflight checked tool registry");
            let args_digest = digest::digest_value(&inv.args);
            match registry.call_tool(&inv.tool, &inv.args) {
                Ok(output) => {
                    let _ = write!(tool_text, "\n[tool {} {}]\n", inv.tool, inv.args);
                    tool_text.push_str(&Content::Structured(output.clone()).render());
                    tool_text.push('\n');
                    step.tool_calls.push(ToolCallRecord { tool: inv.tool, args_digest, outcome: ToolOutcome::Ok { output } });
                }
                Err(e) => {
                    step.tool_calls.push(ToolCallRecord {
                        tool: inv.tool.clone(),
                        args_digest,
                        outcome: ToolOutcome::Error { message: e.to_string() },
                    });
                    return Err((inv.tool, e, step));
                }
            }
        }

        let mut user = context.render();
        if !tool_text.is_empty() {
            user.push_str(&tool_text);
        }
        if !user.is_empty() {
            user.push('\n');
        }
        user.push_str("[task]\n");
        user.push_str(&stage.task);

        let mut req = CompletionRequest::new(alloc::vec![Message::system(agent.instructions.clone()), Message::user(user)])
            .with_meta(agent.role.clone(), index);
        req.attachments = stage.attachments.clone();
        req.max_tokens = stage.max_tokens;

        let result = match &agent.output_schema {
            Some(schema) => provider::complete_structured(provider, &req, schema).map(|m| Content::Structured(Value::Object(m))),
            None => req.validate().and_then(|_| provider.complete(&req)).map(Content::Text),
        };
        let output = match result {
            Ok(o) => o,
            Err(e) => return Err((agent.id.clone(), agent_err(e.to_string()), step)),
        };
        if output.is_blank() {
            return Err((agent.id.clone(), agent_err("empty output".into()), step));
        }
        if let Some(check) = &stage.check {
            if let Err(reason) = check(&output) {
                let e = KernelError::OutputRejected { agent: agent.id.clone(), reason };
                return Err((agent.id.clone(), e, step));
            }
        }
        step.output = Some(output);
        Ok(step)
    }
}

/// Run agents in order with their instructions as the only guidance.
pub fn run_pipeline(agents: &[AgentDef], intake: BTreeMap<String, Value>, provider: &dyn Provider) -> PipelineRun {
    run_pipeline_with_tools(agents, intake, provider, &ToolRegistry::new(), "run")
}

pub fn run_pipeline_with_tools(
    agents: &[AgentDef],
    intake: BTreeMap<String, Value>,
    provider: &dyn Provider,
    tools: &ToolRegistry<'_>,
    run_id: &str,
) -> PipelineRun {
    let stages = agents.iter().map(|a| Stage::new(a.clone(), format!("Carry out your role as the {} agent.", a.role))).collect();
    Pipeline::new(stages).with_tools(tools).run(run_id, intake, provider)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ToolError;
    use crate::provider::ProviderError;
    use alloc::vec;
    use core::cell::RefCell;
    use serde_json::json;

    /// Replies `out-<step>` and remembers every request.
    #[derive(Default)]
    struct StepEcho {
        seen: RefCell<Vec<CompletionRequest>>,
        fail_at: Option<usize>,
    }

    impl Provider for StepEcho {
        fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
            self.seen.borrow_mut().push(req.clone());
            let step = req.meta.step.unwrap();
            if Some(step) == self.fail_at {
                return Err(ProviderError::Backend("boom".into()));
            }
            Ok(format!("out-{step}"))
        }
    }

    fn agents(n: usize) -> Vec<AgentDef> {
        (0..n).map(|i| AgentDef::new(format!("a{i}"), format!("r{i}"), format!("you are agent {i}"))).collect()
    }

    fn intake() -> BTreeMap<String, Value> {
        let mut m = BTreeMap::new();
        m.insert("age".into(), json!(76));
        m
    }

    #[test]
    fn empty_pipeline() {
        let run = run_pipeline(&[], BTreeMap::new(), &StepEcho::default());
        assert_eq!(run.error, Some(KernelError::EmptyPipeline));
        assert_eq!(run.transcript.status, RunState::Failed);
    }

    #[test]
    fn identity_pipeline() {
        struct X;
        impl Provider for X {
            fn complete(&self, _: &CompletionRequest) -> Result<String, ProviderError> {
                Ok("X".into())
            }
        }
        let run = run_pipeline(&agents(1), BTreeMap::new(), &X);
        assert!(run.is_completed());
        assert_eq!(run.transcript.steps.len(), 1);
        assert_eq!(run.transcript.final_output(), Some(&Content::text("X")));
    }

    #[test]
    fn handoff_digests_cover_prior_outputs() {
        let p = StepEcho::default();
        let run = run_pipeline(&agents(3), intake(), &p);
        assert!(run.is_completed());
        run.transcript.check_invariants().unwrap();

        // Hand trace: step k sees the intake plus out-0..out-(k-1).
        let mut expected = SharedContext::new(intake());
        for (k, step) in run.transcript.steps.iter().enumerate() {
            assert_eq!(step.input_digest, expected.digest(), "step {k}");
            expected.append(format!("a{k}"), Content::text(format!("out-{k}")));
        }
        let third = &p.seen.borrow()[2];
        let user = &third.messages[1].content;
        let p0 = user.find("out-0").unwrap();
        let p1 = user.find("out-1").unwrap();
        let task = user.find("[task]").unwrap();
        assert!(p0 < p1 && p1 < task);
        assert_eq!(third.messages[0].content, "you are agent 2");
        assert_eq!(run.context.len(), 3);
    }

    #[test]
    fn failure_preserves_earlier_steps() {
        let p = StepEcho { fail_at: Some(2), ..Default::default() };
        let run = run_pipeline(&agents(4), intake(), &p);
        assert_eq!(run.transcript.status, RunState::Failed);
        assert_eq!(run.transcript.steps.len(), 3);
        assert_eq!(run.transcript.steps[0].output, Some(Content::text("out-0")));
        assert_eq!(run.transcript.steps[1].output, Some(Content::text("out-1")));
        assert!(run.transcript.steps[2].output.is_none());
        assert_eq!(run.transcript.failure.as_ref().unwrap().tool_or_agent, "a2");
        assert_eq!(run.error.unwrap().code(), "AgentFailure");
        run.transcript.check_invariants().unwrap();
    }

    #[test]
    fn missing_tool_detected_before_any_step() {
        let a = vec![AgentDef::new("r", "research", "x").with_tool("crawl")];
        let p = StepEcho::default();
        let run = run_pipeline(&a, BTreeMap::new(), &p);
        assert_eq!(run.error.unwrap().code(), "ToolUnavailable");
        assert!(p.seen.borrow().is_empty());
    }

    #[test]
    fn failing_tool_names_the_tool() {
        let mut tools = ToolRegistry::new();
        tools.register("crawl", |_: &Value| Err(ToolError::Unavailable("api down".into())));
        let stage = Stage::new(AgentDef::new("research", "research", "x").with_tool("crawl"), "go")
            .with_tool_plan(|_| Ok(vec![ToolInvocation { tool: "crawl".into(), args: json!({"target": "t"}) }]));
        let p = StepEcho::default();
        let run = Pipeline::new(vec![stage]).with_tools(&tools).run("r1", BTreeMap::new(), &p);
        assert_eq!(run.transcript.failure.as_ref().unwrap().tool_or_agent, "crawl");
        assert_eq!(run.transcript.steps.len(), 1);
        assert!(matches!(run.transcript.steps[0].tool_calls[0].outcome, ToolOutcome::Error { .. }));
        assert!(p.seen.borrow().is_empty());
    }

    #[test]
    fn tool_results_reach_the_prompt() {
        let mut tools = ToolRegistry::new();
        tools.register("echo", |a: &Value| Ok(a.clone()));
        let stage = Stage::new(AgentDef::new("r", "research", "x").with_tool("echo"), "go")
            .with_tool_plan(|_| Ok(vec![ToolInvocation { tool: "echo".into(), args: json!({"needle": "haystack-7"}) }]));
        let p = StepEcho::default();
        let run = Pipeline::new(vec![stage]).with_tools(&tools).run("r1", BTreeMap::new(), &p);
        assert!(run.is_completed());
        assert!(p.seen.borrow()[0].messages[1].content.contains("haystack-7"));
        assert_eq!(run.context.len(), 1, "tool output is not a context entry");
    }

    #[test]
    fn empty_output_is_agent_failure() {
        struct Blank;
        impl Provider for Blank {
            fn complete(&self, _: &CompletionRequest) -> Result<String, ProviderError> {
                Ok("   ".into())
            }
        }
        let run = run_pipeline(&agents(2), BTreeMap::new(), &Blank);
        assert_eq!(run.error.unwrap().code(), "AgentFailure");
    }

    #[test]
    fn check_rejects_output() {
        let stage = Stage::new(agents(1).remove(0), "go").with_check(|_| Err("nope".into()));
        let run = Pipeline::new(vec![stage]).run("r", BTreeMap::new(), &StepEcho::default());
        assert!(matches!(run.error, Some(KernelError::OutputRejected { .. })));
    }

    #[test]
    fn deterministic_transcripts() {
        let a = run_pipeline(&agents(3), intake(), &StepEcho::default()).transcript;
        let b = run_pipeline(&agents(3), intake(), &StepEcho::default()).transcript;
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
