use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{WorkflowConfig, WorkflowError, WorkflowRun};
use crate::kernel::{AgentDef, Pipeline, Stage, ToolInvocation, ToolOutcome, ToolRegistry};
use crate::markdown;
use crate::provider::Provider;
use crate::rag::ReportDocument;
use crate::web::{CrawlClient, CrawlTool};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeepResearchOutput {
    pub topic: String,
    pub initial_report: String,
    pub enhanced_report: String,
    pub enhanced_sections: Vec<String>,
    /// URLs of the crawled pages the initial report was written from.
    pub sources: Vec<String>,
}

impl ReportDocument for DeepResearchOutput {
    fn title(&self) -> &str {
        self.enhanced_report.lines().find_map(|l| markdown::heading(l).filter(|(lv, _)| *lv == 1).map(|(_, t)| t)).unwrap_or(&self.topic)
    }

    fn body(&self) -> &str {
        &self.enhanced_report
    }
}

const PIPELINE: [&str; 2] = ["research", "elaboration"];
pub const MIN_ENHANCED_SECTIONS: usize = 3;

const RESEARCH: &str = "You are a research agent. You receive pages crawled from the web about a topic. Write an \
INITIAL structured report in Markdown: a level-1 title, then level-2 sections covering the main aspects of the \
topic. Use only the crawled material.";

const ELABORATION: &str = "You are an elaboration agent. Rewrite the initial report as an ENHANCED report in \
Markdown: keep its structure, and add deeper explanations, concrete examples and a section on the future outlook. \
The enhanced report must be longer than the initial one and use level-2 headings for its sections.";

/// The initial/enhanced invariants: the enhanced report is longer (in chars)
/// and has at least three level-2 sections.
pub fn validate_deep_research(initial: &str, enhanced: &str) -> Result<Vec<String>, WorkflowError> {
    if enhanced.chars().count() <= initial.chars().count() {
        return Err(WorkflowError::validation("enhanced_report", "enhanced report is not longer than the initial report"));
    }
    let sections = markdown::headings(enhanced, 2);
    if sections.len() < MIN_ENHANCED_SECTIONS {
        return Err(WorkflowError::validation(
            "enhanced_sections",
            alloc::format!("{} sections, need at least {MIN_ENHANCED_SECTIONS}", sections.len()),
        ));
    }
    Ok(sections)
}

/// Crawl, write an initial report, then elaborate it. A crawl failure stops
/// the run at the first stage and names the crawl tool.
pub fn run_deep_research(
    topic: &str,
    crawl_client: &dyn CrawlClient,
    provider: &dyn Provider,
    cfg: &WorkflowConfig,
) -> WorkflowRun<DeepResearchOutput> {
    let topic = topic.trim();
    if topic.is_empty() {
        return WorkflowRun::rejected(&cfg.run_id, &PIPELINE, "topic", WorkflowError::InvalidInput("topic is empty".into()));
    }
    let mut tools = ToolRegistry::new();
    tools.register("crawl", CrawlTool(crawl_client));
    let depth = cfg.crawl_depth;
    let stages = vec![
        Stage::new(AgentDef::new("research", "research", RESEARCH).with_tool("crawl"), "Write the INITIAL report.")
            .with_tool_plan(move |_| Ok(vec![ToolInvocation { tool: "crawl".into(), args: json!({"target": topic, "depth": depth}) }])),
        Stage::new(AgentDef::new("elaboration", "elaboration", ELABORATION), "Write the ENHANCED report."),
    ];
    let mut intake = alloc::collections::BTreeMap::new();
    intake.insert("topic".into(), json!(topic));
    let run = Pipeline::new(stages).with_tools(&tools).run(&cfg.run_id, intake, provider);
    let (transcript, context) = match run.into_result() {
        Ok(ok) => ok,
        Err((e, transcript)) => return WorkflowRun { transcript, result: Err(e.into()) },
    };
    let initial = context.latest_from("research").map(|c| c.render()).unwrap_or_default();
    let enhanced = context.latest_from("elaboration").map(|c| c.render()).unwrap_or_default();
    let sources = transcript.steps[0]
        .tool_calls
        .iter()
        .filter_map(|c| match &c.outcome {
            ToolOutcome::Ok { output } => output["pages"].as_array().cloned(),
            ToolOutcome::Error { .. } => None,
        })
        .flatten()
        .filter_map(|p| p["url"].as_str().map(String::from))
        .collect();
    match validate_deep_research(&initial, &enhanced) {
        Ok(enhanced_sections) => {
            let out =
                DeepResearchOutput { topic: topic.into(), initial_report: initial, enhanced_report: enhanced, enhanced_sections, sources };
            WorkflowRun { transcript, result: Ok(out) }
        }
        Err(e) => WorkflowRun::failed_check(transcript, "elaboration", e),
    }
}
