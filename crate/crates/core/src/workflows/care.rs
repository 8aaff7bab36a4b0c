use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{SectionMap, WorkflowConfig, WorkflowError, WorkflowRun, CAREGIVER_SECTIONS};
use crate::content::Content;
use crate::kernel::{AgentDef, KernelError, Pipeline, SharedContext, Stage, ToolInvocation, ToolOutcome, ToolRegistry};
use crate::markdown;
use crate::provider::{FieldKind, Provider, Schema};
use crate::rag::ReportDocument;
use crate::web::{domain_allowed, SearchClient, SearchHit, SearchTool};

pub const EVIDENCE_THIN: &str = "evidence-thin";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResearchPlan {
    pub refined_topic: String,
    pub queries: Vec<String>,
    pub focus_areas: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaregiverReport {
    pub title: String,
    pub sections: SectionMap,
    pub body_markdown: String,
    pub word_count: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub plan: ResearchPlan,
    #[serde(default)]
    pub sources: Vec<SearchHit>,
}

impl ReportDocument for CaregiverReport {
    fn title(&self) -> &str {
        &self.title
    }

    fn body(&self) -> &str {
        &self.body_markdown
    }
}

pub fn research_plan_schema() -> Schema {
    Schema::new("research_plan")
        .field("refined_topic", FieldKind::Text)
        .field("queries", FieldKind::TextList)
        .field("focus_areas", FieldKind::TextList)
}

pub fn parse_research_plan(content: &Content) -> Result<ResearchPlan, WorkflowError> {
    let value = match content {
        Content::Structured(v) => v.clone(),
        Content::Text(t) => {
            crate::jsonscan::parse_json_object(t).map(Value::Object).map_err(|e| WorkflowError::validation("plan", e.to_string()))?
        }
    };
    serde_json::from_value(value).map_err(|e| WorkflowError::validation("plan", e.to_string()))
}

const BOOLEAN_WORDS: [&str; 3] = ["or", "and", "|"];

/// `(allow-listed site filters, search terms)` of one query.
fn query_parts<'q>(query: &'q str, allow: &[&str]) -> (usize, Vec<&'q str>) {
    let mut allowed = 0;
    let mut terms = Vec::new();
    for tok in query.split_whitespace() {
        let bare = tok.trim_matches(|c: char| c == '(' || c == ')' || c == '"');
        if bare.len() >= 5 && bare[..5].eq_ignore_ascii_case("site:") {
            let domain = bare[5..].split('/').next().unwrap_or("");
            if domain_allowed(domain, allow) {
                allowed += 1;
            }
        } else if !BOOLEAN_WORDS.iter().any(|w| bare.eq_ignore_ascii_case(w)) && bare.chars().any(char::is_alphanumeric) {
            terms.push(bare);
        }
    }
    (allowed, terms)
}

pub fn validate_research_plan(plan: &ResearchPlan, allow: &[&str]) -> Result<(), WorkflowError> {
    if plan.refined_topic.trim().is_empty() {
        return Err(WorkflowError::validation("refined_topic", "empty"));
    }
    let n = plan.queries.len();
    if !(3..=5).contains(&n) {
        return Err(WorkflowError::validation("queries", format!("{n} queries, need 3 to 5")));
    }
    if plan.focus_areas.len() != n {
        return Err(WorkflowError::validation("focus_areas", format!("{} focus areas for {n} queries", plan.focus_areas.len())));
    }
    for q in &plan.queries {
        let (sites, terms) = query_parts(q, allow);
        if sites == 0 {
            return Err(WorkflowError::validation(q.as_str(), "no site: filter on an allow-listed domain"));
        }
        if terms.is_empty() {
            return Err(WorkflowError::validation(q.as_str(), "no search terms"));
        }
    }
    Ok(())
}

/// Required sections and minimum length.
pub fn validate_caregiver_report(report: &CaregiverReport, min_words: usize) -> Result<(), WorkflowError> {
    for required in CAREGIVER_SECTIONS {
        match report.sections.get(required) {
            None => return Err(WorkflowError::validation(required, "required section missing")),
            Some(body) if body.trim().is_empty() => return Err(WorkflowError::validation(required, "required section is empty")),
            Some(_) => {}
        }
    }
    if report.word_count < min_words {
        return Err(WorkflowError::validation("word_count", format!("{} words, need {min_words}", report.word_count)));
    }
    Ok(())
}

const TRIAGE: &str = "You are the triage agent of a caregiver research team. Refine the user's topic and plan the \
research: write 3 to 5 specific web search queries with one focus area each. Every query must include a site: \
filter for a reputable source such as site:nia.nih.gov, site:alz.org or site:mayoclinic.org.";

const RESEARCH: &str = "You are the research agent. Summarize the evidence in the search results for each focus \
area of the plan. Keep the source URL next to each finding.";

const EDITOR: &str = "You are the editor agent. Write a caregiver-friendly report in Markdown with a level-1 title \
and these level-2 sections: ## Executive Summary, ## Evidence Review, ## Practical Care Tips, \
## Red-Flags and When to Seek Care, ## Resources and Helplines. Use plain language.";

const PIPELINE: [&str; 3] = ["triage", "research", "editor"];

fn triage_stage<'a>(cfg: &'a WorkflowConfig, plan_error: &'a RefCell<Option<WorkflowError>>) -> Stage<'a> {
    let agent = AgentDef::new("triage", "triage", TRIAGE).with_schema(research_plan_schema());
    Stage::new(agent, "Produce the research plan.").with_check(move |content| {
        let checked = parse_research_plan(content).and_then(|plan| validate_research_plan(&plan, &cfg.allow()));
        checked.map_err(|e| {
            let msg = e.to_string();
            *plan_error.borrow_mut() = Some(e);
            msg
        })
    })
}

fn topic_context(topic: &str) -> BTreeMap<String, Value> {
    let mut m = BTreeMap::new();
    m.insert("topic".into(), json!(topic));
    m
}

fn resolve(e: KernelError, plan_error: &RefCell<Option<WorkflowError>>) -> WorkflowError {
    match e {
        KernelError::OutputRejected { .. } => plan_error.borrow_mut().take().unwrap_or(WorkflowError::Agent(e)),
        other => WorkflowError::Agent(other),
    }
}

/// Run only the triage agent and return its validated plan.
pub fn make_research_plan(topic: &str, provider: &dyn Provider, cfg: &WorkflowConfig) -> Result<ResearchPlan, WorkflowError> {
    let topic = topic.trim();
    if topic.is_empty() {
        return Err(WorkflowError::InvalidInput("topic is empty".into()));
    }
    let plan_error = RefCell::new(None);
    let run = Pipeline::new(vec![triage_stage(cfg, &plan_error)]).run(&cfg.run_id, topic_context(topic), provider);
    match run.into_result() {
        Ok((_, ctx)) => parse_research_plan(ctx.latest_from("triage").expect("completed triage")),
        Err((e, _)) => Err(resolve(e, &plan_error)),
    }
}

fn search_plan(ctx: &SharedContext, max_results: usize) -> Result<Vec<ToolInvocation>, String> {
    let plan = ctx.latest_from("triage").ok_or("no research plan in context")?;
    let plan = parse_research_plan(plan).map_err(|e| e.to_string())?;
    Ok(plan
        .queries
        .iter()
        .map(|q| ToolInvocation { tool: "search".into(), args: json!({"query": q, "max_results": max_results}) })
        .collect())
}

/// Triage, then one search per plan query, then the editor.
pub fn run_research_care(
    topic: &str,
    search: &dyn SearchClient,
    provider: &dyn Provider,
    cfg: &WorkflowConfig,
) -> WorkflowRun<CaregiverReport> {
    let topic = topic.trim();
    if topic.is_empty() {
        return WorkflowRun::rejected(&cfg.run_id, &PIPELINE, "topic", WorkflowError::InvalidInput("topic is empty".into()));
    }
    let mut tools = ToolRegistry::new();
    tools.register("search", SearchTool(search));
    let plan_error = RefCell::new(None);
    let max_results = cfg.search_results;
    let stages = vec![
        triage_stage(cfg, &plan_error),
        Stage::new(AgentDef::new("research", "research", RESEARCH).with_tool("search"), "Summarize the evidence.")
            .with_tool_plan(move |ctx| search_plan(ctx, max_results)),
        Stage::new(AgentDef::new("editor", "editor", EDITOR), "Write the final report."),
    ];
    let run = Pipeline::new(stages).with_tools(&tools).run(&cfg.run_id, topic_context(topic), provider);
    let (transcript, context) = match run.into_result() {
        Ok(ok) => ok,
        Err((e, transcript)) => return WorkflowRun { transcript, result: Err(resolve(e, &plan_error)) },
    };

    let plan = match parse_research_plan(context.latest_from("triage").expect("completed triage")) {
        Ok(p) => p,
        Err(e) => return WorkflowRun::failed_check(transcript, "triage", e),
    };
    let mut sources: Vec<SearchHit> = Vec::new();
    for call in &transcript.steps[1].tool_calls {
        if let ToolOutcome::Ok { output } = &call.outcome {
            let hits: Vec<SearchHit> = serde_json::from_value(output["hits"].clone()).unwrap_or_default();
            for h in hits {
                if !sources.iter().any(|s| s.url == h.url) {
                    sources.push(h);
                }
            }
        }
    }
    let body = context.latest_from("editor").map(|c| c.render()).unwrap_or_default();
    let report = CaregiverReport {
        title: markdown::title(&body).unwrap_or_else(|| plan.refined_topic.clone()),
        sections: SectionMap::from_markdown(&body),
        word_count: markdown::word_count(&body),
        body_markdown: body,
        warnings: if sources.is_empty() { vec![EVIDENCE_THIN.to_string()] } else { Vec::new() },
        plan,
        sources,
    };
    match validate_caregiver_report(&report, cfg.min_words) {
        Ok(()) => WorkflowRun { transcript, result: Ok(report) },
        Err(e) => WorkflowRun::failed_check(transcript, "editor", e),
    }
}
