use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{WorkflowConfig, WorkflowError, WorkflowRun};
use crate::kernel::{AgentDef, Pipeline, Stage, ToolInvocation, ToolOutcome, ToolRegistry};
use crate::provider::{MediaItem, MediaKind, Provider};
use crate::web::{SearchClient, SearchHit, SearchTool};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultimodalBrief {
    pub brief: String,
    pub media: Vec<MediaKind>,
    #[serde(default)]
    pub sources: Vec<SearchHit>,
}

const PIPELINE: [&str; 1] = ["multimodal"];

fn system_prompt(media: &[MediaItem], cfg: &WorkflowConfig) -> String {
    let mut counts = Vec::new();
    for kind in [MediaKind::Image, MediaKind::Audio, MediaKind::Video] {
        let n = media.iter().filter(|m| m.kind() == kind).count();
        if n > 0 {
            counts.push(format!("{n} {kind}"));
        }
    }
    let mut s = format!("You are a multimodal assistant supporting people affected by dementia. Your audience: {}.\n", cfg.audience);
    if counts.is_empty() {
        s.push_str("No media is attached; answer from the user's request.\n");
    } else {
        s.push_str(&format!("Attached media: {}. Integrate what every item shows or says.\n", counts.join(", ")));
    }
    if !cfg.focus_areas.is_empty() {
        s.push_str(&format!("Focus areas: {}.\n", cfg.focus_areas.join(", ")));
    }
    s.push_str(&format!(
        "When citing outside information, strongly prefer reputable medical sources such as {}. \
Write a clear brief in Markdown and do not give a diagnosis.",
        cfg.allow_list.join(", ")
    ));
    s
}

/// One model call carrying every attachment. A non-empty prompt also runs a
/// web search first when a search client is given.
pub fn run_multimodal(
    media: Vec<MediaItem>,
    prompt: &str,
    search: Option<&dyn SearchClient>,
    provider: &dyn Provider,
    cfg: &WorkflowConfig,
) -> WorkflowRun<MultimodalBrief> {
    let prompt = prompt.trim();
    if media.is_empty() && prompt.is_empty() {
        let e = WorkflowError::InvalidInput("need at least one media item or a prompt".into());
        return WorkflowRun::rejected(&cfg.run_id, &PIPELINE, "multimodal", e);
    }
    if let Some(kind) = media.iter().map(MediaItem::kind).find(|k| !provider.supports(*k)) {
        return WorkflowRun::rejected(&cfg.run_id, &PIPELINE, "multimodal", WorkflowError::UnsupportedMedia(kind));
    }
    let kinds: Vec<MediaKind> = media.iter().map(MediaItem::kind).collect();
    let mut agent = AgentDef::new("multimodal", "multimodal", system_prompt(&media, cfg));
    let mut tools = ToolRegistry::new();
    let searching = match search {
        Some(client) if !prompt.is_empty() => {
            tools.register("search", SearchTool(client));
            agent = agent.with_tool("search");
            true
        }
        _ => false,
    };
    let task = if prompt.is_empty() { "Describe and interpret the attached media.".to_string() } else { prompt.to_string() };
    let max_results = cfg.search_results;
    let mut stage = Stage::new(agent, task).with_attachments(media);
    if searching {
        let query = prompt.to_string();
        stage = stage.with_tool_plan(move |_| {
            Ok(vec![ToolInvocation { tool: "search".into(), args: json!({"query": query, "max_results": max_results}) }])
        });
    }
    let run = Pipeline::new(vec![stage]).with_tools(&tools).run(&cfg.run_id, Default::default(), provider);
    let (transcript, context) = match run.into_result() {
        Ok(ok) => ok,
        Err((e, transcript)) => return WorkflowRun { transcript, result: Err(e.into()) },
    };
    let sources = transcript.steps[0]
        .tool_calls
        .iter()
        .filter_map(|c| match &c.outcome {
            ToolOutcome::Ok { output } => serde_json::from_value::<Vec<SearchHit>>(output["hits"].clone()).ok(),
            ToolOutcome::Error { .. } => None,
        })
        .flatten()
        .collect();
    let brief = context.latest_from("multimodal").map(|c| c.render()).unwrap_or_default();
    WorkflowRun { transcript, result: Ok(MultimodalBrief { brief, media: kinds, sources }) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::ByRole;
    use crate::web::WebError;

    struct One;
    impl SearchClient for One {
        fn search(&self, q: &str, _: usize) -> Result<Vec<SearchHit>, WebError> {
            Ok(vec![SearchHit { title: q.into(), url: "https://www.alz.org/x".into(), snippet: "snippet".into() }])
        }
    }

    fn item(kind: MediaKind, mt: &str) -> MediaItem {
        MediaItem::new(kind, vec![1, 2, 3], mt).unwrap()
    }

    #[test]
    fn single_call_with_all_attachments() {
        let p = ByRole::new(&[("multimodal", "Brief.")]).with_media(&[MediaKind::Image, MediaKind::Audio]);
        let media = vec![item(MediaKind::Image, "image/png"), item(MediaKind::Audio, "audio/wav")];
        let cfg = WorkflowConfig { focus_areas: vec!["sleep".into()], ..WorkflowConfig::default() };
        let run = run_multimodal(media, "What do these show?", Some(&One), &p, &cfg);
        let out = run.result.unwrap();
        assert_eq!(out.brief, "Brief.");
        assert_eq!(out.sources.len(), 1);
        let log = p.log.borrow();
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].attachments.len(), 2);
        let sys = &log[0].messages[0].content;
        assert!(sys.contains("family caregivers") && sys.contains("sleep") && sys.contains("nia.nih.gov") && sys.contains("1 image"));
    }

    #[test]
    fn preconditions() {
        let p = ByRole::new(&[("multimodal", "x")]);
        assert_eq!(run_multimodal(vec![], "  ", None, &p, &WorkflowConfig::default()).result.unwrap_err().code(), "InvalidInput");
        let run = run_multimodal(vec![item(MediaKind::Video, "video/mp4")], "", None, &p, &WorkflowConfig::default());
        assert_eq!(run.result.unwrap_err(), WorkflowError::UnsupportedMedia(MediaKind::Video));
        assert_eq!(p.calls(), 0);
        let out = run_multimodal(vec![], "only text", None, &p, &WorkflowConfig::default()).result.unwrap();
        assert!(out.sources.is_empty());
    }
}
