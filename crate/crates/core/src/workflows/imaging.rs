use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    contains_phrase, SectionMap, WorkflowConfig, WorkflowError, WorkflowRun, DISCLAIMER, DISCLAIMER_HEADING, FORBIDDEN_PHRASES,
    IMAGING_HEADINGS,
};
use crate::digest;
use crate::kernel::{AgentDef, Pipeline, Stage, ToolCallRecord, ToolOutcome};
use crate::markdown::list_items;
use crate::provider::{MediaItem, MediaKind, Provider};
use crate::web::{domain_allowed, host_of, SearchClient};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GuardrailRule {
    #[serde(rename = "sections")]
    Sections,
    #[serde(rename = "disclaimer")]
    Disclaimer,
    #[serde(rename = "forbidden-phrase")]
    ForbiddenPhrase,
    #[serde(rename = "red-flags")]
    RedFlags,
}

impl GuardrailRule {
    pub fn id(self) -> &'static str {
        match self {
            GuardrailRule::Sections => "sections",
            GuardrailRule::Disclaimer => "disclaimer",
            GuardrailRule::ForbiddenPhrase => "forbidden-phrase",
            GuardrailRule::RedFlags => "red-flags",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resource {
    pub title: String,
    pub url: String,
}

/// Five-part educational reading of a brain image.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImagingBrief {
    /// Level-2 headings as they appeared in the model output.
    pub headings: Vec<String>,
    pub modality: String,
    pub key_findings: String,
    pub considerations: Vec<String>,
    pub red_flags: Vec<String>,
    pub lay_explanation: String,
    #[serde(default)]
    pub resources: Vec<Resource>,
    pub disclaimer: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ImagingBrief {
    /// Never fails; missing parts come out empty for the validator to catch.
    pub fn from_markdown(text: &str) -> Self {
        let sections = SectionMap::from_markdown(text);
        let part = |i: usize| sections.get(IMAGING_HEADINGS[i]).unwrap_or("").trim().to_string();
        ImagingBrief {
            headings: sections.headings().map(String::from).collect(),
            modality: part(0),
            key_findings: part(1),
            considerations: list_items(&part(2)),
            red_flags: list_items(&part(3)),
            lay_explanation: part(4),
            resources: sections.get(RESOURCES_HEADING).map(parse_links).unwrap_or_default(),
            disclaimer: sections.get(DISCLAIMER_HEADING).unwrap_or("").trim().to_string(),
            warnings: Vec::new(),
        }
    }

    pub fn to_markdown(&self) -> String {
        let bullets = |items: &[String]| items.iter().map(|i| format!("- {i}")).collect::<Vec<_>>().join("\n");
        let mut out = format!(
            "## {}\n{}\n\n## {}\n{}\n\n## {}\n{}\n\n## {}\n{}\n\n## {}\n{}\n\n",
            IMAGING_HEADINGS[0],
            self.modality,
            IMAGING_HEADINGS[1],
            self.key_findings,
            IMAGING_HEADINGS[2],
            bullets(&self.considerations),
            IMAGING_HEADINGS[3],
            bullets(&self.red_flags),
            IMAGING_HEADINGS[4],
            self.lay_explanation,
        );
        if !self.resources.is_empty() {
            out.push_str(&format!("## {RESOURCES_HEADING}\n"));
            for r in &self.resources {
                out.push_str(&format!("- [{}]({})\n", r.title, r.url));
            }
            out.push('\n');
        }
        out.push_str(&format!("## {DISCLAIMER_HEADING}\n{}\n", self.disclaimer));
        out
    }

    fn all_text(&self) -> Vec<&str> {
        let mut t = vec![self.modality.as_str(), self.key_findings.as_str(), self.lay_explanation.as_str(), self.disclaimer.as_str()];
        t.extend(self.considerations.iter().map(String::as_str));
        t.extend(self.red_flags.iter().map(String::as_str));
        t.extend(self.resources.iter().map(|r| r.title.as_str()));
        t
    }
}

pub const RESOURCES_HEADING: &str = "Resources";

/// `- [title](url)` lines.
fn parse_links(body: &str) -> Vec<Resource> {
    list_items(body)
        .iter()
        .filter_map(|item| {
            let rest = item.strip_prefix('[')?;
            let (title, rest) = rest.split_once("](")?;
            let url = rest.strip_suffix(')')?;
            Some(Resource { title: title.to_string(), url: url.to_string() })
        })
        .collect()
}

fn violation(rule: GuardrailRule, detail: impl Into<String>) -> WorkflowError {
    WorkflowError::Guardrail { rule, detail: detail.into() }
}

pub fn validate_imaging(brief: &ImagingBrief) -> Result<(), WorkflowError> {
    validate_imaging_with(brief, FORBIDDEN_PHRASES)
}

/// Rules run in a fixed order and the first failure is reported: section
/// structure, disclaimer, forbidden phrases, red flags.
pub fn validate_imaging_with(brief: &ImagingBrief, forbidden: &[&str]) -> Result<(), WorkflowError> {
    let analysis: Vec<&str> =
        brief.headings.iter().map(String::as_str).filter(|h| *h != DISCLAIMER_HEADING && *h != RESOURCES_HEADING).collect();
    for (i, expected) in IMAGING_HEADINGS.iter().enumerate() {
        if analysis.get(i) != Some(expected) {
            return Err(violation(GuardrailRule::Sections, format!("expected `{expected}` as part {}", i + 1)));
        }
    }
    if let Some(extra) = analysis.get(IMAGING_HEADINGS.len()) {
        return Err(violation(GuardrailRule::Sections, format!("unexpected section `{extra}`")));
    }
    let empty_part = [
        (IMAGING_HEADINGS[0], brief.modality.trim().is_empty()),
        (IMAGING_HEADINGS[1], brief.key_findings.trim().is_empty()),
        (IMAGING_HEADINGS[2], brief.considerations.is_empty()),
        (IMAGING_HEADINGS[4], brief.lay_explanation.trim().is_empty()),
    ];
    if let Some((h, _)) = empty_part.iter().find(|(_, empty)| *empty) {
        return Err(violation(GuardrailRule::Sections, format!("`{h}` is empty")));
    }
    if brief.disclaimer.trim() != DISCLAIMER {
        return Err(violation(GuardrailRule::Disclaimer, "disclaimer missing or altered"));
    }
    for text in brief.all_text() {
        if let Some(p) = forbidden.iter().find(|p| contains_phrase(text, p)) {
            return Err(violation(GuardrailRule::ForbiddenPhrase, format!("contains `{p}`")));
        }
    }
    if brief.red_flags.iter().all(|f| f.trim().is_empty()) {
        return Err(violation(GuardrailRule::RedFlags, "no red-flag symptoms listed"));
    }
    Ok(())
}

const IMAGING: &str = "You are an educational imaging assistant for dementia caregivers. You do not diagnose. \
Look at the attached brain image and answer in Markdown with exactly these level-2 headings, in order: \
## Imaging Modality, ## Key Findings (qualitative observations), ## Diagnostic Assessment (Non-diagnostic) \
(a bulleted list of possible considerations, never a diagnosis), ## Red-Flag Symptoms (a bulleted list of urgent \
symptoms that need medical attention), ## Patient-Friendly Explanation. End with ## Disclaimer containing exactly: \
This analysis is educational and not a medical diagnosis.";

const PIPELINE: [&str; 1] = ["imaging"];

/// One model call over the image, the guardrails, then a resource search
/// restricted to allow-listed domains. A search outage only adds a warning.
pub fn run_imaging(
    image: MediaItem,
    provider: &dyn Provider,
    search: &dyn SearchClient,
    cfg: &WorkflowConfig,
) -> WorkflowRun<ImagingBrief> {
    if image.kind() != MediaKind::Image {
        let e = WorkflowError::InvalidInput(format!("expected an image, got {}", image.media_type()));
        return WorkflowRun::rejected(&cfg.run_id, &PIPELINE, "imaging", e);
    }
    if !provider.supports(MediaKind::Image) {
        return WorkflowRun::rejected(&cfg.run_id, &PIPELINE, "imaging", WorkflowError::UnsupportedMedia(MediaKind::Image));
    }
    let stage = Stage::new(AgentDef::new("imaging", "imaging", IMAGING), "Analyze the attached image.").with_attachments(vec![image]);
    let run = Pipeline::new(vec![stage]).run(&cfg.run_id, Default::default(), provider);
    let (mut transcript, context) = match run.into_result() {
        Ok(ok) => ok,
        Err((e, transcript)) => return WorkflowRun { transcript, result: Err(e.into()) },
    };
    let mut brief = ImagingBrief::from_markdown(&context.latest_from("imaging").map(|c| c.render()).unwrap_or_default());
    let forbidden: Vec<&str> = cfg.forbidden_phrases.iter().map(String::as_str).collect();
    if let Err(e) = validate_imaging_with(&brief, &forbidden) {
        return WorkflowRun::failed_check(transcript, "guardrail", e);
    }

    let modality = brief.modality.lines().next().unwrap_or("").trim();
    let query = format!("{modality} brain imaging dementia patient information");
    let args = json!({"query": query, "max_results": cfg.search_results});
    let allow = cfg.allow();
    let outcome = match search.search(&query, cfg.search_results) {
        Ok(hits) => {
            brief.resources = hits
                .iter()
                .filter(|h| host_of(&h.url).is_some_and(|host| domain_allowed(&host, &allow)))
                .filter(|h| !forbidden.iter().any(|p| contains_phrase(&h.title, p)))
                .map(|h| Resource { title: h.title.clone(), url: h.url.clone() })
                .collect();
            ToolOutcome::Ok { output: json!({"query": query, "hits": hits}) }
        }
        Err(e) => {
            brief.warnings.push(format!("resource search failed: {e}"));
            ToolOutcome::Error { message: e.to_string() }
        }
    };
    transcript.steps[0].tool_calls.push(ToolCallRecord { tool: "search".into(), args_digest: digest::digest_value(&args), outcome });
    WorkflowRun { transcript, result: Ok(brief) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::ByRole;
    use crate::web::{SearchHit, WebError};

    pub(crate) const BRIEF: &str = "## Imaging Modality\nLikely a coronal MRI or PET scan.\n\
## Key Findings\nModerate to severe asymmetry between the hemispheres.\n\
## Diagnostic Assessment (Non-diagnostic)\n- Neurodegenerative change\n- Prior stroke\n\
## Red-Flag Symptoms\n- Sudden weakness on one side\n- Sudden trouble speaking\n\
## Patient-Friendly Explanation\nOne side of the brain looks different from the other.\n\
## Disclaimer\nThis analysis is educational and not a medical diagnosis.\n";

    struct Results;
    impl SearchClient for Results {
        fn search(&self, _: &str, _: usize) -> Result<Vec<SearchHit>, WebError> {
            Ok(vec![
                SearchHit { title: "Brain MRI".into(), url: "https://www.nia.nih.gov/mri".into(), snippet: String::new() },
                SearchHit { title: "Blog".into(), url: "https://blog.example/mri".into(), snippet: String::new() },
            ])
        }
    }

    struct NoSearch;
    impl SearchClient for NoSearch {
        fn search(&self, _: &str, _: usize) -> Result<Vec<SearchHit>, WebError> {
            Err(WebError::NetworkError("offline".into()))
        }
    }

    fn png() -> MediaItem {
        MediaItem::new(MediaKind::Image, vec![0x89, b'P', b'N', b'G'], "image/png").unwrap()
    }

    fn rule(md: &str) -> Option<&'static str> {
        validate_imaging(&ImagingBrief::from_markdown(md)).err().and_then(|e| match e {
            WorkflowError::Guardrail { rule, .. } => Some(rule.id()),
            _ => None,
        })
    }

    #[test]
    fn well_formed_passes() {
        let p = ByRole::new(&[("imaging", BRIEF)]).with_media(&[MediaKind::Image]);
        let run = run_imaging(png(), &p, &Results, &WorkflowConfig::default());
        let brief = run.result.unwrap();
        assert!(brief.key_findings.contains("asymmetry"));
        assert_eq!(brief.red_flags.len(), 2);
        assert_eq!(brief.resources, [Resource { title: "Brain MRI".into(), url: "https://www.nia.nih.gov/mri".into() }]);
        assert_eq!(p.log.borrow()[0].attachments.len(), 1);
        assert_eq!(run.transcript.steps[0].tool_calls.len(), 1);
        let mut back = ImagingBrief::from_markdown(&brief.to_markdown());
        back.headings = brief.headings.clone();
        assert_eq!(back.resources, brief.resources);
        assert_eq!(back, brief);
        assert!(validate_imaging(&ImagingBrief::from_markdown(&brief.to_markdown())).is_ok());
    }

    #[test]
    fn rule_ids() {
        assert_eq!(rule(BRIEF), None);
        assert_eq!(rule(&BRIEF.replace("Neurodegenerative change", "the diagnosis is Alzheimer's")), Some("forbidden-phrase"));
        assert_eq!(rule(&BRIEF.replace("Prior stroke", "You have a tumor")), Some("forbidden-phrase"));
        assert_eq!(rule(&BRIEF.replace("This analysis is educational and not a medical diagnosis.", "")), Some("disclaimer"));
        assert_eq!(rule(&BRIEF.replace("- Sudden weakness on one side\n- Sudden trouble speaking\n", "")), Some("red-flags"));
        assert_eq!(rule(&BRIEF.replace("## Key Findings", "## Findings")), Some("sections"));
        let swapped = BRIEF
            .replace("## Imaging Modality", "## X")
            .replace("## Key Findings", "## Imaging Modality")
            .replace("## X", "## Key Findings");
        assert_eq!(rule(&swapped), Some("sections"));
    }

    #[test]
    fn failures() {
        let p = ByRole::new(&[("imaging", BRIEF)]);
        assert_eq!(run_imaging(png(), &p, &Results, &WorkflowConfig::default()).result.unwrap_err().code(), "UnsupportedMedia");
        let p = ByRole::new(&[("imaging", "## Imaging Modality\nMRI\n")]).with_media(&[MediaKind::Image]);
        let run = run_imaging(png(), &p, &Results, &WorkflowConfig::default());
        assert_eq!(run.result.unwrap_err().subject(), Some("sections"));
        assert_eq!(run.transcript.failure.unwrap().tool_or_agent, "guardrail");
        let p = ByRole::new(&[("imaging", BRIEF)]).with_media(&[MediaKind::Image]);
        let b = run_imaging(png(), &p, &NoSearch, &WorkflowConfig::default()).result.unwrap();
        assert!(b.resources.is_empty() && b.warnings.len() == 1);
        let audio = MediaItem::new(MediaKind::Audio, vec![1], "audio/wav").unwrap();
        assert_eq!(run_imaging(audio, &p, &Results, &WorkflowConfig::default()).result.unwrap_err().code(), "InvalidInput");
    }
}
