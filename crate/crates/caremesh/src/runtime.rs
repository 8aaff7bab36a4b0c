//! Backend selection and workflow dispatch shared by the CLI and the service.

use std::path::PathBuf;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use caremesh_core::kernel::RunTranscript;
use caremesh_core::provider::{MediaItem, Provider, ProviderError};
use caremesh_core::rag::ReportDocument;
use caremesh_core::web::{CrawlClient, SearchClient};
use caremesh_core::workflows::{
    run_deep_research, run_imaging, run_multimodal, run_research_care, run_support_plan, Intake, WorkflowConfig, WorkflowError,
    WorkflowRun, LIVE_MIN_WORDS,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{Config, ProviderKind};
use crate::live::{LiveProvider, LiveSettings};
use crate::scripted::ScriptedProvider;
use crate::store::ErrorBody;
use crate::webclient::{FixtureSearch, HttpCrawlClient, HttpSearchClient, StubCrawlClient};

pub type DynProvider = Box<dyn Provider + Send + Sync>;

/// Model, crawl and search backends for one process.
pub struct Backends {
    pub kind: ProviderKind,
    pub fixture: Option<PathBuf>,
    pub crawl: Box<dyn CrawlClient + Send + Sync>,
    pub search: Box<dyn SearchClient + Send + Sync>,
}

impl Backends {
    pub fn from_config(cfg: &Config) -> Self {
        let crawl: Box<dyn CrawlClient + Send + Sync> = match &cfg.crawl_fixtures {
            Some(dir) => Box::new(StubCrawlClient::new(dir)),
            None => Box::new(HttpCrawlClient::from_env()),
        };
        let search: Box<dyn SearchClient + Send + Sync> = match &cfg.search_fixtures {
            Some(dir) => Box::new(FixtureSearch::new(dir)),
            None => Box::new(HttpSearchClient::from_env()),
        };
        Self { kind: cfg.provider, fixture: cfg.fixture.clone(), crawl, search }
    }

    /// A fresh provider. Scripted fixtures are re-read so each run starts
    /// with every entry unconsumed.
    pub fn provider(&self) -> Result<DynProvider, ProviderError> {
        match self.kind {
            ProviderKind::Scripted => {
                let path =
                    self.fixture.as_ref().ok_or_else(|| ProviderError::InvalidRequest("scripted provider needs a fixture file".into()))?;
                let p = ScriptedProvider::load(path).map_err(|e| ProviderError::InvalidRequest(e.to_string()))?;
                Ok(Box::new(p))
            }
            ProviderKind::Live => Ok(Box::new(LiveProvider::new(LiveSettings::from_env()?)?)),
        }
    }

    pub fn workflow_config(&self, run_id: &str) -> WorkflowConfig {
        let mut cfg = WorkflowConfig::default().with_run_id(run_id);
        if self.kind == ProviderKind::Live {
            cfg.min_words = LIVE_MIN_WORDS;
        }
        cfg
    }
}

/// An uploaded media file, base64 encoded so run inputs can be persisted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaUpload {
    pub media_type: String,
    pub data: String,
}

impl MediaUpload {
    pub fn new(media_type: &str, bytes: &[u8]) -> Self {
        Self { media_type: media_type.into(), data: B64.encode(bytes) }
    }

    pub fn to_item(&self) -> Result<MediaItem, WorkflowError> {
        let bytes = B64.decode(&self.data).map_err(|e| WorkflowError::InvalidInput(format!("bad media payload: {e}")))?;
        MediaItem::from_media_type(bytes, self.media_type.clone()).map_err(|e| WorkflowError::InvalidInput(e.to_string()))
    }
}

/// Guess a media type from a file name.
pub fn media_type_for(name: &str) -> Option<&'static str> {
    let ext = name.rsplit_once('.')?.1.to_ascii_lowercase();
    Some(match ext.as_str() {
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "gif" => "image/gif",
        "webp" => "image/webp",
        "mp3" => "audio/mpeg",
        "wav" => "audio/wav",
        "m4a" => "audio/mp4",
        "ogg" => "audio/ogg",
        "mp4" => "video/mp4",
        "webm" => "video/webm",
        "mov" => "video/quicktime",
        "pdf" => "application/pdf",
        "txt" | "md" => "text/plain",
        "csv" => "text/csv",
        _ => return None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "workflow", rename_all = "kebab-case")]
pub enum WorkflowInput {
    SupportPlan { intake: Intake },
    DeepResearch { topic: String },
    ResearchCare { topic: String },
    Imaging { image: MediaUpload },
    Multimodal { media: Vec<MediaUpload>, prompt: String },
}

pub const WORKFLOWS: [&str; 5] = ["support-plan", "deep-research", "research-care", "imaging", "multimodal"];

impl WorkflowInput {
    pub fn name(&self) -> &'static str {
        match self {
            WorkflowInput::SupportPlan { .. } => WORKFLOWS[0],
            WorkflowInput::DeepResearch { .. } => WORKFLOWS[1],
            WorkflowInput::ResearchCare { .. } => WORKFLOWS[2],
            WorkflowInput::Imaging { .. } => WORKFLOWS[3],
            WorkflowInput::Multimodal { .. } => WORKFLOWS[4],
        }
    }
}

/// A finished workflow run in serializable form.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub transcript: RunTranscript,
    pub result: Result<Value, WorkflowError>,
    /// Human-readable Markdown rendering of a successful result.
    pub markdown: Option<String>,
    /// `(title, body)` of a report that can join a knowledge base.
    pub report: Option<(String, String)>,
}

impl Outcome {
    pub fn error_body(&self) -> Option<ErrorBody> {
        self.result.as_ref().err().map(workflow_error_body)
    }
}

pub fn workflow_error_body(e: &WorkflowError) -> ErrorBody {
    ErrorBody { error: e.code().into(), detail: e.to_string(), subject: e.subject().map(str::to_string) }
}

fn finish<T: Serialize>(run: WorkflowRun<T>, markdown: impl Fn(&T) -> String, report: impl Fn(&T) -> Option<(String, String)>) -> Outcome {
    match run.result {
        Ok(v) => Outcome {
            markdown: Some(markdown(&v)),
            report: report(&v),
            result: Ok(serde_json::to_value(&v).unwrap_or(Value::Null)),
            transcript: run.transcript,
        },
        Err(e) => Outcome { transcript: run.transcript, result: Err(e), markdown: None, report: None },
    }
}

fn as_report(r: &dyn ReportDocument) -> Option<(String, String)> {
    Some((r.title().to_string(), r.body().to_string()))
}

fn rejected(run_id: &str, who: &str, e: WorkflowError) -> Outcome {
    let mut transcript = RunTranscript::new(run_id, Vec::new());
    transcript.fail(who, e.to_string());
    Outcome { transcript, result: Err(e), markdown: None, report: None }
}

/// Runs one workflow to completion with a fresh provider.
pub fn execute(input: &WorkflowInput, backends: &Backends, run_id: &str) -> Outcome {
    let provider = match backends.provider() {
        Ok(p) => p,
        Err(e) => return rejected(run_id, "provider", WorkflowError::Provider(e)),
    };
    let cfg = backends.workflow_config(run_id);
    match input {
        WorkflowInput::SupportPlan { intake } => finish(run_support_plan(intake, &*provider, &cfg), |r| r.to_markdown(), |_| None),
        WorkflowInput::DeepResearch { topic } => {
            finish(run_deep_research(topic, &*backends.crawl, &*provider, &cfg), |r| r.enhanced_report.clone(), |r| as_report(r))
        }
        WorkflowInput::ResearchCare { topic } => {
            finish(run_research_care(topic, &*backends.search, &*provider, &cfg), |r| r.body_markdown.clone(), |r| as_report(r))
        }
        WorkflowInput::Imaging { image } => match image.to_item() {
            Ok(item) => finish(run_imaging(item, &*provider, &*backends.search, &cfg), |b| b.to_markdown(), |_| None),
            Err(e) => rejected(run_id, "imaging", e),
        },
        WorkflowInput::Multimodal { media, prompt } => {
            let items: Result<Vec<MediaItem>, WorkflowError> = media.iter().map(MediaUpload::to_item).collect();
            match items {
                Ok(items) => {
                    finish(run_multimodal(items, prompt, Some(&*backends.search), &*provider, &cfg), |b| b.brief.clone(), |_| None)
                }
                Err(e) => rejected(run_id, "multimodal", e),
            }
        }
    }
}
