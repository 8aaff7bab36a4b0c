//! Command-line driver. Exit codes: 0 ok, 1 domain failure, 2 usage.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use caremesh_core::analyst::{answer_question, AnalystAnswer};
use caremesh_core::provider::HashedEmbedder;
use caremesh_core::rag::{answer, extract_text, GroundedAnswer, DEFAULT_TOP_K};
use caremesh_core::sql::{ResultSet, Value as Cell};
use caremesh_core::web::{scrape_schema, scrape_structured, ProviderExtractor, ScrapeResult};
use caremesh_core::workflows::Intake;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Config, ProviderKind};
use crate::csvload::ingest_csv;
use crate::fetch::HttpFetcher;
use crate::pdf::BasicPdfExtractor;
use crate::runtime::{self, media_type_for, Backends, MediaUpload, WorkflowInput};
use crate::store::{DataDir, ErrorBody};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "caremesh", version, about = "Caregiver support agents, document chat and dataset queries")]
pub struct Cli {
    /// Config file (default: ./caremesh.toml when present).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    provider: Option<ProviderKind>,
    /// Scripted provider fixture.
    #[arg(long, global = true)]
    fixture: Option<PathBuf>,
    /// Write the output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print machine-readable JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Root for sessions, indexes, datasets and run records.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Directory of stub crawl pages; the HTTP crawl client is used when unset.
    #[arg(long, global = true)]
    crawl_fixtures: Option<PathBuf>,
    /// Directory of stub search hits; the HTTP search client is used when unset.
    #[arg(long, global = true)]
    search_fixtures: Option<PathBuf>,
    /// Run id recorded in workflow transcripts.
    #[arg(long, global = true, default_value = "cli")]
    run_id: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assessment, care plan and follow-up plan from an intake JSON file.
    SupportPlan {
        #[arg(long)]
        intake: PathBuf,
    },
    /// Crawl a topic, then write and elaborate a report.
    DeepResearch {
        #[arg(long)]
        topic: String,
    },
    /// Plan source-restricted searches and edit a caregiver report.
    ResearchCare {
        #[arg(long)]
        topic: String,
    },
    /// Non-diagnostic educational brief for one image.
    Imaging {
        #[arg(long)]
        image: PathBuf,
    },
    /// One brief over any mix of images, audio and video.
    Multimodal {
        #[arg(long = "media")]
        media: Vec<PathBuf>,
        #[arg(long, default_value = "")]
        prompt: String,
    },
    /// Add a PDF or text document to a session's knowledge base.
    Ingest {
        #[arg(long)]
        session: String,
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        source_name: Option<String>,
    },
    /// Ask a question against a session's documents.
    Chat {
        #[arg(long)]
        session: String,
        #[arg(long = "q")]
        question: String,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Ask a question about a CSV file.
    Query {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long = "q")]
        question: String,
    },
    /// Structured summary of a web page.
    Scrape {
        #[arg(long)]
        url: String,
        #[arg(long)]
        prompt: String,
    },
    /// Start the HTTP service.
    Serve,
}

impl Command {
    fn needs_provider(&self) -> bool {
        !matches!(self, Command::Ingest { .. })
    }
}

struct Failure {
    body: ErrorBody,
    exit: i32,
}

impl Failure {
    fn domain(code: &str, detail: impl ToString) -> Self {
        Self { body: ErrorBody::new(code, detail.to_string()), exit: EXIT_FAILURE }
    }

    fn usage(detail: impl ToString) -> Self {
        Self { body: ErrorBody::new("Usage", detail.to_string()), exit: EXIT_USAGE }
    }
}

struct Output {
    json: Value,
    text: String,
}

fn output<T: Serialize>(value: &T, text: String) -> Output {
    Output { json: serde_json::to_value(value).unwrap_or(Value::Null), text }
}

fn read_file(path: &PathBuf) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn cell(v: &Cell) -> String {
    match v {
        Cell::Null => "NULL".into(),
        Cell::Number(n) => n.to_string(),
        Cell::Text(t) => t.clone(),
    }
}

pub fn render_table(rs: &ResultSet) -> String {
    let mut out = format!("| {} |\n", rs.columns.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(rs.columns.len()));
    for row in &rs.rows {
        let _ = writeln!(out, "| {} |", row.iter().map(cell).collect::<Vec<_>>().join(" | "));
    }
    out
}

fn render_analyst(a: &AnalystAnswer) -> String {
    let mut out = format!("SQL: {}\n\n{}", a.sql, render_table(&a.result));
    if !a.explanation.trim().is_empty() {
        let _ = write!(out, "\n{}\n", a.explanation.trim());
    }
    if let Some(c) = &a.caveat {
        let _ = write!(out, "\nNote: {c}\n");
    }
    out
}

fn render_grounded(g: &GroundedAnswer) -> String {
    let mut out = format!("{}\n\nSources:\n", g.answer_text.trim());
    for (i, c) in g.citations.iter().enumerate() {
        let _ = writeln!(out, "[{}] {} ({}#{}, score {:.3})", i + 1, c.source_name, c.doc_id, c.chunk_id, c.score);
    }
    out
}

fn render_scrape(r: &ScrapeResult) -> String {
    let mut out = format!("{}\n\n", r.summary);
    for p in &r.key_points {
        let _ = writeln!(out, "- {p}");
    }
    let method = serde_json::to_value(r.method).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
    let _ = write!(out, "\n(method: {method})\n");
    out
}

fn upload(path: &PathBuf) -> Result<MediaUpload, Failure> {
    let name = path.to_string_lossy();
    let media_type = media_type_for(&name).ok_or_else(|| Failure::usage(format!("unknown media type for {name}")))?;
    Ok(MediaUpload::new(media_type, &read_file(path)?))
}

fn workflow(input: WorkflowInput, backends: &Backends, run_id: &str) -> Result<Output, Failure> {
    let out = runtime::execute(&input, backends, run_id);
    match out.result {
        Ok(v) => Ok(Output { text: out.markdown.unwrap_or_default(), json: v }),
        Err(e) => Err(Failure { body: runtime::workflow_error_body(&e), exit: EXIT_FAILURE }),
    }
}

fn dispatch(cli: &Cli, cfg: &Config) -> Result<Output, Failure> {
    let backends = Backends::from_config(cfg);
    let provider = || backends.provider().map_err(|e| Failure::domain(e.code(), e));
    match &cli.command {
        Command::SupportPlan { intake } => {
            let text = String::from_utf8(read_file(intake)?).map_err(Failure::usage)?;
            let intake = Intake::from_json(&text).map_err(|e| Failure::domain(e.code(), e))?;
            workflow(WorkflowInput::SupportPlan { intake }, &backends, &cli.run_id)
        }
        Command::DeepResearch { topic } => workflow(WorkflowInput::DeepResearch { topic: topic.clone() }, &backends, &cli.run_id),
        Command::ResearchCare { topic } => workflow(WorkflowInput::ResearchCare { topic: topic.clone() }, &backends, &cli.run_id),
        Command::Imaging { image } => workflow(WorkflowInput::Imaging { image: upload(image)? }, &backends, &cli.run_id),
        Command::Multimodal { media, prompt } => {
            let media = media.iter().map(upload).collect::<Result<Vec<_>, _>>()?;
            workflow(WorkflowInput::Multimodal { media, prompt: prompt.clone() }, &backends, &cli.run_id)
        }
        Command::Ingest { session, file, source_name } => {
            let data = DataDir::new(&cfg.data_dir);
            let mut s = data.ensure_session(session).map_err(Failure::usage)?;
            let bytes = read_file(file)?;
            let name = file.to_string_lossy();
            let media_type = media_type_for(&name).unwrap_or("application/octet-stream");
            let text = extract_text(&bytes, media_type, &BasicPdfExtractor).map_err(|e| Failure::domain(e.code(), e))?;
            let mut kb = data.load_kb(&s).map_err(|e| Failure::domain(e.code(), e))?;
            let source = source_name
                .clone()
                .unwrap_or_else(|| file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "document".into()));
            let doc_id = kb.add_document(&source, &text, &HashedEmbedder).map_err(|e| Failure::domain(e.code(), e))?;
            data.save_kb(&s.id, &kb).map_err(|e| Failure::domain(e.code(), e))?;
            s.doc_ids.push(doc_id.clone());
            data.save_session(&s).map_err(|e| Failure::domain(e.code(), e))?;
            let chunks = kb.chunks_of(&doc_id).map_or(0, <[_]>::len);
            let v = json!({"session": s.id, "doc_id": doc_id, "chunks": chunks});
            Ok(Output { text: format!("added {doc_id} ({chunks} chunks) to session {}\n", s.id), json: v })
        }
        Command::Chat { session, question, k } => {
            let data = DataDir::new(&cfg.data_dir);
            let s = data
                .load_session(session)
                .map_err(|e| Failure::domain(e.code(), e))?
                .ok_or_else(|| Failure::domain("NotFound", format!("session `{session}` not found")))?;
            let kb = data.load_kb(&s).map_err(|e| Failure::domain(e.code(), e))?;
            let p = provider()?;
            let g = answer(&kb, question, k.unwrap_or(DEFAULT_TOP_K), &HashedEmbedder, &*p).map_err(|e| Failure::domain(e.code(), e))?;
            Ok(output(&g, render_grounded(&g)))
        }
        Command::Query { csv, question } => {
            let table = ingest_csv(&read_file(csv)?).map_err(|e| Failure::domain(e.code(), e))?;
            let p = provider()?;
            let a = answer_question(question, &table, &*p).map_err(|e| Failure::domain(e.code(), e))?;
            Ok(output(&a, render_analyst(&a)))
        }
        Command::Scrape { url, prompt } => {
            let fetcher = HttpFetcher::new().map_err(|e| Failure::domain(e.code(), e))?;
            let p = provider()?;
            let primary = ProviderExtractor { fetcher: &fetcher, provider: &*p };
            let r = scrape_structured(url, prompt, &scrape_schema(), &primary, &fetcher, &*p).map_err(|e| Failure::domain(e.code(), e))?;
            Ok(output(&r, render_scrape(&r)))
        }
        Command::Serve => unreachable!("handled before dispatch"),
    }
}

fn serve(cfg: Config, stdout: &mut dyn Write) -> Result<(), Failure> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| Failure::domain("StartupError", e))?;
    rt.block_on(crate::service::serve(cfg, |addr| {
        let _ = writeln!(stdout, "listening on http://{addr}");
        let _ = stdout.flush();
    }))
    .map_err(|e| Failure::domain("StartupError", e))
}

fn config_for(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = Config::load(cli.config.as_deref()).map_err(Failure::usage)?;
    if let Some(p) = cli.provider {
        cfg.provider = p;
    }
    if let Some(f) = &cli.fixture {
        cfg.fixture = Some(f.clone());
    }
    if let Some(d) = &cli.data_dir {
        cfg.data_dir = d.clone();
    }
    if let Some(d) = &cli.crawl_fixtures {
        cfg.crawl_fixtures = Some(d.clone());
    }
    if let Some(d) = &cli.search_fixtures {
        cfg.search_fixtures = Some(d.clone());
    }
    if cli.command.needs_provider() && cfg.provider == ProviderKind::Scripted {
        match &cfg.fixture {
            None => return Err(Failure::usage("--fixture is required with --provider scripted")),
            Some(f) if !f.exists() => return Err(Failure::usage(format!("fixture {} does not exist", f.display()))),
            Some(_) => {}
        }
    }
    Ok(cfg)
}

fn report_failure(f: &Failure, json_mode: bool, stdout: &mut dyn Write, stderr: &mut dyn Write) {
    if json_mode && f.exit == EXIT_FAILURE {
        let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&f.body).unwrap_or_default());
    }
    let subject = f.body.subject.as_deref().map(|s| format!(" [{s}]")).unwrap_or_default();
    let _ = writeln!(stderr, "error: {}{}: {}", f.body.error, subject, f.body.detail);
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{rendered}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{rendered}");
                    EXIT_USAGE
                }
            };
        }
    };
    let cfg = match config_for(&cli) {
        Ok(c) => c,
        Err(f) => {
            report_failure(&f, cli.json, stdout, stderr);
            return f.exit;
        }
    };
    if matches!(cli.command, Command::Serve) {
        return match serve(cfg, stdout) {
            Ok(()) => EXIT_OK,
            Err(f) => {
                report_failure(&f, false, stdout, stderr);
                f.exit
            }
        };
    }
    match dispatch(&cli, &cfg) {
        Ok(out) => {
            let rendered = if cli.json { format!("{}\n", serde_json::to_string_pretty(&out.json).unwrap_or_default()) } else { out.text };
            match &cli.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, rendered) {
                        let _ = writeln!(stderr, "error: cannot write {}: {e}", path.display());
                        return EXIT_FAILURE;
                    }
                }
                None => {
                    let _ = write!(stdout, "{rendered}");
                }
            }
            EXIT_OK
        }
        Err(f) => {
            report_failure(&f, cli.json, stdout, stderr);
            f.exit
        }
    }
}
