use std::path::{Path, PathBuf};

use caremesh::cli::{run, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use serde_json::Value;

const SENTENCE: &str = "Caregivers should keep a daily log of sleep and meals.";

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn fx(name: &str) -> String {
    fixtures().join(name).display().to_string()
}

fn caremesh(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("caremesh").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Compares against `tests/golden/<name>`; `UPDATE_GOLDEN=1` rewrites the file.
fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "golden {name} differs");
}

fn json_run(name: &str, args: &[&str]) -> Value {
    let (code, out, err) = caremesh(args);
    assert_eq!(code, EXIT_OK, "stderr: {err}");
    golden(name, &out);
    serde_json::from_str(&out).unwrap()
}

#[test]
fn support_plan_json() {
    let v =
        json_run("support_plan.json", &["--json", "--fixture", &fx("support_plan.json"), "support-plan", "--intake", &fx("intake.json")]);
    let headings: Vec<&str> = v["followup"]["sections"].as_object().map(|m| m.keys().map(String::as_str).collect()).unwrap_or_default();
    assert_eq!(headings, caremesh_core::workflows::FOLLOW_UP_HEADINGS);
}

#[test]
fn deep_research_json() {
    let v = json_run(
        "deep_research.json",
        &[
            "--json",
            "--fixture",
            &fx("deep_research.json"),
            "--crawl-fixtures",
            &fx("crawl"),
            "deep-research",
            "--topic",
            "Alzheimer's disease research",
        ],
    );
    assert_eq!(v["sources"].as_array().unwrap().len(), 3);
}

#[test]
fn research_care_json() {
    let v = json_run(
        "research_care.json",
        &[
            "--json",
            "--fixture",
            &fx("research_care.json"),
            "--search-fixtures",
            &fx("search"),
            "research-care",
            "--topic",
            "agitation and sundowning",
        ],
    );
    assert!(v["sources"].as_array().unwrap().iter().all(|h| !h["url"].as_str().unwrap().contains("random-blog")));
}

#[test]
fn imaging_json() {
    let v = json_run(
        "imaging.json",
        &["--json", "--fixture", &fx("imaging.json"), "--search-fixtures", &fx("search"), "imaging", "--image", &fx("scan.png")],
    );
    assert_eq!(v["disclaimer"], "This analysis is educational and not a medical diagnosis.");
}

#[test]
fn multimodal_json() {
    json_run(
        "multimodal.json",
        &[
            "--json",
            "--fixture",
            &fx("multimodal.json"),
            "--search-fixtures",
            &fx("search"),
            "multimodal",
            "--media",
            &fx("scan.png"),
            "--media",
            &fx("voice.wav"),
            "--prompt",
            "what is happening in the evening",
        ],
    );
}

#[test]
fn query_json_and_text() {
    let v = json_run(
        "query.json",
        &["--json", "--fixture", &fx("analyst.json"), "query", "--csv", &fx("patients.csv"), "--q", "average age with bmi over 24"],
    );
    assert_eq!(v["result"]["rows"][0][0], 75.0);
    let (code, out, _) =
        caremesh(&["--fixture", &fx("analyst.json"), "query", "--csv", &fx("patients.csv"), "--q", "average age with bmi over 24"]);
    assert_eq!(code, EXIT_OK);
    golden("query.txt", &out);
}

#[test]
fn out_flag_writes_file() {
    let tmp = tempfile::tempdir().unwrap();
    let target = tmp.path().join("plan.md");
    let (code, out, _) = caremesh(&[
        "--fixture",
        &fx("support_plan.json"),
        "--out",
        target.to_str().unwrap(),
        "support-plan",
        "--intake",
        &fx("intake.json"),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());
    let md = std::fs::read_to_string(target).unwrap();
    let order: Vec<usize> =
        ["Check-in Cadence", "Tracking Template", "Escalation Criteria", "Care Progression Planning", "Resource Refresher"]
            .iter()
            .map(|h| md.find(&format!("## {h}")).unwrap())
            .collect();
    assert!(order.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn pdf_ingest_then_chat() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().to_str().unwrap();
    for file in ["notes.pdf", "notes_plain.pdf"] {
        let (code, _, err) = caremesh(&["--data-dir", data, "--json", "ingest", "--session", "s1", "--file", &fx(file)]);
        assert_eq!(code, EXIT_OK, "{err}");
    }
    let (code, out, _) =
        caremesh(&["--data-dir", data, "--json", "--fixture", &fx("chat.json"), "chat", "--session", "s1", "--q", "what to log"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    let cites = v["citations"].as_array().unwrap();
    assert_eq!(cites.len(), 2);
    assert!(cites.iter().all(|c| c["text"].as_str().unwrap().contains(SENTENCE)));
}

#[test]
fn domain_failures_exit_one() {
    let (code, out, err) = caremesh(&[
        "--json",
        "--fixture",
        &fx("deep_research.json"),
        "--crawl-fixtures",
        &fx("crawl"),
        "deep-research",
        "--topic",
        "unindexed topic",
    ]);
    assert_eq!(code, EXIT_FAILURE);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["error"], "ToolUnavailable");
    assert_eq!(v["subject"], "crawl");
    assert!(err.starts_with("error: ToolUnavailable [crawl]"));

    let (code, _, err) = caremesh(&["--fixture", &fx("analyst.json"), "support-plan", "--intake", &fx("intake.json")]);
    assert_eq!(code, EXIT_FAILURE);
    assert!(err.contains("AgentFailure"), "{err}");

    let (code, _, err) = caremesh(&["--fixture", &fx("imaging.json"), "imaging", "--image", &fx("voice.wav")]);
    assert_eq!(code, EXIT_FAILURE);
    assert!(err.contains("InvalidInput"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(caremesh(&["query", "--csv", &fx("patients.csv"), "--q", "x"]).0, EXIT_USAGE);
    assert_eq!(caremesh(&["--fixture", &fx("nope.json"), "deep-research", "--topic", "x"]).0, EXIT_USAGE);
    assert_eq!(caremesh(&["--fixture", &fx("analyst.json"), "query", "--csv", &fx("missing.csv"), "--q", "x"]).0, EXIT_USAGE);
    assert_eq!(caremesh(&["support-plan"]).0, EXIT_USAGE);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_caremesh");
    let status = std::process::Command::new(bin).arg("--version").output().unwrap();
    assert!(status.status.success());
    let status = std::process::Command::new(bin).args(["deep-research", "--topic", "x"]).env_remove("CAREMESH_FIXTURE").output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
}
