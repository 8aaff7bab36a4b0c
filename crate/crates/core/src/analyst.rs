//! Natural-language questions over the session table: prompt, extract one
//! SELECT from the model reply, gate it through the parser, run it, explain it.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::{CompletionRequest, Message, Provider, ProviderError};
use crate::sql::parser::FORBIDDEN_STATEMENTS;
use crate::sql::{parse_sql, BuiltinEvaluator, ColumnKind, ExecError, ParseError, QueryBackend, ResultSet, Table};

pub const PREDICTIVE_LEXICON: &[&str] = &["predict", "forecast", "will", "expected", "likely"];

pub const PREDICTIVE_CAVEAT: &str = "This answer summarizes the uploaded records as they are; it is not a \
statistical forecast. Averages and counts describe past observations and may not hold for new patients.";

const MAX_EXPLAINED_ROWS: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalystAnswer {
    pub question: String,
    pub sql: String,
    pub result: ResultSet,
    pub explanation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caveat: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum AnalystError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error("no SQL statement found in model output")]
    NoSqlFound,
    #[error("rejected SQL `{sql}`: {error}")]
    Parse { sql: String, error: ParseError },
    #[error("query failed: {0}")]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

impl AnalystError {
    pub fn code(&self) -> &'static str {
        match self {
            AnalystError::EmptyQuestion => "InvalidInput",
            AnalystError::NoSqlFound => "NoSqlFound",
            AnalystError::Parse { error, .. } => error.code(),
            AnalystError::Exec(e) => e.code(),
            AnalystError::Provider(e) => e.code(),
        }
    }
}

fn kind_name(kind: ColumnKind) -> &'static str {
    match kind {
        ColumnKind::Number => "number",
        ColumnKind::Text => "text",
    }
}

/// Schema-aware request asking for a single SELECT in a fenced block.
pub fn build_prompt(table: &Table, question: &str) -> Result<CompletionRequest, AnalystError> {
    if question.trim().is_empty() {
        return Err(AnalystError::EmptyQuestion);
    }
    let mut system = format!(
        "You are a data analyst. The user's data is a single table named `{}` with {} rows and these columns:\n",
        table.name(),
        table.row_count()
    );
    for (name, kind) in table.schema() {
        system.push_str(&format!("- {name} ({})\n", kind_name(kind)));
    }
    system.push_str(
        "\nAnswer with exactly one SQL SELECT statement inside a ```sql fenced code block. \
Use only SELECT, WHERE, GROUP BY, ORDER BY, LIMIT and the aggregates COUNT, SUM, AVG, MIN, MAX. \
If the question asks for a prediction, answer it descriptively with averages or counts over the existing rows.",
    );
    Ok(CompletionRequest::new(alloc::vec![Message::system(system), Message::user(question.trim())]).with_meta("analyst-sql", 0))
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// The first fenced block's content; otherwise the first `SELECT ...` run up to
/// and including a semicolon, or to the end of the text when there is none.
/// A reply with no SELECT whose line opens with another statement keyword
/// (`DELETE ...`) is extracted the same way so the parser can reject it.
pub fn extract_sql(model_output: &str) -> Result<String, AnalystError> {
    if let Some(open) = model_output.find("```") {
        let after = &model_output[open + 3..];
        // Skip the info string (e.g. `sql`) on the opening line.
        let body = after.find('\n').map_or("", |nl| &after[nl + 1..]);
        let content = body.find("```").map_or(body, |close| &body[..close]).trim();
        if content.is_empty() {
            return Err(AnalystError::NoSqlFound);
        }
        return Ok(content.to_string());
    }
    let lower = model_output.to_ascii_lowercase();
    let bytes = lower.as_bytes();
    let start = lower.match_indices("select").map(|(i, _)| i).find(|&i| {
        let before_ok = i == 0 || !is_word_byte(bytes[i - 1]);
        let after_ok = bytes.get(i + 6).is_none_or(|&b| !is_word_byte(b));
        before_ok && after_ok
    });
    let Some(start) = start.or_else(|| statement_line_start(model_output)) else {
        return Err(AnalystError::NoSqlFound);
    };
    let rest = &model_output[start..];
    let stmt = rest.find(';').map_or(rest, |semi| &rest[..=semi]);
    Ok(stmt.trim().to_string())
}

fn statement_line_start(text: &str) -> Option<usize> {
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_start();
        let word = trimmed.split(|c: char| !c.is_ascii_alphabetic()).next().unwrap_or("");
        if FORBIDDEN_STATEMENTS.iter().any(|k| k.eq_ignore_ascii_case(word)) {
            return Some(offset + (line.len() - trimmed.len()));
        }
        offset += line.len();
    }
    None
}

pub fn is_predictive(question: &str, lexicon: &[&str]) -> bool {
    question.split(|c: char| !c.is_alphanumeric()).any(|w| lexicon.iter().any(|l| w.eq_ignore_ascii_case(l)))
}

fn render_result(rs: &ResultSet) -> String {
    let mut out = rs.columns.join(" | ");
    out.push('\n');
    for row in rs.rows.iter().take(MAX_EXPLAINED_ROWS) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(" | "));
        out.push('\n');
    }
    if rs.rows.len() > MAX_EXPLAINED_ROWS {
        out.push_str(&format!("... {} more rows\n", rs.rows.len() - MAX_EXPLAINED_ROWS));
    }
    out
}

pub fn explain_prompt(question: &str, sql: &str, result: &ResultSet) -> CompletionRequest {
    let system = "You explain data analysis results to caregivers and clinicians in plain language. \
Say what the query computed and what the numbers show. Do not present the result as a prediction.";
    let user = format!("Question: {question}\n\nSQL:\n{sql}\n\nResult:\n{}", render_result(result));
    CompletionRequest::new(alloc::vec![Message::system(system), Message::user(user)]).with_meta("analyst-explain", 1)
}

pub struct Analyst<'a> {
    pub lexicon: Vec<String>,
    pub backend: &'a dyn QueryBackend,
}

impl Default for Analyst<'_> {
    fn default() -> Self {
        Self { lexicon: PREDICTIVE_LEXICON.iter().map(|s| s.to_string()).collect(), backend: &BuiltinEvaluator }
    }
}

impl Analyst<'_> {
    pub fn answer(&self, question: &str, table: &Table, provider: &dyn Provider) -> Result<AnalystAnswer, AnalystError> {
        let req = build_prompt(table, question)?;
        let reply = provider.complete(&req)?;
        let sql = extract_sql(&reply)?;
        let query = parse_sql(&sql).map_err(|error| AnalystError::Parse { sql: sql.clone(), error })?;
        let result = self.backend.execute(&query, table)?;
        let explanation = provider.complete(&explain_prompt(question.trim(), &sql, &result))?;
        let lexicon: Vec<&str> = self.lexicon.iter().map(String::as_str).collect();
        let caveat = is_predictive(question, &lexicon).then(|| PREDICTIVE_CAVEAT.to_string());
        Ok(AnalystAnswer { question: question.trim().to_string(), sql, result, explanation, caveat })
    }
}

pub fn answer_question(question: &str, table: &Table, provider: &dyn Provider) -> Result<AnalystAnswer, AnalystError> {
    Analyst::default().answer(question, table, provider)
}
