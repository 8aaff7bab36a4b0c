//! CSV ingestion into the session table.

use caremesh_core::sql::Table;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed CSV: {0}")]
pub struct MalformedCsv(pub String);

impl MalformedCsv {
    pub fn code(&self) -> &'static str {
        "MalformedCsv"
    }
}

/// Comma separated, double-quote quoting, first record is the header.
pub fn ingest_csv(bytes: &[u8]) -> Result<Table, MalformedCsv> {
    let text = std::str::from_utf8(bytes).map_err(|e| MalformedCsv(format!("not UTF-8: {e}")))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(|e| MalformedCsv(e.to_string()))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| MalformedCsv(e.to_string()))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Table::from_records(header, rows).map_err(|e| MalformedCsv(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use caremesh_core::sql::{ColumnKind, Value, SESSION_TABLE};

    #[test]
    fn numeric_columns() {
        let t = ingest_csv(b"age,bmi\n70,25\n80,26\n").unwrap();
        assert_eq!(t.name(), SESSION_TABLE);
        assert_eq!(t.row_count(), 2);
        assert!(t.columns().iter().all(|c| c.kind == ColumnKind::Number));
    }

    #[test]
    fn inference_and_nulls() {
        let t = ingest_csv(b"v\r\n70\r\n\"\"\r\nx\r\n").unwrap();
        assert_eq!(t.columns()[0].kind, ColumnKind::Text);
        assert_eq!(t.columns()[0].values[1], Value::Null);
    }

    #[test]
    fn quoting() {
        let t = ingest_csv(b"name,note\n\"Smith, J\",\"said \"\"hi\"\"\"\n").unwrap();
        assert_eq!(t.columns()[0].values[0], Value::Text("Smith, J".into()));
        assert_eq!(t.columns()[1].values[0], Value::Text("said \"hi\"".into()));
    }

    #[test]
    fn malformed() {
        assert!(ingest_csv(b"a,b\n1\n").is_err());
        assert!(ingest_csv(b"").is_err());
        assert!(ingest_csv(b"a,b\n\xff,1\n").is_err());
        assert!(ingest_csv(b",\n1,2\n").is_err());
    }

    #[test]
    fn header_only_is_an_empty_table() {
        let t = ingest_csv(b"age\n").unwrap();
        assert_eq!(t.row_count(), 0);
    }
}
