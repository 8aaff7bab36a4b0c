//! Document ingestion, chunking, exact cosine retrieval and grounded answering.

mod chunk;
mod index;
mod store;

pub use chunk::{chunk, chunk_with, ChunkParams, ChunkSpan, DEFAULT_CHUNK_OVERLAP, DEFAULT_CHUNK_SIZE};
pub use index::{IndexEntry, ScoredEntry, VectorIndex};
pub use store::{answer, Citation, DocumentChunk, GroundedAnswer, KnowledgeBase, ReportDocument, DEFAULT_TOP_K};

use alloc::string::String;

use thiserror::Error;

use crate::provider::ProviderError;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum RagError {
    #[error("unsupported media type `{0}`")]
    UnsupportedMediaType(String),
    #[error("text extraction failed: {0}")]
    ExtractionFailure(String),
    #[error("invalid chunk parameters: {0}")]
    InvalidChunkParams(String),
    #[error("index is empty")]
    EmptyIndex,
    #[error("vector dimension {found} does not match index dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown document `{0}`")]
    UnknownDocument(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

impl RagError {
    pub fn code(&self) -> &'static str {
        match self {
            RagError::UnsupportedMediaType(_) => "UnsupportedMediaType",
            RagError::ExtractionFailure(_) => "ExtractionFailure",
            RagError::InvalidChunkParams(_) => "InvalidChunkParams",
            RagError::EmptyIndex => "EmptyIndex",
            RagError::DimensionMismatch { .. } => "DimensionMismatch",
            RagError::UnknownDocument(_) => "UnknownDocument",
            RagError::Provider(e) => e.code(),
        }
    }
}

/// Pulls text out of a PDF. The std crate supplies the implementation.
pub trait PdfExtractor {
    fn extract(&self, bytes: &[u8]) -> Result<String, RagError>;
}

/// Text of an uploaded document. Plain text passes through byte for byte;
/// PDF goes through `pdf`.
pub fn extract_text(document: &[u8], media_type: &str, pdf: &dyn PdfExtractor) -> Result<String, RagError> {
    let essence = media_type.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    match essence.as_str() {
        "text/plain" => core::str::from_utf8(document)
            .map(String::from)
            .map_err(|e| RagError::ExtractionFailure(alloc::format!("text is not UTF-8: {e}"))),
        "application/pdf" => pdf.extract(document),
        _ => Err(RagError::UnsupportedMediaType(media_type.into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct NoPdf;
    impl PdfExtractor for NoPdf {
        fn extract(&self, _: &[u8]) -> Result<String, RagError> {
            Ok("from-pdf".into())
        }
    }

    #[test]
    fn passthrough_and_dispatch() {
        assert_eq!(extract_text(b"abc", "text/plain", &NoPdf).unwrap(), "abc");
        assert_eq!(extract_text(b"abc", "text/plain; charset=utf-8", &NoPdf).unwrap(), "abc");
        assert_eq!(extract_text(b"%PDF", "application/pdf", &NoPdf).unwrap(), "from-pdf");
        assert_eq!(extract_text(b"x", "image/png", &NoPdf), Err(RagError::UnsupportedMediaType("image/png".into())));
        assert_eq!(extract_text(&[0xff, 0xfe], "text/plain", &NoPdf).unwrap_err().code(), "ExtractionFailure");
    }
}
