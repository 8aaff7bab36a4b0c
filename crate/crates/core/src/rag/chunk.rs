use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::RagError;

pub const DEFAULT_CHUNK_SIZE: usize = 1200;
pub const DEFAULT_CHUNK_OVERLAP: usize = 200;

/// A slice of a text. Offsets and lengths count Unicode scalar values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkSpan {
    pub chunk_id: u32,
    pub char_offset: usize,
    pub text: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChunkParams {
    pub size: usize,
    pub overlap: usize,
    /// End windows at the last blank line inside them, when there is one.
    pub paragraph_aware: bool,
}

impl Default for ChunkParams {
    fn default() -> Self {
        Self { size: DEFAULT_CHUNK_SIZE, overlap: DEFAULT_CHUNK_OVERLAP, paragraph_aware: true }
    }
}

/// Fixed-stride chunking: chunk starts are `k * (size - overlap)` for every
/// `k` with a start inside the text, each chunk at most `size` chars.
pub fn chunk(text: &str, size: usize, overlap: usize) -> Result<Vec<ChunkSpan>, RagError> {
    chunk_with(text, ChunkParams { size, overlap, paragraph_aware: false })
}

pub fn chunk_with(text: &str, params: ChunkParams) -> Result<Vec<ChunkSpan>, RagError> {
    let ChunkParams { size, overlap, paragraph_aware } = params;
    if size == 0 || overlap >= size {
        return Err(RagError::InvalidChunkParams(format!("need 0 <= overlap < size, got size {size}, overlap {overlap}")));
    }
    let chars: Vec<char> = text.chars().collect();
    let len = chars.len();
    let stride = size - overlap;
    let mut out = Vec::new();
    let mut start = 0usize;
    while start < len {
        let mut end = (start + size).min(len);
        if paragraph_aware && end < len {
            // Latest blank-line break that still leaves the next start ahead of this one.
            let min_end = start + overlap + 1;
            if let Some(b) = (min_end.max(start + 2)..=end).rev().find(|&p| chars[p - 1] == '\n' && chars[p - 2] == '\n') {
                end = b;
            }
        }
        out.push(ChunkSpan { chunk_id: out.len() as u32, char_offset: start, text: chars[start..end].iter().collect() });
        if paragraph_aware {
            if end == len {
                break;
            }
            start = end - overlap;
        } else {
            start += stride;
        }
    }
    Ok(out)
}
