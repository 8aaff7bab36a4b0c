//! Minimal PDF text extractor: walks content streams (raw or FlateDecode) and
//! collects the strings shown by text operators. No CMap or font decoding;
//! single-byte strings are read as Latin-1, and hex strings with a zero high
//! byte pattern as UTF-16BE.

use std::io::Read;

use caremesh_core::rag::{PdfExtractor, RagError};
use flate2::read::ZlibDecoder;

#[derive(Clone, Copy, Debug, Default)]
pub struct BasicPdfExtractor;

fn failure(msg: &str) -> RagError {
    RagError::ExtractionFailure(msg.into())
}

impl PdfExtractor for BasicPdfExtractor {
    fn extract(&self, bytes: &[u8]) -> Result<String, RagError> {
        let head = &bytes[..bytes.len().min(1024)];
        if find(head, b"%PDF-", 0).is_none() {
            return Err(failure("not a PDF file"));
        }
        if find(bytes, b"/Encrypt", 0).is_some() {
            return Err(failure("encrypted PDF"));
        }
        let mut out = String::new();
        for (dict, data) in streams(bytes) {
            let Some(content) = decode_stream(dict, data) else { continue };
            if find(&content, b"BT", 0).is_none() {
                continue;
            }
            let text = content_text(&content);
            if !text.trim().is_empty() {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(text.trim());
            }
        }
        if out.trim().is_empty() {
            return Err(failure("no extractable text"));
        }
        Ok(out)
    }
}

fn find(hay: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    if from >= hay.len() {
        return None;
    }
    hay[from..].windows(needle.len()).position(|w| w == needle).map(|i| i + from)
}

fn rfind(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).rposition(|w| w == needle)
}

/// `(dictionary, raw data)` for every stream object.
fn streams(pdf: &[u8]) -> Vec<(&[u8], &[u8])> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(at) = find(pdf, b"stream", pos) {
        pos = at + 6;
        if at >= 3 && &pdf[at - 3..at] == b"end" {
            continue;
        }
        let before = &pdf[..at];
        let trimmed_end = before.iter().rposition(|b| !b.is_ascii_whitespace()).map_or(0, |i| i + 1);
        if !before[..trimmed_end].ends_with(b">>") {
            continue;
        }
        let dict_start = rfind(&before[..trimmed_end], b"obj").map_or(0, |i| i + 3);
        let dict = &before[dict_start..trimmed_end];
        let mut data_start = at + 6;
        if pdf.get(data_start) == Some(&b'\r') {
            data_start += 1;
        }
        if pdf.get(data_start) == Some(&b'\n') {
            data_start += 1;
        }
        let Some(end) = find(pdf, b"endstream", data_start) else { break };
        let data = match direct_length(dict) {
            Some(n) if data_start + n <= end => &pdf[data_start..data_start + n],
            _ => {
                let mut e = end;
                while e > data_start && matches!(pdf[e - 1], b'\r' | b'\n') {
                    e -= 1;
                }
                &pdf[data_start..e]
            }
        };
        out.push((dict, data));
        pos = end + 9;
    }
    out
}

/// `/Length n` when it is a literal integer rather than a reference.
fn direct_length(dict: &[u8]) -> Option<usize> {
    let at = find(dict, b"/Length", 0)? + 7;
    if dict.get(at).is_some_and(|b| b.is_ascii_digit()) {
        return None;
    }
    let rest = std::str::from_utf8(&dict[at..]).ok()?;
    let mut words = rest.split(|c: char| c.is_ascii_whitespace() || c == '/' || c == '>').filter(|w| !w.is_empty());
    let n: usize = words.next()?.parse().ok()?;
    let next = words.next();
    let gen = words.next();
    if next.is_some_and(|w| w.parse::<u32>().is_ok()) && gen == Some("R") {
        return None;
    }
    Some(n)
}

fn decode_stream(dict: &[u8], data: &[u8]) -> Option<Vec<u8>> {
    let skip: [&[u8]; 5] = [b"/Image", b"/Length1", b"/XRef", b"/ObjStm", b"/Metadata"];
    if skip.iter().any(|s| find(dict, s, 0).is_some()) {
        return None;
    }
    let flate = find(dict, b"/FlateDecode", 0).is_some();
    if find(dict, b"/Filter", 0).is_some() && !flate {
        return None;
    }
    if !flate {
        return Some(data.to_vec());
    }
    let mut out = Vec::new();
    match ZlibDecoder::new(data).read_to_end(&mut out) {
        Ok(_) => Some(out),
        Err(_) if !out.is_empty() => Some(out),
        Err(_) => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Str(Vec<u8>),
    Arr(Vec<Tok>),
    Other,
}

struct Lexer<'a> {
    s: &'a [u8],
    i: usize,
}

fn is_delim(b: u8) -> bool {
    matches!(b, b'(' | b')' | b'<' | b'>' | b'[' | b']' | b'{' | b'}' | b'/' | b'%')
}

fn is_space(b: u8) -> bool {
    matches!(b, 0 | 9 | 10 | 12 | 13 | 32)
}

enum Item {
    Operand(Tok),
    Op(String),
    Open,
    Close,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.i).copied()
    }

    fn literal(&mut self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut depth = 1;
        while let Some(b) = self.peek() {
            self.i += 1;
            match b {
                b'(' => {
                    depth += 1;
                    out.push(b);
                }
                b')' => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                    out.push(b);
                }
                b'\\' => {
                    let Some(e) = self.peek() else { break };
                    self.i += 1;
                    match e {
                        b'n' => out.push(b'\n'),
                        b'r' => out.push(b'\r'),
                        b't' => out.push(b'\t'),
                        b'b' => out.push(8),
                        b'f' => out.push(12),
                        b'0'..=b'7' => {
                            let mut v = (e - b'0') as u32;
                            for _ in 0..2 {
                                match self.peek() {
                                    Some(d @ b'0'..=b'7') => {
                                        v = v * 8 + (d - b'0') as u32;
                                        self.i += 1;
                                    }
                                    _ => break,
                                }
                            }
                            out.push(v as u8);
                        }
                        b'\r' => {
                            if self.peek() == Some(b'\n') {
                                self.i += 1;
                            }
                        }
                        b'\n' => {}
                        other => out.push(other),
                    }
                }
                _ => out.push(b),
            }
        }
        out
    }

    fn hex(&mut self) -> Vec<u8> {
        let mut digits = Vec::new();
        while let Some(b) = self.peek() {
            self.i += 1;
            if b == b'>' {
                break;
            }
            if b.is_ascii_hexdigit() {
                digits.push(b);
            }
        }
        if digits.len() % 2 == 1 {
            digits.push(b'0');
        }
        digits.chunks(2).map(|p| u8::from_str_radix(std::str::from_utf8(p).unwrap_or("00"), 16).unwrap_or(0)).collect()
    }

    fn word(&mut self) -> &'a [u8] {
        let start = self.i;
        while let Some(b) = self.peek() {
            if is_space(b) || is_delim(b) {
                break;
            }
            self.i += 1;
        }
        &self.s[start..self.i]
    }

    /// Skips inline image data after `ID`.
    fn skip_inline_image(&mut self) {
        while self.i + 2 < self.s.len() {
            if is_space(self.s[self.i]) && &self.s[self.i + 1..self.i + 3] == b"EI" {
                self.i += 3;
                return;
            }
            self.i += 1;
        }
        self.i = self.s.len();
    }

    fn next(&mut self) -> Option<Item> {
        loop {
            let b = self.peek()?;
            if is_space(b) {
                self.i += 1;
                continue;
            }
            if b == b'%' {
                while self.peek().is_some_and(|c| c != b'\n' && c != b'\r') {
                    self.i += 1;
                }
                continue;
            }
            return Some(match b {
                b'(' => {
                    self.i += 1;
                    Item::Operand(Tok::Str(self.literal()))
                }
                b'<' if self.s.get(self.i + 1) == Some(&b'<') => {
                    self.i += 2;
                    Item::Operand(Tok::Other)
                }
                b'>' if self.s.get(self.i + 1) == Some(&b'>') => {
                    self.i += 2;
                    Item::Operand(Tok::Other)
                }
                b'<' => {
                    self.i += 1;
                    Item::Operand(Tok::Str(self.hex()))
                }
                b'[' => {
                    self.i += 1;
                    Item::Open
                }
                b']' => {
                    self.i += 1;
                    Item::Close
                }
                b'/' => {
                    self.i += 1;
                    self.word();
                    Item::Operand(Tok::Other)
                }
                b'{' | b'}' | b')' | b'>' => {
                    self.i += 1;
                    Item::Operand(Tok::Other)
                }
                _ => {
                    let w = self.word();
                    let w = std::str::from_utf8(w).unwrap_or("");
                    if let Ok(n) = w.parse::<f64>() {
                        Item::Operand(Tok::Num(n))
                    } else {
                        if w == "ID" {
                            self.skip_inline_image();
                        }
                        Item::Op(w.to_string())
                    }
                }
            });
        }
    }
}

fn decode_string(bytes: &[u8]) -> String {
    let utf16 = bytes.len() >= 2 && bytes.len().is_multiple_of(2) && bytes.chunks(2).all(|p| p[0] == 0);
    if utf16 || bytes.starts_with(&[0xfe, 0xff]) {
        let units: Vec<u16> = bytes
            .strip_prefix(&[0xfe, 0xff])
            .unwrap_or(bytes)
            .chunks(2)
            .map(|p| u16::from_be_bytes([p[0], *p.get(1).unwrap_or(&0)]))
            .collect();
        return String::from_utf16_lossy(&units);
    }
    bytes.iter().map(|&b| b as char).collect()
}

fn newline(out: &mut String) {
    if !out.is_empty() && !out.ends_with('\n') {
        out.push('\n');
    }
}

/// Text shown by the operators of one content stream, one line per text line.
fn content_text(content: &[u8]) -> String {
    let mut lx = Lexer { s: content, i: 0 };
    let mut out = String::new();
    let mut operands: Vec<Tok> = Vec::new();
    let mut arrays: Vec<Vec<Tok>> = Vec::new();
    while let Some(item) = lx.next() {
        match item {
            Item::Open => arrays.push(Vec::new()),
            Item::Close => {
                let arr = arrays.pop().unwrap_or_default();
                match arrays.last_mut() {
                    Some(outer) => outer.push(Tok::Arr(arr)),
                    None => operands.push(Tok::Arr(arr)),
                }
            }
            Item::Operand(t) => match arrays.last_mut() {
                Some(a) => a.push(t),
                None => operands.push(t),
            },
            Item::Op(op) => {
                match op.as_str() {
                    "Tj" => {
                        if let Some(Tok::Str(s)) = operands.last() {
                            out.push_str(&decode_string(s));
                        }
                    }
                    "'" | "\"" => {
                        newline(&mut out);
                        if let Some(Tok::Str(s)) = operands.last() {
                            out.push_str(&decode_string(s));
                        }
                    }
                    "TJ" => {
                        if let Some(Tok::Arr(parts)) = operands.last() {
                            for p in parts {
                                match p {
                                    Tok::Str(s) => out.push_str(&decode_string(s)),
                                    Tok::Num(n) if *n < -250.0 && !out.ends_with(' ') => out.push(' '),
                                    _ => {}
                                }
                            }
                        }
                    }
                    "T*" | "ET" => newline(&mut out),
                    "Td" | "TD" => {
                        if let [.., Tok::Num(_), Tok::Num(ty)] = operands.as_slice() {
                            if *ty != 0.0 {
                                newline(&mut out);
                            } else if !out.ends_with(['\n', ' ']) && !out.is_empty() {
                                out.push(' ');
                            }
                        }
                    }
                    "Tm" => newline(&mut out),
                    _ => {}
                }
                operands.clear();
                arrays.clear();
            }
        }
    }
    out.lines().map(|l| l.split_whitespace().collect::<Vec<_>>().join(" ")).filter(|l| !l.is_empty()).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operators() {
        let c = b"BT /F1 12 Tf 72 700 Td (Hello \\(world\\)) Tj 0 -14 Td [(Sun) -300 (down) 20 (ing)] TJ T* <00480069> Tj ET";
        assert_eq!(content_text(c), "Hello (world)\nSun downing\nHi");
    }

    #[test]
    fn octal_escape_and_quote_operator() {
        let c = b"BT (caf\\351) Tj (next) ' ET";
        assert_eq!(content_text(c), "caf\u{e9}\nnext");
    }

    #[test]
    fn not_a_pdf() {
        assert!(matches!(BasicPdfExtractor.extract(b"hello"), Err(RagError::ExtractionFailure(_))));
    }

    #[test]
    fn length_forms() {
        assert_eq!(direct_length(b"<< /Length 44 >>"), Some(44));
        assert_eq!(direct_length(b"<< /Length 5 0 R >>"), None);
        assert_eq!(direct_length(b"<< /Filter /FlateDecode /Length 12 /Foo 1 >>"), Some(12));
    }
}
