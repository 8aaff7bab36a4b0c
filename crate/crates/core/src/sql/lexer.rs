use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::parser::ParseError;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    /// Bare word; keywords are recognised by the parser.
    Word(String),
    /// `"quoted identifier"`, never a keyword.
    Quoted(String),
    Number(f64),
    Str(String),
    Sym(&'static str),
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Word(w) => w.clone(),
            Tok::Quoted(w) => alloc::format!("\"{w}\""),
            Tok::Number(n) => alloc::format!("{n}"),
            Tok::Str(s) => alloc::format!("'{s}'"),
            Tok::Sym(s) => s.to_string(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: usize,
}

const SYMBOLS: [&str; 16] = ["<>", "!=", "<=", ">=", "||", "=", "<", ">", "(", ")", ",", ";", "*", "+", "-", "/"];

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'-' && b.get(i + 1) == Some(&b'-') {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && b.get(i + 1) == Some(&b'*') {
            let start = i;
            i += 2;
            loop {
                if i + 1 >= b.len() {
                    return Err(ParseError::syntax(start, "end of block comment `*/`", "end of input"));
                }
                if b[i] == b'*' && b[i + 1] == b'/' {
                    i += 2;
                    break;
                }
                i += 1;
            }
            continue;
        }
        let pos = i;
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Word(src[pos..i].to_string()), pos });
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && b.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let save = i;
                i += 1;
                if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
                    i += 1;
                }
                if i < b.len() && b[i].is_ascii_digit() {
                    while i < b.len() && b[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let text = &src[pos..i];
            let n = text.parse::<f64>().map_err(|_| ParseError::syntax(pos, "number", text))?;
            out.push(Token { tok: Tok::Number(n), pos });
            continue;
        }
        if c == b'\'' || c == b'"' {
            let quote = c;
            i += 1;
            let mut s = String::new();
            let mut seg = i;
            loop {
                if i >= b.len() {
                    let what = if quote == b'\'' { "closing quote `'`" } else { "closing quote `\"`" };
                    return Err(ParseError::syntax(pos, what, "end of input"));
                }
                if b[i] == quote {
                    s.push_str(&src[seg..i]);
                    if b.get(i + 1) == Some(&quote) {
                        s.push(quote as char);
                        i += 2;
                        seg = i;
                        continue;
                    }
                    i += 1;
                    break;
                }
                i += 1;
            }
            let tok = if quote == b'\'' { Tok::Str(s) } else { Tok::Quoted(s) };
            out.push(Token { tok, pos });
            continue;
        }
        if let Some(sym) = SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            i += sym.len();
            out.push(Token { tok: Tok::Sym(sym), pos });
            continue;
        }
        let ch = src[i..].chars().next().unwrap_or('?');
        return Err(ParseError::syntax(pos, "token", &ch.to_string()));
    }
    out.push(Token { tok: Tok::Eof, pos: src.len() });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn basic() {
        assert_eq!(
            toks("SELECT a,b FROM t WHERE x>=2.5;"),
            [
                Tok::Word("SELECT".into()),
                Tok::Word("a".into()),
                Tok::Sym(","),
                Tok::Word("b".into()),
                Tok::Word("FROM".into()),
                Tok::Word("t".into()),
                Tok::Word("WHERE".into()),
                Tok::Word("x".into()),
                Tok::Sym(">="),
                Tok::Number(2.5),
                Tok::Sym(";"),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn strings_and_comments() {
        assert_eq!(toks("'it''s' -- trailing\n/* block */ \"Age\""), [Tok::Str("it's".into()), Tok::Quoted("Age".into()), Tok::Eof]);
    }

    #[test]
    fn unterminated() {
        assert!(tokenize("'abc").is_err());
        assert!(tokenize("/* abc").is_err());
    }

    #[test]
    fn exponent_and_positions() {
        let t = tokenize("1e3 x").unwrap();
        assert_eq!(t[0].tok, Tok::Number(1000.0));
        assert_eq!(t[1].pos, 4);
        assert_eq!(t[2].pos, 5);
    }
}
