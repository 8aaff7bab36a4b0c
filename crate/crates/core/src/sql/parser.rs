use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use super::ast::{AggArg, AggFunc, CmpOp, Expr, Literal, Operand, OrderBy, Query, SelectExpr, SelectItem, SelectList};
use super::lexer::{tokenize, Tok, Token};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at position {position}: expected {expected}, found {found}")]
    SyntaxError { position: usize, expected: String, found: String },
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
}

impl ParseError {
    pub(crate) fn syntax(position: usize, expected: &str, found: &str) -> Self {
        ParseError::SyntaxError { position, expected: expected.into(), found: found.into() }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ParseError::SyntaxError { .. } => "SyntaxError",
            ParseError::UnsupportedFeature(_) => "UnsupportedFeature",
        }
    }
}

/// Statement keywords that would write, configure or escape the sandbox.
pub(crate) const FORBIDDEN_STATEMENTS: [&str; 27] = [
    "DROP", "DELETE", "INSERT", "UPDATE", "CREATE", "ALTER", "TRUNCATE", "REPLACE", "MERGE", "UPSERT", "GRANT", "REVOKE", "ATTACH",
    "DETACH", "COPY", "PRAGMA", "EXPORT", "IMPORT", "INSTALL", "LOAD", "CALL", "EXEC", "EXECUTE", "SET", "VACUUM", "WITH", "BEGIN",
];

const JOIN_WORDS: [&str; 7] = ["JOIN", "INNER", "LEFT", "RIGHT", "FULL", "CROSS", "NATURAL"];

struct Parser {
    toks: Vec<Token>,
    at: usize,
}

/// Parse exactly one read-only SELECT statement.
pub fn parse_sql(text: &str) -> Result<Query, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, at: 0 };
    let q = p.query()?;
    validate(&q)?;
    Ok(q)
}

fn is_kw(tok: &Tok, kw: &str) -> bool {
    matches!(tok, Tok::Word(w) if w.eq_ignore_ascii_case(kw))
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.at]
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.at + offset).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err(&self, expected: &str) -> ParseError {
        let t = self.peek();
        ParseError::syntax(t.pos, expected, &t.tok.describe())
    }

    fn at_kw(&self, kw: &str) -> bool {
        is_kw(&self.peek().tok, kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.err(kw))
        }
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek().tok, Tok::Sym(x) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.at_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.err(&format!("`{s}`")))
        }
    }

    /// Raise `UnsupportedFeature` for constructs outside the subset, wherever they appear.
    fn gate(&self) -> Result<(), ParseError> {
        let tok = &self.peek().tok;
        for w in ["HAVING", "UNION", "INTERSECT", "EXCEPT", "DISTINCT", "INTO", "OVER", "OFFSET"] {
            if is_kw(tok, w) {
                return Err(ParseError::UnsupportedFeature(w.into()));
            }
        }
        if JOIN_WORDS.iter().any(|w| is_kw(tok, w)) {
            return Err(ParseError::UnsupportedFeature("JOIN".into()));
        }
        if matches!(tok, Tok::Sym("(")) && is_kw(self.peek_at(1), "SELECT") {
            return Err(ParseError::UnsupportedFeature("subquery".into()));
        }
        Ok(())
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        self.gate()?;
        match &self.peek().tok {
            Tok::Word(w) if !is_reserved(w) => {
                let w = w.clone();
                self.bump();
                Ok(w)
            }
            Tok::Quoted(w) => {
                let w = w.clone();
                self.bump();
                Ok(w)
            }
            _ => Err(self.err(what)),
        }
    }

    fn query(&mut self) -> Result<Query, ParseError> {
        if let Tok::Word(w) = &self.peek().tok {
            if let Some(kw) = FORBIDDEN_STATEMENTS.iter().find(|k| k.eq_ignore_ascii_case(w)) {
                return Err(ParseError::UnsupportedFeature((*kw).to_string()));
            }
        }
        self.expect_kw("SELECT")?;
        self.gate()?;
        let select = if self.eat_sym("*") {
            SelectList::Wildcard
        } else {
            let mut items = Vec::new();
            loop {
                items.push(self.select_item()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
            SelectList::Items(items)
        };
        self.gate()?;
        self.expect_kw("FROM")?;
        let table = self.ident("table name")?;
        self.gate()?;
        if self.at_sym(",") {
            return Err(ParseError::UnsupportedFeature("JOIN".into()));
        }
        let filter = if self.eat_kw("WHERE") { Some(self.disjunction()?) } else { None };
        self.gate()?;
        let mut group_by = Vec::new();
        if self.eat_kw("GROUP") {
            self.expect_kw("BY")?;
            loop {
                group_by.push(self.ident("column name")?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.gate()?;
        let order_by = if self.eat_kw("ORDER") {
            self.expect_kw("BY")?;
            let key = self.ident("column name")?;
            let descending = if self.eat_kw("DESC") {
                true
            } else {
                self.eat_kw("ASC");
                false
            };
            if self.at_sym(",") {
                return Err(ParseError::UnsupportedFeature("multi-key ORDER BY".into()));
            }
            Some(OrderBy { key, descending })
        } else {
            None
        };
        self.gate()?;
        let limit = if self.eat_kw("LIMIT") {
            let t = self.peek().clone();
            match t.tok {
                Tok::Number(n) if n >= 1.0 && n <= u32::MAX as f64 && (n as u64) as f64 == n => {
                    self.bump();
                    Some(n as u64)
                }
                _ => return Err(self.err("positive integer")),
            }
        } else {
            None
        };
        self.gate()?;
        if self.eat_sym(";") {
            if self.peek().tok != Tok::Eof {
                return Err(ParseError::UnsupportedFeature("multiple statements".into()));
            }
        } else if self.peek().tok != Tok::Eof {
            return Err(self.err("end of input"));
        }
        Ok(Query { select, table, filter, group_by, order_by, limit })
    }

    fn select_item(&mut self) -> Result<SelectItem, ParseError> {
        self.gate()?;
        let expr = match (&self.peek().tok, self.peek_at(1)) {
            (Tok::Word(w), Tok::Sym("(")) => {
                let Some(func) = AggFunc::from_name(w) else {
                    return Err(ParseError::UnsupportedFeature(format!("function {}", w.to_ascii_uppercase())));
                };
                self.bump();
                self.bump();
                self.gate()?;
                let arg = if self.at_sym("*") {
                    if func != AggFunc::Count {
                        return Err(self.err("column name"));
                    }
                    self.bump();
                    AggArg::Star
                } else {
                    AggArg::Column(self.ident("column name")?)
                };
                self.expect_sym(")")?;
                SelectExpr::Aggregate { func, arg }
            }
            _ => match self.operand()? {
                Operand::Column(c) => SelectExpr::Column(c),
                Operand::Literal(l) => SelectExpr::Literal(l),
            },
        };
        let alias = if self.eat_kw("AS") { Some(self.ident("alias")?) } else { None };
        Ok(SelectItem { expr, alias })
    }

    fn operand(&mut self) -> Result<Operand, ParseError> {
        self.gate()?;
        let t = self.peek().clone();
        match t.tok {
            Tok::Number(n) => {
                self.bump();
                Ok(Operand::Literal(Literal::Number(n)))
            }
            Tok::Sym("-") => match self.peek_at(1).clone() {
                Tok::Number(n) => {
                    self.bump();
                    self.bump();
                    Ok(Operand::Literal(Literal::Number(-n)))
                }
                _ => Err(self.err("column or literal")),
            },
            Tok::Str(s) => {
                self.bump();
                Ok(Operand::Literal(Literal::Text(s)))
            }
            Tok::Word(w) if w.eq_ignore_ascii_case("NULL") => Err(ParseError::UnsupportedFeature("NULL literal".into())),
            Tok::Word(w) if AggFunc::from_name(&w).is_some() && matches!(self.peek_at(1), Tok::Sym("(")) => {
                Err(ParseError::syntax(t.pos, "column or literal", &w))
            }
            _ => Ok(Operand::Column(self.ident("column or literal")?)),
        }
    }

    fn disjunction(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.conjunction()?;
        while self.eat_kw("OR") {
            let r = self.conjunction()?;
            e = Expr::Or(Box::new(e), Box::new(r));
        }
        Ok(e)
    }

    fn conjunction(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.negation()?;
        while self.eat_kw("AND") {
            let r = self.negation()?;
            e = Expr::And(Box::new(e), Box::new(r));
        }
        Ok(e)
    }

    fn negation(&mut self) -> Result<Expr, ParseError> {
        self.gate()?;
        if self.eat_kw("NOT") {
            return Ok(Expr::Not(Box::new(self.negation()?)));
        }
        if self.eat_sym("(") {
            let e = self.disjunction()?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        let left = self.operand()?;
        if let Some(w) = ["IS", "IN", "LIKE", "BETWEEN"].iter().find(|w| self.at_kw(w)) {
            return Err(ParseError::UnsupportedFeature((*w).into()));
        }
        let op = match self.peek().tok {
            Tok::Sym("=") => CmpOp::Eq,
            Tok::Sym("<>") | Tok::Sym("!=") => CmpOp::Ne,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            _ => return Err(self.err("comparison operator")),
        };
        self.bump();
        let right = self.operand()?;
        Ok(Expr::Compare { left, op, right })
    }
}

fn is_reserved(w: &str) -> bool {
    super::ast::RESERVED.iter().any(|k| k.eq_ignore_ascii_case(w))
        || FORBIDDEN_STATEMENTS.iter().any(|k| k.eq_ignore_ascii_case(w))
        || ["IS", "IN", "LIKE", "BETWEEN", "INTERSECT", "EXCEPT", "DISTINCT", "INTO", "OVER", "OFFSET", "ON"]
            .iter()
            .any(|k| k.eq_ignore_ascii_case(w))
}

/// Structural rules: bare columns mix with aggregates only under GROUP BY, and
/// every bare column of a grouped query must be a grouping column.
fn validate(q: &Query) -> Result<(), ParseError> {
    let items = match &q.select {
        SelectList::Wildcard => {
            if !q.group_by.is_empty() {
                return Err(ParseError::syntax(0, "explicit select list with GROUP BY", "*"));
            }
            return Ok(());
        }
        SelectList::Items(items) => items,
    };
    let bare: Vec<&String> = items
        .iter()
        .filter_map(|i| match &i.expr {
            SelectExpr::Column(c) => Some(c),
            _ => None,
        })
        .collect();
    if q.group_by.is_empty() {
        if q.has_aggregate() {
            if let Some(c) = bare.first() {
                return Err(ParseError::syntax(0, "GROUP BY for non-aggregate column", c));
            }
        }
    } else {
        for c in bare {
            if !q.group_by.iter().any(|g| g.eq_ignore_ascii_case(c)) {
                return Err(ParseError::syntax(0, "column listed in GROUP BY", c));
            }
        }
    }
    Ok(())
}
