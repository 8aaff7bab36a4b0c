use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AggFunc {
    Avg,
    Sum,
    Count,
    Min,
    Max,
}

impl AggFunc {
    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Avg => "AVG",
            AggFunc::Sum => "SUM",
            AggFunc::Count => "COUNT",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
        }
    }

    pub fn from_name(word: &str) -> Option<Self> {
        [AggFunc::Avg, AggFunc::Sum, AggFunc::Count, AggFunc::Min, AggFunc::Max].into_iter().find(|f| f.name().eq_ignore_ascii_case(word))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggArg {
    Star,
    Column(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Literal {
    Number(f64),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectExpr {
    Column(String),
    Literal(Literal),
    Aggregate { func: AggFunc, arg: AggArg },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectItem {
    pub expr: SelectExpr,
    pub alias: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectList {
    Wildcard,
    Items(Vec<SelectItem>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "<>")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    Column(String),
    Literal(Literal),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Compare { left: Operand, op: CmpOp, right: Operand },
    And(alloc::boxed::Box<Expr>, alloc::boxed::Box<Expr>),
    Or(alloc::boxed::Box<Expr>, alloc::boxed::Box<Expr>),
    Not(alloc::boxed::Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderBy {
    pub key: String,
    pub descending: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub select: SelectList,
    pub table: String,
    pub filter: Option<Expr>,
    pub group_by: Vec<String>,
    pub order_by: Option<OrderBy>,
    pub limit: Option<u64>,
}

impl Query {
    pub fn has_aggregate(&self) -> bool {
        match &self.select {
            SelectList::Wildcard => false,
            SelectList::Items(items) => items.iter().any(|i| matches!(i.expr, SelectExpr::Aggregate { .. })),
        }
    }
}

pub(crate) const RESERVED: [&str; 22] = [
    "SELECT", "FROM", "WHERE", "GROUP", "BY", "ORDER", "LIMIT", "AS", "AND", "OR", "NOT", "ASC", "DESC", "AVG", "SUM", "COUNT", "MIN",
    "MAX", "JOIN", "HAVING", "UNION", "NULL",
];

struct Ident<'a>(&'a str);

impl fmt::Display for Ident<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.0;
        let simple = s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            && !RESERVED.iter().any(|k| k.eq_ignore_ascii_case(s));
        if simple {
            f.write_str(s)
        } else {
            f.write_str("\"")?;
            for c in s.chars() {
                if c == '"' {
                    f.write_str("\"\"")?;
                } else {
                    write!(f, "{c}")?;
                }
            }
            f.write_str("\"")
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(n) => write!(f, "{n}"),
            Literal::Text(s) => {
                f.write_str("'")?;
                for c in s.chars() {
                    if c == '\'' {
                        f.write_str("''")?;
                    } else {
                        write!(f, "{c}")?;
                    }
                }
                f.write_str("'")
            }
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Column(c) => write!(f, "{}", Ident(c)),
            Operand::Literal(l) => write!(f, "{l}"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
            match e {
                Expr::Compare { .. } => write!(f, "{e}"),
                _ => write!(f, "({e})"),
            }
        }
        match self {
            Expr::Compare { left, op, right } => write!(f, "{left} {} {right}", op.symbol()),
            Expr::And(a, b) => {
                child(f, a)?;
                f.write_str(" AND ")?;
                child(f, b)
            }
            Expr::Or(a, b) => {
                child(f, a)?;
                f.write_str(" OR ")?;
                child(f, b)
            }
            Expr::Not(e) => {
                f.write_str("NOT ")?;
                child(f, e)
            }
        }
    }
}

impl fmt::Display for SelectExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectExpr::Column(c) => write!(f, "{}", Ident(c)),
            SelectExpr::Literal(l) => write!(f, "{l}"),
            SelectExpr::Aggregate { func, arg: AggArg::Star } => write!(f, "{}(*)", func.name()),
            SelectExpr::Aggregate { func, arg: AggArg::Column(c) } => write!(f, "{}({})", func.name(), Ident(c)),
        }
    }
}

/// Canonical SQL text. `parse_sql(&q.to_string())` reproduces `q`.
impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        match &self.select {
            SelectList::Wildcard => f.write_str("*")?,
            SelectList::Items(items) => {
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}", item.expr)?;
                    if let Some(a) = &item.alias {
                        write!(f, " AS {}", Ident(a))?;
                    }
                }
            }
        }
        write!(f, " FROM {}", Ident(&self.table))?;
        if let Some(w) = &self.filter {
            write!(f, " WHERE {w}")?;
        }
        if !self.group_by.is_empty() {
            f.write_str(" GROUP BY ")?;
            for (i, g) in self.group_by.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{}", Ident(g))?;
            }
        }
        if let Some(o) = &self.order_by {
            write!(f, " ORDER BY {} {}", Ident(&o.key), if o.descending { "DESC" } else { "ASC" })?;
        }
        if let Some(l) = self.limit {
            write!(f, " LIMIT {l}")?;
        }
        Ok(())
    }
}

/// Header text of a select item: alias if given, else its SQL text with column
/// names as declared by `resolve`.
pub(crate) fn default_header(expr: &SelectExpr, declared: impl Fn(&str) -> String) -> String {
    match expr {
        SelectExpr::Column(c) => declared(c),
        SelectExpr::Literal(l) => alloc::format!("{l}"),
        SelectExpr::Aggregate { func, arg: AggArg::Star } => alloc::format!("{}(*)", func.name()),
        SelectExpr::Aggregate { func, arg: AggArg::Column(c) } => alloc::format!("{}({})", func.name(), declared(c)),
    }
}
