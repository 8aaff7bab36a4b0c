//! A read-only SQL subset over a single in-memory columnar table.
//!
//! Grammar (keywords case-insensitive, one statement, optional trailing `;`):
//!
//! ```text
//! query    := SELECT items FROM ident [WHERE expr] [GROUP BY ident {, ident}]
//!             [ORDER BY ident [ASC|DESC]] [LIMIT integer]
//! items    := '*' | item {, item}
//! item     := (column | literal | agg) [AS ident]
//! agg      := (AVG|SUM|MIN|MAX) '(' column ')' | COUNT '(' ('*' | column) ')'
//! expr     := disj ; disj := conj {OR conj} ; conj := neg {AND neg}
//! neg      := NOT neg | '(' expr ')' | operand cmp operand
//! cmp      := = | <> | != | < | <= | > | >=
//! ```
//!
//! Comparisons involving NULL are false (two-valued logic); aggregates skip nulls.

mod ast;
mod eval;
mod lexer;
pub(crate) mod parser;
mod table;
mod value;

pub use ast::{AggArg, AggFunc, CmpOp, Expr, Literal, Operand, OrderBy, Query, SelectExpr, SelectItem, SelectList};
pub use eval::{execute, BuiltinEvaluator, ExecError, QueryBackend, ResultSet};
pub use parser::{parse_sql, ParseError};
pub use table::{Column, ColumnKind, Table, TableError, SESSION_TABLE};
pub use value::Value;
