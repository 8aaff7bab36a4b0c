use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{default_header, AggArg, AggFunc, CmpOp, Expr, Literal, Operand, Query, SelectExpr, SelectList};
use super::table::{ColumnKind, Table};
use super::value::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
}

impl ExecError {
    pub fn code(&self) -> &'static str {
        match self {
            ExecError::UnknownTable(_) => "UnknownTable",
            ExecError::UnknownColumn(_) => "UnknownColumn",
            ExecError::TypeMismatch(_) => "TypeMismatch",
        }
    }
}

/// Something that can run a parsed query against a table. The built-in
/// evaluator is the reference; other engines plug in behind this trait.
pub trait QueryBackend {
    fn execute(&self, query: &Query, table: &Table) -> Result<ResultSet, ExecError>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BuiltinEvaluator;

impl QueryBackend for BuiltinEvaluator {
    fn execute(&self, query: &Query, table: &Table) -> Result<ResultSet, ExecError> {
        execute(query, table)
    }
}

enum Slot {
    Col(usize),
    Lit(Value),
}

enum Pred {
    Cmp(Slot, CmpOp, Slot),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
    Not(Box<Pred>),
}

enum Item {
    Col(usize),
    Lit(Value),
    Agg(AggFunc, Option<usize>),
}

struct Key(Vec<Value>);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.sort_cmp(b) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

fn literal_value(l: &Literal) -> Value {
    match l {
        Literal::Number(n) => Value::Number(*n),
        Literal::Text(s) => Value::Text(s.clone()),
    }
}

fn kind_name(k: ColumnKind) -> &'static str {
    match k {
        ColumnKind::Number => "number",
        ColumnKind::Text => "text",
    }
}

struct Compiler<'t> {
    table: &'t Table,
}

impl Compiler<'_> {
    fn column(&self, name: &str) -> Result<usize, ExecError> {
        self.table.column_index(name).ok_or_else(|| ExecError::UnknownColumn(name.to_string()))
    }

    fn slot(&self, o: &Operand) -> Result<(Slot, ColumnKind), ExecError> {
        Ok(match o {
            Operand::Column(c) => {
                let i = self.column(c)?;
                (Slot::Col(i), self.table.columns()[i].kind)
            }
            Operand::Literal(l @ Literal::Number(_)) => (Slot::Lit(literal_value(l)), ColumnKind::Number),
            Operand::Literal(l @ Literal::Text(_)) => (Slot::Lit(literal_value(l)), ColumnKind::Text),
        })
    }

    fn pred(&self, e: &Expr) -> Result<Pred, ExecError> {
        Ok(match e {
            Expr::Compare { left, op, right } => {
                let (l, lk) = self.slot(left)?;
                let (r, rk) = self.slot(right)?;
                if lk != rk {
                    return Err(ExecError::TypeMismatch(format!(
                        "cannot compare {} `{left}` with {} `{right}`",
                        kind_name(lk),
                        kind_name(rk)
                    )));
                }
                Pred::Cmp(l, *op, r)
            }
            Expr::And(a, b) => Pred::And(Box::new(self.pred(a)?), Box::new(self.pred(b)?)),
            Expr::Or(a, b) => Pred::Or(Box::new(self.pred(a)?), Box::new(self.pred(b)?)),
            Expr::Not(a) => Pred::Not(Box::new(self.pred(a)?)),
        })
    }
}

fn slot_value<'a>(s: &'a Slot, table: &'a Table, row: usize) -> &'a Value {
    match s {
        Slot::Col(c) => table.value(*c, row),
        Slot::Lit(v) => v,
    }
}

fn test(p: &Pred, table: &Table, row: usize) -> bool {
    match p {
        Pred::Cmp(l, op, r) => {
            let (a, b) = (slot_value(l, table, row), slot_value(r, table, row));
            let ord = match (a, b) {
                (Value::Number(x), Value::Number(y)) => x.partial_cmp(y),
                (Value::Text(x), Value::Text(y)) => Some(x.cmp(y)),
                _ => None,
            };
            match ord {
                None => false,
                Some(o) => match op {
                    CmpOp::Eq => o == Ordering::Equal,
                    CmpOp::Ne => o != Ordering::Equal,
                    CmpOp::Lt => o == Ordering::Less,
                    CmpOp::Le => o != Ordering::Greater,
                    CmpOp::Gt => o == Ordering::Greater,
                    CmpOp::Ge => o != Ordering::Less,
                },
            }
        }
        Pred::And(a, b) => test(a, table, row) && test(b, table, row),
        Pred::Or(a, b) => test(a, table, row) || test(b, table, row),
        Pred::Not(a) => !test(a, table, row),
    }
}

fn aggregate(func: AggFunc, col: Option<usize>, table: &Table, rows: &[usize]) -> Value {
    let Some(c) = col else {
        return Value::Number(rows.len() as f64);
    };
    let present = rows.iter().map(|&r| table.value(c, r)).filter(|v| !v.is_null());
    match func {
        AggFunc::Count => Value::Number(present.count() as f64),
        AggFunc::Sum | AggFunc::Avg => {
            let (mut sum, mut n) = (0f64, 0usize);
            for v in present {
                if let Value::Number(x) = v {
                    sum += x;
                    n += 1;
                }
            }
            match (n, func) {
                (0, _) => Value::Null,
                (_, AggFunc::Sum) => Value::Number(sum),
                _ => Value::Number(sum / n as f64),
            }
        }
        AggFunc::Min | AggFunc::Max => {
            let want = if func == AggFunc::Min { Ordering::Less } else { Ordering::Greater };
            let mut best: Option<&Value> = None;
            for v in present {
                if best.is_none_or(|b| v.sort_cmp(b) == want) {
                    best = Some(v);
                }
            }
            best.cloned().unwrap_or(Value::Null)
        }
    }
}

fn sort_rows(rows: &mut [Vec<Value>], key: usize, descending: bool) {
    rows.sort_by(|a, b| {
        let o = a[key].sort_cmp(&b[key]);
        if descending {
            o.reverse()
        } else {
            o
        }
    });
}

/// Evaluate `query` against `table`.
///
/// Order of operations: WHERE filter, grouping (first-appearance order),
/// aggregates, ORDER BY (stable; nulls first ascending, last descending), LIMIT.
/// The table is only read.
pub fn execute(query: &Query, table: &Table) -> Result<ResultSet, ExecError> {
    if !query.table.eq_ignore_ascii_case(table.name()) {
        return Err(ExecError::UnknownTable(query.table.clone()));
    }
    let cx = Compiler { table };
    let declared = |c: &str| cx.column(c).map(|i| table.columns()[i].name.clone()).unwrap_or_else(|_| c.to_string());

    let (items, headers): (Vec<Item>, Vec<String>) = match &query.select {
        SelectList::Wildcard => {
            ((0..table.columns().len()).map(Item::Col).collect(), table.columns().iter().map(|c| c.name.clone()).collect())
        }
        SelectList::Items(list) => {
            let mut items = Vec::with_capacity(list.len());
            let mut headers = Vec::with_capacity(list.len());
            for it in list {
                items.push(match &it.expr {
                    SelectExpr::Column(c) => Item::Col(cx.column(c)?),
                    SelectExpr::Literal(l) => Item::Lit(literal_value(l)),
                    SelectExpr::Aggregate { func, arg: AggArg::Star } => Item::Agg(*func, None),
                    SelectExpr::Aggregate { func, arg: AggArg::Column(c) } => {
                        let i = cx.column(c)?;
                        if matches!(func, AggFunc::Avg | AggFunc::Sum) && table.columns()[i].kind == ColumnKind::Text {
                            return Err(ExecError::TypeMismatch(format!(
                                "{}() needs a numeric column, `{}` is text",
                                func.name(),
                                table.columns()[i].name
                            )));
                        }
                        Item::Agg(*func, Some(i))
                    }
                });
                headers.push(it.alias.clone().unwrap_or_else(|| default_header(&it.expr, declared)));
            }
            (items, headers)
        }
    };
    let group_cols = query.group_by.iter().map(|g| cx.column(g)).collect::<Result<Vec<_>, _>>()?;
    let pred = query.filter.as_ref().map(|f| cx.pred(f)).transpose()?;

    let selected: Vec<usize> = (0..table.row_count()).filter(|&r| pred.as_ref().is_none_or(|p| test(p, table, r))).collect();

    let output_key = query.order_by.as_ref().map(|o| headers.iter().position(|h| h.eq_ignore_ascii_case(&o.key)));
    let grouped = !group_cols.is_empty() || query.has_aggregate();

    let mut rows: Vec<Vec<Value>>;
    if grouped {
        let groups: Vec<Vec<usize>> = if group_cols.is_empty() {
            alloc::vec![selected]
        } else {
            let mut index: BTreeMap<Key, usize> = BTreeMap::new();
            let mut groups: Vec<Vec<usize>> = Vec::new();
            for r in selected {
                let key = Key(group_cols.iter().map(|&c| table.value(c, r).clone()).collect());
                let g = *index.entry(key).or_insert_with(|| {
                    groups.push(Vec::new());
                    groups.len() - 1
                });
                groups[g].push(r);
            }
            groups
        };
        rows = groups
            .iter()
            .map(|g| {
                items
                    .iter()
                    .map(|it| match it {
                        Item::Col(c) => g.first().map(|&r| table.value(*c, r).clone()).unwrap_or(Value::Null),
                        Item::Lit(v) => v.clone(),
                        Item::Agg(f, c) => aggregate(*f, *c, table, g),
                    })
                    .collect()
            })
            .collect();
        if let Some(o) = &query.order_by {
            let key = output_key.flatten().ok_or_else(|| ExecError::UnknownColumn(o.key.clone()))?;
            sort_rows(&mut rows, key, o.descending);
        }
    } else {
        let mut order = selected;
        let mut post_key = None;
        if let Some(o) = &query.order_by {
            match output_key.flatten() {
                Some(k) => post_key = Some(k),
                None => {
                    let c = cx.column(&o.key)?;
                    order.sort_by(|&a, &b| {
                        let x = table.value(c, a).sort_cmp(table.value(c, b));
                        if o.descending {
                            x.reverse()
                        } else {
                            x
                        }
                    });
                }
            }
        }
        rows = order
            .iter()
            .map(|&r| {
                items
                    .iter()
                    .map(|it| match it {
                        Item::Col(c) => table.value(*c, r).clone(),
                        Item::Lit(v) => v.clone(),
                        Item::Agg(..) => unreachable!("aggregate in ungrouped query"),
                    })
                    .collect()
            })
            .collect();
        if let (Some(k), Some(o)) = (post_key, &query.order_by) {
            sort_rows(&mut rows, k, o.descending);
        }
    }
    if let Some(l) = query.limit {
        rows.truncate(l as usize);
    }
    Ok(ResultSet { columns: headers, rows })
}
