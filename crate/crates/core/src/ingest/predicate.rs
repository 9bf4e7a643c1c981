//! A small conjunctive predicate language:
//!
//! ```text
//! predicate := atom ( AND atom )*
//! atom      := column op literal
//! op        := = | != | < | <= | > | >=
//! literal   := integer | real | 'text'      ('' inside quotes is a quote)
//! column    := identifier | "quoted name"
//! ```
//!
//! `AND` is case-insensitive. Parsing is independent of any table; column
//! names and literal types are checked when the predicate is bound.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use super::table::{Column, ColumnType, TableData};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }

    fn holds(self, ord: Ordering) -> bool {
        match self {
            CompareOp::Eq => ord == Ordering::Equal,
            CompareOp::Ne => ord != Ordering::Equal,
            CompareOp::Lt => ord == Ordering::Less,
            CompareOp::Le => ord != Ordering::Greater,
            CompareOp::Gt => ord == Ordering::Greater,
            CompareOp::Ge => ord != Ordering::Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Literal {
    Integer(i64),
    Real(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atom {
    pub column: String,
    pub op: CompareOp,
    pub literal: Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Predicate {
    pub atoms: Vec<Atom>,
}

pub fn parse_predicate(text: &str) -> Result<Predicate> {
    let mut p = Parser { src: text, pos: 0 };
    let mut atoms = vec![p.atom()?];
    loop {
        p.skip_ws();
        if p.pos == text.len() {
            break;
        }
        let start = p.pos;
        let word = p.word();
        if word.eq_ignore_ascii_case("and") {
            atoms.push(p.atom()?);
        } else if word.eq_ignore_ascii_case("or") {
            return Err(syntax(start, "OR is not supported; only AND conjunctions"));
        } else {
            return Err(syntax(start, "expected AND or end of predicate"));
        }
    }
    Ok(Predicate { atoms })
}

fn syntax(offset: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        offset,
        message: message.into(),
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    /// Identifier-shaped run; empty when none.
    fn word(&mut self) -> &str {
        let start = self.pos;
        let len = self
            .rest()
            .char_indices()
            .find(|&(_, c)| !(c.is_alphanumeric() || c == '_' || c == '.'))
            .map_or(self.rest().len(), |(i, _)| i);
        self.pos += len;
        &self.src[start..self.pos]
    }

    fn atom(&mut self) -> Result<Atom> {
        self.skip_ws();
        let column = self.column()?;
        self.skip_ws();
        let op = self.op()?;
        self.skip_ws();
        let literal = self.literal()?;
        Ok(Atom {
            column,
            op,
            literal,
        })
    }

    fn column(&mut self) -> Result<String> {
        let start = self.pos;
        if self.rest().starts_with('"') {
            self.pos += 1;
            let close = self
                .rest()
                .find('"')
                .ok_or_else(|| syntax(start, "unterminated quoted column name"))?;
            let name = self.rest()[..close].to_string();
            self.pos += close + 1;
            return Ok(name);
        }
        let first = self.rest().chars().next();
        if !first.is_some_and(|c| c.is_alphabetic() || c == '_') {
            return Err(syntax(start, "expected a column name"));
        }
        let name = self.word().to_string();
        if name.eq_ignore_ascii_case("and") || name.eq_ignore_ascii_case("or") {
            return Err(syntax(start, "expected a column name"));
        }
        Ok(name)
    }

    fn op(&mut self) -> Result<CompareOp> {
        let start = self.pos;
        let rest = self.rest();
        let (op, len) = if rest.starts_with("!=") {
            (CompareOp::Ne, 2)
        } else if rest.starts_with("<=") {
            (CompareOp::Le, 2)
        } else if rest.starts_with(">=") {
            (CompareOp::Ge, 2)
        } else if rest.starts_with('=') {
            (CompareOp::Eq, 1)
        } else if rest.starts_with('<') {
            (CompareOp::Lt, 1)
        } else if rest.starts_with('>') {
            (CompareOp::Gt, 1)
        } else {
            return Err(syntax(start, "expected one of = != < <= > >="));
        };
        self.pos += len;
        Ok(op)
    }

    fn literal(&mut self) -> Result<Literal> {
        let start = self.pos;
        if self.rest().starts_with('\'') {
            self.pos += 1;
            let mut out = String::new();
            loop {
                let Some(i) = self.rest().find('\'') else {
                    return Err(syntax(start, "unterminated string literal"));
                };
                out.push_str(&self.rest()[..i]);
                self.pos += i + 1;
                if self.rest().starts_with('\'') {
                    out.push('\'');
                    self.pos += 1;
                } else {
                    return Ok(Literal::Text(out));
                }
            }
        }
        let len = self
            .rest()
            .char_indices()
            .find(|&(i, c)| {
                !(c.is_ascii_digit()
                    || c == '.'
                    || c == 'e'
                    || c == 'E'
                    || ((c == '-' || c == '+')
                        && (i == 0 || matches!(self.rest().as_bytes()[i - 1], b'e' | b'E'))))
            })
            .map_or(self.rest().len(), |(i, _)| i);
        let token = &self.rest()[..len];
        if token.is_empty() {
            return Err(syntax(start, "expected a number or a quoted string"));
        }
        let literal = if let Ok(v) = token.parse::<i64>() {
            Literal::Integer(v)
        } else if let Some(v) = token.parse::<f64>().ok().filter(|v| v.is_finite()) {
            Literal::Real(v)
        } else {
            return Err(syntax(start, format!("`{token}` is not a valid number")));
        };
        self.pos += len;
        Ok(literal)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Test {
    Integer(i64),
    Real(f64),
    Text(String),
}

/// A predicate resolved against one table's schema.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundPredicate {
    tests: Vec<(usize, CompareOp, Test)>,
}

impl Predicate {
    pub fn bind(&self, table: &TableData) -> Result<BoundPredicate> {
        let tests = self
            .atoms
            .iter()
            .map(|atom| {
                let idx = table
                    .column_index(&atom.column)
                    .ok_or_else(|| Error::Binding(format!("unknown column `{}`", atom.column)))?;
                let ty = table.column(idx).column_type();
                let mismatch = || {
                    Error::Binding(format!(
                        "column `{}` is {} and cannot be compared with {:?}",
                        atom.column,
                        ty.name(),
                        atom.literal
                    ))
                };
                let test = match (ty, &atom.literal) {
                    (ColumnType::Integer, Literal::Integer(v)) => Test::Integer(*v),
                    (ColumnType::Integer | ColumnType::Real, Literal::Real(v)) => Test::Real(*v),
                    (ColumnType::Real, Literal::Integer(v)) => Test::Real(*v as f64),
                    (ColumnType::Text, Literal::Text(s)) => {
                        if !matches!(atom.op, CompareOp::Eq | CompareOp::Ne) {
                            return Err(Error::Binding(format!(
                                "text column `{}` supports only = and !=",
                                atom.column
                            )));
                        }
                        Test::Text(s.clone())
                    }
                    _ => return Err(mismatch()),
                };
                Ok((idx, atom.op, test))
            })
            .collect::<Result<_>>()?;
        Ok(BoundPredicate { tests })
    }
}

impl BoundPredicate {
    pub fn matches(&self, table: &TableData, row: usize) -> bool {
        self.tests.iter().all(|(idx, op, test)| {
            let ord = match (table.column(*idx), test) {
                (Column::Integer(v), Test::Integer(x)) => v[row].cmp(x),
                (Column::Integer(v), Test::Real(x)) => {
                    (v[row] as f64).partial_cmp(x).expect("finite values")
                }
                (Column::Real(v), Test::Real(x)) => v[row].partial_cmp(x).expect("finite values"),
                (Column::Text(v), Test::Text(x)) => v[row].as_str().cmp(x.as_str()),
                _ => unreachable!("checked at bind time"),
            };
            op.holds(ord)
        })
    }
}

/// Exact number of matching rows, by full scan.
pub fn true_cardinality(table: &TableData, predicate: &Predicate) -> Result<u64> {
    let bound = predicate.bind(table)?;
    Ok((0..table.row_count())
        .into_par_iter()
        .filter(|&row| bound.matches(table, row))
        .count() as u64)
}
