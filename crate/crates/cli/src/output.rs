//! One rendering path for text, CSV and JSON so the three formats always
//! print the same numbers.

use std::io::{self, Write};

use qbound_core::montecarlo::RNG_ALGORITHM;
use qbound_core::reports::format_sig9;
use qbound_core::{BoundTerm, VERSION};
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Val {
    Num(f64),
    Int(u64),
    Bool(bool),
    Str(String),
    Na,
}

impl Val {
    pub fn opt_num(v: Option<f64>) -> Self {
        v.map_or(Val::Na, Val::Num)
    }

    pub fn opt_int(v: Option<u64>) -> Self {
        v.map_or(Val::Na, Val::Int)
    }

    pub fn display(&self) -> String {
        match self {
            Val::Num(v) => format_sig9(*v),
            Val::Int(v) => v.to_string(),
            Val::Bool(b) => b.to_string(),
            Val::Str(s) => s.clone(),
            Val::Na => "NA".to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Val::Num(v) if v.is_finite() => json!(v),
            Val::Num(_) | Val::Na => Value::Null,
            Val::Int(v) => json!(v),
            Val::Bool(b) => json!(b),
            Val::Str(s) => json!(s),
        }
    }
}

/// Ordered key/value pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Record(pub Vec<(String, Val)>);

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, val: Val) -> &mut Self {
        self.0.push((key.into(), val));
        self
    }

    pub fn json(&self) -> Value {
        Value::Object(
            self.0
                .iter()
                .map(|(k, v)| (k.clone(), v.json()))
                .collect::<Map<_, _>>(),
        )
    }
}

pub fn terms_record(terms: &[BoundTerm]) -> Record {
    let mut r = Record::new();
    for t in terms {
        r.push(
            format!("{}_{}", t.inequality.name(), t.side.name()),
            Val::opt_num(t.probability),
        );
    }
    r
}

fn terms_json(terms: &[BoundTerm]) -> Value {
    Value::Array(
        terms
            .iter()
            .map(|t| {
                json!({
                    "inequality": t.inequality.name(),
                    "side": t.side.name(),
                    "probability": Val::opt_num(t.probability).json(),
                    "applicable": t.applicable(),
                })
            })
            .collect(),
    )
}

pub fn meta() -> Value {
    json!({ "version": VERSION, "rng": RNG_ALGORITHM })
}

/// The standard single-result report.
pub struct Report {
    pub query: Record,
    pub result: Record,
    pub terms: Vec<BoundTerm>,
}

impl Report {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => {
                let mut out = String::new();
                for (k, v) in self.query.0.iter().chain(self.result.0.iter()) {
                    out.push_str(&format!("{k}: {}\n", v.display()));
                }
                if !self.terms.is_empty() {
                    out.push_str("terms:\n");
                    for (k, v) in terms_record(&self.terms).0 {
                        out.push_str(&format!("  {k}: {}\n", v.display()));
                    }
                }
                out
            }
            Format::Csv => {
                let mut all = self.query.clone();
                all.0.extend(self.result.0.iter().cloned());
                all.0.extend(terms_record(&self.terms).0);
                csv_lines(&[all])
            }
            Format::Json => {
                let v = json!({
                    "query": self.query.json(),
                    "result": self.result.json(),
                    "terms": terms_json(&self.terms),
                    "meta": meta(),
                });
                format!(
                    "{}\n",
                    serde_json::to_string_pretty(&v).expect("serializable")
                )
            }
        }
    }
}

/// CSV with one header line taken from the first record.
pub fn csv_lines(records: &[Record]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    if let Some(first) = records.first() {
        w.write_record(first.0.iter().map(|(k, _)| k.as_str()))
            .expect("in-memory writer");
    }
    for r in records {
        w.write_record(r.0.iter().map(|(_, v)| v.display()))
            .expect("in-memory writer");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("UTF-8")
}

pub fn emit(text: &str) -> io::Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()
}
