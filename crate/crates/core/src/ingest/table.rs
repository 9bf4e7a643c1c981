//! CSV loading with per-column type inference.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Integer,
    Real,
    Text,
}

impl ColumnType {
    pub fn name(self) -> &'static str {
        match self {
            ColumnType::Integer => "integer",
            ColumnType::Real => "real",
            ColumnType::Text => "text",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "integer" | "int" => Ok(ColumnType::Integer),
            "real" | "float" => Ok(ColumnType::Real),
            "text" | "string" => Ok(ColumnType::Text),
            other => Err(Error::usage(format!(
                "unknown column type `{other}` (expected integer, real or text)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Integer(Vec<i64>),
    Real(Vec<f64>),
    Text(Vec<String>),
}

impl Column {
    pub fn column_type(&self) -> ColumnType {
        match self {
            Column::Integer(_) => ColumnType::Integer,
            Column::Real(_) => ColumnType::Real,
            Column::Text(_) => ColumnType::Text,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Column::Integer(v) => v.len(),
            Column::Real(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Column-oriented table: `m` named, typed columns of `n` rows each.
#[derive(Debug, Clone, PartialEq)]
pub struct TableData {
    names: Vec<String>,
    columns: Vec<Column>,
    rows: usize,
}

impl TableData {
    pub fn from_columns(names: Vec<String>, columns: Vec<Column>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::usage("one name per column is required"));
        }
        if names.is_empty() {
            return Err(Error::usage("a table needs at least one column"));
        }
        let rows = columns[0].len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::usage("all columns must have the same length"));
        }
        Ok(Self {
            names,
            columns,
            rows,
        })
    }

    pub fn row_count(&self) -> usize {
        self.rows
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }

    pub fn column_types(&self) -> Vec<ColumnType> {
        self.columns.iter().map(Column::column_type).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub has_header: bool,
    /// Declared types by column name (or `c1`, `c2`, ... without a header).
    pub type_hints: HashMap<String, ColumnType>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
            type_hints: HashMap::new(),
        }
    }
}

pub fn load_table(path: impl AsRef<Path>, options: &LoadOptions) -> Result<TableData> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_table(file, options).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Reads a table from any reader. Line numbers in errors are 1-based and
/// count the header line.
pub fn read_table<R: Read>(reader: R, options: &LoadOptions) -> Result<TableData> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut names: Option<Vec<String>> = None;
    let mut cells: Vec<Vec<String>> = Vec::new();
    let mut lines: Vec<u64> = Vec::new();
    let mut width = None;
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {w} fields, found {}", record.len()),
                });
            }
            _ => {}
        }
        if options.has_header && names.is_none() {
            names = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        if cells.is_empty() {
            cells = vec![Vec::new(); record.len()];
        }
        for (col, field) in cells.iter_mut().zip(record.iter()) {
            col.push(field.to_string());
        }
        lines.push(line);
    }
    let Some(width) = width else {
        return Err(Error::Parse {
            line: 1,
            message: "the file is empty".to_string(),
        });
    };
    let names = names.unwrap_or_else(|| (1..=width).map(|i| format!("c{i}")).collect());
    if cells.is_empty() {
        cells = vec![Vec::new(); width];
    }
    for (i, name) in names.iter().enumerate() {
        if names[..i].contains(name) {
            return Err(Error::Parse {
                line: 1,
                message: format!("duplicate column name `{name}`"),
            });
        }
    }
    for hinted in options.type_hints.keys() {
        if !names.contains(hinted) {
            return Err(Error::usage(format!(
                "type hint for unknown column `{hinted}`"
            )));
        }
    }
    let columns = names
        .iter()
        .zip(cells)
        .map(|(name, raw)| build_column(name, raw, options.type_hints.get(name).copied(), &lines))
        .collect::<Result<Vec<_>>>()?;
    TableData::from_columns(names, columns)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: Default::default(),
                source,
            },
            _ => unreachable!("checked is_io_error"),
        }
    } else {
        Error::Parse {
            line,
            message: e.to_string(),
        }
    }
}

fn parse_int(s: &str) -> Option<i64> {
    s.parse().ok()
}

fn parse_real(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn infer(raw: &[String]) -> ColumnType {
    if raw.iter().all(|s| parse_int(s).is_some()) {
        ColumnType::Integer
    } else if raw.iter().all(|s| parse_real(s).is_some()) {
        ColumnType::Real
    } else {
        ColumnType::Text
    }
}

fn build_column(
    name: &str,
    raw: Vec<String>,
    hint: Option<ColumnType>,
    lines: &[u64],
) -> Result<Column> {
    let ty = hint.unwrap_or_else(|| infer(&raw));
    let bad = |i: usize, what: &str| Error::Parse {
        line: lines[i],
        message: format!("column `{name}`: `{}` is not {what}", raw[i]),
    };
    Ok(match ty {
        ColumnType::Integer => Column::Integer(
            raw.iter()
                .enumerate()
                .map(|(i, s)| parse_int(s).ok_or_else(|| bad(i, "an integer")))
                .collect::<Result<_>>()?,
        ),
        ColumnType::Real => Column::Real(
            raw.iter()
                .enumerate()
                .map(|(i, s)| parse_real(s).ok_or_else(|| bad(i, "a finite real")))
                .collect::<Result<_>>()?,
        ),
        ColumnType::Text => Column::Text(raw),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn read(text: &str) -> Result<TableData> {
        read_table(text.as_bytes(), &LoadOptions::default())
    }

    #[test]
    fn small_table_with_header() {
        let t = read("a,b\n1,x\n2,y\n3,z\n").unwrap();
        assert_eq!((t.row_count(), t.column_count()), (3, 2));
        assert_eq!(
            t.column_types(),
            vec![ColumnType::Integer, ColumnType::Text]
        );
        assert_eq!(t.names(), ["a", "b"]);
    }

    #[test]
    fn promotes_integer_to_real() {
        let t = read("v\n1\n2.5\n-3\n").unwrap();
        assert_eq!(t.column(0), &Column::Real(vec![1.0, 2.5, -3.0]));
    }

    #[test]
    fn ragged_row_names_line() {
        match read("a,b\n1,2\n3\n4,5\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(read(""), Err(Error::Parse { .. })));
        let t = read("a,b\n").unwrap();
        assert_eq!(t.row_count(), 0);
    }

    #[test]
    fn blank_cell_degrades_to_text_unless_hinted() {
        let t = read("a,b\n1,2\n,3\n").unwrap();
        assert_eq!(
            t.column_types(),
            vec![ColumnType::Text, ColumnType::Integer]
        );
        let mut opts = LoadOptions::default();
        opts.type_hints.insert("a".into(), ColumnType::Integer);
        match read_table("a,b\n1,2\n,3\n".as_bytes(), &opts) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        opts.type_hints.clear();
        opts.type_hints.insert("b".into(), ColumnType::Text);
        let t = read_table("a,b\n1,2\n".as_bytes(), &opts).unwrap();
        assert_eq!(t.column(1), &Column::Text(vec!["2".into()]));
    }

    #[test]
    fn headerless_and_custom_delimiter() {
        let opts = LoadOptions {
            delimiter: b';',
            has_header: false,
            type_hints: HashMap::new(),
        };
        let t = read_table("1;2.5\n3;4\n".as_bytes(), &opts).unwrap();
        assert_eq!(t.names(), ["c1", "c2"]);
        assert_eq!(t.row_count(), 2);
        assert_eq!(
            t.column_types(),
            vec![ColumnType::Integer, ColumnType::Real]
        );
    }

    #[test]
    fn rejects_duplicate_names_and_unknown_hints() {
        assert!(read("a,a\n1,2\n").is_err());
        let mut opts = LoadOptions::default();
        opts.type_hints.insert("zz".into(), ColumnType::Real);
        assert!(matches!(
            read_table("a\n1\n".as_bytes(), &opts),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_table("/nonexistent/table.csv", &LoadOptions::default()).unwrap_err();
        assert!(err.is_io());
    }

    #[test]
    fn loads_from_disk() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "name,score").unwrap();
        writeln!(f, "'a',1.5").unwrap();
        writeln!(f, "\"b, c\",2").unwrap();
        let t = load_table(f.path(), &LoadOptions::default()).unwrap();
        assert_eq!(t.row_count(), 2);
        assert_eq!(
            t.column(0),
            &Column::Text(vec!["'a'".into(), "b, c".into()])
        );
    }
}
