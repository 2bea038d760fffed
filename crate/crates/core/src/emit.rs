//! Tuple sinks: one CSV file per table, a single SQL script, or in memory.
//!
//! CSV dialect: UTF-8 without BOM, `\n` line endings, `,` separator, a header
//! row, and RFC 4180 quoting (a field is quoted when it contains `,`, `"`,
//! CR or LF, with embedded quotes doubled). NULL is an empty unquoted field
//! and the empty string is `""`, so the two stay distinguishable.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::engine::{EdgeRow, Tuple, Value};
use crate::schema::{emit_ddl, sql_ident, RelationalSchema, TableDef, EDGE_TABLE};

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("tuple for `{table}` has {got} values but the table has {expected} columns")]
    Arity {
        table: String,
        got: usize,
        expected: usize,
    },
    #[error("sink already finalized")]
    Finalized,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Destination for shredded rows.
pub trait Sink {
    fn write_tuple(&mut self, tuple: &Tuple) -> Result<(), SinkError>;
    fn write_edge(&mut self, row: &EdgeRow) -> Result<(), SinkError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Sql,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "sql" => Ok(OutputFormat::Sql),
            other => Err(format!("unknown format `{other}` (expected csv or sql)")),
        }
    }
}

/// Encodes one value as a CSV field.
pub fn csv_field(v: &Value) -> Cow<'_, str> {
    match v {
        Value::Null => Cow::Borrowed(""),
        Value::Int(i) => Cow::Owned(i.to_string()),
        Value::Text(s) if s.is_empty() => Cow::Borrowed("\"\""),
        Value::Text(s) if s.contains([',', '"', '\r', '\n']) => {
            Cow::Owned(format!("\"{}\"", s.replace('"', "\"\"")))
        }
        Value::Text(s) => Cow::Borrowed(s),
    }
}

/// A full CSV record including the trailing `\n`.
pub fn csv_record(values: &[Value]) -> String {
    let mut line = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        line.push_str(&csv_field(v));
    }
    line.push('\n');
    line
}

fn csv_header(table: &TableDef) -> String {
    let fields: Vec<Value> = table
        .column_names()
        .map(|c| Value::Text(c.to_string()))
        .collect();
    csv_record(&fields)
}

pub fn sql_literal(v: &Value) -> Cow<'_, str> {
    match v {
        Value::Null => Cow::Borrowed("NULL"),
        Value::Int(i) => Cow::Owned(i.to_string()),
        Value::Text(s) => Cow::Owned(format!("'{}'", s.replace('\'', "''"))),
    }
}

pub fn insert_statement(table: &TableDef, values: &[Value]) -> String {
    let cols: Vec<Cow<'_, str>> = table.column_names().map(sql_ident).collect();
    let vals: Vec<Cow<'_, str>> = values.iter().map(sql_literal).collect();
    format!(
        "INSERT INTO {} ({}) VALUES ({});\n",
        sql_ident(&table.name),
        cols.join(","),
        vals.join(",")
    )
}

/// Files written and rows per table, in schema order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SinkReport {
    pub files: Vec<PathBuf>,
    pub rows: Vec<(String, u64)>,
}

impl SinkReport {
    pub fn rows_for(&self, table: &str) -> Option<u64> {
        self.rows.iter().find(|(t, _)| t == table).map(|&(_, n)| n)
    }

    pub fn total_rows(&self) -> u64 {
        self.rows.iter().map(|(_, n)| n).sum()
    }
}

impl fmt::Display for SinkReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (table, n) in &self.rows {
            writeln!(f, "{table}: {n}")?;
        }
        Ok(())
    }
}

/// Table lookup plus row counters shared by the file sinks.
#[derive(Debug)]
struct Tables {
    defs: Vec<TableDef>,
    index: HashMap<String, usize>,
    edge: Option<usize>,
    counts: Vec<u64>,
}

impl Tables {
    fn new(schema: &RelationalSchema) -> Self {
        let defs = schema.tables().to_vec();
        let index = defs
            .iter()
            .enumerate()
            .map(|(i, t)| (t.name.clone(), i))
            .collect();
        Tables {
            counts: vec![0; defs.len()],
            edge: schema.edge_table_index(),
            defs,
            index,
        }
    }

    fn resolve(&self, tuple: &Tuple) -> Result<usize, SinkError> {
        let i = *self
            .index
            .get(&tuple.table)
            .ok_or_else(|| SinkError::UnknownTable(tuple.table.clone()))?;
        let expected = self.defs[i].columns.len();
        if tuple.values.len() != expected {
            return Err(SinkError::Arity {
                table: tuple.table.clone(),
                got: tuple.values.len(),
                expected,
            });
        }
        Ok(i)
    }

    fn edge(&self) -> Result<usize, SinkError> {
        self.edge
            .ok_or_else(|| SinkError::UnknownTable(EDGE_TABLE.to_string()))
    }

    fn report(&self, files: Vec<PathBuf>) -> SinkReport {
        SinkReport {
            files,
            rows: self
                .defs
                .iter()
                .zip(&self.counts)
                .map(|(t, &n)| (t.name.clone(), n))
                .collect(),
        }
    }
}

/// Writes `<Table>.csv` files into a directory, opening each on its first row.
#[derive(Debug)]
pub struct CsvSink {
    dir: PathBuf,
    tables: Tables,
    writers: Vec<Option<BufWriter<File>>>,
    emit_empty: bool,
    report: Option<SinkReport>,
}

impl CsvSink {
    /// With `emit_empty`, tables that never receive a row still get a
    /// header-only file at [`finalize`](Self::finalize).
    pub fn create(
        schema: &RelationalSchema,
        dir: impl AsRef<Path>,
        emit_empty: bool,
    ) -> Result<Self, SinkError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let tables = Tables::new(schema);
        Ok(CsvSink {
            writers: (0..tables.defs.len()).map(|_| None).collect(),
            dir,
            tables,
            emit_empty,
            report: None,
        })
    }

    pub fn path_for(&self, table: &str) -> PathBuf {
        self.dir.join(format!("{table}.csv"))
    }

    fn writer(&mut self, i: usize) -> Result<&mut BufWriter<File>, SinkError> {
        if self.report.is_some() {
            return Err(SinkError::Finalized);
        }
        if self.writers[i].is_none() {
            let def = &self.tables.defs[i];
            let mut w = BufWriter::new(File::create(self.path_for(&def.name))?);
            w.write_all(csv_header(def).as_bytes())?;
            self.writers[i] = Some(w);
        }
        Ok(self.writers[i].as_mut().expect("opened above"))
    }

    fn write_row(&mut self, i: usize, values: &[Value]) -> Result<(), SinkError> {
        let line = csv_record(values);
        self.writer(i)?.write_all(line.as_bytes())?;
        self.tables.counts[i] += 1;
        Ok(())
    }

    /// Flushes and closes every file; later calls return the same report.
    pub fn finalize(&mut self) -> Result<SinkReport, SinkError> {
        if let Some(r) = &self.report {
            return Ok(r.clone());
        }
        if self.emit_empty {
            for i in 0..self.writers.len() {
                self.writer(i)?;
            }
        }
        let mut files = Vec::new();
        for (i, w) in self.writers.iter_mut().enumerate() {
            if let Some(mut w) = w.take() {
                w.flush()?;
                files.push(self.dir.join(format!("{}.csv", self.tables.defs[i].name)));
            }
        }
        let report = self.tables.report(files);
        self.report = Some(report.clone());
        Ok(report)
    }
}

impl Sink for CsvSink {
    fn write_tuple(&mut self, tuple: &Tuple) -> Result<(), SinkError> {
        let i = self.tables.resolve(tuple)?;
        self.write_row(i, &tuple.values)
    }

    fn write_edge(&mut self, row: &EdgeRow) -> Result<(), SinkError> {
        let i = self.tables.edge()?;
        self.write_row(i, &row.values())
    }
}

/// Writes the DDL followed by one `INSERT` per row into a single file.
#[derive(Debug)]
pub struct SqlSink {
    path: PathBuf,
    tables: Tables,
    out: Option<BufWriter<File>>,
    report: Option<SinkReport>,
}

impl SqlSink {
    pub fn create(schema: &RelationalSchema, path: impl AsRef<Path>) -> Result<Self, SinkError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let mut out = BufWriter::new(File::create(&path)?);
        out.write_all(emit_ddl(schema).as_bytes())?;
        Ok(SqlSink {
            path,
            tables: Tables::new(schema),
            out: Some(out),
            report: None,
        })
    }

    fn write_row(&mut self, i: usize, values: &[Value]) -> Result<(), SinkError> {
        let stmt = insert_statement(&self.tables.defs[i], values);
        self.out
            .as_mut()
            .ok_or(SinkError::Finalized)?
            .write_all(stmt.as_bytes())?;
        self.tables.counts[i] += 1;
        Ok(())
    }

    pub fn finalize(&mut self) -> Result<SinkReport, SinkError> {
        if let Some(r) = &self.report {
            return Ok(r.clone());
        }
        if let Some(mut out) = self.out.take() {
            out.flush()?;
        }
        let report = self.tables.report(vec![self.path.clone()]);
        self.report = Some(report.clone());
        Ok(report)
    }
}

impl Sink for SqlSink {
    fn write_tuple(&mut self, tuple: &Tuple) -> Result<(), SinkError> {
        let i = self.tables.resolve(tuple)?;
        self.write_row(i, &tuple.values)
    }

    fn write_edge(&mut self, row: &EdgeRow) -> Result<(), SinkError> {
        let i = self.tables.edge()?;
        self.write_row(i, &row.values())
    }
}

#[derive(Debug)]
pub enum FileSink {
    Csv(CsvSink),
    Sql(SqlSink),
}

impl FileSink {
    pub fn finalize(&mut self) -> Result<SinkReport, SinkError> {
        match self {
            FileSink::Csv(s) => s.finalize(),
            FileSink::Sql(s) => s.finalize(),
        }
    }
}

impl Sink for FileSink {
    fn write_tuple(&mut self, tuple: &Tuple) -> Result<(), SinkError> {
        match self {
            FileSink::Csv(s) => s.write_tuple(tuple),
            FileSink::Sql(s) => s.write_tuple(tuple),
        }
    }

    fn write_edge(&mut self, row: &EdgeRow) -> Result<(), SinkError> {
        match self {
            FileSink::Csv(s) => s.write_edge(row),
            FileSink::Sql(s) => s.write_edge(row),
        }
    }
}

/// CSV: `destination` is a directory. SQL: `destination` is the script path.
pub fn open_sink(
    schema: &RelationalSchema,
    format: OutputFormat,
    destination: impl AsRef<Path>,
    emit_empty: bool,
) -> Result<FileSink, SinkError> {
    Ok(match format {
        OutputFormat::Csv => FileSink::Csv(CsvSink::create(schema, destination, emit_empty)?),
        OutputFormat::Sql => FileSink::Sql(SqlSink::create(schema, destination)?),
    })
}

/// Keeps every row in emission order.
#[derive(Debug, Clone, Default)]
pub struct MemorySink {
    pub tuples: Vec<Tuple>,
    pub edges: Vec<EdgeRow>,
}

impl MemorySink {
    pub fn rows(&self, table: &str) -> Vec<&Tuple> {
        self.tuples.iter().filter(|t| t.table == table).collect()
    }
}

impl Sink for MemorySink {
    fn write_tuple(&mut self, tuple: &Tuple) -> Result<(), SinkError> {
        self.tuples.push(tuple.clone());
        Ok(())
    }

    fn write_edge(&mut self, row: &EdgeRow) -> Result<(), SinkError> {
        self.edges.push(row.clone());
        Ok(())
    }
}

/// Counts rows and value bytes without retaining them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CountingSink {
    pub tuples: u64,
    pub edges: u64,
    pub bytes: u64,
}

impl Sink for CountingSink {
    fn write_tuple(&mut self, tuple: &Tuple) -> Result<(), SinkError> {
        self.tuples += 1;
        self.bytes += tuple
            .values
            .iter()
            .map(|v| v.as_text().map_or(8, str::len) as u64)
            .sum::<u64>();
        Ok(())
    }

    fn write_edge(&mut self, row: &EdgeRow) -> Result<(), SinkError> {
        self.edges += 1;
        self.bytes += 16 + (row.parent_type.len() + row.child_type.len()) as u64;
        Ok(())
    }
}
