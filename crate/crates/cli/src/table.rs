//! Versioned CSV schemas. Every file starts with a header row; the schema
//! version is part of the file name (`plot_v1.csv`). Rows are checked against
//! the schema before they are written.

use std::fs::File;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Text,
    Float,
    Int,
    Bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Column {
    pub name: &'static str,
    pub kind: Kind,
    /// Whether the cell may be left empty.
    pub optional: bool,
}

const fn col(name: &'static str, kind: Kind) -> Column {
    Column {
        name,
        kind,
        optional: false,
    }
}

const fn opt(name: &'static str, kind: Kind) -> Column {
    Column {
        name,
        kind,
        optional: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schema {
    pub name: &'static str,
    pub version: u32,
    pub columns: &'static [Column],
}

impl Schema {
    pub fn file_name(&self) -> String {
        format!("{}_v{}.csv", self.name, self.version)
    }

    pub fn header(&self) -> Vec<&'static str> {
        self.columns.iter().map(|c| c.name).collect()
    }
}

pub const PLOT: Schema = Schema {
    name: "plot",
    version: 1,
    columns: &[
        col("t", Kind::Float),
        col("f_true", Kind::Float),
        col("f_hat", Kind::Float),
        col("P_approx", Kind::Float),
    ],
};

pub const SPIKES: Schema = Schema {
    name: "spikes",
    version: 1,
    columns: &[
        col("source", Kind::Text),
        col("t", Kind::Float),
        col("weight", Kind::Float),
    ],
};

pub const SWEEP: Schema = Schema {
    name: "sweep",
    version: 1,
    columns: &[
        col("axis", Kind::Text),
        col("value", Kind::Float),
        col("mode", Kind::Text),
        col("seed", Kind::Int),
        col("status", Kind::Text),
        opt("message", Kind::Text),
        opt("lambda", Kind::Float),
        opt("lambda0", Kind::Float),
        opt("below_lambda0", Kind::Bool),
        opt("true_atoms", Kind::Int),
        opt("recovered_atoms", Kind::Int),
        opt("global_control", Kind::Float),
        opt("global_ok", Kind::Bool),
        opt("local_ok", Kind::Bool),
        opt("localization_ok", Kind::Bool),
        opt("duality_gap", Kind::Float),
        opt("max_kkt_residual", Kind::Float),
        opt("boundary_residual", Kind::Float),
    ],
};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Float(f64),
    Int(i64),
    Bool(bool),
    Empty,
}

impl Cell {
    fn kind(&self) -> Option<Kind> {
        match self {
            Cell::Text(_) => Some(Kind::Text),
            Cell::Float(_) => Some(Kind::Float),
            Cell::Int(_) => Some(Kind::Int),
            Cell::Bool(_) => Some(Kind::Bool),
            Cell::Empty => None,
        }
    }

    /// Floats use `Debug` formatting: locale-free, round-tripping, and exponential at extreme magnitudes.
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Float(v) => format!("{v:?}"),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

pub fn validate_row(schema: &Schema, row: &[Cell]) -> CliResult<()> {
    let fail = |message: String| CliError::Schema {
        schema: schema.name,
        message,
    };
    if row.len() != schema.columns.len() {
        return Err(fail(format!(
            "expected {} cells, got {}",
            schema.columns.len(),
            row.len()
        )));
    }
    for (c, cell) in schema.columns.iter().zip(row) {
        match cell.kind() {
            None if !c.optional => return Err(fail(format!("column `{}` may not be empty", c.name))),
            None => {}
            Some(k) if k != c.kind => {
                return Err(fail(format!("column `{}` expects {:?}, got {:?}", c.name, c.kind, k)));
            }
            Some(_) => {}
        }
        match cell {
            Cell::Float(v) if !v.is_finite() => {
                return Err(fail(format!("column `{}` holds non-finite value {v}", c.name)));
            }
            Cell::Text(s) if s.contains(['\n', '\r']) => {
                return Err(fail(format!("column `{}` holds a line break", c.name)));
            }
            _ => {}
        }
    }
    Ok(())
}

pub struct TableWriter {
    schema: Schema,
    path: PathBuf,
    inner: csv::Writer<File>,
    rows: usize,
}

impl TableWriter {
    /// Creates `dir/<schema file name>` and writes the header.
    pub fn create(dir: &Path, schema: Schema) -> CliResult<Self> {
        let path = dir.join(schema.file_name());
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut inner = csv::Writer::from_writer(file);
        inner.write_record(schema.header()).map_err(|e| csv_error(&path, e))?;
        Ok(Self {
            schema,
            path,
            inner,
            rows: 0,
        })
    }

    pub fn write_row(&mut self, row: &[Cell]) -> CliResult<()> {
        validate_row(&self.schema, row)?;
        self.inner
            .write_record(row.iter().map(Cell::render))
            .map_err(|e| csv_error(&self.path, e))?;
        self.rows += 1;
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<(PathBuf, usize)> {
        self.inner.flush().map_err(|e| CliError::io(&self.path, e))?;
        Ok((self.path, self.rows))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::io(path, std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_validated() {
        assert!(validate_row(&SPIKES, &["true".into(), 0.5.into(), (-1.0).into()]).is_ok());
        assert!(validate_row(&SPIKES, &["true".into(), 0.5.into()]).is_err());
        assert!(validate_row(&SPIKES, &["true".into(), f64::NAN.into(), 1.0.into()]).is_err());
        assert!(validate_row(&SPIKES, &[1.0.into(), 0.5.into(), 1.0.into()]).is_err());
        assert!(validate_row(&SPIKES, &["true".into(), Cell::Empty, 1.0.into()]).is_err());
    }

    #[test]
    fn header_and_file_name() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = TableWriter::create(dir.path(), SPIKES).unwrap();
        w.write_row(&["recovered".into(), 0.25.into(), 1e-300.into()]).unwrap();
        let (path, rows) = w.finish().unwrap();
        assert_eq!(rows, 1);
        assert!(path.ends_with("spikes_v1.csv"));
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text, "source,t,weight\nrecovered,0.25,1e-300\n");
    }

    #[test]
    fn sweep_schema_allows_empty_metrics() {
        let mut row: Vec<Cell> = vec![
            "lambda".into(),
            0.1.into(),
            "recover-spikes".into(),
            Cell::Int(3),
            "failed".into(),
        ];
        row.resize(SWEEP.columns.len(), Cell::Empty);
        assert!(validate_row(&SWEEP, &row).is_ok());
    }
}
