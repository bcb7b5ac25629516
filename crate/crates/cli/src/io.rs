use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// 17 significant digits: round-trips every f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Output {
    path: Option<PathBuf>,
    inner: Box<dyn Write>,
}

impl Output {
    /// `path = None` writes to stdout.
    pub fn open(path: Option<&Path>) -> CliResult<Self> {
        let inner: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::io(p, e))?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Ok(Output { path: path.map(Path::to_owned), inner })
    }

    fn err(&self, e: io::Error) -> CliError {
        CliError::io(self.path.clone().unwrap_or_else(|| PathBuf::from("<stdout>")), e)
    }

    pub fn csv(self) -> CsvOut {
        CsvOut { writer: csv::Writer::from_writer(self.inner), path: self.path }
    }

    pub fn write_all(mut self, bytes: &[u8]) -> CliResult<()> {
        self.inner.write_all(bytes).map_err(|e| self.err(e))?;
        self.inner.flush().map_err(|e| self.err(e))
    }
}

pub struct CsvOut {
    writer: csv::Writer<Box<dyn Write>>,
    path: Option<PathBuf>,
}

impl CsvOut {
    fn err(&self, e: impl ToString) -> CliError {
        let path = self.path.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
        CliError::io(path, io::Error::other(e.to_string()))
    }

    pub fn record<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| self.err(e))
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.writer.flush().map_err(|e| self.err(e))
    }
}

/// One data row of a points file: its 1-based row number and either the
/// parsed values or a row-level error.
pub struct PointRow {
    pub row: usize,
    pub values: Result<Vec<f64>, String>,
}

/// Reads a CSV of points. A first line with any non-numeric field is a
/// header. Every data row must have `dimension` fields.
pub fn read_points(path: &Path, dimension: usize) -> CliResult<Vec<PointRow>> {
    let file = File::open(path).map_err(|e| CliError::read(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let mut rows = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let parsed: Vec<Result<f64, String>> = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| format!("'{f}' is not a number")))
            .collect();
        if first {
            first = false;
            if parsed.iter().any(Result::is_err) {
                continue;
            }
        }
        let row = rows.len() + 1;
        if record.len() != dimension {
            return Err(CliError::Input(format!(
                "{}: points row {row} has {} columns but the model has dimension {dimension}",
                path.display(),
                record.len()
            )));
        }
        let values = parsed
            .into_iter()
            .enumerate()
            .map(|(j, v)| v.map_err(|m| format!("column {}: {m}", j + 1)))
            .collect();
        rows.push(PointRow { row, values });
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}
