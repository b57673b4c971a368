//! Diagnostics CSV files.
//!
//! The first line is `# schema: mps.diagnostics.v1`, then a header naming
//! every column, then one row per record. Floats are written in shortest
//! round-trip form, so identical runs give identical bytes.

use crate::error::{Error, Result};
use crate::solver::DiagnosticsRecord;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

pub const DIAGNOSTICS_SCHEMA: &str = "mps.diagnostics.v1";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";

pub struct DiagnosticsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> DiagnosticsWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "# schema: {DIAGNOSTICS_SCHEMA}")?;
        Ok(Self {
            inner: csv::Writer::from_writer(out),
        })
    }

    pub fn write(&mut self, record: &DiagnosticsRecord) -> Result<()> {
        self.inner.serialize(record)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

/// Parses a diagnostics file; `name` labels errors.
pub fn parse_diagnostics<R: Read>(input: R, name: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut input = BufReader::new(input);
    let mut first = String::new();
    input.read_line(&mut first)?;
    let parse_err = |line: u64, msg: String| Error::Parse {
        file: name.to_string(),
        line,
        msg,
    };
    match first.trim().strip_prefix("# schema:").map(str::trim) {
        Some(DIAGNOSTICS_SCHEMA) => {}
        Some(other) => return Err(parse_err(1, format!("unsupported schema {other:?}"))),
        None => return Err(parse_err(1, "missing schema line".into())),
    }
    let mut reader = csv::Reader::from_reader(input);
    let mut records: Vec<DiagnosticsRecord> = Vec::new();
    for row in reader.deserialize() {
        let record: DiagnosticsRecord = row.map_err(|e| {
            // csv counts lines from after the schema line.
            let line = e.position().map_or(0, |p| p.line() + 1);
            parse_err(line, e.to_string())
        })?;
        if let Some(last) = records.last() {
            if record.t < last.t {
                return Err(parse_err(
                    records.len() as u64 + 3,
                    format!("time goes backwards ({} after {})", record.t, last.t),
                ));
            }
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let file = std::fs::File::open(path)?;
    parse_diagnostics(file, &path.display().to_string())
}
