// Copyright 2026 The qbattery Authors
// SPDX-License-Identifier: Apache-2.0

//! CSV and JSON artifact writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::CliError;

pub const SCHEMA_LINE: &str = "# schema=1";

/// Creates the output directory and returns `dir/name`.
pub fn artifact(dir: &Path, name: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create output directory {}: {e}", dir.display())))?;
    Ok(dir.join(name))
}

/// Shortest round-trip decimal form; missing values become empty fields.
pub fn num(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v}"),
        Some(v) if v.is_nan() => "nan".to_owned(),
        Some(v) if v > 0.0 => "inf".to_owned(),
        Some(_) => "-inf".to_owned(),
        None => String::new(),
    }
}

pub struct CsvOut {
    writer: csv::Writer<BufWriter<File>>,
    path: PathBuf,
}

impl CsvOut {
    pub fn create(path: PathBuf, header: &[&str]) -> Result<Self, CliError> {
        let file = File::create(&path)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))?;
        let mut buf = BufWriter::new(file);
        writeln!(buf, "{SCHEMA_LINE}")?;
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(buf);
        writer.write_record(header)?;
        Ok(CsvOut { writer, path })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.writer.flush()?;
        log::info!("wrote {}", self.path.display());
        Ok(self.path)
    }
}

pub fn write_json(path: PathBuf, value: &serde_json::Value) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(path)
}
