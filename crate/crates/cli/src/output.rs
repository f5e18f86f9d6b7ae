// Copyright 2026 trajkrotov Contributors
// SPDX-License-Identifier: Apache-2.0

//! CSV artifacts with a `#` comment header naming the producing command and
//! the config hash.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Shortest text that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub struct CsvSink {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvSink {
    pub fn create(path: &Path, kind: &str, config_hash: &str, columns: &[&str]) -> Result<Self> {
        Self::with_comments(path, kind, config_hash, &[], columns)
    }

    pub fn with_comments(
        path: &Path,
        kind: &str,
        config_hash: &str,
        comments: &[String],
        columns: &[&str],
    ) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "# trajkrotov {kind}")?;
        writeln!(out, "# config-hash: {config_hash}")?;
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(columns)?;
        Ok(Self {
            path: path.to_owned(),
            writer,
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .with_context(|| format!("cannot write {}", self.path.display()))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.writer
            .flush()
            .with_context(|| format!("cannot write {}", self.path.display()))
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.flush()?;
        Ok(self.path)
    }
}

/// Reads the data rows of a CSV written by [`CsvSink`], skipping comments.
pub fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let header = reader.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        rows.push(record?.iter().map(str::to_owned).collect());
    }
    Ok((header, rows))
}
