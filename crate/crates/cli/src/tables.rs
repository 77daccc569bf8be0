//! CSV tables. Every file starts with a `#schema_version=N` line followed by
//! a fixed header.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const TABLE_SCHEMA_VERSION: u32 = 1;

pub const TRAJECTORY_HEADER: &str = "episode,step,agent,x,y,heading,action,reward,captured,ratio";

/// Formats `v` with 9 significant digits.
pub fn sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        format!("{:.*}", (8 - exp).max(0) as usize, v)
    } else {
        format!("{v:.8e}")
    }
}

fn schema_line() -> String {
    format!("#schema_version={TABLE_SCHEMA_VERSION}")
}

/// Writes the schema line and header, then one CSV row per record.
pub struct TableWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl TableWriter<BufWriter<File>> {
    pub fn create(path: &Path, header: &str) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), header)
    }
}

impl<W: Write> TableWriter<W> {
    pub fn new(mut out: W, header: &str) -> Result<Self> {
        writeln!(out, "{}", schema_line())?;
        writeln!(out, "{header}")?;
        Ok(Self {
            inner: csv::WriterBuilder::new().has_headers(false).from_writer(out),
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| CliError::Io(e.into_error()))
    }
}

/// Reads a table, checking the schema line and exact header.
pub fn read_table<T: DeserializeOwned, R: Read>(input: R, name: &str, header: &str) -> Result<Vec<T>> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let version = line.trim_end();
    if version != schema_line() {
        return Err(CliError::SchemaVersion {
            file: name.into(),
            found: version.to_string(),
            expected: TABLE_SCHEMA_VERSION,
        });
    }
    let mut csv_reader = csv::ReaderBuilder::new().from_reader(reader);
    let found = csv_reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if found != header {
        return Err(CliError::Parse {
            file: name.into(),
            line: 2,
            message: format!("expected header `{header}`, found `{found}`"),
        });
    }
    let mut rows = Vec::new();
    for record in csv_reader.deserialize() {
        rows.push(record.map_err(|e| {
            // The schema line precedes the CSV body.
            let line = e.position().map_or(0, |p| p.line() + 1);
            let message = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                _ => e.to_string(),
            };
            CliError::Parse {
                file: name.into(),
                line,
                message,
            }
        })?);
    }
    Ok(rows)
}

pub fn read_table_file<T: DeserializeOwned>(path: &Path, header: &str) -> Result<Vec<T>> {
    if !path.exists() {
        return Err(CliError::Missing(path.to_path_buf()));
    }
    read_table(File::open(path)?, &path.display().to_string(), header)
}

/// One agent at one step. Positions and headings are post-move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub episode: u64,
    pub step: u64,
    /// `p0`..`p{n-1}` for pursuers, `e` for the evader.
    pub agent: String,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub action: f64,
    pub reward: f64,
    pub captured: u8,
    pub ratio: f64,
}

impl TrajectoryRow {
    pub fn fields(&self) -> [String; 10] {
        [
            self.episode.to_string(),
            self.step.to_string(),
            self.agent.clone(),
            sig9(self.x),
            sig9(self.y),
            sig9(self.heading),
            sig9(self.action),
            sig9(self.reward),
            self.captured.to_string(),
            sig9(self.ratio),
        ]
    }

    /// Pursuer index, or `None` for the evader.
    pub fn pursuer_index(&self) -> Result<Option<usize>> {
        if self.agent == "e" {
            return Ok(None);
        }
        self.agent
            .strip_prefix('p')
            .and_then(|i| i.parse().ok())
            .map(Some)
            .ok_or_else(|| CliError::Usage(format!("unknown agent id `{}`", self.agent)))
    }
}

pub fn agent_id(pursuer: usize) -> String {
    format!("p{pursuer}")
}
