//! CSV tables and JSON run summaries.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Result;

pub const SCHEMA_VERSION: u32 = 1;

/// Write `# schema=1`, a header line and one record per row.
pub fn write_csv_to<W: Write, R: Serialize>(mut out: W, rows: &[R]) -> Result<()> {
    writeln!(out, "# schema={SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_csv_to(f, rows)
}

/// Read a table written by [`write_csv`].
pub fn read_csv<R: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<R>> {
    let text = std::fs::read_to_string(path)?;
    let body = text
        .strip_prefix(&format!("# schema={SCHEMA_VERSION}\n"))
        .ok_or_else(|| crate::Error::Config(format!("{}: missing or unsupported schema line", path.display())))?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: u32,
    pub command: String,
    pub config_hashes: Vec<String>,
    pub configs: Vec<serde_json::Value>,
    pub rows: usize,
    pub attempted: usize,
    pub failures: usize,
    pub first_error: Option<String>,
    pub wall_time_s: f64,
    pub parallel: bool,
    pub version: String,
}

pub fn write_summary(path: &Path, summary: &RunSummary) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(summary)? + "\n")?;
    Ok(())
}
