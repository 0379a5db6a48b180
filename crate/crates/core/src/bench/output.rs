//! Versioned CSV and JSON persistence.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::Result;

/// First line of every CSV written by the harness.
pub const SCHEMA_LINE: &str = "# schema=1";

/// Writes `rows` as CSV after the schema comment line.
pub fn write_csv<W: Write, R: Serialize>(writer: W, rows: &[R]) -> Result<()> {
    let mut writer = writer;
    writeln!(writer, "{SCHEMA_LINE}")?;
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    write_csv(BufWriter::new(File::create(path)?), rows)
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Runs `f` inside a thread pool of the given size.
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| crate::Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: Option<f64>,
    }

    #[test]
    fn schema_line_precedes_header() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[Row { a: 1, b: Some(0.5) }, Row { a: 2, b: None }]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# schema=1\na,b\n1,0.5\n2,\n");
    }
}
