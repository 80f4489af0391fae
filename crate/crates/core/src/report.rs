//! Report writers: JSON with sorted keys and CSV with a header row.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

/// Pretty JSON with object keys sorted, terminated by a newline.
pub fn to_sorted_json<T: Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("report values serialize");
    let mut text = serde_json::to_string_pretty(&value).expect("json values print");
    text.push('\n');
    text
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    ensure_parent(path)?;
    fs::write(path, to_sorted_json(value))
}

/// CSV text; the header is written even when there are no rows.
pub fn to_csv<R: Serialize>(header: &[&str], rows: &[R]) -> io::Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv<R: Serialize>(path: &Path, header: &[&str], rows: &[R]) -> io::Result<()> {
    ensure_parent(path)?;
    fs::write(path, to_csv(header, rows)?)
}

fn ensure_parent(path: &Path) -> io::Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir),
        _ => Ok(()),
    }
}
