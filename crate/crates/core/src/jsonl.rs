//! Line-delimited JSON reading and writing shared by every dataset format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Reads one record per non-blank line. Errors carry the 1-based line number.
pub fn read<T: DeserializeOwned>(path: &Path, module: &'static str) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(module, path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(module, path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            module,
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push((idx + 1, record));
    }
    Ok(out)
}

pub fn write<T: Serialize>(path: &Path, records: &[T], module: &'static str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(module, parent, e))?;
        }
    }
    let file = File::create(path).map_err(|e| Error::io(module, path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(module, path, e))?;
    }
    w.flush().map_err(|e| Error::io(module, path, e))
}

/// Writes a single pretty-printed JSON document followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T, module: &'static str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(module, parent, e))?;
        }
    }
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(module, path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path, module: &'static str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(module, path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        module,
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}
